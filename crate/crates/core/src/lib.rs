//! Relevance-guided exploration of parameter spaces of ODE systems.
//!
//! The pipeline: pick a box of parameters where an attracting cycle persists,
//! lay a lattice over it, measure a scalar feature of the cycle (its maximum
//! budworm density, say) at selected lattice points, and copy values between
//! neighbours whenever a cheap vector-field surrogate predicts no relevant
//! variation. Linear interpolation then extends the partial map to the box.

pub mod model;
pub mod solver;
pub mod cycle;
pub mod grid;
pub mod relevance;
pub mod explore;
pub mod delaunay;
pub mod interp;
pub mod analysis;
