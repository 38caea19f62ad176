//! Plain-text tables written by the CLI.

use std::io::Write;

use pexplore::analysis::{convergence_study, AnalysisError, ErrorReport, Slope, StudyTarget};
use pexplore::explore::Counters;
use pexplore::grid::{HyperbolicDomain, Interval};
use pexplore::interp::Slice;
use pexplore::model::ModelRegistry;
use pexplore::relevance::{build_relevance_model, RelevanceError};
use thiserror::Error;

use crate::config::{ConfigError, ErrorStudyFile, Target};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("relevance: {0}")]
    Relevance(#[from] RelevanceError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// One row per slice cell: both free coordinates, the value (empty when
/// missing) and its flag.
pub fn write_slice_csv<W: Write>(slice: &Slice, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([slice.axes[0].as_str(), slice.axes[1].as_str(), "value", "flag"])?;
    for (i, x) in slice.coords[0].iter().enumerate() {
        for (j, y) in slice.coords[1].iter().enumerate() {
            let value = slice.values[i][j].map(|v| v.to_string()).unwrap_or_default();
            w.write_record([x.to_string(), y.to_string(), value, slice.flags[i][j].as_str().to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn counters_line(c: &Counters) -> String {
    format!(
        "centers computed {}, neighbours computed {}, neighbours copied {}, failures {}, evaluations {}",
        c.centers_computed, c.neighbors_computed, c.neighbors_copied, c.failures, c.evaluations
    )
}

fn slope_text(s: Option<Slope>) -> String {
    match s {
        Some(s) => format!("{:.4} (95% CI {:.4} .. {:.4})", s.value, s.low, s.high),
        None => "n/a".into(),
    }
}

/// `level,grid_points,n,mean_L1,std_L1,integral_error` rows followed by the
/// fitted slopes as comment lines.
pub fn write_error_table<W: Write>(report: &ErrorReport, mut out: W) -> std::io::Result<()> {
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["level", "grid_points", "n", "mean_L1", "std_L1", "integral_error"])?;
        for (k, l) in report.levels.iter().enumerate() {
            w.write_record([
                k.to_string(),
                l.grid_points.to_string(),
                l.n.to_string(),
                l.l1_mean.to_string(),
                l.l1_std.to_string(),
                l.integral_error.to_string(),
            ])?;
        }
        w.flush()?;
    }
    writeln!(out, "# slope L1 vs n: {}", slope_text(report.l1_slope))?;
    writeln!(out, "# slope integral error vs n: {}", slope_text(report.integral_slope))?;
    if report.exact {
        writeln!(out, "# exact at every level")?;
    }
    Ok(())
}

/// Runs the study described by an `errorstudy` input file.
pub fn run_error_study(file: &ErrorStudyFile, registry: &ModelRegistry) -> Result<ErrorReport, StudyError> {
    if let Some(s) = &file.synthetic {
        return Ok(s.study(&file.study)?);
    }
    let run = file.run.as_ref().expect("checked on load");
    let resolved = run.resolve(registry)?;
    let (system, feature) = match &resolved.target {
        Target::Model { system, feature } => (system, feature),
        Target::Synthetic(s) => return Ok(s.study(&file.study)?),
    };
    let grid = &resolved.grid;
    let model = build_relevance_model(system.as_ref(), grid, &run.relevance, &feature.solver, &feature.cycle)?;
    let relevance = model.bind(system.as_ref());
    let domain = HyperbolicDomain::new(
        grid.axes.iter().map(|a| Interval { name: a.name.clone(), lo: a.lo, hi: a.hi }).collect(),
    )
    .map_err(AnalysisError::from)?;
    let target = StudyTarget {
        domain,
        base: grid.embedding().map(|e| e.base.clone()),
        feature,
        relevance: &relevance,
        exact_mean: None,
    };
    Ok(convergence_study(&target, &file.study)?)
}
