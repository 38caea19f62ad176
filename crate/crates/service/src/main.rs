use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pexplore::interp::{extract_slice, FixedValue};
use pexplore::model::ModelRegistry;
use pexplore_service::config::{ErrorStudyFile, RunConfig};
use pexplore_service::http::{self, AppState};
use pexplore_service::pipeline::{self, RunKind};
use pexplore_service::report;
use pexplore_service::store::RunStore;

#[derive(Parser)]
#[command(name = "pexplore", version, about = "Relevance-guided parameter-space exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exploration described by a config file and persist it.
    Explore {
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        store: PathBuf,
    },
    /// Evaluate the feature at every grid point and persist the result.
    Full {
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        store: PathBuf,
    },
    /// Write a 2-D slice of a persisted run as CSV.
    Slice {
        run_id: String,
        /// The two free axes, as A,B.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        axes: Vec<String>,
        /// Values of the remaining axes, as NAME=VALUE.
        #[arg(long, num_args = 1..)]
        fix: Vec<String>,
        #[arg(long, default_value = "runs")]
        store: PathBuf,
        /// Output file; standard output when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Empirical error law of the interpolated field under refinement.
    Errorstudy {
        config: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Serve persisted runs over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value = "runs")]
        store: PathBuf,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn output(path: Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(config: PathBuf, store: PathBuf, kind: RunKind) -> Result<()> {
    let cfg = RunConfig::from_path(&config)?;
    let registry = ModelRegistry::with_builtins();
    let store = RunStore::open(store)?;
    let out = pipeline::run(&cfg, &registry, kind)?;
    let id = store.persist(&out)?;
    let r = &out.result;
    println!("{id}: {} of {} grid points have values", r.len(), out.grid.len());
    println!("{}", report::counters_line(&r.counters));
    if let Some(rel) = &out.relevance {
        println!("relevance scale r = {}", rel.r);
    }
    println!(
        "time: relevance {:.2} s, evaluation {:.2} s",
        out.timing.relevance_secs, out.timing.exploration_secs
    );
    Ok(())
}

fn parse_fix(items: &[String]) -> Result<Vec<FixedValue>> {
    items
        .iter()
        .map(|s| {
            let (name, value) = s.split_once('=').with_context(|| format!("--fix expects NAME=VALUE, got '{s}'"))?;
            let value = value.parse().with_context(|| format!("--fix {name}: '{value}' is not a number"))?;
            Ok(FixedValue { name: name.to_string(), value })
        })
        .collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Explore { config, store } => execute(config, store, RunKind::Explore),
        Command::Full { config, store } => execute(config, store, RunKind::Full),
        Command::Slice { run_id, axes, fix, store, out } => {
            if axes.len() != 2 {
                bail!("--axes needs exactly two names, got {}", axes.len());
            }
            let fixed = parse_fix(&fix)?;
            let run = RunStore::open(store)?.load(&run_id)?;
            let field = pexplore::interp::InterpolatedField::new(&run.grid, &run.result)?;
            let slice = extract_slice(&field, [&axes[0], &axes[1]], &fixed)?;
            report::write_slice_csv(&slice, output(out)?)?;
            Ok(())
        }
        Command::Errorstudy { config, out } => {
            let file = ErrorStudyFile::from_path(&config)?;
            let rep = report::run_error_study(&file, &ModelRegistry::with_builtins())?;
            report::write_error_table(&rep, output(out)?)?;
            Ok(())
        }
        Command::Serve { addr, store, workers } => {
            let state = Arc::new(AppState::new(RunStore::open(store)?, ModelRegistry::with_builtins(), workers));
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on {addr}");
            rt.block_on(http::serve(&addr, state)).with_context(|| format!("serving on {addr}"))
        }
    }
}
