//! On-disk run registry: one directory per run.
//!
//! ```text
//! run-000001/
//!   config.json     config echo plus run kind
//!   grid.json       the lattice, with its parameter embedding
//!   entries.csv     index..., parameters..., value, flag, source
//!   counters.json   counters, centers, tolerance, timing
//!   relevance.json  relevance scale and phase sample (explore runs)
//!   status.json     queued | running | done | failed
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same bits, so a load reproduces the stored result exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use pexplore::explore::{Counters, Entry, Flag, ResultSet};
use pexplore::grid::Grid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::pipeline::{RelevanceRecord, RunKind, RunOutput, Timing};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("run '{0}' not found")]
    NotFound(String),
    #[error("'{0}' is not a run id")]
    BadId(String),
    #[error("run '{0}' has no results yet")]
    NotFinished(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path} line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Queued => "queued",
            RunStatus::Running => "running",
            RunStatus::Done => "done",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusRecord {
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub kind: RunKind,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountersFile {
    pub grid_len: usize,
    pub tol: f64,
    pub relevance_r: Option<f64>,
    pub counters: Counters,
    pub computed: usize,
    pub copied: usize,
    pub timing: Timing,
    pub centers: Vec<usize>,
}

/// A completed run as loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub id: String,
    pub kind: RunKind,
    pub config: RunConfig,
    pub grid: Grid,
    pub result: ResultSet,
    pub relevance: Option<RelevanceRecord>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub name: Option<String>,
    pub kind: RunKind,
    pub model: String,
    pub axes: Vec<String>,
    pub status: RunStatus,
}

const PREFIX: &str = "run-";

pub fn parse_id(id: &str) -> Option<u64> {
    let digits = id.strip_prefix(PREFIX)?;
    if digits.len() < 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn format_id(n: u64) -> String {
    format!("{PREFIX}{n:06}")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| StoreError::Json { path: path.to_path_buf(), source })
}

/// Writes via a temporary file and a rename so readers never see half a file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        parse_id(id).ok_or_else(|| StoreError::BadId(id.to_string()))?;
        let d = self.root.join(id);
        if d.is_dir() {
            Ok(d)
        } else {
            Err(StoreError::NotFound(id.to_string()))
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.dir(id).is_ok()
    }

    /// Ids of all runs, oldest first.
    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<(u64, String)> = fs::read_dir(&self.root)
            .map_err(io_err(&self.root))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                parse_id(&name).map(|n| (n, name))
            })
            .collect();
        ids.sort();
        Ok(ids.into_iter().map(|(_, s)| s).collect())
    }

    /// Reserves a fresh id and records the config as queued. Ids are never
    /// reused; directory creation is the lock.
    pub fn create(&self, kind: RunKind, config: &RunConfig) -> Result<String, StoreError> {
        let mut next = self.ids()?.last().and_then(|s| parse_id(s)).map_or(1, |n| n + 1);
        let (id, dir) = loop {
            let id = format_id(next);
            let dir = self.root.join(&id);
            match fs::create_dir(&dir) {
                Ok(()) => break (id, dir),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => next += 1,
                Err(e) => return Err(io_err(&dir)(e)),
            }
        };
        write_json(&dir.join("config.json"), &ConfigEcho { kind, config: config.clone() })?;
        self.set_status(&id, RunStatus::Queued, None)?;
        Ok(id)
    }

    pub fn set_status(&self, id: &str, status: RunStatus, error: Option<String>) -> Result<(), StoreError> {
        let dir = self.dir(id)?;
        write_json(&dir.join("status.json"), &StatusRecord { status, error })
    }

    pub fn status(&self, id: &str) -> Result<StatusRecord, StoreError> {
        read_json(&self.dir(id)?.join("status.json"))
    }

    pub fn config(&self, id: &str) -> Result<ConfigEcho, StoreError> {
        read_json(&self.dir(id)?.join("config.json"))
    }

    pub fn counters(&self, id: &str) -> Result<CountersFile, StoreError> {
        let path = self.dir(id)?.join("counters.json");
        if !path.exists() {
            return Err(StoreError::NotFinished(id.to_string()));
        }
        read_json(&path)
    }

    pub fn summary(&self, id: &str) -> Result<RunSummary, StoreError> {
        let echo = self.config(id)?;
        Ok(RunSummary {
            id: id.to_string(),
            name: echo.config.name.clone(),
            kind: echo.kind,
            model: echo.config.model.to_string(),
            axes: echo.config.axes.iter().map(|a| a.name.clone()).collect(),
            status: self.status(id)?.status,
        })
    }

    /// Writes the results of a run created with [`RunStore::create`] and
    /// marks it done.
    pub fn write_results(&self, id: &str, out: &RunOutput) -> Result<(), StoreError> {
        let dir = self.dir(id)?;
        write_json(&dir.join("grid.json"), &out.grid)?;
        if let Some(rel) = &out.relevance {
            write_json(&dir.join("relevance.json"), rel)?;
        }
        write_entries(&dir.join("entries.csv"), &out.grid, &out.result)?;
        let r = &out.result;
        let counters = CountersFile {
            grid_len: r.grid_len,
            tol: r.tol,
            relevance_r: r.relevance_r,
            counters: r.counters,
            computed: r.with_flag(Flag::Computed).len(),
            copied: r.with_flag(Flag::Copied).len(),
            timing: out.timing,
            centers: r.centers.clone(),
        };
        write_json(&dir.join("counters.json"), &counters)?;
        self.set_status(id, RunStatus::Done, None)
    }

    /// Creates a run and stores a finished output in one go.
    pub fn persist(&self, out: &RunOutput) -> Result<String, StoreError> {
        let id = self.create(out.kind, &out.config)?;
        self.set_status(&id, RunStatus::Running, None)?;
        self.write_results(&id, out)?;
        Ok(id)
    }

    pub fn load(&self, id: &str) -> Result<RunRecord, StoreError> {
        let dir = self.dir(id)?;
        if self.status(id)?.status != RunStatus::Done {
            return Err(StoreError::NotFinished(id.to_string()));
        }
        let echo = self.config(id)?;
        let grid: Grid = read_json(&dir.join("grid.json"))?;
        let counters = self.counters(id)?;
        let rel_path = dir.join("relevance.json");
        let relevance = if rel_path.exists() { Some(read_json(&rel_path)?) } else { None };
        let (entries, failed) = read_entries(&dir.join("entries.csv"), &grid)?;
        let result = ResultSet {
            grid_len: counters.grid_len,
            entries,
            failed,
            centers: counters.centers,
            counters: counters.counters,
            tol: counters.tol,
            relevance_r: counters.relevance_r,
        };
        Ok(RunRecord { id: id.to_string(), kind: echo.kind, config: echo.config, grid, result, relevance, timing: counters.timing })
    }
}

fn param_names(grid: &Grid) -> Vec<String> {
    match grid.embedding() {
        Some(e) => e.base.names.clone(),
        None => grid.axes.iter().map(|a| a.name.clone()).collect(),
    }
}

fn write_entries(path: &Path, grid: &Grid, result: &ResultSet) -> Result<(), StoreError> {
    let csv_err = |source| StoreError::Csv { path: path.to_path_buf(), source };
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["point".to_string()];
        header.extend(grid.axes.iter().map(|a| format!("i_{}", a.name)));
        header.extend(param_names(grid));
        header.extend(["value", "flag", "source"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;

        let rows = result
            .entries
            .iter()
            .map(|(&i, e)| (i, Some(e)))
            .chain(result.failed.iter().map(|&i| (i, None)))
            .collect::<BTreeMap<_, _>>();
        for (i, e) in rows {
            let mut rec = vec![i.to_string()];
            rec.extend(grid.multi_index(i).iter().map(|k| k.to_string()));
            rec.extend(grid.parameters(i).iter().map(|v| v.to_string()));
            match e {
                Some(e) => {
                    rec.push(e.value.to_string());
                    rec.push(e.flag.as_str().to_string());
                    rec.push(e.source.map(|s| s.to_string()).unwrap_or_default());
                }
                None => rec.extend([String::new(), "failed".into(), String::new()]),
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_err(path)(e))?;
    }
    write_atomic(path, &buf)
}

type Entries = (BTreeMap<usize, Entry>, BTreeSet<usize>);

fn read_entries(path: &Path, grid: &Grid) -> Result<Entries, StoreError> {
    let csv_err = |source| StoreError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("missing column '{name}'"),
        })
    };
    let (c_point, c_value, c_flag, c_source) = (col("point")?, col("value")?, col("flag")?, col("source")?);

    let mut entries = BTreeMap::new();
    let mut failed = BTreeSet::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = k + 2;
        let corrupt = |reason: String| StoreError::Corrupt { path: path.to_path_buf(), line, reason };
        let point: usize = rec[c_point].parse().map_err(|_| corrupt(format!("bad point '{}'", &rec[c_point])))?;
        if point >= grid.len() {
            return Err(corrupt(format!("point {point} outside the grid of {}", grid.len())));
        }
        let flag = match &rec[c_flag] {
            "computed" => Flag::Computed,
            "copied" => Flag::Copied,
            "failed" => {
                failed.insert(point);
                continue;
            }
            other => return Err(corrupt(format!("unknown flag '{other}'"))),
        };
        let value: f64 = rec[c_value].parse().map_err(|_| corrupt(format!("bad value '{}'", &rec[c_value])))?;
        let source = match &rec[c_source] {
            "" => None,
            s => Some(s.parse().map_err(|_| corrupt(format!("bad source '{s}'")))?),
        };
        entries.insert(point, Entry { value, flag, source });
    }
    Ok((entries, failed))
}
