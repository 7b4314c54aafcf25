//! Batch experiment runner: configuration parsing, scenario dispatch,
//! seeded reproducibility, and record persistence. Identical config and
//! seed produce byte-identical output files regardless of worker count.

pub mod config;
pub mod record;
pub mod scenarios;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dioph::DiophError;
use crate::goodfun::GoodFunError;
use crate::lattice::LatticeError;
use crate::nondivergence::NondivError;

pub use config::{config_hash, ConfigError, ConfigMap, Typed};
pub use record::{persist, Row, RunOutput, SCHEMA};
pub use scenarios::{catalog, parse_target, replay_record, run_scenario, Budgets, Deadline};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("{0}")]
    Internal(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<LatticeError> for RunError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::BudgetExceeded { .. } => RunError::Budget(e.to_string()),
            other => RunError::Internal(other.to_string()),
        }
    }
}

impl From<DiophError> for RunError {
    fn from(e: DiophError) -> Self {
        match e {
            DiophError::QBudget { .. } => RunError::Budget(e.to_string()),
            DiophError::Lattice(le) => RunError::from(le),
            other => RunError::Internal(other.to_string()),
        }
    }
}

impl From<GoodFunError> for RunError {
    fn from(e: GoodFunError) -> Self {
        RunError::Internal(e.to_string())
    }
}

impl From<NondivError> for RunError {
    fn from(e: NondivError) -> Self {
        match e {
            NondivError::Lattice(le) => RunError::from(le),
            other => RunError::Internal(other.to_string()),
        }
    }
}

const TOP_KEYS: [&str; 7] = [
    "scenario",
    "seed",
    "out",
    "workers",
    "budget_samples",
    "budget_enum",
    "budget_seconds",
];

#[derive(Debug)]
pub struct RunSummary {
    pub scenario: String,
    pub rows: u64,
    pub fail_rows: u64,
    pub truncated: bool,
    pub written: Vec<PathBuf>,
}

/// Validates and executes a config, writing records to `out_dir` (from the
/// `out` key unless overridden). The entire run happens inside a rayon pool
/// sized by `workers`; results never depend on the pool size.
pub fn run_config(
    cfg: &ConfigMap,
    out_override: Option<&Path>,
    workers_override: Option<usize>,
) -> Result<RunSummary, RunError> {
    for key in cfg.top.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            return Err(RunError::Config(ConfigError::Unknown(key.clone())));
        }
    }
    for block in cfg.blocks.keys() {
        if block != "params" {
            return Err(RunError::Config(ConfigError::Unknown(format!("[{block}]"))));
        }
    }
    let top = Typed::new(&cfg.top);
    let tag = top.str_req("scenario")?;
    if !scenarios::SCENARIO_TAGS.contains(&tag.as_str()) {
        return Err(RunError::Config(ConfigError::UnknownScenario(tag)));
    }
    let seed = top.u64_or("seed", 0)?;
    let budgets = Budgets {
        samples: top.u64_or("budget_samples", 200_000)?,
        enumeration: top.u64_or("budget_enum", crate::lattice::DEFAULT_ENUM_BUDGET)?,
        deadline: Deadline::new(top.u64_or("budget_seconds", 3600)?),
    };
    let workers = workers_override
        .or_else(|| top.raw("workers").and_then(|w| w.parse().ok()))
        .or_else(|| {
            std::env::var("LATFLOW_WORKERS")
                .ok()
                .and_then(|w| w.parse().ok())
        })
        .unwrap_or(0);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Internal(format!("worker pool: {e}")))?;
    let output = pool.install(|| run_scenario(&tag, cfg, seed, &budgets))?;

    let out_dir: PathBuf = match out_override {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(top.str_or("out", "latflow-out")),
    };
    let written = persist(&out_dir, cfg, &output)?;
    Ok(RunSummary {
        scenario: tag,
        rows: output.rows.len() as u64,
        fail_rows: output.fail_count(),
        truncated: output.truncated,
        written,
    })
}
