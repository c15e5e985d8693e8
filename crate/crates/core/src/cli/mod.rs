//! Command-line front end: configuration, the experiment runner and the
//! output directory layout.
//!
//! A run writes one directory per experiment, `{out}/{idx:02}_{name}/`,
//! holding its CSV tables and a `summary.json`, plus a top-level
//! `manifest.json`. Experiment `idx` draws from `sub_seed(master, idx)`.

pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::estimators::sub_seed;
use crate::{Error, Result};

pub use experiments::{Assertion, Experiment, Outcome};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "out";

/// Exit status for a run whose statistical assertions did not all pass.
pub const EXIT_ASSERTION: i32 = 2;
/// Exit status for configuration, parameter and runtime errors.
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "lpp-noise", version, about = "Noise sensitivity laboratory for geometric last-passage percolation")]
pub struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every experiment listed in the `--config` file.
    Run,
    #[command(flatten)]
    Single(Experiment),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    experiments: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    name: String,
    #[serde(default)]
    params: Value,
}

/// A fully parsed and validated configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Config {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub experiments: Vec<Experiment>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let experiments = raw
            .experiments
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let x = Experiment::from_config(&e.name, &e.params).map_err(|err| locate(k, &e.name, err))?;
                x.validate().map_err(|err| locate(k, &e.name, err))?;
                Ok(x)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Config {
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            experiments,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn locate(k: usize, name: &str, err: Error) -> Error {
    match err {
        Error::Parameter { name: field, message } => {
            Error::parameter(field, format!("{message} (experiment #{k}, `{name}`)"))
        }
        Error::Config(m) => Error::Config(format!("experiment #{k} (`{name}`): {m}")),
        other => other,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub index: usize,
    pub name: &'static str,
    pub seed: u64,
    pub directory: String,
    pub files: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub master_seed: u64,
    pub threads: usize,
    pub config_echo: Config,
    pub started_at: String,
    pub finished_at: String,
    pub experiments: Vec<ExperimentRecord>,
    pub all_passed: bool,
}

/// Run every experiment of `config` and write the output tree.
pub fn run_config(config: &Config, threads: usize) -> Result<Manifest> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))?;
    let started_at = chrono::Utc::now().to_rfc3339();
    let mut records = Vec::new();
    for (index, exp) in config.experiments.iter().enumerate() {
        let seed = sub_seed(config.seed, index as u64);
        let outcome = pool.install(|| exp.execute(seed))?;
        let dirname = format!("{index:02}_{}", exp.name());
        let dir = config.output_dir.join(&dirname);
        std::fs::create_dir_all(&dir)?;
        let mut files = Vec::new();
        for t in &outcome.tables {
            let file = format!("{}.csv", t.name);
            output::write_atomic(&dir.join(&file), t.render().as_bytes())?;
            files.push(file);
        }
        let summary = serde_json::json!({
            "name": exp.name(),
            "seed": seed,
            "params": exp,
            "results": outcome.summary,
            "assertions": outcome.assertions,
        });
        output::write_json(&dir.join("summary.json"), &summary)?;
        files.push("summary.json".into());
        let passed = outcome.assertions.iter().all(|a| a.passed);
        records.push(ExperimentRecord {
            index,
            name: exp.name(),
            seed,
            directory: dirname,
            files,
            assertions: outcome.assertions,
            passed,
        });
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        master_seed: config.seed,
        threads: pool.current_num_threads(),
        config_echo: config.clone(),
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        all_passed: records.iter().all(|r| r.passed),
        experiments: records,
    };
    output::write_json(&config.output_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn resolve(cli: Cli) -> Result<Config> {
    let mut config = match (&cli.command, &cli.config) {
        (Command::Run, Some(path)) => Config::load(path)?,
        (Command::Run, None) => return Err(Error::Config("`run` needs --config".into())),
        (Command::Single(exp), _) => {
            exp.validate()?;
            Config { seed: DEFAULT_SEED, output_dir: PathBuf::from(DEFAULT_OUT), experiments: vec![exp.clone()] }
        }
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = cli.out {
        config.output_dir = o;
    }
    Ok(config)
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    let threads = cli.threads;
    let result = resolve(cli).and_then(|c| run_config(&c, threads));
    match result {
        Ok(m) => {
            for r in &m.experiments {
                for a in &r.assertions {
                    let tag = if a.passed { "PASS" } else { "FAIL" };
                    println!("{tag} {}/{}: {}", r.directory, a.name, a.detail);
                }
            }
            if m.all_passed {
                0
            } else {
                EXIT_ASSERTION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
