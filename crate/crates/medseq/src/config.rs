//! The run configuration document, command-line overrides, and resolution
//! into a fully materialized configuration.

use std::path::{Path, PathBuf};

use medseq_core::engine::{default_learners, EstimatorConfig, PathSelection, SplitMode};
use medseq_core::learners::EnsembleSpec;
use medseq_core::panel::{PathMode, DEFAULT_PATH_CAP};
use medseq_core::policy::{PolicyPair, PolicySpec};
use medseq_core::scm::two_period_policies;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Name of the built-in two-period simulation design.
pub const TWO_PERIOD: &str = "two_period";

/// Oracle replications used when none are configured.
pub const DEFAULT_ORACLE_REPLICATIONS: usize = 1_000_000;

/// Sample size of simulated datasets when none is configured.
pub const DEFAULT_SIMULATED_N: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Estimate,
    Decompose,
    Simulate,
    Oracle,
    Benchmark,
    Effectmod,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Decompose => "decompose",
            Command::Simulate => "simulate",
            Command::Oracle => "oracle",
            Command::Benchmark => "benchmark",
            Command::Effectmod => "effectmod",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Wide-format CSV panel.
    pub path: Option<PathBuf>,
    /// Schema document describing `path`.
    pub schema: Option<PathBuf>,
    /// Built-in simulation design (`two_period`).
    pub builtin: Option<String>,
    #[serde(rename = "U", alias = "u")]
    pub u: Option<f64>,
    #[serde(rename = "V", alias = "v")]
    pub v: Option<f64>,
    /// Structural model document to simulate from.
    pub scm: Option<PathBuf>,
    /// Units per simulated dataset.
    pub n: Option<usize>,
    /// Simulation seed; defaults to the estimator seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub mode: Option<PathMode>,
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub folds: Option<usize>,
    pub truncation_quantile: Option<f64>,
    #[serde(default)]
    pub paths: PathsSection,
    pub seed: Option<u64>,
    pub splitting: Option<SplitMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub d_prime: Option<PolicySpec>,
    pub d_star: Option<PolicySpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub replications: Option<usize>,
}

/// Where benchmark truths come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthSpec {
    Fixed(f64),
    Named(NamedTruth),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTruth {
    /// Monte Carlo oracle run before the replicates.
    Oracle,
    /// The published closed form of the two-period design.
    ClosedForm,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub replicates: Option<usize>,
    pub truth: Option<TruthSpec>,
    /// `(U, V)` cells of the two-period design; defaults to the data cell.
    pub cells: Option<Vec<[f64; 2]>>,
    pub oracle_replications: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contrast {
    /// `θ(d', d*)` itself.
    Theta,
    #[default]
    Total,
    Direct,
    Indirect,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectmodSection {
    pub contrast: Option<Contrast>,
    /// Modifier columns; all baseline covariates when absent.
    pub covariates: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// The configuration document as written.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub policies: PolicySection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    pub learners: Option<EnsembleSpec>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub effectmod: EffectmodSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Values given on the command line; each replaces one document key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub builtin: Option<String>,
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub n: Option<usize>,
    pub replicates: Option<usize>,
}

/// Parses a document, as JSON when the name ends in `.json` and as TOML
/// otherwise.
pub fn parse_document<T: serde::de::DeserializeOwned>(text: &str, name: &Path) -> CliResult<T> {
    let what = name.display();
    if name.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{what}: {e}")))
    } else {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{what}: {e}")))
    }
}

/// Reads a document from disk; a missing file is a configuration error.
pub fn read_document<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_document(&text, path)
}

impl RunConfig {
    /// Loads a configuration file. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let mut config: RunConfig = read_document(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.data.path, &mut config.data.schema, &mut config.data.scm, &mut config.output.path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: Overrides) {
        fn set<T>(slot: &mut Option<T>, value: Option<T>) {
            if value.is_some() {
                *slot = value;
            }
        }
        set(&mut self.data.path, o.data);
        set(&mut self.data.schema, o.schema);
        set(&mut self.estimator.seed, o.seed);
        set(&mut self.threads, o.threads);
        set(&mut self.output.path, o.output);
        set(&mut self.output.format, o.format);
        set(&mut self.data.builtin, o.builtin);
        set(&mut self.data.u, o.u);
        set(&mut self.data.v, o.v);
        set(&mut self.data.n, o.n);
        set(&mut self.benchmark.replicates, o.replicates);
    }
}

/// Origin of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        schema: PathBuf,
    },
    Builtin {
        name: String,
        #[serde(rename = "U")]
        u: f64,
        #[serde(rename = "V")]
        v: f64,
        n: usize,
        seed: u64,
    },
    Scm {
        path: PathBuf,
        n: usize,
        seed: u64,
    },
}

impl DataSource {
    pub fn is_simulated(&self) -> bool {
        !matches!(self, DataSource::Csv { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSettings {
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSettings {
    pub replicates: usize,
    pub truth: TruthSpec,
    /// Empty unless the data come from the two-period design.
    pub cells: Vec<[f64; 2]>,
    pub oracle_replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectmodSettings {
    pub contrast: Contrast,
    /// `None` selects every baseline covariate of the dataset.
    pub covariates: Option<Vec<String>>,
}

/// Configuration with every default filled in; emitted with each result.
/// Only the sections the command uses are present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub command: Command,
    pub data: DataSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policies: Option<PolicyPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    /// Master seed of the run.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effectmod: Option<EffectmodSettings>,
}

/// Front-end settings that do not affect results.
#[derive(Debug, Clone, PartialEq)]
pub struct Runtime {
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} '{}' does not exist", path.display())))
    }
}

fn is_unit(x: f64) -> bool {
    x == 1.0 || x == -1.0
}

/// Validates the document for `command` and materializes its defaults.
pub fn resolve(config: &RunConfig, command: Option<Command>) -> CliResult<(Resolved, Runtime)> {
    let command = command
        .or(config.command)
        .ok_or_else(|| CliError::Config("no command given".into()))?;
    let seed = config
        .estimator
        .seed
        .ok_or_else(|| CliError::Config(format!("missing required key estimator.seed (the '{}' command is stochastic)", command.as_str())))?;

    let d = &config.data;
    let sim_n = d.n.unwrap_or(DEFAULT_SIMULATED_N);
    let sim_seed = d.seed.unwrap_or(seed);
    if sim_n == 0 {
        return Err(CliError::Config("data.n must be >= 1".into()));
    }
    let sources = [d.path.is_some(), d.builtin.is_some(), d.scm.is_some()];
    if sources.iter().filter(|s| **s).count() != 1 {
        return Err(CliError::Config("exactly one of data.path, data.builtin and data.scm must be given".into()));
    }
    let data = if let Some(path) = &d.path {
        require_file(path, "data file")?;
        let schema = d.schema.clone().ok_or_else(|| CliError::Config("data.schema is required with data.path".into()))?;
        require_file(&schema, "schema file")?;
        DataSource::Csv { path: path.clone(), schema }
    } else if let Some(name) = &d.builtin {
        if name != TWO_PERIOD {
            return Err(CliError::Config(format!("unknown builtin design '{name}' (available: {TWO_PERIOD})")));
        }
        let (u, v) = match (d.u, d.v) {
            (Some(u), Some(v)) if is_unit(u) && is_unit(v) => (u, v),
            (Some(_), Some(_)) => return Err(CliError::Config("data.U and data.V must each be -1 or 1".into())),
            _ => return Err(CliError::Config(format!("builtin '{TWO_PERIOD}' needs data.U and data.V"))),
        };
        DataSource::Builtin { name: name.clone(), u, v, n: sim_n, seed: sim_seed }
    } else {
        let path = d.scm.clone().unwrap_or_default();
        require_file(&path, "structural model file")?;
        DataSource::Scm { path, n: sim_n, seed: sim_seed }
    };
    let needs_model = matches!(command, Command::Simulate | Command::Oracle | Command::Benchmark);
    if needs_model && !data.is_simulated() {
        return Err(CliError::Config(format!("the '{}' command needs data.builtin or data.scm", command.as_str())));
    }

    let needs_policies = command != Command::Simulate;
    let policies = if needs_policies {
        let defaults = matches!(data, DataSource::Builtin { .. }).then(two_period_policies);
        let d_prime = config.policies.d_prime.clone().or_else(|| defaults.as_ref().map(|p| p.d_prime.clone()));
        let d_star = config.policies.d_star.clone().or_else(|| defaults.as_ref().map(|p| p.d_star.clone()));
        match (d_prime, d_star) {
            (Some(d_prime), Some(d_star)) => Some(PolicyPair { d_prime, d_star }),
            _ => return Err(CliError::Config("policies.d_prime and policies.d_star are required".into())),
        }
    } else {
        None
    };

    let needs_estimator = matches!(command, Command::Estimate | Command::Decompose | Command::Benchmark | Command::Effectmod);
    let estimator = if needs_estimator {
        let e = &config.estimator;
        let defaults = PathSelection::default();
        let est = EstimatorConfig {
            folds: e.folds.unwrap_or(3),
            truncation_quantile: e.truncation_quantile.unwrap_or(0.99),
            paths: PathSelection {
                mode: e.paths.mode.unwrap_or(defaults.mode),
                cap: e.paths.cap.unwrap_or(DEFAULT_PATH_CAP),
            },
            seed,
            learners: config.learners.clone().unwrap_or_else(default_learners),
            splitting: e.splitting.unwrap_or_default(),
        };
        est.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Some(est)
    } else {
        None
    };

    let oracle_reps = config.oracle.replications.unwrap_or(DEFAULT_ORACLE_REPLICATIONS);
    let oracle = (command == Command::Oracle).then_some(OracleSettings { replications: oracle_reps });
    if oracle_reps == 0 {
        return Err(CliError::Config("oracle.replications must be >= 1".into()));
    }

    let benchmark = if command == Command::Benchmark {
        let b = &config.benchmark;
        let cells = match &data {
            DataSource::Builtin { u, v, .. } => b.cells.clone().unwrap_or_else(|| vec![[*u, *v]]),
            _ if b.cells.is_some() => {
                return Err(CliError::Config(format!("benchmark.cells applies only to data.builtin = '{TWO_PERIOD}'")));
            }
            _ => Vec::new(),
        };
        if cells.iter().flatten().any(|x| !is_unit(*x)) {
            return Err(CliError::Config("benchmark.cells entries must be -1 or 1".into()));
        }
        let truth = b.truth.unwrap_or(TruthSpec::Named(NamedTruth::Oracle));
        if truth == TruthSpec::Named(NamedTruth::ClosedForm) && !matches!(data, DataSource::Builtin { .. }) {
            return Err(CliError::Config("benchmark.truth = 'closed_form' needs the builtin design".into()));
        }
        let replicates = b.replicates.unwrap_or(100);
        if replicates == 0 {
            return Err(CliError::Config("benchmark.replicates must be >= 1".into()));
        }
        let oracle_replications = b.oracle_replications.unwrap_or(DEFAULT_ORACLE_REPLICATIONS);
        if oracle_replications == 0 {
            return Err(CliError::Config("benchmark.oracle_replications must be >= 1".into()));
        }
        Some(BenchmarkSettings { replicates, truth, cells, oracle_replications })
    } else {
        None
    };

    let effectmod = (command == Command::Effectmod).then(|| EffectmodSettings {
        contrast: config.effectmod.contrast.unwrap_or_default(),
        covariates: config.effectmod.covariates.clone(),
    });

    let threads = config.threads;
    if threads == Some(0) {
        return Err(CliError::Config("threads must be >= 1".into()));
    }
    let resolved = Resolved { command, data, policies, estimator, seed, oracle, benchmark, effectmod };
    let runtime = Runtime { threads, output: config.output.path.clone(), format: config.output.format.unwrap_or_default() };
    Ok((resolved, runtime))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtin(u: f64, v: f64) -> RunConfig {
        let mut c = RunConfig::default();
        c.apply(Overrides { builtin: Some(TWO_PERIOD.into()), u: Some(u), v: Some(v), seed: Some(7), ..Default::default() });
        c
    }

    #[test]
    fn defaults_are_materialized() {
        let (r, rt) = resolve(&builtin(1.0, -1.0), Some(Command::Estimate)).unwrap();
        let e = r.estimator.unwrap();
        assert_eq!((e.folds, e.truncation_quantile, e.paths.cap), (3, 0.99, 4096));
        assert_eq!(e.paths.mode, PathMode::ObservedOnly);
        assert_eq!(e.learners, default_learners());
        assert_eq!(r.policies.unwrap(), two_period_policies());
        assert_eq!(r.data, DataSource::Builtin { name: TWO_PERIOD.into(), u: 1.0, v: -1.0, n: 1000, seed: 7 });
        assert_eq!(rt.format, Format::Json);
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let mut c = builtin(1.0, 1.0);
        c.estimator.seed = None;
        let err = resolve(&c, Some(Command::Benchmark)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("estimator.seed"));
    }

    #[test]
    fn flags_override_document_keys() {
        let mut c: RunConfig = toml::from_str(
            "[data]\nbuiltin = 'two_period'\nU = -1\nV = -1\nn = 50\n[estimator]\nseed = 1\nfolds = 4\n[benchmark]\nreplicates = 3\n",
        )
        .unwrap();
        c.apply(Overrides { u: Some(1.0), n: Some(80), replicates: Some(9), seed: Some(5), ..Default::default() });
        let (r, _) = resolve(&c, Some(Command::Benchmark)).unwrap();
        assert_eq!(r.data, DataSource::Builtin { name: TWO_PERIOD.into(), u: 1.0, v: -1.0, n: 80, seed: 5 });
        assert_eq!(r.estimator.unwrap().folds, 4);
        assert_eq!(r.benchmark.unwrap().replicates, 9);
    }

    #[test]
    fn bad_documents_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[estimator]\nsed = 1\n").is_err());
        assert!(resolve(&builtin(2.0, 1.0), Some(Command::Estimate)).is_err());
        let mut c = builtin(1.0, 1.0);
        c.data.path = Some("nowhere.csv".into());
        assert_eq!(resolve(&c, Some(Command::Estimate)).unwrap_err().exit_code(), 2);
        c.data.builtin = None;
        c.data.schema = Some("nowhere.toml".into());
        assert!(resolve(&c, Some(Command::Estimate)).unwrap_err().to_string().contains("does not exist"));
    }
}
