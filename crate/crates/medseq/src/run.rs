//! Command dispatch.

use std::fs::File;
use std::time::Instant;

use medseq_core::engine::{decompose_effects, effect_modification_slopes, estimate_theta, EstimatorConfig};
use medseq_core::panel::{PanelDataset, RoleKind};
use medseq_core::policy::PolicyPair;
use medseq_core::rng::derive_seed;
use medseq_core::scm::{benchmark, closed_form_truth, oracle_theta, two_period_dgp, OracleConfig, Scm, ScmSpec};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{read_document, Command, Contrast, DataSource, NamedTruth, Resolved, TruthSpec};
use crate::emit::{cell, table_from_records, ResultDocument, Table, Timing};
use crate::error::{CliError, CliResult};
use crate::load::{load_panel, write_panel, Schema};

/// A finished run: the document plus the flat table used by `--format csv`.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub document: ResultDocument,
    pub table: Table,
    /// Side output for `simulate`: the schema matching the panel CSV.
    pub schema: Option<Schema>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results are always encodable")
}

fn scm_of(source: &DataSource) -> CliResult<Option<Scm>> {
    let spec = match source {
        DataSource::Csv { .. } => return Ok(None),
        DataSource::Builtin { u, v, .. } => two_period_dgp(*u, *v)?,
        DataSource::Scm { path, .. } => read_document::<ScmSpec>(path)?,
    };
    Ok(Some(Scm::new(spec).map_err(|e| CliError::Config(e.to_string()))?))
}

/// Loads or simulates the dataset named by `source`.
pub fn load_data(source: &DataSource) -> CliResult<PanelDataset> {
    match source {
        DataSource::Csv { path, schema } => {
            let schema: Schema = read_document(schema)?;
            let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
            load_panel(file, &schema)
        }
        DataSource::Builtin { n, seed, .. } | DataSource::Scm { n, seed, .. } => {
            let scm = scm_of(source)?.expect("simulated source");
            Ok(scm.simulate(*n, *seed)?)
        }
    }
}

fn oracle_truth(scm: &Scm, pair: &PolicyPair, replications: usize, seed: u64) -> CliResult<f64> {
    Ok(oracle_theta(scm, pair, &OracleConfig::new(replications, seed))?.theta)
}

fn covariate_columns(data: &PanelDataset, names: Option<&[String]>) -> CliResult<Vec<(String, Vec<f64>)>> {
    match names {
        None => Ok(data.baseline_columns().map(|c| (c.key.name.clone(), c.values.clone())).collect()),
        Some(names) => names
            .iter()
            .map(|n| {
                let c = data.column(n).ok_or_else(|| CliError::Config(format!("effect modifier '{n}' is not a column")))?;
                if c.key.role.kind != RoleKind::BaselineCovariate {
                    return Err(CliError::Config(format!("effect modifier '{n}' is not a baseline covariate")));
                }
                Ok((n.clone(), c.values.clone()))
            })
            .collect(),
    }
}

fn effect_rows(total: (f64, f64), direct: (f64, f64), indirect: (f64, f64)) -> Table {
    let mut t = Table::new(&["contrast", "effect", "se"]);
    for (name, (e, se)) in [("Total", total), ("Direct", direct), ("Indirect", indirect)] {
        t.push(vec![name.into(), cell(Some(e)), cell(Some(se))]);
    }
    t
}

/// Runs a resolved configuration. Call inside the desired thread pool.
pub fn run(resolved: &Resolved) -> CliResult<RunOutput> {
    let start = Instant::now();
    let estimator = || -> &EstimatorConfig { resolved.estimator.as_ref().expect("resolved for this command") };
    let pair = || -> &PolicyPair { resolved.policies.as_ref().expect("resolved for this command") };
    let mut schema = None;

    let (result, table) = match resolved.command {
        Command::Estimate => {
            let data = load_data(&resolved.data)?;
            let r = estimate_theta(&data, pair(), estimator())?;
            let mut t = Table::new(&["estimate", "se", "ci_lower", "ci_upper"]);
            t.push(vec![cell(Some(r.theta)), cell(Some(r.se)), cell(Some(r.ci.0)), cell(Some(r.ci.1))]);
            (to_value(&r), t)
        }
        Command::Decompose => {
            let data = load_data(&resolved.data)?;
            let d = decompose_effects(&data, &pair().d_prime, &pair().d_star, estimator())?;
            let t = effect_rows(
                (d.total.estimate, d.total.se),
                (d.direct.estimate, d.direct.se),
                (d.indirect.estimate, d.indirect.se),
            );
            (to_value(&d), t)
        }
        Command::Effectmod => {
            let data = load_data(&resolved.data)?;
            let settings = resolved.effectmod.as_ref().expect("resolved for this command");
            let covariates = covariate_columns(&data, settings.covariates.as_deref())?;
            let (estimate, se, influence, diagnostics) = match settings.contrast {
                Contrast::Theta => {
                    let r = estimate_theta(&data, pair(), estimator())?;
                    (r.theta, r.se, r.influence, to_value(&r.diagnostics))
                }
                c => {
                    let d = decompose_effects(&data, &pair().d_prime, &pair().d_star, estimator())?;
                    let diagnostics = to_value(&d.diagnostics);
                    match c {
                        Contrast::Total => (d.total.estimate, d.total.se, d.influence_total, diagnostics),
                        Contrast::Direct => (d.direct.estimate, d.direct.se, d.influence_direct, diagnostics),
                        _ => (d.indirect.estimate, d.indirect.se, d.influence_indirect, diagnostics),
                    }
                }
            };
            let slopes = effect_modification_slopes(&influence, estimate, &covariates);
            let records: Vec<Value> = slopes.iter().map(to_value).collect();
            let t = table_from_records(&["variable", "slope", "se"], &records);
            let result = json!({
                "contrast": settings.contrast,
                "estimate": estimate,
                "se": se,
                "slopes": records,
                "diagnostics": diagnostics,
            });
            (result, t)
        }
        Command::Simulate => {
            let data = load_data(&resolved.data)?;
            let (csv, sch) = write_panel(&data)?;
            let columns: Vec<Value> = data
                .columns()
                .iter()
                .map(|c| json!({"name": c.key.name, "kind": c.key.role.kind, "time": c.key.role.time, "values": c.values}))
                .collect();
            let result = json!({"n": data.n(), "tau": data.tau(), "schema": to_value(&sch), "columns": columns});
            let mut reader = csv::Reader::from_reader(csv.as_bytes());
            let header: Vec<String> = reader.headers().map_err(|e| CliError::Data(e.to_string()))?.iter().map(String::from).collect();
            let rows = reader
                .records()
                .map(|r| r.map(|r| r.iter().map(String::from).collect()))
                .collect::<Result<Vec<Vec<String>>, _>>()
                .map_err(|e| CliError::Data(e.to_string()))?;
            schema = Some(sch);
            (result, Table { header, rows })
        }
        Command::Oracle => {
            let scm = scm_of(&resolved.data)?.expect("simulated source");
            let settings = resolved.oracle.as_ref().expect("resolved for this command");
            let o = oracle_theta(&scm, pair(), &OracleConfig::new(settings.replications, resolved.seed))?;
            let mut result = to_value(&o);
            if let DataSource::Builtin { u, v, .. } = resolved.data {
                result["closed_form"] = json!(closed_form_truth(u, v));
            }
            let mut t = Table::new(&["theta", "se", "replications"]);
            t.push(vec![cell(Some(o.theta)), cell(Some(o.se)), o.replications.to_string()]);
            (result, t)
        }
        Command::Benchmark => run_benchmark(resolved, pair(), estimator())?,
    };

    let document = ResultDocument {
        command: resolved.command.as_str().into(),
        config: to_value(resolved),
        result,
        timing: Timing { wall_clock_seconds: start.elapsed().as_secs_f64() },
        version: env!("CARGO_PKG_VERSION").into(),
    };
    Ok(RunOutput { document, table, schema })
}

const BENCHMARK_COLUMNS: [&str; 11] =
    ["U", "V", "n", "replicates", "truth", "n_mse", "n_mse_se", "coverage", "coverage_se", "bias", "bias_se"];

fn run_benchmark(resolved: &Resolved, pair: &PolicyPair, estimator: &EstimatorConfig) -> CliResult<(Value, Table)> {
    let settings = resolved.benchmark.as_ref().expect("resolved for this command");
    let n = match resolved.data {
        DataSource::Builtin { n, .. } | DataSource::Scm { n, .. } => n,
        DataSource::Csv { .. } => unreachable!("rejected at resolution"),
    };
    let cells: Vec<Option<[f64; 2]>> = match resolved.data {
        DataSource::Builtin { .. } => settings.cells.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let mut rows = Vec::new();
    for (k, cell_uv) in cells.iter().enumerate() {
        let scm = match cell_uv {
            Some([u, v]) => Scm::new(two_period_dgp(*u, *v)?)?,
            None => scm_of(&resolved.data)?.expect("simulated source"),
        };
        let cell_seed = derive_seed(resolved.seed, &[k as u64]);
        let truth = match settings.truth {
            TruthSpec::Fixed(t) => t,
            TruthSpec::Named(NamedTruth::ClosedForm) => {
                let [u, v] = cell_uv.expect("closed form needs the builtin design");
                closed_form_truth(u, v)
            }
            TruthSpec::Named(NamedTruth::Oracle) => {
                oracle_truth(&scm, pair, settings.oracle_replications, derive_seed(cell_seed, &[1]))?
            }
        };
        let report = benchmark(&scm, pair, n, settings.replicates, derive_seed(cell_seed, &[0]), truth, estimator)?;
        let mut row = to_value(&report.summary);
        row["U"] = cell_uv.map_or(Value::Null, |c| json!(c[0]));
        row["V"] = cell_uv.map_or(Value::Null, |c| json!(c[1]));
        row["outcomes"] = to_value(&report.outcomes);
        rows.push(row);
    }
    let table = table_from_records(&BENCHMARK_COLUMNS, &rows);
    Ok((json!({ "rows": rows }), table))
}
