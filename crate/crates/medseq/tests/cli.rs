use std::path::{Path, PathBuf};
use std::process::Command;

use medseq::cli::{render, run_with_threads};
use medseq::config::{resolve, Command as Cmd, Format, RunConfig};
use medseq::load::{load_panel, write_panel, Schema};
use medseq::canonical_json;
use serde_json::Value;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn medseq(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_medseq"))
        .args(args)
        .env_remove("MEDSEQ_THREADS")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn example_config() -> String {
    data_dir().join("example_estimate.toml").display().to_string()
}

#[test]
fn estimate_on_bundled_example() {
    let (code, stdout, stderr) = medseq(&["estimate", "--config", &example_config()]);
    assert_eq!(code, 0, "{stderr}");
    let doc: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(doc["command"], "estimate");
    let theta = doc["result"]["theta"].as_f64().unwrap();
    let se = doc["result"]["se"].as_f64().unwrap();
    assert!(theta.is_finite() && se > 0.0);
    assert!(doc["result"]["influence_mean"].as_f64().unwrap().abs() <= 1e-8);
    let est = &doc["config"]["estimator"];
    assert_eq!(est["truncation_quantile"].as_f64(), Some(0.99));
    assert_eq!(est["paths"]["mode"], "observed_only");
    assert_eq!(est["paths"]["cap"], 4096);
    assert_eq!(est["learners"]["stacking"], "convex_weights");
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert!(doc["timing"]["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn missing_seed_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[data]\nbuiltin = 'two_period'\nU = 1\nV = 1\n").unwrap();
    let (code, _, stderr) = medseq(&["benchmark", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("estimator.seed"), "{stderr}");
}

#[test]
fn invalid_inputs_map_to_exit_codes() {
    let (code, _, _) = medseq(&["estimate", "--builtin", "nope", "--U", "1", "--V", "1", "--seed", "1"]);
    assert_eq!(code, 2);
    let (code, _, _) = medseq(&["estimate", "--bogus-flag"]);
    assert_eq!(code, 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[policies]\nd_prime = 'identity'\nd_star = 'identity'\n").unwrap();
    let csv = dir.path().join("p.csv");
    std::fs::write(&csv, "L,A,M,Y\n0,1,1,2\n1,x,0,1\n").unwrap();
    let schema = dir.path().join("s.toml");
    std::fs::write(&schema, "tau = 1\nmediator_support = [0.0, 1.0]\n[nodes]\nL = [['L']]\nA = ['A']\nM = ['M']\nY = 'Y'\n")
        .unwrap();
    let args = ["estimate", "--config", cfg.to_str().unwrap(), "--data", csv.to_str().unwrap(), "--schema", schema.to_str().unwrap(), "--seed", "1"];
    let (code, _, stderr) = medseq(&args);
    assert_eq!(code, 3, "{stderr}");
}

#[test]
fn csv_outputs_have_documented_shapes() {
    let (code, stdout, _) = medseq(&["decompose", "--config", &example_config(), "--format", "csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "contrast,effect,se");
    let labels: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["Total", "Direct", "Indirect"]);

    let (code, stdout, _) = medseq(&["effectmod", "--config", &example_config(), "--format", "csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "variable,slope,se");
    assert_eq!(lines.len(), 3);

    let (code, stdout, _) = medseq(&["estimate", "--config", &example_config(), "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().next(), Some("estimate,se,ci_lower,ci_upper"));
}

#[test]
fn empty_benchmark_table_is_header_only() {
    let mut config: RunConfig =
        toml::from_str("[data]\nbuiltin = 'two_period'\nU = 1\nV = 1\nn = 50\n[estimator]\nseed = 3\n[benchmark]\ncells = []\n")
            .unwrap();
    config.benchmark.replicates = Some(2);
    let (resolved, _) = resolve(&config, Some(Cmd::Benchmark)).unwrap();
    let out = run_with_threads(&resolved, Some(1)).unwrap();
    assert_eq!(
        render(&out, Format::Csv).unwrap(),
        "U,V,n,replicates,truth,n_mse,n_mse_se,coverage,coverage_se,bias,bias_se\n"
    );
}

#[test]
fn json_document_reemits_byte_identically() {
    let (code, stdout, _) = medseq(&["decompose", "--config", &example_config()]);
    assert_eq!(code, 0);
    let parsed: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(canonical_json(&parsed), stdout);
    let total = parsed["result"]["total"]["estimate"].as_f64().unwrap();
    let direct = parsed["result"]["direct"]["estimate"].as_f64().unwrap();
    let indirect = parsed["result"]["indirect"]["estimate"].as_f64().unwrap();
    assert!((direct + indirect - total).abs() <= 1e-12);
}

#[test]
fn bundled_panel_regenerates_from_its_model() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["example_scm.toml", "example_simulate.toml"] {
        std::fs::copy(data_dir().join(f), dir.path().join(f)).unwrap();
    }
    let cfg = dir.path().join("example_simulate.toml");
    let (code, _, stderr) = medseq(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    for f in ["example_panel.csv", "example_panel.schema.toml"] {
        let fresh = std::fs::read_to_string(dir.path().join(f)).unwrap();
        let bundled = std::fs::read_to_string(data_dir().join(f)).unwrap();
        assert_eq!(fresh, bundled, "{f} differs from its regenerated copy");
    }
}

#[test]
fn threads_flag_and_environment_fallback() {
    let (code, a, _) = medseq(&["oracle", "--builtin", "two_period", "--U", "-1", "--V", "1", "--seed", "5", "--threads", "1"]);
    assert_eq!(code, 0);
    let out = Command::new(env!("CARGO_BIN_EXE_medseq"))
        .args(["oracle", "--builtin", "two_period", "--U", "-1", "--V", "1", "--seed", "5"])
        .env("MEDSEQ_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    let strip = |s: &str| {
        let mut v: Value = serde_json::from_str(s).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    assert_eq!(strip(&a), strip(&String::from_utf8(out.stdout).unwrap()));
    let bad = Command::new(env!("CARGO_BIN_EXE_medseq"))
        .args(["oracle", "--builtin", "two_period", "--U", "-1", "--V", "1", "--seed", "5"])
        .env("MEDSEQ_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

const SCHEMA: &str = r#"
tau = 3
mediator_support = [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0, 2.0]]
treatment_support = [0.0, 1.0]
weights = "w"
ignore = ["id"]

[nodes]
L = [["age"], ["lab2"], ["lab3"]]
A = ["a1", "a2", "a3"]
Z = [["z1"], [], ["z3"]]
M = ["m1", "m2", "m3"]
Y = "y"
"#;

const PANEL: &str = "\
id,age,a1,z1,m1,lab2,a2,m2,lab3,a3,z3,m3,y,status_1,status_2,status_3,w
1,50,1,0.5,1,2.0,0,1,1.5,1,0.1,2,3.2,active,active,active,1
2,,0,0.2,0,,1,0,1.1,0,0.3,1,2.0,active,active,active,2
3,47,1,0.4,1,1.0,1,,,,,,,active,censored,censored,1
4,55,0,1.1,0,0.7,0,1,0.9,1,0.2,0,1.7,active,deceased,deceased,1.5
5,39,1,0.9,1,1.4,1,1,2.2,0,0.6,2,0.4,active,active,active,0.5
";

#[test]
fn panel_round_trips_through_csv() {
    let schema = Schema::from_toml(SCHEMA).unwrap();
    let first = load_panel(PANEL.as_bytes(), &schema).unwrap();
    assert!(first.column("age_missing").is_some());
    assert!(first.column("deceased_2").is_some());
    let (csv, written) = write_panel(&first).unwrap();
    let second = load_panel(csv.as_bytes(), &written).unwrap();
    assert_eq!(first, second);
    let (csv2, written2) = write_panel(&second).unwrap();
    assert_eq!((csv, written), (csv2, written2));
}

#[test]
fn schema_violations_are_reported() {
    let schema = Schema::from_toml(SCHEMA).unwrap();
    let extra = PANEL.replacen("id,", "idx,", 1);
    let err = load_panel(extra.as_bytes(), &schema).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("idx"));

    let missing = SCHEMA.replace("Y = \"y\"", "Y = \"outcome\"").replace("ignore = [\"id\"]", "ignore = [\"id\", \"y\"]");
    let err = load_panel(PANEL.as_bytes(), &Schema::from_toml(&missing).unwrap()).unwrap_err();
    assert!(err.to_string().contains("outcome"));

    let gap = SCHEMA.replace("A = [\"a1\", \"a2\", \"a3\"]", "A = [\"a1\", \"a3\"]");
    let err = load_panel(PANEL.as_bytes(), &Schema::from_toml(&gap).unwrap()).unwrap_err();
    assert!(err.to_string().contains("time gap"));

    let ragged = format!("{PANEL}6,40,1\n");
    let err = load_panel(ragged.as_bytes(), &schema).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("ragged"));

    let inf = SCHEMA.replace("[0.0, 1.0, 2.0]", "[0.0, 1.0, inf]");
    let err = load_panel(PANEL.as_bytes(), &Schema::from_toml(&inf).unwrap()).unwrap_err();
    assert!(err.to_string().contains("finite"));
}
