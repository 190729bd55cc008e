//! End-to-end runs of the `covswarm` binary on tiny generated fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use covswarm_core::dataset::{write_idx, SeedInput};
use covswarm_core::model::{InputSpec, LayerSpec, Manifest, Precision};
use covswarm_core::search::TestReport;
use covswarm_core::{ClassLabel, Image, Model};
use tempfile::TempDir;

const SIDE: usize = 8;

fn covswarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covswarm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn dense_model(weights: Vec<f32>, bias: [f32; 2]) -> Model {
    let manifest = Manifest {
        name: Some("fixture".into()),
        input: Some(InputSpec {
            height: SIDE,
            width: SIDE,
            channels: 1,
        }),
        num_classes: Some(2),
        precision: Precision::Single,
        layers: vec![
            LayerSpec::Dense {
                inputs: SIDE * SIDE,
                outputs: 2,
                activation: Default::default(),
            },
            LayerSpec::Softmax,
        ],
    };
    let mut params = weights;
    params.extend(bias);
    Model::from_parts(manifest, &params).unwrap()
}

/// Writes model, dataset and config into `dir`; returns the config path.
fn fixture(dir: &Path, model: &Model, label: usize, extra: &str) -> PathBuf {
    model.save(dir.join("m.json"), dir.join("m.bin")).unwrap();
    let seeds: Vec<SeedInput> = [0.2f32, 0.4, 0.6]
        .iter()
        .enumerate()
        .map(|(i, &v)| SeedInput {
            id: format!("s{i}"),
            image: Image::filled(SIDE, SIDE, 1, v).unwrap(),
            label: ClassLabel(label),
        })
        .collect();
    write_idx(&seeds, dir.join("img.idx"), dir.join("lab.idx")).unwrap();
    let config = format!(
        r#"
output_dir = "out"
[dataset]
format = "idx"
images = "img.idx"
labels = "lab.idx"
[model]
manifest = "m.json"
weights = "m.bin"
[search]
max_iterations = 2
pop_size = 4
{extra}
"#
    );
    let path = dir.join("campaign.toml");
    fs::write(&path, config).unwrap();
    path
}

fn constant_model() -> Model {
    dense_model(vec![0.0; 128], [1.0, 0.0])
}

/// 0.09999 and 0.1 both round to 0.0999755859375 in binary16.
fn near_tie_model() -> Model {
    dense_model(vec![0.0; 128], [0.09999, 0.1])
}

#[test]
fn clean_campaign_exits_zero_and_reruns_from_its_report() {
    let dir = TempDir::new().unwrap();
    let config = fixture(dir.path(), &constant_model(), 0, "divergence_check = true");
    let out = covswarm(&["run", "--config", config.to_str().unwrap(), "--fail-on-finding"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let report_path = dir.path().join("out/report.json");
    let report = TestReport::read(&report_path).unwrap();
    assert!(report.findings.is_empty());
    assert_eq!(report.seed_count, 3);
    assert_eq!(report.evaluations, 3 * 2 * 4);
    assert!(report.campaign.is_some());

    let out = covswarm(&["inspect", report_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 misclassification, 0 divergence"));

    // The report carries its campaign, so it can be rerun on its own.
    let again = dir.path().join("again");
    let out = covswarm(&[
        "run",
        "--config",
        report_path.to_str().unwrap(),
        "--output-dir",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rerun = TestReport::read(again.join("report.json")).unwrap();
    assert_eq!(rerun.findings, report.findings);
    assert_eq!(rerun.trajectory, report.trajectory);
    assert_eq!(rerun.config, report.config);
}

#[test]
fn missing_weights_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let config = fixture(dir.path(), &constant_model(), 0, "");
    fs::remove_file(dir.path().join("m.bin")).unwrap();
    let out = covswarm(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("m.bin"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let config = fixture(dir.path(), &constant_model(), 0, "bogus = 3");
    let out = covswarm(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn divergence_fails_the_run_only_when_asked() {
    let dir = TempDir::new().unwrap();
    let config = fixture(dir.path(), &near_tie_model(), 1, "divergence_check = true");
    let config = config.to_str().unwrap();

    let out = covswarm(&["run", "--config", config]);
    assert_eq!(code(&out), 0);

    let out = covswarm(&["run", "--config", config, "--fail-on-finding", "--export-png"]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let report = TestReport::read(dir.path().join("out/report.json")).unwrap();
    assert!(report.counts.divergence > 0);
    assert_eq!(report.counts.misclassification, 0);
    let pngs = fs::read_dir(dir.path().join("out/findings")).unwrap().count();
    assert_eq!(pngs, report.findings.len());
}

#[test]
fn inspect_flags_a_tampered_report() {
    let dir = TempDir::new().unwrap();
    let config = fixture(dir.path(), &near_tie_model(), 1, "divergence_check = true");
    let out = covswarm(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let path = dir.path().join("out/report.json");
    let mut report = TestReport::read(&path).unwrap();
    report.counts.divergence += 1;
    report.write(&path).unwrap();
    let out = covswarm(&["inspect", path.to_str().unwrap(), "--findings"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn quantize_is_idempotent_and_rounds_to_binary16() {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let mut weights = vec![0.0f32; 128];
    weights[0] = 0.1;
    weights[5] = -1.0e-6;
    dense_model(weights, [0.3, 65504.0]).save(p("m.json"), p("m.bin")).unwrap();

    let quantize = |from: &str, to: &str| {
        covswarm(&[
            "quantize",
            "--manifest",
            &p(&format!("{from}.json")),
            "--weights",
            &p(&format!("{from}.bin")),
            "--out-manifest",
            &p(&format!("{to}.json")),
            "--out-weights",
            &p(&format!("{to}.bin")),
        ])
    };
    assert_eq!(code(&quantize("m", "q1")), 0);
    assert_eq!(code(&quantize("q1", "q2")), 0);
    assert_eq!(fs::read(p("q1.bin")).unwrap(), fs::read(p("q2.bin")).unwrap());

    let q = Model::load(p("q1.json"), p("q1.bin")).unwrap();
    let params = q.params();
    assert_eq!(params[0], 0.099_975_585_937_5);
    assert_eq!(params[129], 65504.0);
    assert_eq!(q.precision(), Precision::TruncatedHalf);

    dense_model(vec![0.0; 128], [70000.0, 0.0]).save(p("big.json"), p("big.bin")).unwrap();
    let out = quantize("big", "never");
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("layer 0"));
    assert!(!dir.path().join("never.bin").exists());
}

#[test]
fn bench_opt_writes_one_row_per_iteration() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("gwo.csv");
    let baseline = dir.path().join("baseline.json");
    let out = covswarm(&[
        "bench-opt",
        "--kind",
        "gwo",
        "--function",
        "sphere",
        "--dim",
        "3",
        "--pop",
        "8",
        "--iters",
        "15",
        "--seeds",
        "2",
        "--out",
        csv.to_str().unwrap(),
        "--save-baseline",
        baseline.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,iteration,best_value"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 2 * 16);
    for seed in ["0", "1"] {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == seed)
            .map(|r| r[2].parse().unwrap())
            .collect();
        assert_eq!(values.len(), 16);
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
    }

    // Same setup against its own baseline passes; against a baseline a
    // thousand times better it is a regression.
    let args = |baseline: &Path| {
        covswarm(&[
            "bench-opt", "--kind", "gwo", "--dim", "3", "--pop", "8", "--iters", "15", "--seeds", "2", "--out",
            csv.to_str().unwrap(), "--baseline", baseline.to_str().unwrap(),
        ])
    };
    assert_eq!(code(&args(&baseline)), 0);
    let mut stored: serde_json::Value = serde_json::from_str(&fs::read_to_string(&baseline).unwrap()).unwrap();
    stored["median_best"] = (stored["median_best"].as_f64().unwrap() / 1000.0).into();
    let strict = dir.path().join("strict.json");
    fs::write(&strict, stored.to_string()).unwrap();
    assert_eq!(code(&args(&strict)), 1);
}

#[test]
fn bench_opt_rejects_unknown_kinds() {
    let out = covswarm(&["bench-opt", "--kind", "ant-colony"]);
    assert_eq!(code(&out), 2);
    let out = covswarm(&["bench-opt", "--kind", "pso", "--function", "ackley"]);
    assert_eq!(code(&out), 2);
}
