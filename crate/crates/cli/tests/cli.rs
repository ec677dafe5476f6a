use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vmfdiff::metrics::{evaluate_cosines, ClassCone, ClassStats};
use vmfdiff::score::MlpScoreNet;
use vmfdiff::UnitVector;
use vmfdiff_cli::data::ingest_csv;
use vmfdiff_cli::report::{from_json, read_samples};

const SMALL: &str = "\
# small benchmark
seed = 5
data.dim = 8
data.classes = 3
data.per_class = 300
schedule.steps = 30
sampler.samples_per_class = 120
";

fn vmfdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmfdiff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_small(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let cfg = write(dir, "small.cfg", SMALL);
    let out = dir.join(out);
    let mut args = vec!["run", "--config", &cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    vmfdiff(&args)
}

#[test]
fn reports_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_small(dir.path(), "r", &["--threads", "1"]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let report = dir.path().join("r/report.json");
    let samples = dir.path().join("r/samples.csv");
    let a = (fs::read(&report).unwrap(), fs::read(&samples).unwrap());
    let second = run_small(dir.path(), "r", &["--threads", "4"]);
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    assert!(a == (fs::read(&report).unwrap(), fs::read(&samples).unwrap()));
}

#[test]
fn metrics_recompute_exactly_from_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), "r", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = from_json(&fs::read_to_string(dir.path().join("r/report.json")).unwrap()).unwrap();
    assert_eq!(report.version, 1);
    let echo = &report.config_echo;
    assert_eq!(echo["seed"], "5");
    let pct: f64 = echo["metrics.percentile"].parse().unwrap();
    let bins: usize = echo["metrics.bins"].parse().unwrap();
    let filler = UnitVector::basis(8, 0).unwrap();
    let cones: BTreeMap<usize, ClassCone> = report
        .bounds
        .iter()
        .map(|b| {
            let cone = ClassCone {
                mean: filler.clone(),
                theta_max: b.theta_max,
            };
            (b.label, cone)
        })
        .collect();
    let stats = ClassStats::new(cones, pct, bins).unwrap();
    let label_of: BTreeMap<&str, usize> = report.bounds.iter().map(|b| (b.class.as_str(), b.label)).collect();
    let rows = read_samples(&dir.path().join("r/samples.csv")).unwrap();
    for (method, expected) in [("vmf", &report.metrics.vmf), ("gaussian", &report.metrics.gaussian)] {
        let expected = expected.as_ref().unwrap();
        let mine: Vec<_> = rows.iter().filter(|r| r.method == method).collect();
        assert_eq!(mine.len(), 360);
        let labels: Vec<usize> = mine.iter().map(|r| label_of[r.label.as_str()]).collect();
        let cosines: Vec<f64> = mine.iter().map(|r| r.cosine).collect();
        let again = evaluate_cosines(&labels, &cosines, &stats).unwrap();
        assert_eq!(&again, expected, "{method}");
        for r in &mine {
            let cone = &report.bounds[label_of[r.label.as_str()]];
            assert_eq!(r.in_cone, r.angle <= cone.theta_max);
        }
    }
}

#[test]
fn histograms_account_for_every_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), "r", &["--baseline", "off"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = from_json(&fs::read_to_string(dir.path().join("r/report.json")).unwrap()).unwrap();
    assert!(report.metrics.gaussian.is_none());
    assert!(!dir.path().join("r/hist_gaussian.dat").exists());
    for (file, expected) in [("hist_vmf.dat", 360), ("hist_data.dat", 900)] {
        let text = fs::read_to_string(dir.path().join("r").join(file)).unwrap();
        let total: usize = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| l.split_whitespace().nth(3).unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, expected, "{file}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r/metadata.json")).unwrap()).unwrap();
    assert!(meta["elapsed_seconds"].as_f64().unwrap() >= 0.0);
    let metrics = fs::read_to_string(dir.path().join("r/class_metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 3);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = vmfdiff(&["run", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("seed"));

    let cfg = write(dir.path(), "bad.cfg", "seed = 1\n\nsampler.speed = 3\n");
    let out = vmfdiff(&["run", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let cfg = write(dir.path(), "crowded.cfg", "seed = 1\ndata.dim = 3\ndata.classes = 7\ndata.margin = pi/2\n");
    let out = vmfdiff(&["run", "--config", &cfg]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn bad_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write(dir.path(), "broken.csv", "label,x0,x1\na,1,0\na,0,oops\n");
    let cfg = write(dir.path(), "csv.cfg", &format!("seed = 1\ndata.source = csv\ndata.path = {broken}\n"));
    let out = vmfdiff(&["run", "--config", &cfg]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let loose = write(dir.path(), "loose.csv", "label,x0,x1\na,1,0\na,3,4\n");
    let samples = write(dir.path(), "s.csv", "label,x0,x1\na,1,0\n");
    let out = vmfdiff(&["metrics", "--reference", &loose, "--samples", &samples]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn csv_round_trip_through_reverse_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let out = vmfdiff(&["sample-vmf", "--dim", "4", "--kappa", "15", "--n", "500", "--seed", "3", "--out", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let ds = ingest_csv(&data, false).unwrap();
    assert_eq!((ds.len(), ds.dim()), (500, 4));

    let cfg = write(
        dir.path(),
        "csv.cfg",
        &format!(
            "seed = 2\ndata.source = csv\ndata.path = {}\nschedule.steps = 30\nsampler.samples_per_class = 200\n",
            data.display()
        ),
    );
    let rev = dir.path().join("rev");
    let out = vmfdiff(&["reverse", "--config", &cfg, "--out", rev.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let samples = rev.join("reverse_samples.csv");
    assert_eq!(ingest_csv(&samples, false).unwrap().len(), 200);

    let json = dir.path().join("m.json");
    let out = vmfdiff(&[
        "metrics",
        "--reference",
        data.to_str().unwrap(),
        "--samples",
        samples.to_str().unwrap(),
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(m["n"], 200);
    let hcr = m["hcr"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&hcr));
}

#[test]
fn train_writes_a_loadable_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "train.cfg",
        "seed = 4\ndata.dim = 6\ndata.classes = 2\ndata.per_class = 200\nschedule.steps = 20\n\
         score.kind = mlp\nscore.hidden = 16,16\nscore.epochs = 5\n",
    );
    let out_dir = dir.path().join("t");
    let out = vmfdiff(&["train", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let net = MlpScoreNet::read_from(fs::File::open(out_dir.join("score_net.bin")).unwrap()).unwrap();
    assert_eq!(net.config().dim, 6);
    let curve = fs::read_to_string(out_dir.join("loss_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 5);
}

#[test]
fn forward_and_ablation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fwd.csv");
    let out = vmfdiff(&["forward", "--dim", "5", "--steps", "40", "--chains", "500", "--seed", "1", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 41);

    let cfg = write(dir.path(), "small.cfg", SMALL);
    let ab = dir.path().join("ab");
    let out = vmfdiff(&["ablate-schedule", "--config", &cfg, "--out", ab.to_str().unwrap(), "--constants", "5,50"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(ab.join("ablation.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["setting"], "scheduled");
    assert_eq!(rows[2]["kappa"], 50.0);
}

#[test]
fn verify_bounds_reports_violations_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = vmfdiff(&["verify-bounds", "--seed", "1", "--n", "3000", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    assert_eq!(v["coverage_passed"], false);
    let coverage = v["coverage"].as_array().unwrap();
    assert_eq!(coverage.len(), 32);
    assert_eq!(v["separation"].as_array().unwrap().len(), 32);
    assert!(coverage.iter().filter(|c| c["d"] == 3).all(|c| !c["exact"].is_null()));
}
