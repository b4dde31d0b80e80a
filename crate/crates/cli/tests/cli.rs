use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pdfool::learner::LearnerRegistry;

fn pdfool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdfool")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn set(key: &str, value: impl AsRef<Path>) -> String {
    format!("{key}={}", value.as_ref().display())
}

/// Simulates a small dataset into `dir/sim` and returns the data arguments.
fn simulated(dir: &Path, n: usize) -> Vec<String> {
    let out = dir.join("sim");
    let o = pdfool(&["simulate", "-s", &set("run.output", &out), "-s", &format!("simulate.n={n}")]);
    assert!(o.status.success(), "{}", stderr(&o));
    vec![
        "-s".into(),
        set("data.csv", out.join("data.csv")),
        "-s".into(),
        set("data.schema", out.join("data.schema")),
    ]
}

/// Small, quick attack settings.
const QUICK: [&str; 10] = [
    "-s",
    "attack.folds=2",
    "-s",
    "attack.run_folds=0",
    "-s",
    "model.max_epochs=5",
    "-s",
    "extrapolation.max_epochs=2",
    "-s",
    "allocator.max_epochs=2",
];

fn run(command: &str, out: &Path, data: &[String], extra: &[&str]) -> Output {
    let out_arg = set("run.output", out);
    let mut args: Vec<&str> = vec![command, "-s", &out_arg];
    args.extend(data.iter().map(String::as_str));
    args.extend(extra);
    pdfool(&args)
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                found.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    found.sort();
    found
}

#[test]
fn single_feature_attack_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path(), 400);
    let out = tmp.path().join("attack");
    let mut extra = QUICK.to_vec();
    extra.extend(["-s", "attack.target.x1=flat"]);
    let o = run("attack", &out, &data, &extra);
    assert!(o.status.success(), "{}", stderr(&o));
    let files = files_under(&out);
    for f in [
        "fold-0/attack.manifest",
        "fold-0/curves.csv",
        "fold-0/extrapolation.model",
        "fold-0/in_sample_curves.csv",
        "fold-0/original.model",
        "fold-0/warnings.txt",
        "report.csv",
        "run.manifest",
    ] {
        assert!(files.contains(&PathBuf::from(f)), "missing {f} in {files:?}");
    }
    assert!(!out.join("fold-0/allocator.model").exists());
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    assert!(report.starts_with("fold,threshold,feature,tpr,accuracy\n0,0.5,x1,"));
}

#[test]
fn two_feature_attack_saves_a_three_class_allocator() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path(), 400);
    let out = tmp.path().join("attack");
    let mut extra = QUICK.to_vec();
    extra.extend(["-s", "attack.target.x1=flat", "-s", "attack.target.x6=linear(2)"]);
    let o = run("attack", &out, &data, &extra);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("fold-0/allocator.model")).unwrap();
    let allocator = LearnerRegistry::with_builtins().load(&text).unwrap();
    let dist = allocator.predict_class_distribution(&[0.0; 6]).unwrap();
    assert_eq!(dist.len(), 3);
    let manifest = std::fs::read_to_string(out.join("fold-0/attack.manifest")).unwrap();
    assert!(manifest.contains("mode multi"));
    assert!(manifest.contains("targets x1,x6"));

    // the saved attack can be evaluated on other data
    let ev = tmp.path().join("evaluate");
    let o = run("evaluate", &ev, &data, &["-s", &set("evaluate.attack", out.join("fold-0/attack.manifest"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(ev.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);
}

#[test]
fn zero_rows_is_a_config_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let o = pdfool(&["simulate", "-s", &set("run.output", &out), "-s", "simulate.n=0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_target_feature_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path(), 100);
    let out = tmp.path().join("attack");
    let o = run("attack", &out, &data, &["-s", "attack.target.income=flat"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("income"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn bad_config_line_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\nrun.output = out\nthis is not a setting\n").unwrap();
    let o = pdfool(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn config_paths_are_relative_to_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sim.cfg");
    std::fs::write(&cfg, "run.output = nested/out\nsimulate.n = 50\nsimulate.seed = 4\n").unwrap();
    let o = pdfool(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("nested/out/data.csv").exists());
    let csv = std::fs::read_to_string(tmp.path().join("nested/out/data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
}

#[test]
fn malformed_curves_csv_error_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let curves = tmp.path().join("curves.csv");
    std::fs::write(&curves, "feature,grid_value,series,value\nx1,0.5,original,1.0\nx1,abc,original,2.0\n").unwrap();
    let out = tmp.path().join("plot");
    let o = pdfool(&["plot", "-s", &set("run.output", &out), "-s", &set("plot.curves", &curves)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn replay_is_byte_identical_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path(), 300);
    let out = tmp.path().join("explain");
    let o = run("explain", &out, &data, &["-s", "model.max_epochs=3", "-s", "pfi.repeats=2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let plot = tmp.path().join("plot");
    let o = pdfool(&[
        "plot",
        "-s",
        &set("run.output", &plot),
        "-s",
        &set("plot.curves", out.join("pd.csv")),
        "-s",
        &set("plot.ice", out.join("ice-x1.csv")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files_under(&plot).len(), 7);

    for dir in [&out, &plot] {
        let again = dir.with_extension("again");
        let o = pdfool(&["replay", dir.join("run.manifest").to_str().unwrap(), "--output", again.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        for f in files_under(dir).iter().filter(|f| f.as_os_str() != "run.manifest") {
            assert_eq!(std::fs::read(dir.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f:?}");
        }
    }

    // a recorded hash that no longer matches is a mismatch
    let manifest = out.join("run.manifest");
    let text = std::fs::read_to_string(&manifest).unwrap();
    let tampered: String = text
        .lines()
        .map(|l| if l.ends_with(" pd.csv") { format!("{} pd.csv", "0".repeat(64)) } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&manifest, tampered + "\n").unwrap();
    let o = pdfool(&["replay", manifest.to_str().unwrap(), "--output", tmp.path().join("third").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("pd.csv"), "{}", stderr(&o));
}

#[test]
fn sweep_writes_one_row_per_threshold_fold_and_feature() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path(), 300);
    let out = tmp.path().join("sweep");
    let mut extra = QUICK.to_vec();
    extra.extend(["-s", "attack.target.x1=flat", "-s", "sweep.thresholds=0.1,0.5,0.9"]);
    let o = run("sweep", &out, &data, &extra);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
}
