//! Runs the correlated-Gaussian study fold by fold and prints TPR, PD
//! slopes and timing.
//!
//! `cargo run --release -p pdfool --example simulated_study -- [n] [folds] [class_weight_real] [epochs]`

use std::collections::BTreeMap;
use std::time::Instant;

use pdfool::attack::TargetSpec;
use pdfool::data::{kfold_split, simulate_correlated_gaussian, SimulationConfig};
use pdfool::learner::{LearnerRegistry, Task};
use pdfool::explain::{compute_pfi, LossKind};
use pdfool::data::spearman;
use pdfool::metrics::{threshold_sweep, Norm, SWEEP_THRESHOLDS};
use pdfool::study::{run_fold, stage_seed, ModelSource, StudyConfig};

fn main() -> pdfool::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let n: usize = arg(0, "20000").parse().unwrap();
    let folds: usize = arg(1, "5").parse().unwrap();
    let w0 = arg(2, "10");
    let epochs = arg(3, "10");

    let sim = SimulationConfig { n_rows: n, ..SimulationConfig::default() };
    let data = simulate_correlated_gaussian(&sim)?;
    let split = kfold_split(n, folds, stage_seed(0, "folds", 0))?;
    let mut c_opts = BTreeMap::new();
    c_opts.insert("class_weights".to_string(), format!("{w0},1"));
    c_opts.insert("max_epochs".to_string(), epochs.clone());
    let mut g_opts = BTreeMap::new();
    g_opts.insert("max_epochs".to_string(), epochs);
    let config = StudyConfig {
        model: ModelSource::Learn { learner: "mlp".into(), options: BTreeMap::new() },
        task: Task::Regression,
        extrapolation: c_opts,
        allocator: g_opts,
        threshold: 0.955,
        multiplier: None,
        grid_points: 20,
        targets: vec![
            ("x1".into(), TargetSpec::Flat(None)),
            ("x6".into(), TargetSpec::Linear { slope: 2.0, intercept: None }),
        ],
        folds,
        seed: 0,
    };
    let registry = LearnerRegistry::with_builtins();
    let start = Instant::now();
    let mut inputs = Vec::new();
    for fold in 0..folds {
        let run = run_fold(&data, &split, fold, &config, &registry)?;
        let report = run.report(Norm::L2)?;
        print!("fold {fold} t={:.0?} tpr={:.4} identity={:.2e}", start.elapsed(), report.tpr, run.in_sample_identity_error());
        for f in &report.features {
            print!(
                " | {} before={:.3} after={:.3} acc={:.3}",
                f.feature,
                f.original.slope(),
                f.adversarial.slope(),
                f.accuracy
            );
        }
        println!();
        inputs.extend(run.sweep_inputs());
        let before = compute_pfi(run.original.as_ref(), &run.test, LossKind::Mse, 10, 1)?;
        let after = compute_pfi(&run.attack, &run.test, LossKind::Mse, 10, 1)?;
        for name in ["x1", "x6"] {
            let (b, a) = (before.get(name).unwrap(), after.get(name).unwrap());
            println!(
                "  pfi {name}: rank {} -> {}, median {:.3} -> {:.3}, spread {:.4} -> {:.4}",
                before.rank_of(name).unwrap(),
                after.rank_of(name).unwrap(),
                b.median,
                a.median,
                b.spread(),
                a.spread()
            );
        }
    }
    let sweep = threshold_sweep(&inputs, &SWEEP_THRESHOLDS, Norm::L2)?;
    for name in ["x1", "x6"] {
        let pts: Vec<_> = sweep.points.iter().filter(|p| p.feature == name && p.accuracy.is_some()).collect();
        let tpr: Vec<f64> = pts.iter().map(|p| p.tpr).collect();
        let acc: Vec<f64> = pts.iter().map(|p| p.accuracy.unwrap()).collect();
        println!("sweep {name}: {} points ok, spearman(tpr, acc) = {:.3}", pts.len(), spearman(&tpr, &acc));
        for p in sweep.points.iter().filter(|p| p.feature == name && p.fold == 0) {
            println!("  t={} tpr={:.3} acc={:?}", p.threshold, p.tpr, p.accuracy);
        }
    }
    Ok(())
}
