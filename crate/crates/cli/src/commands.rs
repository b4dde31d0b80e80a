//! Subcommands. Each returns its files in memory; [`execute`] writes them
//! and the run manifest only after the command has fully succeeded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use pdfool::attack::{AttackManifest, TargetSpec};
use pdfool::data::{
    format_schema, kfold_split, parse_schema, read_csv, simulate_correlated_gaussian, write_csv_to, Dataset,
    SimulationConfig,
};
use pdfool::explain::{
    build_permuted_pd_data, compute_ice, compute_pd, compute_pfi, read_curves_csv, select_grid, write_curves_csv,
    write_ice_csv, write_pfi_csv, CurveKind, CurveRecord, GridPolicy, GridSource, GridSpec, LossKind, PdCurve,
};
use pdfool::learner::{LearnerRegistry, LearnerSpec, Predictor, Task};
use pdfool::metrics::{
    accuracy_of_attack, fidelity_report, threshold_sweep, AttackReport, Norm, SWEEP_THRESHOLDS,
};
use pdfool::study::{run_fold, stage_seed, FoldRun, ModelSource, StudyConfig};

use crate::config::ConfigFile;
use crate::error::{config_err, CliError, CliResult};
use crate::manifest::{sha256_hex, Outputs, RunManifest, MANIFEST_NAME};
use crate::svg::{color_for, render_panel, Series};

pub const COMMANDS: [&str; 7] = ["simulate", "train", "explain", "attack", "evaluate", "sweep", "plot"];

/// Files read by a command, with their hashes.
#[derive(Debug, Default)]
pub struct InputLog {
    entries: Vec<(String, String)>,
}

impl InputLog {
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| {
            CliError::Core(pdfool::Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            )))
        })?;
        self.entries.push((sha256_hex(&bytes), path.to_string_lossy().into_owned()));
        Ok(bytes)
    }

    pub fn read_text(&mut self, path: &Path) -> CliResult<String> {
        String::from_utf8(self.read(path)?)
            .map_err(|_| CliError::Core(pdfool::Error::Schema(format!("{} is not UTF-8", path.display()))))
    }
}

/// Runs `command` and writes its outputs plus `run.manifest` under
/// `run.output`.
pub fn execute(command: &str, config: &ConfigFile) -> CliResult<RunManifest> {
    let out_dir = PathBuf::from(config.require("run.output")?);
    let (outputs, inputs) = produce(command, config)?;
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        inputs: inputs.entries,
        outputs: outputs.hashes(),
    };
    std::fs::create_dir_all(&out_dir)?;
    outputs.write_under(&out_dir)?;
    std::fs::write(out_dir.join(MANIFEST_NAME), manifest.to_text())?;
    Ok(manifest)
}

/// Computes a command's outputs without touching the file system.
pub fn produce(command: &str, config: &ConfigFile) -> CliResult<(Outputs, InputLog)> {
    config.require("run.output")?;
    let mut log = InputLog::default();
    let outputs = match command {
        "simulate" => simulate(config)?,
        "train" => train(config, &mut log)?,
        "explain" => explain(config, &mut log)?,
        "attack" => attack(config, &mut log)?,
        "evaluate" => evaluate(config, &mut log)?,
        "sweep" => sweep(config, &mut log)?,
        "plot" => plot(config, &mut log)?,
        other => return Err(config_err(format!("unknown command `{other}`"))),
    };
    Ok((outputs, log))
}

/// Re-runs a manifest's command into `output` (default: the recorded
/// directory) and checks every output hash.
pub fn replay(manifest_text: &str, output: Option<&Path>) -> CliResult<RunManifest> {
    let recorded = RunManifest::parse(manifest_text)?;
    let mut config = recorded.config.clone();
    if let Some(dir) = output {
        config.set(&format!("run.output={}", std::path::absolute(dir)?.display()))?;
    }
    let rerun = execute(&recorded.command, &config)?;
    let mut differ: Vec<String> = recorded
        .outputs
        .iter()
        .filter(|o| !rerun.outputs.contains(o))
        .map(|(_, p)| p.clone())
        .collect();
    differ.extend(
        rerun
            .outputs
            .iter()
            .filter(|o| !recorded.outputs.iter().any(|r| r.1 == o.1))
            .map(|(_, p)| p.clone()),
    );
    if !differ.is_empty() {
        return Err(CliError::Mismatch(differ));
    }
    Ok(rerun)
}

fn seed(config: &ConfigFile) -> CliResult<u64> {
    config.parsed_or("run.seed", 0)
}

fn simulation_config(config: &ConfigFile) -> CliResult<SimulationConfig> {
    let d = SimulationConfig::default();
    let n_features = config.parsed_or("simulate.features", d.n_features)?;
    let coefficients = match config.list("simulate.coefficients")? {
        Some(c) => c,
        None if n_features == d.n_features => d.coefficients.clone(),
        None => return Err(config_err("`simulate.coefficients` is needed when `simulate.features` changes")),
    };
    let sim = SimulationConfig {
        n_rows: config.parsed_or("simulate.n", d.n_rows)?,
        n_features,
        pairwise_correlation: config.parsed_or("simulate.correlation", d.pairwise_correlation)?,
        noise_sd: config.parsed_or("simulate.noise_sd", d.noise_sd)?,
        coefficients,
        seed: config.parsed_or("simulate.seed", seed(config)?)?,
    };
    sim.validate()?;
    Ok(sim)
}

fn target_column(config: &ConfigFile) -> String {
    config.get("data.target").unwrap_or("y").to_string()
}

fn load_dataset(config: &ConfigFile, log: &mut InputLog) -> CliResult<Dataset> {
    let source = match config.get("data.source") {
        Some(s) => s.to_string(),
        None if config.get("data.csv").is_some() => "csv".into(),
        None => "simulate".into(),
    };
    match source.as_str() {
        "csv" => {
            let schema_path = config
                .path("data.schema")
                .ok_or_else(|| config_err("missing `data.schema` for csv data"))?;
            let schema = parse_schema(&log.read_text(&schema_path)?)?;
            let bytes = log.read(&PathBuf::from(config.require("data.csv")?))?;
            Ok(read_csv(bytes.as_slice(), &schema, &target_column(config), config.get("data.weight"))?)
        }
        "simulate" => Ok(simulate_correlated_gaussian(&simulation_config(config)?)?),
        other => Err(config_err(format!("`data.source` must be csv or simulate, got `{other}`"))),
    }
}

fn task(config: &ConfigFile) -> CliResult<Task> {
    Ok(Task::parse(config.get("model.task").unwrap_or("regression"))?)
}

/// Options under `section.` minus the keys the CLI itself interprets.
fn options(config: &ConfigFile, section: &str, reserved: &[&str]) -> BTreeMap<String, String> {
    config
        .section(section)
        .into_iter()
        .filter(|(k, _)| !reserved.contains(&k.as_str()))
        .collect()
}

const MODEL_KEYS: [&str; 3] = ["learner", "file", "task"];
const EXTRAPOLATION_KEYS: [&str; 2] = ["threshold", "multiplier"];

fn model_source(config: &ConfigFile, log: &mut InputLog, registry: &LearnerRegistry) -> CliResult<ModelSource> {
    if let Some(path) = config.path("model.file") {
        let text = log.read_text(&path)?;
        return Ok(ModelSource::Fixed(registry.load(&text)?));
    }
    let learner = config.get("model.learner").unwrap_or("mlp").to_string();
    registry.get(&learner)?;
    Ok(ModelSource::Learn { learner, options: options(config, "model", &MODEL_KEYS) })
}

fn fit_or_load(
    config: &ConfigFile,
    log: &mut InputLog,
    registry: &LearnerRegistry,
    data: &Dataset,
) -> CliResult<Arc<dyn Predictor>> {
    match model_source(config, log, registry)? {
        ModelSource::Fixed(m) => Ok(m),
        ModelSource::Learn { learner, options } => {
            let spec = LearnerSpec { task: task(config)?, seed: stage_seed(seed(config)?, "model", 0), options };
            Ok(registry.fit(&learner, data, &spec)?)
        }
    }
}

fn parse_target(spec: &str, log: &mut InputLog) -> CliResult<TargetSpec> {
    if let Some(p) = spec.trim().strip_prefix("file(").and_then(|r| r.strip_suffix(')')) {
        let text = log.read_text(Path::new(p.trim()))?;
        let values = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .enumerate()
            .map(|(i, l)| {
                l.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| config_err(format!("{p}: value {} `{l}` is not a number", i + 1)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        return Ok(TargetSpec::Explicit(values));
    }
    Ok(TargetSpec::parse(spec)?)
}

fn study_config(
    config: &ConfigFile,
    log: &mut InputLog,
    registry: &LearnerRegistry,
    data: &Dataset,
) -> CliResult<StudyConfig> {
    let mut targets = Vec::new();
    for (feature, spec) in config.section("attack.target") {
        targets.push((feature, parse_target(&spec, log)?));
    }
    let study = StudyConfig {
        model: model_source(config, log, registry)?,
        task: task(config)?,
        extrapolation: options(config, "extrapolation", &EXTRAPOLATION_KEYS),
        allocator: options(config, "allocator", &[]),
        threshold: config.parsed_or("extrapolation.threshold", 0.5)?,
        multiplier: config.parsed("extrapolation.multiplier")?,
        grid_points: config.parsed_or("attack.grid_points", 20)?,
        targets,
        folds: config.parsed_or("attack.folds", 5)?,
        seed: seed(config)?,
    };
    study.validate(data)?;
    Ok(study)
}

fn folds_to_run(config: &ConfigFile, k: usize) -> CliResult<Vec<usize>> {
    match config.get("attack.run_folds") {
        None | Some("all") => Ok((0..k).collect()),
        Some(_) => {
            let folds: Vec<usize> = config.list("attack.run_folds")?.unwrap_or_default();
            if folds.is_empty() || folds.iter().any(|&f| f >= k) {
                return Err(config_err(format!("`attack.run_folds` must list folds below {k}")));
            }
            Ok(folds)
        }
    }
}

fn norm(config: &ConfigFile) -> CliResult<Norm> {
    Ok(config.get("metrics.norm").map(Norm::parse).transpose()?.unwrap_or_default())
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> pdfool::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn simulate(config: &ConfigFile) -> CliResult<Outputs> {
    let sim = simulation_config(config)?;
    let data = simulate_correlated_gaussian(&sim)?;
    let mut out = Outputs::default();
    out.add("data.csv", csv_bytes(|b| write_csv_to(&data, b, &target_column(config)))?);
    out.add("data.schema", format_schema(data.schema()).into_bytes());
    out.add("data.meta", sim.sidecar().into_bytes());
    Ok(out)
}

fn train(config: &ConfigFile, log: &mut InputLog) -> CliResult<Outputs> {
    let registry = LearnerRegistry::with_builtins();
    let data = load_dataset(config, log)?;
    if config.get("model.file").is_some() {
        return Err(config_err("`train` fits a learner; remove `model.file`"));
    }
    let model = fit_or_load(config, log, &registry, &data)?;
    let mut out = Outputs::default();
    out.add("model.txt", model.to_model_text()?.into_bytes());
    Ok(out)
}

fn explain(config: &ConfigFile, log: &mut InputLog) -> CliResult<Outputs> {
    let registry = LearnerRegistry::with_builtins();
    let data = load_dataset(config, log)?;
    let features: Vec<String> = match config.list::<String>("explain.features")? {
        Some(f) => f,
        None => data.feature_names().iter().map(|s| s.to_string()).collect(),
    };
    for f in &features {
        data.feature_index(f)?;
    }
    let grid_points = config.parsed_or("explain.grid_points", 20)?;
    let repeats = config.parsed_or("pfi.repeats", 10)?;
    let model = fit_or_load(config, log, &registry, &data)?;
    let mut out = Outputs::default();
    let mut curves = Vec::new();
    for f in &features {
        let j = data.feature_index(f)?;
        let grid = select_grid(&data, f, &GridPolicy::default_for(data.schema()[j].kind, grid_points))?;
        let permuted = build_permuted_pd_data(&data, &grid)?;
        let ice = compute_ice(model.as_ref(), &permuted)?;
        out.add(format!("ice-{f}.csv"), csv_bytes(|b| write_ice_csv(&ice, b))?);
        curves.push(compute_pd(model.as_ref(), &permuted)?);
    }
    let refs: Vec<&PdCurve> = curves.iter().collect();
    out.add("pd.csv", csv_bytes(|b| write_curves_csv(&refs, b))?);
    let loss = if task(config)? == Task::Binary { LossKind::CrossEntropy } else { LossKind::Mse };
    let pfi = compute_pfi(model.as_ref(), &data, loss, repeats, stage_seed(seed(config)?, "pfi", 0))?;
    out.add("pfi.csv", csv_bytes(|b| write_pfi_csv(&pfi, b))?);
    Ok(out)
}

fn run_folds(config: &ConfigFile, log: &mut InputLog) -> CliResult<(Vec<FoldRun>, Task)> {
    let registry = LearnerRegistry::with_builtins();
    let data = load_dataset(config, log)?;
    let study = study_config(config, log, &registry, &data)?;
    let folds = folds_to_run(config, study.folds)?;
    let split = kfold_split(data.n_rows(), study.folds, stage_seed(study.seed, "folds", 0))?;
    let runs = folds
        .iter()
        .map(|&k| run_fold(&data, &split, k, &study, &registry))
        .collect::<pdfool::Result<Vec<_>>>()?;
    Ok((runs, study.task))
}

/// Grid values whose compensating output leaves the natural output range.
fn range_warnings(run: &FoldRun, task: Task) -> String {
    let (lo, hi) = match task {
        Task::Binary => (0.0, 1.0),
        _ => run
            .train
            .target()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y))),
    };
    let mut text = String::new();
    for comp in run.compensation.features() {
        for v in comp.out_of_range(lo, hi) {
            text.push_str(&format!(
                "fold {} feature {} grid value {v}: compensating output outside [{lo}, {hi}]\n",
                run.fold, comp.feature
            ));
        }
    }
    text
}

fn attack(config: &ConfigFile, log: &mut InputLog) -> CliResult<Outputs> {
    let norm = norm(config)?;
    let (runs, task) = run_folds(config, log)?;
    let mut out = Outputs::default();
    let mut reports = Vec::new();
    let mut warnings = String::new();
    for run in &runs {
        let dir = PathBuf::from(format!("fold-{}", run.fold));
        out.add(dir.join("original.model"), run.original.to_model_text()?.into_bytes());
        out.add(dir.join("extrapolation.model"), run.extrapolation.model().to_model_text()?.into_bytes());
        if let Some(a) = &run.allocator {
            out.add(dir.join("allocator.model"), a.model().to_model_text()?.into_bytes());
        }
        let manifest = AttackManifest {
            threshold: run.extrapolation.threshold(),
            original: "original.model".into(),
            extrapolation: "extrapolation.model".into(),
            allocator: run.allocator.as_ref().map(|_| "allocator.model".into()),
            targets: run.attack.targeted_features().to_vec(),
            compensation: run.compensation.clone(),
        };
        out.add(dir.join("attack.manifest"), manifest.to_text().into_bytes());

        let report = run.report(norm)?;
        let mut held: Vec<&PdCurve> = Vec::new();
        for f in &report.features {
            held.extend([&f.original, &f.adversarial, &f.target]);
        }
        out.add(dir.join("curves.csv"), csv_bytes(|b| write_curves_csv(&held, b))?);

        // single-feature evaluation on the rows the compensation was fitted on
        let t = run.extrapolation.threshold();
        let mut in_sample = Vec::new();
        for ((scores, comp), target) in run.fitting.iter().zip(run.compensation.features()).zip(&run.targets) {
            in_sample.push(PdCurve::new(target.grid.clone(), scores.original_pd(), CurveKind::Original)?);
            in_sample.push(PdCurve::new(
                target.grid.clone(),
                scores.adversarial_pd(t, &comp.gammas()),
                CurveKind::Adversarial,
            )?);
            in_sample.push(target.curve());
        }
        let refs: Vec<&PdCurve> = in_sample.iter().collect();
        out.add(dir.join("in_sample_curves.csv"), csv_bytes(|b| write_curves_csv(&refs, b))?);
        let w = range_warnings(run, task);
        out.add(dir.join("warnings.txt"), w.clone().into_bytes());
        warnings.push_str(&w);
        reports.push(report);
    }
    out.add("report.csv", csv_bytes(|b| AttackReport::write_csv(&reports, b))?);
    if !warnings.is_empty() {
        eprintln!("warning: {} compensating outputs fall outside the output range (see warnings.txt)", warnings.lines().count());
    }
    Ok(out)
}

fn evaluate(config: &ConfigFile, log: &mut InputLog) -> CliResult<Outputs> {
    let registry = LearnerRegistry::with_builtins();
    let manifest_path = PathBuf::from(config.require("evaluate.attack")?);
    let manifest = AttackManifest::parse(&log.read_text(&manifest_path)?)?;
    let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut load_err = None;
    let attack = manifest.build(|name| {
        let text = match log.read_text(&base.join(name)) {
            Ok(t) => t,
            Err(e) => {
                load_err = Some(e);
                return Err(pdfool::Error::ModelFormat(format!("cannot read model `{name}`")));
            }
        };
        registry.load(&text)
    });
    if let Some(e) = load_err {
        return Err(e);
    }
    let attack = attack?;
    let data = load_dataset(config, log)?;
    let norm = norm(config)?;
    let fidelity = fidelity_report(&attack, attack.original().as_ref(), data.rows())?;
    let mut out = Outputs::default();
    let mut curves = Vec::new();
    let mut rows = String::from("feature,n_rows,tpr,unchanged,accuracy\n");
    for comp in attack.compensation().features() {
        if data.feature_names().get(comp.feature_index) != Some(&comp.feature.as_str()) {
            return Err(config_err(format!("test data has no feature `{}` at column {}", comp.feature, comp.feature_index)));
        }
        let grid = GridSpec {
            feature: comp.feature.clone(),
            feature_index: comp.feature_index,
            kind: comp.kind,
            values: comp.grid_values(),
            source: GridSource::Explicit,
        };
        let permuted = build_permuted_pd_data(&data, &grid)?;
        let original = compute_pd(attack.original().as_ref(), &permuted)?;
        let mut adversarial = compute_pd(&attack, &permuted)?;
        adversarial.kind = CurveKind::Adversarial;
        let target = PdCurve::new(grid, comp.desired(), CurveKind::Target)?;
        let accuracy = accuracy_of_attack(&original, &adversarial, &target, norm)?;
        rows.push_str(&format!(
            "{},{},{},{},{}\n",
            comp.feature, fidelity.n_rows, fidelity.tpr, fidelity.unchanged, accuracy
        ));
        curves.extend([original, adversarial, target]);
    }
    out.add("report.csv", rows.into_bytes());
    let refs: Vec<&PdCurve> = curves.iter().collect();
    out.add("curves.csv", csv_bytes(|b| write_curves_csv(&refs, b))?);
    Ok(out)
}

fn sweep(config: &ConfigFile, log: &mut InputLog) -> CliResult<Outputs> {
    let thresholds = config.list("sweep.thresholds")?.unwrap_or_else(|| SWEEP_THRESHOLDS.to_vec());
    let norm = norm(config)?;
    let (runs, _) = run_folds(config, log)?;
    let inputs: Vec<_> = runs.iter().flat_map(FoldRun::sweep_inputs).collect();
    let result = threshold_sweep(&inputs, &thresholds, norm)?;
    let mut out = Outputs::default();
    out.add("sweep.csv", csv_bytes(|b| result.write_csv(b))?);
    Ok(out)
}

fn plot(config: &ConfigFile, log: &mut InputLog) -> CliResult<Outputs> {
    let curves = read_curves_csv(log.read(&PathBuf::from(config.require("plot.curves")?))?.as_slice())?;
    let ice = match config.path("plot.ice") {
        Some(p) => Some(read_curves_csv(log.read(&p)?.as_slice())?),
        None => None,
    };
    let mut features: Vec<String> = Vec::new();
    for r in &curves {
        if !features.contains(&r.feature) {
            features.push(r.feature.clone());
        }
    }
    if let Some(f) = config.get("plot.feature") {
        if !features.iter().any(|x| x == f) {
            return Err(config_err(format!("`plot.feature`: no curves for `{f}`")));
        }
        features = vec![f.to_string()];
    }
    let max_ice: usize = config.parsed_or("plot.max_ice", 100)?;
    let mut out = Outputs::default();
    for f in &features {
        let mut series = Vec::new();
        if let Some(ice) = &ice {
            series.extend(ice_series(ice, f, max_ice));
        }
        let mut names: Vec<&str> = Vec::new();
        for r in curves.iter().filter(|r| &r.feature == f) {
            if !names.contains(&r.series.as_str()) {
                names.push(&r.series);
            }
        }
        for name in names {
            let pts = curves
                .iter()
                .filter(|r| &r.feature == f && r.series == name)
                .map(|r| (r.grid_value, r.value))
                .collect();
            let mut s = Series::line(name, pts, color_for(name));
            s.dashed = name == "target";
            series.push(s);
        }
        let svg = render_panel(&format!("Partial dependence of {f}"), f, "prediction", &series);
        out.add(format!("plot-{f}.svg"), svg.into_bytes());
    }
    Ok(out)
}

/// Thin lines for the first `max_lines` ICE rows plus 10th/90th percentile
/// curves over all rows.
fn ice_series(records: &[CurveRecord], feature: &str, max_lines: usize) -> Vec<Series> {
    let mut by_row: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.feature == feature) {
        let row = r.series.strip_prefix("row:").and_then(|s| s.parse().ok()).unwrap_or(usize::MAX);
        by_row.entry(row).or_default().push((r.grid_value, r.value));
    }
    if by_row.is_empty() {
        return Vec::new();
    }
    let mut series: Vec<Series> = by_row
        .values()
        .take(max_lines)
        .map(|pts| Series {
            label: None,
            points: pts.clone(),
            color: "#999999",
            width: 0.6,
            dashed: false,
            opacity: 0.35,
        })
        .collect();
    let grid: Vec<f64> = by_row.values().next().map(|p| p.iter().map(|q| q.0).collect()).unwrap_or_default();
    for (label, prob) in [("ICE 10th percentile", 0.1), ("ICE 90th percentile", 0.9)] {
        let pts = grid
            .iter()
            .enumerate()
            .map(|(p, &g)| {
                let mut col: Vec<f64> = by_row.values().filter_map(|c| c.get(p).map(|q| q.1)).collect();
                col.sort_by(f64::total_cmp);
                (g, pdfool::explain::type7_quantile(&col, prob))
            })
            .collect();
        series.push(Series {
            label: Some(label.into()),
            points: pts,
            color: "#ff7f0e",
            width: 1.5,
            dashed: true,
            opacity: 1.0,
        });
    }
    series
}
