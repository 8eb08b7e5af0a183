//! Pipeline stages and the artifact layout under the output directory.
//!
//! ```text
//! simulation/run_0000_agents.csv   simulation/run_0000_pairs.csv (shape formation)
//! surrogate/model.txt              surrogate/loss_trace.csv
//! dataset/dataset.csv
//! regression/results.csv           (square: results_attr1.csv, results_attr2.csv)
//! evaluation/evaluation.csv
//! report/ranked.csv  report/force_curves.csv  report/structure.csv
//! meta/<stage>.toml
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use swarm_symreg::datasets::{extract_nodes, extract_pairs, read_dataset, write_dataset, PriorSpec};
use swarm_symreg::mme::{read_results, run_mme, write_results, RegressionDataset, ReportEntry};
use swarm_symreg::rng::{derive_seed, stream};
use swarm_symreg::surrogate::{
    sample_ground_truth, sample_surrogate, train_edge_model, train_node_model, write_loss_trace, EdgeModel,
};
use swarm_symreg::swarmsim::{simulate as run_simulation, Behavior, BehaviorParams, TrajectoryLog};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub fn header(cfg: &ExperimentConfig, stage: &str) -> Vec<String> {
    vec![
        format!("swarm-symreg {stage}"),
        format!("behavior={} seed={} config_sha256={}", cfg.behavior, cfg.seed, cfg.sha256()),
    ]
}

pub fn agents_path(out: &Path, run: usize) -> PathBuf {
    out.join("simulation").join(format!("run_{run:04}_agents.csv"))
}

pub fn pairs_path(out: &Path, run: usize) -> PathBuf {
    out.join("simulation").join(format!("run_{run:04}_pairs.csv"))
}

pub fn model_path(out: &Path) -> PathBuf {
    out.join("surrogate").join("model.txt")
}

pub fn dataset_path(out: &Path) -> PathBuf {
    out.join("dataset").join("dataset.csv")
}

/// Result sets of the regression stage: one for hex and boids, one per edge class for square.
pub fn result_sets(behavior: Behavior) -> Vec<(&'static str, Option<u8>)> {
    match behavior {
        Behavior::Square => vec![("attr1", Some(1)), ("attr2", Some(2))],
        _ => vec![("all", None)],
    }
}

pub fn results_path(out: &Path, set: &str) -> PathBuf {
    let name = if set == "all" { "results.csv".to_string() } else { format!("results_{set}.csv") };
    out.join("regression").join(name)
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    }
    let f = File::create(path).map_err(CliError::io(format!("creating {}", path.display())))?;
    Ok(BufWriter::new(f))
}

pub fn read_input(path: &Path, hint: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Missing { path: path.to_path_buf(), hint: hint.into() },
        _ => CliError::Io { context: format!("reading {}", path.display()), source: e },
    })
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(CliError::io(format!("writing {}", path.display())))
}

/// Run record: seed, config hash, the flags behind non-default behavior, and the resolved config.
fn write_meta(cfg: &ExperimentConfig, out: &Path, stage: &str) -> Result<(), CliError> {
    let path = out.join("meta").join(format!("{stage}.toml"));
    let mut flags = toml::Table::new();
    flags.insert("target_transform".into(), cfg.surrogate.target_transform.clone().into());
    flags.insert("tune_children".into(), cfg.regression.tune_children.into());
    flags.insert("polish_iterations".into(), (cfg.regression.polish_iterations as i64).into());
    flags.insert("sampling_source".into(), cfg.sampling.source.clone().into());
    let mut meta = toml::Table::new();
    meta.insert("stage".into(), stage.into());
    meta.insert("seed".into(), toml::Value::Integer(cfg.seed as i64));
    meta.insert("config_sha256".into(), cfg.sha256().into());
    meta.insert("flags".into(), flags.into());
    meta.insert("config".into(), toml::Table::try_from(cfg).expect("config serializes").into());
    let mut w = create(&path)?;
    w.write_all(toml::to_string(&meta).expect("table serializes").as_bytes())
        .map_err(CliError::io(format!("writing {}", path.display())))?;
    finish(w, &path)
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let sim = cfg.sim_config();
    let logs = run_simulation(&sim)?;
    let head = header(cfg, "simulate");
    for log in &logs {
        let path = agents_path(out, log.run);
        let mut w = create(&path)?;
        log.write_agents(&mut w, &head)?;
        finish(w, &path)?;
        if log.behavior.is_shape_formation() {
            let path = pairs_path(out, log.run);
            let mut w = create(&path)?;
            log.write_pairs(&mut w, &head)?;
            finish(w, &path)?;
        }
    }
    let degenerate: usize = logs.iter().map(|l| l.degenerate).sum();
    eprintln!("simulated {} runs of {} ({} degenerate pair events)", logs.len(), cfg.behavior, degenerate);
    write_meta(cfg, out, "simulate")
}

fn load_logs(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<TrajectoryLog>, Vec<String>), CliError> {
    let behavior = cfg.behavior();
    let hint = "run `swarm-symreg simulate` with the same --out-dir first";
    let mut logs = Vec::new();
    let mut names = Vec::new();
    for run in 0..cfg.simulation.runs {
        let a = agents_path(out, run);
        let at = read_input(&a, hint)?;
        let an = a.display().to_string();
        let log = if behavior.is_shape_formation() {
            let p = pairs_path(out, run);
            let pt = read_input(&p, hint)?;
            let pn = p.display().to_string();
            TrajectoryLog::read(behavior, run, at.as_bytes(), &an, Some((pt.as_bytes(), pn.as_str())))?
        } else {
            TrajectoryLog::read::<_, &[u8]>(behavior, run, at.as_bytes(), &an, None)?
        };
        names.push(format!("run_{run:04}"));
        logs.push(log);
    }
    Ok((logs, names))
}

pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let behavior = cfg.behavior();
    let (logs, sources) = load_logs(cfg, out)?;
    let range = BehaviorParams::for_behavior(behavior).sensing_range;
    let tc = cfg.train_config()?;
    let report = if behavior.is_shape_formation() {
        let spec = PriorSpec::shape();
        let mut samples = Vec::new();
        let mut skipped = 0;
        for log in &logs {
            let ex = extract_pairs(log, range, &spec)?;
            skipped += ex.skipped;
            samples.extend(ex.samples);
        }
        eprintln!("training on {} pair samples ({} skipped)", samples.len().min(tc.max_samples.unwrap_or(usize::MAX)), skipped);
        train_edge_model(behavior, &samples, &spec.names(), sources, &tc)?
    } else {
        let spec = PriorSpec::boids();
        let mut samples = Vec::new();
        for log in &logs {
            samples.extend(extract_nodes(log, range, &spec).samples);
        }
        eprintln!("training on {} agent samples", samples.len().min(tc.max_samples.unwrap_or(usize::MAX)));
        train_node_model(behavior, &samples, &spec.names(), sources, &tc)?
    };
    let head = header(cfg, "train-surrogate");
    let path = model_path(out);
    let mut w = create(&path)?;
    report.model.write(&mut w, &head)?;
    finish(w, &path)?;
    let path = out.join("surrogate").join("loss_trace.csv");
    let mut w = create(&path)?;
    write_loss_trace(&mut w, &report.trace, &head)?;
    finish(w, &path)?;
    eprintln!("best validation epoch {}", report.best_epoch);
    write_meta(cfg, out, "train-surrogate")
}

pub fn load_model(out: &Path) -> Result<EdgeModel, CliError> {
    let path = model_path(out);
    let text = read_input(&path, "run `swarm-symreg train-surrogate` first, or sample with --source ground_truth")?;
    Ok(EdgeModel::read(&text, &path.display().to_string())?)
}

pub fn sample(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let behavior = cfg.behavior();
    let sc = cfg.sample_config();
    let mut rng = stream(cfg.sample_seed(), &[]);
    let data = if cfg.sampling.source == "surrogate" {
        let model = load_model(out)?;
        if model.behavior != behavior {
            return Err(CliError::Config(format!("model was trained for {}, config says {}", model.behavior, behavior)));
        }
        sample_surrogate(&model, &sc, &mut rng)?
    } else {
        sample_ground_truth(&BehaviorParams::for_behavior(behavior), &sc, &mut rng)?
    };
    let mut comments = header(cfg, "sample-surrogate");
    comments.push(format!("source={}", cfg.sampling.source));
    let path = dataset_path(out);
    let mut w = create(&path)?;
    write_dataset(&mut w, &data, behavior.name(), &comments)?;
    finish(w, &path)?;
    write_meta(cfg, out, "sample-surrogate")
}

pub fn load_dataset(cfg: &ExperimentConfig, out: &Path) -> Result<RegressionDataset, CliError> {
    let path = dataset_path(out);
    let text = read_input(&path, "run `swarm-symreg sample-surrogate` with the same --out-dir first")?;
    let (data, meta) = read_dataset(text.as_bytes(), &path.display().to_string())?;
    if meta.behavior != cfg.behavior {
        return Err(CliError::Config(format!("dataset is for {}, config says {}", meta.behavior, cfg.behavior)));
    }
    Ok(data)
}

/// The rows of one result set, with the class column removed for square.
pub fn set_data(data: &RegressionDataset, class: Option<u8>) -> Result<RegressionDataset, CliError> {
    match class {
        Some(c) => Ok(data.filter_by_column(1, f64::from(c))?),
        None => Ok(data.clone()),
    }
}

pub fn regress(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let data = load_dataset(cfg, out)?;
    let base = cfg.mme_config();
    for (set, class) in result_sets(cfg.behavior()) {
        let d = set_data(&data, class)?;
        let mc = swarm_symreg::mme::MmeConfig { rng_seed: derive_seed(base.rng_seed, &[u64::from(class.unwrap_or(0))]), ..base.clone() };
        let report = run_mme(&d, &mc)?;
        let mut head = header(cfg, "regress");
        head.push(format!("set={set} rows={} features={}", d.n_rows(), d.feature_names().join(";")));
        if let Some(b) = report.best() {
            head.push(format!("best={}", b.text));
            eprintln!("{set}: best {} (complexity {}, mse {:e})", b.text, b.complexity, b.mse);
        }
        let path = results_path(out, set);
        let mut w = create(&path)?;
        write_results(&mut w, report.entries(), &head)?;
        finish(w, &path)?;
    }
    write_meta(cfg, out, "regress")
}

pub fn load_results(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<(&'static str, Option<u8>, Vec<ReportEntry>)>, CliError> {
    let mut sets = Vec::new();
    for (set, class) in result_sets(cfg.behavior()) {
        let path = results_path(out, set);
        let text = read_input(&path, "run `swarm-symreg regress` with the same --out-dir first")?;
        sets.push((set, class, read_results(text.as_bytes(), &path.display().to_string())?));
    }
    Ok(sets)
}
