//! Mini-batch Adam training of the edge model.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;

use super::mlp::{adam_step, AdamState, Mlp};
use super::model::{Aggregation, EdgeModel, TargetTransform};
use crate::datasets::{EdgeSample, NodeSample, NormalizationRecord};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::swarmsim::Behavior;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Uniform random subset of the samples used for training; `None` keeps all.
    pub max_samples: Option<usize>,
    pub target_transform: TargetTransform,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![300, 300],
            epochs: 200,
            batch_size: 256,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
            max_samples: None,
            target_transform: TargetTransform::Identity,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    /// Shape formation fits pair forces through an asinh transform on a 100k-pair
    /// subset; boids fit node accelerations directly on a 3000-agent subset.
    pub fn for_behavior(behavior: Behavior) -> TrainConfig {
        match behavior {
            Behavior::Boids => TrainConfig { max_samples: Some(3000), ..TrainConfig::default() },
            _ => TrainConfig {
                max_samples: Some(100_000),
                target_transform: TargetTransform::Asinh { scale: 1.0 },
                ..TrainConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("epochs, batch_size and hidden widths must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.max_samples == Some(0) {
            return Err(Error::Config("max_samples must be positive".into()));
        }
        if !(0.0..0.9).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must be in [0, 0.9)".into()));
        }
        self.target_transform.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub train_loss: f64,
    /// Loss on the held-out split (the train loss when nothing is held out).
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// The best-validation checkpoint.
    pub model: EdgeModel,
    pub trace: Vec<EpochLoss>,
    pub best_epoch: usize,
}

const STREAM_INIT: u64 = 10;
const STREAM_SPLIT: u64 = 11;
const STREAM_SHUFFLE: u64 = 12;
const STREAM_SUBSET: u64 = 13;

/// Indices of the samples kept for training, in ascending order.
fn subset(n: usize, max: Option<usize>, seed: u64) -> Vec<usize> {
    match max {
        Some(m) if m < n => {
            let mut idx = rand::seq::index::sample(&mut stream(seed, &[STREAM_SUBSET]), n, m).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    }
}

fn split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, &[STREAM_SPLIT]));
    let n_val = if fraction > 0.0 && n >= 10 { ((n as f64) * fraction).round().max(1.0) as usize } else { 0 };
    let train = idx.split_off(n_val);
    (train, idx)
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

fn diverged(epoch: usize, batch: usize, loss: f64) -> Error {
    Error::Numerical(format!("training diverged: loss {loss} at epoch {epoch}, batch {batch}; try a lower learning rate"))
}

/// Generic loop. `batch_loss` returns a batch's loss and applies nothing; `eval` scores an index set.
fn run_epochs(
    cfg: &TrainConfig,
    net: &mut Mlp,
    train: &[usize],
    val: &[usize],
    mut batch_grad: impl FnMut(&Mlp, &[usize]) -> (f64, super::mlp::Gradients),
    eval: impl Fn(&Mlp, &[usize]) -> f64,
) -> Result<(Mlp, Vec<EpochLoss>, usize)> {
    let mut adam = AdamState::new(net, cfg.learning_rate);
    let mut order = train.to_vec();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0usize, net.clone());
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut stream(cfg.rng_seed, &[STREAM_SHUFFLE, epoch as u64]));
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grads) = batch_grad(net, chunk);
            if !loss.is_finite() {
                return Err(diverged(epoch, b, loss));
            }
            adam_step(net, &grads, &mut adam);
            total += loss;
            batches += 1;
        }
        if !net.is_finite() {
            return Err(diverged(epoch, batches, f64::NAN));
        }
        let train_loss = total / batches.max(1) as f64;
        let val_loss = if val.is_empty() { eval(net, train) } else { eval(net, val) };
        if !val_loss.is_finite() {
            return Err(diverged(epoch, batches, val_loss));
        }
        trace.push(EpochLoss { epoch, train_loss, val_loss });
        if val_loss < best.0 {
            best = (val_loss, epoch, net.clone());
        }
    }
    Ok((best.2, trace, best.1))
}

fn edge_input(s: &EdgeSample, use_attr: bool) -> impl Iterator<Item = f64> + '_ {
    s.features.iter().copied().chain(use_attr.then(|| f64::from(s.edge_attr.unwrap_or(0))))
}

/// Trains the per-pair edge model on directly observed pair forces.
pub fn train_edge_model(behavior: Behavior, samples: &[EdgeSample], names: &[String], sources: Vec<String>, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let kept: Vec<EdgeSample>;
    let samples = if cfg.max_samples.is_some_and(|m| m < samples.len()) {
        kept = subset(samples.len(), cfg.max_samples, cfg.rng_seed).into_iter().map(|i| samples[i].clone()).collect();
        &kept[..]
    } else {
        samples
    };
    let first = samples.first().ok_or_else(|| Error::Config("no training samples".into()))?;
    let width = first.features.len();
    let use_attr = first.edge_attr.is_some();
    if samples.iter().any(|s| s.features.len() != width || s.edge_attr.is_some() != use_attr) {
        return Err(Error::Config("training samples differ in feature layout".into()));
    }
    let in_width = width + usize::from(use_attr);
    let mut raw = Array2::<f64>::zeros((samples.len(), in_width));
    let mut y = Array2::<f64>::zeros((samples.len(), 2));
    for (i, s) in samples.iter().enumerate() {
        for (c, v) in edge_input(s, use_attr).enumerate() {
            raw[[i, c]] = v;
        }
        y[[i, 0]] = cfg.target_transform.forward(s.target[0]);
        y[[i, 1]] = cfg.target_transform.forward(s.target[1]);
    }
    let mut col_names = names.to_vec();
    if use_attr {
        col_names.push("edge_attr".into());
    }
    if col_names.len() != in_width {
        return Err(Error::Config(format!("{} feature names for {in_width} input columns", col_names.len())));
    }
    let cols: Vec<Vec<f64>> = (0..in_width).map(|c| raw.column(c).to_vec()).collect();
    let col_refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let norm = NormalizationRecord::fit(behavior.name(), sources, &col_names, &col_refs)?;
    let mut x = raw;
    for mut row in x.rows_mut() {
        norm.normalize_row(row.as_slice_mut().expect("standard layout"));
    }

    let mut net = Mlp::new_random(&sizes(in_width, &cfg.hidden, 2), &mut stream(cfg.rng_seed, &[STREAM_INIT]))?;
    let (train, val) = split(samples.len(), cfg.validation_fraction, cfg.rng_seed);
    let gather = |idx: &[usize], m: &Array2<f64>| m.select(ndarray::Axis(0), idx);
    let batch_grad = |net: &Mlp, idx: &[usize]| {
        let (bx, by) = (gather(idx, &x), gather(idx, &y));
        net.loss_and_grad(bx.view(), by.view())
    };
    let eval = |net: &Mlp, idx: &[usize]| {
        let mut sse = 0.0;
        for chunk in idx.chunks(4096) {
            let out = net.forward_batch(gather(chunk, &x).view());
            sse += (&out - &gather(chunk, &y)).iter().map(|d| d * d).sum::<f64>();
        }
        sse / (2 * idx.len()) as f64
    };
    let (best, trace, best_epoch) = run_epochs(cfg, &mut net, &train, &val, batch_grad, eval)?;
    let model = EdgeModel {
        behavior,
        net: best,
        norm,
        transform: cfg.target_transform,
        uses_edge_attr: use_attr,
        aggregation: Aggregation::Sum,
    };
    Ok(TrainReport { model, trace, best_epoch })
}

/// Node-level losses for a batch: forward every edge, average per node, compare to the node targets.
fn node_loss_and_grad(net: &Mlp, x: ArrayView2<f64>, owners: &[usize], counts: &[usize], y: ArrayView2<f64>) -> (f64, super::mlp::Gradients) {
    let cache = net.forward_cached(x);
    let out = cache.output();
    let n_nodes = counts.len();
    let mut agg = Array2::<f64>::zeros((n_nodes, 2));
    for (e, &o) in owners.iter().enumerate() {
        agg[[o, 0]] += out[[e, 0]] / counts[o] as f64;
        agg[[o, 1]] += out[[e, 1]] / counts[o] as f64;
    }
    let diff = &agg - &y;
    let denom = (2 * n_nodes) as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / denom;
    let mut d_out = Array2::<f64>::zeros(out.raw_dim());
    for (e, &o) in owners.iter().enumerate() {
        for k in 0..2 {
            d_out[[e, k]] = 2.0 * diff[[o, k]] / denom / counts[o] as f64;
        }
    }
    (loss, net.backward_from(&cache, d_out))
}

/// Trains the edge model end to end through mean aggregation on per-agent accelerations.
pub fn train_node_model(behavior: Behavior, samples: &[NodeSample], names: &[String], sources: Vec<String>, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.target_transform != TargetTransform::Identity {
        return Err(Error::Config("node-level training needs the identity target transform".into()));
    }
    let kept: Vec<NodeSample>;
    let samples = if cfg.max_samples.is_some_and(|m| m < samples.len()) {
        kept = subset(samples.len(), cfg.max_samples, cfg.rng_seed).into_iter().map(|i| samples[i].clone()).collect();
        &kept[..]
    } else {
        samples
    };
    let width = samples
        .iter()
        .find_map(|s| s.edges.first().map(Vec::len))
        .ok_or_else(|| Error::Config("no training samples".into()))?;
    if names.len() != width || samples.iter().any(|s| s.edges.is_empty() || s.edges.iter().any(|e| e.len() != width)) {
        return Err(Error::Config("node samples differ in feature layout or have no edges".into()));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); width];
    for s in samples {
        for e in &s.edges {
            for (c, &v) in e.iter().enumerate() {
                cols[c].push(v);
            }
        }
    }
    let col_refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let norm = NormalizationRecord::fit(behavior.name(), sources, names, &col_refs)?;
    drop(cols);

    let assemble = |idx: &[usize]| {
        let n_edges: usize = idx.iter().map(|&i| samples[i].edges.len()).sum();
        let mut x = Array2::<f64>::zeros((n_edges, width));
        let mut owners = Vec::with_capacity(n_edges);
        let mut counts = Vec::with_capacity(idx.len());
        let mut y = Array2::<f64>::zeros((idx.len(), 2));
        let mut row = 0;
        for (o, &i) in idx.iter().enumerate() {
            let s = &samples[i];
            for e in &s.edges {
                for (c, &v) in e.iter().enumerate() {
                    x[[row, c]] = norm.normalize_value(c, v);
                }
                owners.push(o);
                row += 1;
            }
            counts.push(s.edges.len());
            y[[o, 0]] = s.target[0];
            y[[o, 1]] = s.target[1];
        }
        (x, owners, counts, y)
    };
    let mut net = Mlp::new_random(&sizes(width, &cfg.hidden, 2), &mut stream(cfg.rng_seed, &[STREAM_INIT]))?;
    let (train, val) = split(samples.len(), cfg.validation_fraction, cfg.rng_seed);
    let batch_grad = |net: &Mlp, idx: &[usize]| {
        let (x, owners, counts, y) = assemble(idx);
        node_loss_and_grad(net, x.view(), &owners, &counts, y.view())
    };
    let eval = |net: &Mlp, idx: &[usize]| {
        let mut sse = 0.0;
        for chunk in idx.chunks(512) {
            let (x, owners, counts, y) = assemble(chunk);
            let (l, _) = node_loss_and_grad(net, x.view(), &owners, &counts, y.view());
            sse += l * (2 * chunk.len()) as f64;
        }
        sse / (2 * idx.len()) as f64
    };
    let (best, trace, best_epoch) = run_epochs(cfg, &mut net, &train, &val, batch_grad, eval)?;
    let model = EdgeModel {
        behavior,
        net: best,
        norm,
        transform: TargetTransform::Identity,
        uses_edge_attr: false,
        aggregation: Aggregation::Mean,
    };
    Ok(TrainReport { model, trace, best_epoch })
}
