//! Grid comparison of regressed expressions against the true law and the edge model.

use std::io::Write;
use std::path::Path;

use swarm_symreg::analysis::{boids_signatures, clipped_mse, evaluation_grid, roots};
use swarm_symreg::datasets::{compute_priors, PriorSpec};
use swarm_symreg::exprtree::expand::power_law_terms;
use swarm_symreg::exprtree::{evaluate as eval_expr, OpKind};
use swarm_symreg::fmt_num;
use swarm_symreg::mme::{sort_entries, ReportEntry};
use swarm_symreg::surrogate::EdgeModel;
use swarm_symreg::swarmsim::{Behavior, BehaviorParams};

use crate::commands::{create, header, load_model, load_results, model_path};
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Relative velocity used on the boids curve: perpendicular to the probe axis, so
/// the alignment term contributes nothing to the first component.
const BOIDS_CURVE_DV: [f64; 2] = [0.0, 0.1];

/// One-dimensional slice through a behavior's interaction law.
///
/// Shape formation: the radial force (positive = repulsive) at separation `r`.
/// Boids: the first message component for a neighbour at `(r, 0)`.
struct Curves {
    behavior: Behavior,
    class: Option<u8>,
    params: BehaviorParams,
}

impl Curves {
    fn features(&self, r: f64) -> Vec<f64> {
        match self.behavior {
            Behavior::Boids => compute_priors([r, 0.0], BOIDS_CURVE_DV, &PriorSpec::boids()).0,
            _ => vec![r],
        }
    }

    fn truth(&self, r: f64) -> f64 {
        let p = &self.params;
        match self.behavior {
            Behavior::Boids => p.cohesion - p.separation / r,
            _ => {
                let partner = if self.class == Some(2) { 2 } else { 1 };
                p.law(1, partner).eval(r)
            }
        }
    }

    fn surrogate(&self, model: &EdgeModel, r: f64) -> Result<f64, CliError> {
        match self.behavior {
            Behavior::Boids => Ok(model.predict(&self.features(r), None)?[0]),
            _ => {
                let spec = PriorSpec::shape();
                let (f, _) = compute_priors([r, 0.0], [0.0, 0.0], &spec);
                // force on the agent at the origin; the neighbour sits on +x
                Ok(-model.predict(&f, self.class)?[0])
            }
        }
    }

    fn expr(&self, e: &ReportEntry, r: f64) -> Option<f64> {
        eval_expr(&e.expr, &e.params, &self.features(r)).ok()
    }
}

struct SetEval {
    set: &'static str,
    curves: Curves,
    entries: Vec<ReportEntry>,
}

fn load(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<SetEval>, Option<EdgeModel>, Vec<f64>), CliError> {
    let behavior = cfg.behavior();
    let model = if model_path(out).exists() { Some(load_model(out)?) } else { None };
    let mut sets = Vec::new();
    for (set, class, mut entries) in load_results(cfg, out)? {
        sort_entries(&mut entries);
        entries.truncate(cfg.evaluation.top);
        sets.push(SetEval { set, curves: Curves { behavior, class, params: BehaviorParams::for_behavior(behavior) }, entries });
    }
    let e = &cfg.evaluation;
    Ok((sets, model, evaluation_grid(e.grid_points, e.r_min, e.r_max)))
}

fn opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(fmt_num).unwrap_or_default()
}

fn w_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io { context: format!("writing {}", path.display()), source: e }
}

fn comment_lines<W: Write>(w: &mut W, lines: &[String]) -> std::io::Result<()> {
    lines.iter().try_for_each(|l| writeln!(w, "# {l}"))
}

pub fn evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let (sets, model, grid) = load(cfg, out)?;
    let path = out.join("evaluation").join("evaluation.csv");
    let mut w = create(&path)?;
    let err = w_err(&path);
    let mut head = header(cfg, "evaluate");
    head.push(format!("grid={} points on [{}, {}]; clipped_mse clips both series to [-1, 1]", grid.len(), fmt_num(grid[0]), fmt_num(grid[grid.len() - 1])));
    comment_lines(&mut w, &head).map_err(&err)?;
    writeln!(w, "set,rank,expr,complexity,mse,clipped_mse_truth,clipped_mse_surrogate,roots").map_err(&err)?;
    for s in &sets {
        let truth: Vec<f64> = grid.iter().map(|&r| s.curves.truth(r)).collect();
        let surrogate = match &model {
            Some(m) => Some(grid.iter().map(|&r| s.curves.surrogate(m, r)).collect::<Result<Vec<_>, _>>()?),
            None => None,
        };
        for (rank, e) in s.entries.iter().enumerate() {
            let values: Option<Vec<f64>> = grid.iter().map(|&r| s.curves.expr(e, r).filter(|v| v.is_finite())).collect();
            let vs_truth = values.as_ref().map(|v| clipped_mse(v, &truth));
            let vs_sur = values.as_ref().zip(surrogate.as_ref()).map(|(v, s)| clipped_mse(v, s));
            let zeros = if s.curves.behavior.is_shape_formation() {
                roots(&e.expr, &e.params, grid[0], grid[grid.len() - 1], 4 * grid.len()).into_iter().map(fmt_num).collect::<Vec<_>>().join(";")
            } else {
                String::new()
            };
            writeln!(
                w,
                "{},{},\"{}\",{},{},{},{},{}",
                s.set,
                rank + 1,
                e.text,
                e.complexity,
                fmt_num(e.mse),
                opt(vs_truth),
                opt(vs_sur),
                zeros
            )
            .map_err(&err)?;
        }
    }
    w.flush().map_err(&err)
}

fn structure_summary(e: &ReportEntry, behavior: Behavior) -> String {
    if behavior == Behavior::Boids {
        let s = boids_signatures(&e.expr, &e.params, &PriorSpec::boids());
        let names: Vec<&str> = [(s.cohesion, "cohesion"), (s.separation, "separation"), (s.alignment, "alignment")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        return names.join(";");
    }
    match power_law_terms(&e.expr, &e.params, 0) {
        Some(terms) => terms.iter().map(|(c, p)| format!("{}*r^{}", fmt_num(*c), fmt_num(*p))).collect::<Vec<_>>().join(";"),
        None => String::new(),
    }
}

pub fn report(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let (sets, model, grid) = load(cfg, out)?;
    let head = header(cfg, "report");
    let dir = out.join("report");

    let path = dir.join("ranked.csv");
    let mut w = create(&path)?;
    let err = w_err(&path);
    comment_lines(&mut w, &head).map_err(&err)?;
    writeln!(w, "set,rank,expr,complexity,mse,fitness,generation").map_err(&err)?;
    for s in &sets {
        for (rank, e) in s.entries.iter().enumerate() {
            writeln!(w, "{},{},\"{}\",{},{},{},{}", s.set, rank + 1, e.text, e.complexity, fmt_num(e.mse), fmt_num(e.fitness), e.generation)
                .map_err(&err)?;
        }
    }
    w.flush().map_err(&err)?;

    let path = dir.join("force_curves.csv");
    let mut w = create(&path)?;
    let err = w_err(&path);
    comment_lines(&mut w, &head).map_err(&err)?;
    writeln!(w, "set,series,r,value").map_err(&err)?;
    for s in &sets {
        for &r in &grid {
            writeln!(w, "{},truth,{},{}", s.set, fmt_num(r), fmt_num(s.curves.truth(r))).map_err(&err)?;
        }
        if let Some(m) = &model {
            for &r in &grid {
                writeln!(w, "{},surrogate,{},{}", s.set, fmt_num(r), fmt_num(s.curves.surrogate(m, r)?)).map_err(&err)?;
            }
        }
        for (rank, e) in s.entries.iter().enumerate() {
            for &r in &grid {
                writeln!(w, "{},rank_{},{},{}", s.set, rank + 1, fmt_num(r), opt(s.curves.expr(e, r))).map_err(&err)?;
            }
        }
    }
    w.flush().map_err(&err)?;

    let ops = [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div, OpKind::Pow, OpKind::Neg];
    let path = dir.join("structure.csv");
    let mut w = create(&path)?;
    let err = w_err(&path);
    comment_lines(&mut w, &head).map_err(&err)?;
    let op_cols: Vec<&str> = ops.iter().map(|k| k.name()).collect();
    writeln!(w, "set,rank,expr,complexity,n_params,{},terms", op_cols.join(",")).map_err(&err)?;
    for s in &sets {
        for (rank, e) in s.entries.iter().enumerate() {
            let hist = e.expr.op_histogram();
            let counts: Vec<String> =
                ops.iter().map(|k| hist.iter().find(|(o, _)| o == k).map_or(0, |(_, n)| *n).to_string()).collect();
            writeln!(
                w,
                "{},{},\"{}\",{},{},{},{}",
                s.set,
                rank + 1,
                e.text,
                e.complexity,
                e.params.len(),
                counts.join(","),
                structure_summary(e, s.curves.behavior)
            )
            .map_err(&err)?;
        }
    }
    w.flush().map_err(&err)
}
