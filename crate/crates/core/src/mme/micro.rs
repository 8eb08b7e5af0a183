//! Inner evolution over an expression's parameter vector.
//!
//! A (mu + lambda) genetic algorithm in log-magnitude space. The structure
//! is fixed, so the shared fitness reduces to ordering by MSE.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::MicroConfig;
use super::dataset::RegressionDataset;
use super::individual::{program_mse, Individual};
use crate::exprtree::{EvalOutcome, Program};

fn signed_log_uniform<R: Rng + ?Sized>(rng: &mut R, cfg: &MicroConfig) -> f64 {
    let lo = cfg.init_min_magnitude.ln();
    let hi = cfg.init_max_magnitude.ln();
    let mag = rng.random_range(lo..hi).exp();
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn perturb<R: Rng + ?Sized>(rng: &mut R, value: f64, sigma: f64, flip: f64, cfg: &MicroConfig) -> f64 {
    if value == 0.0 {
        return signed_log_uniform(rng, cfg);
    }
    let n = Normal::new(0.0, sigma).expect("sigma > 0");
    let mut v = value * n.sample(rng).exp();
    if rng.random_bool(flip) {
        v = -v;
    }
    v
}

struct Candidate {
    params: Vec<f64>,
    mse: f64,
}

fn score(prog: &Program, params: Vec<f64>, data: &RegressionDataset) -> Candidate {
    let mse = program_mse(prog, &params, data).unwrap_or(f64::INFINITY);
    Candidate { params, mse }
}

fn tournament<'a, R: Rng + ?Sized>(rng: &mut R, pop: &'a [Candidate]) -> &'a Candidate {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if b.mse < a.mse {
        b
    } else {
        a
    }
}

/// Tunes the parameters of `ind` on `data`.
///
/// The result has the same structure and an MSE on `data` no worse than the
/// input's (tuning may use a row subsample, but acceptance is checked on
/// every row). Zero-parameter individuals are returned unchanged.
pub fn micro_evolve<R: Rng + ?Sized>(ind: &Individual, data: &RegressionDataset, cfg: &MicroConfig, rng: &mut R) -> Individual {
    let mut out = ind.clone();
    let incumbent_mse = out.ensure_mse(data);
    out.tuned = true;
    let n = ind.params().len();
    if n == 0 {
        return out;
    }
    let prog = Program::compile(ind.expr());
    let tuning = data.subsample(cfg.max_rows);

    let mu = cfg.micro_population;
    let mut pop = Vec::with_capacity(2 * mu);
    pop.push(score(&prog, ind.params().to_vec(), &tuning));
    let local = (mu - 1) / 2;
    for k in 1..mu {
        let params = if k <= local {
            ind.params().iter().map(|&v| perturb(rng, v, cfg.init_spread, cfg.sign_flip_prob, cfg)).collect()
        } else {
            (0..n).map(|_| signed_log_uniform(rng, cfg)).collect()
        };
        pop.push(score(&prog, params, &tuning));
    }
    pop.sort_by(|a, b| a.mse.total_cmp(&b.mse));

    let mut history = vec![pop[0].mse];
    let slot_prob = 1.0 / n as f64;
    for _ in 0..cfg.micro_generations {
        let mut offspring = Vec::with_capacity(mu);
        for _ in 0..mu {
            let p1 = tournament(rng, &pop);
            let mut child = p1.params.clone();
            if n > 1 && rng.random_bool(0.5) {
                let p2 = tournament(rng, &pop);
                for (c, &v) in child.iter_mut().zip(&p2.params) {
                    if rng.random_bool(0.5) {
                        *c = v;
                    }
                }
            }
            let forced = rng.random_range(0..n);
            for (i, c) in child.iter_mut().enumerate() {
                if i == forced || rng.random_bool(slot_prob) {
                    *c = perturb(rng, *c, cfg.mutation_sigma, cfg.sign_flip_prob, cfg);
                }
            }
            offspring.push(score(&prog, child, &tuning));
        }
        pop.extend(offspring);
        pop.sort_by(|a, b| a.mse.total_cmp(&b.mse));
        pop.truncate(mu);
        history.push(pop[0].mse);

        let g = history.len() - 1;
        if g >= cfg.stall_generations {
            let before = history[g - cfg.stall_generations];
            let now = history[g];
            let improvement = if before.is_finite() && before > 0.0 { (before - now) / before } else { f64::INFINITY };
            if now == 0.0 || improvement < cfg.convergence_tol {
                break;
            }
        }
    }

    let mut best = pop.swap_remove(0);
    if !best.mse.is_finite() {
        // nothing evaluable on the tuning rows; the input keeps its own verdict
        return out;
    }
    if cfg.polish_iterations > 0 {
        best = polish(&prog, best, &tuning, cfg.polish_iterations);
    }
    let full = program_mse(&prog, &best.params, data);
    let better = match (full, incumbent_mse) {
        (Ok(new), Ok(old)) => new <= old,
        (Ok(_), Err(_)) => true,
        _ => false,
    };
    if better {
        out.set_params(best.params.clone());
        out.set_mse(full);
    }
    out
}

fn residuals(prog: &Program, params: &[f64], data: &RegressionDataset) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(data.n_rows() * data.n_targets());
    for k in 0..data.n_targets() {
        let view = data.component_view(k);
        match prog.eval_columns(params, &view, data.n_rows()) {
            EvalOutcome::Values(v) => out.extend(v.iter().zip(data.target(k)).map(|(a, b)| a - b)),
            EvalOutcome::Invalid(_) => return None,
        }
    }
    out.iter().all(|r| r.is_finite()).then_some(out)
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Levenberg-Marquardt refinement with a forward-difference Jacobian.
fn polish(prog: &Program, start: Candidate, data: &RegressionDataset, iterations: usize) -> Candidate {
    let Some(mut r) = residuals(prog, &start.params, data) else { return start };
    let mut p = start.params.clone();
    let mut c = cost(&r);
    let n = p.len();
    let mut lambda = 1e-3;
    for _ in 0..iterations {
        let mut jac: Vec<Vec<f64>> = Vec::with_capacity(n);
        for j in 0..n {
            let h = 1e-7 * p[j].abs().max(1e-12);
            let mut q = p.clone();
            q[j] += h;
            let col = match residuals(prog, &q, data) {
                Some(rq) => rq.iter().zip(&r).map(|(a, b)| (a - b) / h).collect(),
                None => vec![0.0; r.len()],
            };
            jac.push(col);
        }
        let jtj: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|k| jac[i].iter().zip(&jac[k]).map(|(a, b)| a * b).sum()).collect()).collect();
        let jtr: Vec<f64> = jac.iter().map(|col| -col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()).collect();
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-300);
            }
            if let Some(delta) = solve(a, jtr.clone()) {
                let q: Vec<f64> = p.iter().zip(&delta).map(|(a, b)| a + b).collect();
                if let Some(rq) = residuals(prog, &q, data) {
                    let cq = cost(&rq);
                    if cq < c {
                        let rel = (c - cq) / c;
                        p = q;
                        r = rq;
                        c = cq;
                        lambda = (lambda / 3.0).max(1e-12);
                        improved = rel > 1e-12;
                        break;
                    }
                }
            }
            lambda *= 4.0;
        }
        if !improved || c == 0.0 {
            break;
        }
    }
    let mse = c / r.len() as f64;
    if mse < start.mse {
        Candidate { params: p, mse }
    } else {
        start
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprtree::{structural_equal, CostTable, ExprNode};
    use crate::exprtree::ExprNode::{Param as P, Var as X};
    use crate::rng::stream;

    fn dataset(x: Vec<f64>, y: Vec<f64>) -> RegressionDataset {
        RegressionDataset::new(vec!["x".into()], vec![x], vec!["y".into()], vec![y]).unwrap()
    }

    #[test]
    fn constant_converges_to_mean() {
        let y: Vec<f64> = (0..40).map(|i| 4.2 + if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let d = dataset(vec![0.0; 40], y);
        let ind = Individual::new(P(0), vec![1.0], &CostTable::default()).unwrap();
        let cfg = MicroConfig { micro_generations: 60, stall_generations: 10, ..Default::default() };
        let out = micro_evolve(&ind, &d, &cfg, &mut stream(5, &[]));
        assert!((out.params()[0] - 4.2).abs() < 0.05, "{}", out.params()[0]);
    }

    #[test]
    fn slope_recovery() {
        let x: Vec<f64> = (1..=30).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let d = dataset(x, y);
        let ind = Individual::new(ExprNode::mul(P(0), X(0)), vec![0.5], &CostTable::default()).unwrap();
        let cfg = MicroConfig { micro_generations: 60, stall_generations: 10, ..Default::default() };
        let out = micro_evolve(&ind, &d, &cfg, &mut stream(6, &[]));
        assert!((out.params()[0] - 3.0).abs() < 0.03, "{}", out.params()[0]);
    }

    #[test]
    fn zero_parameter_unchanged() {
        let d = dataset(vec![1.0, 2.0], vec![2.0, 3.0]);
        let ind = Individual::new(X(0), vec![], &CostTable::default()).unwrap();
        let out = micro_evolve(&ind, &d, &MicroConfig::default(), &mut stream(7, &[]));
        assert_eq!(out.expr(), &X(0));
        assert_eq!(out.mse(), Some(Ok(1.0)));
    }

    #[test]
    fn never_worse_and_same_structure() {
        let d = dataset((1..50).map(|i| i as f64 * 0.01).collect(), (1..50).map(|i| (i as f64).sqrt()).collect());
        let e = ExprNode::add(ExprNode::mul(P(0), ExprNode::pow(X(0), P(1))), P(2));
        let mut ind = Individual::new(e, vec![1.0, 0.5, 0.1], &CostTable::default()).unwrap();
        let before = ind.ensure_mse(&d).unwrap();
        let out = micro_evolve(&ind, &d, &MicroConfig::default(), &mut stream(8, &[]));
        assert!(structural_equal(out.expr(), ind.expr()));
        assert!(out.mse().unwrap().unwrap() <= before);
    }

    #[test]
    fn all_invalid_returns_input_flagged() {
        // x0 = 0 everywhere: any p / x0 is a division by zero
        let d = dataset(vec![0.0; 5], vec![1.0; 5]);
        let ind = Individual::new(ExprNode::div(P(0), X(0)), vec![1.0], &CostTable::default()).unwrap();
        let out = micro_evolve(&ind, &d, &MicroConfig::default(), &mut stream(9, &[]));
        assert_eq!(out.params(), &[1.0]);
        assert!(!out.is_valid());
    }
}
