use std::cmp::Ordering;

use super::config::MmeConfig;
use super::dataset::RegressionDataset;
use crate::exprtree::{complexity, serialize, CostTable, ExprNode, InvalidReason, Program, TreeError};

/// Mean squared error, or the reason the expression was discarded.
pub type Mse = Result<f64, InvalidReason>;

/// An expression structure with its parameter vector and cached scores.
#[derive(Clone, Debug)]
pub struct Individual {
    expr: ExprNode,
    params: Vec<f64>,
    complexity: u32,
    mse: Option<Mse>,
    fitness: Option<Mse>,
    /// Generation in which this structure first appeared.
    pub generation: usize,
    /// Whether micro evolution has run on the current structure.
    pub tuned: bool,
}

impl Individual {
    pub fn new(expr: ExprNode, params: Vec<f64>, costs: &CostTable) -> Result<Individual, TreeError> {
        expr.validate(None)?;
        if params.len() != expr.param_count() {
            return Err(TreeError::ParamCount { expected: expr.param_count(), found: params.len() });
        }
        let complexity = complexity(&expr, costs);
        Ok(Individual { expr, params, complexity, mse: None, fitness: None, generation: 0, tuned: false })
    }

    pub fn expr(&self) -> &ExprNode {
        &self.expr
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn complexity(&self) -> u32 {
        self.complexity
    }

    pub fn mse(&self) -> Option<Mse> {
        self.mse
    }

    pub fn fitness(&self) -> Option<Mse> {
        self.fitness
    }

    pub fn is_valid(&self) -> bool {
        matches!(self.mse, Some(Ok(_)))
    }

    /// Replaces the parameters and clears cached scores.
    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len(), "parameter count is fixed by the structure");
        self.params = params;
        self.mse = None;
        self.fitness = None;
    }

    pub fn set_mse(&mut self, mse: Mse) {
        self.mse = Some(mse);
        self.fitness = None;
    }

    pub fn set_fitness(&mut self, fitness: Mse) {
        self.fitness = Some(fitness);
    }

    /// Computes and caches the MSE if it is not cached yet.
    pub fn ensure_mse(&mut self, data: &RegressionDataset) -> Mse {
        if let Some(m) = self.mse {
            return m;
        }
        let m = compute_mse(&self.expr, &self.params, data);
        self.mse = Some(m);
        m
    }

    pub fn to_text(&self) -> String {
        serialize(&self.expr, &self.params).expect("params match structure")
    }

    pub fn structure_key(&self) -> String {
        self.expr.structure_key()
    }
}

/// `max(0, complexity - tau) / tau`
pub fn fc(complexity: u32, tau: u32) -> f64 {
    complexity.saturating_sub(tau) as f64 / tau as f64
}

/// Accuracy term: MSE relative to the least accurate surviving expression.
pub fn accuracy_h(mse: f64, worst_mse: f64) -> f64 {
    if worst_mse > 0.0 {
        mse / worst_mse
    } else {
        // every survivor is exact
        0.0
    }
}

/// `rho * fc + (1 - rho) * h`; lower is better.
pub fn fitness_value(complexity: u32, mse: Mse, worst_mse: f64, rho: f64, tau: u32) -> Mse {
    let mse = mse?;
    Ok(rho * fc(complexity, tau) + (1.0 - rho) * accuracy_h(mse, worst_mse))
}

/// Fitness of a scored individual. Panics if its MSE has not been computed.
pub fn fitness(ind: &Individual, worst_mse: f64, cfg: &MmeConfig) -> Mse {
    let mse = ind.mse().expect("fitness requires a computed MSE");
    fitness_value(ind.complexity(), mse, worst_mse, cfg.rho, cfg.tau)
}

/// Mean squared error over all rows and target components.
pub fn compute_mse(expr: &ExprNode, params: &[f64], data: &RegressionDataset) -> Mse {
    let prog = Program::compile(expr);
    program_mse(&prog, params, data)
}

pub(crate) fn program_mse(prog: &Program, params: &[f64], data: &RegressionDataset) -> Mse {
    let mut sse = 0.0;
    for k in 0..data.n_targets() {
        let view = data.component_view(k);
        sse += prog.sse(params, &view, data.target(k))?;
    }
    let mse = sse / (data.n_rows() * data.n_targets()) as f64;
    if mse.is_finite() {
        Ok(mse)
    } else {
        Err(InvalidReason::NonFinite)
    }
}

/// Largest valid MSE in a set; `None` when nothing is valid.
pub fn worst_mse<'a>(inds: impl IntoIterator<Item = &'a Individual>) -> Option<f64> {
    inds.into_iter().filter_map(|i| i.mse().and_then(Result::ok)).reduce(f64::max)
}

/// Recomputes the fitness cache of every individual against the set's worst MSE.
pub fn assign_fitness(inds: &mut [Individual], cfg: &MmeConfig) -> Option<f64> {
    let worst = worst_mse(inds.iter())?;
    for ind in inds.iter_mut() {
        let f = fitness(ind, worst, cfg);
        ind.set_fitness(f);
    }
    Some(worst)
}

/// Ranking order: fitness, then complexity, then serialized text. Invalid sorts last.
pub fn rank_cmp(a: &Individual, b: &Individual) -> Ordering {
    let key = |i: &Individual| match i.fitness() {
        Some(Ok(f)) => f,
        _ => f64::INFINITY,
    };
    key(a)
        .total_cmp(&key(b))
        .then(a.complexity().cmp(&b.complexity()))
        .then_with(|| a.to_text().cmp(&b.to_text()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprtree::ExprNode::{Param as P, Var as X};

    fn data(x: Vec<f64>, y: Vec<f64>) -> RegressionDataset {
        RegressionDataset::new(vec!["x".into()], vec![x], vec!["y".into()], vec![y]).unwrap()
    }

    #[test]
    fn fc_values() {
        assert_eq!(fc(10, 12), 0.0);
        assert_eq!(fc(12, 12), 0.0);
        assert_eq!(fc(24, 12), 1.0);
    }

    #[test]
    fn h_values() {
        assert_eq!(accuracy_h(0.6, 0.6), 1.0);
        assert_eq!(accuracy_h(0.0, 0.6), 0.0);
        assert_eq!(accuracy_h(0.3, 0.6), 0.5);
    }

    #[test]
    fn eq1_endpoints_and_mix() {
        assert_eq!(fitness_value(30, Ok(0.2), 0.8, 0.0, 12), Ok(0.25));
        assert_eq!(fitness_value(18, Ok(0.2), 0.8, 1.0, 12), Ok(0.5));
        // rho = 0.5, fc = 0.25 (complexity 15), h = 0.5
        assert_eq!(fitness_value(15, Ok(0.4), 0.8, 0.5, 12), Ok(0.375));
        assert_eq!(
            fitness_value(15, Err(InvalidReason::DomainError), 0.8, 0.5, 12),
            Err(InvalidReason::DomainError)
        );
    }

    #[test]
    fn mse_of_identity_and_offset() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(compute_mse(&X(0), &[], &data(x.clone(), x.clone())), Ok(0.0));
        let c = 2.5;
        assert_eq!(compute_mse(&P(0), &[c], &data(x, vec![c + 1.0; 10])), Ok(1.0));
    }

    #[test]
    fn mse_invalid_row_discards() {
        let d = data(vec![1.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(compute_mse(&ExprNode::div(P(0), X(0)), &[1.0], &d), Err(InvalidReason::DomainError));
    }

    #[test]
    fn mse_over_two_components() {
        let d = RegressionDataset::new(
            vec!["ax".into(), "ay".into()],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec!["fx".into(), "fy".into()],
            vec![vec![2.0, 4.0], vec![6.0, 9.0]],
        )
        .unwrap()
        .with_vector_pairs(vec![(0, 1)])
        .unwrap();
        // 2 * a_k matches fx exactly and fy except the last row (8 vs 9)
        let e = ExprNode::mul(P(0), X(0));
        assert_eq!(compute_mse(&e, &[2.0], &d), Ok(0.25));
    }

    #[test]
    fn set_params_clears_cache() {
        let d = data(vec![1.0], vec![1.0]);
        let mut ind = Individual::new(P(0), vec![1.0], &CostTable::default()).unwrap();
        assert_eq!(ind.ensure_mse(&d), Ok(0.0));
        ind.set_fitness(Ok(0.0));
        ind.set_params(vec![2.0]);
        assert_eq!(ind.mse(), None);
        assert_eq!(ind.fitness(), None);
    }
}
