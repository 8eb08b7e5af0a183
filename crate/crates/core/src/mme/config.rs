use crate::error::{Error, Result};
use crate::exprtree::{CostTable, OpKind};

/// Inner (parameter) evolution settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MicroConfig {
    pub micro_population: usize,
    pub micro_generations: usize,
    /// Log-scale width (natural log) of the initial samples drawn around the incumbent.
    pub init_spread: f64,
    /// Magnitude range of the signed log-uniform global samples.
    pub init_min_magnitude: f64,
    pub init_max_magnitude: f64,
    /// Standard deviation of the multiplicative log-normal mutation.
    pub mutation_sigma: f64,
    pub sign_flip_prob: f64,
    /// Stop when the relative best-MSE improvement over `stall_generations` falls below this.
    pub convergence_tol: f64,
    pub stall_generations: usize,
    /// Rows used while tuning (even stride); `0` uses every row.
    pub max_rows: usize,
    /// Damped Gauss-Newton iterations applied to the best GA candidate; `0` disables.
    pub polish_iterations: usize,
}

impl Default for MicroConfig {
    fn default() -> Self {
        MicroConfig {
            micro_population: 32,
            micro_generations: 25,
            init_spread: 1.0,
            init_min_magnitude: 1e-12,
            init_max_magnitude: 1e3,
            mutation_sigma: 0.3,
            sign_flip_prob: 0.1,
            convergence_tol: 1e-6,
            stall_generations: 5,
            max_rows: 256,
            polish_iterations: 40,
        }
    }
}

impl MicroConfig {
    pub fn validate(&self) -> Result<()> {
        if self.micro_population < 1 || self.micro_generations < 1 || self.stall_generations < 1 {
            return Err(Error::Config("micro counts must be at least 1".into()));
        }
        if !(self.init_spread > 0.0 && self.mutation_sigma > 0.0) {
            return Err(Error::Config("micro init_spread and mutation_sigma must be positive".into()));
        }
        if !(self.init_min_magnitude > 0.0 && self.init_min_magnitude < self.init_max_magnitude) {
            return Err(Error::Config("micro init magnitude range is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.sign_flip_prob) || self.convergence_tol < 0.0 {
            return Err(Error::Config("micro sign_flip_prob must be in [0,1] and convergence_tol >= 0".into()));
        }
        Ok(())
    }
}

/// Outer (structure) evolution settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MmeConfig {
    pub population_size: usize,
    pub max_generations: usize,
    /// Weight of the complexity term in the fitness.
    pub rho: f64,
    /// Target complexity below which complexity is not penalized.
    pub tau: u32,
    pub operators: Vec<OpKind>,
    pub costs: CostTable,
    pub survivor_fraction: f64,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub max_nodes: usize,
    pub init_max_depth: usize,
    /// Re-run micro evolution on survivors that were already tuned.
    pub retune_survivors: bool,
    /// Also tune every child before the first ranking pass.
    pub tune_children: bool,
    pub micro: MicroConfig,
    pub rng_seed: u64,
}

impl Default for MmeConfig {
    fn default() -> Self {
        MmeConfig {
            population_size: 4000,
            max_generations: 200,
            rho: 0.3,
            tau: 12,
            operators: OpKind::BINARY.to_vec(),
            costs: CostTable::default(),
            survivor_fraction: 0.25,
            crossover_rate: 0.7,
            mutation_rate: 0.3,
            tournament_size: 4,
            max_nodes: 40,
            init_max_depth: 4,
            retune_survivors: false,
            tune_children: false,
            micro: MicroConfig::default(),
            rng_seed: 0,
        }
    }
}

impl MmeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config("population_size must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must be in [0,1], got {}", self.rho)));
        }
        if self.tau < 1 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        if !(self.survivor_fraction > 0.0 && self.survivor_fraction < 1.0) {
            return Err(Error::Config("survivor_fraction must be in (0,1)".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::Config("crossover and mutation rates must be in [0,1]".into()));
        }
        if self.operators.is_empty() || !self.operators.iter().any(|k| k.arity() == 2) {
            return Err(Error::Config("operator set needs at least one binary operator".into()));
        }
        if !self.costs.is_valid() {
            return Err(Error::Config("pow_with_operator_exponent must be >= cost(pow)".into()));
        }
        if self.tournament_size < 1 || self.max_nodes < 3 || self.init_max_depth < 1 {
            return Err(Error::Config("tournament_size, max_nodes or init_max_depth too small".into()));
        }
        self.micro.validate()
    }

    /// Number of individuals that survive each generation.
    pub fn survivor_count(&self) -> usize {
        ((self.population_size as f64 * self.survivor_fraction).ceil() as usize).clamp(1, self.population_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = MmeConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.population_size, 4000);
        assert_eq!(cfg.tau, 12);
        assert_eq!(cfg.max_generations, 200);
        assert_eq!(cfg.survivor_count(), 1000);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = MmeConfig { population_size: 1, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.population_size = 10;
        cfg.rho = 1.5;
        assert!(cfg.validate().is_err());
        cfg.rho = 0.5;
        cfg.tau = 0;
        assert!(cfg.validate().is_err());
        cfg.tau = 3;
        cfg.micro.micro_population = 0;
        assert!(cfg.validate().is_err());
    }
}
