//! Experiment configuration: behavior defaults, overlaid by a TOML file, then by flags.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use swarm_symreg::mme::{MicroConfig, MmeConfig};
use swarm_symreg::rng::derive_seed;
use swarm_symreg::surrogate::{SampleConfig, TargetTransform, TrainConfig};
use swarm_symreg::swarmsim::{Behavior, SimConfig};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub behavior: String,
    pub seed: u64,
    pub simulation: Simulation,
    pub surrogate: Surrogate,
    pub sampling: Sampling,
    pub regression: Regression,
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    pub runs: usize,
    pub agent_count: usize,
    pub duration_s: f64,
    pub record_hz: f64,
    pub integration_dt_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surrogate {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// 0 trains on every extracted sample.
    pub max_samples: usize,
    pub hidden: Vec<usize>,
    /// `identity` or `asinh`.
    pub target_transform: String,
    pub asinh_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub n: usize,
    /// `surrogate` queries the trained model, `ground_truth` the simulator's law.
    pub source: String,
    pub r_min: f64,
    pub r_max: f64,
    pub max_speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regression {
    pub population_size: usize,
    pub max_generations: usize,
    pub rho: f64,
    pub tau: u32,
    pub survivor_fraction: f64,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub max_nodes: usize,
    pub tune_children: bool,
    pub micro_population: usize,
    pub micro_generations: usize,
    pub polish_iterations: usize,
    pub max_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    pub grid_points: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Number of top-ranked expressions per result set carried into curves and metrics.
    pub top: usize,
}

/// Stream ids for per-stage seeds.
const SEED_SIM: u64 = 1;
const SEED_TRAIN: u64 = 2;
const SEED_SAMPLE: u64 = 3;
const SEED_REGRESS: u64 = 4;

impl ExperimentConfig {
    pub fn defaults(behavior: Behavior) -> ExperimentConfig {
        let sim = SimConfig::for_behavior(behavior);
        let train = TrainConfig::for_behavior(behavior);
        let sample = SampleConfig::for_behavior(behavior, 4500);
        let mme = MmeConfig::default();
        let micro = MicroConfig::default();
        let (transform, scale) = match train.target_transform {
            TargetTransform::Identity => ("identity", 1.0),
            TargetTransform::Asinh { scale } => ("asinh", scale),
        };
        ExperimentConfig {
            behavior: behavior.name().to_string(),
            seed: 0,
            simulation: Simulation {
                runs: sim.runs,
                agent_count: sim.agent_count,
                duration_s: sim.duration_s,
                record_hz: sim.record_hz,
                integration_dt_s: sim.integration_dt_s,
            },
            surrogate: Surrogate {
                epochs: train.epochs,
                batch_size: train.batch_size,
                learning_rate: train.learning_rate,
                validation_fraction: train.validation_fraction,
                max_samples: train.max_samples.unwrap_or(0),
                hidden: train.hidden,
                target_transform: transform.into(),
                asinh_scale: scale,
            },
            sampling: Sampling {
                n: if behavior == Behavior::Square { 10_000 } else { sample.n },
                source: "surrogate".into(),
                r_min: sample.r_min,
                r_max: sample.r_max,
                max_speed: if behavior == Behavior::Boids { sample.max_speed } else { 0.5 },
            },
            regression: Regression {
                population_size: mme.population_size,
                max_generations: mme.max_generations,
                rho: mme.rho,
                tau: mme.tau,
                survivor_fraction: mme.survivor_fraction,
                crossover_rate: mme.crossover_rate,
                mutation_rate: mme.mutation_rate,
                tournament_size: mme.tournament_size,
                max_nodes: mme.max_nodes,
                tune_children: mme.tune_children,
                micro_population: micro.micro_population,
                micro_generations: micro.micro_generations,
                polish_iterations: micro.polish_iterations,
                max_rows: micro.max_rows,
            },
            evaluation: Evaluation {
                grid_points: 331,
                r_min: if behavior == Behavior::Boids { 0.05 } else { 0.07 },
                r_max: if behavior == Behavior::Boids { 0.5 } else { 0.4 },
                top: 10,
            },
        }
    }

    /// Parses a TOML document over the defaults of its (or the given) behavior.
    /// Unknown keys and mistyped values are errors.
    pub fn from_toml(text: &str, behavior_flag: Option<Behavior>) -> Result<ExperimentConfig, CliError> {
        let file: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(format!("config: {e}")))?;
        let behavior = match (behavior_flag, file.get("behavior")) {
            (Some(b), _) => b,
            (None, Some(toml::Value::String(s))) => s.parse().map_err(|_| CliError::Config(format!("unknown behavior '{s}'")))?,
            (None, Some(_)) => return Err(CliError::Config("behavior must be a string".into())),
            (None, None) => Behavior::Hex,
        };
        let mut base = toml::Table::try_from(ExperimentConfig::defaults(behavior)).expect("defaults serialize");
        merge(&mut base, file, "")?;
        if let Some(b) = behavior_flag {
            base.insert("behavior".into(), toml::Value::String(b.name().into()));
        }
        let cfg: ExperimentConfig = base.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn behavior(&self) -> Behavior {
        self.behavior.parse().expect("validated")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let behavior: Behavior = self.behavior.parse().map_err(|_| CliError::Config(format!("unknown behavior '{}'", self.behavior)))?;
        self.sim_config().validate()?;
        self.train_config()?.validate()?;
        self.mme_config().validate()?;
        if !matches!(self.sampling.source.as_str(), "surrogate" | "ground_truth") {
            return Err(CliError::Config(format!("sampling.source must be surrogate or ground_truth, got '{}'", self.sampling.source)));
        }
        if behavior == Behavior::Square && self.sampling.n % 2 != 0 {
            return Err(CliError::Config("sampling.n must be even for square".into()));
        }
        let e = &self.evaluation;
        if e.grid_points < 2 || !(e.r_min > 0.0 && e.r_max > e.r_min) || e.top == 0 {
            return Err(CliError::Config("evaluation needs grid_points >= 2, 0 < r_min < r_max and top >= 1".into()));
        }
        Ok(())
    }

    /// Canonical TOML of the resolved configuration; its hash identifies artifacts.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.simulation;
        let behavior = self.behavior.parse().unwrap_or(Behavior::Hex);
        SimConfig {
            agent_count: s.agent_count,
            duration_s: s.duration_s,
            integration_dt_s: s.integration_dt_s,
            record_hz: s.record_hz,
            runs: s.runs,
            rng_seed: derive_seed(self.seed, &[SEED_SIM]),
            ..SimConfig::for_behavior(behavior)
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let s = &self.surrogate;
        let target_transform = match s.target_transform.as_str() {
            "identity" => TargetTransform::Identity,
            "asinh" => TargetTransform::Asinh { scale: s.asinh_scale },
            other => return Err(CliError::Config(format!("surrogate.target_transform must be identity or asinh, got '{other}'"))),
        };
        Ok(TrainConfig {
            hidden: s.hidden.clone(),
            epochs: s.epochs,
            batch_size: s.batch_size,
            learning_rate: s.learning_rate,
            validation_fraction: s.validation_fraction,
            max_samples: (s.max_samples > 0).then_some(s.max_samples),
            target_transform,
            rng_seed: derive_seed(self.seed, &[SEED_TRAIN]),
        })
    }

    pub fn sample_config(&self) -> SampleConfig {
        let s = &self.sampling;
        SampleConfig { n: s.n, r_min: s.r_min, r_max: s.r_max, max_speed: s.max_speed }
    }

    pub fn sample_seed(&self) -> u64 {
        derive_seed(self.seed, &[SEED_SAMPLE])
    }

    pub fn mme_config(&self) -> MmeConfig {
        let r = &self.regression;
        MmeConfig {
            population_size: r.population_size,
            max_generations: r.max_generations,
            rho: r.rho,
            tau: r.tau,
            survivor_fraction: r.survivor_fraction,
            crossover_rate: r.crossover_rate,
            mutation_rate: r.mutation_rate,
            tournament_size: r.tournament_size,
            max_nodes: r.max_nodes,
            tune_children: r.tune_children,
            micro: MicroConfig {
                micro_population: r.micro_population,
                micro_generations: r.micro_generations,
                polish_iterations: r.polish_iterations,
                max_rows: r.max_rows,
                ..MicroConfig::default()
            },
            rng_seed: derive_seed(self.seed, &[SEED_REGRESS]),
            ..MmeConfig::default()
        }
    }
}

/// Overlays `over` onto `base`, rejecting keys that `base` does not have.
fn merge(base: &mut toml::Table, over: toml::Table, path: &str) -> Result<(), CliError> {
    for (k, v) in over {
        let full = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        match (base.get_mut(&k), v) {
            (None, _) => return Err(CliError::Config(format!("unknown config key '{full}'"))),
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o, &full)?,
            (Some(toml::Value::Table(_)), _) => return Err(CliError::Config(format!("config key '{full}' must be a table"))),
            (Some(slot), v) => *slot = v,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for b in [Behavior::Hex, Behavior::Square, Behavior::Boids] {
            let d = ExperimentConfig::defaults(b);
            assert_eq!(ExperimentConfig::from_toml(&d.canonical(), None).unwrap(), d);
        }
    }

    #[test]
    fn file_overrides_defaults() {
        let cfg = ExperimentConfig::from_toml("behavior = \"square\"\nseed = 9\n[simulation]\nruns = 2\n", None).unwrap();
        assert_eq!(cfg.behavior(), Behavior::Square);
        assert_eq!(cfg.simulation.runs, 2);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sampling.n, 10_000);
        assert_ne!(cfg.sha256(), ExperimentConfig::defaults(Behavior::Square).sha256());
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["bogus = 1", "[simulation]\nrunz = 2", "[nope]\na = 1", "simulation = 3"] {
            let err = ExperimentConfig::from_toml(text, None).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{text}: {err}");
        }
        assert!(ExperimentConfig::from_toml("[simulation]\nruns = \"two\"", None).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml("[regression]\nrho = 2.0", None).is_err());
        assert!(ExperimentConfig::from_toml("[sampling]\nsource = \"oracle\"", None).is_err());
        assert!(ExperimentConfig::from_toml("[surrogate]\ntarget_transform = \"log\"", None).is_err());
    }
}
