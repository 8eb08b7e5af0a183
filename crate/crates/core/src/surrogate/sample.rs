//! Probe-pair queries that turn an edge model into a regression dataset.

use std::f64::consts::TAU;

use rand::Rng;

use super::model::EdgeModel;
use crate::datasets::{compute_priors, PriorSpec};
use crate::error::{Error, Result};
use crate::mme::RegressionDataset;
use crate::swarmsim::{Behavior, BehaviorParams, Vec2};

#[derive(Clone, Debug, PartialEq)]
pub struct SampleConfig {
    pub n: usize,
    /// Probe separations are uniform on `[r_min, r_max]`.
    pub r_min: f64,
    pub r_max: f64,
    /// Upper bound of the probe speeds used for relative velocities (boids).
    pub max_speed: f64,
}

impl SampleConfig {
    pub fn for_behavior(behavior: Behavior, n: usize) -> SampleConfig {
        match behavior {
            Behavior::Boids => SampleConfig { n, r_min: 0.05, r_max: 0.5, max_speed: 0.5 },
            _ => SampleConfig { n, r_min: 0.07, r_max: 0.4, max_speed: 0.0 },
        }
    }

    fn validate(&self, behavior: Behavior) -> Result<()> {
        if self.n == 0 || (behavior == Behavior::Square && self.n % 2 != 0) {
            return Err(Error::Config(format!("sample count {} must be positive (and even for square)", self.n)));
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min) {
            return Err(Error::Config("probe range needs 0 < r_min < r_max".into()));
        }
        if behavior == Behavior::Boids && !(self.max_speed > 0.0) {
            return Err(Error::Config("boids probes need a positive max_speed".into()));
        }
        Ok(())
    }
}

struct Probe {
    dx: Vec2,
    dv: Vec2,
    edge_attr: Option<u8>,
}

fn unit<R: Rng + ?Sized>(rng: &mut R) -> Vec2 {
    let a = rng.random_range(0.0..TAU);
    [a.cos(), a.sin()]
}

fn probes<R: Rng + ?Sized>(behavior: Behavior, cfg: &SampleConfig, rng: &mut R) -> Vec<Probe> {
    (0..cfg.n)
        .map(|k| {
            let r = rng.random_range(cfg.r_min..=cfg.r_max);
            let b = unit(rng);
            let dx = [r * b[0], r * b[1]];
            let (dv, edge_attr) = match behavior {
                Behavior::Hex => ([0.0, 0.0], None),
                Behavior::Square => ([0.0, 0.0], Some(if k < cfg.n / 2 { 1 } else { 2 })),
                Behavior::Boids => {
                    let (si, sj) = (rng.random_range(0.0..=cfg.max_speed), rng.random_range(0.0..=cfg.max_speed));
                    let (ui, uj) = (unit(rng), unit(rng));
                    ([sj * uj[0] - si * ui[0], sj * uj[1] - si * ui[1]], None)
                }
            };
            Probe { dx, dv, edge_attr }
        })
        .collect()
}

/// Builds the dataset from probes and the force on the probe agent for each.
fn assemble(behavior: Behavior, probes: &[Probe], forces: &[Vec2]) -> Result<RegressionDataset> {
    match behavior {
        Behavior::Hex | Behavior::Square => {
            let mut r = Vec::with_capacity(probes.len());
            let mut f = Vec::with_capacity(probes.len());
            for (p, force) in probes.iter().zip(forces) {
                let d = p.dx[0].hypot(p.dx[1]);
                r.push(d);
                // component along the axis pointing away from the neighbour
                f.push(-(force[0] * p.dx[0] + force[1] * p.dx[1]) / d);
            }
            let mut names = vec!["r".to_string()];
            let mut cols = vec![r];
            if behavior == Behavior::Square {
                names.push("edge_attr".into());
                cols.push(probes.iter().map(|p| f64::from(p.edge_attr.unwrap_or(0))).collect());
            }
            RegressionDataset::new(names, cols, vec!["force".into()], vec![f])
        }
        Behavior::Boids => {
            let spec = PriorSpec::boids();
            let mut cols = vec![Vec::with_capacity(probes.len()); spec.len()];
            let mut skipped = 0;
            let (mut fx, mut fy) = (Vec::new(), Vec::new());
            for (p, force) in probes.iter().zip(forces) {
                let (row, flagged) = compute_priors(p.dx, p.dv, &spec);
                if flagged {
                    skipped += 1;
                    continue;
                }
                for (c, v) in row.into_iter().enumerate() {
                    cols[c].push(v);
                }
                fx.push(force[0]);
                fy.push(force[1]);
            }
            if skipped == probes.len() {
                return Err(Error::Numerical("every probe was degenerate".into()));
            }
            RegressionDataset::new(spec.names(), cols, vec!["mx".into(), "my".into()], vec![fx, fy])?
                .with_vector_pairs(spec.vector_pairs())
        }
    }
}

/// Queries the edge model on random probe pairs.
///
/// Shape formation gives the feature `r` (plus `edge_attr` for square, one half
/// per class) and the radial force, positive when repulsive. Boids gives the
/// twelve prior channels and the two message components.
pub fn sample_surrogate<R: Rng + ?Sized>(model: &EdgeModel, cfg: &SampleConfig, rng: &mut R) -> Result<RegressionDataset> {
    let behavior = model.behavior;
    cfg.validate(behavior)?;
    let spec = match behavior {
        Behavior::Boids => PriorSpec::boids(),
        _ => PriorSpec::shape(),
    };
    let probes = probes(behavior, cfg, rng);
    let mut forces = Vec::with_capacity(probes.len());
    for class in [None, Some(1), Some(2)] {
        let members: Vec<usize> = (0..probes.len()).filter(|&k| probes[k].edge_attr == class).collect();
        if members.is_empty() {
            continue;
        }
        let rows: Vec<Vec<f64>> = members.iter().map(|&k| compute_priors(probes[k].dx, probes[k].dv, &spec).0).collect();
        let out = model.predict_batch(&rows, class)?;
        forces.extend(members.into_iter().zip(out));
    }
    forces.sort_by_key(|(k, _)| *k);
    let forces: Vec<Vec2> = forces.into_iter().map(|(_, f)| f).collect();
    if forces.iter().any(|f| !f[0].is_finite() || !f[1].is_finite()) {
        return Err(Error::Numerical("surrogate produced a non-finite force".into()));
    }
    assemble(behavior, &probes, &forces)
}

/// Same probes, labelled with the simulator's own interaction law.
pub fn sample_ground_truth<R: Rng + ?Sized>(params: &BehaviorParams, cfg: &SampleConfig, rng: &mut R) -> Result<RegressionDataset> {
    let behavior = params.behavior;
    cfg.validate(behavior)?;
    let probes = probes(behavior, cfg, rng);
    let forces: Vec<Vec2> = probes
        .iter()
        .map(|p| {
            let r = p.dx[0].hypot(p.dx[1]);
            match behavior {
                Behavior::Boids => {
                    let (c, s, a) = (params.cohesion, params.separation, params.alignment);
                    [0, 1].map(|k| c * p.dx[k] / r - s * p.dx[k] / (r * r) + a * p.dv[k])
                }
                _ => {
                    let kin = match p.edge_attr {
                        Some(2) => (1, 2),
                        _ => (1, 1),
                    };
                    let f = params.law(kin.0, kin.1).eval(r);
                    [-f * p.dx[0] / r, -f * p.dx[1] / r]
                }
            }
        })
        .collect();
    assemble(behavior, &probes, &forces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::swarmsim::ForceLaw;

    #[test]
    fn hex_ground_truth_is_the_law() {
        let params = BehaviorParams::for_behavior(Behavior::Hex);
        let d = sample_ground_truth(&params, &SampleConfig::for_behavior(Behavior::Hex, 4500), &mut stream(1, &[])).unwrap();
        assert_eq!(d.n_rows(), 4500);
        assert_eq!(d.feature_names(), &["r".to_string()]);
        for (&r, &f) in d.feature(0).iter().zip(d.target(0)) {
            assert!((0.07..=0.4).contains(&r));
            let want = ForceLaw::HEX.eval(r);
            assert!((f - want).abs() <= 1e-9 * want.abs().max(1.0), "{r} {f} {want}");
        }
    }

    #[test]
    fn square_classes_are_balanced() {
        let params = BehaviorParams::for_behavior(Behavior::Square);
        let d = sample_ground_truth(&params, &SampleConfig::for_behavior(Behavior::Square, 10000), &mut stream(2, &[])).unwrap();
        let kin = d.feature(1).iter().filter(|&&a| a == 1.0).count();
        let non = d.feature(1).iter().filter(|&&a| a == 2.0).count();
        assert_eq!((kin, non), (5000, 5000));
    }

    #[test]
    fn boids_messages_average_to_the_acceleration() {
        let params = BehaviorParams::for_behavior(Behavior::Boids);
        let d = sample_ground_truth(&params, &SampleConfig::for_behavior(Behavior::Boids, 50), &mut stream(3, &[])).unwrap();
        assert_eq!(d.n_features(), 12);
        assert_eq!(d.vector_pairs(), &[(0, 1), (2, 3), (8, 9), (10, 11)]);
        let row = d.row(0);
        let r = row[4];
        let want = 2.0 * row[0] / r - 75.0 * row[0] / (r * r) + 3.0 * row[2];
        assert!((d.target(0)[0] - want).abs() < 1e-9);
    }

    #[test]
    fn odd_square_count_rejected() {
        let params = BehaviorParams::for_behavior(Behavior::Square);
        assert!(sample_ground_truth(&params, &SampleConfig::for_behavior(Behavior::Square, 7), &mut stream(0, &[])).is_err());
    }
}
