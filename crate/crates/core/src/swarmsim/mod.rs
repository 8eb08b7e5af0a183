//! Deterministic 2D swarm simulator on the unit torus.
//!
//! Agents are unit-mass holonomic points driven by a double integrator.
//! Shape formation uses the two-term pair force `a/r^12 - b/r^6` (positive
//! pushes the pair apart); boids use the averaged cohesion, separation and
//! alignment law.

mod forces;
mod log;
mod sim;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use forces::{boids_accel, interactions, lj_force, pair_force_vector, torus_displacement, Interactions, PairForce};
pub use log::{AgentRecord, Frame, PairRecord, TrajectoryLog, AGENT_HEADER, PAIR_HEADER};
pub use sim::{initial_world, nearest_neighbor_distances, polarization, simulate, simulate_run, step, WorldState};

pub type Vec2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Behavior {
    Hex,
    Square,
    Boids,
}

impl Behavior {
    pub fn name(self) -> &'static str {
        match self {
            Behavior::Hex => "hex",
            Behavior::Square => "square",
            Behavior::Boids => "boids",
        }
    }

    pub fn is_shape_formation(self) -> bool {
        self != Behavior::Boids
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hex" => Ok(Behavior::Hex),
            "square" => Ok(Behavior::Square),
            "boids" => Ok(Behavior::Boids),
            other => Err(Error::Config(format!("unknown behavior '{other}' (expected hex, square or boids)"))),
        }
    }
}

/// Pair force `a/r^12 - b/r^6`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceLaw {
    pub a: f64,
    pub b: f64,
}

impl ForceLaw {
    pub const HEX: ForceLaw = ForceLaw { a: 1.2e-10, b: 2.2e-5 };
    pub const SQUARE_KIN: ForceLaw = ForceLaw { a: 7.84e-9, b: 1.7e-4 };

    /// From well depth and target distance: `a = 4 eps delta^12`, `b = 4 eps delta^6`.
    pub fn from_potential(epsilon: f64, delta: f64) -> ForceLaw {
        ForceLaw { a: 4.0 * epsilon * delta.powi(12), b: 4.0 * epsilon * delta.powi(6) }
    }

    /// Distance at which the force vanishes.
    pub fn root(&self) -> f64 {
        (self.a / self.b).powf(1.0 / 6.0)
    }

    pub fn eval(&self, r: f64) -> f64 {
        lj_force(r, self.a, self.b)
    }
}

/// Kin label: 1 or 2 in the square behavior, 0 otherwise.
pub type KinLabel = u8;

/// Unit-mass point agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentState {
    pub pos: Vec2,
    pub vel: Vec2,
    pub kin: KinLabel,
}

/// Edge attribute for a pair: 1 kin, 2 non-kin, 0 when the behavior has one class.
pub fn kin_pair(behavior: Behavior, ki: KinLabel, kj: KinLabel) -> u8 {
    match behavior {
        Behavior::Square if ki == kj => 1,
        Behavior::Square => 2,
        _ => 0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorParams {
    pub behavior: Behavior,
    /// Force law for same-label pairs (and every pair in hex).
    pub kin: ForceLaw,
    pub non_kin: ForceLaw,
    pub cohesion: f64,
    pub separation: f64,
    pub alignment: f64,
    pub sensing_range: f64,
    /// Per-integration-step velocity scale for shape formation; 1 disables.
    pub velocity_damping: f64,
    /// Speed limit applied after every step; `None` disables. Shape formation
    /// needs it too: the repulsive core is far stiffer than the step size allows.
    pub speed_cap: Option<f64>,
    /// Minimum initial pair separation.
    pub min_separation: f64,
}

impl BehaviorParams {
    pub fn for_behavior(behavior: Behavior) -> BehaviorParams {
        let kin = match behavior {
            Behavior::Square => ForceLaw::SQUARE_KIN,
            _ => ForceLaw::HEX,
        };
        BehaviorParams {
            behavior,
            kin,
            non_kin: ForceLaw::HEX,
            cohesion: 2.0,
            separation: 75.0,
            alignment: 3.0,
            sensing_range: 0.5,
            velocity_damping: 0.9,
            speed_cap: Some(0.5),
            min_separation: 0.05,
        }
    }

    pub fn law(&self, ki: KinLabel, kj: KinLabel) -> ForceLaw {
        if kin_pair(self.behavior, ki, kj) == 2 {
            self.non_kin
        } else {
            self.kin
        }
    }

    pub fn validate(&self) -> Result<()> {
        let laws_ok = [self.kin, self.non_kin].iter().all(|l| l.a > 0.0 && l.b > 0.0);
        if !laws_ok {
            return Err(Error::Config("force-law coefficients must be positive".into()));
        }
        if !(self.sensing_range > 0.0 && self.sensing_range <= 0.5) {
            return Err(Error::Config("sensing_range must be in (0, 0.5]".into()));
        }
        if !(self.velocity_damping > 0.0 && self.velocity_damping <= 1.0) {
            return Err(Error::Config("velocity_damping must be in (0, 1]".into()));
        }
        if self.speed_cap.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("speed_cap must be positive".into()));
        }
        if !(self.min_separation >= 0.0 && self.min_separation < 0.2) {
            return Err(Error::Config("min_separation must be in [0, 0.2)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub agent_count: usize,
    pub duration_s: f64,
    pub integration_dt_s: f64,
    pub record_hz: f64,
    pub runs: usize,
    pub rng_seed: u64,
    pub params: BehaviorParams,
}

impl SimConfig {
    pub fn for_behavior(behavior: Behavior) -> SimConfig {
        let (agent_count, record_hz, dt) = match behavior {
            Behavior::Boids => (50, 30.0, 1.0 / 300.0),
            _ => (20, 10.0, 0.005),
        };
        SimConfig {
            agent_count,
            duration_s: 25.0,
            integration_dt_s: dt,
            record_hz,
            runs: 250,
            rng_seed: 0,
            params: BehaviorParams::for_behavior(behavior),
        }
    }

    /// Integration steps between recorded frames.
    pub fn steps_per_frame(&self) -> Result<usize> {
        let ratio = 1.0 / (self.record_hz * self.integration_dt_s);
        let n = ratio.round();
        if !(n >= 1.0) || (ratio - n).abs() > 1e-9 * n {
            return Err(Error::Config(format!(
                "record period 1/{} s is not an integer multiple of dt {}",
                self.record_hz, self.integration_dt_s
            )));
        }
        Ok(n as usize)
    }

    pub fn frame_count(&self) -> Result<usize> {
        let n = self.duration_s * self.record_hz;
        if !(n >= 1.0) || (n - n.round()).abs() > 1e-9 * n {
            return Err(Error::Config("duration must be a whole number of record periods".into()));
        }
        Ok(n.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agent_count < 2 {
            return Err(Error::Config("agent_count must be at least 2".into()));
        }
        if !(self.integration_dt_s > 0.0 && self.duration_s > 0.0 && self.record_hz > 0.0) {
            return Err(Error::Config("duration, dt and record rate must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        self.steps_per_frame()?;
        self.frame_count()?;
        self.params.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_the_target_laws() {
        assert!((ForceLaw::HEX.root() - 0.1327).abs() < 1e-4);
        assert!((ForceLaw::SQUARE_KIN.root() - 0.1894).abs() < 1e-4);
        let l = ForceLaw::HEX;
        assert!(l.eval(l.root()).abs() < 1e-9 * l.a / l.root().powi(12));
    }

    #[test]
    fn potential_parameterization() {
        // eps ~ 1.14 and delta at the root give the hex coefficients back
        let delta = ForceLaw::HEX.root();
        let eps = ForceLaw::HEX.b * ForceLaw::HEX.b / (4.0 * ForceLaw::HEX.a);
        assert!((eps - 1.0083).abs() < 1e-3, "{eps}");
        let l = ForceLaw::from_potential(eps, delta);
        assert!((l.a / ForceLaw::HEX.a - 1.0).abs() < 1e-9);
        assert!((l.b / ForceLaw::HEX.b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn record_rates() {
        let hex = SimConfig::for_behavior(Behavior::Hex);
        assert_eq!(hex.steps_per_frame().unwrap(), 20);
        assert_eq!(hex.frame_count().unwrap(), 250);
        let boids = SimConfig::for_behavior(Behavior::Boids);
        assert_eq!(boids.frame_count().unwrap(), 750);
        assert_eq!(boids.steps_per_frame().unwrap(), 10);
        let bad = SimConfig { record_hz: 7.0, ..hex };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn behavior_names() {
        for b in [Behavior::Hex, Behavior::Square, Behavior::Boids] {
            assert_eq!(b.name().parse::<Behavior>().unwrap(), b);
        }
        assert!("triangle".parse::<Behavior>().is_err());
    }
}
