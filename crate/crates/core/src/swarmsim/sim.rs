use rand::Rng;
use rayon::prelude::*;

use super::forces::{interactions, norm, torus_displacement, Interactions};
use super::log::{AgentRecord, Frame, PairRecord, TrajectoryLog};
use super::{AgentState, Behavior, BehaviorParams, SimConfig};
use crate::error::Result;
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub t: f64,
    pub agents: Vec<AgentState>,
}

fn wrap(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Random initial world for run `run`: uniform positions at least
/// `min_separation` apart, at rest for shape formation and with uniform
/// random headings for boids.
pub fn initial_world(cfg: &SimConfig, run: usize) -> WorldState {
    let p = &cfg.params;
    let mut rng = stream(cfg.rng_seed, &[run as u64]);
    let mut agents: Vec<AgentState> = Vec::with_capacity(cfg.agent_count);
    while agents.len() < cfg.agent_count {
        let pos = [rng.random::<f64>(), rng.random::<f64>()];
        if agents.iter().any(|a| norm(torus_displacement(a.pos, pos)) < p.min_separation) {
            continue;
        }
        let kin = match p.behavior {
            Behavior::Square => 1 + (agents.len() % 2) as u8,
            _ => 0,
        };
        agents.push(AgentState { pos, vel: [0.0, 0.0], kin });
    }
    if p.behavior == Behavior::Boids {
        let speed = p.speed_cap.map_or(1.0, |c| c.min(1.0));
        for a in &mut agents {
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            a.vel = [speed * th.cos(), speed * th.sin()];
        }
    }
    WorldState { t: 0.0, agents }
}

fn advance(world: &WorldState, params: &BehaviorParams, dt: f64, it: &Interactions) -> WorldState {
    let damping = if params.behavior.is_shape_formation() { params.velocity_damping } else { 1.0 };
    let cap = params.speed_cap;
    let agents = world
        .agents
        .iter()
        .zip(&it.accel)
        .map(|(a, acc)| {
            let mut v = [(a.vel[0] + acc[0] * dt) * damping, (a.vel[1] + acc[1] * dt) * damping];
            if let Some(c) = cap {
                let s = norm(v);
                if s > c {
                    v = [v[0] * c / s, v[1] * c / s];
                }
            }
            AgentState { pos: [wrap(a.pos[0] + v[0] * dt), wrap(a.pos[1] + v[1] * dt)], vel: v, kin: a.kin }
        })
        .collect();
    WorldState { t: world.t + dt, agents }
}

/// One semi-implicit Euler step.
pub fn step(world: &WorldState, params: &BehaviorParams, dt: f64) -> WorldState {
    assert!(dt > 0.0, "dt must be positive");
    let it = interactions(&world.agents, params, false);
    advance(world, params, dt, &it)
}

fn frame(t: f64, world: &WorldState, it: &Interactions) -> Frame {
    Frame {
        t,
        agents: world
            .agents
            .iter()
            .zip(&it.accel)
            .enumerate()
            .map(|(i, (a, acc))| AgentRecord { agent: i, pos: a.pos, vel: a.vel, acc: *acc, kin: a.kin })
            .collect(),
        pairs: it
            .pairs
            .iter()
            .map(|p| PairRecord { i: p.i, j: p.j, force: p.force, r: p.r, kin_pair: p.kin_pair })
            .collect(),
    }
}

/// Simulates one run. Frame `k` holds the state at `t = k / record_hz` and the
/// accelerations (and, for shape formation, pair forces) acting at that state.
pub fn simulate_run(cfg: &SimConfig, run: usize) -> Result<TrajectoryLog> {
    cfg.validate()?;
    let spf = cfg.steps_per_frame()?;
    let frames = cfg.frame_count()?;
    let dt = cfg.integration_dt_s;
    let with_pairs = cfg.params.behavior.is_shape_formation();
    let mut world = initial_world(cfg, run);
    let mut log = TrajectoryLog { behavior: cfg.params.behavior, run, frames: Vec::with_capacity(frames), degenerate: 0 };
    for k in 0..frames {
        let it = interactions(&world.agents, &cfg.params, with_pairs);
        log.degenerate += it.degenerate;
        log.frames.push(frame(k as f64 / cfg.record_hz, &world, &it));
        world = advance(&world, &cfg.params, dt, &it);
        for _ in 1..spf {
            let it = interactions(&world.agents, &cfg.params, false);
            log.degenerate += it.degenerate;
            world = advance(&world, &cfg.params, dt, &it);
        }
    }
    Ok(log)
}

/// All runs of `cfg`, simulated in parallel.
pub fn simulate(cfg: &SimConfig) -> Result<Vec<TrajectoryLog>> {
    cfg.validate()?;
    (0..cfg.runs).into_par_iter().map(|r| simulate_run(cfg, r)).collect()
}

/// Swarm order parameter `|sum of unit headings| / N`; agents at rest count as zero.
pub fn polarization(velocities: impl IntoIterator<Item = [f64; 2]>) -> f64 {
    let mut sum = [0.0, 0.0];
    let mut n = 0usize;
    for v in velocities {
        n += 1;
        let s = norm(v);
        if s > 0.0 {
            sum[0] += v[0] / s;
            sum[1] += v[1] / s;
        }
    }
    if n == 0 {
        0.0
    } else {
        norm(sum) / n as f64
    }
}

/// Torus distance from each agent to its nearest neighbour among those accepted by `accept(me, other)`.
/// Agents with no accepted neighbour are skipped.
pub fn nearest_neighbor_distances<F>(agents: &[AgentState], accept: F) -> Vec<f64>
where
    F: Fn(&AgentState, &AgentState) -> bool,
{
    let mut out = Vec::with_capacity(agents.len());
    for (i, a) in agents.iter().enumerate() {
        let best = agents
            .iter()
            .enumerate()
            .filter(|&(j, b)| j != i && accept(a, b))
            .map(|(_, b)| norm(torus_displacement(a.pos, b.pos)))
            .fold(f64::INFINITY, f64::min);
        if best.is_finite() {
            out.push(best);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swarmsim::ForceLaw;

    #[test]
    fn free_motion_wraps() {
        let p = BehaviorParams { velocity_damping: 1.0, ..BehaviorParams::for_behavior(Behavior::Hex) };
        // far apart: 0.5 in both axes is beyond the sensing range
        let w = WorldState {
            t: 0.0,
            agents: vec![
                AgentState { pos: [0.999, 0.2], vel: [0.4, -0.1], kin: 0 },
                AgentState { pos: [0.499, 0.7], vel: [0.0, 0.0], kin: 0 },
            ],
        };
        let n = step(&w, &p, 0.005);
        assert!((n.agents[0].pos[0] - 0.001).abs() < 1e-12);
        assert!((n.agents[0].pos[1] - 0.1995).abs() < 1e-12);
        assert_eq!(n.agents[1].pos, [0.499, 0.7]);
        assert_eq!(n.agents[0].vel, [0.4, -0.1]);
    }

    #[test]
    fn equilibrium_pair_stays_put() {
        let p = BehaviorParams::for_behavior(Behavior::Hex);
        let r0 = ForceLaw::HEX.root();
        let w = WorldState {
            t: 0.0,
            agents: vec![
                AgentState { pos: [0.4, 0.5], vel: [0.0, 0.0], kin: 0 },
                AgentState { pos: [0.4 + r0, 0.5], vel: [0.0, 0.0], kin: 0 },
            ],
        };
        let n = step(&w, &p, 0.005);
        for (a, b) in n.agents.iter().zip(&w.agents) {
            assert!((a.pos[0] - b.pos[0]).abs() < 1e-12 && (a.pos[1] - b.pos[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_world_respects_guard() {
        let cfg = SimConfig { agent_count: 40, ..SimConfig::for_behavior(Behavior::Square) };
        let w = initial_world(&cfg, 3);
        let d = nearest_neighbor_distances(&w.agents, |_, _| true);
        assert!(d.iter().all(|&x| x >= 0.05));
        assert_eq!(w.agents.iter().filter(|a| a.kin == 1).count(), 20);
        assert_eq!(initial_world(&cfg, 3), w);
        assert_ne!(initial_world(&cfg, 4), w);
    }

    #[test]
    fn short_run_shape_and_determinism() {
        let mut cfg = SimConfig { duration_s: 1.0, runs: 2, rng_seed: 5, ..SimConfig::for_behavior(Behavior::Hex) };
        let logs = simulate(&cfg).unwrap();
        assert_eq!(logs.len(), 2);
        assert_eq!(logs[0].frames.len(), 10);
        assert_eq!(logs[0].frames[3].t, 0.3);
        assert_eq!(simulate_run(&cfg, 1).unwrap(), logs[1]);
        for f in &logs[0].frames {
            for a in &f.agents {
                assert!((0.0..1.0).contains(&a.pos[0]) && (0.0..1.0).contains(&a.pos[1]));
            }
        }
        cfg.params.behavior = Behavior::Boids;
        let b = simulate_run(&cfg, 0).unwrap();
        assert!(b.frames[0].pairs.is_empty());
    }

    #[test]
    fn polarization_bounds() {
        assert_eq!(polarization([[1.0, 0.0], [2.0, 0.0]]), 1.0);
        assert!(polarization([[1.0, 0.0], [-1.0, 0.0]]).abs() < 1e-15);
        assert_eq!(polarization([[0.0, 0.0], [0.0, 3.0]]), 0.5);
    }
}
