use super::{kin_pair, AgentState, Behavior, BehaviorParams, Vec2};

/// Minimum-image displacement from `from` to `to`; components in [-0.5, 0.5).
pub fn torus_displacement(from: Vec2, to: Vec2) -> Vec2 {
    let wrap = |d: f64| d - (d + 0.5).floor();
    [wrap(to[0] - from[0]), wrap(to[1] - from[1])]
}

/// `a/r^12 - b/r^6`; positive is repulsive.
///
/// # Panics
/// If `r` is not positive.
pub fn lj_force(r: f64, a: f64, b: f64) -> f64 {
    assert!(r > 0.0, "lj_force needs r > 0, got {r}");
    let inv6 = 1.0 / (r * r * r).powi(2);
    a * inv6 * inv6 - b * inv6
}

pub(super) fn norm(v: Vec2) -> f64 {
    v[0].hypot(v[1])
}

/// Force on `i` exerted by `j`; zero outside the sensing range or for coincident agents.
pub fn pair_force_vector(i: &AgentState, j: &AgentState, params: &BehaviorParams) -> Vec2 {
    let d = torus_displacement(j.pos, i.pos);
    let r = norm(d);
    if r == 0.0 || r > params.sensing_range {
        return [0.0, 0.0];
    }
    let f = params.law(i.kin, j.kin).eval(r);
    [f * d[0] / r, f * d[1] / r]
}

/// Boids acceleration of `me` from `neighbors` (already filtered to the sensing range).
///
/// Cohesion and separation use the torus-relative position of each neighbor,
/// alignment its velocity relative to `me`. Coincident neighbors contribute
/// nothing and are counted in `degenerate`.
pub fn boids_accel(me: &AgentState, neighbors: &[AgentState], params: &BehaviorParams, degenerate: &mut usize) -> Vec2 {
    if neighbors.is_empty() {
        return [0.0, 0.0];
    }
    let mut acc = [0.0, 0.0];
    for n in neighbors {
        let x = torus_displacement(me.pos, n.pos);
        let r = norm(x);
        if r == 0.0 {
            *degenerate += 1;
            continue;
        }
        let dv = [n.vel[0] - me.vel[0], n.vel[1] - me.vel[1]];
        for k in 0..2 {
            acc[k] += params.cohesion * x[k] / r - params.separation * x[k] / (r * r) + params.alignment * dv[k];
        }
    }
    let m = neighbors.len() as f64;
    [acc[0] / m, acc[1] / m]
}

/// Per-pair force applied to `i` by `j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairForce {
    pub i: usize,
    pub j: usize,
    pub force: Vec2,
    pub r: f64,
    pub kin_pair: u8,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Interactions {
    pub accel: Vec<Vec2>,
    /// In-range ordered pairs, shape formation only.
    pub pairs: Vec<PairForce>,
    pub degenerate: usize,
}

/// Accelerations of every agent (unit mass) and, for shape formation, the pair forces behind them.
pub fn interactions(agents: &[AgentState], params: &BehaviorParams, with_pairs: bool) -> Interactions {
    let n = agents.len();
    let mut out = Interactions { accel: vec![[0.0, 0.0]; n], pairs: Vec::new(), degenerate: 0 };
    if params.behavior == Behavior::Boids {
        let mut neigh = Vec::with_capacity(n);
        for (i, me) in agents.iter().enumerate() {
            neigh.clear();
            for (j, o) in agents.iter().enumerate() {
                if i != j && norm(torus_displacement(me.pos, o.pos)) <= params.sensing_range {
                    neigh.push(*o);
                }
            }
            out.accel[i] = boids_accel(me, &neigh, params, &mut out.degenerate);
        }
        return out;
    }
    for i in 0..n {
        for j in i + 1..n {
            let d = torus_displacement(agents[j].pos, agents[i].pos);
            let r = norm(d);
            if r > params.sensing_range {
                continue;
            }
            if r == 0.0 {
                out.degenerate += 1;
                continue;
            }
            let f = params.law(agents[i].kin, agents[j].kin).eval(r);
            let fi = [f * d[0] / r, f * d[1] / r];
            for k in 0..2 {
                out.accel[i][k] += fi[k];
                out.accel[j][k] -= fi[k];
            }
            if with_pairs {
                let kp = kin_pair(params.behavior, agents[i].kin, agents[j].kin);
                out.pairs.push(PairForce { i, j, force: fi, r, kin_pair: kp });
                out.pairs.push(PairForce { i: j, j: i, force: [-fi[0], -fi[1]], r, kin_pair: kp });
            }
        }
    }
    if with_pairs {
        out.pairs.sort_by_key(|p| (p.i, p.j));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(x: f64, y: f64) -> AgentState {
        AgentState { pos: [x, y], vel: [0.0, 0.0], kin: 0 }
    }

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol
    }

    #[test]
    fn displacement_wraps() {
        assert!(close(torus_displacement([0.95, 0.5], [0.05, 0.5]), [0.1, 0.0], 1e-12));
        assert_eq!(torus_displacement([0.3, 0.7], [0.3, 0.7]), [0.0, 0.0]);
        assert!(close(torus_displacement([0.2, 0.2], [0.6, 0.2]), [0.4, 0.0], 1e-12));
        assert!(close(torus_displacement([0.05, 0.9], [0.95, 0.1]), [-0.1, 0.2], 1e-12));
    }

    #[test]
    fn force_law_values() {
        // 1.2e-10 * 1e12 - 2.2e-5 * 1e6
        assert!((lj_force(0.1, 1.2e-10, 2.2e-5) - 98.0).abs() < 1e-9);
        let root = (1.2e-10f64 / 2.2e-5).powf(1.0 / 6.0);
        assert!((root - 0.1327).abs() < 1e-4);
        assert!(lj_force(root, 1.2e-10, 2.2e-5).abs() < 1e-9 * 1.2e-10 / root.powi(12));
        assert!(lj_force(10.0, 1.2e-10, 2.2e-5).abs() < 1e-10);
    }

    #[test]
    #[should_panic]
    fn force_law_rejects_zero_distance() {
        lj_force(0.0, 1.0, 1.0);
    }

    #[test]
    fn pair_forces() {
        let p = BehaviorParams::for_behavior(Behavior::Square);
        let kin_root = p.kin.root();
        let mut a = agent(0.3, 0.3);
        let mut b = agent(0.3 + kin_root, 0.3);
        a.kin = 1;
        b.kin = 1;
        let f = pair_force_vector(&a, &b, &p);
        assert!(f[0].abs() < 1e-9 && f[1] == 0.0);
        assert_eq!(p.non_kin, BehaviorParams::for_behavior(Behavior::Hex).kin);

        // close hex pair: repulsion pushes a towards -x, antisymmetric
        let h = BehaviorParams::for_behavior(Behavior::Hex);
        let (a, b) = (agent(0.95, 0.5), agent(0.02, 0.52));
        let fab = pair_force_vector(&a, &b, &h);
        let fba = pair_force_vector(&b, &a, &h);
        assert!(fab[0] < 0.0);
        assert_eq!(fab, [-fba[0], -fba[1]]);
        assert_eq!(pair_force_vector(&agent(0.0, 0.0), &agent(0.5, 0.5), &h), [0.0, 0.0]);
    }

    #[test]
    fn boids_terms() {
        let mut p = BehaviorParams::for_behavior(Behavior::Boids);
        p.alignment = 0.0;
        let me = agent(0.5, 0.5);
        let mut deg = 0;
        let a = boids_accel(&me, &[agent(0.75, 0.5)], &p, &mut deg);
        // 2 * 1 - 75 / 0.25
        assert!(close(a, [-298.0, 0.0], 1e-9), "{a:?}");
        let a = boids_accel(&me, &[agent(0.7, 0.5), agent(0.3, 0.5)], &p, &mut deg);
        assert!(close(a, [0.0, 0.0], 1e-9));
        assert_eq!(boids_accel(&me, &[], &p, &mut deg), [0.0, 0.0]);
        assert_eq!(boids_accel(&me, &[agent(0.5, 0.5)], &p, &mut deg), [0.0, 0.0]);
        assert_eq!(deg, 1);

        p.alignment = 3.0;
        let mut n = agent(0.5, 0.5);
        n.pos = [0.5, 0.6];
        n.vel = [0.2, 0.0];
        let a = boids_accel(&me, &[n], &p, &mut deg);
        assert!(close(a, [0.6, 2.0 - 750.0], 1e-9), "{a:?}");
    }

    #[test]
    fn interactions_match_pairwise_sums() {
        let p = BehaviorParams::for_behavior(Behavior::Hex);
        let agents = [agent(0.1, 0.1), agent(0.2, 0.15), agent(0.95, 0.05), agent(0.6, 0.6)];
        let it = interactions(&agents, &p, true);
        for (i, a) in agents.iter().enumerate() {
            let mut sum = [0.0, 0.0];
            for (j, b) in agents.iter().enumerate() {
                if i != j {
                    let f = pair_force_vector(a, b, &p);
                    sum[0] += f[0];
                    sum[1] += f[1];
                }
            }
            assert!(close(it.accel[i], sum, 1e-9 * (1.0 + sum[0].abs() + sum[1].abs())));
        }
        for pf in &it.pairs {
            let twin = it.pairs.iter().find(|q| q.i == pf.j && q.j == pf.i).unwrap();
            assert_eq!(pf.force, [-twin.force[0], -twin.force[1]]);
        }
    }
}
