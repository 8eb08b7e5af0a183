//! Data plumbing between the simulator, the surrogate and the regression.

mod io;
mod normalize;
mod priors;

pub use io::{read_dataset, write_dataset, DatasetMeta, SCHEMA};
pub use normalize::{ColumnRange, NormalizationRecord};
pub use priors::{compute_priors, PriorDef, PriorKind, PriorSpec, Source};

use crate::error::{Error, Result};
use crate::swarmsim::{kin_pair, torus_displacement, Behavior, Frame, TrajectoryLog, Vec2};

/// One directed interaction: features describe neighbour `j` relative to agent `i`,
/// the target is the force on `i` from `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSample {
    pub features: Vec<f64>,
    /// 1 kin, 2 non-kin; absent for single-class behaviors.
    pub edge_attr: Option<u8>,
    pub target: Vec2,
}

/// One agent at one frame: an edge feature row per neighbour and the agent's acceleration.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSample {
    pub edges: Vec<Vec<f64>>,
    pub target: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction<T> {
    pub samples: Vec<T>,
    /// Pairs or rows dropped because two agents coincided or a prior was flagged.
    pub skipped: usize,
}

impl<T> Default for Extraction<T> {
    fn default() -> Self {
        Extraction { samples: Vec::new(), skipped: 0 }
    }
}

fn relative(frame: &Frame, i: usize, j: usize) -> (Vec2, Vec2) {
    let (a, b) = (&frame.agents[i], &frame.agents[j]);
    (torus_displacement(a.pos, b.pos), [b.vel[0] - a.vel[0], b.vel[1] - a.vel[1]])
}

/// Per-pair samples from a shape-formation log: every in-range ordered pair of every frame.
pub fn extract_pairs(log: &TrajectoryLog, sensing_range: f64, spec: &PriorSpec) -> Result<Extraction<EdgeSample>> {
    if !log.behavior.is_shape_formation() {
        return Err(Error::Config("boids logs have no pair forces; use extract_nodes".into()));
    }
    let mut out = Extraction::default();
    for frame in &log.frames {
        let n = frame.agents.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (dx, dv) = relative(frame, i, j);
                let r = dx[0].hypot(dx[1]);
                if r > sensing_range {
                    continue;
                }
                if r == 0.0 {
                    out.skipped += 1;
                    continue;
                }
                let found = frame.pairs.binary_search_by_key(&(i, j), |p| (p.i, p.j));
                let Ok(k) = found else {
                    return Err(Error::Malformed {
                        file: format!("run {}", log.run),
                        line: 0,
                        message: format!("frame t={} has no force for in-range pair ({i}, {j})", frame.t),
                    });
                };
                let (features, flagged) = compute_priors(dx, dv, spec);
                if flagged {
                    out.skipped += 1;
                    continue;
                }
                let edge_attr = match log.behavior {
                    Behavior::Square => Some(kin_pair(log.behavior, frame.agents[i].kin, frame.agents[j].kin)),
                    _ => None,
                };
                out.samples.push(EdgeSample { features, edge_attr, target: frame.pairs[k].force });
            }
        }
    }
    Ok(out)
}

/// Per-agent samples from a boids log. Agents without neighbours are left out;
/// rows with a flagged prior are skipped and counted.
pub fn extract_nodes(log: &TrajectoryLog, sensing_range: f64, spec: &PriorSpec) -> Extraction<NodeSample> {
    let mut out = Extraction::default();
    for frame in &log.frames {
        let n = frame.agents.len();
        for i in 0..n {
            let mut edges = Vec::new();
            let mut flagged = false;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (dx, dv) = relative(frame, i, j);
                if dx[0].hypot(dx[1]) > sensing_range {
                    continue;
                }
                let (f, bad) = compute_priors(dx, dv, spec);
                flagged |= bad;
                edges.push(f);
            }
            if flagged {
                out.skipped += 1;
            } else if !edges.is_empty() {
                out.samples.push(NodeSample { edges, target: frame.agents[i].acc });
            }
        }
    }
    out
}
