//! Prior features derived from a neighbour's relative position and velocity.

use crate::error::{Error, Result};
use crate::swarmsim::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// Relative position `dx`.
    Position,
    /// Relative velocity `dv`.
    Velocity,
}

impl Source {
    fn tag(self) -> &'static str {
        match self {
            Source::Position => "x",
            Source::Velocity => "v",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    Component(Source, usize),
    Magnitude(Source),
    InverseMagnitude(Source),
    /// Component of the unit vector.
    Normalized(Source, usize),
}

impl PriorKind {
    pub fn source(self) -> Source {
        match self {
            PriorKind::Component(s, _)
            | PriorKind::Magnitude(s)
            | PriorKind::InverseMagnitude(s)
            | PriorKind::Normalized(s, _) => s,
        }
    }

    /// Axis for vector-valued channels, `None` for scalars.
    pub fn axis(self) -> Option<usize> {
        match self {
            PriorKind::Component(_, a) | PriorKind::Normalized(_, a) => Some(a),
            _ => None,
        }
    }

    /// Power of the source vector's length carried by this channel.
    pub fn length_power(self) -> i32 {
        match self {
            PriorKind::Component(..) | PriorKind::Magnitude(_) => 1,
            PriorKind::InverseMagnitude(_) => -1,
            PriorKind::Normalized(..) => 0,
        }
    }

    fn default_name(self) -> String {
        // dx, dy for position, dvx, dvy for velocity
        let comp = |s: Source, a: usize| match s {
            Source::Position => ["dx", "dy"][a].to_string(),
            Source::Velocity => ["dvx", "dvy"][a].to_string(),
        };
        match self {
            PriorKind::Component(s, a) => comp(s, a),
            PriorKind::Magnitude(s) => format!("norm_d{}", s.tag()),
            PriorKind::InverseMagnitude(s) => format!("inv_norm_d{}", s.tag()),
            PriorKind::Normalized(s, a) => format!("unit_{}", comp(s, a)),
        }
    }

    fn eval(self, dx: Vec2, dv: Vec2, nx: f64, nv: f64) -> (f64, bool) {
        let (vec, n) = match self.source() {
            Source::Position => (dx, nx),
            Source::Velocity => (dv, nv),
        };
        match self {
            PriorKind::Component(_, a) => (vec[a], false),
            PriorKind::Magnitude(_) => (n, false),
            PriorKind::InverseMagnitude(_) if n == 0.0 => (0.0, true),
            PriorKind::InverseMagnitude(_) => (1.0 / n, false),
            PriorKind::Normalized(..) if n == 0.0 => (0.0, true),
            PriorKind::Normalized(_, a) => (vec[a] / n, false),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorDef {
    pub name: String,
    pub kind: PriorKind,
}

/// Ordered, uniquely named prior channels.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    defs: Vec<PriorDef>,
}

impl PriorSpec {
    pub fn new(defs: Vec<PriorDef>) -> Result<PriorSpec> {
        for (i, d) in defs.iter().enumerate() {
            if defs[..i].iter().any(|e| e.name == d.name) {
                return Err(Error::Config(format!("duplicate prior name '{}'", d.name)));
            }
            if d.kind.axis().is_some_and(|a| a > 1) {
                return Err(Error::Config(format!("prior '{}' has an axis outside 0..2", d.name)));
            }
        }
        Ok(PriorSpec { defs })
    }

    fn from_kinds(kinds: &[PriorKind]) -> PriorSpec {
        let defs = kinds.iter().map(|&kind| PriorDef { name: kind.default_name(), kind }).collect();
        PriorSpec::new(defs).expect("built-in specs are valid")
    }

    /// `dx, dy, |dx|, 1/|dx|`: the shape-formation library.
    pub fn shape() -> PriorSpec {
        use PriorKind::*;
        use Source::Position as X;
        PriorSpec::from_kinds(&[Component(X, 0), Component(X, 1), Magnitude(X), InverseMagnitude(X)])
    }

    /// The 12 boids channels: `dx, dy, dvx, dvy, |dx|, |dv|, 1/|dx|, 1/|dv|,
    /// dx/|dx|, dy/|dx|, dvx/|dv|, dvy/|dv|`.
    pub fn boids() -> PriorSpec {
        use PriorKind::*;
        use Source::{Position as X, Velocity as V};
        PriorSpec::from_kinds(&[
            Component(X, 0),
            Component(X, 1),
            Component(V, 0),
            Component(V, 1),
            Magnitude(X),
            Magnitude(V),
            InverseMagnitude(X),
            InverseMagnitude(V),
            Normalized(X, 0),
            Normalized(X, 1),
            Normalized(V, 0),
            Normalized(V, 1),
        ])
    }

    pub fn defs(&self) -> &[PriorDef] {
        &self.defs
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.defs.iter().map(|d| d.name.clone()).collect()
    }

    /// Channel index pairs that swap when the frame is mirrored across `y = x`:
    /// the x and y channels of each vector-valued prior.
    pub fn vector_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, d) in self.defs.iter().enumerate() {
            if d.kind.axis() != Some(0) {
                continue;
            }
            let twin = match d.kind {
                PriorKind::Component(s, _) => PriorKind::Component(s, 1),
                PriorKind::Normalized(s, _) => PriorKind::Normalized(s, 1),
                _ => unreachable!(),
            };
            if let Some(j) = self.defs.iter().position(|e| e.kind == twin) {
                out.push((i, j));
            }
        }
        out
    }
}

/// Evaluates every channel of `spec`. The flag is set when an inverse or
/// normalized channel met a zero-length vector (those channels read 0).
pub fn compute_priors(dx: Vec2, dv: Vec2, spec: &PriorSpec) -> (Vec<f64>, bool) {
    let nx = dx[0].hypot(dx[1]);
    let nv = dv[0].hypot(dv[1]);
    let mut flagged = false;
    let values = spec
        .defs
        .iter()
        .map(|d| {
            let (v, f) = d.kind.eval(dx, dv, nx, nv);
            flagged |= f;
            v
        })
        .collect();
    (values, flagged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boids_channel_order() {
        let spec = PriorSpec::boids();
        assert_eq!(
            spec.names(),
            [
                "dx", "dy", "dvx", "dvy", "norm_dx", "norm_dv", "inv_norm_dx", "inv_norm_dv", "unit_dx", "unit_dy",
                "unit_dvx", "unit_dvy"
            ]
        );
        assert_eq!(spec.vector_pairs(), vec![(0, 1), (2, 3), (8, 9), (10, 11)]);
    }

    #[test]
    fn pythagorean_example() {
        let (v, flagged) = compute_priors([3.0, 4.0], [0.0, 0.0], &PriorSpec::boids());
        assert_eq!(&v[..], &[3.0, 4.0, 0.0, 0.0, 5.0, 0.0, 0.2, 0.0, 0.6, 0.8, 0.0, 0.0]);
        assert!(flagged);
    }

    #[test]
    fn axis_aligned_example() {
        let (v, flagged) = compute_priors([1.0, 0.0], [0.0, 2.0], &PriorSpec::boids());
        assert_eq!(v, vec![1.0, 0.0, 0.0, 2.0, 1.0, 2.0, 1.0, 0.5, 1.0, 0.0, 0.0, 1.0]);
        assert!(!flagged);
    }

    #[test]
    fn zero_position_is_flagged() {
        let (v, flagged) = compute_priors([0.0, 0.0], [1.0, 1.0], &PriorSpec::boids());
        assert!(flagged);
        assert_eq!(v[6], 0.0);
        assert_eq!(v[8], 0.0);
    }

    #[test]
    fn shape_spec() {
        let spec = PriorSpec::shape();
        assert_eq!(spec.names(), ["dx", "dy", "norm_dx", "inv_norm_dx"]);
        let (v, f) = compute_priors([0.0, -0.25], [9.0, 9.0], &spec);
        assert_eq!(v, vec![0.0, -0.25, 0.25, 4.0]);
        assert!(!f);
    }

    #[test]
    fn duplicate_names_rejected() {
        let d = PriorDef { name: "a".into(), kind: PriorKind::Magnitude(Source::Position) };
        assert!(PriorSpec::new(vec![d.clone(), d]).is_err());
    }
}
