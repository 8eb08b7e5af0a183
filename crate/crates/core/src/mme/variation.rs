//! Random tree generation and the structural variation operators.

use rand::Rng;

use crate::exprtree::{ExprNode, OpKind};

/// What a new random tree may contain.
#[derive(Clone, Debug)]
pub struct TreeSpace {
    pub n_features: usize,
    pub operators: Vec<OpKind>,
    pub max_nodes: usize,
}

impl TreeSpace {
    fn binary_ops(&self) -> Vec<OpKind> {
        self.operators.iter().copied().filter(|k| k.arity() == 2).collect()
    }
}

const PARAM_EXPONENT_PROB: f64 = 0.9;

/// Value for a freshly created parameter leaf.
fn fresh_value<R: Rng + ?Sized>(rng: &mut R, exponent: bool) -> f64 {
    if exponent {
        rng.random_range(-4.0..4.0)
    } else {
        let mag = 10f64.powf(rng.random_range(-1.0..1.0));
        if rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    }
}

fn random_leaf<R: Rng + ?Sized>(rng: &mut R, space: &TreeSpace, params: &mut Vec<f64>) -> ExprNode {
    if space.n_features > 0 && rng.random_bool(0.5) {
        ExprNode::Var(rng.random_range(0..space.n_features))
    } else {
        params.push(fresh_value(rng, false));
        ExprNode::Param(params.len() - 1)
    }
}

/// Grows (or fully builds, with `full`) a random tree of at most `depth` levels.
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, space: &TreeSpace, depth: usize, full: bool) -> (ExprNode, Vec<f64>) {
    let mut params = Vec::new();
    let mut tree = grow(rng, space, depth.max(1), full, &mut params);
    let params = tree.canonicalize(&params);
    (tree, params)
}

fn grow<R: Rng + ?Sized>(rng: &mut R, space: &TreeSpace, depth: usize, full: bool, params: &mut Vec<f64>) -> ExprNode {
    let ops = &space.operators;
    if depth <= 1 || ops.is_empty() || (!full && rng.random_bool(0.3)) {
        return random_leaf(rng, space, params);
    }
    let kind = ops[rng.random_range(0..ops.len())];
    match kind {
        OpKind::Neg => ExprNode::neg(grow(rng, space, depth - 1, full, params)),
        OpKind::Pow => {
            let base = grow(rng, space, depth - 1, full, params);
            let exponent = if rng.random_bool(PARAM_EXPONENT_PROB) {
                params.push(fresh_value(rng, true));
                ExprNode::Param(params.len() - 1)
            } else {
                grow(rng, space, depth - 1, full, params)
            };
            ExprNode::pow(base, exponent)
        }
        k => {
            let a = grow(rng, space, depth - 1, full, params);
            let b = grow(rng, space, depth - 1, full, params);
            ExprNode::binary(k, a, b)
        }
    }
}

/// Subtree with the values of the parameters it contains, slots renumbered from 0.
fn extract(expr: &ExprNode, params: &[f64], index: usize) -> (ExprNode, Vec<f64>) {
    let mut sub = expr.get(index).expect("index in range").clone();
    let values = sub.canonicalize(params);
    (sub, values)
}

/// Replaces the node at `index` of `(expr, params)` with `(sub, sub_params)`.
pub fn graft(expr: &ExprNode, params: &[f64], index: usize, sub: ExprNode, sub_params: &[f64]) -> (ExprNode, Vec<f64>) {
    // Shift the donor's slots past the recipient's so they can share one vector.
    let offset = params.len();
    let mut shifted = sub;
    shift_slots(&mut shifted, offset);
    let mut child = expr.clone();
    *child.get_mut(index).expect("index in range") = shifted;
    let mut all = params.to_vec();
    all.extend_from_slice(sub_params);
    let values = child.canonicalize(&all);
    (child, values)
}

fn shift_slots(e: &mut ExprNode, offset: usize) {
    match e {
        ExprNode::Param(s) => *s += offset,
        ExprNode::Var(_) => {}
        ExprNode::Op(_, c) => c.iter_mut().for_each(|x| shift_slots(x, offset)),
    }
}

/// Subtree crossover: a random node of `a` is replaced by a random subtree of `b`.
pub fn crossover<R: Rng + ?Sized>(
    rng: &mut R,
    a: (&ExprNode, &[f64]),
    b: (&ExprNode, &[f64]),
    max_nodes: usize,
) -> Option<(ExprNode, Vec<f64>)> {
    for _ in 0..8 {
        let ia = rng.random_range(0..a.0.node_count());
        let ib = rng.random_range(0..b.0.node_count());
        let removed = a.0.get(ia).expect("in range").node_count();
        let (sub, sub_params) = extract(b.0, b.1, ib);
        if a.0.node_count() - removed + sub.node_count() <= max_nodes {
            return Some(graft(a.0, a.1, ia, sub, &sub_params));
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Replace a random subtree with a new random tree of depth at most 3.
    Subtree,
    /// Change an operator's kind in place (same arity).
    Operator,
    /// Collapse an operator subtree to a leaf, or expand a leaf into an operator.
    DemotePromote,
}

pub fn mutate<R: Rng + ?Sized>(rng: &mut R, parent: (&ExprNode, &[f64]), space: &TreeSpace) -> Option<(ExprNode, Vec<f64>)> {
    let kinds = [Mutation::Subtree, Mutation::Operator, Mutation::DemotePromote];
    for _ in 0..8 {
        let m = kinds[rng.random_range(0..kinds.len())];
        if let Some(out) = apply_mutation(rng, m, parent, space) {
            if out.0.node_count() <= space.max_nodes {
                return Some(out);
            }
        }
    }
    None
}

pub fn apply_mutation<R: Rng + ?Sized>(
    rng: &mut R,
    m: Mutation,
    (expr, params): (&ExprNode, &[f64]),
    space: &TreeSpace,
) -> Option<(ExprNode, Vec<f64>)> {
    let n = expr.node_count();
    match m {
        Mutation::Subtree => {
            let idx = rng.random_range(0..n);
            let depth = rng.random_range(1..=3);
            let (sub, sub_params) = random_tree(rng, space, depth, false);
            Some(graft(expr, params, idx, sub, &sub_params))
        }
        Mutation::Operator => {
            let ops: Vec<usize> = (0..n).filter(|&i| !expr.get(i).expect("in range").is_leaf()).collect();
            if ops.is_empty() {
                return None;
            }
            let idx = ops[rng.random_range(0..ops.len())];
            let mut child = expr.clone();
            let ExprNode::Op(kind, children) = child.get_mut(idx).expect("in range") else { unreachable!() };
            let alternatives: Vec<OpKind> =
                space.operators.iter().copied().filter(|k| k.arity() == children.len() && k != kind).collect();
            if alternatives.is_empty() {
                return None;
            }
            *kind = alternatives[rng.random_range(0..alternatives.len())];
            Some((child, params.to_vec()))
        }
        Mutation::DemotePromote => {
            let idx = rng.random_range(0..n);
            let target = expr.get(idx).expect("in range");
            let mut leaf_params = Vec::new();
            if target.is_leaf() {
                let ops = space.binary_ops();
                if ops.is_empty() {
                    return None;
                }
                let kind = ops[rng.random_range(0..ops.len())];
                let (old, old_params) = extract(expr, params, idx);
                let mut p = old_params;
                let other = if kind == OpKind::Pow {
                    p.push(fresh_value(rng, true));
                    ExprNode::Param(p.len() - 1)
                } else {
                    let mut fresh = Vec::new();
                    let mut leaf = random_leaf(rng, space, &mut fresh);
                    shift_slots(&mut leaf, p.len());
                    p.extend(fresh);
                    leaf
                };
                let node = if kind == OpKind::Pow || rng.random_bool(0.5) {
                    ExprNode::binary(kind, old, other)
                } else {
                    ExprNode::binary(kind, other, old)
                };
                Some(graft(expr, params, idx, node, &p))
            } else {
                let leaf = random_leaf(rng, space, &mut leaf_params);
                Some(graft(expr, params, idx, leaf, &leaf_params))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprtree::ExprNode::{Param as P, Var as X};
    use crate::rng::stream;

    fn space() -> TreeSpace {
        TreeSpace { n_features: 2, operators: OpKind::BINARY.to_vec(), max_nodes: 40 }
    }

    #[test]
    fn random_trees_are_valid() {
        let mut rng = stream(1, &[]);
        for depth in 1..=5 {
            for full in [false, true] {
                let (t, p) = random_tree(&mut rng, &space(), depth, full);
                t.validate(Some(2)).unwrap();
                assert_eq!(t.param_count(), p.len());
                assert!(t.depth() <= depth);
            }
        }
    }

    #[test]
    fn graft_carries_donor_values() {
        // p0 * x0 with the x0 replaced by (p0 + x1) from a donor
        let (child, values) = graft(&ExprNode::mul(P(0), X(0)), &[2.0], 2, ExprNode::add(P(0), X(1)), &[5.0]);
        assert_eq!(child, ExprNode::mul(P(0), ExprNode::add(P(1), X(1))));
        assert_eq!(values, vec![2.0, 5.0]);
    }

    #[test]
    fn graft_over_parameter_drops_its_value() {
        let e = ExprNode::add(P(0), ExprNode::mul(P(1), P(2)));
        let (child, values) = graft(&e, &[1.0, 2.0, 3.0], 3, X(0), &[]);
        assert_eq!(child, ExprNode::add(P(0), ExprNode::mul(X(0), P(1))));
        assert_eq!(values, vec![1.0, 3.0]);
    }

    #[test]
    fn operators_keep_trees_valid_and_bounded() {
        let mut rng = stream(2, &[]);
        let s = TreeSpace { max_nodes: 15, ..space() };
        let (mut a, mut pa) = random_tree(&mut rng, &s, 3, true);
        let (b, pb) = random_tree(&mut rng, &s, 3, false);
        for _ in 0..300 {
            if let Some((c, pc)) = crossover(&mut rng, (&a, &pa), (&b, &pb), s.max_nodes) {
                c.validate(Some(2)).unwrap();
                assert_eq!(c.param_count(), pc.len());
                assert!(c.node_count() <= s.max_nodes);
            }
            if let Some((c, pc)) = mutate(&mut rng, (&a, &pa), &s) {
                c.validate(Some(2)).unwrap();
                assert_eq!(c.param_count(), pc.len());
                assert!(c.node_count() <= s.max_nodes);
                a = c;
                pa = pc;
            }
        }
    }

    #[test]
    fn operator_mutation_changes_kind_only() {
        let mut rng = stream(3, &[]);
        let e = ExprNode::div(P(0), X(0));
        let (c, p) = apply_mutation(&mut rng, Mutation::Operator, (&e, &[4.0]), &space()).unwrap();
        let ExprNode::Op(k, ch) = &c else { panic!() };
        assert_ne!(*k, OpKind::Div);
        assert_eq!(ch, &vec![P(0), X(0)]);
        assert_eq!(p, vec![4.0]);
    }
}
