//! Symbolic expression trees shared by both layers of the evolutionary search.
//!
//! A tree is built from operator nodes, variable leaves that read an input
//! column, and parameter leaves. Parameter values live outside the tree in
//! the owning individual's parameter vector; a parameter leaf only records
//! its slot. Every tree kept by this crate numbers its slots in preorder
//! (`canonicalize` restores that after any structural edit), which makes
//! serialization round-trip exactly.

mod eval;
pub mod expand;
mod text;

use std::fmt;

pub use eval::{evaluate, EvalOutcome, InvalidReason, Program};
pub use text::{format_number, parse, serialize, serialize_named, ParseError};

/// Operator kinds available to the structural search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
}

impl OpKind {
    pub const BINARY: [OpKind; 5] = [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div, OpKind::Pow];

    pub fn arity(self) -> usize {
        match self {
            OpKind::Neg => 1,
            _ => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            OpKind::Add => "+",
            OpKind::Sub => "-",
            OpKind::Mul => "*",
            OpKind::Div => "/",
            OpKind::Pow => "^",
            OpKind::Neg => "neg",
        }
    }

    pub fn from_symbol(s: &str) -> Option<OpKind> {
        Some(match s {
            "+" => OpKind::Add,
            "-" => OpKind::Sub,
            "*" => OpKind::Mul,
            "/" => OpKind::Div,
            "^" => OpKind::Pow,
            "neg" => OpKind::Neg,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Pow => "pow",
            OpKind::Neg => "neg",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A node of an expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum ExprNode {
    Op(OpKind, Vec<ExprNode>),
    /// Reads input column `index`.
    Var(usize),
    /// Reads `params[slot]` of the owning individual.
    Param(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("operator {op} expects {expected} children, found {found}")]
    Arity { op: OpKind, expected: usize, found: usize },
    #[error("parameter slots are not unique and contiguous from 0")]
    SlotLayout,
    #[error("variable x{index} is out of range for {features} feature columns")]
    VariableOutOfRange { index: usize, features: usize },
    #[error("expected {expected} parameter values, got {found}")]
    ParamCount { expected: usize, found: usize },
}

impl ExprNode {
    pub fn binary(kind: OpKind, lhs: ExprNode, rhs: ExprNode) -> ExprNode {
        debug_assert_eq!(kind.arity(), 2);
        ExprNode::Op(kind, vec![lhs, rhs])
    }

    pub fn unary(kind: OpKind, child: ExprNode) -> ExprNode {
        debug_assert_eq!(kind.arity(), 1);
        ExprNode::Op(kind, vec![child])
    }

    pub fn add(a: ExprNode, b: ExprNode) -> ExprNode {
        Self::binary(OpKind::Add, a, b)
    }
    pub fn sub(a: ExprNode, b: ExprNode) -> ExprNode {
        Self::binary(OpKind::Sub, a, b)
    }
    pub fn mul(a: ExprNode, b: ExprNode) -> ExprNode {
        Self::binary(OpKind::Mul, a, b)
    }
    pub fn div(a: ExprNode, b: ExprNode) -> ExprNode {
        Self::binary(OpKind::Div, a, b)
    }
    pub fn pow(a: ExprNode, b: ExprNode) -> ExprNode {
        Self::binary(OpKind::Pow, a, b)
    }
    pub fn neg(a: ExprNode) -> ExprNode {
        Self::unary(OpKind::Neg, a)
    }

    pub fn is_leaf(&self) -> bool {
        !matches!(self, ExprNode::Op(..))
    }

    pub fn children(&self) -> &[ExprNode] {
        match self {
            ExprNode::Op(_, c) => c,
            _ => &[],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(ExprNode::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(ExprNode::depth).max().unwrap_or(0)
    }

    /// Number of parameter leaves; equals the slot count for a valid tree.
    pub fn param_count(&self) -> usize {
        match self {
            ExprNode::Param(_) => 1,
            ExprNode::Var(_) => 0,
            ExprNode::Op(_, c) => c.iter().map(ExprNode::param_count).sum(),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            ExprNode::Var(i) => Some(*i),
            ExprNode::Param(_) => None,
            ExprNode::Op(_, c) => c.iter().filter_map(ExprNode::max_var).max(),
        }
    }

    /// Checks arity and slot layout, plus variable range when `features` is given.
    pub fn validate(&self, features: Option<usize>) -> Result<(), TreeError> {
        let mut slots = Vec::new();
        self.validate_inner(features, &mut slots)?;
        slots.sort_unstable();
        if slots.iter().enumerate().any(|(i, &s)| i != s) {
            return Err(TreeError::SlotLayout);
        }
        Ok(())
    }

    fn validate_inner(&self, features: Option<usize>, slots: &mut Vec<usize>) -> Result<(), TreeError> {
        match self {
            ExprNode::Param(s) => slots.push(*s),
            ExprNode::Var(index) => {
                if let Some(n) = features {
                    if *index >= n {
                        return Err(TreeError::VariableOutOfRange { index: *index, features: n });
                    }
                }
            }
            ExprNode::Op(kind, c) => {
                if c.len() != kind.arity() {
                    return Err(TreeError::Arity { op: *kind, expected: kind.arity(), found: c.len() });
                }
                for child in c {
                    child.validate_inner(features, slots)?;
                }
            }
        }
        Ok(())
    }

    /// Renumbers parameter slots in preorder and permutes `params` to match.
    pub fn canonicalize(&mut self, params: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(params.len());
        self.renumber(params, &mut out);
        out
    }

    fn renumber(&mut self, params: &[f64], out: &mut Vec<f64>) {
        match self {
            ExprNode::Param(s) => {
                out.push(params.get(*s).copied().unwrap_or(1.0));
                *s = out.len() - 1;
            }
            ExprNode::Var(_) => {}
            ExprNode::Op(_, c) => {
                for child in c {
                    child.renumber(params, out);
                }
            }
        }
    }

    /// Preorder traversal of node references.
    pub fn preorder(&self) -> Vec<&ExprNode> {
        let mut out = Vec::with_capacity(self.node_count());
        fn walk<'a>(n: &'a ExprNode, out: &mut Vec<&'a ExprNode>) {
            out.push(n);
            for c in n.children() {
                walk(c, out);
            }
        }
        walk(self, &mut out);
        out
    }

    /// The node at preorder position `index`.
    pub fn get(&self, index: usize) -> Option<&ExprNode> {
        self.preorder().into_iter().nth(index)
    }

    /// Mutable access to the node at preorder position `index`.
    pub fn get_mut(&mut self, index: usize) -> Option<&mut ExprNode> {
        fn walk<'a>(n: &'a mut ExprNode, target: usize, counter: &mut usize) -> Option<&'a mut ExprNode> {
            if *counter == target {
                return Some(n);
            }
            *counter += 1;
            if let ExprNode::Op(_, c) = n {
                for child in c.iter_mut() {
                    if let Some(found) = walk(child, target, counter) {
                        return Some(found);
                    }
                }
            }
            None
        }
        let mut counter = 0;
        walk(self, index, &mut counter)
    }

    /// Slots (in preorder) of the parameters that appear in this subtree.
    pub fn param_slots(&self) -> Vec<usize> {
        self.preorder()
            .into_iter()
            .filter_map(|n| match n {
                ExprNode::Param(s) => Some(*s),
                _ => None,
            })
            .collect()
    }

    /// Operator counts, used by structure summaries.
    pub fn op_histogram(&self) -> Vec<(OpKind, usize)> {
        let mut counts: Vec<(OpKind, usize)> = Vec::new();
        for n in self.preorder() {
            if let ExprNode::Op(k, _) = n {
                match counts.iter_mut().find(|(kind, _)| kind == k) {
                    Some(entry) => entry.1 += 1,
                    None => counts.push((*k, 1)),
                }
            }
        }
        counts.sort();
        counts
    }

    /// A string identifying the structure with parameter values erased.
    /// Two trees have equal keys exactly when `structural_equal` holds.
    pub fn structure_key(&self) -> String {
        let mut s = String::new();
        self.write_key(&mut s);
        s
    }

    fn write_key(&self, s: &mut String) {
        use std::fmt::Write;
        match self {
            ExprNode::Param(_) => s.push('p'),
            ExprNode::Var(i) => {
                let _ = write!(s, "x{i}");
            }
            ExprNode::Op(k, c) => {
                s.push('(');
                s.push_str(k.name());
                for child in c {
                    s.push(' ');
                    child.write_key(s);
                }
                s.push(')');
            }
        }
    }
}

/// Per-operator costs used by the complexity measure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostTable {
    pub add: u32,
    pub sub: u32,
    pub mul: u32,
    pub div: u32,
    pub pow: u32,
    pub neg: u32,
    /// Cost of a pow node whose exponent is anything other than a single parameter leaf.
    pub pow_with_operator_exponent: u32,
}

impl Default for CostTable {
    /// Arity costs, with the exponent-is-an-expression power charged 20.
    fn default() -> Self {
        CostTable { add: 2, sub: 2, mul: 2, div: 2, pow: 2, neg: 1, pow_with_operator_exponent: 20 }
    }
}

impl CostTable {
    pub fn cost(&self, kind: OpKind) -> u32 {
        match kind {
            OpKind::Add => self.add,
            OpKind::Sub => self.sub,
            OpKind::Mul => self.mul,
            OpKind::Div => self.div,
            OpKind::Pow => self.pow,
            OpKind::Neg => self.neg,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.pow_with_operator_exponent >= self.pow
    }
}

/// Sum of operator costs; leaves are free.
pub fn complexity(expr: &ExprNode, costs: &CostTable) -> u32 {
    match expr {
        ExprNode::Var(_) | ExprNode::Param(_) => 0,
        ExprNode::Op(kind, c) => {
            let own = match (kind, c.get(1)) {
                (OpKind::Pow, Some(ExprNode::Param(_))) => costs.pow,
                (OpKind::Pow, _) => costs.pow_with_operator_exponent,
                (k, _) => costs.cost(*k),
            };
            own + c.iter().map(|child| complexity(child, costs)).sum::<u32>()
        }
    }
}

/// Tree isomorphism over operator kinds, child order and variable indices.
/// Parameter leaves always match each other.
pub fn structural_equal(a: &ExprNode, b: &ExprNode) -> bool {
    match (a, b) {
        (ExprNode::Param(_), ExprNode::Param(_)) => true,
        (ExprNode::Var(i), ExprNode::Var(j)) => i == j,
        (ExprNode::Op(ka, ca), ExprNode::Op(kb, cb)) => {
            ka == kb && ca.len() == cb.len() && ca.iter().zip(cb).all(|(x, y)| structural_equal(x, y))
        }
        _ => false,
    }
}
