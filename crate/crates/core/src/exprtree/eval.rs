use std::cell::RefCell;

use super::{ExprNode, OpKind};

/// Why an evaluation was rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InvalidReason {
    NonFinite,
    ComplexResult,
    DomainError,
}

impl std::fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InvalidReason::NonFinite => "non_finite",
            InvalidReason::ComplexResult => "complex_result",
            InvalidReason::DomainError => "domain_error",
        })
    }
}

/// Result of evaluating an expression over a set of rows.
#[derive(Clone, Debug, PartialEq)]
pub enum EvalOutcome {
    Values(Vec<f64>),
    Invalid(InvalidReason),
}

impl EvalOutcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, EvalOutcome::Values(_))
    }
}

#[inline]
fn apply(kind: OpKind, a: f64, b: f64) -> Result<f64, InvalidReason> {
    let v = match kind {
        OpKind::Add => a + b,
        OpKind::Sub => a - b,
        OpKind::Mul => a * b,
        OpKind::Div => {
            if b == 0.0 {
                return Err(InvalidReason::DomainError);
            }
            a / b
        }
        OpKind::Pow => {
            if a < 0.0 && b.fract() != 0.0 {
                return Err(InvalidReason::ComplexResult);
            }
            a.powf(b)
        }
        OpKind::Neg => -a,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(InvalidReason::NonFinite)
    }
}

/// Recursively evaluates `expr` on one feature row.
pub fn evaluate(expr: &ExprNode, params: &[f64], row: &[f64]) -> Result<f64, InvalidReason> {
    match expr {
        ExprNode::Param(s) => {
            let v = params[*s];
            if v.is_finite() {
                Ok(v)
            } else {
                Err(InvalidReason::NonFinite)
            }
        }
        ExprNode::Var(i) => {
            let v = row[*i];
            if v.is_finite() {
                Ok(v)
            } else {
                Err(InvalidReason::NonFinite)
            }
        }
        ExprNode::Op(kind, c) => {
            let a = evaluate(&c[0], params, row)?;
            let b = match c.get(1) {
                Some(rhs) => evaluate(rhs, params, row)?,
                None => 0.0,
            };
            apply(*kind, a, b)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Instr {
    Var(usize),
    Param(usize),
    Op(OpKind),
}

/// A postfix compilation of an expression for fast column-wise evaluation.
#[derive(Clone, Debug)]
pub struct Program {
    code: Vec<Instr>,
    n_params: usize,
}

enum Val<'a> {
    Scalar(f64),
    Column(&'a [f64]),
    Owned(Vec<f64>),
}

thread_local! {
    static POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

fn take_buf(n: usize) -> Vec<f64> {
    let mut v = POOL.with(|p| p.borrow_mut().pop()).unwrap_or_default();
    v.clear();
    v.reserve(n);
    v
}

fn give_buf(v: Vec<f64>) {
    POOL.with(|p| {
        let mut p = p.borrow_mut();
        if p.len() < 16 {
            p.push(v);
        }
    });
}

fn check_all(values: &[f64]) -> Result<(), InvalidReason> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(InvalidReason::NonFinite)
    }
}

impl Program {
    pub fn compile(expr: &ExprNode) -> Program {
        let mut code = Vec::with_capacity(expr.node_count());
        fn emit(n: &ExprNode, code: &mut Vec<Instr>) {
            match n {
                ExprNode::Var(i) => code.push(Instr::Var(*i)),
                ExprNode::Param(s) => code.push(Instr::Param(*s)),
                ExprNode::Op(k, c) => {
                    for child in c {
                        emit(child, code);
                    }
                    code.push(Instr::Op(*k));
                }
            }
        }
        emit(expr, &mut code);
        Program { code, n_params: expr.param_count() }
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Evaluates over `n_rows` rows. `columns[i]` is the column read by variable `i`.
    /// The first invalid row invalidates the whole evaluation.
    pub fn eval_columns(&self, params: &[f64], columns: &[&[f64]], n_rows: usize) -> EvalOutcome {
        match self.eval_into(params, columns, n_rows) {
            Ok(v) => EvalOutcome::Values(v),
            Err(r) => EvalOutcome::Invalid(r),
        }
    }

    /// Sum of squared differences against `target`.
    pub fn sse(&self, params: &[f64], columns: &[&[f64]], target: &[f64]) -> Result<f64, InvalidReason> {
        let values = self.eval_into(params, columns, target.len())?;
        let sse = values.iter().zip(target).map(|(v, t)| (v - t) * (v - t)).sum::<f64>();
        give_buf(values);
        if sse.is_finite() {
            Ok(sse)
        } else {
            Err(InvalidReason::NonFinite)
        }
    }

    fn eval_into(&self, params: &[f64], columns: &[&[f64]], n: usize) -> Result<Vec<f64>, InvalidReason> {
        let mut stack: Vec<Val<'_>> = Vec::with_capacity(8);
        let result = self.run(params, columns, n, &mut stack);
        let out = match result {
            Ok(()) => match stack.pop() {
                Some(Val::Scalar(s)) => Ok(vec![s; n]),
                Some(Val::Column(c)) => {
                    let mut b = take_buf(n);
                    b.extend_from_slice(c);
                    check_all(&b).map(|_| b)
                }
                Some(Val::Owned(b)) => Ok(b),
                None => unreachable!("empty program"),
            },
            Err(e) => Err(e),
        };
        for v in stack {
            if let Val::Owned(b) = v {
                give_buf(b);
            }
        }
        out
    }

    fn run<'a>(
        &self,
        params: &[f64],
        columns: &[&'a [f64]],
        n: usize,
        stack: &mut Vec<Val<'a>>,
    ) -> Result<(), InvalidReason> {
        for ins in &self.code {
            match *ins {
                Instr::Param(s) => {
                    let v = params[s];
                    if !v.is_finite() {
                        return Err(InvalidReason::NonFinite);
                    }
                    stack.push(Val::Scalar(v));
                }
                Instr::Var(i) => {
                    let col = columns[i];
                    debug_assert!(col.len() >= n);
                    stack.push(Val::Column(&col[..n]));
                }
                Instr::Op(OpKind::Neg) => {
                    let a = stack.pop().expect("stack underflow");
                    let r = match a {
                        Val::Scalar(s) => Val::Scalar(-s),
                        Val::Column(c) => {
                            let mut b = take_buf(n);
                            b.extend(c.iter().map(|v| -v));
                            check_all(&b)?;
                            Val::Owned(b)
                        }
                        Val::Owned(mut b) => {
                            b.iter_mut().for_each(|v| *v = -*v);
                            Val::Owned(b)
                        }
                    };
                    stack.push(r);
                }
                Instr::Op(kind) => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.pop().expect("stack underflow");
                    let r = binary(kind, a, b, n)?;
                    stack.push(r);
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn at(v: &Val<'_>, i: usize) -> f64 {
    match v {
        Val::Scalar(s) => *s,
        Val::Column(c) => c[i],
        Val::Owned(o) => o[i],
    }
}

fn binary<'a>(kind: OpKind, a: Val<'a>, b: Val<'a>, n: usize) -> Result<Val<'a>, InvalidReason> {
    match (a, b) {
        (Val::Scalar(x), Val::Scalar(y)) => apply(kind, x, y).map(Val::Scalar),
        (Val::Owned(mut x), other) => {
            let mut res = Ok(());
            for i in 0..n {
                match apply(kind, x[i], at(&other, i)) {
                    Ok(v) => x[i] = v,
                    Err(e) => {
                        res = Err(e);
                        break;
                    }
                }
            }
            recycle(other);
            match res {
                Ok(()) => Ok(Val::Owned(x)),
                Err(e) => {
                    give_buf(x);
                    Err(e)
                }
            }
        }
        (other, Val::Owned(mut y)) => {
            for i in 0..n {
                match apply(kind, at(&other, i), y[i]) {
                    Ok(v) => y[i] = v,
                    Err(e) => {
                        give_buf(y);
                        return Err(e);
                    }
                }
            }
            Ok(Val::Owned(y))
        }
        (a, b) => {
            let mut out = take_buf(n);
            for i in 0..n {
                match apply(kind, at(&a, i), at(&b, i)) {
                    Ok(v) => out.push(v),
                    Err(e) => {
                        give_buf(out);
                        return Err(e);
                    }
                }
            }
            Ok(Val::Owned(out))
        }
    }
}

fn recycle(v: Val<'_>) {
    if let Val::Owned(b) = v {
        give_buf(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprtree::ExprNode::{Param as P, Var as X};

    fn lj() -> ExprNode {
        ExprNode::sub(
            ExprNode::div(P(0), ExprNode::pow(X(0), P(1))),
            ExprNode::div(P(2), ExprNode::pow(X(0), P(3))),
        )
    }

    #[test]
    fn constant_leaf() {
        assert_eq!(evaluate(&P(0), &[3.5], &[]), Ok(3.5));
    }

    #[test]
    fn two_term_law_at_one_tenth() {
        // 1.2e-10 / 1e-12 - 2.2e-5 / 1e-6 = 120 - 22
        let v = evaluate(&lj(), &[1.2e-10, 12.0, 2.2e-5, 6.0], &[0.1]).unwrap();
        assert!((v - 98.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn sqrt_of_negative_is_complex() {
        let e = ExprNode::pow(X(0), P(0));
        assert_eq!(evaluate(&e, &[0.5], &[-1.0]), Err(InvalidReason::ComplexResult));
        // integer exponents of negative bases are real
        assert_eq!(evaluate(&e, &[2.0], &[-3.0]), Ok(9.0));
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        let e = ExprNode::div(P(0), X(0));
        assert_eq!(evaluate(&e, &[1.0], &[0.0]), Err(InvalidReason::DomainError));
    }

    #[test]
    fn overflow_is_non_finite() {
        let e = ExprNode::pow(X(0), P(0));
        assert_eq!(evaluate(&e, &[400.0], &[10.0]), Err(InvalidReason::NonFinite));
        let e = ExprNode::pow(X(0), P(0));
        assert_eq!(evaluate(&e, &[-1.0], &[0.0]), Err(InvalidReason::NonFinite));
    }

    #[test]
    fn column_evaluation_matches_rowwise() {
        let e = ExprNode::add(
            lj(),
            ExprNode::mul(ExprNode::neg(X(1)), ExprNode::sub(X(0), X(1))),
        );
        let params = [1.2e-10, 12.0, 2.2e-5, 6.0];
        let x0: Vec<f64> = (0..50).map(|i| 0.07 + 0.01 * i as f64).collect();
        let x1: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let prog = Program::compile(&e);
        let EvalOutcome::Values(cols) = prog.eval_columns(&params, &[&x0, &x1], 50) else {
            panic!("invalid");
        };
        for i in 0..50 {
            let row = evaluate(&e, &params, &[x0[i], x1[i]]).unwrap();
            assert_eq!(row, cols[i]);
        }
    }

    #[test]
    fn column_evaluation_reports_invalid() {
        let e = ExprNode::div(P(0), X(0));
        let prog = Program::compile(&e);
        let x = [1.0, 0.0, 2.0];
        assert_eq!(prog.eval_columns(&[1.0], &[&x], 3), EvalOutcome::Invalid(InvalidReason::DomainError));
        let e = ExprNode::pow(X(0), P(0));
        let prog = Program::compile(&e);
        let x = [1.0, -2.0];
        assert_eq!(prog.eval_columns(&[0.5], &[&x], 2), EvalOutcome::Invalid(InvalidReason::ComplexResult));
    }

    #[test]
    fn scalar_only_program_broadcasts() {
        let prog = Program::compile(&ExprNode::mul(P(0), P(1)));
        assert_eq!(prog.eval_columns(&[2.0, 3.0], &[], 3), EvalOutcome::Values(vec![6.0; 3]));
        let t = [6.0, 7.0, 5.0];
        assert_eq!(prog.sse(&[2.0, 3.0], &[], &t), Ok(2.0));
    }
}
