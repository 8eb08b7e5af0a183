//! Fully parenthesized infix text form.
//!
//! Grammar (whitespace is insignificant between tokens):
//!
//! ```text
//! expr := number | "x" digits | "neg(" expr ")" | "(" expr op expr ")"
//! op   := "+" | "-" | "*" | "/" | "^"
//! ```
//!
//! Parameters are written inline as shortest round-trip decimal literals, so
//! parsing a serialized tree recovers both structure and values exactly.
//! Parsed parameters get slots in order of appearance.

use super::{ExprNode, OpKind, TreeError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("syntax error at position {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

pub fn format_number(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor();
    if (-5.0..16.0).contains(&exp) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Serializes with variables named `x0..xN`.
pub fn serialize(expr: &ExprNode, params: &[f64]) -> Result<String, TreeError> {
    let expected = expr.param_count();
    if params.len() != expected {
        return Err(TreeError::ParamCount { expected, found: params.len() });
    }
    let mut out = String::new();
    write_expr(expr, params, &|i| format!("x{i}"), &mut out);
    Ok(out)
}

/// Serializes with caller-chosen variable names; for display only, the result is not parseable.
pub fn serialize_named(expr: &ExprNode, params: &[f64], names: &[String]) -> String {
    let mut out = String::new();
    write_expr(
        expr,
        params,
        &|i| names.get(i).cloned().unwrap_or_else(|| format!("x{i}")),
        &mut out,
    );
    out
}

fn write_expr(expr: &ExprNode, params: &[f64], var: &dyn Fn(usize) -> String, out: &mut String) {
    match expr {
        ExprNode::Param(s) => out.push_str(&format_number(params[*s])),
        ExprNode::Var(i) => out.push_str(&var(*i)),
        ExprNode::Op(OpKind::Neg, c) => {
            out.push_str("neg(");
            write_expr(&c[0], params, var, out);
            out.push(')');
        }
        ExprNode::Op(kind, c) => {
            out.push('(');
            write_expr(&c[0], params, var, out);
            out.push(' ');
            out.push_str(kind.symbol());
            out.push(' ');
            write_expr(&c[1], params, var, out);
            out.push(')');
        }
    }
}

/// Parses the text form back into a tree and its parameter vector.
pub fn parse(text: &str) -> Result<(ExprNode, Vec<f64>), ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, params: Vec::new() };
    let expr = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok((expr, p.params))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    params: Vec<f64>,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        let message = if self.pos >= self.src.len() {
            format!("{message} (end of input)")
        } else {
            message.to_string()
        };
        ParseError { position: self.pos, message }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<ExprNode, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("expected an expression")),
            Some(b'(') => {
                self.pos += 1;
                let lhs = self.expr()?;
                self.skip_ws();
                let kind = match self.peek().and_then(|c| OpKind::from_symbol(&(c as char).to_string())) {
                    Some(k) if k != OpKind::Neg => k,
                    _ => return Err(self.error("expected a binary operator")),
                };
                self.pos += 1;
                let rhs = self.expr()?;
                self.expect(b')')?;
                Ok(ExprNode::binary(kind, lhs, rhs))
            }
            Some(b'n') => {
                if !self.src[self.pos..].starts_with(b"neg(") {
                    return Err(self.error("unknown identifier"));
                }
                self.pos += 4;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(ExprNode::neg(inner))
            }
            Some(b'x') => {
                let start = self.pos;
                self.pos += 1;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                if self.pos == start + 1 {
                    return Err(self.error("expected a variable index after 'x'"));
                }
                let digits = std::str::from_utf8(&self.src[start + 1..self.pos]).expect("ascii");
                let index = digits.parse().map_err(|_| ParseError {
                    position: start,
                    message: "variable index out of range".into(),
                })?;
                Ok(ExprNode::Var(index))
            }
            Some(c) if c == b'-' || c == b'+' || c == b'.' || c.is_ascii_digit() => {
                let start = self.pos;
                self.pos += 1;
                while let Some(c) = self.peek() {
                    let prev = self.src[self.pos - 1];
                    let exp_sign = (c == b'-' || c == b'+') && (prev == b'e' || prev == b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let lit = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                let value: f64 = lit.parse().map_err(|_| ParseError {
                    position: start,
                    message: format!("invalid number literal '{lit}'"),
                })?;
                self.params.push(value);
                Ok(ExprNode::Param(self.params.len() - 1))
            }
            Some(_) => Err(self.error("unexpected character")),
        }
    }
}
