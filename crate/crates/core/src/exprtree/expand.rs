//! Expansion of expressions into sums of monomials `c * x_a^e_a * x_b^e_b ...`.
//!
//! Used to read structure out of evolved expressions (power-law terms,
//! which prior channels a term depends on). Expansion fails on anything
//! that is not a sum of products of powers, e.g. division by a sum.

use std::collections::BTreeMap;

use super::{ExprNode, OpKind};

const MAX_TERMS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    /// Variable index to exponent; zero exponents are never stored.
    pub powers: BTreeMap<usize, f64>,
}

impl Monomial {
    fn constant(c: f64) -> Self {
        Monomial { coef: c, powers: BTreeMap::new() }
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut powers = self.powers.clone();
        for (&v, &e) in &other.powers {
            let entry = powers.entry(v).or_insert(0.0);
            *entry += e;
            if *entry == 0.0 {
                powers.remove(&v);
            }
        }
        Monomial { coef: self.coef * other.coef, powers }
    }

    pub fn exponent(&self, var: usize) -> f64 {
        self.powers.get(&var).copied().unwrap_or(0.0)
    }

    fn key(&self) -> Vec<(usize, u64)> {
        self.powers.iter().map(|(&v, &e)| (v, e.to_bits())).collect()
    }
}

fn merge(terms: Vec<Monomial>) -> Vec<Monomial> {
    let mut out: Vec<Monomial> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.iter_mut().find(|m| m.key() == t.key()) {
            Some(m) => m.coef += t.coef,
            None => out.push(t),
        }
    }
    out.retain(|m| m.coef != 0.0);
    out
}

fn constant_value(terms: &[Monomial]) -> Option<f64> {
    match terms {
        [] => Some(0.0),
        [m] if m.powers.is_empty() => Some(m.coef),
        _ => None,
    }
}

fn product(a: &[Monomial], b: &[Monomial]) -> Option<Vec<Monomial>> {
    if a.len() * b.len() > MAX_TERMS {
        return None;
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x.mul(y));
        }
    }
    Some(merge(out))
}

/// Expands `expr` with the given parameter values into merged monomials.
pub fn expand(expr: &ExprNode, params: &[f64]) -> Option<Vec<Monomial>> {
    match expr {
        ExprNode::Param(s) => Some(merge(vec![Monomial::constant(params[*s])])),
        ExprNode::Var(i) => Some(vec![Monomial { coef: 1.0, powers: BTreeMap::from([(*i, 1.0)]) }]),
        ExprNode::Op(kind, c) => {
            let a = expand(&c[0], params)?;
            match kind {
                OpKind::Neg => Some(a.into_iter().map(|m| Monomial { coef: -m.coef, ..m }).collect()),
                OpKind::Add | OpKind::Sub => {
                    let mut b = expand(&c[1], params)?;
                    if *kind == OpKind::Sub {
                        b.iter_mut().for_each(|m| m.coef = -m.coef);
                    }
                    let mut all = a;
                    all.extend(b);
                    if all.len() > MAX_TERMS {
                        return None;
                    }
                    Some(merge(all))
                }
                OpKind::Mul => product(&a, &expand(&c[1], params)?),
                OpKind::Div => {
                    let b = expand(&c[1], params)?;
                    let [d] = b.as_slice() else { return None };
                    if d.coef == 0.0 {
                        return None;
                    }
                    let inv = Monomial {
                        coef: 1.0 / d.coef,
                        powers: d.powers.iter().map(|(&v, &e)| (v, -e)).collect(),
                    };
                    product(&a, &[inv])
                }
                OpKind::Pow => {
                    let e = constant_value(&expand(&c[1], params)?)?;
                    match a.as_slice() {
                        [] => Some(Vec::new()),
                        [m] => {
                            if m.coef < 0.0 && e.fract() != 0.0 {
                                return None;
                            }
                            let coef = m.coef.powf(e);
                            if !coef.is_finite() {
                                return None;
                            }
                            let powers = m.powers.iter().map(|(&v, &p)| (v, p * e)).filter(|(_, p)| *p != 0.0).collect();
                            Some(vec![Monomial { coef, powers }])
                        }
                        many => {
                            if e.fract() != 0.0 || !(0.0..=6.0).contains(&e) {
                                return None;
                            }
                            let mut acc = vec![Monomial::constant(1.0)];
                            for _ in 0..e as usize {
                                acc = product(&acc, many)?;
                            }
                            Some(acc)
                        }
                    }
                }
            }
        }
    }
}

/// For single-variable expressions: the `(coefficient, exponent)` pairs of
/// `sum c * x^e`, sorted by exponent.
pub fn power_law_terms(expr: &ExprNode, params: &[f64], var: usize) -> Option<Vec<(f64, f64)>> {
    let terms = expand(expr, params)?;
    let mut out = Vec::with_capacity(terms.len());
    for m in terms {
        if m.powers.keys().any(|&v| v != var) {
            return None;
        }
        out.push((m.coef, m.exponent(var)));
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    Some(out)
}
