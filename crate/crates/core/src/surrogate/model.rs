//! Trained edge model and its text artifact.
//!
//! ```text
//! mlp v1
//! behavior hex
//! aggregation sum
//! transform identity
//! edge_attr 0
//! sizes 1 300 300 2
//! normalization 3
//! <normalization record, 3 lines>
//! weights 0
//! <one row of the (out x in) matrix per line>
//! bias 0
//! <one line>
//! ...
//! ```

use std::io::Write;

use ndarray::{Array1, Array2};

use super::mlp::Mlp;
use super::train::EpochLoss;
use crate::datasets::NormalizationRecord;
use crate::error::{Error, Result};
use crate::fmt_num;
use crate::swarmsim::{Behavior, Vec2};

/// How per-neighbour messages combine into an agent's acceleration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregation {
    Sum,
    Mean,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Option<Aggregation> {
        match s {
            "sum" => Some(Aggregation::Sum),
            "mean" => Some(Aggregation::Mean),
            _ => None,
        }
    }
}

/// Combines messages; an empty neighbourhood gives zero.
pub fn aggregate_node(messages: &[Vec2], aggregation: Aggregation) -> Vec2 {
    let mut s = [0.0, 0.0];
    for m in messages {
        s[0] += m[0];
        s[1] += m[1];
    }
    match aggregation {
        Aggregation::Mean if !messages.is_empty() => {
            let n = messages.len() as f64;
            [s[0] / n, s[1] / n]
        }
        _ => s,
    }
}

/// Elementwise map applied to targets before fitting; predictions go through the inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetTransform {
    Identity,
    /// `u = asinh(y / scale)`: near-linear below `scale`, logarithmic above.
    Asinh { scale: f64 },
}

impl TargetTransform {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetTransform::Asinh { scale } if !(scale > 0.0 && scale.is_finite()) => {
                Err(Error::Config(format!("asinh scale must be positive, got {scale}")))
            }
            _ => Ok(()),
        }
    }

    pub fn forward(&self, y: f64) -> f64 {
        match *self {
            TargetTransform::Identity => y,
            TargetTransform::Asinh { scale } => (y / scale).asinh(),
        }
    }

    pub fn inverse(&self, u: f64) -> f64 {
        match *self {
            TargetTransform::Identity => u,
            TargetTransform::Asinh { scale } => scale * u.sinh(),
        }
    }

    fn to_text(self) -> String {
        match self {
            TargetTransform::Identity => "identity".into(),
            TargetTransform::Asinh { scale } => format!("asinh {}", fmt_num(scale)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeModel {
    pub behavior: Behavior,
    pub net: Mlp,
    /// Ranges of the network inputs, including the edge attribute column when present.
    pub norm: NormalizationRecord,
    pub transform: TargetTransform,
    pub uses_edge_attr: bool,
    pub aggregation: Aggregation,
}

impl EdgeModel {
    /// Number of prior features expected by [`EdgeModel::predict`].
    pub fn n_features(&self) -> usize {
        self.net.input_size() - usize::from(self.uses_edge_attr)
    }

    fn input_row(&self, features: &[f64], edge_attr: Option<u8>) -> Result<Vec<f64>> {
        if features.len() != self.n_features() {
            return Err(Error::Config(format!("model expects {} features, got {}", self.n_features(), features.len())));
        }
        let mut row = features.to_vec();
        match (self.uses_edge_attr, edge_attr) {
            (true, Some(a)) => row.push(f64::from(a)),
            (false, None) => {}
            (true, None) => return Err(Error::Config("model needs an edge attribute".into())),
            (false, Some(_)) => return Err(Error::Config("model takes no edge attribute".into())),
        }
        self.norm.normalize_row(&mut row);
        Ok(row)
    }

    /// Message for one edge from raw (unnormalized) prior features.
    pub fn predict(&self, features: &[f64], edge_attr: Option<u8>) -> Result<Vec2> {
        let out = self.net.forward(&self.input_row(features, edge_attr)?)?;
        Ok([self.transform.inverse(out[0]), self.transform.inverse(out[1])])
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>], edge_attr: Option<u8>) -> Result<Vec<Vec2>> {
        let width = self.net.input_size();
        let mut x = Array2::<f64>::zeros((rows.len(), width));
        for (i, r) in rows.iter().enumerate() {
            for (c, v) in self.input_row(r, edge_attr)?.into_iter().enumerate() {
                x[[i, c]] = v;
            }
        }
        let out = self.net.forward_batch(x.view());
        Ok(out.rows().into_iter().map(|o| [self.transform.inverse(o[0]), self.transform.inverse(o[1])]).collect())
    }

    pub fn write<W: Write>(&self, mut w: W, header_lines: &[String]) -> Result<()> {
        for h in header_lines {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "mlp v1")?;
        writeln!(w, "behavior {}", self.behavior.name())?;
        writeln!(w, "aggregation {}", self.aggregation.name())?;
        writeln!(w, "transform {}", self.transform.to_text())?;
        writeln!(w, "edge_attr {}", u8::from(self.uses_edge_attr))?;
        let sizes: Vec<String> = self.net.sizes().iter().map(usize::to_string).collect();
        writeln!(w, "sizes {}", sizes.join(" "))?;
        let norm = self.norm.to_text();
        writeln!(w, "normalization {}", norm.lines().count())?;
        w.write_all(norm.as_bytes())?;
        let row = |v: &mut dyn Iterator<Item = &f64>| v.map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ");
        for (l, (wt, b)) in self.net.weights.iter().zip(&self.net.biases).enumerate() {
            writeln!(w, "weights {l}")?;
            for r in wt.rows() {
                writeln!(w, "{}", row(&mut r.iter()))?;
            }
            writeln!(w, "bias {l}")?;
            writeln!(w, "{}", row(&mut b.iter()))?;
        }
        Ok(())
    }

    pub fn read(text: &str, source: &str) -> Result<EdgeModel> {
        let mut cur = Cursor::new(text, source);
        let bad = |line: usize, m: String| Error::Malformed { file: source.into(), line, message: m };
        let (n, magic) = cur.next("header")?;
        if magic != "mlp v1" {
            return Err(bad(n, "expected 'mlp v1'".into()));
        }
        let (n, b) = cur.keyed("behavior")?;
        let behavior: Behavior = b.parse().map_err(|_| bad(n, format!("unknown behavior '{b}'")))?;
        let (n, a) = cur.keyed("aggregation")?;
        let aggregation = Aggregation::parse(&a).ok_or_else(|| bad(n, format!("unknown aggregation '{a}'")))?;
        let (n, t) = cur.keyed("transform")?;
        let transform = match t.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["identity"] => TargetTransform::Identity,
            ["asinh", s] => TargetTransform::Asinh { scale: s.parse().map_err(|_| bad(n, "bad asinh scale".into()))? },
            _ => return Err(bad(n, format!("unknown transform '{t}'"))),
        };
        let (n, e) = cur.keyed("edge_attr")?;
        let uses_edge_attr = match e.as_str() {
            "0" => false,
            "1" => true,
            _ => return Err(bad(n, "edge_attr must be 0 or 1".into())),
        };
        let (n, s) = cur.keyed("sizes")?;
        let sizes: Vec<usize> = s
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad(n, "bad layer sizes".into()))?;
        if sizes.len() < 2 {
            return Err(bad(n, "need at least two layer sizes".into()));
        }
        let (n, c) = cur.keyed("normalization")?;
        let count: usize = c.parse().map_err(|_| bad(n, "bad normalization line count".into()))?;
        let mut norm_text = String::new();
        for _ in 0..count {
            norm_text.push_str(cur.next("normalization line")?.1);
            norm_text.push('\n');
        }
        let norm = NormalizationRecord::from_text(&norm_text, source)?;
        if norm.len() != sizes[0] {
            return Err(bad(n, format!("normalization has {} columns, network input is {}", norm.len(), sizes[0])));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, pair) in sizes.windows(2).enumerate() {
            let (inp, out) = (pair[0], pair[1]);
            let (n, k) = cur.keyed("weights")?;
            if k != l.to_string() {
                return Err(bad(n, format!("expected weights {l}")));
            }
            let mut flat = Vec::with_capacity(inp * out);
            for _ in 0..out {
                flat.extend(cur.row(inp)?);
            }
            weights.push(Array2::from_shape_vec((out, inp), flat).expect("sized above"));
            let (n, k) = cur.keyed("bias")?;
            if k != l.to_string() {
                return Err(bad(n, format!("expected bias {l}")));
            }
            biases.push(Array1::from(cur.row(out)?));
        }
        if let Some(n) = cur.remaining() {
            return Err(bad(n, "trailing content after the last layer".into()));
        }
        let net = Mlp::from_parts(weights, biases)?;
        Ok(EdgeModel { behavior, net, norm, transform, uses_edge_attr, aggregation })
    }
}

/// Line reader over the non-comment lines of a model file.
struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    source: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, source: &'a str) -> Cursor<'a> {
        let lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.starts_with('#')).collect();
        Cursor { lines, pos: 0, source }
    }

    fn remaining(&self) -> Option<usize> {
        self.lines.get(self.pos).map(|l| l.0)
    }

    fn bad(&self, line: usize, message: String) -> Error {
        Error::Malformed { file: self.source.into(), line, message }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.lines.get(self.pos) {
            Some(&l) => {
                self.pos += 1;
                Ok(l)
            }
            None => Err(self.bad(0, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, String)> {
        let (n, l) = self.next(key)?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok((n, v.to_string())),
            _ => Err(self.bad(n, format!("expected '{key} ...'"))),
        }
    }

    fn row(&mut self, want: usize) -> Result<Vec<f64>> {
        let (n, l) = self.next("weight row")?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| self.bad(n, "bad number".into()))?;
        if v.len() != want {
            return Err(self.bad(n, format!("row has {} values, expected {want}", v.len())));
        }
        Ok(v)
    }
}

pub fn write_loss_trace<W: Write>(mut w: W, trace: &[EpochLoss], header_lines: &[String]) -> Result<()> {
    for h in header_lines {
        writeln!(w, "# {h}")?;
    }
    writeln!(w, "epoch,train_loss,val_loss")?;
    for e in trace {
        writeln!(w, "{},{},{}", e.epoch, fmt_num(e.train_loss), fmt_num(e.val_loss))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn model(transform: TargetTransform, attr: bool) -> EdgeModel {
        let width = 2 + usize::from(attr);
        let mut names = vec!["a".to_string(), "b".to_string()];
        let mut cols = vec![vec![0.0, 1.0], vec![-2.0, 2.0]];
        if attr {
            names.push("edge_attr".into());
            cols.push(vec![1.0, 2.0]);
        }
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        EdgeModel {
            behavior: Behavior::Square,
            net: Mlp::new_random(&[width, 5, 2], &mut stream(9, &[])).unwrap(),
            norm: NormalizationRecord::fit("square", vec!["run0".into()], &names, &refs).unwrap(),
            transform,
            uses_edge_attr: attr,
            aggregation: Aggregation::Sum,
        }
    }

    #[test]
    fn file_round_trip_is_exact() {
        for (t, attr) in [(TargetTransform::Identity, false), (TargetTransform::Asinh { scale: 2.5 }, true)] {
            let m = model(t, attr);
            let mut buf = Vec::new();
            m.write(&mut buf, &["seed=1".into()]).unwrap();
            let back = EdgeModel::read(std::str::from_utf8(&buf).unwrap(), "m.txt").unwrap();
            assert_eq!(back, m);
            let attr = attr.then_some(2);
            assert_eq!(back.predict(&[0.3, 0.1], attr).unwrap(), m.predict(&[0.3, 0.1], attr).unwrap());
        }
    }

    #[test]
    fn truncated_file_rejected() {
        let mut buf = Vec::new();
        model(TargetTransform::Identity, false).write(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        assert!(matches!(EdgeModel::read(&cut, "m"), Err(Error::Malformed { .. })));
    }

    #[test]
    fn edge_attr_must_match() {
        let m = model(TargetTransform::Identity, true);
        assert!(m.predict(&[0.1, 0.2], None).is_err());
        assert!(model(TargetTransform::Identity, false).predict(&[0.1, 0.2], Some(1)).is_err());
    }

    #[test]
    fn batch_matches_single() {
        let m = model(TargetTransform::Asinh { scale: 0.5 }, false);
        let rows = vec![vec![0.1, 0.2], vec![0.9, -1.0]];
        let batch = m.predict_batch(&rows, None).unwrap();
        for (r, b) in rows.iter().zip(&batch) {
            let s = m.predict(r, None).unwrap();
            assert!((s[0] - b[0]).abs() < 1e-12 && (s[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_inverts() {
        let t = TargetTransform::Asinh { scale: 3.0 };
        for y in [-1e3, -0.5, 0.0, 2.0, 1.7e3] {
            assert!((t.inverse(t.forward(y)) - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn aggregation() {
        let m = [[1.0, 2.0], [3.0, -4.0]];
        assert_eq!(aggregate_node(&m, Aggregation::Sum), [4.0, -2.0]);
        assert_eq!(aggregate_node(&m, Aggregation::Mean), [2.0, -1.0]);
        assert_eq!(aggregate_node(&[], Aggregation::Mean), [0.0, 0.0]);
    }
}
