//! Per-column min/max scaling to [0, 1].

use crate::error::{Error, Result};
use crate::fmt_num;
use crate::mme::RegressionDataset;

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationRecord {
    pub behavior: String,
    /// Identifiers of the runs the ranges were fitted on.
    pub sources: Vec<String>,
    pub columns: Vec<ColumnRange>,
}

impl NormalizationRecord {
    /// Fits ranges on `columns`; a constant column is an error.
    pub fn fit(behavior: &str, sources: Vec<String>, names: &[String], columns: &[&[f64]]) -> Result<NormalizationRecord> {
        if names.len() != columns.len() {
            return Err(Error::Config("normalization: names and columns differ in length".into()));
        }
        let mut out = Vec::with_capacity(columns.len());
        for (name, col) in names.iter().zip(columns) {
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(min.is_finite() && max.is_finite()) {
                return Err(Error::Numerical(format!("column '{name}' is empty or not finite")));
            }
            if max <= min {
                return Err(Error::Numerical(format!("column '{name}' is constant ({}); cannot scale it", fmt_num(min))));
            }
            out.push(ColumnRange { name: name.clone(), min, max });
        }
        Ok(NormalizationRecord { behavior: behavior.to_string(), sources, columns: out })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn normalize_value(&self, column: usize, v: f64) -> f64 {
        let c = &self.columns[column];
        (v - c.min) / (c.max - c.min)
    }

    pub fn denormalize_value(&self, column: usize, u: f64) -> f64 {
        let c = &self.columns[column];
        c.min + u * (c.max - c.min)
    }

    /// Scales a full row in place.
    pub fn normalize_row(&self, row: &mut [f64]) {
        for (i, v) in row.iter_mut().enumerate() {
            *v = self.normalize_value(i, *v);
        }
    }

    fn check(&self, data: &RegressionDataset) -> Result<()> {
        if data.n_features() != self.len() {
            return Err(Error::Config(format!(
                "normalization covers {} columns, dataset has {} features",
                self.len(),
                data.n_features()
            )));
        }
        Ok(())
    }

    fn map(&self, data: &RegressionDataset, f: impl Fn(usize, f64) -> f64) -> Result<RegressionDataset> {
        self.check(data)?;
        let features = (0..data.n_features()).map(|c| data.feature(c).iter().map(|&v| f(c, v)).collect()).collect();
        let targets = (0..data.n_targets()).map(|k| data.target(k).to_vec()).collect();
        RegressionDataset::new(data.feature_names().to_vec(), features, data.target_names().to_vec(), targets)?
            .with_vector_pairs(data.vector_pairs().to_vec())
    }

    /// Scales every feature column; targets are left as they are.
    pub fn normalize(&self, data: &RegressionDataset) -> Result<RegressionDataset> {
        self.map(data, |c, v| self.normalize_value(c, v))
    }

    pub fn denormalize(&self, data: &RegressionDataset) -> Result<RegressionDataset> {
        self.map(data, |c, v| self.denormalize_value(c, v))
    }

    /// Sidecar text form.
    pub fn to_text(&self) -> String {
        let mut s = String::from("normalization v1\n");
        s.push_str(&format!("behavior {}\n", self.behavior));
        s.push_str(&format!("sources {}\n", self.sources.join(" ")));
        for c in &self.columns {
            s.push_str(&format!("column {} {} {}\n", c.name, fmt_num(c.min), fmt_num(c.max)));
        }
        s
    }

    pub fn from_text(text: &str, source: &str) -> Result<NormalizationRecord> {
        let bad = |line: usize, m: &str| Error::Malformed { file: source.into(), line, message: m.into() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, "normalization v1")) => {}
            _ => return Err(bad(1, "expected 'normalization v1'")),
        }
        let mut rec = NormalizationRecord { behavior: String::new(), sources: Vec::new(), columns: Vec::new() };
        for (n, line) in lines {
            let mut parts = line.split_whitespace();
            match parts.next() {
                None => {}
                Some("behavior") => rec.behavior = parts.next().unwrap_or_default().to_string(),
                Some("sources") => rec.sources = parts.map(str::to_string).collect(),
                Some("column") => {
                    let f: Vec<&str> = parts.collect();
                    if f.len() != 3 {
                        return Err(bad(n, "column needs a name, min and max"));
                    }
                    let min: f64 = f[1].parse().map_err(|_| bad(n, "bad min"))?;
                    let max: f64 = f[2].parse().map_err(|_| bad(n, "bad max"))?;
                    if !(max > min) {
                        return Err(bad(n, "max must exceed min"));
                    }
                    rec.columns.push(ColumnRange { name: f[0].to_string(), min, max });
                }
                Some(k) => return Err(bad(n, &format!("unknown key '{k}'"))),
            }
        }
        Ok(rec)
    }
}
