use crate::error::{Error, Result};

/// Tabular regression samples stored column-wise.
///
/// With two target columns the dataset describes a planar vector law. An
/// expression is evaluated once per output axis: for the first component the
/// feature columns are read as stored, for the second each declared vector
/// pair `(a, b)` is swapped, so a variable that means "x component" in the
/// first pass means "y component" in the second. Scalar columns
/// (magnitudes) read the same in both passes.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionDataset {
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
    target_names: Vec<String>,
    targets: Vec<Vec<f64>>,
    vector_pairs: Vec<(usize, usize)>,
}

impl RegressionDataset {
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<Vec<f64>>,
        target_names: Vec<String>,
        targets: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if feature_names.len() != features.len() || target_names.len() != targets.len() {
            return Err(Error::Config("column names do not match column count".into()));
        }
        if targets.is_empty() || targets.len() > 2 {
            return Err(Error::Config(format!("expected 1 or 2 target columns, got {}", targets.len())));
        }
        let rows = targets[0].len();
        if rows == 0 {
            return Err(Error::Config("dataset has no rows".into()));
        }
        for (name, col) in feature_names.iter().zip(&features).chain(target_names.iter().zip(&targets)) {
            if col.len() != rows {
                return Err(Error::Config(format!("column '{name}' has {} rows, expected {rows}", col.len())));
            }
            if let Some(pos) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Config(format!("column '{name}' has a non-finite value at row {pos}")));
            }
        }
        Ok(RegressionDataset { feature_names, features, target_names, targets, vector_pairs: Vec::new() })
    }

    /// Builds from row-major feature rows and a single target column.
    pub fn from_rows(feature_names: Vec<String>, rows: &[Vec<f64>], target_name: &str, target: Vec<f64>) -> Result<Self> {
        let n = feature_names.len();
        let mut features = vec![Vec::with_capacity(rows.len()); n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!("row {i} has {} values, expected {n}", row.len())));
            }
            for (c, v) in row.iter().enumerate() {
                features[c].push(*v);
            }
        }
        Self::new(feature_names, features, vec![target_name.to_string()], vec![target])
    }

    /// Declares feature column pairs that hold the two components of a vector.
    pub fn with_vector_pairs(mut self, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let n = self.features.len();
        if pairs.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
            return Err(Error::Config("vector pair refers to an invalid column".into()));
        }
        self.vector_pairs = pairs;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.targets[0].len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn vector_pairs(&self) -> &[(usize, usize)] {
        &self.vector_pairs
    }

    pub fn feature(&self, index: usize) -> &[f64] {
        &self.features[index]
    }

    pub fn target(&self, index: usize) -> &[f64] {
        &self.targets[index]
    }

    pub fn row(&self, index: usize) -> Vec<f64> {
        self.features.iter().map(|c| c[index]).collect()
    }

    /// Feature columns as read by variables when predicting target `component`.
    pub fn component_view(&self, component: usize) -> Vec<&[f64]> {
        let mut cols: Vec<&[f64]> = self.features.iter().map(Vec::as_slice).collect();
        if component == 1 {
            for &(a, b) in &self.vector_pairs {
                cols.swap(a, b);
            }
        }
        cols
    }

    /// Keeps at most `max_rows` rows, chosen at an even stride. `0` keeps all.
    pub fn subsample(&self, max_rows: usize) -> RegressionDataset {
        let n = self.n_rows();
        if max_rows == 0 || max_rows >= n {
            return self.clone();
        }
        let idx: Vec<usize> = (0..max_rows).map(|k| k * n / max_rows).collect();
        self.select_rows(&idx)
    }

    pub fn select_rows(&self, idx: &[usize]) -> RegressionDataset {
        let pick = |c: &Vec<f64>| idx.iter().map(|&i| c[i]).collect::<Vec<f64>>();
        RegressionDataset {
            feature_names: self.feature_names.clone(),
            features: self.features.iter().map(pick).collect(),
            target_names: self.target_names.clone(),
            targets: self.targets.iter().map(pick).collect(),
            vector_pairs: self.vector_pairs.clone(),
        }
    }

    /// Rows whose feature `column` equals `value`, with that column dropped.
    pub fn filter_by_column(&self, column: usize, value: f64) -> Result<RegressionDataset> {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| self.features[column][i] == value).collect();
        if idx.is_empty() {
            return Err(Error::Config(format!("no rows with {} = {value}", self.feature_names[column])));
        }
        let mut out = self.select_rows(&idx);
        out.features.remove(column);
        out.feature_names.remove(column);
        out.vector_pairs = out
            .vector_pairs
            .into_iter()
            .filter(|&(a, b)| a != column && b != column)
            .map(|(a, b)| (a - (a > column) as usize, b - (b > column) as usize))
            .collect();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(RegressionDataset::new(names(&["x"]), vec![vec![]], names(&["y"]), vec![vec![]]).is_err());
        assert!(RegressionDataset::new(names(&["x"]), vec![vec![1.0]], names(&["y"]), vec![vec![1.0, 2.0]]).is_err());
        assert!(RegressionDataset::new(names(&["x"]), vec![vec![f64::NAN]], names(&["y"]), vec![vec![1.0]]).is_err());
    }

    #[test]
    fn component_view_swaps_pairs() {
        let d = RegressionDataset::new(
            names(&["dx", "dy", "r"]),
            vec![vec![1.0], vec![2.0], vec![3.0]],
            names(&["fx", "fy"]),
            vec![vec![0.0], vec![0.0]],
        )
        .unwrap()
        .with_vector_pairs(vec![(0, 1)])
        .unwrap();
        assert_eq!(d.component_view(0), vec![&[1.0][..], &[2.0], &[3.0]]);
        assert_eq!(d.component_view(1), vec![&[2.0][..], &[1.0], &[3.0]]);
    }

    #[test]
    fn subsample_and_filter() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let attr: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect();
        let d = RegressionDataset::new(names(&["r", "attr"]), vec![x.clone(), attr], names(&["f"]), vec![x]).unwrap();
        assert_eq!(d.subsample(5).feature(0), &[0.0, 2.0, 4.0, 6.0, 8.0]);
        let kin = d.filter_by_column(1, 1.0).unwrap();
        assert_eq!(kin.n_features(), 1);
        assert_eq!(kin.n_rows(), 5);
        assert!(d.filter_by_column(1, 3.0).is_err());
    }
}
