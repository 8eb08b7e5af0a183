//! Regression dataset CSV.
//!
//! ```text
//! # schema=swarm-symreg/v1 behavior=hex features=1 targets=1 pairs=
//! # <free-form metadata lines>
//! r,force
//! 0.1,98
//! ```
//!
//! `pairs` lists the vector-channel index pairs (`0:1,2:3`) that swap for the
//! second target component.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::fmt_num;
use crate::mme::RegressionDataset;
use crate::table::{for_each_row, malformed, num};

pub const SCHEMA: &str = "swarm-symreg/v1";

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub behavior: String,
    /// Remaining comment lines, without the leading `# `.
    pub comments: Vec<String>,
}

pub fn write_dataset<W: Write>(mut out: W, data: &RegressionDataset, behavior: &str, comments: &[String]) -> Result<()> {
    let pairs: Vec<String> = data.vector_pairs().iter().map(|(a, b)| format!("{a}:{b}")).collect();
    writeln!(
        out,
        "# schema={SCHEMA} behavior={behavior} features={} targets={} pairs={}",
        data.n_features(),
        data.n_targets(),
        pairs.join(",")
    )?;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = data.feature_names().iter().chain(data.target_names()).map(String::as_str).collect();
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for i in 0..data.n_rows() {
        rec.clear();
        rec.extend((0..data.n_features()).map(|c| fmt_num(data.feature(c)[i])));
        rec.extend((0..data.n_targets()).map(|k| fmt_num(data.target(k)[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

struct Schema {
    behavior: String,
    features: usize,
    targets: usize,
    pairs: Vec<(usize, usize)>,
}

fn parse_schema(line: &str, source: &str) -> Result<Schema> {
    let bad = |m: &str| malformed(source, 1, m);
    let body = line.strip_prefix('#').map(str::trim).ok_or_else(|| bad("missing schema line"))?;
    let mut s = Schema { behavior: String::new(), features: 0, targets: 0, pairs: Vec::new() };
    let mut version = None;
    for kv in body.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(&format!("bad schema token '{kv}'")))?;
        match k {
            "schema" => version = Some(v.to_string()),
            "behavior" => s.behavior = v.to_string(),
            "features" => s.features = v.parse().map_err(|_| bad("bad feature count"))?,
            "targets" => s.targets = v.parse().map_err(|_| bad("bad target count"))?,
            "pairs" if v.is_empty() => {}
            "pairs" => {
                for p in v.split(',') {
                    let (a, b) = p.split_once(':').ok_or_else(|| bad("bad pair"))?;
                    s.pairs.push((a.parse().map_err(|_| bad("bad pair"))?, b.parse().map_err(|_| bad("bad pair"))?));
                }
            }
            _ => return Err(bad(&format!("unknown schema key '{k}'"))),
        }
    }
    match version.as_deref() {
        Some(SCHEMA) => Ok(s),
        Some(v) => Err(bad(&format!("unsupported schema '{v}' (expected {SCHEMA})"))),
        None => Err(bad("missing schema line")),
    }
}

pub fn read_dataset<R: Read>(input: R, source: &str) -> Result<(RegressionDataset, DatasetMeta)> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let schema = parse_schema(first.trim_end(), source)?;
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    let text = String::from_utf8(rest).map_err(|_| malformed(source, 0, "file is not UTF-8"))?;
    let comments: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string())
        .collect();
    let header_line: &str = text.lines().find(|l| !l.starts_with('#')).ok_or_else(|| malformed(source, 2, "no header"))?;
    let names: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
    let width = schema.features + schema.targets;
    if names.len() != width {
        return Err(malformed(source, 2 + comments.len(), &format!("header has {} columns, schema says {width}", names.len())));
    }
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); width];
    // the schema line was consumed, so shift reported line numbers by one
    for_each_row(text.as_bytes(), source, &header, |line, rec| {
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(num(rec, c, source, line + 1)?);
        }
        Ok(())
    })?;
    let targets = cols.split_off(schema.features);
    let data = RegressionDataset::new(
        names[..schema.features].to_vec(),
        cols,
        names[schema.features..].to_vec(),
        targets,
    )
    .map_err(|e| match e {
        Error::Config(m) => malformed(source, 0, &m),
        other => other,
    })?
    .with_vector_pairs(schema.pairs)?;
    Ok((data, DatasetMeta { behavior: schema.behavior, comments }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RegressionDataset {
        RegressionDataset::new(
            vec!["dx".into(), "dy".into(), "inv".into()],
            vec![vec![0.1, -0.2], vec![0.3, 1e-7], vec![2.0, 4.0]],
            vec!["ax".into(), "ay".into()],
            vec![vec![1.5, -2.0], vec![0.0, 7e20]],
        )
        .unwrap()
        .with_vector_pairs(vec![(0, 1)])
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let d = sample();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d, "boids", &["seed=3".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# schema=swarm-symreg/v1 behavior=boids features=3 targets=2 pairs=0:1\n# seed=3\ndx,dy,inv,ax,ay\n"));
        let (back, meta) = read_dataset(buf.as_slice(), "d.csv").unwrap();
        assert_eq!(meta.behavior, "boids");
        assert_eq!(meta.comments, vec!["seed=3".to_string()]);
        assert_eq!(back.vector_pairs(), &[(0, 1)]);
        for c in 0..3 {
            assert_eq!(back.feature(c), d.feature(c));
        }
        assert_eq!(back.target(1), d.target(1));
    }

    #[test]
    fn rejects_missing_or_wrong_schema() {
        assert!(read_dataset("r,f\n1,2\n".as_bytes(), "x").is_err());
        let other = "# schema=swarm-symreg/v9 behavior=hex features=1 targets=1 pairs=\nr,f\n1,2\n";
        assert!(read_dataset(other.as_bytes(), "x").unwrap_err().to_string().contains("v9"));
    }

    #[test]
    fn bad_cell_reports_line() {
        let text = "# schema=swarm-symreg/v1 behavior=hex features=1 targets=1 pairs=\nr,f\n0.1,2\n0.2,nope\n";
        match read_dataset(text.as_bytes(), "d.csv").unwrap_err() {
            Error::Malformed { line, .. } => assert_eq!(line, 4),
            e => panic!("{e}"),
        }
    }
}
