use std::io::{Read, Write};

use super::engine::GenerationStats;
use super::individual::Individual;
use crate::error::{Error, Result};
use crate::exprtree::{parse, ExprNode};
use crate::fmt_num;

pub const RESULTS_HEADER: [&str; 6] = ["rank", "expr", "complexity", "mse", "fitness", "generation"];

#[derive(Clone, Debug, PartialEq)]
pub struct ReportEntry {
    pub expr: ExprNode,
    pub params: Vec<f64>,
    pub text: String,
    pub complexity: u32,
    pub mse: f64,
    pub fitness: f64,
    pub generation: usize,
}

impl ReportEntry {
    pub fn from_individual(ind: &Individual) -> ReportEntry {
        ReportEntry {
            expr: ind.expr().clone(),
            params: ind.params().to_vec(),
            text: ind.to_text(),
            complexity: ind.complexity(),
            mse: ind.mse().and_then(Result::ok).unwrap_or(f64::INFINITY),
            fitness: ind.fitness().and_then(Result::ok).unwrap_or(f64::INFINITY),
            generation: ind.generation,
        }
    }
}

/// Outcome of a run: the complexity-sorted front plus run diagnostics.
#[derive(Clone, Debug)]
pub struct MmeReport {
    entries: Vec<ReportEntry>,
    pub final_population: Vec<Individual>,
    pub history: Vec<GenerationStats>,
    /// Number of generations in which the population had to be reseeded.
    pub recoveries: usize,
    tau: u32,
}

impl MmeReport {
    pub fn new(
        mut entries: Vec<ReportEntry>,
        final_population: Vec<Individual>,
        history: Vec<GenerationStats>,
        recoveries: usize,
        tau: u32,
    ) -> MmeReport {
        sort_entries(&mut entries);
        MmeReport { entries, final_population, history, recoveries, tau }
    }

    /// Ranked entries: ascending complexity, then ascending MSE.
    pub fn entries(&self) -> &[ReportEntry] {
        &self.entries
    }

    /// The entry with the lowest fitness; ties go to the simpler expression.
    pub fn best(&self) -> Option<&ReportEntry> {
        self.entries.iter().min_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.complexity.cmp(&b.complexity)))
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }
}

pub fn sort_entries(entries: &mut [ReportEntry]) {
    entries.sort_by(|a, b| {
        a.complexity.cmp(&b.complexity).then(a.mse.total_cmp(&b.mse)).then_with(|| a.text.cmp(&b.text))
    });
}

/// Writes `rank,expr,complexity,mse,fitness,generation`, preceded by `# ` comment lines.
pub fn write_results<W: Write>(mut out: W, entries: &[ReportEntry], preamble: &[String]) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for (rank, e) in entries.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            e.text.clone(),
            e.complexity.to_string(),
            fmt_num(e.mse),
            fmt_num(e.fitness),
            e.generation.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R, source: &str) -> Result<Vec<ReportEntry>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Malformed { file: source.into(), line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |m: &str| Error::Malformed { file: source.into(), line, message: m.to_string() };
        let (expr, params) = parse(&rec[1]).map_err(|e| bad(&e.to_string()))?;
        out.push(ReportEntry {
            expr,
            params,
            text: rec[1].to_string(),
            complexity: rec[2].parse().map_err(|_| bad("bad complexity"))?,
            mse: rec[3].parse().map_err(|_| bad("bad mse"))?,
            fitness: rec[4].parse().map_err(|_| bad("bad fitness"))?,
            generation: rec[5].parse().map_err(|_| bad("bad generation"))?,
        });
    }
    Ok(out)
}
