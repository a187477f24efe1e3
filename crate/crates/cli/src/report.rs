//! Report tables and their text / JSON renderings.
//!
//! Numbers are rounded to two decimals before either rendering, so both
//! carry identical values.

use serde::Serialize;

use mdpattern_core::similarity::{round2, Metric, SimilarityMatrix};
use mdpattern_core::MdAnalysis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Stats,
    PatternSim,
    ExprSim,
    Coverage,
    Verify,
}

impl From<Metric> for TableKind {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Pattern => TableKind::PatternSim,
            Metric::Expression => TableKind::ExprSim,
            Metric::Coverage => TableKind::Coverage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub arch: String,
    pub expressions: u64,
    pub patterns: u64,
    pub average: Option<f64>,
}

impl StatsRow {
    pub fn from_analysis(a: &MdAnalysis) -> StatsRow {
        let (e, p) = (a.expr_count(), a.pattern_count() as u64);
        StatsRow {
            arch: a.arch_name.clone(),
            expressions: e,
            patterns: p,
            average: (p > 0).then(|| round2(e as f64 / p as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRow {
    pub row: String,
    pub col: String,
    pub count: u64,
    pub pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub arch: String,
    pub expressions: u64,
    pub missing: u64,
    pub extra: u64,
    pub changed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ReportBody {
    Stats { rows: Vec<StatsRow> },
    Pairs { archs: Vec<String>, cells: Vec<CellRow> },
    Verify { rows: Vec<VerifyRow> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub table: TableKind,
    #[serde(flatten)]
    pub body: ReportBody,
}

impl Report {
    pub fn stats(analyses: &[MdAnalysis]) -> Report {
        Report {
            table: TableKind::Stats,
            body: ReportBody::Stats {
                rows: analyses.iter().map(StatsRow::from_analysis).collect(),
            },
        }
    }

    pub fn matrix(m: &SimilarityMatrix) -> Report {
        Report {
            table: m.metric.into(),
            body: ReportBody::Pairs {
                archs: m.archs.clone(),
                cells: m
                    .cells
                    .iter()
                    .map(|c| CellRow {
                        row: c.row.clone(),
                        col: c.col.clone(),
                        count: c.count,
                        pct: c.pct.map(round2),
                    })
                    .collect(),
            },
        }
    }

    pub fn verify(rows: Vec<VerifyRow>) -> Report {
        Report {
            table: TableKind::Verify,
            body: ReportBody::Verify { rows },
        }
    }

    fn title(&self) -> &'static str {
        match self.table {
            TableKind::Stats => "RTL expressions and patterns",
            TableKind::PatternSim => "Common patterns (pattern similarity)",
            TableKind::ExprSim => "Expressions generated by common patterns (expression similarity)",
            TableKind::Coverage => "Target expressions generated from source patterns (rows: source, columns: target)",
            TableKind::Verify => "Split/recombine verification",
        }
    }

    pub fn to_text(&self) -> String {
        let table = match &self.body {
            ReportBody::Stats { rows } => {
                let mut t = vec![vec!["Arch".into(), "#Expr (E)".into(), "#Patterns (P)".into(), "Average (E/P)".into()]];
                for r in rows {
                    t.push(vec![
                        r.arch.clone(),
                        r.expressions.to_string(),
                        r.patterns.to_string(),
                        r.average.map_or("-".into(), |a| format!("{a:.2}")),
                    ]);
                }
                t
            }
            ReportBody::Verify { rows } => {
                let mut t = vec![vec!["Arch".into(), "#Expr".into(), "Missing".into(), "Extra".into(), "Changed".into()]];
                for r in rows {
                    t.push(vec![
                        r.arch.clone(),
                        r.expressions.to_string(),
                        r.missing.to_string(),
                        r.extra.to_string(),
                        r.changed.to_string(),
                    ]);
                }
                t
            }
            ReportBody::Pairs { archs, cells } => pair_grid(self.table, archs, cells),
        };
        format!("{}\n{}", self.title(), align(&table))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

fn cell_text(c: &CellRow) -> String {
    match c.pct {
        Some(p) => format!("{} ({p:.2}%)", c.count),
        None => format!("{} (-)", c.count),
    }
}

fn pair_grid(kind: TableKind, archs: &[String], cells: &[CellRow]) -> Vec<Vec<String>> {
    let square = kind == TableKind::Coverage;
    let cols: Vec<&String> = if square { archs.iter().collect() } else { archs.iter().skip(1).collect() };
    let rows: Vec<&String> = if square {
        archs.iter().collect()
    } else {
        archs.iter().take(archs.len().saturating_sub(1)).collect()
    };
    let mut grid = vec![std::iter::once("Arch".to_string()).chain(cols.iter().map(|c| c.to_string())).collect::<Vec<_>>()];
    for r in rows {
        let mut line = vec![r.clone()];
        for c in &cols {
            line.push(
                cells
                    .iter()
                    .find(|cell| &cell.row == r && &cell.col == *c)
                    .map(cell_text)
                    .unwrap_or_default(),
            );
        }
        grid.push(line);
    }
    grid
}

fn align(rows: &[Vec<String>]) -> String {
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|i| rows.iter().filter_map(|r| r.get(i)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| if i == 0 { format!("{cell:<w$}", w = widths[i]) } else { format!("{cell:>w$}", w = widths[i]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
