//! Embedded evaluator for the SPARQL/GeoSPARQL subset used by the
//! analytical queries: basic graph patterns with `a` and fixed-length
//! `/` paths, FILTER, OPTIONAL, VALUES, BIND, COUNT/SUM/MIN/MAX/AVG with
//! GROUP BY, ORDER BY, LIMIT/OFFSET, and `geof:buffer` /
//! `geof:sfIntersects`.

mod ast;
mod eval;
mod functions;
mod parser;

use std::fmt::Write as _;

pub use ast::*;
pub use eval::evaluate;
pub use functions::{geof_buffer, geof_sf_intersects, parse_wkt_literal, wkt_literal};
pub use parser::parse_query;

use crate::rdf::{Term, TripleSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unsupported construct `{construct}` at line {line}, column {col}")]
    Unsupported { construct: String, line: usize, col: usize },
    #[error("invalid query: {0}")]
    Invalid(String),
}

/// Query result: a header of projected variables and rows of optional
/// bindings (`None` is unbound).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolutionTable {
    pub vars: Vec<String>,
    pub rows: Vec<Vec<Option<Term>>>,
}

fn tsv_cell(t: &Option<Term>) -> String {
    let raw = match t {
        None => return String::new(),
        Some(Term::Iri(i)) => format!("<{i}>"),
        Some(Term::Blank(b)) => format!("_:{b}"),
        Some(Term::Literal { lexical, .. }) => lexical.clone(),
    };
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

impl SolutionTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, var: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == var)
    }

    /// Values of one column, `None` for unknown variables.
    pub fn values(&self, var: &str) -> Option<Vec<Option<&Term>>> {
        let c = self.column(var)?;
        Some(self.rows.iter().map(|r| r[c].as_ref()).collect())
    }

    /// Header line of variable names, then one line per row: IRIs in angle
    /// brackets, literals as their lexical form, unbound as empty.
    pub fn to_tsv(&self) -> String {
        let mut out = self.vars.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(tsv_cell).collect::<Vec<_>>().join("\t"));
            out.push('\n');
        }
        out
    }

    /// Fixed-width table for terminals; long cells are cut at 60 chars.
    pub fn to_pretty(&self) -> String {
        const MAX: usize = 60;
        let cut = |s: String| {
            if s.chars().count() > MAX {
                format!("{}...", s.chars().take(MAX - 3).collect::<String>())
            } else {
                s
            }
        };
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(|c| cut(tsv_cell(c))).collect()).collect();
        let mut widths: Vec<usize> = self.vars.iter().map(|v| v.chars().count()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |items: &[String]| {
            let padded: Vec<String> = items.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let rule = format!("+{}+\n", widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("+"));
        let mut out = rule.clone();
        out.push_str(&line(&self.vars));
        out.push_str(&rule);
        for row in &cells {
            out.push_str(&line(row));
        }
        out.push_str(&rule);
        let _ = writeln!(out, "{} row(s)", self.rows.len());
        out
    }
}

/// Parses and evaluates in one step.
pub fn run_query(text: &str, ts: &TripleSet) -> Result<SolutionTable, QueryError> {
    evaluate(&parse_query(text)?, ts)
}

/// The ten analytical queries `q1`..`q10`, with their prefix headers.
pub const ANALYTICAL_QUERIES: [(&str, &str); 10] = [
    ("q1", include_str!("../../queries/q1.rq")),
    ("q2", include_str!("../../queries/q2.rq")),
    ("q3", include_str!("../../queries/q3.rq")),
    ("q4", include_str!("../../queries/q4.rq")),
    ("q5", include_str!("../../queries/q5.rq")),
    ("q6", include_str!("../../queries/q6.rq")),
    ("q7", include_str!("../../queries/q7.rq")),
    ("q8", include_str!("../../queries/q8.rq")),
    ("q9", include_str!("../../queries/q9.rq")),
    ("q10", include_str!("../../queries/q10.rq")),
];

pub fn analytical_query(name: &str) -> Option<&'static str> {
    ANALYTICAL_QUERIES.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, q)| *q)
}
