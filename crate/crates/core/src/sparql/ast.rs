//! Query syntax tree and its canonical printer.

use std::fmt::{self, Write as _};

use crate::rdf::Term;

#[derive(Debug, Clone, PartialEq)]
pub enum TermPattern {
    Var(String),
    Term(Term),
}

/// `subject p1/p2/... object`; a one-element path is a plain predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct TriplePattern {
    pub subject: TermPattern,
    pub path: Vec<TermPattern>,
    pub object: TermPattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Contains,
    StrStarts,
    Str,
    Bound,
    GeofBuffer,
    GeofSfIntersects,
}

pub const GEOF_BUFFER: &str = "http://www.opengis.net/def/function/geosparql/buffer";
pub const GEOF_SF_INTERSECTS: &str = "http://www.opengis.net/def/function/geosparql/sfIntersects";

impl Function {
    pub fn from_keyword(k: &str) -> Option<Self> {
        Some(match k.to_ascii_uppercase().as_str() {
            "CONTAINS" => Function::Contains,
            "STRSTARTS" => Function::StrStarts,
            "STR" => Function::Str,
            "BOUND" => Function::Bound,
            _ => return None,
        })
    }

    pub fn from_iri(iri: &str) -> Option<Self> {
        match iri {
            GEOF_BUFFER => Some(Function::GeofBuffer),
            GEOF_SF_INTERSECTS => Some(Function::GeofSfIntersects),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Function::Str | Function::Bound => 1,
            Function::Contains | Function::StrStarts | Function::GeofSfIntersects => 2,
            Function::GeofBuffer => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Function::Contains => "CONTAINS",
            Function::StrStarts => "STRSTARTS",
            Function::Str => "STR",
            Function::Bound => "BOUND",
            Function::GeofBuffer => "geof:buffer",
            Function::GeofSfIntersects => "geof:sfIntersects",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(String),
    Const(Term),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Call(Function, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateFn {
    Count,
    Sum,
    Min,
    Max,
    Avg,
}

impl AggregateFn {
    pub fn from_keyword(k: &str) -> Option<Self> {
        Some(match k.to_ascii_uppercase().as_str() {
            "COUNT" => AggregateFn::Count,
            "SUM" => AggregateFn::Sum,
            "MIN" => AggregateFn::Min,
            "MAX" => AggregateFn::Max,
            "AVG" => AggregateFn::Avg,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            AggregateFn::Count => "COUNT",
            AggregateFn::Sum => "SUM",
            AggregateFn::Min => "MIN",
            AggregateFn::Max => "MAX",
            AggregateFn::Avg => "AVG",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Var(String),
    /// `(AGG([DISTINCT] expr | *) AS ?alias)`; `arg` is `None` for `*`.
    Aggregate {
        func: AggregateFn,
        distinct: bool,
        arg: Option<Expr>,
        alias: String,
    },
}

impl Projection {
    pub fn name(&self) -> &str {
        match self {
            Projection::Var(v) => v,
            Projection::Aggregate { alias, .. } => alias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Triple(TriplePattern),
    Filter(Expr),
    Optional(GroupPattern),
    Values { vars: Vec<String>, rows: Vec<Vec<Option<Term>>> },
    Bind { expr: Expr, var: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupPattern {
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderKey {
    pub expr: Expr,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    /// Declared prefixes, in source order.
    pub prefixes: Vec<(String, String)>,
    pub distinct: bool,
    pub projection: Vec<Projection>,
    pub pattern: GroupPattern,
    pub group_by: Vec<String>,
    pub order_by: Vec<OrderKey>,
    pub limit: Option<usize>,
    pub offset: Option<usize>,
}

impl Query {
    pub fn has_aggregates(&self) -> bool {
        !self.group_by.is_empty() || self.projection.iter().any(|p| matches!(p, Projection::Aggregate { .. }))
    }
}

// ---- canonical printer: full IRIs, one element per line ----

fn write_term(t: &Term, out: &mut String) {
    let _ = write!(out, "{t}");
}

fn write_tp(tp: &TermPattern, out: &mut String) {
    match tp {
        TermPattern::Var(v) => {
            out.push('?');
            out.push_str(v);
        }
        TermPattern::Term(t) => write_term(t, out),
    }
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Var(v) => {
            out.push('?');
            out.push_str(v);
        }
        Expr::Const(t) => write_term(t, out),
        Expr::Binary(op, a, b) => {
            out.push('(');
            write_expr(a, out);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(b, out);
            out.push(')');
        }
        Expr::Not(a) => {
            out.push_str("!(");
            write_expr(a, out);
            out.push(')');
        }
        Expr::Neg(a) => {
            out.push_str("-(");
            write_expr(a, out);
            out.push(')');
        }
        Expr::Call(f, args) => {
            match f {
                Function::GeofBuffer => out.push_str(&format!("<{GEOF_BUFFER}>")),
                Function::GeofSfIntersects => out.push_str(&format!("<{GEOF_SF_INTERSECTS}>")),
                _ => out.push_str(f.name()),
            }
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(a, out);
            }
            out.push(')');
        }
    }
}

fn write_group(g: &GroupPattern, indent: usize, out: &mut String) {
    out.push_str("{\n");
    let pad = "  ".repeat(indent + 1);
    for el in &g.elements {
        out.push_str(&pad);
        match el {
            Element::Triple(t) => {
                write_tp(&t.subject, out);
                out.push(' ');
                for (i, p) in t.path.iter().enumerate() {
                    if i > 0 {
                        out.push('/');
                    }
                    write_tp(p, out);
                }
                out.push(' ');
                write_tp(&t.object, out);
                out.push_str(" .");
            }
            Element::Filter(e) => {
                out.push_str("FILTER(");
                write_expr(e, out);
                out.push(')');
            }
            Element::Optional(inner) => {
                out.push_str("OPTIONAL ");
                write_group(inner, indent + 1, out);
            }
            Element::Values { vars, rows } => {
                out.push_str("VALUES (");
                out.push_str(&vars.iter().map(|v| format!("?{v}")).collect::<Vec<_>>().join(" "));
                out.push_str(") {");
                for row in rows {
                    out.push_str(" (");
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| {
                            c.as_ref().map_or_else(
                                || "UNDEF".to_owned(),
                                |t| {
                                    let mut s = String::new();
                                    write_term(t, &mut s);
                                    s
                                },
                            )
                        })
                        .collect();
                    out.push_str(&cells.join(" "));
                    out.push(')');
                }
                out.push_str(" }");
            }
            Element::Bind { expr, var } => {
                out.push_str("BIND(");
                write_expr(expr, out);
                let _ = write!(out, " AS ?{var})");
            }
        }
        out.push('\n');
    }
    out.push_str(&"  ".repeat(indent));
    out.push('}');
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for (p, ns) in &self.prefixes {
            let _ = writeln!(out, "PREFIX {p}: <{ns}>");
        }
        out.push_str("SELECT ");
        if self.distinct {
            out.push_str("DISTINCT ");
        }
        let items: Vec<String> = self
            .projection
            .iter()
            .map(|p| match p {
                Projection::Var(v) => format!("?{v}"),
                Projection::Aggregate { func, distinct, arg, alias } => {
                    let mut s = format!("({}(", func.name());
                    if *distinct {
                        s.push_str("DISTINCT ");
                    }
                    match arg {
                        Some(e) => write_expr(e, &mut s),
                        None => s.push('*'),
                    }
                    let _ = write!(s, ") AS ?{alias})");
                    s
                }
            })
            .collect();
        out.push_str(&items.join(" "));
        out.push_str("\nWHERE ");
        write_group(&self.pattern, 0, &mut out);
        out.push('\n');
        if !self.group_by.is_empty() {
            let _ = writeln!(
                out,
                "GROUP BY {}",
                self.group_by.iter().map(|v| format!("?{v}")).collect::<Vec<_>>().join(" ")
            );
        }
        if !self.order_by.is_empty() {
            out.push_str("ORDER BY");
            for k in &self.order_by {
                out.push_str(if k.descending { " DESC(" } else { " ASC(" });
                write_expr(&k.expr, &mut out);
                out.push(')');
            }
            out.push('\n');
        }
        if let Some(l) = self.limit {
            let _ = writeln!(out, "LIMIT {l}");
        }
        if let Some(o) = self.offset {
            let _ = writeln!(out, "OFFSET {o}");
        }
        f.write_str(&out)
    }
}
