//! Query evaluation over an immutable [`TripleSet`].
//!
//! Variables are compiled to slots and solutions are rows of term ids.
//! Terms produced during evaluation (BIND results, constants missing from
//! the graph) live in a query-local dictionary above the graph's ids.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::functions::{geof_buffer, geof_sf_intersects};
use super::{QueryError, SolutionTable};
use crate::rdf::{vocab, Term, TermId, TripleSet};

type Row = Vec<Option<TermId>>;

struct Dict<'a> {
    ts: &'a TripleSet,
    extra: Vec<Term>,
    extra_ids: HashMap<Term, TermId>,
}

impl Dict<'_> {
    fn id(&mut self, t: &Term) -> TermId {
        if let Some(id) = self.ts.id_of(t) {
            return id;
        }
        if let Some(&id) = self.extra_ids.get(t) {
            return id;
        }
        let id = TermId::try_from(self.ts.term_count() + self.extra.len()).expect("term dictionary overflow");
        self.extra.push(t.clone());
        self.extra_ids.insert(t.clone(), id);
        id
    }

    fn term(&self, id: TermId) -> &Term {
        let n = self.ts.term_count();
        if (id as usize) < n {
            self.ts.term(id)
        } else {
            &self.extra[id as usize - n]
        }
    }

    fn in_graph(&self, id: TermId) -> bool {
        (id as usize) < self.ts.term_count()
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Var(usize),
    Const(TermId),
}

#[derive(Debug, Clone, Copy)]
struct CTriple {
    s: Slot,
    p: Slot,
    o: Slot,
}

#[derive(Debug, Clone)]
enum CExpr {
    Var(usize),
    Const(Term),
    Binary(BinaryOp, Box<CExpr>, Box<CExpr>),
    Not(Box<CExpr>),
    Neg(Box<CExpr>),
    Call(Function, Vec<CExpr>),
}

impl CExpr {
    fn vars(&self, out: &mut Vec<usize>) {
        match self {
            CExpr::Var(v) => out.push(*v),
            CExpr::Const(_) => {}
            CExpr::Binary(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            CExpr::Not(a) | CExpr::Neg(a) => a.vars(out),
            CExpr::Call(_, args) => args.iter().for_each(|a| a.vars(out)),
        }
    }
}

#[derive(Debug)]
enum CElem {
    Bgp(Vec<CTriple>),
    Optional(CGroup),
    Values { slots: Vec<usize>, rows: Vec<Row> },
    Bind { expr: CExpr, slot: usize },
}

#[derive(Debug)]
struct CFilter {
    expr: CExpr,
    vars: Vec<usize>,
}

#[derive(Debug, Default)]
struct CGroup {
    elems: Vec<CElem>,
    filters: Vec<CFilter>,
}

#[derive(Debug)]
enum CProj {
    Var(usize),
    Aggregate { func: AggregateFn, distinct: bool, arg: Option<CExpr>, slot: usize },
}

struct Compiler<'d, 'a> {
    dict: &'d mut Dict<'a>,
    names: Vec<String>,
    index: HashMap<String, usize>,
    /// Variables that occur in the pattern (as opposed to only in the
    /// projection or modifiers).
    in_pattern: HashSet<usize>,
}

impl Compiler<'_, '_> {
    fn slot(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    fn hidden(&mut self) -> usize {
        let name = format!(" path{}", self.names.len());
        self.slot(&name)
    }

    fn term_slot(&mut self, tp: &TermPattern) -> Slot {
        match tp {
            TermPattern::Var(v) => {
                let s = self.slot(v);
                self.in_pattern.insert(s);
                Slot::Var(s)
            }
            TermPattern::Term(t) => Slot::Const(self.dict.id(t)),
        }
    }

    fn expr(&mut self, e: &Expr) -> CExpr {
        match e {
            Expr::Var(v) => CExpr::Var(self.slot(v)),
            Expr::Const(t) => CExpr::Const(t.clone()),
            Expr::Binary(op, a, b) => CExpr::Binary(*op, Box::new(self.expr(a)), Box::new(self.expr(b))),
            Expr::Not(a) => CExpr::Not(Box::new(self.expr(a))),
            Expr::Neg(a) => CExpr::Neg(Box::new(self.expr(a))),
            Expr::Call(f, args) => CExpr::Call(*f, args.iter().map(|a| self.expr(a)).collect()),
        }
    }

    fn group(&mut self, g: &GroupPattern) -> CGroup {
        let mut out = CGroup::default();
        let mut bgp: Vec<CTriple> = Vec::new();
        for el in &g.elements {
            if !matches!(el, Element::Triple(_) | Element::Filter(_)) && !bgp.is_empty() {
                out.elems.push(CElem::Bgp(std::mem::take(&mut bgp)));
            }
            match el {
                Element::Triple(t) => {
                    let mut subject = self.term_slot(&t.subject);
                    for (k, p) in t.path.iter().enumerate() {
                        let p = self.term_slot(p);
                        let object =
                            if k + 1 == t.path.len() { self.term_slot(&t.object) } else { Slot::Var(self.hidden()) };
                        bgp.push(CTriple { s: subject, p, o: object });
                        subject = object;
                    }
                }
                Element::Filter(e) => {
                    let expr = self.expr(e);
                    let mut vars = Vec::new();
                    expr.vars(&mut vars);
                    out.filters.push(CFilter { expr, vars });
                }
                Element::Optional(inner) => {
                    let inner = self.group(inner);
                    out.elems.push(CElem::Optional(inner));
                }
                Element::Values { vars, rows } => {
                    let slots: Vec<usize> = vars.iter().map(|v| self.slot(v)).collect();
                    self.in_pattern.extend(slots.iter().copied());
                    let rows =
                        rows.iter().map(|r| r.iter().map(|c| c.as_ref().map(|t| self.dict.id(t))).collect()).collect();
                    out.elems.push(CElem::Values { slots, rows });
                }
                Element::Bind { expr, var } => {
                    let expr = self.expr(expr);
                    let slot = self.slot(var);
                    self.in_pattern.insert(slot);
                    out.elems.push(CElem::Bind { expr, slot });
                }
            }
        }
        if !bgp.is_empty() {
            out.elems.push(CElem::Bgp(bgp));
        }
        out
    }
}

// ---- values ----

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
enum NumKind {
    Integer,
    Decimal,
    Double,
}

fn numeric(t: &Term) -> Option<(f64, NumKind)> {
    let Term::Literal { lexical, datatype, lang: None } = t else { return None };
    let kind = match datatype.strip_prefix(vocab::XSD)? {
        "integer" | "int" | "long" | "short" | "byte" | "nonNegativeInteger" | "positiveInteger"
        | "negativeInteger" | "nonPositiveInteger" | "unsignedInt" | "unsignedLong" => NumKind::Integer,
        "decimal" => NumKind::Decimal,
        "double" | "float" => NumKind::Double,
        _ => return None,
    };
    let v: f64 = lexical.trim().parse().ok()?;
    Some((v, kind))
}

fn num_term(v: f64, kind: NumKind) -> Option<Term> {
    if !v.is_finite() && kind != NumKind::Double {
        return None;
    }
    Some(match kind {
        NumKind::Integer if v.fract() == 0.0 && v.abs() < 9.0e15 => {
            Term::typed(format!("{}", v as i64), vocab::XSD_INTEGER)
        }
        NumKind::Integer | NumKind::Decimal => Term::typed(format!("{v}"), vocab::XSD_DECIMAL),
        NumKind::Double => Term::typed(format!("{v:e}"), vocab::XSD_DOUBLE),
    })
}

/// Literal of type xsd:string (simple literal).
fn simple_string(t: &Term) -> Option<&str> {
    match t {
        Term::Literal { lexical, datatype, lang: None } if datatype == vocab::XSD_STRING => Some(lexical),
        _ => None,
    }
}

/// Simple or language-tagged string.
fn string_like(t: &Term) -> Option<&str> {
    match t {
        Term::Literal { lexical, lang: Some(_), .. } => Some(lexical),
        _ => simple_string(t),
    }
}

fn boolean(t: &Term) -> Option<bool> {
    match t {
        Term::Literal { lexical, datatype, lang: None } if datatype == vocab::XSD_BOOLEAN => match lexical.trim() {
            "true" | "1" => Some(true),
            "false" | "0" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

fn effective_boolean(t: &Term) -> Option<bool> {
    if let Some(b) = boolean(t) {
        return Some(b);
    }
    if let Some((v, _)) = numeric(t) {
        return Some(v != 0.0 && !v.is_nan());
    }
    string_like(t).map(|s| !s.is_empty())
}

fn value_eq(a: &Term, b: &Term) -> Option<bool> {
    if let (Some((x, _)), Some((y, _))) = (numeric(a), numeric(b)) {
        return Some(x == y);
    }
    if let (Some(x), Some(y)) = (boolean(a), boolean(b)) {
        return Some(x == y);
    }
    Some(a == b)
}

fn value_cmp(a: &Term, b: &Term) -> Option<Ordering> {
    if let (Some((x, _)), Some((y, _))) = (numeric(a), numeric(b)) {
        return x.partial_cmp(&y);
    }
    if let (Some(x), Some(y)) = (simple_string(a), simple_string(b)) {
        return Some(x.cmp(y));
    }
    if let (Some(x), Some(y)) = (boolean(a), boolean(b)) {
        return Some(x.cmp(&y));
    }
    None
}

/// Total order for ORDER BY and MIN/MAX: unbound, blank nodes, IRIs,
/// literals; numbers by value, then term order.
fn order_cmp(a: Option<&Term>, b: Option<&Term>) -> Ordering {
    let rank = |t: Option<&Term>| match t {
        None => 0,
        Some(Term::Blank(_)) => 1,
        Some(Term::Iri(_)) => 2,
        Some(Term::Literal { .. }) => 3,
    };
    match (a, b) {
        (Some(x), Some(y)) => {
            if let (Some((u, _)), Some((v, _))) = (numeric(x), numeric(y)) {
                match u.total_cmp(&v) {
                    Ordering::Equal => {}
                    o => return o,
                }
            }
            x.cmp(y)
        }
        _ => rank(a).cmp(&rank(b)),
    }
}

fn arithmetic(op: BinaryOp, a: &Term, b: &Term) -> Option<Term> {
    let ((x, ka), (y, kb)) = (numeric(a)?, numeric(b)?);
    let kind = if ka > kb { ka } else { kb };
    match op {
        BinaryOp::Add => num_term(x + y, kind),
        BinaryOp::Sub => num_term(x - y, kind),
        BinaryOp::Mul => num_term(x * y, kind),
        BinaryOp::Div => {
            if y == 0.0 && kind != NumKind::Double {
                return None;
            }
            num_term(x / y, if kind == NumKind::Integer { NumKind::Decimal } else { kind })
        }
        _ => None,
    }
}

// ---- evaluator ----

type PatternKey = (Option<TermId>, Option<TermId>, Option<TermId>);

struct Evaluator<'a> {
    dict: Dict<'a>,
    counts: HashMap<PatternKey, usize>,
}

impl<'a> Evaluator<'a> {
    fn value(&self, row: &Row, slot: usize) -> Option<Term> {
        row[slot].map(|id| self.dict.term(id).clone())
    }

    fn eval(&self, e: &CExpr, row: &Row) -> Option<Term> {
        match e {
            CExpr::Var(v) => self.value(row, *v),
            CExpr::Const(t) => Some(t.clone()),
            CExpr::Not(a) => Some(Term::boolean(!effective_boolean(&self.eval(a, row)?)?)),
            CExpr::Neg(a) => {
                let (v, k) = numeric(&self.eval(a, row)?)?;
                num_term(-v, k)
            }
            CExpr::Binary(BinaryOp::Or, a, b) => {
                let x = self.eval(a, row).and_then(|t| effective_boolean(&t));
                let y = self.eval(b, row).and_then(|t| effective_boolean(&t));
                match (x, y) {
                    (Some(true), _) | (_, Some(true)) => Some(Term::boolean(true)),
                    (Some(false), Some(false)) => Some(Term::boolean(false)),
                    _ => None,
                }
            }
            CExpr::Binary(BinaryOp::And, a, b) => {
                let x = self.eval(a, row).and_then(|t| effective_boolean(&t));
                let y = self.eval(b, row).and_then(|t| effective_boolean(&t));
                match (x, y) {
                    (Some(false), _) | (_, Some(false)) => Some(Term::boolean(false)),
                    (Some(true), Some(true)) => Some(Term::boolean(true)),
                    _ => None,
                }
            }
            CExpr::Binary(op, a, b) => {
                let (x, y) = (self.eval(a, row)?, self.eval(b, row)?);
                let r = match op {
                    BinaryOp::Eq => value_eq(&x, &y)?,
                    BinaryOp::Ne => !value_eq(&x, &y)?,
                    BinaryOp::Lt => value_cmp(&x, &y)? == Ordering::Less,
                    BinaryOp::Le => value_cmp(&x, &y)? != Ordering::Greater,
                    BinaryOp::Gt => value_cmp(&x, &y)? == Ordering::Greater,
                    BinaryOp::Ge => value_cmp(&x, &y)? != Ordering::Less,
                    _ => return arithmetic(*op, &x, &y),
                };
                Some(Term::boolean(r))
            }
            CExpr::Call(Function::Bound, args) => match &args[0] {
                CExpr::Var(v) => Some(Term::boolean(row[*v].is_some())),
                _ => None,
            },
            CExpr::Call(f, args) => {
                let vals = args.iter().map(|a| self.eval(a, row)).collect::<Option<Vec<Term>>>()?;
                match f {
                    Function::Contains => Some(Term::boolean(string_like(&vals[0])?.contains(string_like(&vals[1])?))),
                    Function::StrStarts => {
                        Some(Term::boolean(string_like(&vals[0])?.starts_with(string_like(&vals[1])?)))
                    }
                    Function::Str => match &vals[0] {
                        Term::Blank(_) => None,
                        t => Some(Term::string(t.value())),
                    },
                    Function::GeofBuffer => geof_buffer(&vals[0], &vals[1], &vals[2]),
                    Function::GeofSfIntersects => geof_sf_intersects(&vals[0], &vals[1]),
                    Function::Bound => None,
                }
            }
        }
    }

    fn test(&self, e: &CExpr, row: &Row) -> bool {
        self.eval(e, row).and_then(|t| effective_boolean(&t)) == Some(true)
    }

    fn count(&mut self, key: (Option<TermId>, Option<TermId>, Option<TermId>)) -> usize {
        if [key.0, key.1, key.2].iter().flatten().any(|&id| !self.dict.in_graph(id)) {
            return 0;
        }
        let ts = self.dict.ts;
        *self.counts.entry(key).or_insert_with(|| ts.count_matching(key.0, key.1, key.2))
    }

    fn resolve(slot: Slot, row: &Row) -> Option<TermId> {
        match slot {
            Slot::Const(id) => Some(id),
            Slot::Var(v) => row[v],
        }
    }

    fn key(t: &CTriple, row: &Row) -> (Option<TermId>, Option<TermId>, Option<TermId>) {
        (Self::resolve(t.s, row), Self::resolve(t.p, row), Self::resolve(t.o, row))
    }

    /// Index nested-loop join; the next pattern is the one with the fewest
    /// matches under the current bindings.
    fn bgp(&mut self, triples: &[CTriple], remaining: &mut Vec<usize>, row: &mut Row, out: &mut Vec<Row>) {
        if remaining.is_empty() {
            out.push(row.clone());
            return;
        }
        let mut best = (usize::MAX, 0);
        for (k, &i) in remaining.iter().enumerate() {
            let c = self.count(Self::key(&triples[i], row));
            if c < best.0 {
                best = (c, k);
            }
        }
        if best.0 == 0 {
            return;
        }
        let pos = best.1;
        let ti = remaining.swap_remove(pos);
        let t = triples[ti];
        let (s, p, o) = Self::key(&t, row);
        let ts = self.dict.ts;
        let matches: Vec<_> = ts.matching(s, p, o).collect();
        for (ms, mp, mo) in matches {
            let mut bound = Vec::with_capacity(3);
            let mut ok = true;
            for (slot, val) in [(t.s, ms), (t.p, mp), (t.o, mo)] {
                if let Slot::Var(v) = slot {
                    match row[v] {
                        None => {
                            row[v] = Some(val);
                            bound.push(v);
                        }
                        Some(x) if x != val => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                    }
                }
            }
            if ok {
                self.bgp(triples, remaining, row, out);
            }
            for v in bound {
                row[v] = None;
            }
        }
        remaining.push(ti);
        let last = remaining.len() - 1;
        remaining.swap(pos, last);
    }

    /// Evaluates a group against seed rows. Filters run as soon as all
    /// their variables are certainly bound, the rest at the end.
    fn group(&mut self, g: &CGroup, seeds: Vec<Row>, certain: &HashSet<usize>) -> Vec<Row> {
        let mut certain = certain.clone();
        let mut pending: Vec<&CFilter> = g.filters.iter().collect();
        let mut rows = seeds;
        let apply = |ev: &Self, rows: Vec<Row>, pending: &mut Vec<&CFilter>, certain: Option<&HashSet<usize>>| {
            let (now, later): (Vec<&CFilter>, Vec<&CFilter>) =
                pending.iter().partition(|f| certain.is_none_or(|c| f.vars.iter().all(|v| c.contains(v))));
            *pending = later;
            if now.is_empty() {
                return rows;
            }
            rows.into_iter().filter(|r| now.iter().all(|f| ev.test(&f.expr, r))).collect()
        };
        rows = apply(self, rows, &mut pending, Some(&certain));
        for el in &g.elems {
            match el {
                CElem::Bgp(triples) => {
                    let mut out = Vec::new();
                    for mut row in rows {
                        let mut remaining: Vec<usize> = (0..triples.len()).collect();
                        self.bgp(triples, &mut remaining, &mut row, &mut out);
                    }
                    rows = out;
                    for t in triples {
                        for s in [t.s, t.p, t.o] {
                            if let Slot::Var(v) = s {
                                certain.insert(v);
                            }
                        }
                    }
                }
                CElem::Optional(inner) => {
                    let mut out = Vec::new();
                    for row in rows {
                        let ext = self.group(inner, vec![row.clone()], &certain);
                        if ext.is_empty() {
                            out.push(row);
                        } else {
                            out.extend(ext);
                        }
                    }
                    rows = out;
                }
                CElem::Values { slots, rows: data } => {
                    let mut out = Vec::new();
                    for row in &rows {
                        'data: for d in data {
                            let mut r = row.clone();
                            for (&s, v) in slots.iter().zip(d) {
                                match (r[s], v) {
                                    (_, None) => {}
                                    (None, Some(v)) => r[s] = Some(*v),
                                    (Some(x), Some(v)) if x != *v => continue 'data,
                                    _ => {}
                                }
                            }
                            out.push(r);
                        }
                    }
                    rows = out;
                    for (k, &s) in slots.iter().enumerate() {
                        if data.iter().all(|d| d[k].is_some()) {
                            certain.insert(s);
                        }
                    }
                }
                CElem::Bind { expr, slot } => {
                    let mut out = Vec::with_capacity(rows.len());
                    for mut row in rows {
                        if let Some(t) = self.eval(expr, &row) {
                            let id = self.dict.id(&t);
                            match row[*slot] {
                                None => row[*slot] = Some(id),
                                Some(x) if x != id => continue,
                                Some(_) => {}
                            }
                        }
                        out.push(row);
                    }
                    rows = out;
                }
            }
            rows = apply(self, rows, &mut pending, Some(&certain));
        }
        apply(self, rows, &mut pending, None)
    }

    fn aggregate(&mut self, func: AggregateFn, distinct: bool, arg: Option<&CExpr>, rows: &[&Row]) -> Option<Term> {
        let Some(arg) = arg else {
            let n = if distinct { rows.iter().collect::<HashSet<_>>().len() } else { rows.len() };
            return Some(Term::typed(n.to_string(), vocab::XSD_INTEGER));
        };
        let mut vals: Vec<Term> = rows.iter().filter_map(|r| self.eval(arg, r)).collect();
        if distinct {
            let mut seen = HashSet::new();
            vals.retain(|v| seen.insert(v.clone()));
        }
        match func {
            AggregateFn::Count => Some(Term::typed(vals.len().to_string(), vocab::XSD_INTEGER)),
            AggregateFn::Sum | AggregateFn::Avg => {
                let mut sum = 0.0;
                let mut kind = NumKind::Integer;
                for v in &vals {
                    let (x, k) = numeric(v)?;
                    sum += x;
                    if k > kind {
                        kind = k;
                    }
                }
                if func == AggregateFn::Sum || vals.is_empty() {
                    num_term(sum, kind)
                } else {
                    num_term(sum / vals.len() as f64, if kind == NumKind::Integer { NumKind::Decimal } else { kind })
                }
            }
            AggregateFn::Min => vals.into_iter().min_by(|a, b| order_cmp(Some(a), Some(b))),
            AggregateFn::Max => vals.into_iter().max_by(|a, b| order_cmp(Some(a), Some(b))),
        }
    }

    fn row_cmp(&self, a: &Row, b: &Row) -> Ordering {
        for (x, y) in a.iter().zip(b) {
            let o = order_cmp(x.map(|i| self.dict.term(i)), y.map(|i| self.dict.term(i)));
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    }
}

fn check_projection(q: &Query, c: &Compiler) -> Result<(), QueryError> {
    let aliases: HashSet<&str> = q
        .projection
        .iter()
        .filter_map(|p| match p {
            Projection::Aggregate { alias, .. } => Some(alias.as_str()),
            Projection::Var(_) => None,
        })
        .collect();
    for p in &q.projection {
        if let Projection::Var(v) = p {
            if q.has_aggregates() && !q.group_by.contains(v) {
                return Err(QueryError::Invalid(format!("?{v} is projected but not grouped")));
            }
            let known = c.index.get(v).is_some_and(|s| c.in_pattern.contains(s));
            if !known && !aliases.contains(v.as_str()) {
                return Err(QueryError::Invalid(format!("?{v} is projected but does not occur in the pattern")));
            }
        }
    }
    let mut seen = HashSet::new();
    for p in &q.projection {
        if !seen.insert(p.name()) {
            return Err(QueryError::Invalid(format!("?{} is projected twice", p.name())));
        }
    }
    Ok(())
}

/// Evaluates a parsed query. FILTER and BIND expression errors never fail
/// the query: the row is dropped (FILTER) or the variable stays unbound
/// (BIND).
pub fn evaluate(q: &Query, ts: &TripleSet) -> Result<SolutionTable, QueryError> {
    let mut dict = Dict { ts, extra: Vec::new(), extra_ids: HashMap::new() };
    let mut c = Compiler { dict: &mut dict, names: Vec::new(), index: HashMap::new(), in_pattern: HashSet::new() };
    let group = c.group(&q.pattern);
    let group_slots: Vec<usize> = q.group_by.iter().map(|v| c.slot(v)).collect();
    let projection: Vec<CProj> = q
        .projection
        .iter()
        .map(|p| match p {
            Projection::Var(v) => CProj::Var(c.slot(v)),
            Projection::Aggregate { func, distinct, arg, alias } => CProj::Aggregate {
                func: *func,
                distinct: *distinct,
                arg: arg.as_ref().map(|e| c.expr(e)),
                slot: c.slot(alias),
            },
        })
        .collect();
    let order: Vec<(CExpr, bool)> = q.order_by.iter().map(|k| (c.expr(&k.expr), k.descending)).collect();
    check_projection(q, &c)?;
    let nslots = c.names.len();

    let mut ev = Evaluator { dict, counts: HashMap::new() };
    let mut rows = ev.group(&group, vec![vec![None; nslots]], &HashSet::new());

    if q.has_aggregates() {
        let mut keys: Vec<Row> = Vec::new();
        let mut members: HashMap<Row, Vec<usize>> = HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            let key: Row = group_slots.iter().map(|&s| r[s]).collect();
            members
                .entry(key.clone())
                .or_insert_with(|| {
                    keys.push(key);
                    Vec::new()
                })
                .push(i);
        }
        if group_slots.is_empty() && keys.is_empty() {
            keys.push(Vec::new());
        }
        let mut grouped = Vec::with_capacity(keys.len());
        for key in keys {
            let member_rows: Vec<&Row> =
                members.get(&key).map_or_else(Vec::new, |m| m.iter().map(|&i| &rows[i]).collect());
            let mut out: Row = vec![None; nslots];
            for (&s, v) in group_slots.iter().zip(&key) {
                out[s] = *v;
            }
            for p in &projection {
                if let CProj::Aggregate { func, distinct, arg, slot } = p {
                    if let Some(t) = ev.aggregate(*func, *distinct, arg.as_ref(), &member_rows) {
                        out[*slot] = Some(ev.dict.id(&t));
                    }
                }
            }
            grouped.push(out);
        }
        rows = grouped;
    }

    if !order.is_empty() {
        let mut keyed: Vec<(Vec<Option<Term>>, Row)> =
            rows.into_iter().map(|r| (order.iter().map(|(e, _)| ev.eval(e, &r)).collect(), r)).collect();
        keyed.sort_by(|(ka, ra), (kb, rb)| {
            for ((x, y), (_, desc)) in ka.iter().zip(kb).zip(&order) {
                let o = order_cmp(x.as_ref(), y.as_ref());
                let o = if *desc { o.reverse() } else { o };
                if o != Ordering::Equal {
                    return o;
                }
            }
            ev.row_cmp(ra, rb)
        });
        rows = keyed.into_iter().map(|(_, r)| r).collect();
    }

    let slots: Vec<usize> = projection
        .iter()
        .map(|p| match p {
            CProj::Var(s) | CProj::Aggregate { slot: s, .. } => *s,
        })
        .collect();
    let mut projected: Vec<Row> = rows.iter().map(|r| slots.iter().map(|&s| r[s]).collect()).collect();
    if q.distinct {
        let mut seen = HashSet::new();
        projected.retain(|r| seen.insert(r.clone()));
    }
    let projected = projected.into_iter().skip(q.offset.unwrap_or(0)).take(q.limit.unwrap_or(usize::MAX));
    Ok(SolutionTable {
        vars: q.projection.iter().map(|p| p.name().to_owned()).collect(),
        rows: projected.map(|r| r.iter().map(|c| c.map(|id| ev.dict.term(id).clone())).collect()).collect(),
    })
}
