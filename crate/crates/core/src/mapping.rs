//! Declarative store-to-RDF mapping rules.
//!
//! The rules file follows the Ontop OBDA layout: a `[PrefixDeclaration]`
//! section, then `[MappingDeclaration] @collection [[ ... ]]` holding
//! blocks of `mappingId`, `target` and `source` fields. Fields may
//! continue on indented lines; blocks are separated by blank lines.
//!
//! Target: triple templates, whitespace-separated tokens, with `a`, `;`,
//! `,` and `.`. Terms are `prefix:local{col}` or `<http://...{col}>` IRI
//! templates, `{col}` or `"text {col}"` literals with an optional
//! `^^datatype` or `@lang`.
//!
//! Source: `SELECT a.col [AS name], ... FROM table a [JOIN table b ON
//! a.x = b.y [AND ...]]... [WHERE a.c op constant [AND ...]]`, where op
//! is one of `= != <> < <= > >=` or `IS [NOT] NULL`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::rdf::{vocab, Term, TripleSet};
use crate::store::{equi_join, scan, CityStore, Filter, FilterOp, StoreError, Value, View};

pub const BUILTIN_RULES: &str = include_str!("../data/rules.obda");

#[derive(Debug, thiserror::Error)]
pub enum MappingError {
    #[error("mapping syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("mapping `{id}`: {message}")]
    Rule { id: String, message: String },
    #[error("schema axioms: {0}")]
    Axioms(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Part {
    Text(String),
    Column(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermTemplate {
    Iri(Vec<Part>),
    Literal { parts: Vec<Part>, datatype: Option<String>, lang: Option<String> },
}

impl TermTemplate {
    fn columns(&self) -> impl Iterator<Item = &str> {
        let parts = match self {
            TermTemplate::Iri(p) | TermTemplate::Literal { parts: p, .. } => p,
        };
        parts.iter().filter_map(|p| match p {
            Part::Column(c) => Some(c.as_str()),
            Part::Text(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleTemplate {
    pub subject: TermTemplate,
    pub predicate: TermTemplate,
    pub object: TermTemplate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectItem {
    pub column: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub table: String,
    pub alias: String,
    pub on: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Compare(Filter),
    IsNull { column: String, negated: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceQuery {
    pub select: Vec<SelectItem>,
    pub table: String,
    pub alias: String,
    pub joins: Vec<Join>,
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingRule {
    pub id: String,
    pub source: SourceQuery,
    pub target: Vec<TripleTemplate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingDocument {
    pub rules: Vec<MappingRule>,
}

/// Subproperty axioms asserted into the graph and closed over.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaAxioms {
    pub subproperties: Vec<(String, String)>,
}

pub fn linked_to() -> String {
    format!("{}linkedTo", vocab::BASE)
}

impl Default for SchemaAxioms {
    fn default() -> Self {
        let base = |l: &str| format!("{}{l}", vocab::BASE);
        Self {
            subproperties: vec![
                (base("matchOSM"), linked_to()),
                (base("matchCityGML"), linked_to()),
                (base("adjacentCityGML"), linked_to()),
            ],
        }
    }
}

impl SchemaAxioms {
    pub fn validate(&self) -> Result<(), MappingError> {
        let mut graph: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, b) in &self.subproperties {
            graph.entry(a).or_default().push(b);
        }
        for start in graph.keys() {
            let mut stack = vec![*start];
            let mut seen = BTreeSet::new();
            while let Some(x) = stack.pop() {
                for &y in graph.get(x).map(Vec::as_slice).unwrap_or(&[]) {
                    if y == *start {
                        return Err(MappingError::Axioms(format!("subproperty cycle through {start}")));
                    }
                    if seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
        }
        Ok(())
    }
}

fn syntax<T>(line: usize, message: impl Into<String>) -> Result<T, MappingError> {
    Err(MappingError::Syntax { line, message: message.into() })
}

// ---- target templates ----

fn template_parts(s: &str, line: usize) -> Result<Vec<Part>, MappingError> {
    let mut parts = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            parts.push(Part::Text(rest[..open].to_owned()));
        }
        let Some(close) = rest[open..].find('}') else {
            return syntax(line, format!("unclosed placeholder in `{s}`"));
        };
        let col = &rest[open + 1..open + close];
        if col.is_empty() || !col.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return syntax(line, format!("bad placeholder `{{{col}}}`"));
        }
        parts.push(Part::Column(col.to_owned()));
        rest = &rest[open + close + 1..];
    }
    if rest.contains('}') {
        return syntax(line, format!("stray `}}` in `{s}`"));
    }
    if !rest.is_empty() {
        parts.push(Part::Text(rest.to_owned()));
    }
    Ok(parts)
}

fn resolve_prefixed(tok: &str, prefixes: &BTreeMap<String, String>, line: usize) -> Result<Vec<Part>, MappingError> {
    let Some(colon) = tok.find(':') else {
        return syntax(line, format!("expected an IRI template, got `{tok}`"));
    };
    let Some(ns) = prefixes.get(&tok[..colon]) else {
        return syntax(line, format!("undeclared prefix `{}:`", &tok[..colon]));
    };
    let mut parts = vec![Part::Text(ns.clone())];
    parts.extend(template_parts(&tok[colon + 1..], line)?);
    Ok(parts)
}

fn term_template(tok: &str, prefixes: &BTreeMap<String, String>, line: usize) -> Result<TermTemplate, MappingError> {
    if tok == "a" {
        return Ok(TermTemplate::Iri(vec![Part::Text(vocab::RDF_TYPE.into())]));
    }
    if let Some(inner) = tok.strip_prefix('<') {
        let Some(inner) = inner.strip_suffix('>') else { return syntax(line, format!("unterminated IRI `{tok}`")) };
        return Ok(TermTemplate::Iri(template_parts(inner, line)?));
    }
    let (body, suffix) = if let Some(rest) = tok.strip_prefix('"') {
        let Some(end) = rest.find('"') else { return syntax(line, format!("unterminated literal `{tok}`")) };
        (template_parts(&rest[..end], line)?, &rest[end + 1..])
    } else if tok.starts_with('{') {
        let end = tok.find("^^").or_else(|| tok.rfind('@')).unwrap_or(tok.len());
        (template_parts(&tok[..end], line)?, &tok[end..])
    } else {
        return Ok(TermTemplate::Iri(resolve_prefixed(tok, prefixes, line)?));
    };
    let (datatype, lang) = if let Some(dt) = suffix.strip_prefix("^^") {
        let iri = if let Some(full) = dt.strip_prefix('<').and_then(|d| d.strip_suffix('>')) {
            full.to_owned()
        } else {
            match resolve_prefixed(dt, prefixes, line)?.as_slice() {
                [Part::Text(a), Part::Text(b)] => format!("{a}{b}"),
                _ => return syntax(line, format!("bad datatype `{dt}`")),
            }
        };
        (Some(iri), None)
    } else if let Some(l) = suffix.strip_prefix('@') {
        (None, Some(l.to_owned()))
    } else if suffix.is_empty() {
        (None, None)
    } else {
        return syntax(line, format!("unexpected `{suffix}` after literal"));
    };
    Ok(TermTemplate::Literal { parts: body, datatype, lang })
}

fn tokenize_target(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in text.chars() {
        if c == '"' {
            quoted = !quoted;
        }
        if c.is_whitespace() && !quoted {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn parse_target(
    text: &str,
    prefixes: &BTreeMap<String, String>,
    line: usize,
) -> Result<Vec<TripleTemplate>, MappingError> {
    let toks = tokenize_target(text);
    let mut out = Vec::new();
    let mut i = 0;
    let next = |i: &mut usize, what: &str| -> Result<String, MappingError> {
        let t = toks.get(*i).cloned();
        *i += 1;
        t.map_or_else(|| syntax(line, format!("target ends before {what}")), Ok)
    };
    while i < toks.len() {
        let subject = term_template(&next(&mut i, "subject")?, prefixes, line)?;
        if matches!(subject, TermTemplate::Literal { .. }) {
            return syntax(line, "literal in subject position");
        }
        loop {
            let predicate = term_template(&next(&mut i, "predicate")?, prefixes, line)?;
            if matches!(predicate, TermTemplate::Literal { .. }) {
                return syntax(line, "literal in predicate position");
            }
            loop {
                let object = term_template(&next(&mut i, "object")?, prefixes, line)?;
                out.push(TripleTemplate { subject: subject.clone(), predicate: predicate.clone(), object });
                match next(&mut i, "`.`")?.as_str() {
                    "," => continue,
                    ";" => break,
                    "." => break,
                    other => return syntax(line, format!("expected `.`, `;` or `,`, got `{other}`")),
                }
            }
            if toks[i - 1] == "." {
                break;
            }
        }
    }
    Ok(out)
}

// ---- source queries ----

fn tokenize_sql(text: &str, line: usize) -> Result<Vec<String>, MappingError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' {
            let mut s = String::from("'");
            i += 1;
            loop {
                match chars.get(i) {
                    None => return syntax(line, "unterminated string in source"),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(s);
        } else if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || matches!(chars[i], '_' | '.' | '-')) {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if matches!(c, '<' | '>' | '!' | '=') {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            if matches!(two.as_str(), "<=" | ">=" | "!=" | "<>") {
                out.push(two);
                i += 2;
            } else {
                out.push(c.to_string());
                i += 1;
            }
        } else if c == ',' {
            out.push(",".into());
            i += 1;
        } else {
            return syntax(line, format!("unexpected `{c}` in source"));
        }
    }
    Ok(out)
}

struct SqlCursor {
    toks: Vec<String>,
    pos: usize,
    line: usize,
}

impl SqlCursor {
    fn peek_kw(&self, kw: &str) -> bool {
        self.toks.get(self.pos).is_some_and(|t| t.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.peek_kw(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), MappingError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            syntax(
                self.line,
                format!("expected {kw} in source, got `{}`", self.toks.get(self.pos).map_or("end", |s| s)),
            )
        }
    }

    fn ident(&mut self) -> Result<String, MappingError> {
        match self.toks.get(self.pos) {
            Some(t) if t.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') => {
                self.pos += 1;
                Ok(t.clone())
            }
            other => syntax(self.line, format!("expected a name in source, got `{}`", other.map_or("end", |s| s))),
        }
    }

    fn qualified(&mut self) -> Result<String, MappingError> {
        let name = self.ident()?;
        if name.split('.').count() != 2 || name.split('.').any(str::is_empty) {
            return syntax(self.line, format!("column `{name}` must be written alias.column"));
        }
        Ok(name)
    }
}

const RESERVED: [&str; 7] = ["JOIN", "ON", "WHERE", "AND", "INNER", "AS", "FROM"];

pub fn parse_source(text: &str, line: usize) -> Result<SourceQuery, MappingError> {
    let mut c = SqlCursor { toks: tokenize_sql(text, line)?, pos: 0, line };
    c.expect_kw("SELECT")?;
    let mut select = Vec::new();
    loop {
        let column = c.qualified()?;
        let name = if c.eat_kw("AS") { c.ident()? } else { column.split('.').nth(1).unwrap_or_default().to_owned() };
        select.push(SelectItem { column, name });
        if c.toks.get(c.pos).map(String::as_str) != Some(",") {
            break;
        }
        c.pos += 1;
    }
    c.expect_kw("FROM")?;
    let table = c.ident()?;
    let alias = if c.toks.get(c.pos).is_some_and(|t| !RESERVED.iter().any(|r| t.eq_ignore_ascii_case(r))) {
        c.ident()?
    } else {
        table.clone()
    };
    let mut joins = Vec::new();
    loop {
        c.eat_kw("INNER");
        if !c.eat_kw("JOIN") {
            break;
        }
        let jt = c.ident()?;
        let ja = c.ident()?;
        c.expect_kw("ON")?;
        let mut on = Vec::new();
        loop {
            let l = c.qualified()?;
            if c.toks.get(c.pos).map(String::as_str) != Some("=") {
                return syntax(line, "join condition must be an equality");
            }
            c.pos += 1;
            let r = c.qualified()?;
            on.push((l, r));
            if !c.eat_kw("AND") {
                break;
            }
        }
        joins.push(Join { table: jt, alias: ja, on });
    }
    let mut conditions = Vec::new();
    if c.eat_kw("WHERE") {
        loop {
            let column = c.qualified()?;
            if c.eat_kw("IS") {
                let negated = c.eat_kw("NOT");
                c.expect_kw("NULL")?;
                conditions.push(Condition::IsNull { column, negated });
            } else {
                let op_tok = c.toks.get(c.pos).cloned().unwrap_or_default();
                let Some(op) = FilterOp::from_symbol(&op_tok) else {
                    return syntax(line, format!("unknown operator `{op_tok}`"));
                };
                c.pos += 1;
                let Some(v) = c.toks.get(c.pos).cloned() else { return syntax(line, "missing constant") };
                c.pos += 1;
                let value = if let Some(s) = v.strip_prefix('\'') {
                    Value::Text(s.to_owned())
                } else if let Ok(i) = v.parse::<i64>() {
                    Value::Int(i)
                } else if let Ok(f) = v.parse::<f64>() {
                    Value::Float(f)
                } else {
                    return syntax(line, format!("expected a constant, got `{v}`"));
                };
                conditions.push(Condition::Compare(Filter::new(column, op, value)));
            }
            if !c.eat_kw("AND") {
                break;
            }
        }
    }
    if c.pos != c.toks.len() {
        return syntax(line, format!("unexpected `{}` in source", c.toks[c.pos]));
    }
    Ok(SourceQuery { select, table, alias, joins, conditions })
}

// ---- document ----

pub fn parse_mapping(text: &str) -> Result<MappingDocument, MappingError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Prefixes,
        Mappings,
        Done,
    }
    let mut section = Section::None;
    let mut prefixes: BTreeMap<String, String> = BTreeMap::new();
    // (field, text, line) per block
    let mut blocks: Vec<Vec<(String, String, usize)>> = Vec::new();
    let mut current: Vec<(String, String, usize)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        match section {
            Section::None | Section::Prefixes if trimmed == "[PrefixDeclaration]" => section = Section::Prefixes,
            Section::None | Section::Prefixes if trimmed.starts_with("[MappingDeclaration]") => {
                if !trimmed.ends_with("@collection [[") {
                    return syntax(line, "expected `[MappingDeclaration] @collection [[`");
                }
                section = Section::Mappings;
            }
            Section::Prefixes if !trimmed.is_empty() => {
                let mut it = trimmed.split_whitespace();
                let (Some(p), Some(ns), None) = (it.next(), it.next(), it.next()) else {
                    return syntax(line, "prefix line must be `prefix: namespace`");
                };
                let Some(p) = p.strip_suffix(':') else { return syntax(line, "prefix must end with `:`") };
                prefixes.insert(p.to_owned(), ns.to_owned());
            }
            Section::Mappings if trimmed == "]]" => {
                if !current.is_empty() {
                    blocks.push(std::mem::take(&mut current));
                }
                section = Section::Done;
            }
            Section::Mappings if trimmed.is_empty() => {
                if !current.is_empty() {
                    blocks.push(std::mem::take(&mut current));
                }
            }
            Section::Mappings => {
                let first = trimmed.split_whitespace().next().unwrap_or("");
                let indented = raw.starts_with(char::is_whitespace);
                if !indented && matches!(first, "mappingId" | "target" | "source") {
                    let rest = trimmed[first.len()..].trim().to_owned();
                    current.push((first.to_owned(), rest, line));
                } else if let Some(last) = current.last_mut() {
                    last.1.push(' ');
                    last.1.push_str(trimmed);
                } else {
                    return syntax(line, format!("unexpected `{trimmed}`"));
                }
            }
            Section::Done if !trimmed.is_empty() => return syntax(line, "content after `]]`"),
            _ if trimmed.is_empty() => {}
            _ => return syntax(line, format!("unexpected `{trimmed}`")),
        }
    }
    if section != Section::Done {
        return syntax(text.lines().count(), "missing `]]` closing the mapping collection");
    }
    let mut rules = Vec::new();
    let mut ids = BTreeSet::new();
    for block in blocks {
        let field = |name: &str| block.iter().find(|(f, _, _)| f == name);
        let line = block[0].2;
        for (f, _, l) in &block {
            if block.iter().filter(|(g, _, _)| g == f).count() > 1 {
                return syntax(*l, format!("duplicate `{f}` field"));
            }
        }
        let (Some(id), Some(target), Some(source)) = (field("mappingId"), field("target"), field("source")) else {
            return syntax(line, "a mapping needs mappingId, target and source");
        };
        if !ids.insert(id.1.clone()) {
            return syntax(id.2, format!("duplicate mappingId `{}`", id.1));
        }
        rules.push(MappingRule {
            id: id.1.clone(),
            target: parse_target(&target.1, &prefixes, target.2)?,
            source: parse_source(&source.1, source.2)?,
        });
    }
    let doc = MappingDocument { rules };
    doc.validate()?;
    Ok(doc)
}

pub fn builtin_rules() -> MappingDocument {
    parse_mapping(BUILTIN_RULES).expect("bundled rules are valid")
}

impl MappingRule {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, MappingError> {
        Err(MappingError::Rule { id: self.id.clone(), message: message.into() })
    }

    /// Checks tables, columns and placeholders against the store schema.
    pub fn validate(&self) -> Result<(), MappingError> {
        let schema = CityStore::new();
        let mut aliases: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        let src = &self.source;
        for (t, a) in std::iter::once((&src.table, &src.alias)).chain(src.joins.iter().map(|j| (&j.table, &j.alias))) {
            let cols = match schema.view_columns(t) {
                Ok(c) => c,
                Err(_) => return self.err(format!("unknown table `{t}`")),
            };
            if aliases.insert(a, cols).is_some() {
                return self.err(format!("alias `{a}` used twice"));
            }
        }
        let check = |q: &str| -> Result<(), MappingError> {
            let (a, c) = q.split_once('.').unwrap_or((q, ""));
            match aliases.get(a) {
                None => self.err(format!("unknown alias in `{q}`")),
                Some(cols) if !cols.iter().any(|x| x == c) => self.err(format!("unknown column `{q}`")),
                Some(_) => Ok(()),
            }
        };
        for s in &src.select {
            check(&s.column)?;
        }
        for j in &src.joins {
            for (l, r) in &j.on {
                check(l)?;
                check(r)?;
            }
        }
        for cond in &src.conditions {
            match cond {
                Condition::Compare(f) => check(&f.column)?,
                Condition::IsNull { column, .. } => check(column)?,
            }
        }
        let names: BTreeSet<&str> = src.select.iter().map(|s| s.name.as_str()).collect();
        if names.len() != src.select.len() {
            return self.err("duplicate output column name");
        }
        for t in &self.target {
            for term in [&t.subject, &t.predicate, &t.object] {
                for c in term.columns() {
                    if !names.contains(c) {
                        return self.err(format!("placeholder `{{{c}}}` is not a selected column"));
                    }
                }
                if let TermTemplate::Iri(parts) = term {
                    let absolute = matches!(parts.first(), Some(Part::Text(t)) if t.contains("://"));
                    if !absolute {
                        return self.err("IRI template does not start with an absolute namespace");
                    }
                }
            }
        }
        Ok(())
    }

    /// Rows of the source query, with the selected columns in order.
    pub fn source_rows(&self, store: &CityStore) -> Result<View, MappingError> {
        let src = &self.source;
        let mut view = store.view(&src.table)?.qualified(&src.alias);
        for j in &src.joins {
            let right = store.view(&j.table)?.qualified(&j.alias);
            let on: Vec<(&str, &str)> =
                j.on.iter()
                    .map(|(l, r)| {
                        if l.starts_with(&format!("{}.", j.alias)) {
                            (r.as_str(), l.as_str())
                        } else {
                            (l.as_str(), r.as_str())
                        }
                    })
                    .collect();
            view = equi_join(&view, &right, &on)?;
        }
        let filters: Vec<Filter> = src
            .conditions
            .iter()
            .filter_map(|c| match c {
                Condition::Compare(f) => Some(f.clone()),
                Condition::IsNull { .. } => None,
            })
            .collect();
        view = scan(&view, &filters)?;
        for cond in &src.conditions {
            if let Condition::IsNull { column, negated } = cond {
                let i = view.column_index(column)?;
                view.rows.retain(|r| r[i].is_null() != *negated);
            }
        }
        let idx: Vec<usize> = src.select.iter().map(|s| view.column_index(&s.column)).collect::<Result<_, _>>()?;
        Ok(View {
            name: self.id.clone(),
            columns: src.select.iter().map(|s| s.name.clone()).collect(),
            rows: view.rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect(),
        })
    }
}

impl MappingDocument {
    pub fn validate(&self) -> Result<(), MappingError> {
        self.rules.iter().try_for_each(MappingRule::validate)
    }
}

fn percent_encode(s: &str, out: &mut String) {
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
}

fn instantiate(t: &TermTemplate, row: &[Value], cols: &BTreeMap<&str, usize>) -> Option<Term> {
    let render = |parts: &[Part], encode: bool| -> Option<String> {
        let mut s = String::new();
        for p in parts {
            match p {
                Part::Text(x) => s.push_str(x),
                Part::Column(c) => {
                    let v = &row[cols[c.as_str()]];
                    if v.is_null() {
                        return None;
                    }
                    if encode {
                        percent_encode(&v.to_string(), &mut s);
                    } else {
                        s.push_str(&v.to_string());
                    }
                }
            }
        }
        Some(s)
    };
    match t {
        TermTemplate::Iri(parts) => render(parts, true).map(Term::Iri),
        TermTemplate::Literal { parts, datatype, lang } => {
            let lexical = render(parts, false)?;
            Some(match (datatype, lang) {
                (_, Some(l)) => Term::lang_string(lexical, l.clone()),
                (Some(dt), None) => Term::typed(lexical, dt.clone()),
                (None, None) => Term::string(lexical),
            })
        }
    }
}

/// One instantiation of each target template per source row; templates
/// that hit a NULL placeholder are skipped for that row.
pub fn expand_rule(rule: &MappingRule, store: &CityStore) -> Result<Vec<(Term, Term, Term)>, MappingError> {
    let view = rule.source_rows(store)?;
    let cols: BTreeMap<&str, usize> = view.columns.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut out = Vec::new();
    for row in &view.rows {
        for t in &rule.target {
            if let (Some(s), Some(p), Some(o)) = (
                instantiate(&t.subject, row, &cols),
                instantiate(&t.predicate, row, &cols),
                instantiate(&t.object, row, &cols),
            ) {
                out.push((s, p, o));
            }
        }
    }
    Ok(out)
}

/// Expands every rule, asserts the schema axioms and applies the
/// subproperty closure.
pub fn materialize(store: &CityStore, doc: &MappingDocument, axioms: &SchemaAxioms) -> Result<TripleSet, MappingError> {
    doc.validate()?;
    axioms.validate()?;
    let fragments: Vec<Vec<(Term, Term, Term)>> =
        doc.rules.par_iter().map(|r| expand_rule(r, store)).collect::<Result<_, _>>()?;
    let mut ts = TripleSet::new();
    for (sub, sup) in &axioms.subproperties {
        ts.insert(Term::iri(sub.clone()), Term::iri(vocab::RDFS_SUBPROPERTY_OF), Term::iri(sup.clone()));
    }
    for (s, p, o) in fragments.into_iter().flatten() {
        ts.insert(s, p, o);
    }
    ts.apply_subproperty_closure();
    Ok(ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{objectclass, BuildingRow, CityObjectRow};

    fn prefixes() -> BTreeMap<String, String> {
        [("".to_owned(), vocab::BASE.to_owned()), ("xsd".to_owned(), vocab::XSD.to_owned())].into_iter().collect()
    }

    #[test]
    fn builtin_rules_parse_and_validate() {
        let doc = builtin_rules();
        assert!(doc.rules.len() >= 10);
        assert!(doc.rules.iter().any(|r| r.id == "association-adjacent"));
    }

    #[test]
    fn target_templates() {
        let t = parse_target(":b/{id} a :X ; :h {h}^^xsd:decimal , \"n {id}\"@de .", &prefixes(), 1).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(
            t[1].object,
            TermTemplate::Literal {
                parts: vec![Part::Column("h".into())],
                datatype: Some(format!("{}decimal", vocab::XSD)),
                lang: None
            }
        );
        assert!(parse_target(":b/{id} :p", &prefixes(), 1).is_err());
        assert!(parse_target("q:b :p :o .", &prefixes(), 1).is_err());
    }

    #[test]
    fn source_grammar() {
        let q = parse_source("SELECT c.gmlid AS g, b.id FROM building b JOIN cityobject c ON b.id = c.id WHERE b.measured_height > 30 AND b.roof_type IS NOT NULL", 1).unwrap();
        assert_eq!(q.select[0].name, "g");
        assert_eq!(q.select[1].name, "id");
        assert_eq!(q.joins.len(), 1);
        assert_eq!(q.conditions.len(), 2);
        assert!(parse_source("SELECT id FROM building", 1).is_err());
    }

    #[test]
    fn validation_catches_unknown_names() {
        let doc = |src: &str, tgt: &str| {
            parse_mapping(&format!(
                "[PrefixDeclaration]\n:\t{}\n\n[MappingDeclaration] @collection [[\nmappingId\tr\ntarget\t{tgt}\nsource\t{src}\n]]\n",
                vocab::BASE
            ))
        };
        assert!(doc("SELECT b.id FROM building b", ":b/{id} :p :o .").is_ok());
        assert!(doc("SELECT b.nope FROM building b", ":b/{nope} :p :o .").is_err());
        assert!(doc("SELECT b.id FROM nowhere b", ":b/{id} :p :o .").is_err());
        assert!(doc("SELECT b.id FROM building b", ":b/{other} :p :o .").is_err());
    }

    fn store_with_building(height: Option<f64>) -> CityStore {
        let mut s = CityStore::new();
        s.insert_cityobject(CityObjectRow {
            id: 10,
            objectclass_id: objectclass::BUILDING,
            gmlid: "DEBY_LOD2_4959457".into(),
        })
        .unwrap();
        s.insert_building(BuildingRow {
            id: 10,
            objectclass_id: objectclass::BUILDING,
            building_root_id: 10,
            roof_type: Some("1000".into()),
            measured_height: height,
            lod2_solid_id: None,
        })
        .unwrap();
        s
    }

    #[test]
    fn building_rule_emits_decimal_height() {
        let doc = builtin_rules();
        let rule = doc.rules.iter().find(|r| r.id == "building").unwrap();
        let triples = expand_rule(rule, &store_with_building(Some(13.363))).unwrap();
        let b = Term::iri(format!("{}building/DEBY_LOD2_4959457", vocab::BASE));
        assert!(triples.contains(&(
            b.clone(),
            Term::iri(format!("{}measuredHeight", vocab::BLDG)),
            Term::typed("13.363", vocab::XSD_DECIMAL)
        )));
        // a NULL height only drops the height triple
        let triples = expand_rule(rule, &store_with_building(None)).unwrap();
        assert_eq!(triples.len(), 1);
        assert!(expand_rule(rule, &CityStore::new()).unwrap().is_empty());
    }

    #[test]
    fn roof_label_and_encoding() {
        let ts = materialize(&store_with_building(Some(1.0)), &builtin_rules(), &SchemaAxioms::default()).unwrap();
        let roof = Term::iri(format!("{}roof/10", vocab::BASE));
        assert!(ts.contains(&roof, &Term::iri(format!("{}roofType", vocab::BLDG)), &Term::string("flat roof")));
        let mut out = String::new();
        percent_encode("a b/ü", &mut out);
        assert_eq!(out, "a%20b%2F%C3%BC");
    }

    #[test]
    fn cyclic_axioms_are_rejected() {
        let ax = SchemaAxioms { subproperties: vec![("a".into(), "b".into()), ("b".into(), "a".into())] };
        assert!(ax.validate().is_err());
        assert!(SchemaAxioms::default().validate().is_ok());
    }
}
