//! Tokenizer and recursive-descent parser for the supported SPARQL subset.

use std::collections::HashMap;

use super::ast::*;
use super::QueryError;
use crate::rdf::{vocab, Term};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Iri(String),
    PName(String, String),
    Var(String),
    Str(String),
    LangTag(String),
    Integer(String),
    Decimal(String),
    Double(String),
    Word(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCT: [&str; 22] = [
    "^^", "&&", "||", "!=", "<=", ">=", "{", "}", "(", ")", ".", ";", ",", "*", "/", "=", "<", ">", "!", "+", "-", "|",
];

fn syntax_err(line: usize, col: usize, message: impl Into<String>) -> QueryError {
    QueryError::Syntax { line, col, message: message.into() }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Lexer {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, message: impl Into<String>) -> QueryError {
        syntax_err(self.line, self.col, message)
    }

    fn unicode_escape(&mut self, len: usize) -> Result<char, QueryError> {
        let mut hex = String::new();
        for _ in 0..len {
            hex.push(self.bump().ok_or_else(|| self.err("truncated \\u escape"))?);
        }
        u32::from_str_radix(&hex, 16)
            .ok()
            .and_then(char::from_u32)
            .ok_or_else(|| self.err(format!("bad escape \\u{hex}")))
    }

    /// `<` starts an IRI when a well-formed `<...>` follows.
    fn iri_ahead(&self) -> bool {
        let mut k = 1;
        while let Some(c) = self.peek(k) {
            match c {
                '>' => return true,
                c if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') => return false,
                _ => k += 1,
            }
        }
        false
    }

    fn tokens(mut self) -> Result<Vec<Token>, QueryError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek(0) {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek(0) else {
                out.push(Token { tok: Tok::Eof, line, col });
                return Ok(out);
            };
            let tok = if c == '<' && self.iri_ahead() {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('>') => break,
                        Some('\\') => match self.bump() {
                            Some('u') => s.push(self.unicode_escape(4)?),
                            Some('U') => s.push(self.unicode_escape(8)?),
                            _ => return Err(self.err("bad escape in IRI")),
                        },
                        Some(ch) => s.push(ch),
                        None => return Err(self.err("unterminated IRI")),
                    }
                }
                Tok::Iri(s)
            } else if c == '?' || c == '$' {
                self.bump();
                let mut s = String::new();
                while self.peek(0).is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    s.push(self.bump().unwrap_or_default());
                }
                if s.is_empty() {
                    return Err(self.err("empty variable name"));
                }
                Tok::Var(s)
            } else if c == '"' || c == '\'' {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some(q) if q == c => break,
                        Some('\\') => match self.bump() {
                            Some('n') => s.push('\n'),
                            Some('r') => s.push('\r'),
                            Some('t') => s.push('\t'),
                            Some('b') => s.push('\u{8}'),
                            Some('f') => s.push('\u{c}'),
                            Some('u') => s.push(self.unicode_escape(4)?),
                            Some('U') => s.push(self.unicode_escape(8)?),
                            Some(e @ ('"' | '\'' | '\\')) => s.push(e),
                            _ => return Err(self.err("bad escape in string")),
                        },
                        Some('\n') | None => return Err(syntax_err(line, col, "unterminated string")),
                        Some(ch) => s.push(ch),
                    }
                }
                Tok::Str(s)
            } else if c == '@' {
                self.bump();
                let mut s = String::new();
                while self.peek(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == '-') {
                    s.push(self.bump().unwrap_or_default());
                }
                Tok::LangTag(s)
            } else if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) {
                let mut s = String::new();
                while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                    s.push(self.bump().unwrap_or_default());
                }
                let mut decimal = false;
                if self.peek(0) == Some('.') && self.peek(1).is_some_and(|d| d.is_ascii_digit()) {
                    decimal = true;
                    s.push(self.bump().unwrap_or_default());
                    while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                        s.push(self.bump().unwrap_or_default());
                    }
                }
                if matches!(self.peek(0), Some('e' | 'E')) {
                    s.push(self.bump().unwrap_or_default());
                    if matches!(self.peek(0), Some('+' | '-')) {
                        s.push(self.bump().unwrap_or_default());
                    }
                    if !self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                        return Err(self.err("malformed exponent"));
                    }
                    while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                        s.push(self.bump().unwrap_or_default());
                    }
                    Tok::Double(s)
                } else if decimal {
                    Tok::Decimal(s)
                } else {
                    Tok::Integer(s)
                }
            } else if c.is_alphabetic() || c == '_' || c == ':' {
                let mut prefix = String::new();
                while self.peek(0).is_some_and(is_name_char)
                    || (self.peek(0) == Some('.') && self.peek(1).is_some_and(is_name_char))
                {
                    prefix.push(self.bump().unwrap_or_default());
                }
                if self.peek(0) == Some(':') {
                    self.bump();
                    let mut local = String::new();
                    while self.peek(0).is_some_and(is_name_char)
                        || (self.peek(0) == Some('.') && self.peek(1).is_some_and(is_name_char))
                    {
                        local.push(self.bump().unwrap_or_default());
                    }
                    Tok::PName(prefix, local)
                } else {
                    Tok::Word(prefix)
                }
            } else if let Some(p) = PUNCT.iter().find(|p| p.chars().enumerate().all(|(k, pc)| self.peek(k) == Some(pc)))
            {
                for _ in 0..p.len() {
                    self.bump();
                }
                Tok::Punct(p)
            } else {
                return Err(self.err(format!("unexpected character `{c}`")));
            };
            out.push(Token { tok, line, col });
        }
    }
}

const UNSUPPORTED_WORDS: [&str; 16] = [
    "CONSTRUCT",
    "ASK",
    "DESCRIBE",
    "UNION",
    "MINUS",
    "SERVICE",
    "GRAPH",
    "HAVING",
    "REDUCED",
    "FROM",
    "BASE",
    "EXISTS",
    "NOT",
    "IN",
    "INSERT",
    "DELETE",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    prefixes: HashMap<String, String>,
    declared: Vec<(String, String)>,
}

type PResult<T> = Result<T, QueryError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(syntax_err(line, col, message))
    }

    fn unsupported<T>(&self, construct: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(QueryError::Unsupported { construct: construct.into(), line, col })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Eof => "end of query".into(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Word(w) => format!("`{w}`"),
            Tok::Var(v) => format!("`?{v}`"),
            Tok::Iri(i) => format!("`<{i}>`"),
            Tok::PName(p, l) => format!("`{p}:{l}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            other => format!("{other:?}"),
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x.eq_ignore_ascii_case(w))
    }

    fn eat_word(&mut self, w: &str) -> bool {
        let hit = self.is_word(w);
        if hit {
            self.next();
        }
        hit
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.eat_word(w) {
            Ok(())
        } else {
            self.err(format!("expected {w}, found {}", self.describe()))
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(x) if *x == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        let hit = self.is_punct(p);
        if hit {
            self.next();
        }
        hit
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn check_unsupported_word(&self) -> PResult<()> {
        if let Tok::Word(w) = self.peek() {
            if let Some(u) = UNSUPPORTED_WORDS.iter().find(|u| w.eq_ignore_ascii_case(u)) {
                return self.unsupported(*u);
            }
        }
        Ok(())
    }

    fn expand(&self, prefix: &str, local: &str) -> PResult<String> {
        match self.prefixes.get(prefix) {
            Some(ns) => Ok(format!("{ns}{local}")),
            None => self.err(format!("undeclared prefix `{prefix}:`")),
        }
    }

    fn var(&mut self) -> PResult<String> {
        match self.next() {
            Tok::Var(v) => Ok(v),
            _ => {
                self.pos -= 1;
                self.err(format!("expected a variable, found {}", self.describe()))
            }
        }
    }

    fn iri(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Iri(i) => {
                self.next();
                Ok(i)
            }
            Tok::PName(p, l) => {
                let iri = self.expand(&p, &l)?;
                self.next();
                Ok(iri)
            }
            _ => self.err(format!("expected an IRI, found {}", self.describe())),
        }
    }

    /// IRI, literal, number or boolean.
    fn constant(&mut self) -> PResult<Option<Term>> {
        Ok(Some(match self.peek().clone() {
            Tok::Iri(_) | Tok::PName(..) => Term::Iri(self.iri()?),
            Tok::Str(s) => {
                self.next();
                match self.peek().clone() {
                    Tok::LangTag(l) => {
                        self.next();
                        Term::lang_string(s, l.to_ascii_lowercase())
                    }
                    Tok::Punct("^^") => {
                        self.next();
                        let dt = self.iri()?;
                        Term::typed(s, dt)
                    }
                    _ => Term::string(s),
                }
            }
            Tok::Integer(n) => {
                self.next();
                Term::typed(n, vocab::XSD_INTEGER)
            }
            Tok::Decimal(n) => {
                self.next();
                Term::typed(n, vocab::XSD_DECIMAL)
            }
            Tok::Double(n) => {
                self.next();
                Term::typed(n, vocab::XSD_DOUBLE)
            }
            Tok::Word(w) if w == "true" || w == "false" => {
                self.next();
                Term::boolean(w == "true")
            }
            _ => return Ok(None),
        }))
    }

    fn query(&mut self) -> PResult<Query> {
        while self.is_word("PREFIX") {
            self.next();
            let (p, local) = match self.next() {
                Tok::PName(p, l) => (p, l),
                _ => {
                    self.pos -= 1;
                    return self.err("expected `prefix:` after PREFIX");
                }
            };
            if !local.is_empty() {
                return self.err("prefix declaration must end with `:`");
            }
            let ns = match self.next() {
                Tok::Iri(i) => i,
                _ => {
                    self.pos -= 1;
                    return self.err("expected a namespace IRI");
                }
            };
            self.prefixes.insert(p.clone(), ns.clone());
            self.declared.push((p, ns));
        }
        self.check_unsupported_word()?;
        self.expect_word("SELECT")?;
        let distinct = self.eat_word("DISTINCT");
        self.check_unsupported_word()?;
        let mut projection = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Var(v) => {
                    self.next();
                    projection.push(Projection::Var(v));
                }
                Tok::Punct("*") => return self.unsupported("SELECT *"),
                Tok::Punct("(") => {
                    self.next();
                    let Tok::Word(w) = self.peek().clone() else {
                        return self.unsupported("projected expression");
                    };
                    let Some(func) = AggregateFn::from_keyword(&w) else {
                        return self.unsupported("projected expression");
                    };
                    self.next();
                    self.expect_punct("(")?;
                    let agg_distinct = self.eat_word("DISTINCT");
                    let arg = if self.eat_punct("*") {
                        if func != AggregateFn::Count {
                            return self.err("only COUNT accepts `*`");
                        }
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect_punct(")")?;
                    self.expect_word("AS")?;
                    let alias = self.var()?;
                    self.expect_punct(")")?;
                    projection.push(Projection::Aggregate { func, distinct: agg_distinct, arg, alias });
                }
                _ => break,
            }
        }
        if projection.is_empty() {
            return self.err(format!("expected a projection, found {}", self.describe()));
        }
        self.check_unsupported_word()?;
        self.eat_word("WHERE");
        let pattern = self.group()?;
        let mut group_by = Vec::new();
        if self.eat_word("GROUP") {
            self.expect_word("BY")?;
            while let Tok::Var(_) = self.peek() {
                group_by.push(self.var()?);
            }
            if group_by.is_empty() {
                return self.unsupported("GROUP BY expression");
            }
        }
        self.check_unsupported_word()?;
        let mut order_by = Vec::new();
        if self.eat_word("ORDER") {
            self.expect_word("BY")?;
            loop {
                if self.is_word("ASC") || self.is_word("DESC") {
                    let descending = self.is_word("DESC");
                    self.next();
                    self.expect_punct("(")?;
                    let expr = self.expr()?;
                    self.expect_punct(")")?;
                    order_by.push(OrderKey { expr, descending });
                } else if let Tok::Var(v) = self.peek().clone() {
                    self.next();
                    order_by.push(OrderKey { expr: Expr::Var(v), descending: false });
                } else if self.eat_punct("(") {
                    let expr = self.expr()?;
                    self.expect_punct(")")?;
                    order_by.push(OrderKey { expr, descending: false });
                } else {
                    break;
                }
            }
            if order_by.is_empty() {
                return self.err("ORDER BY needs at least one key");
            }
        }
        let (mut limit, mut offset) = (None, None);
        loop {
            if self.eat_word("LIMIT") {
                limit = Some(self.count()?);
            } else if self.eat_word("OFFSET") {
                offset = Some(self.count()?);
            } else {
                break;
            }
        }
        self.check_unsupported_word()?;
        if *self.peek() != Tok::Eof {
            return self.err(format!("unexpected {}", self.describe()));
        }
        Ok(Query {
            prefixes: std::mem::take(&mut self.declared),
            distinct,
            projection,
            pattern,
            group_by,
            order_by,
            limit,
            offset,
        })
    }

    fn count(&mut self) -> PResult<usize> {
        match self.next() {
            Tok::Integer(n) => n.parse().or_else(|_| self.err("count out of range")),
            _ => {
                self.pos -= 1;
                self.err("expected a non-negative integer")
            }
        }
    }

    fn group(&mut self) -> PResult<GroupPattern> {
        self.expect_punct("{")?;
        let mut elements = Vec::new();
        loop {
            self.check_unsupported_word()?;
            match self.peek().clone() {
                Tok::Punct("}") => {
                    self.next();
                    break;
                }
                Tok::Punct(".") => {
                    self.next();
                }
                Tok::Punct("{") => return self.unsupported("nested group"),
                Tok::Word(w) if w.eq_ignore_ascii_case("FILTER") => {
                    self.next();
                    elements.push(Element::Filter(self.constraint()?));
                }
                Tok::Word(w) if w.eq_ignore_ascii_case("OPTIONAL") => {
                    self.next();
                    elements.push(Element::Optional(self.group()?));
                }
                Tok::Word(w) if w.eq_ignore_ascii_case("BIND") => {
                    self.next();
                    self.expect_punct("(")?;
                    let expr = self.expr()?;
                    self.expect_word("AS")?;
                    let var = self.var()?;
                    self.expect_punct(")")?;
                    elements.push(Element::Bind { expr, var });
                }
                Tok::Word(w) if w.eq_ignore_ascii_case("VALUES") => {
                    self.next();
                    elements.push(self.values()?);
                }
                Tok::Eof => return self.err("unterminated group, expected `}`"),
                _ => self.triples(&mut elements)?,
            }
        }
        Ok(GroupPattern { elements })
    }

    fn values(&mut self) -> PResult<Element> {
        let single = matches!(self.peek(), Tok::Var(_));
        let vars = if single {
            vec![self.var()?]
        } else {
            self.expect_punct("(")?;
            let mut vs = Vec::new();
            while let Tok::Var(_) = self.peek() {
                vs.push(self.var()?);
            }
            self.expect_punct(")")?;
            vs
        };
        self.expect_punct("{")?;
        let mut rows = Vec::new();
        while !self.eat_punct("}") {
            if single {
                rows.push(vec![self.data_value()?]);
            } else {
                self.expect_punct("(")?;
                let mut row = Vec::new();
                while !self.eat_punct(")") {
                    row.push(self.data_value()?);
                }
                if row.len() != vars.len() {
                    return self.err(format!("VALUES row has {} values for {} variables", row.len(), vars.len()));
                }
                rows.push(row);
            }
        }
        Ok(Element::Values { vars, rows })
    }

    fn data_value(&mut self) -> PResult<Option<Term>> {
        if self.eat_word("UNDEF") {
            return Ok(None);
        }
        match self.constant()? {
            Some(t) => Ok(Some(t)),
            None => self.err(format!("expected a data value, found {}", self.describe())),
        }
    }

    fn term_pattern(&mut self) -> PResult<TermPattern> {
        if let Tok::Var(v) = self.peek().clone() {
            self.next();
            return Ok(TermPattern::Var(v));
        }
        if self.is_punct("[") || matches!(self.peek(), Tok::PName(p, _) if p == "_") {
            return self.unsupported("blank node");
        }
        match self.constant()? {
            Some(t) => Ok(TermPattern::Term(t)),
            None => self.err(format!("expected a term, found {}", self.describe())),
        }
    }

    fn verb(&mut self) -> PResult<Vec<TermPattern>> {
        if let Tok::Var(v) = self.peek().clone() {
            self.next();
            return Ok(vec![TermPattern::Var(v)]);
        }
        let mut path = Vec::new();
        loop {
            if self.is_punct("^") || self.is_punct("!") || self.is_punct("(") {
                return self.unsupported("property path operator");
            }
            if self.eat_word("a") {
                path.push(TermPattern::Term(Term::iri(vocab::RDF_TYPE)));
            } else {
                path.push(TermPattern::Term(Term::Iri(self.iri()?)));
            }
            if self.is_punct("*") || self.is_punct("+") || self.is_punct("|") || matches!(self.peek(), Tok::Punct("?"))
            {
                return self.unsupported("property path operator");
            }
            if !self.eat_punct("/") {
                break;
            }
        }
        Ok(path)
    }

    fn triples(&mut self, out: &mut Vec<Element>) -> PResult<()> {
        let subject = self.term_pattern()?;
        if matches!(&subject, TermPattern::Term(t) if t.is_literal()) {
            return self.err("literal in subject position");
        }
        loop {
            let path = self.verb()?;
            loop {
                let object = self.term_pattern()?;
                out.push(Element::Triple(TriplePattern { subject: subject.clone(), path: path.clone(), object }));
                if !self.eat_punct(",") {
                    break;
                }
            }
            if !self.eat_punct(";") {
                break;
            }
            while self.eat_punct(";") {}
            if self.is_punct(".") || self.is_punct("}") {
                break;
            }
        }
        Ok(())
    }

    fn constraint(&mut self) -> PResult<Expr> {
        if self.is_punct("(") {
            self.next();
            let e = self.expr()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        match self.primary()? {
            e @ Expr::Call(..) => Ok(e),
            _ => self.err("FILTER needs a bracketed expression or a function call"),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut e = self.and_expr()?;
        while self.eat_punct("||") {
            e = Expr::Binary(BinaryOp::Or, Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut e = self.relational()?;
        while self.eat_punct("&&") {
            e = Expr::Binary(BinaryOp::And, Box::new(e), Box::new(self.relational()?));
        }
        Ok(e)
    }

    fn relational(&mut self) -> PResult<Expr> {
        let e = self.additive()?;
        let op = match self.peek() {
            Tok::Punct("=") => BinaryOp::Eq,
            Tok::Punct("!=") => BinaryOp::Ne,
            Tok::Punct("<") => BinaryOp::Lt,
            Tok::Punct("<=") => BinaryOp::Le,
            Tok::Punct(">") => BinaryOp::Gt,
            Tok::Punct(">=") => BinaryOp::Ge,
            _ => {
                self.check_unsupported_word()?;
                return Ok(e);
            }
        };
        self.next();
        Ok(Expr::Binary(op, Box::new(e), Box::new(self.additive()?)))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut e = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => BinaryOp::Add,
                Tok::Punct("-") => BinaryOp::Sub,
                _ => return Ok(e),
            };
            self.next();
            e = Expr::Binary(op, Box::new(e), Box::new(self.multiplicative()?));
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("*") => BinaryOp::Mul,
                Tok::Punct("/") => BinaryOp::Div,
                _ => return Ok(e),
            };
            self.next();
            e = Expr::Binary(op, Box::new(e), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_punct("!") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.eat_punct("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        self.primary()
    }

    fn args(&mut self, f: Function) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.eat_punct(")") {
            loop {
                args.push(self.expr()?);
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        if args.len() != f.arity() {
            return self.err(format!("function expects {} arguments, got {}", f.arity(), args.len()));
        }
        if f == Function::Bound && !matches!(args[0], Expr::Var(_)) {
            return self.err("BOUND takes a variable");
        }
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Punct("(") => {
                self.next();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Var(v) => {
                self.next();
                Ok(Expr::Var(v))
            }
            Tok::Word(w) if Function::from_keyword(&w).is_some() && *self.peek_at(1) == Tok::Punct("(") => {
                let f = Function::from_keyword(&w).expect("checked");
                self.next();
                Ok(Expr::Call(f, self.args(f)?))
            }
            Tok::Word(w) if *self.peek_at(1) == Tok::Punct("(") && AggregateFn::from_keyword(&w).is_none() => {
                self.unsupported(format!("function {}", w.to_ascii_uppercase()))
            }
            Tok::Iri(_) | Tok::PName(..) if *self.peek_at(1) == Tok::Punct("(") => {
                let iri = self.iri()?;
                match Function::from_iri(&iri) {
                    Some(f) => Ok(Expr::Call(f, self.args(f)?)),
                    None => {
                        self.pos -= 1;
                        self.unsupported(format!("function <{iri}>"))
                    }
                }
            }
            _ => {
                self.check_unsupported_word()?;
                match self.constant()? {
                    Some(t) => Ok(Expr::Const(t)),
                    None => self.err(format!("expected an expression, found {}", self.describe())),
                }
            }
        }
    }
}

/// Parses a query. Prefixes of the query prefix table and the standard
/// vocabularies are predeclared; PREFIX lines override them.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let toks = Lexer { chars: text.chars().collect(), pos: 0, line: 1, col: 1 }.tokens()?;
    let prefixes = vocab::PREFIXES.iter().map(|(p, ns)| ((*p).to_owned(), (*ns).to_owned())).collect();
    let mut p = Parser { toks, pos: 0, prefixes, declared: Vec::new() };
    p.query()
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q1: &str = "SELECT ?address_label\n{\n?building bldg:address ?address_id .\n?address_id rdfs:label ?address_label .\n?building bldg:measuredHeight ?buildingHeight .\nFILTER(?buildingHeight > 30) .\n}\n";
    const Q3: &str = "SELECT ?building (COUNT(?surface) AS ?totalsurface)\n{\n?building a bldg:Building .\n?building bldg:boundedBy ?surface .\n?surface a bldg:RoofSurface .\n}\nGROUP BY ?building\nORDER BY DESC(?totalsurface)\nLIMIT 10\n";

    #[test]
    fn height_filter_is_parsed() {
        let q = parse_query(Q1).unwrap();
        let filter = Expr::Binary(
            BinaryOp::Gt,
            Box::new(Expr::Var("buildingHeight".into())),
            Box::new(Expr::Const(Term::typed("30", vocab::XSD_INTEGER))),
        );
        assert!(q.pattern.elements.contains(&Element::Filter(filter)));
        assert_eq!(q.projection, vec![Projection::Var("address_label".into())]);
    }

    #[test]
    fn count_group_limit() {
        let q = parse_query(Q3).unwrap();
        assert!(
            matches!(&q.projection[1], Projection::Aggregate { func: AggregateFn::Count, alias, .. } if alias == "totalsurface")
        );
        assert_eq!(q.group_by, ["building"]);
        assert_eq!(q.order_by, vec![OrderKey { expr: Expr::Var("totalsurface".into()), descending: true }]);
        assert_eq!(q.limit, Some(10));
    }

    #[test]
    fn select_star_is_unsupported() {
        let err = parse_query("SELECT * { ?s ?p ?o }").unwrap_err();
        assert!(
            matches!(err, QueryError::Unsupported { ref construct, line: 1, col: 8 } if construct == "SELECT *"),
            "{err:?}"
        );
    }

    #[test]
    fn unsupported_constructs_are_named() {
        for (text, construct) in [
            ("SELECT ?s { ?s ?p ?o } UNION { ?s ?p ?o }", "UNION"),
            ("CONSTRUCT { ?s ?p ?o } WHERE { ?s ?p ?o }", "CONSTRUCT"),
            ("SELECT ?s { ?s rdfs:label* ?o }", "property path operator"),
            ("SELECT ?s { ?s ?p ?o FILTER(REGEX(?o, \"a\")) }", "function REGEX"),
        ] {
            match parse_query(text) {
                Err(QueryError::Unsupported { construct: c, .. }) => assert_eq!(c, construct, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_query("SELECT ?s\n{ ?s ?p }").unwrap_err();
        assert!(matches!(err, QueryError::Syntax { line: 2, .. }), "{err:?}");
        let err = parse_query("SELECT ?s { ?s nope:x ?o }").unwrap_err();
        assert!(matches!(err, QueryError::Syntax { line: 1, col: 16, .. }), "{err:?}");
    }

    #[test]
    fn printer_round_trips() {
        for text in [Q1, Q3, "SELECT DISTINCT ?a { ?a :p/:q \"x\"@de . OPTIONAL { ?a rdfs:label ?l } VALUES (?a ?b) { (:x UNDEF) } BIND(geof:buffer(?a, 20, uom:metre) AS ?z) FILTER(!BOUND(?l) || -?b <= 2.5e0) } ORDER BY ?a OFFSET 2"] {
            let q = parse_query(text).unwrap();
            let printed = q.to_string();
            let again = parse_query(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
            assert_eq!(again.pattern, q.pattern);
            assert_eq!(again.projection, q.projection);
            assert_eq!(again.to_string(), printed);
        }
    }
}
