//! RDF terms, an indexed in-memory triple set, and Turtle I/O.

mod turtle;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Bound;

pub use turtle::{parse_turtle, serialize_turtle, TurtleError};

pub mod vocab {
    pub const BASE: &str = "https://github.com/yuzzfeng/D2G2/citygml#";
    pub const BLDG: &str = "http://www.opengis.net/citygml/building/2.0/";
    pub const GEO: &str = "http://www.opengis.net/ont/geosparql#";
    pub const GEOF: &str = "http://www.opengis.net/def/function/geosparql/";
    pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
    pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
    pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
    pub const LGDO: &str = "http://linkedgeodata.org/ontology/";
    pub const SF: &str = "http://www.opengis.net/ont/sf#";
    pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
    pub const UOM: &str = "http://www.opengis.net/def/uom/OGC/1.0/";

    pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";
    pub const RDFS_SUBPROPERTY_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subPropertyOf";
    pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
    pub const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";
    pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
    pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
    pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
    pub const WKT_LITERAL: &str = "http://www.opengis.net/ont/geosparql#wktLiteral";

    /// Prefixes written by the serializer and predeclared for queries.
    /// The first five are the query prefix table; the rest are the
    /// standard vocabularies the queries use without declaring them.
    pub const PREFIXES: &[(&str, &str)] = &[
        ("", BASE),
        ("bldg", BLDG),
        ("geo", GEO),
        ("rdfs", RDFS),
        ("lgdo", LGDO),
        ("rdf", RDF),
        ("xsd", XSD),
        ("geof", GEOF),
        ("uom", UOM),
        ("sf", SF),
        ("owl", OWL),
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(String),
    Blank(String),
    Literal { lexical: String, datatype: String, lang: Option<String> },
}

impl Term {
    pub fn iri(s: impl Into<String>) -> Self {
        Term::Iri(s.into())
    }

    pub fn string(s: impl Into<String>) -> Self {
        Term::typed(s, vocab::XSD_STRING)
    }

    pub fn typed(s: impl Into<String>, datatype: impl Into<String>) -> Self {
        Term::Literal { lexical: s.into(), datatype: datatype.into(), lang: None }
    }

    pub fn lang_string(s: impl Into<String>, lang: impl Into<String>) -> Self {
        Term::Literal { lexical: s.into(), datatype: vocab::RDF_LANG_STRING.into(), lang: Some(lang.into()) }
    }

    pub fn boolean(b: bool) -> Self {
        Term::typed(if b { "true" } else { "false" }, vocab::XSD_BOOLEAN)
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal { .. })
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(s) => Some(s),
            _ => None,
        }
    }

    /// Lexical form of a literal, the IRI string, or the blank label.
    pub fn value(&self) -> &str {
        match self {
            Term::Iri(s) | Term::Blank(s) => s,
            Term::Literal { lexical, .. } => lexical,
        }
    }

    pub fn datatype(&self) -> Option<&str> {
        match self {
            Term::Literal { datatype, .. } => Some(datatype),
            _ => None,
        }
    }
}

fn escape_literal(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
}

fn escape_iri(s: &str, out: &mut String) {
    for c in s.chars() {
        if c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
            out.push_str(&format!("\\u{:04X}", c as u32));
        } else {
            out.push(c);
        }
    }
}

/// N-Triples form.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        match self {
            Term::Iri(i) => {
                s.push('<');
                escape_iri(i, &mut s);
                s.push('>');
            }
            Term::Blank(b) => {
                s.push_str("_:");
                s.push_str(b);
            }
            Term::Literal { lexical, datatype, lang } => {
                s.push('"');
                escape_literal(lexical, &mut s);
                s.push('"');
                if let Some(l) = lang {
                    s.push('@');
                    s.push_str(l);
                } else if datatype != vocab::XSD_STRING {
                    s.push_str("^^<");
                    escape_iri(datatype, &mut s);
                    s.push('>');
                }
            }
        }
        f.write_str(&s)
    }
}

pub type TermId = u32;
pub type IdTriple = (TermId, TermId, TermId);

/// A set of triples over a term dictionary, indexed SPO, POS and OSP.
#[derive(Debug, Clone, Default)]
pub struct TripleSet {
    terms: Vec<Term>,
    ids: HashMap<Term, TermId>,
    spo: BTreeSet<IdTriple>,
    pos: BTreeSet<IdTriple>,
    osp: BTreeSet<IdTriple>,
}

impl PartialEq for TripleSet {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.sorted_triples() == other.sorted_triples()
    }
}

impl TripleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, t: Term) -> TermId {
        if let Some(&id) = self.ids.get(&t) {
            return id;
        }
        let id = TermId::try_from(self.terms.len()).expect("term dictionary overflow");
        self.terms.push(t.clone());
        self.ids.insert(t, id);
        id
    }

    pub fn id_of(&self, t: &Term) -> Option<TermId> {
        self.ids.get(t).copied()
    }

    pub fn term(&self, id: TermId) -> &Term {
        &self.terms[id as usize]
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Returns false when the triple was already present.
    pub fn insert(&mut self, s: Term, p: Term, o: Term) -> bool {
        let t = (self.intern(s), self.intern(p), self.intern(o));
        self.insert_ids(t)
    }

    pub fn insert_ids(&mut self, (s, p, o): IdTriple) -> bool {
        if !self.spo.insert((s, p, o)) {
            return false;
        }
        self.pos.insert((p, o, s));
        self.osp.insert((o, s, p));
        true
    }

    pub fn contains(&self, s: &Term, p: &Term, o: &Term) -> bool {
        match (self.id_of(s), self.id_of(p), self.id_of(o)) {
            (Some(s), Some(p), Some(o)) => self.spo.contains(&(s, p, o)),
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    pub fn extend(&mut self, other: &TripleSet) {
        for (s, p, o) in other.iter() {
            self.insert(s.clone(), p.clone(), o.clone());
        }
    }

    /// Triples in dictionary-id order.
    pub fn iter(&self) -> impl Iterator<Item = (&Term, &Term, &Term)> + '_ {
        self.spo.iter().map(|&(s, p, o)| (self.term(s), self.term(p), self.term(o)))
    }

    /// Triples ordered by term value, independent of insertion order.
    pub fn sorted_triples(&self) -> Vec<(&Term, &Term, &Term)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort();
        v
    }

    /// Id triples matching a pattern with optional positions, as `(s, p, o)`.
    pub fn matching(
        &self,
        s: Option<TermId>,
        p: Option<TermId>,
        o: Option<TermId>,
    ) -> Box<dyn Iterator<Item = IdTriple> + '_> {
        fn range(
            set: &BTreeSet<IdTriple>,
            a: TermId,
            b: Option<TermId>,
        ) -> std::collections::btree_set::Range<'_, IdTriple> {
            match b {
                Some(b) => set.range((Bound::Included((a, b, 0)), Bound::Included((a, b, TermId::MAX)))),
                None => set.range((Bound::Included((a, 0, 0)), Bound::Included((a, TermId::MAX, TermId::MAX)))),
            }
        }
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => Box::new(self.spo.contains(&(s, p, o)).then_some((s, p, o)).into_iter()),
            (Some(s), p, None) => Box::new(range(&self.spo, s, p).copied()),
            (None, Some(p), o) => Box::new(range(&self.pos, p, o).map(|&(p, o, s)| (s, p, o))),
            (s, None, Some(o)) => Box::new(range(&self.osp, o, s).map(|&(o, s, p)| (s, p, o))),
            (None, None, None) => Box::new(self.spo.iter().copied()),
        }
    }

    pub fn count_matching(&self, s: Option<TermId>, p: Option<TermId>, o: Option<TermId>) -> usize {
        self.matching(s, p, o).count()
    }

    /// Adds `(s, super, o)` for every `(s, sub, o)` along the transitive
    /// `rdfs:subPropertyOf` hierarchy present in the set.
    pub fn apply_subproperty_closure(&mut self) {
        let Some(sub_of) = self.id_of(&Term::iri(vocab::RDFS_SUBPROPERTY_OF)) else { return };
        let edges: Vec<(TermId, TermId)> = self.matching(None, Some(sub_of), None).map(|(s, _, o)| (s, o)).collect();
        let mut supers: HashMap<TermId, BTreeSet<TermId>> = HashMap::new();
        for &(sub, _) in &edges {
            let mut stack = vec![sub];
            let mut seen = BTreeSet::new();
            while let Some(x) = stack.pop() {
                for &(a, b) in &edges {
                    if a == x && b != sub && seen.insert(b) {
                        stack.push(b);
                    }
                }
            }
            supers.insert(sub, seen);
        }
        let mut new = Vec::new();
        for (sub, sups) in &supers {
            for (s, _, o) in self.matching(None, Some(*sub), None) {
                for &sup in sups {
                    new.push((s, sup, o));
                }
            }
        }
        for t in new {
            self.insert_ids(t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iri(s: &str) -> Term {
        Term::iri(format!("http://x/{s}"))
    }

    #[test]
    fn set_semantics_and_indexes() {
        let mut ts = TripleSet::new();
        assert!(ts.insert(iri("a"), iri("p"), iri("b")));
        assert!(!ts.insert(iri("a"), iri("p"), iri("b")));
        ts.insert(iri("a"), iri("q"), Term::string("x"));
        ts.insert(iri("c"), iri("p"), iri("b"));
        assert_eq!(ts.len(), 3);
        let (a, p, b) = (ts.id_of(&iri("a")), ts.id_of(&iri("p")), ts.id_of(&iri("b")));
        assert_eq!(ts.count_matching(a, None, None), 2);
        assert_eq!(ts.count_matching(None, p, None), 2);
        assert_eq!(ts.count_matching(None, None, b), 2);
        assert_eq!(ts.count_matching(a, None, b), 1);
        assert_eq!(ts.count_matching(None, p, b), 2);
        assert_eq!(ts.count_matching(a, p, b), 1);
        assert_eq!(ts.count_matching(None, None, None), 3);
    }

    #[test]
    fn equality_ignores_insertion_order() {
        let mut a = TripleSet::new();
        a.insert(iri("a"), iri("p"), iri("b"));
        a.insert(iri("c"), iri("p"), iri("d"));
        let mut b = TripleSet::new();
        b.insert(iri("c"), iri("p"), iri("d"));
        b.insert(iri("a"), iri("p"), iri("b"));
        assert_eq!(a, b);
    }

    #[test]
    fn subproperty_closure_is_transitive() {
        let sub = Term::iri(vocab::RDFS_SUBPROPERTY_OF);
        let mut ts = TripleSet::new();
        ts.insert(iri("p"), sub.clone(), iri("q"));
        ts.insert(iri("q"), sub, iri("r"));
        ts.insert(iri("a"), iri("p"), iri("b"));
        ts.apply_subproperty_closure();
        assert!(ts.contains(&iri("a"), &iri("q"), &iri("b")));
        assert!(ts.contains(&iri("a"), &iri("r"), &iri("b")));
    }

    #[test]
    fn ntriples_display() {
        assert_eq!(
            Term::typed("13.363", vocab::XSD_DECIMAL).to_string(),
            format!("\"13.363\"^^<{}>", vocab::XSD_DECIMAL)
        );
        assert_eq!(Term::string("a\"b").to_string(), "\"a\\\"b\"");
        assert_eq!(Term::iri("http://x/a b").to_string(), "<http://x/a\\u0020b>");
    }
}
