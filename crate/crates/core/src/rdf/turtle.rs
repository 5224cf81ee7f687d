use std::fmt::Write as _;

use oxttl::TurtleParser;

use super::{escape_iri, escape_literal, vocab, Term, TripleSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("Turtle syntax error at line {line}, column {column}: {message}")]
pub struct TurtleError {
    pub line: u64,
    pub column: u64,
    pub message: String,
}

fn prefixed(iri: &str) -> Option<String> {
    vocab::PREFIXES.iter().filter(|(_, ns)| iri.starts_with(ns)).max_by_key(|(_, ns)| ns.len()).and_then(|(p, ns)| {
        let local = &iri[ns.len()..];
        (!local.is_empty() && local.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_'))
            .then(|| format!("{p}:{local}"))
    })
}

fn write_iri(iri: &str, out: &mut String) {
    match prefixed(iri) {
        Some(p) => out.push_str(&p),
        None => {
            out.push('<');
            escape_iri(iri, out);
            out.push('>');
        }
    }
}

fn write_term(t: &Term, out: &mut String) {
    match t {
        Term::Iri(i) => write_iri(i, out),
        Term::Blank(b) => {
            out.push_str("_:");
            out.push_str(b);
        }
        Term::Literal { lexical, datatype, lang } => {
            out.push('"');
            escape_literal(lexical, out);
            out.push('"');
            if let Some(l) = lang {
                out.push('@');
                out.push_str(l);
            } else if datatype != vocab::XSD_STRING {
                out.push_str("^^");
                write_iri(datatype, out);
            }
        }
    }
}

/// Deterministic Turtle: the fixed prefix header, then one block per
/// subject in term order with `;`-separated predicate lists.
pub fn serialize_turtle(ts: &TripleSet) -> String {
    let mut out = String::new();
    for (p, ns) in vocab::PREFIXES {
        let _ = writeln!(out, "@prefix {p}: <{ns}> .");
    }
    let triples = ts.sorted_triples();
    let mut i = 0;
    while i < triples.len() {
        let subject = triples[i].0;
        out.push('\n');
        write_term(subject, &mut out);
        let mut first = true;
        while i < triples.len() && triples[i].0 == subject {
            let (_, p, o) = triples[i];
            out.push_str(if first { " " } else { " ;\n    " });
            first = false;
            if p.as_iri() == Some(vocab::RDF_TYPE) {
                out.push('a');
            } else {
                write_term(p, &mut out);
            }
            out.push(' ');
            write_term(o, &mut out);
            i += 1;
        }
        out.push_str(" .\n");
    }
    out
}

fn convert_subject(s: oxrdf::NamedOrBlankNode) -> Term {
    match s {
        oxrdf::NamedOrBlankNode::NamedNode(n) => Term::Iri(n.into_string()),
        oxrdf::NamedOrBlankNode::BlankNode(b) => Term::Blank(b.into_string()),
    }
}

fn convert_object(o: oxrdf::Term) -> Term {
    match o {
        oxrdf::Term::NamedNode(n) => Term::Iri(n.into_string()),
        oxrdf::Term::BlankNode(b) => Term::Blank(b.into_string()),
        oxrdf::Term::Literal(l) => {
            let (lexical, datatype, lang) =
                (l.value().to_owned(), l.datatype().as_str().to_owned(), l.language().map(str::to_owned));
            Term::Literal { lexical, datatype, lang }
        }
    }
}

pub fn parse_turtle(text: &[u8]) -> Result<TripleSet, TurtleError> {
    let mut ts = TripleSet::new();
    for t in TurtleParser::new().for_slice(text) {
        let t = t.map_err(|e| {
            let start = e.location().start;
            TurtleError { line: start.line + 1, column: start.column + 1, message: e.message().to_owned() }
        })?;
        ts.insert(convert_subject(t.subject), Term::Iri(t.predicate.into_string()), convert_object(t.object));
    }
    Ok(ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_is_prefix_header_only() {
        let s = serialize_turtle(&TripleSet::new());
        assert_eq!(s.lines().count(), vocab::PREFIXES.len());
        assert!(s.contains("@prefix : <https://github.com/yuzzfeng/D2G2/citygml#> ."));
        assert!(parse_turtle(s.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn decimal_survives_lexically() {
        let mut ts = TripleSet::new();
        let b = Term::iri(format!("{}building/DEBY_LOD2_4959457", vocab::BASE));
        ts.insert(
            b.clone(),
            Term::iri(format!("{}measuredHeight", vocab::BLDG)),
            Term::typed("13.363", vocab::XSD_DECIMAL),
        );
        ts.insert(b.clone(), Term::iri(vocab::RDF_TYPE), Term::iri(format!("{}Building", vocab::BLDG)));
        ts.insert(b, Term::iri(format!("{}label", vocab::RDFS)), Term::string("a \"quoted\"\nline, ü"));
        ts.insert(Term::Blank("x1".into()), Term::iri("http://x/p%20ü"), Term::lang_string("hallo", "de"));
        let text = serialize_turtle(&ts);
        assert!(text.contains("bldg:measuredHeight \"13.363\"^^xsd:decimal"), "{text}");
        assert!(text.contains(" a bldg:Building"), "{text}");
        let back = parse_turtle(text.as_bytes()).unwrap();
        assert_eq!(back, ts);
        assert_eq!(serialize_turtle(&back), text);
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_turtle(b"@prefix : <http://x/> .\n:a :b .\n").unwrap_err();
        assert_eq!(err.line, 2);
    }
}
