//! The NGT text format.
//!
//! ```text
//! negotiation <name>
//! processes <p>...
//! init <node> ; fin <node>
//! node <id> { <p>... }
//! out <id> : <r>...
//! arc <id> <r> <p> -> <id> [<id>...]
//! label <id> <r> : <op> <var> [<op> <var>]...
//! ```
//! `#` starts a comment. Identifiers are `[A-Za-z0-9_]+`.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::data::{DataNegotiation, LabelError, Op};
use crate::model::{validate, Negotiation, RawNegotiation, ValidationError};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NgtError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid negotiation: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationError>),
    #[error("line {line}: {source}")]
    Label { line: usize, source: LabelError },
}

/// A parsed file: the negotiation plus its data labels, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NgtDocument {
    pub neg: Negotiation,
    pub data: Option<DataNegotiation>,
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Line<'a> {
    no: usize,
    toks: Vec<&'a str>,
}

impl<'a> Line<'a> {
    fn err(&self, message: impl Into<String>) -> NgtError {
        NgtError::Syntax { line: self.no, message: message.into() }
    }

    fn ident(&self, i: usize, what: &str) -> Result<&'a str, NgtError> {
        match self.toks.get(i) {
            Some(t) if is_ident(t) => Ok(t),
            Some(t) => Err(self.err(format!("bad {what} identifier '{t}'"))),
            None => Err(self.err(format!("missing {what}"))),
        }
    }

    fn expect(&self, i: usize, tok: &str) -> Result<(), NgtError> {
        match self.toks.get(i) {
            Some(&t) if t == tok => Ok(()),
            Some(t) => Err(self.err(format!("expected '{tok}', found '{t}'"))),
            None => Err(self.err(format!("expected '{tok}'"))),
        }
    }

    fn idents_from(&self, i: usize, what: &str) -> Result<Vec<String>, NgtError> {
        (i..self.toks.len()).map(|j| self.ident(j, what).map(str::to_string)).collect()
    }
}

fn tokenize(line: &str) -> Vec<&str> {
    let line = line.split('#').next().unwrap_or("");
    let b = line.as_bytes();
    let arrow = |i: usize| b[i] == b'-' && b.get(i + 1) == Some(&b'>');
    let punct = |c: u8| b"{};:".contains(&c);
    let mut toks = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_whitespace() {
            i += 1;
        } else if punct(b[i]) {
            toks.push(&line[i..i + 1]);
            i += 1;
        } else if arrow(i) {
            toks.push("->");
            i += 2;
        } else {
            let start = i;
            while i < b.len() && !b[i].is_ascii_whitespace() && !punct(b[i]) && !arrow(i) {
                i += 1;
            }
            toks.push(&line[start..i]);
        }
    }
    toks
}

/// Parse NGT text into a validated negotiation (and data labels).
pub fn parse_ngt(text: &str) -> Result<NgtDocument, NgtError> {
    let mut raw = RawNegotiation::default();
    let mut labels: Vec<(usize, String, String, Vec<(String, String)>)> = Vec::new();
    let mut seen_nodes = HashSet::new();
    let mut seen_outs = HashSet::new();
    let mut seen_arcs = HashSet::new();
    let mut seen_labels = HashSet::new();
    let mut seen_name = false;

    for (i, text_line) in text.lines().enumerate() {
        let line = Line { no: i + 1, toks: tokenize(text_line) };
        let Some(&kw) = line.toks.first() else { continue };
        match kw {
            "negotiation" => {
                if seen_name {
                    return Err(line.err("duplicate negotiation header"));
                }
                seen_name = true;
                raw.name = line.ident(1, "negotiation name")?.to_string();
                if line.toks.len() > 2 {
                    return Err(line.err("trailing tokens"));
                }
            }
            "processes" => {
                for p in line.idents_from(1, "process")? {
                    if raw.processes.contains(&p) {
                        return Err(line.err(format!("duplicate process declaration '{p}'")));
                    }
                    raw.processes.push(p);
                }
            }
            "init" | "fin" => {
                // "init X ; fin Y", or either half alone
                let mut j = 0;
                while j < line.toks.len() {
                    let which = line.toks[j];
                    let id = line.ident(j + 1, "node")?.to_string();
                    let slot = match which {
                        "init" => &mut raw.init,
                        "fin" => &mut raw.fin,
                        t => return Err(line.err(format!("expected 'init' or 'fin', found '{t}'"))),
                    };
                    if slot.is_some() {
                        return Err(line.err(format!("duplicate {which} declaration")));
                    }
                    *slot = Some(id);
                    j += 2;
                    if j < line.toks.len() {
                        line.expect(j, ";")?;
                        j += 1;
                    }
                }
            }
            "node" => {
                let id = line.ident(1, "node")?.to_string();
                line.expect(2, "{")?;
                let close = line.toks.len() - 1;
                line.expect(close, "}")?;
                let mut domain = Vec::new();
                for j in 3..close {
                    domain.push(line.ident(j, "process")?.to_string());
                }
                if !seen_nodes.insert(id.clone()) {
                    return Err(line.err(format!("duplicate node declaration '{id}'")));
                }
                raw.node(id, domain);
            }
            "out" => {
                let id = line.ident(1, "node")?.to_string();
                line.expect(2, ":")?;
                let rs = line.idents_from(3, "result")?;
                if !seen_outs.insert(id.clone()) {
                    return Err(line.err(format!("duplicate out declaration for '{id}'")));
                }
                raw.out(id, rs);
            }
            "arc" => {
                let node = line.ident(1, "node")?;
                let result = line.ident(2, "result")?;
                let process = line.ident(3, "process")?;
                line.expect(4, "->")?;
                let targets = line.idents_from(5, "node")?;
                if targets.is_empty() {
                    return Err(line.err("arc without targets"));
                }
                if !seen_arcs.insert((node, result, process)) {
                    return Err(line.err(format!("duplicate arc for ({node},{result},{process})")));
                }
                raw.arc(node, result, process, targets);
            }
            "label" => {
                let node = line.ident(1, "node")?.to_string();
                let result = line.ident(2, "result")?.to_string();
                line.expect(3, ":")?;
                let rest = &line.toks[4..];
                if !rest.len().is_multiple_of(2) {
                    return Err(line.err("label operations come in <op> <var> pairs"));
                }
                let mut ops = Vec::new();
                for j in (4..line.toks.len()).step_by(2) {
                    let op = line.ident(j, "operation")?.to_string();
                    let var = line.ident(j + 1, "variable")?.to_string();
                    ops.push((op, var));
                }
                if !seen_labels.insert((node.clone(), result.clone())) {
                    return Err(line.err(format!("duplicate label for ({node},{result})")));
                }
                labels.push((line.no, node, result, ops));
            }
            other => return Err(line.err(format!("unknown directive '{other}'"))),
        }
    }

    let neg = validate(&raw).map_err(NgtError::Invalid)?;
    if labels.is_empty() {
        return Ok(NgtDocument { neg, data: None });
    }
    let mut builder = DataNegotiation::builder(neg.clone());
    for (line, node, result, ops) in labels {
        for (op, var) in ops {
            let op = Op::parse(&op).ok_or(NgtError::Label { line, source: LabelError::UnknownOp(op.clone()) })?;
            builder.add(&node, &result, op, &var).map_err(|source| NgtError::Label { line, source })?;
        }
    }
    Ok(NgtDocument { neg, data: Some(builder.build()) })
}

/// Parse and keep only the negotiation, ignoring labels.
pub fn parse_negotiation(text: &str) -> Result<Negotiation, NgtError> {
    parse_ngt(text).map(|d| d.neg)
}

pub fn emit_ngt(neg: &Negotiation) -> String {
    emit(neg, None)
}

pub fn emit_data_ngt(d: &DataNegotiation) -> String {
    emit(&d.base, Some(d))
}

fn emit(neg: &Negotiation, data: Option<&DataNegotiation>) -> String {
    let mut s = String::new();
    if !neg.name().is_empty() {
        writeln!(s, "negotiation {}", neg.name()).unwrap();
    }
    writeln!(s, "processes {}", neg.process_names().join(" ")).unwrap();
    writeln!(s, "init {} ; fin {}", neg.node_name(neg.init()), neg.node_name(neg.fin())).unwrap();
    for n in neg.nodes() {
        let d: Vec<&str> = neg.dom(n).iter().map(|&p| neg.proc_name(p)).collect();
        writeln!(s, "node {} {{ {} }}", neg.node_name(n), d.join(" ")).unwrap();
    }
    for n in neg.nodes().filter(|&n| !neg.out(n).is_empty()) {
        let rs: Vec<&str> = neg.out(n).iter().map(|&r| neg.result_name(r)).collect();
        writeln!(s, "out {} : {}", neg.node_name(n), rs.join(" ")).unwrap();
    }
    for n in neg.nodes() {
        for (ai, &a) in neg.out(n).iter().enumerate() {
            for (pi, &p) in neg.dom(n).iter().enumerate() {
                let ts: Vec<&str> = neg.delta_at(n, ai, pi).iter().map(|&t| neg.node_name(t)).collect();
                writeln!(
                    s,
                    "arc {} {} {} -> {}",
                    neg.node_name(n),
                    neg.result_name(a),
                    neg.proc_name(p),
                    ts.join(" ")
                )
                .unwrap();
            }
        }
    }
    if let Some(d) = data {
        for (step, ops) in d.labels() {
            if ops.is_empty() {
                continue;
            }
            let body: Vec<String> =
                ops.iter().map(|&(op, x)| format!("{} {}", op.name(), d.var_name(x))).collect();
            writeln!(
                s,
                "label {} {} : {}",
                neg.node_name(step.node),
                neg.result_name(step.result),
                body.join(" ")
            )
            .unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("node n0 {p0 p1}"), ["node", "n0", "{", "p0", "p1", "}"]);
        assert_eq!(tokenize("init n0; fin n5 # c"), ["init", "n0", ";", "fin", "n5"]);
        assert_eq!(tokenize("arc n0 a p0 ->n1"), ["arc", "n0", "a", "p0", "->", "n1"]);
        assert_eq!(tokenize("arc n0 a p0->n1 n2"), ["arc", "n0", "a", "p0", "->", "n1", "n2"]);
        assert_eq!(tokenize("out n0: a b"), ["out", "n0", ":", "a", "b"]);
    }

    #[test]
    fn round_trip_fixtures() {
        for (name, text) in fixtures::ALL {
            let doc = parse_ngt(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let again = match &doc.data {
                Some(d) => parse_ngt(&emit_data_ngt(d)).unwrap(),
                None => parse_ngt(&emit_ngt(&doc.neg)).unwrap(),
            };
            assert_eq!(again, doc, "{name}");
        }
    }

    #[test]
    fn duplicate_node_reports_line() {
        let text = "processes p\ninit a ; fin a\nnode a { p }\nnode a { p }\n";
        match parse_ngt(text) {
            Err(NgtError::Syntax { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("duplicate node"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_node_negotiation() {
        let doc = parse_ngt("processes p\ninit a ; fin a\nnode a { p }\n").unwrap();
        assert_eq!(doc.neg.node_count(), 1);
        assert!(doc.data.is_none());
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_ngt("bogus x"), Err(NgtError::Syntax { line: 1, .. })));
        assert!(matches!(parse_ngt("node n0 { p0"), Err(NgtError::Syntax { .. })));
        assert!(matches!(parse_ngt("arc n0 a p0 n1"), Err(NgtError::Syntax { .. })));
        assert!(matches!(parse_ngt("node n-0 { p }"), Err(NgtError::Syntax { .. })));
        let invalid = "processes p\ninit a ; fin b\nnode a { p }\nnode b { p }\n";
        assert!(matches!(parse_ngt(invalid), Err(NgtError::Invalid(_))));
    }

    #[test]
    fn data1_labels() {
        let d = fixtures::data1();
        let n4 = d.base.node_id("n4").unwrap();
        let b = d.base.result_id("b").unwrap();
        let ops: Vec<(Op, &str)> =
            d.label(n4, b).iter().map(|&(op, x)| (op, d.var_name(x))).collect();
        assert_eq!(ops, [(Op::Read, "x2"), (Op::Dealloc, "x1")]);
    }
}
