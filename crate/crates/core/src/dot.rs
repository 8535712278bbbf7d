//! DOT rendering of the graph of a negotiation with highlighted overlays.

use std::fmt::Write as _;

use crate::graph::Edge;
use crate::model::{Negotiation, NodeId};

/// Edges and nodes to highlight.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Overlay {
    pub label: String,
    pub edges: Vec<Edge>,
    pub nodes: Vec<NodeId>,
}

impl Overlay {
    pub fn edges(label: impl Into<String>, edges: Vec<Edge>) -> Self {
        let mut nodes: Vec<NodeId> = edges.iter().flat_map(|e| [e.from, e.to]).collect();
        nodes.sort();
        nodes.dedup();
        Overlay { label: label.into(), edges, nodes }
    }
}

const COLORS: [&str; 4] = ["red", "blue", "darkgreen", "orange"];

pub fn emit_dot(neg: &Negotiation, overlays: &[Overlay]) -> String {
    let mut s = String::new();
    writeln!(s, "digraph \"{}\" {{", neg.name()).unwrap();
    writeln!(s, "  rankdir=LR;\n  node [shape=box];").unwrap();
    for n in neg.nodes() {
        let dom: Vec<&str> = neg.dom(n).iter().map(|&p| neg.proc_name(p)).collect();
        let mut attrs = format!("label=\"{}\\n{{{}}}\"", neg.node_name(n), dom.join(","));
        if n == neg.init() || n == neg.fin() {
            attrs.push_str(", peripheries=2");
        }
        if let Some((i, _)) = overlays.iter().enumerate().find(|(_, o)| o.nodes.contains(&n)) {
            write!(attrs, ", color={}, style=bold", COLORS[i % COLORS.len()]).unwrap();
        }
        writeln!(s, "  \"{}\" [{}];", neg.node_name(n), attrs).unwrap();
    }
    for e in neg.graph().edges() {
        let mut attrs = format!("label=\"{}:{}\"", neg.proc_name(e.process), neg.result_name(e.result));
        if let Some((i, o)) = overlays.iter().enumerate().find(|(_, o)| o.edges.contains(e)) {
            write!(attrs, ", color={}, penwidth=3, highlight=\"{}\"", COLORS[i % COLORS.len()], o.label).unwrap();
        }
        writeln!(s, "  \"{}\" -> \"{}\" [{}];", neg.node_name(e.from), neg.node_name(e.to), attrs).unwrap();
    }
    s.push_str("}\n");
    s
}
