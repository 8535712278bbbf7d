//! Negotiations: identifiers, the validated model, and raw descriptions.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NegGraph, TopoOrder};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(NodeId);
id_type!(ProcId);
id_type!(ResultId);

impl ResultId {
    /// Virtual result of a final node that has no results of its own.
    /// Only data specifications refer to it.
    pub const END: ResultId = ResultId(u32::MAX);
}

/// A (node, result) pair, the unit of execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub node: NodeId,
    pub result: ResultId,
}

impl Step {
    pub fn new(node: NodeId, result: ResultId) -> Self {
        Step { node, result }
    }
}

/// A validated negotiation. Immutable; graph and topological order are
/// computed on first use and cached.
#[derive(Clone, Debug)]
pub struct Negotiation {
    name: String,
    processes: Vec<String>,
    nodes: Vec<String>,
    results: Vec<String>,
    dom: Vec<Vec<ProcId>>,
    out: Vec<Vec<ResultId>>,
    // delta[n][result slot][domain slot]
    delta: Vec<Vec<Vec<Vec<NodeId>>>>,
    init: NodeId,
    fin: NodeId,
    graph: OnceLock<NegGraph>,
    topo: OnceLock<Result<TopoOrder, Vec<NodeId>>>,
}

impl PartialEq for Negotiation {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.processes == other.processes
            && self.nodes == other.nodes
            && self.results == other.results
            && self.dom == other.dom
            && self.out == other.out
            && self.delta == other.delta
            && self.init == other.init
            && self.fin == other.fin
    }
}

impl Eq for Negotiation {}

impl Negotiation {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn init(&self) -> NodeId {
        self.init
    }
    pub fn fin(&self) -> NodeId {
        self.fin
    }
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
    pub fn proc_count(&self) -> usize {
        self.processes.len()
    }
    pub fn result_count(&self) -> usize {
        self.results.len()
    }
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }
    pub fn procs(&self) -> impl Iterator<Item = ProcId> + '_ {
        (0..self.processes.len() as u32).map(ProcId)
    }
    pub fn process_names(&self) -> &[String] {
        &self.processes
    }
    pub fn node_names(&self) -> &[String] {
        &self.nodes
    }
    pub fn result_names(&self) -> &[String] {
        &self.results
    }

    pub fn node_name(&self, n: NodeId) -> &str {
        &self.nodes[n.index()]
    }
    pub fn proc_name(&self, p: ProcId) -> &str {
        &self.processes[p.index()]
    }
    pub fn result_name(&self, r: ResultId) -> &str {
        if r == ResultId::END {
            "end"
        } else {
            &self.results[r.index()]
        }
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|x| x == name).map(|i| NodeId(i as u32))
    }
    pub fn proc_id(&self, name: &str) -> Option<ProcId> {
        self.processes.iter().position(|x| x == name).map(|i| ProcId(i as u32))
    }
    pub fn result_id(&self, name: &str) -> Option<ResultId> {
        self.results.iter().position(|x| x == name).map(|i| ResultId(i as u32))
    }

    /// Resolve a result of node `n`, allowing the virtual `end` of a final
    /// node without results.
    pub fn result_of(&self, n: NodeId, name: &str) -> Option<ResultId> {
        if let Some(r) = self.result_id(name) {
            if self.out(n).contains(&r) {
                return Some(r);
            }
        }
        (name == "end" && n == self.fin && self.out(n).is_empty()).then_some(ResultId::END)
    }

    pub fn dom(&self, n: NodeId) -> &[ProcId] {
        &self.dom[n.index()]
    }
    pub fn out(&self, n: NodeId) -> &[ResultId] {
        &self.out[n.index()]
    }
    pub fn in_dom(&self, n: NodeId, p: ProcId) -> bool {
        self.dom[n.index()].binary_search(&p).is_ok()
    }
    pub fn dom_slot(&self, n: NodeId, p: ProcId) -> Option<usize> {
        self.dom[n.index()].binary_search(&p).ok()
    }
    pub fn result_slot(&self, n: NodeId, a: ResultId) -> Option<usize> {
        self.out[n.index()].iter().position(|&r| r == a)
    }

    /// δ(n,a,p), or `None` outside its definition domain.
    pub fn delta(&self, n: NodeId, a: ResultId, p: ProcId) -> Option<&[NodeId]> {
        let ai = self.result_slot(n, a)?;
        let pi = self.dom_slot(n, p)?;
        Some(&self.delta[n.index()][ai][pi])
    }

    /// δ by slot indices into `out(n)` and `dom(n)`.
    #[inline]
    pub fn delta_at(&self, n: NodeId, ai: usize, pi: usize) -> &[NodeId] {
        &self.delta[n.index()][ai][pi]
    }

    /// Outcomes of (n, a): one target set per domain process, in domain order.
    pub fn branch(&self, n: NodeId, ai: usize) -> &[Vec<NodeId>] {
        &self.delta[n.index()][ai]
    }

    pub fn is_deterministic_process(&self, p: ProcId) -> bool {
        self.nodes().all(|n| match self.dom_slot(n, p) {
            None => true,
            Some(pi) => (0..self.out(n).len()).all(|ai| self.delta_at(n, ai, pi).len() == 1),
        })
    }

    pub fn deterministic_processes(&self) -> Vec<ProcId> {
        self.procs().filter(|&p| self.is_deterministic_process(p)).collect()
    }

    pub fn nondeterministic_processes(&self) -> Vec<ProcId> {
        self.procs().filter(|&p| !self.is_deterministic_process(p)).collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.delta.iter().flatten().flatten().all(|t| t.len() == 1)
    }

    pub fn graph(&self) -> &NegGraph {
        self.graph.get_or_init(|| NegGraph::build(self))
    }

    /// The fixed topological order, or one cycle when the graph is cyclic.
    pub fn topo(&self) -> Result<&TopoOrder, &[NodeId]> {
        match self.topo.get_or_init(|| TopoOrder::compute(self)) {
            Ok(t) => Ok(t),
            Err(c) => Err(c),
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo().is_ok()
    }

    /// Back to a raw description, in canonical order.
    pub fn to_raw(&self) -> RawNegotiation {
        let mut raw = RawNegotiation {
            name: self.name.clone(),
            processes: self.processes.clone(),
            init: Some(self.node_name(self.init).to_string()),
            fin: Some(self.node_name(self.fin).to_string()),
            ..Default::default()
        };
        for n in self.nodes() {
            raw.nodes.push(RawNode {
                id: self.node_name(n).to_string(),
                domain: self.dom(n).iter().map(|&p| self.proc_name(p).to_string()).collect(),
            });
            let out = self.out(n);
            if !out.is_empty() {
                raw.outs.push((
                    self.node_name(n).to_string(),
                    out.iter().map(|&r| self.result_name(r).to_string()).collect(),
                ));
            }
        }
        for n in self.nodes() {
            for (ai, &a) in self.out(n).iter().enumerate() {
                for (pi, &p) in self.dom(n).iter().enumerate() {
                    raw.arcs.push(RawArc {
                        node: self.node_name(n).to_string(),
                        result: self.result_name(a).to_string(),
                        process: self.proc_name(p).to_string(),
                        targets: self
                            .delta_at(n, ai, pi)
                            .iter()
                            .map(|&t| self.node_name(t).to_string())
                            .collect(),
                    });
                }
            }
        }
        raw
    }
}

/// Unvalidated description using names throughout.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNegotiation {
    pub name: String,
    pub processes: Vec<String>,
    pub init: Option<String>,
    pub fin: Option<String>,
    pub nodes: Vec<RawNode>,
    pub outs: Vec<(String, Vec<String>)>,
    pub arcs: Vec<RawArc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNode {
    pub id: String,
    pub domain: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArc {
    pub node: String,
    pub result: String,
    pub process: String,
    pub targets: Vec<String>,
}

impl RawNegotiation {
    pub fn new(name: impl Into<String>) -> Self {
        RawNegotiation { name: name.into(), ..Default::default() }
    }

    pub fn process(&mut self, p: impl Into<String>) -> &mut Self {
        self.processes.push(p.into());
        self
    }

    pub fn node<S: Into<String>>(&mut self, id: impl Into<String>, domain: impl IntoIterator<Item = S>) -> &mut Self {
        self.nodes.push(RawNode { id: id.into(), domain: domain.into_iter().map(Into::into).collect() });
        self
    }

    pub fn out<S: Into<String>>(&mut self, id: impl Into<String>, results: impl IntoIterator<Item = S>) -> &mut Self {
        self.outs.push((id.into(), results.into_iter().map(Into::into).collect()));
        self
    }

    pub fn arc<S: Into<String>>(
        &mut self,
        node: impl Into<String>,
        result: impl Into<String>,
        process: impl Into<String>,
        targets: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.arcs.push(RawArc {
            node: node.into(),
            result: result.into(),
            process: process.into(),
            targets: targets.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn init_fin(&mut self, init: impl Into<String>, fin: impl Into<String>) -> &mut Self {
        self.init = Some(init.into());
        self.fin = Some(fin.into());
        self
    }

    /// Remove the arc for (node, result, process); test helper for broken inputs.
    pub fn remove_arc(&mut self, node: &str, result: &str, process: &str) -> bool {
        let before = self.arcs.len();
        self.arcs.retain(|a| !(a.node == node && a.result == result && a.process == process));
        before != self.arcs.len()
    }

    /// Replace the targets of an existing arc.
    pub fn set_arc(&mut self, node: &str, result: &str, process: &str, targets: &[&str]) -> bool {
        for a in &mut self.arcs {
            if a.node == node && a.result == result && a.process == process {
                a.targets = targets.iter().map(|s| s.to_string()).collect();
                return true;
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ValidationError {
    #[error("no processes declared")]
    NoProcesses,
    #[error("duplicate process {0}")]
    DuplicateProcess(String),
    #[error("duplicate node {0}")]
    DuplicateNode(String),
    #[error("init node not declared")]
    MissingInit,
    #[error("fin node not declared")]
    MissingFin,
    #[error("dangling {kind} {name} in {context}")]
    Dangling { kind: String, name: String, context: String },
    #[error("empty domain for node {0}")]
    EmptyDomain(String),
    #[error("init domain incomplete")]
    InitDomainIncomplete,
    #[error("fin domain incomplete")]
    FinDomainIncomplete,
    #[error("node {0} has no results")]
    NoResults(String),
    #[error("duplicate out declaration for node {0}")]
    DuplicateOut(String),
    #[error("duplicate result {result} in out({node})")]
    DuplicateResult { node: String, result: String },
    #[error("delta undefined for ({node},{result},{process})")]
    DeltaUndefined { node: String, result: String, process: String },
    #[error("delta defined twice for ({node},{result},{process})")]
    DeltaDuplicate { node: String, result: String, process: String },
    #[error("delta empty for ({node},{result},{process})")]
    DeltaEmpty { node: String, result: String, process: String },
    #[error("delta outside definition domain at ({node},{result},{process})")]
    DeltaForeign { node: String, result: String, process: String },
    #[error("target {target} of ({node},{result},{process}) lacks {process} in its domain")]
    TargetLacksProcess { node: String, result: String, process: String, target: String },
}

/// Check every well-formedness rule; on failure return all violations.
pub fn validate(raw: &RawNegotiation) -> Result<Negotiation, Vec<ValidationError>> {
    use ValidationError as E;
    let mut errs = Vec::new();

    if raw.processes.is_empty() {
        errs.push(E::NoProcesses);
    }
    let mut proc_ix: HashMap<&str, ProcId> = HashMap::new();
    for (i, p) in raw.processes.iter().enumerate() {
        if proc_ix.insert(p.as_str(), ProcId(i as u32)).is_some() {
            errs.push(E::DuplicateProcess(p.clone()));
        }
    }
    let mut node_ix: HashMap<&str, NodeId> = HashMap::new();
    for (i, n) in raw.nodes.iter().enumerate() {
        if node_ix.insert(n.id.as_str(), NodeId(i as u32)).is_some() {
            errs.push(E::DuplicateNode(n.id.clone()));
        }
    }
    let dangling = |kind: &str, name: &str, context: String| E::Dangling {
        kind: kind.to_string(),
        name: name.to_string(),
        context,
    };

    let resolve_end = |name: &Option<String>, missing: E, errs: &mut Vec<E>| match name {
        None => {
            errs.push(missing);
            None
        }
        Some(s) => match node_ix.get(s.as_str()) {
            Some(&n) => Some(n),
            None => {
                errs.push(dangling("node", s, "init/fin".into()));
                None
            }
        },
    };
    let init = resolve_end(&raw.init, E::MissingInit, &mut errs);
    let fin = resolve_end(&raw.fin, E::MissingFin, &mut errs);

    // domains
    let mut dom: Vec<Vec<ProcId>> = vec![Vec::new(); raw.nodes.len()];
    for (i, n) in raw.nodes.iter().enumerate() {
        for p in &n.domain {
            match proc_ix.get(p.as_str()) {
                Some(&pid) => dom[i].push(pid),
                None => errs.push(dangling("process", p, format!("domain of {}", n.id))),
            }
        }
        dom[i].sort();
        dom[i].dedup();
        if n.domain.is_empty() {
            errs.push(E::EmptyDomain(n.id.clone()));
        }
    }
    let full = raw.processes.len();
    if let Some(i) = init {
        if dom[i.index()].len() != full {
            errs.push(E::InitDomainIncomplete);
        }
    }
    if let Some(f) = fin {
        if dom[f.index()].len() != full {
            errs.push(E::FinDomainIncomplete);
        }
    }

    // out lists; results get ids by first appearance in node order
    let mut out_names: Vec<Option<Vec<String>>> = vec![None; raw.nodes.len()];
    for (id, rs) in &raw.outs {
        match node_ix.get(id.as_str()) {
            None => errs.push(dangling("node", id, "out declaration".into())),
            Some(&n) => {
                if out_names[n.index()].is_some() {
                    errs.push(E::DuplicateOut(id.clone()));
                    continue;
                }
                let mut seen = HashSet::new();
                for r in rs {
                    if !seen.insert(r.as_str()) {
                        errs.push(E::DuplicateResult { node: id.clone(), result: r.clone() });
                    }
                }
                out_names[n.index()] = Some(rs.clone());
            }
        }
    }
    let mut results: Vec<String> = Vec::new();
    let mut result_ix: HashMap<String, ResultId> = HashMap::new();
    let mut out: Vec<Vec<ResultId>> = vec![Vec::new(); raw.nodes.len()];
    for (i, rs) in out_names.iter().enumerate() {
        let rs = rs.as_deref().unwrap_or(&[]);
        for r in rs {
            let id = *result_ix.entry(r.clone()).or_insert_with(|| {
                results.push(r.clone());
                ResultId(results.len() as u32 - 1)
            });
            if !out[i].contains(&id) {
                out[i].push(id);
            }
        }
        if out[i].is_empty() && Some(NodeId(i as u32)) != fin {
            errs.push(E::NoResults(raw.nodes[i].id.clone()));
        }
    }

    // delta
    let mut delta: Vec<Vec<Vec<Option<Vec<NodeId>>>>> = (0..raw.nodes.len())
        .map(|i| vec![vec![None; dom[i].len()]; out[i].len()])
        .collect();
    for arc in &raw.arcs {
        let ctx = || format!("arc ({},{},{})", arc.node, arc.result, arc.process);
        let Some(&n) = node_ix.get(arc.node.as_str()) else {
            errs.push(dangling("node", &arc.node, ctx()));
            continue;
        };
        let Some(&p) = proc_ix.get(arc.process.as_str()) else {
            errs.push(dangling("process", &arc.process, ctx()));
            continue;
        };
        let Some(&a) = result_ix.get(&arc.result) else {
            errs.push(dangling("result", &arc.result, ctx()));
            continue;
        };
        let foreign = || E::DeltaForeign {
            node: arc.node.clone(),
            result: arc.result.clone(),
            process: arc.process.clone(),
        };
        let Some(ai) = out[n.index()].iter().position(|&r| r == a) else {
            errs.push(foreign());
            continue;
        };
        let Ok(pi) = dom[n.index()].binary_search(&p) else {
            errs.push(foreign());
            continue;
        };
        let mut targets = Vec::new();
        for t in &arc.targets {
            match node_ix.get(t.as_str()) {
                None => errs.push(dangling("node", t, ctx())),
                Some(&tn) => {
                    if dom[tn.index()].binary_search(&p).is_err() {
                        errs.push(E::TargetLacksProcess {
                            node: arc.node.clone(),
                            result: arc.result.clone(),
                            process: arc.process.clone(),
                            target: t.clone(),
                        });
                    }
                    targets.push(tn);
                }
            }
        }
        targets.sort();
        targets.dedup();
        if arc.targets.is_empty() {
            errs.push(E::DeltaEmpty {
                node: arc.node.clone(),
                result: arc.result.clone(),
                process: arc.process.clone(),
            });
        }
        let slot = &mut delta[n.index()][ai][pi];
        if slot.is_some() {
            errs.push(E::DeltaDuplicate {
                node: arc.node.clone(),
                result: arc.result.clone(),
                process: arc.process.clone(),
            });
        } else {
            *slot = Some(targets);
        }
    }
    for (i, per_result) in delta.iter().enumerate() {
        for (ai, per_proc) in per_result.iter().enumerate() {
            for (pi, t) in per_proc.iter().enumerate() {
                if t.is_none() {
                    errs.push(E::DeltaUndefined {
                        node: raw.nodes[i].id.clone(),
                        result: results[out[i][ai].index()].clone(),
                        process: raw.processes[dom[i][pi].index()].clone(),
                    });
                }
            }
        }
    }

    if !errs.is_empty() {
        return Err(errs);
    }
    Ok(Negotiation {
        name: raw.name.clone(),
        processes: raw.processes.clone(),
        nodes: raw.nodes.iter().map(|n| n.id.clone()).collect(),
        results,
        dom,
        out,
        delta: delta
            .into_iter()
            .map(|r| r.into_iter().map(|p| p.into_iter().map(Option::unwrap).collect()).collect())
            .collect(),
        init: init.unwrap(),
        fin: fin.unwrap(),
        graph: OnceLock::new(),
        topo: OnceLock::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RestrictError {
    #[error("restriction to an empty process set")]
    EmptyKeep,
    #[error("unknown process in restriction")]
    UnknownProcess,
    #[error("init or fin node dropped by restriction")]
    EndpointDropped,
}

/// Restriction to the processes in `keep`: domains are intersected with
/// `keep`, nodes left without participants are dropped, and δ targets are
/// cut down to surviving nodes.
pub fn restrict(neg: &Negotiation, keep: &[ProcId]) -> Result<Negotiation, RestrictError> {
    if keep.is_empty() {
        return Err(RestrictError::EmptyKeep);
    }
    if keep.iter().any(|p| p.index() >= neg.proc_count()) {
        return Err(RestrictError::UnknownProcess);
    }
    let mut keep_flag = vec![false; neg.proc_count()];
    for p in keep {
        keep_flag[p.index()] = true;
    }
    let survives = |n: NodeId| neg.dom(n).iter().any(|p| keep_flag[p.index()]);
    if !survives(neg.init()) || !survives(neg.fin()) {
        return Err(RestrictError::EndpointDropped);
    }
    let name = |n: NodeId| neg.node_name(n).to_string();
    let mut raw = RawNegotiation::new(neg.name());
    raw.processes = neg.procs().filter(|p| keep_flag[p.index()]).map(|p| neg.proc_name(p).to_string()).collect();
    raw.init_fin(name(neg.init()), name(neg.fin()));
    for n in neg.nodes().filter(|&n| survives(n)) {
        let d: Vec<String> = neg
            .dom(n)
            .iter()
            .filter(|p| keep_flag[p.index()])
            .map(|&p| neg.proc_name(p).to_string())
            .collect();
        raw.node(name(n), d);
        if !neg.out(n).is_empty() {
            raw.out(name(n), neg.out(n).iter().map(|&r| neg.result_name(r).to_string()));
        }
        for (ai, &a) in neg.out(n).iter().enumerate() {
            for (pi, &p) in neg.dom(n).iter().enumerate() {
                if keep_flag[p.index()] {
                    // targets contain p, hence survive
                    raw.arc(name(n), neg.result_name(a), neg.proc_name(p), neg.delta_at(n, ai, pi).iter().map(|&t| name(t)));
                }
            }
        }
    }
    Ok(validate(&raw).expect("restriction preserves well-formedness"))
}

/// Class flags of a negotiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassFlags {
    pub deterministic: bool,
    pub weakly_nd: bool,
    pub very_weakly_nd: bool,
    pub acyclic: bool,
    pub det_acyclic: bool,
    pub all_nodes_locally_reachable: bool,
}

impl fmt::Display for ClassFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool| if b { "yes" } else { "no" };
        write!(
            f,
            "deterministic={} weakly_nd={} very_weakly_nd={} acyclic={} det_acyclic={} all_reachable={}",
            flag(self.deterministic),
            flag(self.weakly_nd),
            flag(self.very_weakly_nd),
            flag(self.acyclic),
            flag(self.det_acyclic),
            flag(self.all_nodes_locally_reachable)
        )
    }
}

pub fn classify(neg: &Negotiation) -> ClassFlags {
    let det: Vec<bool> = neg.procs().map(|p| neg.is_deterministic_process(p)).collect();
    let deterministic = det.iter().all(|&d| d);
    let weakly_nd = neg.nodes().all(|n| neg.dom(n).iter().any(|p| det[p.index()]));
    let very_weakly_nd = neg.nodes().all(|n| {
        (0..neg.out(n).len()).all(|ai| {
            (0..neg.dom(n).len()).all(|pi| {
                let ts = neg.delta_at(n, ai, pi);
                neg.procs().any(|q| det[q.index()] && ts.iter().all(|&t| neg.in_dom(t, q)))
            })
        })
    });
    let acyclic = neg.is_acyclic();
    let det_acyclic = acyclic || crate::graph::is_acyclic_on(neg, |p| det[p.index()]);
    let reach = crate::graph::local_reach(neg, &[neg.init()]);
    ClassFlags {
        deterministic,
        weakly_nd,
        very_weakly_nd,
        acyclic,
        det_acyclic,
        all_nodes_locally_reachable: reach.len() == neg.node_count(),
    }
}
