//! Explicit-state reference semantics.
//!
//! Everything here enumerates configurations breadth-first, so witnesses
//! are shortest and ties follow node/result order. Ready sets are interned:
//! each one is either {n_init} or some δ(n,a,p), so a configuration is a
//! short vector of set ids.

use std::collections::HashMap;
use std::hash::Hash;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataSpec;
use crate::graph::LocalPath;
use crate::model::{Negotiation, NodeId, ProcId, ResultId, Step};
use crate::semantics::{Configuration, Run};

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum OracleError {
    #[error("budget exceeded: more than {0} states")]
    BudgetExceeded(usize),
}

type State = Box<[u32]>;

pub(crate) struct Engine<'a> {
    neg: &'a Negotiation,
    sets: Vec<Vec<NodeId>>,
    index: HashMap<Vec<NodeId>, u32>,
    delta_set: Vec<Vec<Vec<u32>>>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(neg: &'a Negotiation) -> Self {
        let mut e = Engine { neg, sets: Vec::new(), index: HashMap::new(), delta_set: Vec::new() };
        e.intern(&[neg.init()]);
        let mut ds = Vec::with_capacity(neg.node_count());
        for n in neg.nodes() {
            let per_result = (0..neg.out(n).len())
                .map(|ai| (0..neg.dom(n).len()).map(|pi| e.intern(neg.delta_at(n, ai, pi))).collect())
                .collect();
            ds.push(per_result);
        }
        e.delta_set = ds;
        e
    }

    fn intern(&mut self, set: &[NodeId]) -> u32 {
        if let Some(&i) = self.index.get(set) {
            return i;
        }
        let i = self.sets.len() as u32;
        self.sets.push(set.to_vec());
        self.index.insert(set.to_vec(), i);
        i
    }

    fn initial(&self) -> State {
        vec![0u32; self.neg.proc_count()].into_boxed_slice()
    }

    fn intern_config(&mut self, c: &Configuration) -> State {
        c.ready.iter().map(|s| self.intern(s)).collect()
    }

    fn to_config(&self, s: &State) -> Configuration {
        Configuration { ready: s.iter().map(|&i| self.sets[i as usize].clone()).collect() }
    }

    fn enables(&self, s: &State, n: NodeId) -> bool {
        self.neg.dom(n).iter().all(|p| self.sets[s[p.index()] as usize].binary_search(&n).is_ok())
    }

    fn terminal(&self, s: &State) -> bool {
        self.enables(s, self.neg.fin())
    }

    fn enabled(&self, s: &State) -> Vec<NodeId> {
        let mut cand: Vec<NodeId> = s.iter().flat_map(|&i| self.sets[i as usize].iter().copied()).collect();
        cand.sort();
        cand.dedup();
        cand.retain(|&n| self.enables(s, n));
        cand
    }

    /// All (step, successor) pairs in node/result order.
    fn successors(&self, s: &State, out: &mut Vec<(Step, State)>) {
        out.clear();
        for n in self.enabled(s) {
            for (ai, &a) in self.neg.out(n).iter().enumerate() {
                let mut t = s.clone();
                for (pi, &p) in self.neg.dom(n).iter().enumerate() {
                    t[p.index()] = self.delta_set[n.index()][ai][pi];
                }
                out.push((Step::new(n, a), t));
            }
        }
    }
}

/// Generic BFS with parent pointers. Returns the step sequence to the first
/// goal state and the visited states in discovery order.
fn bfs<S: Hash + Eq + Clone>(
    start: S,
    budget: usize,
    mut succ: impl FnMut(&S, &mut Vec<(Step, S)>),
    mut goal: impl FnMut(&S) -> bool,
) -> Result<Option<(Vec<Step>, Vec<S>)>, OracleError> {
    let mut seen: IndexMap<S, (u32, Option<Step>)> = IndexMap::new();
    seen.insert(start, (u32::MAX, None));
    let mut buf = Vec::new();
    let mut head = 0usize;
    while head < seen.len() {
        let (s, _) = seen.get_index(head).unwrap();
        let s = s.clone();
        if goal(&s) {
            let mut steps = Vec::new();
            let mut states = vec![s];
            let mut cur = head;
            while let (_, (parent, Some(step))) = seen.get_index(cur).unwrap() {
                steps.push(*step);
                cur = *parent as usize;
                states.push(seen.get_index(cur).unwrap().0.clone());
            }
            steps.reverse();
            states.reverse();
            return Ok(Some((steps, states)));
        }
        succ(&s, &mut buf);
        for (step, t) in buf.drain(..) {
            if !seen.contains_key(&t) {
                if seen.len() >= budget {
                    return Err(OracleError::BudgetExceeded(budget));
                }
                seen.insert(t, (head as u32, Some(step)));
            }
        }
        head += 1;
    }
    Ok(None)
}

/// The complete reachability graph.
#[derive(Clone, Debug)]
pub struct ReachGraph {
    pub configurations: Vec<Configuration>,
    pub edges: Vec<(u32, Step, u32)>,
    pub initial: u32,
    /// Configurations enabling n_fin.
    pub terminal: Vec<bool>,
    // BFS tree: parent index and step
    parent: Vec<Option<(u32, Step)>>,
}

impl ReachGraph {
    /// Configurations from which some terminal configuration is reachable.
    pub fn co_reachable(&self) -> Vec<bool> {
        let n = self.terminal.len();
        let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(a, _, b) in &self.edges {
            rev[b as usize].push(a);
        }
        let mut ok = self.terminal.clone();
        let mut stack: Vec<u32> = (0..n as u32).filter(|&i| ok[i as usize]).collect();
        while let Some(b) = stack.pop() {
            for &a in &rev[b as usize] {
                if !ok[a as usize] {
                    ok[a as usize] = true;
                    stack.push(a);
                }
            }
        }
        ok
    }

    /// Shortest run from the initial configuration to `target`.
    pub fn run_to(&self, target: u32) -> Vec<Step> {
        let mut steps = Vec::new();
        let mut cur = target;
        while let Some((p, s)) = self.parent[cur as usize] {
            steps.push(s);
            cur = p;
        }
        steps.reverse();
        steps
    }

    pub fn deadlocks(&self) -> Vec<u32> {
        let mut has_out = vec![false; self.terminal.len()];
        for &(a, _, _) in &self.edges {
            has_out[a as usize] = true;
        }
        (0..self.terminal.len() as u32)
            .filter(|&i| !self.terminal[i as usize] && !has_out[i as usize])
            .collect()
    }

    pub fn to_dot(&self, neg: &Negotiation) -> String {
        let mut s = String::from("digraph reach {\n  node [shape=box];\n");
        for (i, c) in self.configurations.iter().enumerate() {
            let peri = if self.terminal[i] { ", peripheries=2" } else { "" };
            s.push_str(&format!("  c{} [label=\"{}\"{}];\n", i, c.render(neg), peri));
        }
        for &(a, st, b) in &self.edges {
            s.push_str(&format!(
                "  c{} -> c{} [label=\"{}/{}\"];\n",
                a,
                b,
                neg.node_name(st.node),
                neg.result_name(st.result)
            ));
        }
        s.push_str("}\n");
        s
    }
}

/// Explore the state space; `configurations` is left empty and the
/// compact states are returned alongside.
fn explore<'a>(neg: &'a Negotiation, budget: usize) -> Result<(Engine<'a>, Vec<State>, ReachGraph), OracleError> {
    let eng = Engine::new(neg);
    let mut seen: IndexMap<State, ()> = IndexMap::new();
    seen.insert(eng.initial(), ());
    let mut parent = vec![None];
    let mut edges = Vec::new();
    let mut buf = Vec::new();
    let mut head = 0;
    while head < seen.len() {
        let s = seen.get_index(head).unwrap().0.clone();
        eng.successors(&s, &mut buf);
        for (step, t) in buf.drain(..) {
            let idx = match seen.get_index_of(&t) {
                Some(i) => i,
                None => {
                    if seen.len() >= budget {
                        return Err(OracleError::BudgetExceeded(budget));
                    }
                    seen.insert(t, ());
                    parent.push(Some((head as u32, step)));
                    seen.len() - 1
                }
            };
            edges.push((head as u32, step, idx as u32));
        }
        head += 1;
    }
    let terminal = seen.keys().map(|s| eng.terminal(s)).collect();
    let states: Vec<State> = seen.into_keys().collect();
    Ok((eng, states, ReachGraph { configurations: Vec::new(), edges, initial: 0, terminal, parent }))
}

pub fn build_reach(neg: &Negotiation, budget: usize) -> Result<ReachGraph, OracleError> {
    let (eng, states, mut g) = explore(neg, budget)?;
    g.configurations = states.iter().map(|s| eng.to_config(s)).collect();
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleVerdict {
    Sound,
    /// Shortest initial run to a deadlock, or, when none is reachable, to
    /// a configuration that cannot complete.
    Unsound { run: Run, stuck: Configuration },
}

impl OracleVerdict {
    pub fn is_sound(&self) -> bool {
        matches!(self, OracleVerdict::Sound)
    }
}

pub fn oracle_sound(neg: &Negotiation, budget: usize) -> Result<OracleVerdict, OracleError> {
    let (eng, states, g) = explore(neg, budget)?;
    let ok = g.co_reachable();
    // configurations are numbered in BFS order, so the first hit is shortest
    let bad = g.deadlocks().first().map(|&d| d as usize).or_else(|| ok.iter().position(|&b| !b));
    match bad {
        None => Ok(OracleVerdict::Sound),
        Some(bad) => Ok(OracleVerdict::Unsound {
            run: Run::initial(neg, g.run_to(bad as u32)),
            stuck: eng.to_config(&states[bad]),
        }),
    }
}

/// Include set P and omit set B. `omit_pairs` extends B to single
/// results for the data analysis.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmitInstance {
    pub include: Vec<Step>,
    pub omit: Vec<NodeId>,
    pub omit_pairs: Vec<Step>,
}

impl OmitInstance {
    pub fn new(include: Vec<Step>, omit: Vec<NodeId>) -> Self {
        OmitInstance { include, omit, omit_pairs: Vec::new() }
    }

    pub fn forbids(&self, s: Step) -> bool {
        self.omit.contains(&s.node) || self.omit_pairs.contains(&s)
    }
}

/// A successful run containing every pair of P and no step of B.
pub fn oracle_omit(neg: &Negotiation, inst: &OmitInstance, budget: usize) -> Result<Option<Run>, OracleError> {
    assert!(inst.include.len() <= 64, "include set too large");
    let eng = Engine::new(neg);
    let full: u64 = if inst.include.len() == 64 { u64::MAX } else { (1u64 << inst.include.len()) - 1 };
    let end_bits: u64 = inst
        .include
        .iter()
        .enumerate()
        .filter(|(_, s)| s.node == neg.fin() && s.result == ResultId::END)
        .fold(0, |m, (i, _)| m | (1 << i));
    let bits_of = |s: Step| -> u64 {
        inst.include.iter().enumerate().filter(|(_, &x)| x == s).fold(0, |m, (i, _)| m | (1 << i))
    };
    let found = bfs(
        (eng.initial(), 0u64),
        budget,
        |(s, mask), out| {
            let mut buf = Vec::new();
            eng.successors(s, &mut buf);
            for (step, t) in buf {
                if !inst.forbids(step) {
                    out.push((step, (t, mask | bits_of(step))));
                }
            }
        },
        |(s, mask)| eng.terminal(s) && (mask | end_bits) == full,
    )?;
    Ok(found.map(|(steps, _)| Run::initial(neg, steps)))
}

/// A reachable configuration enabling both m and n; none when their
/// domains intersect.
pub fn oracle_concurrent(
    neg: &Negotiation,
    m: NodeId,
    n: NodeId,
    budget: usize,
) -> Result<Option<Configuration>, OracleError> {
    if neg.dom(m).iter().any(|p| neg.in_dom(n, *p)) {
        return Ok(None);
    }
    let eng = Engine::new(neg);
    let found = bfs(
        eng.initial(),
        budget,
        |s, out| eng.successors(s, out),
        |s| eng.enables(s, m) && eng.enables(s, n),
    )?;
    Ok(found.map(|(_, states)| eng.to_config(states.last().unwrap())))
}

/// A successful run with marked steps `i < j`: step i in O1, step j in O2,
/// nothing in O strictly between. `j == run.steps.len()` denotes the
/// virtual final step (n_fin, end).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecViolation {
    pub run: Run,
    pub i: usize,
    pub j: usize,
    pub first: Step,
    pub second: Step,
}

impl SpecViolation {
    /// Check the marked run against the definition.
    pub fn verify(&self, neg: &Negotiation, spec: &DataSpec) -> bool {
        let steps = &self.run.steps;
        let second = if self.j == steps.len() { Step::new(neg.fin(), ResultId::END) } else { steps[self.j] };
        self.run.is_successful(neg)
            && self.i < self.j
            && self.j <= steps.len()
            && steps[self.i] == self.first
            && second == self.second
            && spec.o1.contains(&self.first)
            && spec.o2.contains(&self.second)
            && steps[self.i + 1..self.j].iter().all(|s| !spec.o.contains(s))
    }
}

/// Phase-product search for a violation of (O1, O2, O).
pub fn oracle_spec(neg: &Negotiation, spec: &DataSpec, budget: usize) -> Result<Option<SpecViolation>, OracleError> {
    let eng = Engine::new(neg);
    let end = Step::new(neg.fin(), ResultId::END);
    let virtual_end = neg.out(neg.fin()).is_empty() && spec.o2.contains(&end);
    // phases: 0 before O1, 1 after O1 avoiding O, 2 done
    let found = bfs(
        (eng.initial(), 0u8),
        budget,
        |(s, phase), out| {
            let mut buf = Vec::new();
            eng.successors(s, &mut buf);
            for (step, t) in buf {
                match phase {
                    0 => {
                        out.push((step, (t.clone(), 0)));
                        if spec.o1.contains(&step) {
                            out.push((step, (t, 1)));
                        }
                    }
                    1 => {
                        if spec.o2.contains(&step) {
                            out.push((step, (t.clone(), 2)));
                        }
                        if !spec.o.contains(&step) {
                            out.push((step, (t, 1)));
                        }
                    }
                    _ => out.push((step, (t, 2))),
                }
            }
        },
        |(s, phase)| eng.terminal(s) && (*phase == 2 || (*phase == 1 && virtual_end)),
    )?;
    Ok(found.map(|(steps, states)| {
        let i = states.iter().position(|(_, ph)| *ph >= 1).unwrap() - 1;
        let j = states.iter().position(|(_, ph)| *ph == 2).map(|k| k - 1).unwrap_or(steps.len());
        let second = if j == steps.len() { end } else { steps[j] };
        SpecViolation { first: steps[i], second, run: Run::initial(neg, steps), i, j }
    }))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RealizeError {
    #[error("path is not a local path of the negotiation")]
    InvalidPath,
    #[error("first path node is not enabled")]
    NotEnabled,
    #[error("path not realizable: no way to enable {0}")]
    NotRealizable(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Realize a local path from `c`: execute each path step, then extend by a
/// shortest run that leaves the pinned process alone until the next path
/// node is enabled.
pub fn realize_path(
    neg: &Negotiation,
    path: &LocalPath,
    c: &Configuration,
    budget: usize,
) -> Result<Run, RealizeError> {
    if !path.is_valid(neg) {
        return Err(RealizeError::InvalidPath);
    }
    if !c.enables(neg, path.start) {
        return Err(RealizeError::NotEnabled);
    }
    let mut eng = Engine::new(neg);
    let mut cur = eng.intern_config(c);
    let mut steps = Vec::new();
    let mut node = path.start;
    for ps in &path.steps {
        let a = ps.result;
        let ai = neg.result_slot(node, a).ok_or(RealizeError::InvalidPath)?;
        for (pi, &p) in neg.dom(node).iter().enumerate() {
            cur[p.index()] = eng.delta_set[node.index()][ai][pi];
        }
        steps.push(Step::new(node, a));
        let pinned = ps.process;
        let target = ps.to;
        let found = bfs(
            cur.clone(),
            budget,
            |s, out| {
                eng.successors(s, out);
                out.retain(|(st, _)| !neg.in_dom(st.node, pinned));
            },
            |s| eng.enables(s, target),
        )?;
        let Some((seg, states)) = found else {
            return Err(RealizeError::NotRealizable(neg.node_name(target).to_string()));
        };
        steps.extend(seg);
        cur = states.last().unwrap().clone();
        node = target;
    }
    Ok(Run::new(c.clone(), steps))
}

/// Whether `run` realizes `path` in the sense of the definition: path steps
/// in order, each interleaved segment leaving the pinned process alone, and
/// the last path node enabled at the end.
pub fn realizes(neg: &Negotiation, path: &LocalPath, run: &Run) -> bool {
    let Ok(configs) = run.replay(neg) else { return false };
    let steps = &run.steps;
    let mut node = path.start;
    if !configs[0].enables(neg, node) {
        return false;
    }
    let mut k = 0;
    for ps in &path.steps {
        if k >= steps.len() || steps[k] != Step::new(node, ps.result) {
            return false;
        }
        k += 1;
        // the next step touching the pinned process must be the next path step
        while k < steps.len() && !neg.in_dom(steps[k].node, ps.process) {
            k += 1;
        }
        node = ps.to;
        if !configs[k].enables(neg, node) {
            return false;
        }
    }
    k == steps.len()
}

/// Bubble adjacent steps with disjoint domains into the fixed topological
/// order. Cyclic negotiations are returned unchanged.
pub fn reorder_topologically(neg: &Negotiation, run: &Run) -> Run {
    let Ok(topo) = neg.topo() else { return run.clone() };
    let mut steps = run.steps.clone();
    let disjoint = |a: NodeId, b: NodeId| !neg.dom(a).iter().any(|p| neg.in_dom(b, *p));
    let mut changed = true;
    while changed {
        changed = false;
        for k in 0..steps.len().saturating_sub(1) {
            let (x, y) = (steps[k].node, steps[k + 1].node);
            if topo.precedes(y, x) && disjoint(x, y) {
                steps.swap(k, k + 1);
                changed = true;
            }
        }
    }
    Run::new(run.origin.clone(), steps)
}

/// Node sequence non-decreasing in the topological order.
pub fn respects_order(neg: &Negotiation, run: &Run) -> bool {
    match neg.topo() {
        Ok(t) => run.steps.windows(2).all(|w| !t.precedes(w[1].node, w[0].node)),
        Err(_) => false,
    }
}

/// Processes whose positions two configurations agree on.
pub fn agree_on(a: &Configuration, b: &Configuration, procs: &[ProcId]) -> bool {
    procs.iter().all(|p| a.get(*p) == b.get(*p))
}
