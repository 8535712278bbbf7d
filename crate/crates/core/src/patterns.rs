//! Soundness of deterministic negotiations through the anti-patterns B, F
//! and C.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{bfs_path, local_reach_mask, p_reach_mask, Direction, Edge, LocalPath, PathStep};
use crate::model::{Negotiation, NodeId, ProcId, Step};
use crate::par;

/// Default cap on enumerated paths for fixed-end fork search on cyclic inputs.
pub const FORK_SEARCH_BUDGET: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum PatternError {
    #[error("negotiation is not deterministic")]
    NotDeterministic,
    #[error("fork search budget exceeded")]
    BudgetExceeded,
}

/// Two disjoint single-process paths leaving one branch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fork {
    pub p1: ProcId,
    pub p2: ProcId,
    pub n1: NodeId,
    pub n2: NodeId,
    pub branch: Step,
    pub path1: LocalPath,
    pub path2: LocalPath,
}

impl Fork {
    /// Check the definition directly.
    pub fn verify(&self, neg: &Negotiation) -> bool {
        let Step { node: n, result: a } = self.branch;
        let (Some(t1), Some(t2)) = (neg.delta(n, a, self.p1), neg.delta(n, a, self.p2)) else {
            return false;
        };
        let nodes1 = self.path1.nodes();
        let nodes2 = self.path2.nodes();
        self.p1 != self.p2
            && t1.contains(&self.path1.start)
            && t2.contains(&self.path2.start)
            && self.path1.end() == self.n1
            && self.path2.end() == self.n2
            && self.path1.is_valid(neg)
            && self.path2.is_valid(neg)
            && self.path1.is_p_path(self.p1)
            && self.path2.is_p_path(self.p2)
            && nodes1.iter().all(|x| !nodes2.contains(x))
            && local_reach_mask(neg, &[neg.init()])[n.index()]
    }

    pub fn is_cross_domain(&self, neg: &Negotiation) -> bool {
        neg.in_dom(self.n1, self.p2) && neg.in_dom(self.n2, self.p1)
    }

    pub fn render(&self, neg: &Negotiation) -> String {
        format!(
            "fork ({},{},{},{}) at ({},{}): {} | {}",
            neg.proc_name(self.p1),
            neg.proc_name(self.p2),
            neg.node_name(self.n1),
            neg.node_name(self.n2),
            neg.node_name(self.branch.node),
            neg.result_name(self.branch.result),
            self.path1.render(neg),
            self.path2.render(neg)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AntiPattern {
    /// Process `process` can reach `node` but never leave it towards n_fin.
    B { process: ProcId, node: NodeId, path: LocalPath },
    /// A fork with p2 ∈ dom(n1) and p1 ∈ dom(n2).
    F(Fork),
    /// A reachable circuit without a dominating node.
    C { circuit: Vec<Edge> },
}

impl AntiPattern {
    pub fn kind(&self) -> &'static str {
        match self {
            AntiPattern::B { .. } => "B",
            AntiPattern::F(_) => "F",
            AntiPattern::C { .. } => "C",
        }
    }

    pub fn verify(&self, neg: &Negotiation) -> bool {
        match self {
            AntiPattern::B { process, node, path } => {
                path.start == neg.init()
                    && path.end() == *node
                    && path.is_valid(neg)
                    && path.is_p_path(*process)
                    && !p_reach_mask(neg, *process, &[neg.fin()], Direction::Backward)[node.index()]
            }
            AntiPattern::F(f) => f.verify(neg) && f.is_cross_domain(neg),
            AntiPattern::C { circuit } => {
                let closed = !circuit.is_empty()
                    && circuit.windows(2).all(|w| w[0].to == w[1].from)
                    && circuit.last().unwrap().to == circuit[0].from;
                let edges_ok = circuit.iter().all(|e| {
                    neg.delta(e.from, e.result, e.process).map(|t| t.contains(&e.to)).unwrap_or(false)
                });
                let nodes: Vec<NodeId> = circuit.iter().map(|e| e.from).collect();
                let dominated = nodes.iter().any(|&w| {
                    nodes.iter().all(|&m| neg.dom(m).iter().all(|p| neg.in_dom(w, *p)))
                });
                closed
                    && edges_ok
                    && !dominated
                    && local_reach_mask(neg, &[neg.init()])[circuit[0].from.index()]
            }
        }
    }

    /// Edges to highlight in a drawing.
    pub fn edges(&self) -> Vec<Edge> {
        match self {
            AntiPattern::B { path, .. } => path.edges(),
            AntiPattern::F(f) => f.path1.edges().into_iter().chain(f.path2.edges()).collect(),
            AntiPattern::C { circuit } => circuit.clone(),
        }
    }

    pub fn render(&self, neg: &Negotiation) -> String {
        match self {
            AntiPattern::B { process, node, path } => format!(
                "pattern B: process {} reaches {} via {} and has no path to {}",
                neg.proc_name(*process),
                neg.node_name(*node),
                path.render(neg),
                neg.node_name(neg.fin())
            ),
            AntiPattern::F(f) => format!("pattern F: {}", f.render(neg)),
            AntiPattern::C { circuit } => {
                let mut s = String::from("pattern C: circuit ");
                for e in circuit {
                    s.push_str(&format!(
                        "{}→({},{})",
                        neg.node_name(e.from),
                        neg.proc_name(e.process),
                        neg.result_name(e.result)
                    ));
                }
                s.push_str(neg.node_name(circuit[0].from));
                s
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetVerdict {
    Sound,
    Unsound(AntiPattern),
}

impl DetVerdict {
    pub fn is_sound(&self) -> bool {
        matches!(self, DetVerdict::Sound)
    }
}

pub fn find_pattern_b(neg: &Negotiation) -> Option<AntiPattern> {
    let procs: Vec<ProcId> = neg.procs().collect();
    par::find_first(&procs, |&p| {
        let fwd = p_reach_mask(neg, p, &[neg.init()], Direction::Forward);
        let bwd = p_reach_mask(neg, p, &[neg.fin()], Direction::Backward);
        let node = neg.nodes().find(|n| fwd[n.index()] && !bwd[n.index()])?;
        let path = bfs_path(neg, &[neg.init()], |_| true, |e| e.process == p, |n| n == node)
            .expect("forward-reachable node has a path");
        Some(AntiPattern::B { process: p, node, path })
    })
}

/// Branches (n, a) with n locally reachable and at least two participants.
fn branches(neg: &Negotiation) -> Vec<(NodeId, usize)> {
    let reach = local_reach_mask(neg, &[neg.init()]);
    neg.nodes()
        .filter(|n| reach[n.index()] && neg.dom(*n).len() >= 2)
        .flat_map(|n| (0..neg.out(n).len()).map(move |ai| (n, ai)))
        .collect()
}

/// Nodes containing `q` that a p-path from `start` reaches before meeting
/// any other node containing `q`, in BFS order, with their paths.
fn first_hits(neg: &Negotiation, start: NodeId, p: ProcId, q: ProcId) -> Vec<LocalPath> {
    if neg.in_dom(start, q) {
        return vec![LocalPath::trivial(start)];
    }
    let g = neg.graph();
    let mut parent: HashMap<NodeId, (NodeId, PathStep)> = HashMap::new();
    let mut seen: HashSet<NodeId> = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let mut hits = Vec::new();
    while let Some(u) = queue.pop_front() {
        for e in g.out_edges(u).filter(|e| e.process == p) {
            if !seen.insert(e.to) {
                continue;
            }
            parent.insert(e.to, (u, PathStep { process: p, result: e.result, to: e.to }));
            if neg.in_dom(e.to, q) {
                hits.push(e.to);
            } else {
                queue.push_back(e.to);
            }
        }
    }
    hits.into_iter()
        .map(|h| {
            let mut steps = Vec::new();
            let mut cur = h;
            while let Some(&(prev, st)) = parent.get(&cur) {
                steps.push(st);
                cur = prev;
            }
            steps.reverse();
            LocalPath { start, steps }
        })
        .collect()
}

/// Anti-pattern F. A fork with p2 ∈ dom(n1), p1 ∈ dom(n2) exists at a branch
/// iff the first p2-nodes met by p1 and the first p1-nodes met by p2 admit
/// two distinct choices; prefixes up to those first hits are disjoint.
pub fn find_pattern_f(neg: &Negotiation) -> Result<Option<AntiPattern>, PatternError> {
    if !neg.is_deterministic() {
        return Err(PatternError::NotDeterministic);
    }
    let cands = branches(neg);
    Ok(par::find_first(&cands, |&(n, ai)| {
        let dom = neg.dom(n);
        for i in 0..dom.len() {
            for j in i + 1..dom.len() {
                let (p1, p2) = (dom[i], dom[j]);
                let u = neg.delta_at(n, ai, i)[0];
                let v = neg.delta_at(n, ai, j)[0];
                if u == v {
                    continue;
                }
                let x1 = first_hits(neg, u, p1, p2);
                if x1.is_empty() {
                    continue;
                }
                let x2 = first_hits(neg, v, p2, p1);
                for a in &x1 {
                    if let Some(b) = x2.iter().find(|b| b.end() != a.end()) {
                        return Some(AntiPattern::F(Fork {
                            p1,
                            p2,
                            n1: a.end(),
                            n2: b.end(),
                            branch: Step::new(n, neg.out(n)[ai]),
                            path1: a.clone(),
                            path2: b.clone(),
                        }));
                    }
                }
            }
        }
        None
    }))
}

/// Fork search. With `fix_ends` the path ends are given; with
/// `cross_domain` only forks satisfying p2 ∈ dom(n1), p1 ∈ dom(n2) count.
pub fn find_fork(
    neg: &Negotiation,
    fix_ends: Option<(NodeId, NodeId)>,
    cross_domain: bool,
) -> Result<Option<Fork>, PatternError> {
    if !neg.is_deterministic() {
        return Err(PatternError::NotDeterministic);
    }
    let Some((n1, n2)) = fix_ends else {
        if cross_domain {
            return Ok(find_pattern_f(neg)?.map(|w| match w {
                AntiPattern::F(f) => f,
                _ => unreachable!(),
            }));
        }
        // any two participants sent to different nodes form a fork of length zero
        return Ok(branches(neg).into_iter().find_map(|(n, ai)| {
            let dom = neg.dom(n);
            (0..dom.len()).flat_map(|i| (i + 1..dom.len()).map(move |j| (i, j))).find_map(|(i, j)| {
                let u = neg.delta_at(n, ai, i)[0];
                let v = neg.delta_at(n, ai, j)[0];
                (u != v).then(|| Fork {
                    p1: dom[i],
                    p2: dom[j],
                    n1: u,
                    n2: v,
                    branch: Step::new(n, neg.out(n)[ai]),
                    path1: LocalPath::trivial(u),
                    path2: LocalPath::trivial(v),
                })
            })
        }));
    };
    let cands = branches(neg);
    let acyclic = neg.is_acyclic();
    let results = par::map(&cands, |&(n, ai)| -> Result<Option<Fork>, PatternError> {
        let dom = neg.dom(n);
        for (i, &p1) in dom.iter().enumerate() {
            if !neg.in_dom(n1, p1) {
                continue;
            }
            for (j, &p2) in dom.iter().enumerate() {
                if i == j || !neg.in_dom(n2, p2) {
                    continue;
                }
                if cross_domain && !(neg.in_dom(n1, p2) && neg.in_dom(n2, p1)) {
                    continue;
                }
                let u = neg.delta_at(n, ai, i)[0];
                let v = neg.delta_at(n, ai, j)[0];
                let found = if acyclic {
                    disjoint_paths_acyclic(neg, (u, p1, n1), (v, p2, n2))
                } else {
                    disjoint_paths_search(neg, (u, p1, n1), (v, p2, n2), FORK_SEARCH_BUDGET)?
                };
                if let Some((path1, path2)) = found {
                    return Ok(Some(Fork { p1, p2, n1, n2, branch: Step::new(n, neg.out(n)[ai]), path1, path2 }));
                }
            }
        }
        Ok(None)
    });
    for r in results {
        if let Some(f) = r? {
            return Ok(Some(f));
        }
    }
    Ok(None)
}

/// Disjoint p1-path u→t1 and p2-path v→t2 in an acyclic negotiation.
/// Pebbles move in lock-step, always advancing the one earlier in the
/// topological order; the pair-product is then exact.
fn disjoint_paths_acyclic(
    neg: &Negotiation,
    (u, p1, t1): (NodeId, ProcId, NodeId),
    (v, p2, t2): (NodeId, ProcId, NodeId),
) -> Option<(LocalPath, LocalPath)> {
    let topo = neg.topo().expect("acyclic");
    let g = neg.graph();
    if u == v {
        return None;
    }
    let mut parent: HashMap<(NodeId, NodeId), ((NodeId, NodeId), PathStep, bool)> = HashMap::new();
    let mut seen = HashSet::from([(u, v)]);
    let mut queue = VecDeque::from([(u, v)]);
    let mut goal = None;
    while let Some((a, b)) = queue.pop_front() {
        if a == t1 && b == t2 {
            goal = Some((a, b));
            break;
        }
        // which pebble moves: the unfinished one, or the earlier if both unfinished
        let move_first = if a == t1 {
            false
        } else if b == t2 {
            true
        } else {
            topo.rank(a) <= topo.rank(b)
        };
        let (from, p) = if move_first { (a, p1) } else { (b, p2) };
        for e in g.out_edges(from).filter(|e| e.process == p) {
            let next = if move_first { (e.to, b) } else { (a, e.to) };
            if next.0 == next.1 || !seen.insert(next) {
                continue;
            }
            parent.insert(next, ((a, b), PathStep { process: p, result: e.result, to: e.to }, move_first));
            queue.push_back(next);
        }
    }
    let mut cur = goal?;
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    while let Some(&(prev, st, first)) = parent.get(&cur) {
        if first {
            s1.push(st);
        } else {
            s2.push(st);
        }
        cur = prev;
    }
    s1.reverse();
    s2.reverse();
    Some((LocalPath { start: u, steps: s1 }, LocalPath { start: v, steps: s2 }))
}

/// Exhaustive search for cyclic negotiations: enumerate simple p1-paths
/// u→t1 (avoiding v) and look for a p2-path v→t2 avoiding each.
fn disjoint_paths_search(
    neg: &Negotiation,
    (u, p1, t1): (NodeId, ProcId, NodeId),
    (v, p2, t2): (NodeId, ProcId, NodeId),
    budget: usize,
) -> Result<Option<(LocalPath, LocalPath)>, PatternError> {
    if u == v || u == t2 || v == t1 {
        return Ok(None);
    }
    let g = neg.graph();
    // p1 can only use nodes from which t1 is p1-reachable
    let useful = p_reach_mask(neg, p1, &[t1], Direction::Backward);
    if !useful[u.index()] || !p_reach_mask(neg, p2, &[t2], Direction::Backward)[v.index()] {
        return Ok(None);
    }
    let mut on_path = vec![false; neg.node_count()];
    let mut steps: Vec<PathStep> = Vec::new();
    let mut stack: Vec<(NodeId, Vec<Edge>)> = Vec::new();
    on_path[u.index()] = true;
    let out = |x: NodeId| -> Vec<Edge> {
        g.out_edges(x).filter(|e| e.process == p1 && useful[e.to.index()]).copied().collect()
    };
    stack.push((u, out(u)));
    let mut explored = 0usize;
    let try_second = |on_path: &[bool]| {
        bfs_path(neg, &[v], |x| !on_path[x.index()], |e| e.process == p2, |x| x == t2)
    };
    if u == t1 {
        return Ok(try_second(&on_path).map(|q| (LocalPath::trivial(u), q)));
    }
    while let Some((_, pending)) = stack.last_mut() {
        let Some(e) = pending.pop() else {
            let (x, _) = stack.pop().unwrap();
            on_path[x.index()] = false;
            steps.pop();
            continue;
        };
        if on_path[e.to.index()] || e.to == v {
            continue;
        }
        explored += 1;
        if explored > budget {
            return Err(PatternError::BudgetExceeded);
        }
        steps.push(PathStep { process: p1, result: e.result, to: e.to });
        on_path[e.to.index()] = true;
        if e.to == t1 {
            if let Some(q) = try_second(&on_path) {
                return Ok(Some((LocalPath { start: u, steps }, q)));
            }
            on_path[e.to.index()] = false;
            steps.pop();
            continue;
        }
        stack.push((e.to, out(e.to)));
    }
    Ok(None)
}

/// Anti-pattern C: for each domain size M, strongly connected parts of the
/// reachable nodes with |dom| ≤ M that contain a node x with |dom(x)| = M
/// and a node y with some p ∉ dom(x). The circuit x→y→x has no dominating
/// node since any dominator would have domain exactly dom(x).
pub fn find_pattern_c(neg: &Negotiation) -> Option<AntiPattern> {
    let reach = local_reach_mask(neg, &[neg.init()]);
    let mut sizes: Vec<usize> = neg.nodes().filter(|n| reach[n.index()]).map(|n| neg.dom(n).len()).collect();
    sizes.sort();
    sizes.dedup();
    let g = neg.graph();
    par::find_first(&sizes, |&m| {
        let filter = |n: NodeId| reach[n.index()] && neg.dom(n).len() <= m;
        let mut comps = crate::graph::tarjan(g, &filter);
        for c in &mut comps {
            c.sort();
        }
        comps.sort();
        for comp in comps {
            let has_edge = comp.len() > 1 || g.successors(comp[0]).contains(&comp[0]);
            if !has_edge {
                continue;
            }
            let mut union: Vec<ProcId> = comp.iter().flat_map(|&n| neg.dom(n).iter().copied()).collect();
            union.sort();
            union.dedup();
            let Some(&x) = comp.iter().find(|&&x| neg.dom(x).len() == m && union.len() > m) else {
                continue;
            };
            let p = *union.iter().find(|p| !neg.in_dom(x, **p)).unwrap();
            let y = *comp.iter().find(|&&y| neg.in_dom(y, p)).unwrap();
            let inside = |n: NodeId| comp.binary_search(&n).is_ok();
            let there = bfs_path(neg, &[x], inside, |_| true, |n| n == y).unwrap();
            let back = bfs_path(neg, &[y], inside, |_| true, |n| n == x).unwrap();
            let mut circuit: Vec<Edge> = there.edges();
            circuit.extend(back.edges());
            // start at the smallest node for a canonical rendering
            let k = (0..circuit.len()).min_by_key(|&i| circuit[i].from).unwrap();
            circuit.rotate_left(k);
            let w = AntiPattern::C { circuit };
            if w.verify(neg) {
                return Some(w);
            }
        }
        None
    })
}

/// Sound iff none of B, F, C occurs (checked in that order).
pub fn det_soundness(neg: &Negotiation) -> Result<DetVerdict, PatternError> {
    if !neg.is_deterministic() {
        return Err(PatternError::NotDeterministic);
    }
    if let Some(w) = find_pattern_b(neg) {
        return Ok(DetVerdict::Unsound(w));
    }
    if let Some(w) = find_pattern_f(neg)? {
        return Ok(DetVerdict::Unsound(w));
    }
    if let Some(w) = find_pattern_c(neg) {
        return Ok(DetVerdict::Unsound(w));
    }
    Ok(DetVerdict::Sound)
}
