//! The graph of a negotiation and reachability primitives over it.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::{Negotiation, NodeId, ProcId, ResultId};

/// Labeled edge n --(p,a)--> n'.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub process: ProcId,
    pub result: ResultId,
    pub to: NodeId,
}

#[derive(Clone, Debug)]
pub struct NegGraph {
    edges: Vec<Edge>,
    succ: Vec<Vec<u32>>,
    pred: Vec<Vec<u32>>,
    adj: Vec<Vec<NodeId>>,
}

impl NegGraph {
    pub(crate) fn build(neg: &Negotiation) -> Self {
        let n = neg.node_count();
        let mut edges = Vec::new();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for u in neg.nodes() {
            for (ai, &a) in neg.out(u).iter().enumerate() {
                for (pi, &p) in neg.dom(u).iter().enumerate() {
                    for &v in neg.delta_at(u, ai, pi) {
                        let id = edges.len() as u32;
                        edges.push(Edge { from: u, process: p, result: a, to: v });
                        succ[u.index()].push(id);
                        pred[v.index()].push(id);
                    }
                }
            }
        }
        let adj = succ
            .iter()
            .map(|es| {
                let mut seen = Vec::new();
                for &e in es {
                    let t = edges[e as usize].to;
                    if !seen.contains(&t) {
                        seen.push(t);
                    }
                }
                seen
            })
            .collect();
        NegGraph { edges, succ, pred, adj }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
    pub fn edge(&self, id: u32) -> &Edge {
        &self.edges[id as usize]
    }
    pub fn out_edges(&self, n: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.succ[n.index()].iter().map(move |&e| &self.edges[e as usize])
    }
    pub fn in_edges(&self, n: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.pred[n.index()].iter().map(move |&e| &self.edges[e as usize])
    }
    /// Distinct successors in edge order.
    pub fn successors(&self, n: NodeId) -> &[NodeId] {
        &self.adj[n.index()]
    }
    pub fn node_count(&self) -> usize {
        self.succ.len()
    }
}

pub fn graph_of(neg: &Negotiation) -> &NegGraph {
    neg.graph()
}

/// A fixed linear order compatible with every edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopoOrder {
    order: Vec<NodeId>,
    rank: Vec<u32>,
}

impl TopoOrder {
    /// Kahn's algorithm, smallest node index first; on a cycle returns it.
    pub(crate) fn compute(neg: &Negotiation) -> Result<TopoOrder, Vec<NodeId>> {
        let g = neg.graph();
        let n = g.node_count();
        let mut indeg = vec![0u32; n];
        for u in 0..n {
            for &v in &g.adj[u] {
                indeg[v.index()] += 1;
            }
        }
        let mut heap: BinaryHeap<Reverse<u32>> =
            (0..n as u32).filter(|&u| indeg[u as usize] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(u)) = heap.pop() {
            order.push(NodeId(u));
            for &v in &g.adj[u as usize] {
                indeg[v.index()] -= 1;
                if indeg[v.index()] == 0 {
                    heap.push(Reverse(v.0));
                }
            }
        }
        if order.len() < n {
            return Err(find_cycle(g).expect("Kahn stalled without a cycle"));
        }
        let mut rank = vec![0; n];
        for (i, u) in order.iter().enumerate() {
            rank[u.index()] = i as u32;
        }
        Ok(TopoOrder { order, rank })
    }

    pub fn order(&self) -> &[NodeId] {
        &self.order
    }
    pub fn rank(&self, n: NodeId) -> u32 {
        self.rank[n.index()]
    }
    /// m ≺ n strictly.
    pub fn precedes(&self, m: NodeId, n: NodeId) -> bool {
        self.rank[m.index()] < self.rank[n.index()]
    }
}

/// Topological order of an acyclic negotiation, or one cycle.
pub fn topo_order(neg: &Negotiation) -> Result<&TopoOrder, Vec<NodeId>> {
    neg.topo().map_err(|c| c.to_vec())
}

/// DFS over successor lists; first back edge closes the reported cycle.
fn find_cycle(g: &NegGraph) -> Option<Vec<NodeId>> {
    let n = g.node_count();
    // 0 unvisited, 1 on stack, 2 done
    let mut color = vec![0u8; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        color[root] = 1;
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            if *i < g.adj[u].len() {
                let v = g.adj[u][*i].index();
                *i += 1;
                match color[v] {
                    0 => {
                        color[v] = 1;
                        stack.push((v, 0));
                    }
                    1 => {
                        let pos = stack.iter().position(|&(w, _)| w == v).unwrap();
                        return Some(stack[pos..].iter().map(|&(w, _)| NodeId(w as u32)).collect());
                    }
                    _ => {}
                }
            } else {
                color[u] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Acyclicity of the subgraph whose edges carry a process accepted by `keep`.
pub fn is_acyclic_on(neg: &Negotiation, keep: impl Fn(ProcId) -> bool) -> bool {
    let g = neg.graph();
    let n = g.node_count();
    let adj: Vec<Vec<NodeId>> = (0..n)
        .map(|u| g.out_edges(NodeId(u as u32)).filter(|e| keep(e.process)).map(|e| e.to).collect())
        .collect();
    let mut indeg = vec![0u32; n];
    for vs in &adj {
        for v in vs {
            indeg[v.index()] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&u| indeg[u] == 0).collect();
    let mut seen = 0;
    while let Some(u) = queue.pop() {
        seen += 1;
        for v in &adj[u] {
            indeg[v.index()] -= 1;
            if indeg[v.index()] == 0 {
                queue.push(v.index());
            }
        }
    }
    seen == n
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// Nodes connected to `sources` by p-paths in the given direction.
pub fn p_reach(neg: &Negotiation, p: ProcId, sources: &[NodeId], dir: Direction) -> Vec<NodeId> {
    let seen = p_reach_mask(neg, p, sources, dir);
    mask_to_nodes(&seen)
}

pub fn p_reach_mask(neg: &Negotiation, p: ProcId, sources: &[NodeId], dir: Direction) -> Vec<bool> {
    let g = neg.graph();
    let mut seen = vec![false; g.node_count()];
    let mut queue: VecDeque<NodeId> = VecDeque::new();
    for &s in sources {
        if !seen[s.index()] {
            seen[s.index()] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        let next: Box<dyn Iterator<Item = &Edge>> = match dir {
            Direction::Forward => Box::new(g.out_edges(u)),
            Direction::Backward => Box::new(g.in_edges(u)),
        };
        for e in next.filter(|e| e.process == p) {
            let v = if dir == Direction::Forward { e.to } else { e.from };
            if !seen[v.index()] {
                seen[v.index()] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Plain reachability over all edge labels.
pub fn local_reach(neg: &Negotiation, sources: &[NodeId]) -> Vec<NodeId> {
    mask_to_nodes(&local_reach_mask(neg, sources))
}

pub fn local_reach_mask(neg: &Negotiation, sources: &[NodeId]) -> Vec<bool> {
    let g = neg.graph();
    let mut seen = vec![false; g.node_count()];
    let mut stack: Vec<NodeId> = Vec::new();
    for &s in sources {
        if !seen[s.index()] {
            seen[s.index()] = true;
            stack.push(s);
        }
    }
    while let Some(u) = stack.pop() {
        for &v in g.successors(u) {
            if !seen[v.index()] {
                seen[v.index()] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Some non-empty local path m →+ n.
pub fn has_nonempty_path(neg: &Negotiation, m: NodeId, n: NodeId) -> bool {
    let g = neg.graph();
    local_reach_mask(neg, g.successors(m))[n.index()]
}

pub(crate) fn mask_to_nodes(mask: &[bool]) -> Vec<NodeId> {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| NodeId(i as u32)).collect()
}

/// One step of a local path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub process: ProcId,
    pub result: ResultId,
    pub to: NodeId,
}

/// A path in the graph of a negotiation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalPath {
    pub start: NodeId,
    pub steps: Vec<PathStep>,
}

impl LocalPath {
    pub fn trivial(start: NodeId) -> Self {
        LocalPath { start, steps: Vec::new() }
    }

    pub fn end(&self) -> NodeId {
        self.steps.last().map(|s| s.to).unwrap_or(self.start)
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        std::iter::once(self.start).chain(self.steps.iter().map(|s| s.to)).collect()
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut from = self.start;
        self.steps
            .iter()
            .map(|s| {
                let e = Edge { from, process: s.process, result: s.result, to: s.to };
                from = s.to;
                e
            })
            .collect()
    }

    pub fn is_p_path(&self, p: ProcId) -> bool {
        self.steps.iter().all(|s| s.process == p)
    }

    /// Every step is an edge of the graph.
    pub fn is_valid(&self, neg: &Negotiation) -> bool {
        self.edges().iter().all(|e| {
            neg.delta(e.from, e.result, e.process).map(|t| t.contains(&e.to)).unwrap_or(false)
        })
    }

    pub fn render(&self, neg: &Negotiation) -> String {
        let mut s = neg.node_name(self.start).to_string();
        for st in &self.steps {
            s.push_str(&format!(
                "→({},{}){}",
                neg.proc_name(st.process),
                neg.result_name(st.result),
                neg.node_name(st.to)
            ));
        }
        s
    }
}

/// BFS for a shortest path from any source to a goal node over allowed
/// nodes and edges. Sources are checked against the goal first.
pub fn bfs_path(
    neg: &Negotiation,
    sources: &[NodeId],
    allow_node: impl Fn(NodeId) -> bool,
    allow_edge: impl Fn(&Edge) -> bool,
    goal: impl Fn(NodeId) -> bool,
) -> Option<LocalPath> {
    let g = neg.graph();
    let mut parent: Vec<Option<(NodeId, u32)>> = vec![None; g.node_count()];
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if allow_node(s) && !seen[s.index()] {
            seen[s.index()] = true;
            queue.push_back(s);
        }
    }
    let mut hit = None;
    while let Some(u) = queue.pop_front() {
        if goal(u) {
            hit = Some(u);
            break;
        }
        for &eid in &g.succ[u.index()] {
            let e = g.edge(eid);
            if !seen[e.to.index()] && allow_edge(e) && allow_node(e.to) {
                seen[e.to.index()] = true;
                parent[e.to.index()] = Some((u, eid));
                queue.push_back(e.to);
            }
        }
    }
    let mut cur = hit?;
    let mut steps = Vec::new();
    while let Some((prev, eid)) = parent[cur.index()] {
        let e = g.edge(eid);
        steps.push(PathStep { process: e.process, result: e.result, to: e.to });
        cur = prev;
    }
    steps.reverse();
    Some(LocalPath { start: cur, steps })
}

/// A strongly connected component of the subgraph induced by `filter`
/// that has at least one edge and meets every set in `hits`. Among
/// qualifying components the one with the smallest node is returned.
pub fn sccs(
    neg: &Negotiation,
    filter: impl Fn(NodeId) -> bool,
    hits: &[&dyn Fn(NodeId) -> bool],
) -> Option<Vec<NodeId>> {
    let g = neg.graph();
    let comps = tarjan(g, &filter);
    let mut best: Option<Vec<NodeId>> = None;
    for mut comp in comps {
        comp.sort();
        let has_edge = comp.len() > 1 || g.successors(comp[0]).contains(&comp[0]);
        if !has_edge || !hits.iter().all(|h| comp.iter().any(|&n| h(n))) {
            continue;
        }
        if best.as_ref().map(|b| comp[0] < b[0]).unwrap_or(true) {
            best = Some(comp);
        }
    }
    best
}

/// Iterative Tarjan over the filtered subgraph.
pub(crate) fn tarjan(g: &NegGraph, filter: &impl Fn(NodeId) -> bool) -> Vec<Vec<NodeId>> {
    const NONE: u32 = u32::MAX;
    let n = g.node_count();
    let mut index = vec![NONE; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0u32;
    for root in 0..n {
        if index[root] != NONE || !filter(NodeId(root as u32)) {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root as u32);
        on_stack[root] = true;
        while let Some(&mut (u, ref mut i)) = call.last_mut() {
            if *i < g.adj[u].len() {
                let v = g.adj[u][*i].index();
                *i += 1;
                if !filter(NodeId(v as u32)) {
                    continue;
                }
                if index[v] == NONE {
                    index[v] = next;
                    low[v] = next;
                    next += 1;
                    stack.push(v as u32);
                    on_stack[v] = true;
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[u]);
                }
                if low[u] == index[u] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap() as usize;
                        on_stack[w] = false;
                        comp.push(NodeId(w as u32));
                        if w == u {
                            break;
                        }
                    }
                    comps.push(comp);
                }
            }
        }
    }
    comps
}
