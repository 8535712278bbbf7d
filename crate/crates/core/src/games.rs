//! The omitting game G(N,B) and the K-omitting solver for acyclic,
//! deterministic, sound negotiations.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Negotiation, NodeId, ResultId, Step};
use crate::oracle::OmitInstance;
use crate::patterns::det_soundness;
use crate::semantics::Run;

pub const DEFAULT_K: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum GameError {
    #[error("n_fin may not be omitted")]
    FinInOmitSet,
    #[error("negotiation is not acyclic")]
    NotAcyclic,
    #[error("negotiation is not deterministic")]
    NotDeterministic,
    #[error("negotiation is not sound")]
    NotSound,
    #[error("include set has {0} pairs, more than K = {1}")]
    TooManyPairs(usize, usize),
    #[error("({0}) is not a result of its node")]
    InvalidPair(String),
}

/// Eve moves at nodes outside B by picking a result; Adam then picks the
/// next node among the δ targets. Reaching n_fin wins for Eve.
#[derive(Clone, Debug)]
pub struct GameArena<'a> {
    neg: &'a Negotiation,
    blocked: Vec<bool>,
    // allowed[n][slot]: Eve may pick this result
    allowed: Vec<Vec<bool>>,
}

impl<'a> GameArena<'a> {
    pub fn negotiation(&self) -> &'a Negotiation {
        self.neg
    }

    pub fn eve_positions(&self) -> Vec<NodeId> {
        self.neg.nodes().filter(|n| !self.blocked[n.index()]).collect()
    }

    pub fn adam_positions(&self) -> Vec<Step> {
        self.eve_positions()
            .into_iter()
            .flat_map(|n| self.eve_moves(n).into_iter().map(move |a| Step::new(n, a)))
            .collect()
    }

    /// Results Eve may pick at n.
    pub fn eve_moves(&self, n: NodeId) -> Vec<ResultId> {
        if self.blocked[n.index()] || n == self.neg.fin() {
            return Vec::new();
        }
        let out = self.neg.out(n);
        (0..out.len()).filter(|&ai| self.allowed[n.index()][ai]).map(|ai| out[ai]).collect()
    }

    /// Adam's choices at (n,a): distinct δ targets.
    pub fn adam_moves(&self, n: NodeId, a: ResultId) -> Vec<NodeId> {
        let ai = self.neg.result_slot(n, a).expect("result of node");
        let mut t: Vec<NodeId> = self.neg.branch(n, ai).iter().flatten().copied().collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn is_blocked(&self, n: NodeId) -> bool {
        self.blocked[n.index()]
    }
}

fn check_class(neg: &Negotiation) -> Result<(), GameError> {
    if !neg.is_deterministic() {
        return Err(GameError::NotDeterministic);
    }
    if !neg.is_acyclic() {
        return Err(GameError::NotAcyclic);
    }
    Ok(())
}

/// Arena for omit set `omit` and, for the data analysis, forbidden pairs.
pub fn build_arena<'a>(neg: &'a Negotiation, omit: &[NodeId], omit_pairs: &[Step]) -> Result<GameArena<'a>, GameError> {
    check_class(neg)?;
    if omit.contains(&neg.fin()) {
        return Err(GameError::FinInOmitSet);
    }
    let mut blocked = vec![false; neg.node_count()];
    for n in omit {
        blocked[n.index()] = true;
    }
    let allowed = neg
        .nodes()
        .map(|n| neg.out(n).iter().map(|&a| !omit_pairs.contains(&Step::new(n, a))).collect())
        .collect();
    Ok(GameArena { neg, blocked, allowed })
}

/// Eve's winning node positions and her maximal winning strategy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyMax {
    pub winning: Vec<bool>,
    pub sigma: Vec<Vec<ResultId>>,
}

impl StrategyMax {
    pub fn wins(&self, n: NodeId) -> bool {
        self.winning[n.index()]
    }

    pub fn eve_wins(&self, neg: &Negotiation) -> bool {
        self.wins(neg.init())
    }

    /// Adam position (n,a) is winning for Eve.
    pub fn adam_position_wins(&self, arena: &GameArena, n: NodeId, a: ResultId) -> bool {
        arena.adam_moves(n, a).iter().all(|t| self.wins(*t))
    }
}

/// Winning region by backward induction along the topological order; on
/// acyclic arenas every play is finite, so this is the greatest fixpoint
/// of the safety condition.
pub fn eve_winning(arena: &GameArena) -> StrategyMax {
    let neg = arena.neg;
    let topo = neg.topo().expect("acyclic arena");
    let mut winning = vec![false; neg.node_count()];
    let mut sigma = vec![Vec::new(); neg.node_count()];
    for &n in topo.order().iter().rev() {
        if n == neg.fin() {
            winning[n.index()] = true;
            continue;
        }
        if arena.blocked[n.index()] {
            continue;
        }
        let good: Vec<ResultId> = arena
            .eve_moves(n)
            .into_iter()
            .filter(|&a| {
                let ai = neg.result_slot(n, a).unwrap();
                neg.branch(n, ai).iter().flatten().all(|t| winning[t.index()])
            })
            .collect();
        winning[n.index()] = !good.is_empty();
        sigma[n.index()] = good;
    }
    StrategyMax { winning, sigma }
}

/// A plan: the chosen result per executed node and the witness run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmitPlan {
    pub choices: Vec<Step>,
    /// Nodes where the strategy subgraph branches towards two targets.
    pub branching: Vec<NodeId>,
    pub run: Run,
}

impl OmitPlan {
    pub fn render(&self, neg: &Negotiation) -> String {
        let table: Vec<String> = self
            .choices
            .iter()
            .map(|s| format!("{}→{}", neg.node_name(s.node), neg.result_name(s.result)))
            .collect();
        format!("choices [{}] run {}", table.join(", "), self.run.render(neg))
    }
}

/// The run of a deterministic winning strategy: every strategy-reachable
/// node except n_fin, executed in topological order.
pub fn strategy_run(neg: &Negotiation, choice: &[Option<ResultId>]) -> Run {
    let topo = neg.topo().expect("acyclic");
    let mut in_s = vec![false; neg.node_count()];
    in_s[neg.init().index()] = true;
    let mut steps = Vec::new();
    for &n in topo.order() {
        if !in_s[n.index()] || n == neg.fin() {
            continue;
        }
        let a = choice[n.index()].expect("strategy defined on reachable nodes");
        let ai = neg.result_slot(n, a).unwrap();
        for t in neg.branch(n, ai).iter().flatten() {
            in_s[t.index()] = true;
        }
        steps.push(Step::new(n, a));
    }
    Run::initial(neg, steps)
}

/// Solver bound to one negotiation. Checks the preconditions once and
/// caches σ_max per omit set.
pub struct OmitSolver<'a> {
    neg: &'a Negotiation,
    k: usize,
    cache: Mutex<HashMap<(Vec<NodeId>, Vec<Step>), Arc<StrategyMax>>>,
}

impl<'a> OmitSolver<'a> {
    pub fn new(neg: &'a Negotiation) -> Result<Self, GameError> {
        check_class(neg)?;
        if !det_soundness(neg).map_err(|_| GameError::NotDeterministic)?.is_sound() {
            return Err(GameError::NotSound);
        }
        Ok(Self::assume_sound(neg))
    }

    /// Skip the soundness check; the caller vouches for it.
    pub fn assume_sound(neg: &'a Negotiation) -> Self {
        OmitSolver { neg, k: DEFAULT_K, cache: Mutex::new(HashMap::new()) }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn strategy(&self, omit: &[NodeId], omit_pairs: &[Step]) -> Result<Arc<StrategyMax>, GameError> {
        let mut key_b = omit.to_vec();
        key_b.sort();
        key_b.dedup();
        let mut key_p = omit_pairs.to_vec();
        key_p.sort();
        key_p.dedup();
        let key = (key_b, key_p);
        if let Some(s) = self.cache.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let arena = build_arena(self.neg, &key.0, &key.1)?;
        let s = Arc::new(eve_winning(&arena));
        self.cache.lock().unwrap().insert(key, s.clone());
        Ok(s)
    }

    pub fn solve(&self, inst: &OmitInstance) -> Result<Option<OmitPlan>, GameError> {
        let neg = self.neg;
        let mut include: Vec<Step> = Vec::new();
        for &s in &inst.include {
            if s.node == neg.fin() && s.result == ResultId::END && neg.out(neg.fin()).is_empty() {
                continue;
            }
            if s.node.index() >= neg.node_count() || neg.result_slot(s.node, s.result).is_none() {
                return Err(GameError::InvalidPair(format!("{:?}", s)));
            }
            if !include.contains(&s) {
                include.push(s);
            }
        }
        if include.len() > self.k {
            return Err(GameError::TooManyPairs(include.len(), self.k));
        }
        if inst.omit.contains(&neg.fin()) {
            return Err(GameError::FinInOmitSet);
        }
        if inst.omit.contains(&neg.init()) {
            return Ok(None);
        }
        // a node runs at most once; n_fin never runs in a successful acyclic run
        let mut targets: Vec<(NodeId, ResultId)> = Vec::new();
        for s in &include {
            if s.node == neg.fin() || targets.iter().any(|t| t.0 == s.node) {
                return Ok(None);
            }
            targets.push((s.node, s.result));
        }
        let smax = self.strategy(&inst.omit, &inst.omit_pairs)?;
        if !smax.eve_wins(neg) {
            return Ok(None);
        }
        if targets.iter().any(|&(n, a)| !smax.sigma[n.index()].contains(&a)) {
            return Ok(None);
        }
        let Some(recorded) = search_h(neg, &smax, &targets) else {
            return Ok(None);
        };
        let mut choice: Vec<Option<ResultId>> = smax.sigma.iter().map(|s| s.first().copied()).collect();
        let mut branching = Vec::new();
        for (n, a, splits) in &recorded {
            choice[n.index()] = Some(*a);
            if *splits {
                branching.push(*n);
            }
        }
        let run = strategy_run(neg, &choice);
        debug_assert!(run.is_successful(neg), "strategy run must replay in a sound negotiation");
        let choices = run.steps.clone();
        Ok(Some(OmitPlan { choices, branching, run }))
    }
}

/// Search for a strategy subgraph reaching every target with its forced
/// result. Pebbles (node, target mask) move forward; the pebble earliest in
/// the topological order moves first, so each node is decided once, and
/// pebbles meeting at a node merge. Returns the decisions (node, result,
/// whether the pebble split).
fn search_h(
    neg: &Negotiation,
    smax: &StrategyMax,
    targets: &[(NodeId, ResultId)],
) -> Option<Vec<(NodeId, ResultId, bool)>> {
    let topo = neg.topo().expect("acyclic");
    let k = targets.len();
    let full: u32 = (1u32 << k) - 1;
    // can[i][n]: target i reachable from n in G(σ_max)
    let can: Vec<Vec<bool>> = targets
        .iter()
        .map(|&(t, _)| {
            let mut seen = vec![false; neg.node_count()];
            seen[t.index()] = true;
            for &n in topo.order().iter().rev() {
                if seen[n.index()] || !smax.wins(n) {
                    continue;
                }
                seen[n.index()] = smax.sigma[n.index()].iter().any(|&a| {
                    let ai = neg.result_slot(n, a).unwrap();
                    neg.branch(n, ai).iter().flatten().any(|x| seen[x.index()])
                });
            }
            seen
        })
        .collect();
    if (0..k).any(|i| !can[i][neg.init().index()]) {
        return None;
    }
    let target_at = |n: NodeId| targets.iter().position(|&(t, _)| t == n);

    type State = Vec<(u32, u32)>; // (rank, mask), sorted by rank
    let start: State = if k == 0 { vec![] } else { vec![(topo.rank(neg.init()), full)] };
    let mut parent: HashMap<State, (State, NodeId, ResultId, bool)> = HashMap::new();
    let mut seen: HashSet<State> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(state) = queue.pop_front() {
        if state.is_empty() {
            let mut out = Vec::new();
            let mut cur = state;
            while let Some((prev, n, a, split)) = parent.get(&cur) {
                out.push((*n, *a, *split));
                cur = prev.clone();
            }
            out.reverse();
            return Some(out);
        }
        let (rank, mut mask) = state[0];
        let rest = &state[1..];
        let u = topo.order()[rank as usize];
        let forced = target_at(u).filter(|&i| mask & (1 << i) != 0);
        let results: Vec<ResultId> = match forced {
            Some(i) => {
                mask &= !(1 << i);
                vec![targets[i].1]
            }
            None => smax.sigma[u.index()].clone(),
        };
        for a in results {
            let ai = neg.result_slot(u, a).unwrap();
            let children: Vec<NodeId> =
                neg.branch(u, ai).iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
            // assign every remaining target to a child that can reach it
            let pending: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
            let options: Vec<Vec<usize>> = pending
                .iter()
                .map(|&i| (0..children.len()).filter(|&c| can[i][children[c].index()]).collect())
                .collect();
            if options.iter().any(|o| o.is_empty()) {
                continue;
            }
            let mut pick = vec![0usize; pending.len()];
            loop {
                let mut masks = vec![0u32; children.len()];
                for (j, &i) in pending.iter().enumerate() {
                    masks[options[j][pick[j]]] |= 1 << i;
                }
                let mut next: Vec<(u32, u32)> = rest.to_vec();
                let mut used = 0;
                for (c, &m) in masks.iter().enumerate() {
                    if m == 0 {
                        continue;
                    }
                    used += 1;
                    let r = topo.rank(children[c]);
                    match next.iter_mut().find(|(x, _)| *x == r) {
                        Some(e) => e.1 |= m,
                        None => next.push((r, m)),
                    }
                }
                next.sort();
                if seen.insert(next.clone()) {
                    parent.insert(next.clone(), (state.clone(), u, a, used > 1));
                    queue.push_back(next);
                }
                // odometer over assignments
                let mut j = 0;
                while j < pick.len() {
                    pick[j] += 1;
                    if pick[j] < options[j].len() {
                        break;
                    }
                    pick[j] = 0;
                    j += 1;
                }
                if j == pick.len() {
                    break;
                }
            }
        }
    }
    None
}

/// Convenience wrapper: check preconditions and solve one instance.
pub fn solve_omitting(neg: &Negotiation, inst: &OmitInstance) -> Result<Option<OmitPlan>, GameError> {
    OmitSolver::new(neg)?.solve(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::restrict;
    use crate::semantics::parse_steps;

    fn fig1r_d() -> Negotiation {
        let r = fixtures::fig1r();
        restrict(&r, &[r.proc_id("p0").unwrap()]).unwrap()
    }

    #[test]
    fn arena_positions() {
        let d = fig1r_d();
        let arena = build_arena(&d, &[], &[]).unwrap();
        assert_eq!(arena.eve_positions().len(), 4);
        // n0:a, n1:a, n1:b, n2:a
        assert_eq!(arena.adam_positions().len(), 4);
        let n2 = d.node_id("n2").unwrap();
        let arena = build_arena(&d, &[n2], &[]).unwrap();
        assert!(!arena.eve_positions().contains(&n2));
        assert_eq!(build_arena(&d, &[d.fin()], &[]).unwrap_err(), GameError::FinInOmitSet);
    }

    #[test]
    fn sigma_max_examples() {
        let d = fig1r_d();
        let n1 = d.node_id("n1").unwrap();
        let (a, b) = (d.result_id("a").unwrap(), d.result_id("b").unwrap());
        let s = eve_winning(&build_arena(&d, &[], &[]).unwrap());
        assert!(s.eve_wins(&d));
        assert_eq!(s.sigma[n1.index()], vec![a, b]);
        let n2 = d.node_id("n2").unwrap();
        let s = eve_winning(&build_arena(&d, &[n2], &[]).unwrap());
        assert_eq!(s.sigma[n1.index()], vec![a]);
        let s = eve_winning(&build_arena(&d, &[d.node_id("n1").unwrap()], &[]).unwrap());
        assert!(!s.eve_wins(&d));
    }

    #[test]
    fn solve_examples() {
        let rm = fixtures::fig1r_mod();
        let d = restrict(&rm, &[rm.proc_id("p0").unwrap()]).unwrap();
        let p = parse_steps(&d, "(n0,a)(n2,a)").unwrap();
        let plan = solve_omitting(&d, &OmitInstance::new(p, vec![])).unwrap().unwrap();
        assert_eq!(plan.run.render(&d), "(n0,a)(n1,b)(n2,a)");
        let two = parse_steps(&d, "(n1,a)(n1,b)").unwrap();
        assert!(solve_omitting(&d, &OmitInstance::new(two, vec![])).unwrap().is_none());
        let plan = solve_omitting(&d, &OmitInstance::default()).unwrap().unwrap();
        assert!(plan.run.is_successful(&d));
        assert!(solve_omitting(&d, &OmitInstance::new(vec![], vec![d.init()])).unwrap().is_none());
    }

    #[test]
    fn preconditions() {
        assert_eq!(solve_omitting(&fixtures::fig1l(), &OmitInstance::default()).unwrap_err(), GameError::NotAcyclic);
        assert_eq!(solve_omitting(&fixtures::fig1r(), &OmitInstance::default()).unwrap_err(), GameError::NotDeterministic);
        assert_eq!(solve_omitting(&fixtures::anti_f(), &OmitInstance::default()).unwrap_err(), GameError::NotSound);
        let d = fig1r_d();
        let many = parse_steps(&d, "(n0,a)(n1,a)(n2,a)").unwrap();
        let solver = OmitSolver::new(&d).unwrap().with_k(2);
        assert_eq!(solver.solve(&OmitInstance::new(many, vec![])).unwrap_err(), GameError::TooManyPairs(3, 2));
    }

    #[test]
    fn branching_plan_on_parallel_split() {
        let d = fixtures::data1_acyc().base;
        // (n1,a) on p0's side and (n2,a) on p1's side: one split at n0
        let p = parse_steps(&d, "(n3,b)(n2,a)(n4,b)").unwrap();
        let plan = solve_omitting(&d, &OmitInstance::new(p.clone(), vec![])).unwrap().unwrap();
        assert!(p.iter().all(|s| plan.run.contains(*s)));
        assert!(plan.run.is_successful(&d));
        assert_eq!(plan.branching, vec![d.init()]);
    }
}
