//! Configurations, steps and runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Negotiation, NodeId, ProcId, ResultId, Step};

/// Ready sets, one sorted set per process.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub ready: Vec<Vec<NodeId>>,
}

impl Configuration {
    pub fn initial(neg: &Negotiation) -> Self {
        Configuration { ready: vec![vec![neg.init()]; neg.proc_count()] }
    }

    pub fn fin(neg: &Negotiation) -> Self {
        Configuration { ready: vec![vec![neg.fin()]; neg.proc_count()] }
    }

    pub fn get(&self, p: ProcId) -> &[NodeId] {
        &self.ready[p.index()]
    }

    /// True when every process of `dom(n)` is ready for `n`.
    pub fn enables(&self, neg: &Negotiation, n: NodeId) -> bool {
        neg.dom(n).iter().all(|p| self.ready[p.index()].binary_search(&n).is_ok())
    }

    /// The final node is enabled; runs may stop here.
    pub fn is_terminal(&self, neg: &Negotiation) -> bool {
        self.enables(neg, neg.fin())
    }

    pub fn is_deadlock(&self, neg: &Negotiation) -> bool {
        !self.is_terminal(neg) && enabled(neg, self).is_empty()
    }

    pub fn render(&self, neg: &Negotiation) -> String {
        let parts: Vec<String> = self
            .ready
            .iter()
            .enumerate()
            .map(|(p, set)| {
                let names: Vec<&str> = set.iter().map(|&n| neg.node_name(n)).collect();
                format!("{}↦{{{}}}", neg.proc_name(ProcId(p as u32)), names.join(","))
            })
            .collect();
        format!("({})", parts.join(", "))
    }
}

/// Nodes enabled in `c`, in node order.
pub fn enabled(neg: &Negotiation, c: &Configuration) -> Vec<NodeId> {
    let mut cand: Vec<NodeId> = c.ready.iter().flatten().copied().collect();
    cand.sort();
    cand.dedup();
    cand.retain(|&n| c.enables(neg, n));
    cand
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("node {0} is not enabled")]
    NotEnabled(String),
    #[error("unknown result {result} for node {node}")]
    UnknownResult { node: String, result: String },
}

/// Execute (n, a) in `c`.
pub fn step(neg: &Negotiation, c: &Configuration, n: NodeId, a: ResultId) -> Result<Configuration, StepError> {
    if n.index() >= neg.node_count() || !c.enables(neg, n) {
        let name = if n.index() < neg.node_count() { neg.node_name(n).to_string() } else { format!("#{}", n.0) };
        return Err(StepError::NotEnabled(name));
    }
    let Some(ai) = neg.result_slot(n, a) else {
        let result = if a == ResultId::END || a.index() < neg.result_count() {
            neg.result_name(a).to_string()
        } else {
            format!("#{}", a.0)
        };
        return Err(StepError::UnknownResult { node: neg.node_name(n).to_string(), result });
    };
    let mut next = c.clone();
    for (pi, &p) in neg.dom(n).iter().enumerate() {
        next.ready[p.index()] = neg.delta_at(n, ai, pi).to_vec();
    }
    Ok(next)
}

/// A sequence of steps from an origin configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub origin: Configuration,
    pub steps: Vec<Step>,
}

impl Run {
    pub fn new(origin: Configuration, steps: Vec<Step>) -> Self {
        Run { origin, steps }
    }

    pub fn initial(neg: &Negotiation, steps: Vec<Step>) -> Self {
        Run { origin: Configuration::initial(neg), steps }
    }

    /// All configurations visited, origin first.
    pub fn replay(&self, neg: &Negotiation) -> Result<Vec<Configuration>, (usize, StepError)> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(self.origin.clone());
        for (i, s) in self.steps.iter().enumerate() {
            let next = step(neg, out.last().unwrap(), s.node, s.result).map_err(|e| (i, e))?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn last_config(&self, neg: &Negotiation) -> Result<Configuration, (usize, StepError)> {
        self.replay(neg).map(|mut v| v.pop().unwrap())
    }

    /// Starts in C_init and ends in a terminal configuration.
    pub fn is_successful(&self, neg: &Negotiation) -> bool {
        self.origin == Configuration::initial(neg)
            && self.last_config(neg).map(|c| c.is_terminal(neg)).unwrap_or(false)
    }

    pub fn contains(&self, s: Step) -> bool {
        self.steps.contains(&s)
    }

    pub fn visits(&self, n: NodeId) -> bool {
        self.steps.iter().any(|s| s.node == n)
    }

    pub fn render(&self, neg: &Negotiation) -> String {
        render_steps(neg, &self.steps)
    }
}

pub fn render_steps(neg: &Negotiation, steps: &[Step]) -> String {
    if steps.is_empty() {
        return "ε".to_string();
    }
    steps
        .iter()
        .map(|s| format!("({},{})", neg.node_name(s.node), neg.result_name(s.result)))
        .collect()
}

/// Parse "(n0,a)(n1,b)" style step lists; whitespace is ignored.
pub fn parse_steps(neg: &Negotiation, text: &str) -> Option<Vec<Step>> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() || compact == "ε" {
        return Some(Vec::new());
    }
    let mut steps = Vec::new();
    for chunk in compact.split(')') {
        if chunk.is_empty() {
            continue;
        }
        let inner = chunk.strip_prefix('(')?;
        let (n, a) = inner.split_once(',')?;
        let n = neg.node_id(n)?;
        steps.push(Step::new(n, neg.result_of(n, a)?));
    }
    Some(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ids(neg: &Negotiation, names: &[&str]) -> Vec<NodeId> {
        names.iter().map(|s| neg.node_id(s).unwrap()).collect()
    }

    #[test]
    fn initial_enables_init() {
        let l = fixtures::fig1l();
        assert_eq!(enabled(&l, &Configuration::initial(&l)), ids(&l, &["n0"]));
        assert_eq!(enabled(&l, &Configuration::fin(&l)), ids(&l, &["n5"]));
        assert!(Configuration::fin(&l).is_terminal(&l));
    }

    #[test]
    fn fig1r_first_step() {
        let r = fixtures::fig1r();
        let c = step(&r, &Configuration::initial(&r), r.node_id("n0").unwrap(), r.result_id("a").unwrap()).unwrap();
        assert_eq!(c.render(&r), "(p0↦{n1}, p1↦{n2,n3})");
        assert_eq!(enabled(&r, &c), ids(&r, &["n1"]));
    }

    #[test]
    fn fig1l_first_step_and_not_enabled() {
        let l = fixtures::fig1l();
        let a = l.result_id("a").unwrap();
        let c0 = Configuration::initial(&l);
        let c = step(&l, &c0, l.node_id("n0").unwrap(), a).unwrap();
        assert_eq!(c.render(&l), "(p0↦{n1}, p1↦{n2})");
        assert_eq!(
            step(&l, &c0, l.node_id("n4").unwrap(), a),
            Err(StepError::NotEnabled("n4".into()))
        );
        let b = l.result_id("b").unwrap();
        assert!(matches!(step(&l, &c0, l.node_id("n0").unwrap(), b), Err(StepError::UnknownResult { .. })));
    }

    #[test]
    fn final_without_results_cannot_step() {
        let l = fixtures::fig1l();
        let f = Configuration::fin(&l);
        assert!(step(&l, &f, l.fin(), ResultId::END).is_err());
        assert!(!f.is_deadlock(&l));
    }

    #[test]
    fn frame_property() {
        let l = fixtures::fig1l();
        let a = l.result_id("a").unwrap();
        let c = step(&l, &Configuration::initial(&l), l.node_id("n0").unwrap(), a).unwrap();
        let c2 = step(&l, &c, l.node_id("n1").unwrap(), a).unwrap();
        assert_eq!(c2.get(ProcId(1)), c.get(ProcId(1)));
    }

    #[test]
    fn parse_and_render_steps() {
        let l = fixtures::fig1l();
        let s = parse_steps(&l, "(n0,a)(n1,a) (n3,b)").unwrap();
        assert_eq!(render_steps(&l, &s), "(n0,a)(n1,a)(n3,b)");
        assert!(parse_steps(&l, "(n0,zz)").is_none());
        let run = Run::initial(&l, s);
        assert!(run.replay(&l).is_ok());
    }
}
