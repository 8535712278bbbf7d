//! Negotiations with data, (O1, O2, O) specifications and their analysis.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{GameError, OmitSolver};
use crate::graph::local_reach_mask;
use crate::model::{Negotiation, NodeId, ResultId, Step};
use crate::oracle::{oracle_concurrent, oracle_spec, OmitInstance, OracleError, SpecViolation};
use crate::patterns::{det_soundness, Fork};
use crate::races::{race, RaceError, RaceVerdict};
use crate::semantics::{Configuration, Run};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Op {
    Alloc,
    Read,
    Write,
    Dealloc,
}

impl Op {
    pub fn parse(s: &str) -> Option<Op> {
        match s {
            "alloc" => Some(Op::Alloc),
            "read" => Some(Op::Read),
            "write" => Some(Op::Write),
            "dealloc" => Some(Op::Dealloc),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Alloc => "alloc",
            Op::Read => "read",
            Op::Write => "write",
            Op::Dealloc => "dealloc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("unknown operation '{0}'")]
    UnknownOp(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("'{1}' is not a result of node '{0}'")]
    UnknownResult(String, String),
    #[error("more than one operation on {2} at ({0},{1})")]
    DuplicateVarOp(String, String, String),
}

/// A negotiation whose results carry operations on variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataNegotiation {
    pub base: Negotiation,
    variables: Vec<String>,
    labels: BTreeMap<Step, Vec<(Op, VarId)>>,
}

pub struct DataBuilder {
    data: DataNegotiation,
}

impl DataBuilder {
    pub fn add(&mut self, node: &str, result: &str, op: Op, var: &str) -> Result<(), LabelError> {
        let neg = &self.data.base;
        let n = neg.node_id(node).ok_or_else(|| LabelError::UnknownNode(node.into()))?;
        let r = neg.result_of(n, result).ok_or_else(|| LabelError::UnknownResult(node.into(), result.into()))?;
        let x = match self.data.var_id(var) {
            Some(x) => x,
            None => {
                self.data.variables.push(var.into());
                VarId(self.data.variables.len() as u32 - 1)
            }
        };
        let ops = self.data.labels.entry(Step::new(n, r)).or_default();
        if ops.iter().any(|&(_, y)| y == x) {
            return Err(LabelError::DuplicateVarOp(node.into(), result.into(), var.into()));
        }
        ops.push((op, x));
        Ok(())
    }

    pub fn build(self) -> DataNegotiation {
        self.data
    }
}

impl DataNegotiation {
    pub fn builder(base: Negotiation) -> DataBuilder {
        DataBuilder { data: DataNegotiation { base, variables: Vec::new(), labels: BTreeMap::new() } }
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn var_name(&self, x: VarId) -> &str {
        &self.variables[x.index()]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v == name).map(|i| VarId(i as u32))
    }

    pub fn labels(&self) -> impl Iterator<Item = (Step, &Vec<(Op, VarId)>)> + '_ {
        self.labels.iter().map(|(s, o)| (*s, o))
    }

    pub fn label(&self, n: NodeId, r: ResultId) -> &[(Op, VarId)] {
        self.labels.get(&Step::new(n, r)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Labelled pairs carrying one of `ops` on x.
    pub fn pairs_with(&self, x: VarId, ops: &[Op]) -> Vec<Step> {
        self.labels
            .iter()
            .filter(|(_, l)| l.iter().any(|&(op, y)| y == x && ops.contains(&op)))
            .map(|(s, _)| *s)
            .collect()
    }

    /// Results of n_fin, or the synthetic `end` when it has none.
    pub fn fin_pairs(&self) -> Vec<Step> {
        let neg = &self.base;
        let out = neg.out(neg.fin());
        if out.is_empty() {
            vec![Step::new(neg.fin(), ResultId::END)]
        } else {
            out.iter().map(|&a| Step::new(neg.fin(), a)).collect()
        }
    }
}

/// Violated by a successful run with an O1 step followed by an O2 step and
/// no O step strictly between.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSpec {
    pub name: String,
    pub o1: Vec<Step>,
    pub o2: Vec<Step>,
    pub o: Vec<Step>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecKind {
    Inconsistent,
    WeaklyRedundant,
    NeverDestroyed,
}

impl SpecKind {
    pub fn parse(s: &str) -> Option<SpecKind> {
        match s {
            "inconsistent" => Some(SpecKind::Inconsistent),
            "weakly-redundant" => Some(SpecKind::WeaklyRedundant),
            "never-destroyed" => Some(SpecKind::NeverDestroyed),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpecKind::Inconsistent => "inconsistent",
            SpecKind::WeaklyRedundant => "weakly-redundant",
            SpecKind::NeverDestroyed => "never-destroyed",
        }
    }
}

impl fmt::Display for SpecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn dedup(mut v: Vec<Step>) -> Vec<Step> {
    v.sort();
    v.dedup();
    v
}

impl DataSpec {
    /// x written, then deallocated or the run ends, with no read between.
    pub fn weakly_redundant(d: &DataNegotiation, x: VarId) -> DataSpec {
        let mut o2 = d.pairs_with(x, &[Op::Dealloc]);
        o2.extend(d.fin_pairs());
        DataSpec {
            name: format!("weakly-redundant({})", d.var_name(x)),
            o1: d.pairs_with(x, &[Op::Write]),
            o2: dedup(o2),
            o: d.pairs_with(x, &[Op::Read]),
        }
    }

    /// x allocated and the run ends with no dealloc (or realloc) between.
    pub fn never_destroyed(d: &DataNegotiation, x: VarId) -> DataSpec {
        let mut o = d.pairs_with(x, &[Op::Alloc, Op::Dealloc]);
        o.extend(d.fin_pairs());
        DataSpec {
            name: format!("never-destroyed({})", d.var_name(x)),
            o1: d.pairs_with(x, &[Op::Alloc]),
            o2: d.fin_pairs(),
            o: dedup(o),
        }
    }

    /// Three lines `O1:`, `O2:`, `O:` of `node:result` tokens; `#` comments
    /// and an optional `name:` line.
    pub fn parse(neg: &Negotiation, text: &str) -> Result<DataSpec, DataError> {
        let mut spec = DataSpec { name: "custom".into(), ..Default::default() };
        let mut seen = [false; 3];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| DataError::SpecSyntax { line: i + 1, message };
            let (head, rest) = line.split_once(':').ok_or_else(|| err("expected '<set>:'".into()))?;
            let slot = match head.trim() {
                "name" => {
                    spec.name = rest.trim().to_string();
                    continue;
                }
                "O1" => 0,
                "O2" => 1,
                "O" => 2,
                other => return Err(err(format!("unknown set '{other}'"))),
            };
            if std::mem::replace(&mut seen[slot], true) {
                return Err(err(format!("duplicate line for {}", head.trim())));
            }
            let mut pairs = Vec::new();
            for tok in rest.split_whitespace() {
                let (n, r) = tok.split_once(':').ok_or_else(|| err(format!("expected node:result, got '{tok}'")))?;
                let node = neg.node_id(n).ok_or_else(|| err(format!("unknown node '{n}'")))?;
                let res = neg.result_of(node, r).ok_or_else(|| err(format!("'{r}' is not a result of '{n}'")))?;
                pairs.push(Step::new(node, res));
            }
            let pairs = dedup(pairs);
            match slot {
                0 => spec.o1 = pairs,
                1 => spec.o2 = pairs,
                _ => spec.o = pairs,
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(DataError::SpecSyntax { line: 0, message: format!("missing line {}", ["O1", "O2", "O"][k]) });
        }
        Ok(spec)
    }

    pub fn render(&self, neg: &Negotiation) -> String {
        let set = |v: &[Step]| {
            v.iter()
                .map(|s| format!("{}:{}", neg.node_name(s.node), neg.result_name(s.result)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!("name: {}\nO1: {}\nO2: {}\nO: {}\n", self.name, set(&self.o1), set(&self.o2), set(&self.o))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("spec line {line}: {message}")]
    SpecSyntax { line: usize, message: String },
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl From<GameError> for DataError {
    fn from(e: GameError) -> Self {
        DataError::Precondition(e.to_string())
    }
}

impl From<RaceError> for DataError {
    fn from(e: RaceError) -> Self {
        match e {
            RaceError::Oracle(o) => DataError::Oracle(o),
            other => DataError::Precondition(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Compliance {
    Complies,
    Violates(SpecViolation),
}

impl Compliance {
    pub fn complies(&self) -> bool {
        matches!(self, Compliance::Complies)
    }
}

/// Nodes reachable by a non-empty local path starting with an edge of (m,a).
fn after(neg: &Negotiation, s: Step) -> Vec<bool> {
    if s.result == ResultId::END {
        return vec![false; neg.node_count()];
    }
    let ai = neg.result_slot(s.node, s.result).unwrap();
    let targets: Vec<NodeId> = neg.branch(s.node, ai).iter().flatten().copied().collect();
    local_reach_mask(neg, &targets)
}

/// Reorder `run` so the occurrence of `first` is followed by `second` with
/// only steps causally between them in the middle. Returns the marked
/// violation if the rearranged run satisfies the definition.
fn mark(neg: &Negotiation, spec: &DataSpec, run: &Run, first: Step, second: Step) -> Option<SpecViolation> {
    let steps = &run.steps;
    let k = steps.len();
    let i = steps.iter().position(|&s| s == first)?;
    let j = if second.result == ResultId::END { k } else { steps.iter().position(|&s| s == second)? };
    let dep = |x: usize, y: usize| neg.dom(steps[x].node).iter().any(|p| neg.in_dom(steps[y].node, *p));
    // causal future of i, causal past and future of j
    let mut fut_i = vec![false; k];
    let mut past_j = vec![j == k; k];
    let mut fut_j = vec![false; k];
    fut_i[i] = true;
    for y in i + 1..k {
        fut_i[y] = (i..y).any(|x| fut_i[x] && dep(x, y));
    }
    if j < k {
        past_j[j] = true;
        for x in (0..j).rev() {
            past_j[x] = (x + 1..=j).any(|y| past_j[y] && dep(x, y));
        }
        fut_j[j] = true;
        for y in j + 1..k {
            fut_j[y] = (j..y).any(|x| fut_j[x] && dep(x, y));
        }
        if fut_j[i] {
            return None;
        }
    }
    let mut order: Vec<usize> = (0..k).filter(|&x| !fut_i[x] && !fut_j[x]).collect();
    let mid: Vec<usize> = (0..k).filter(|&x| fut_i[x] && past_j[x]).collect();
    let (new_i, new_j);
    if j == k || fut_i[j] {
        new_i = order.len();
        order.extend(&mid);
        new_j = if j == k { k } else { order.len() - 1 };
    } else {
        new_i = order.len();
        order.push(i);
        new_j = order.len();
        order.push(j);
    }
    let placed: std::collections::HashSet<usize> = order.iter().copied().collect();
    order.extend((0..k).filter(|x| !placed.contains(x)));
    let run = Run::initial(neg, order.iter().map(|&x| steps[x]).collect());
    let v = SpecViolation { run, i: new_i, j: new_j, first, second };
    v.verify(neg, spec).then_some(v)
}

/// Fast path for acyclic, deterministic, sound negotiations: one pair-level
/// omitting query per (O1, O2) pair.
pub fn spec_compliance(neg: &Negotiation, spec: &DataSpec) -> Result<Compliance, DataError> {
    if !neg.is_acyclic() || !neg.is_deterministic() {
        return Err(DataError::Precondition("spec_compliance needs an acyclic deterministic negotiation".into()));
    }
    let solver = OmitSolver::new(neg)?;
    let end = Step::new(neg.fin(), ResultId::END);
    let virtual_end = neg.out(neg.fin()).is_empty();
    for &first in &spec.o1 {
        if first.result == ResultId::END {
            continue;
        }
        let from_first = after(neg, first);
        for &second in &spec.o2 {
            if second == end && !virtual_end {
                continue;
            }
            // a node fires at most once per run
            if second.node == first.node && second != end {
                continue;
            }
            if second != end && after(neg, second)[first.node.index()] {
                continue;
            }
            let omit_pairs: Vec<Step> = spec
                .o
                .iter()
                .copied()
                .filter(|&s| {
                    s.result != ResultId::END
                        && from_first[s.node.index()]
                        && (second == end || after(neg, s)[second.node.index()])
                })
                .collect();
            let inst = OmitInstance { include: vec![first, second], omit: vec![], omit_pairs };
            if let Some(plan) = solver.solve(&inst)? {
                let v = mark(neg, spec, &plan.run, first, second).expect("plan run rearranges into a violation");
                return Ok(Compliance::Violates(v));
            }
        }
    }
    Ok(Compliance::Complies)
}

/// Oracle path: the first violated (O1, O2) pair in set order.
pub fn oracle_compliance(neg: &Negotiation, spec: &DataSpec, budget: usize) -> Result<Compliance, DataError> {
    for &first in &spec.o1 {
        for &second in &spec.o2 {
            let single = DataSpec { name: spec.name.clone(), o1: vec![first], o2: vec![second], o: spec.o.clone() };
            if let Some(v) = oracle_spec(neg, &single, budget)? {
                return Ok(Compliance::Violates(v));
            }
        }
    }
    Ok(Compliance::Complies)
}

/// Which algorithm answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataMethod {
    Fast,
    Oracle,
}

impl DataMethod {
    pub fn name(self) -> &'static str {
        match self {
            DataMethod::Fast => "fast",
            DataMethod::Oracle => "oracle",
        }
    }
}

fn fast_path_applies(neg: &Negotiation) -> bool {
    neg.is_acyclic() && neg.is_deterministic() && det_soundness(neg).map(|v| v.is_sound()).unwrap_or(false)
}

/// Compliance check routed to the fast path when it applies.
pub fn check_spec(neg: &Negotiation, spec: &DataSpec, budget: usize) -> Result<(DataMethod, Compliance), DataError> {
    if fast_path_applies(neg) {
        Ok((DataMethod::Fast, spec_compliance(neg, spec)?))
    } else {
        Ok((DataMethod::Oracle, oracle_compliance(neg, spec, budget)?))
    }
}

/// Evidence that two labelled results can happen in parallel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Concurrency {
    Fork(Fork),
    Configuration(Configuration),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Finding {
    Parallel { first: Step, second: Step, evidence: Concurrency },
    Violation(SpecViolation),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataReport {
    pub kind: SpecKind,
    pub variable: String,
    pub method: DataMethod,
    pub finding: Option<Finding>,
}

impl DataReport {
    pub fn render(&self, neg: &Negotiation) -> String {
        let s = |st: &Step| format!("({},{})", neg.node_name(st.node), neg.result_name(st.result));
        let head = format!("{}({}) [{}]", self.kind, self.variable, self.method.name());
        match &self.finding {
            None => format!("{head}: no"),
            Some(Finding::Parallel { first, second, evidence }) => {
                let ev = match evidence {
                    Concurrency::Fork(f) => f.render(neg),
                    Concurrency::Configuration(c) => c.render(neg),
                };
                format!("{head}: yes, {} ∥ {} via {ev}", s(first), s(second))
            }
            Some(Finding::Violation(v)) => format!(
                "{head}: yes, at {} then {} in run {}",
                s(&v.first),
                s(&v.second),
                v.run.render(neg)
            ),
        }
    }
}

/// Run one of the built-in analyses for variable `var`.
pub fn builtin_spec(d: &DataNegotiation, kind: SpecKind, var: &str, budget: usize) -> Result<DataReport, DataError> {
    let x = d.var_id(var).ok_or_else(|| DataError::UnknownVariable(var.into()))?;
    let neg = &d.base;
    let (method, finding) = match kind {
        SpecKind::Inconsistent => inconsistent(d, x, budget)?,
        SpecKind::WeaklyRedundant | SpecKind::NeverDestroyed => {
            let spec = if kind == SpecKind::WeaklyRedundant {
                DataSpec::weakly_redundant(d, x)
            } else {
                DataSpec::never_destroyed(d, x)
            };
            let (m, c) = check_spec(neg, &spec, budget)?;
            let f = match c {
                Compliance::Complies => None,
                Compliance::Violates(v) => Some(Finding::Violation(v)),
            };
            (m, f)
        }
    };
    Ok(DataReport { kind, variable: var.into(), method, finding })
}

fn inconsistent(d: &DataNegotiation, x: VarId, budget: usize) -> Result<(DataMethod, Option<Finding>), DataError> {
    let neg = &d.base;
    let readers = d.pairs_with(x, &[Op::Read, Op::Write]);
    let writers = d.pairs_with(x, &[Op::Write, Op::Alloc, Op::Dealloc]);
    let fast = fast_path_applies(neg);
    let method = if fast { DataMethod::Fast } else { DataMethod::Oracle };
    for &first in &readers {
        for &second in &writers {
            if first.result == ResultId::END || second.result == ResultId::END {
                continue;
            }
            let (m, n) = (first.node, second.node);
            if neg.dom(m).iter().any(|p| neg.in_dom(n, *p)) {
                continue;
            }
            let evidence = if fast {
                match race(neg, m, n)? {
                    RaceVerdict::Race(f) => Some(Concurrency::Fork(f)),
                    RaceVerdict::NoRace(_) => None,
                }
            } else {
                oracle_concurrent(neg, m, n, budget)?.map(Concurrency::Configuration)
            };
            if let Some(evidence) = evidence {
                return Ok((method, Some(Finding::Parallel { first, second, evidence })));
            }
        }
    }
    Ok((method, None))
}
