//! Instance constructors: the 3-SAT gadget, the one-process reachability
//! gadget, random negotiations and large structured sound ones.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{classify, validate, Negotiation, RawNegotiation};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("malformed formula: {0}")]
    Formula(String),
    #[error("malformed digraph: {0}")]
    Digraph(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("no sample with the requested flags after {0} attempts")]
    SamplingBudgetExceeded(usize),
}

/// A 3-CNF formula; literal `i` is x_i, `-i` its negation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cnf3 {
    pub variables: usize,
    pub clauses: Vec<[i32; 3]>,
}

impl Cnf3 {
    pub fn new(variables: usize, clauses: Vec<[i32; 3]>) -> Result<Self, GenError> {
        if clauses.is_empty() {
            return Err(GenError::Formula("no clauses".into()));
        }
        for c in &clauses {
            for &l in c {
                if l == 0 || l.unsigned_abs() as usize > variables {
                    return Err(GenError::Formula(format!("literal {l} outside 1..={variables}")));
                }
            }
        }
        Ok(Cnf3 { variables, clauses })
    }

    /// DIMACS input; every clause must have exactly three literals.
    pub fn parse_dimacs(text: &str) -> Result<Self, GenError> {
        let mut header: Option<(usize, usize)> = None;
        let mut lits: Vec<i32> = Vec::new();
        let mut clauses = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 4 || f[1] != "cnf" {
                    return Err(GenError::Formula(format!("bad header '{line}'")));
                }
                let num = |s: &str| s.parse::<usize>().map_err(|_| GenError::Formula(format!("bad number '{s}'")));
                header = Some((num(f[2])?, num(f[3])?));
                continue;
            }
            if header.is_none() {
                return Err(GenError::Formula("clause before header".into()));
            }
            for tok in line.split_whitespace() {
                let l: i32 = tok.parse().map_err(|_| GenError::Formula(format!("bad literal '{tok}'")))?;
                if l == 0 {
                    let c: [i32; 3] = lits
                        .as_slice()
                        .try_into()
                        .map_err(|_| GenError::Formula(format!("clause {} has {} literals", clauses.len() + 1, lits.len())))?;
                    clauses.push(c);
                    lits.clear();
                } else {
                    lits.push(l);
                }
            }
        }
        if !lits.is_empty() {
            return Err(GenError::Formula("unterminated clause".into()));
        }
        let (vars, count) = header.ok_or_else(|| GenError::Formula("missing header".into()))?;
        if count != clauses.len() {
            return Err(GenError::Formula(format!("header announces {count} clauses, found {}", clauses.len())));
        }
        Cnf3::new(vars, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.variables, self.clauses.len());
        for c in &self.clauses {
            s.push_str(&format!("{} {} {} 0\n", c[0], c[1], c[2]));
        }
        s
    }

    pub fn eval(&self, assignment: u32) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let v = assignment >> (l.unsigned_abs() - 1) & 1 == 1;
                if l > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    }

    /// Brute force over all assignments.
    pub fn satisfiable(&self) -> bool {
        assert!(self.variables <= 20, "brute force limited to 20 variables");
        (0..1u32 << self.variables).any(|a| self.eval(a))
    }

    /// Canonical representative under variable renaming, sign flips and
    /// reordering of literals and clauses; variables renumbered densely.
    pub fn canonical(&self) -> Cnf3 {
        let k = self.variables;
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best: Option<Vec<[i32; 3]>> = None;
        loop {
            for flips in 0..1u32 << k {
                let mut cs: Vec<[i32; 3]> = self
                    .clauses
                    .iter()
                    .map(|c| {
                        let mut c = c.map(|l| {
                            let v = l.unsigned_abs() as usize - 1;
                            let sign = if flips >> v & 1 == 1 { -l.signum() } else { l.signum() };
                            sign * (perm[v] as i32 + 1)
                        });
                        c.sort();
                        c
                    })
                    .collect();
                cs.sort();
                if best.as_ref().is_none_or(|b| cs < *b) {
                    best = Some(cs);
                }
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        let mut cs = best.unwrap();
        // dense renumbering by first use
        let mut map: HashMap<u32, i32> = HashMap::new();
        for c in &mut cs {
            for l in c.iter_mut() {
                let n = map.len() as i32 + 1;
                let v = *map.entry(l.unsigned_abs()).or_insert(n);
                *l = l.signum() * v;
            }
        }
        Cnf3 { variables: map.len(), clauses: cs }
    }

    /// All formulas over at most `max_vars` variables with 1..=`max_clauses`
    /// clauses, one per symmetry class.
    pub fn enumerate_canonical(max_vars: usize, max_clauses: usize) -> Vec<Cnf3> {
        let lits: Vec<i32> = (1..=max_vars as i32).flat_map(|v| [v, -v]).collect();
        let mut clause_set = Vec::new();
        for i in 0..lits.len() {
            for j in i..lits.len() {
                for l in j..lits.len() {
                    let mut c = [lits[i], lits[j], lits[l]];
                    c.sort();
                    clause_set.push(c);
                }
            }
        }
        let mut out = BTreeSet::new();
        let mut idx = vec![0usize; 0];
        for count in 1..=max_clauses {
            idx.clear();
            idx.resize(count, 0);
            loop {
                let f = Cnf3 { variables: max_vars, clauses: idx.iter().map(|&i| clause_set[i]).collect() };
                out.insert(f.canonical());
                // next non-decreasing index tuple
                let mut p = count;
                while p > 0 && idx[p - 1] == clause_set.len() - 1 {
                    p -= 1;
                }
                if p == 0 {
                    break;
                }
                idx[p - 1] += 1;
                let v = idx[p - 1];
                for x in &mut idx[p..] {
                    *x = v;
                }
            }
        }
        out.into_iter().collect()
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// The 3-SAT gadget: sound iff the formula is unsatisfiable.
pub fn gen_from_cnf(f: &Cnf3) -> Result<Negotiation, GenError> {
    let f = Cnf3::new(f.variables, f.clauses.clone())?;
    let k = f.variables;
    let m = f.clauses.len();
    let cl = |j: usize, d: usize| format!("{j}_{d}");
    let var = |j: usize, d: usize| f.clauses[j - 1][d - 1].unsigned_abs() as usize;
    let pos = |j: usize, d: usize| f.clauses[j - 1][d - 1] > 0;
    let pairs: Vec<(usize, usize)> = (1..=m).flat_map(|j| (1..=3).map(move |d| (j, d))).collect();

    let mut r = RawNegotiation::new("cnf");
    let mut all = vec!["E".to_string()];
    all.extend((1..=m).map(|j| format!("V{j}")));
    for &(j, d) in &pairs {
        all.push(format!("T{}", cl(j, d)));
        all.push(format!("Tp{}", cl(j, d)));
        all.push(format!("P{}", cl(j, d)));
    }
    for p in &all {
        r.process(p.clone());
    }
    r.init_fin("init", "fin");
    r.node("init", all.clone());
    // E chooses x_i at m_{i-1}; P_{j,d} watches the choice of its variable
    let watchers = |i: usize| -> Vec<String> {
        pairs.iter().filter(|&&(j, d)| var(j, d) == i).map(|&(j, d)| format!("P{}", cl(j, d))).collect()
    };
    for i in 0..=k {
        let mut dom = vec!["E".to_string()];
        if i < k {
            dom.extend(watchers(i + 1));
        }
        r.node(format!("m{i}"), dom);
    }
    for i in 1..=k {
        for s in ["np", "nn"] {
            let mut dom = vec!["E".to_string()];
            dom.extend(watchers(i));
            r.node(format!("{s}{i}"), dom);
        }
    }
    for j in 1..=m {
        let prev = if j == 1 { m } else { j - 1 };
        let mut dom = vec![format!("V{prev}")];
        dom.extend((1..=3).map(|d| format!("T{}", cl(j, d))));
        r.node(format!("t{j}"), dom);
        let mut dom = vec![format!("V{j}")];
        dom.extend((1..=3).map(|d| format!("Tp{}", cl(j, d))));
        r.node(format!("tp{j}"), dom);
    }
    for &(j, d) in &pairs {
        let c = cl(j, d);
        r.node(format!("mc{c}"), [format!("T{c}")]);
        r.node(format!("nc{c}"), [format!("Tp{c}"), format!("P{c}")]);
        r.node(format!("rc{c}"), [format!("T{c}"), format!("P{c}")]);
    }
    r.node("fin", all.clone());

    r.out("init", ["a"]);
    r.arc("init", "a", "E", ["m0"]);
    for j in 1..=m {
        r.arc("init", "a", format!("V{j}"), [format!("tp{j}")]);
    }
    for &(j, d) in &pairs {
        let c = cl(j, d);
        r.arc("init", "a", format!("T{c}"), [format!("t{j}")]);
        r.arc("init", "a", format!("Tp{c}"), [format!("nc{c}")]);
        r.arc("init", "a", format!("P{c}"), [format!("m{}", var(j, d) - 1)]);
    }
    for i in 1..=k {
        let mi = format!("m{}", i - 1);
        r.out(mi.clone(), ["1", "0"]);
        for (res, target) in [("1", format!("np{i}")), ("0", format!("nn{i}"))] {
            r.arc(mi.clone(), res, "E", [target.clone()]);
            for p in watchers(i) {
                r.arc(mi.clone(), res, p, [target.clone()]);
            }
        }
        for (s, true_lit) in [("np", true), ("nn", false)] {
            let n = format!("{s}{i}");
            r.out(n.clone(), ["a"]);
            r.arc(n.clone(), "a", "E", [format!("m{i}")]);
            for &(j, d) in pairs.iter().filter(|&&(j, d)| var(j, d) == i) {
                let c = cl(j, d);
                // a true literal must pass r_{j,d} before n_{j,d}
                let t = if pos(j, d) == true_lit { format!("rc{c}") } else { format!("nc{c}") };
                r.arc(n.clone(), "a", format!("P{c}"), [t]);
            }
        }
    }
    r.out(format!("m{k}"), ["a"]);
    r.arc(format!("m{k}"), "a", "E", ["fin"]);
    for j in 1..=m {
        let prev = if j == 1 { m } else { j - 1 };
        let next = if j == m { 1 } else { j + 1 };
        r.out(format!("t{j}"), ["a"]);
        r.arc(format!("t{j}"), "a", format!("V{prev}"), ["fin"]);
        r.out(format!("tp{j}"), ["a"]);
        r.arc(format!("tp{j}"), "a", format!("V{j}"), [format!("t{next}")]);
        for d in 1..=3 {
            let c = cl(j, d);
            r.arc(format!("t{j}"), "a", format!("T{c}"), [format!("mc{c}")]);
            r.arc(format!("tp{j}"), "a", format!("Tp{c}"), ["fin"]);
        }
    }
    for &(j, d) in &pairs {
        let c = cl(j, d);
        r.out(format!("mc{c}"), ["a"]);
        r.arc(format!("mc{c}"), "a", format!("T{c}"), [format!("rc{c}")]);
        r.out(format!("rc{c}"), ["a"]);
        r.arc(format!("rc{c}"), "a", format!("T{c}"), ["fin"]);
        r.arc(format!("rc{c}"), "a", format!("P{c}"), ["fin".to_string(), format!("nc{c}")]);
        r.out(format!("nc{c}"), ["a"]);
        r.arc(format!("nc{c}"), "a", format!("Tp{c}"), [format!("tp{j}")]);
        r.arc(format!("nc{c}"), "a", format!("P{c}"), ["fin".to_string(), format!("rc{c}")]);
    }
    Ok(validate(&r).expect("gadget is well-formed"))
}

/// A directed graph over named vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digraph {
    pub vertices: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl Digraph {
    pub fn vertex(&mut self, name: &str) -> usize {
        match self.vertices.iter().position(|v| v == name) {
            Some(i) => i,
            None => {
                self.vertices.push(name.to_string());
                self.vertices.len() - 1
            }
        }
    }

    /// One `u v` pair per line; a single token declares an isolated vertex.
    pub fn parse_edge_list(text: &str) -> Result<Self, GenError> {
        let mut g = Digraph::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            let toks: Vec<&str> = line.split_whitespace().collect();
            for t in &toks {
                if !t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(GenError::Digraph(format!("line {}: bad vertex name '{t}'", i + 1)));
                }
            }
            match toks.as_slice() {
                [] => {}
                [v] => {
                    g.vertex(v);
                }
                [u, v] => {
                    let (u, v) = (g.vertex(u), g.vertex(v));
                    if !g.edges.contains(&(u, v)) {
                        g.edges.push((u, v));
                    }
                }
                _ => return Err(GenError::Digraph(format!("line {}: expected 'u v'", i + 1))),
            }
        }
        Ok(g)
    }

    pub fn reaches(&self, s: usize, t: usize) -> bool {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            if u == t {
                return true;
            }
            for &(a, b) in &self.edges {
                if a == u && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        false
    }
}

/// One process, a node per vertex and a result per edge; every node but
/// t can also go `back` to s. Sound iff t is reachable from s.
pub fn gen_from_digraph(g: &Digraph, s: &str, t: &str) -> Result<Negotiation, GenError> {
    let find = |v: &str| g.vertices.iter().position(|x| x == v).ok_or_else(|| GenError::Digraph(format!("unknown vertex '{v}'")));
    let (si, ti) = (find(s)?, find(t)?);
    if si == ti {
        return Err(GenError::Digraph("s and t coincide".into()));
    }
    if g.edges.iter().any(|&(_, v)| v == si) {
        return Err(GenError::Digraph(format!("{s} has incoming edges")));
    }
    if g.edges.iter().any(|&(u, _)| u == ti) {
        return Err(GenError::Digraph(format!("{t} has outgoing edges")));
    }
    let mut r = RawNegotiation::new("digraph");
    r.process("p").init_fin(s, t);
    for v in &g.vertices {
        r.node(v.clone(), ["p"]);
    }
    for (i, v) in g.vertices.iter().enumerate() {
        if i == ti {
            continue;
        }
        let mut results: Vec<String> = Vec::new();
        for &(a, b) in g.edges.iter().filter(|e| e.0 == i) {
            let res = format!("e_{}_{}", v, g.vertices[b]);
            r.arc(v.clone(), res.clone(), "p", [g.vertices[b].clone()]);
            results.push(res);
            let _ = a;
        }
        r.arc(v.clone(), "back", "p", [s.to_string()]);
        results.push("back".into());
        r.out(v.clone(), results);
    }
    Ok(validate(&r).expect("gadget is well-formed"))
}

/// A random DAG on `n` vertices `v0..`; s = v0 has no incoming and
/// t = v{n-1} no outgoing edges.
pub fn random_dag(n: usize, edge_prob: f64, seed: u64) -> Digraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Digraph::default();
    for i in 0..n {
        g.vertex(&format!("v{i}"));
    }
    for u in 0..n {
        for v in u + 1..n {
            if v == 0 || u == n - 1 {
                continue;
            }
            if rng.gen_bool(edge_prob) {
                g.edges.push((u, v));
            }
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomParams {
    pub nodes: usize,
    pub procs: usize,
    pub max_results: usize,
    /// Acyclic when set, cyclic otherwise.
    pub acyclic: bool,
    /// Deterministic when set, at least one non-deterministic process otherwise.
    pub deterministic: bool,
    /// Every node keeps a deterministic participant.
    pub weakly_nd: bool,
}

impl RandomParams {
    pub fn det_acyclic(nodes: usize, procs: usize) -> Self {
        RandomParams { nodes, procs, max_results: 2, acyclic: true, deterministic: true, weakly_nd: true }
    }
}

pub const SAMPLING_ATTEMPTS: usize = 1000;

/// Reproducible random negotiation with the requested class flags.
pub fn gen_random(params: &RandomParams, seed: u64) -> Result<Negotiation, GenError> {
    if params.nodes < 2 || params.procs == 0 || params.max_results == 0 {
        return Err(GenError::Params("need at least 2 nodes, 1 process and 1 result".into()));
    }
    if !params.deterministic && params.procs < 2 && params.weakly_nd {
        return Err(GenError::Params("weakly non-deterministic sampling needs 2 processes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLING_ATTEMPTS {
        let neg = sample(params, &mut rng);
        let f = classify(&neg);
        if f.acyclic == params.acyclic
            && f.deterministic == params.deterministic
            && (!params.weakly_nd || f.weakly_nd)
        {
            return Ok(neg);
        }
    }
    Err(GenError::SamplingBudgetExceeded(SAMPLING_ATTEMPTS))
}

fn sample(params: &RandomParams, rng: &mut ChaCha8Rng) -> Negotiation {
    let n = params.nodes;
    let k = params.procs;
    // p0 is the deterministic anchor; the others may branch
    let nondet: Vec<bool> = (0..k).map(|p| !params.deterministic && p > 0 && rng.gen_bool(0.6)).collect();
    let mut doms: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        if i == 0 || i == n - 1 {
            doms.push((0..k).collect());
            continue;
        }
        let mut d: Vec<usize> = (0..k).filter(|_| rng.gen_bool(0.5)).collect();
        if d.is_empty() {
            d.push(rng.gen_range(0..k));
        }
        if params.weakly_nd && d.iter().all(|&p| nondet[p]) {
            d.insert(0, 0);
        }
        doms.push(d);
    }
    let name = |i: usize| format!("n{i}");
    let mut r = RawNegotiation::new("random");
    for p in 0..k {
        r.process(format!("p{p}"));
    }
    r.init_fin(name(0), name(n - 1));
    for (i, d) in doms.iter().enumerate() {
        r.node(name(i), d.iter().map(|p| format!("p{p}")));
    }
    for i in 0..n - 1 {
        let results = rng.gen_range(1..=params.max_results);
        let res: Vec<String> = (0..results).map(|a| ["a", "b", "c", "d", "e"][a % 5].to_string()).collect();
        r.out(name(i), res.clone());
        for a in &res {
            for &p in &doms[i] {
                let forward: Vec<usize> = (i + 1..n).filter(|&j| doms[j].contains(&p)).collect();
                let any: Vec<usize> = (0..n).filter(|&j| j != 0 && doms[j].contains(&p)).collect();
                let pool = if params.acyclic || !rng.gen_bool(0.25) { &forward } else { &any };
                // prefer near successors so that runs stay long
                let pick = |rng: &mut ChaCha8Rng| {
                    let w = pool.len().min(3);
                    pool[rng.gen_range(0..w.max(1)).min(pool.len() - 1)]
                };
                let mut targets = vec![pick(rng)];
                if nondet[p] && pool.len() > 1 && rng.gen_bool(0.4) {
                    let other = *pool.choose(rng).unwrap();
                    if !targets.contains(&other) {
                        targets.push(other);
                    }
                }
                r.arc(name(i), a.clone(), format!("p{p}"), targets.into_iter().map(name));
            }
        }
    }
    validate(&r).expect("random sample is well-formed")
}

/// A large sound deterministic negotiation built from sequence, parallel
/// split/join, choice and loop fragments, with at least `nodes` nodes.
pub fn gen_structured(nodes: usize, procs: usize, seed: u64) -> Negotiation {
    let mut b = Structured { rng: ChaCha8Rng::seed_from_u64(seed), doms: Vec::new(), arcs: Vec::new(), outs: Vec::new() };
    let all: Vec<usize> = (0..procs.max(1)).collect();
    let init = b.node(&all);
    let (e, mut x) = b.block(&all, nodes.saturating_sub(2).max(1));
    // fragment sizes are approximate; pad with a sequence up to `nodes`
    while b.doms.len() + 1 < nodes {
        let n = b.node(&all);
        b.link(x, "a", &all, n);
        x = n;
    }
    let fin = b.node(&all);
    b.link(init, "a", &all, e);
    b.link(x, "a", &all, fin);
    let mut r = RawNegotiation::new("structured");
    for p in &all {
        r.process(format!("p{p}"));
    }
    r.init_fin(format!("n{init}"), format!("n{fin}"));
    for (i, d) in b.doms.iter().enumerate() {
        r.node(format!("n{i}"), d.iter().map(|p| format!("p{p}")));
    }
    for (i, o) in b.outs.iter().enumerate() {
        if !o.is_empty() {
            r.out(format!("n{i}"), o.clone());
        }
    }
    for (n, a, p, t) in b.arcs {
        r.arc(format!("n{n}"), a, format!("p{p}"), [format!("n{t}")]);
    }
    validate(&r).expect("structured negotiation is well-formed")
}

struct Structured {
    rng: ChaCha8Rng,
    doms: Vec<Vec<usize>>,
    outs: Vec<Vec<String>>,
    arcs: Vec<(usize, &'static str, usize, usize)>,
}

impl Structured {
    fn node(&mut self, dom: &[usize]) -> usize {
        self.doms.push(dom.to_vec());
        self.outs.push(Vec::new());
        self.doms.len() - 1
    }

    fn link(&mut self, from: usize, result: &'static str, procs: &[usize], to: usize) {
        if !self.outs[from].iter().any(|r| r == result) {
            self.outs[from].push(result.to_string());
        }
        for &p in procs {
            self.arcs.push((from, result, p, to));
        }
    }

    /// A fragment over `procs` of about `size` nodes; returns its entry and
    /// its exit, whose outgoing result `a` the caller adds.
    fn block(&mut self, procs: &[usize], size: usize) -> (usize, usize) {
        if size <= 1 {
            let n = self.node(procs);
            return (n, n);
        }
        if size <= 3 {
            let (e, x) = self.block(procs, 1);
            let (e2, x2) = self.block(procs, size - 1);
            self.link(x, "a", procs, e2);
            return (e, x2);
        }
        let kind = self.rng.gen_range(0..10);
        match kind {
            0..=3 if procs.len() >= 2 => {
                let split = self.node(procs);
                let mut shuffled = procs.to_vec();
                shuffled.shuffle(&mut self.rng);
                let cut = self.rng.gen_range(1..shuffled.len());
                let (mut left, mut right) = (shuffled[..cut].to_vec(), shuffled[cut..].to_vec());
                left.sort();
                right.sort();
                let inner = size - 2;
                let ls = (inner * left.len() / procs.len()).max(1);
                let (e1, x1) = self.block(&left, ls);
                let (e2, x2) = self.block(&right, inner.saturating_sub(ls).max(1));
                let join = self.node(procs);
                self.link(split, "a", &left, e1);
                self.link(split, "a", &right, e2);
                self.link(x1, "a", &left, join);
                self.link(x2, "a", &right, join);
                (split, join)
            }
            4..=5 => {
                let choice = self.node(procs);
                let inner = size - 2;
                let (e1, x1) = self.block(procs, inner / 2);
                let (e2, x2) = self.block(procs, inner - inner / 2);
                let join = self.node(procs);
                self.link(choice, "a", procs, e1);
                self.link(choice, "b", procs, e2);
                self.link(x1, "a", procs, join);
                self.link(x2, "a", procs, join);
                (choice, join)
            }
            6 => {
                let head = self.node(procs);
                let (e, x) = self.block(procs, size - 2);
                let tail = self.node(procs);
                self.link(head, "a", procs, e);
                self.link(x, "a", procs, tail);
                self.link(tail, "again", procs, head);
                (head, tail)
            }
            _ => {
                let (e1, x1) = self.block(procs, size / 2);
                let (e2, x2) = self.block(procs, size - size / 2);
                self.link(x1, "a", procs, e2);
                (e1, x2)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{oracle_sound, DEFAULT_BUDGET};
    use crate::patterns::{det_soundness, AntiPattern, DetVerdict};

    #[test]
    fn dimacs_round_trip() {
        let f = Cnf3::parse_dimacs("c demo\np cnf 2 2\n1 -2 2 0\n-1 -1 -1 0\n").unwrap();
        assert_eq!(f.clauses, vec![[1, -2, 2], [-1, -1, -1]]);
        assert_eq!(Cnf3::parse_dimacs(&f.to_dimacs()).unwrap(), f);
        assert!(Cnf3::parse_dimacs("p cnf 1 1\n1 1 0\n").is_err());
        assert!(Cnf3::parse_dimacs("p cnf 1 1\n1 1 2 0\n").is_err());
    }

    #[test]
    fn canonical_forms() {
        let a = Cnf3::new(3, vec![[3, 3, -3]]).unwrap().canonical();
        let b = Cnf3::new(1, vec![[-1, 1, 1]]).unwrap().canonical();
        assert_eq!(a, b);
        assert_eq!(a.variables, 1);
        let all = Cnf3::enumerate_canonical(1, 2);
        // one-variable clauses up to sign: {+++, ++-}; pairs of them
        assert!(all.len() >= 4 && all.len() < 10, "{}", all.len());
    }

    #[test]
    fn sat_gadget_small_cases() {
        let sat = Cnf3::new(1, vec![[1, 1, 1]]).unwrap();
        let unsat = Cnf3::new(1, vec![[1, 1, 1], [-1, -1, -1]]).unwrap();
        for (f, sound) in [(sat, false), (unsat, true)] {
            let neg = gen_from_cnf(&f).unwrap();
            let c = classify(&neg);
            assert!(c.det_acyclic && c.very_weakly_nd && !c.acyclic, "{c}");
            assert_eq!(oracle_sound(&neg, DEFAULT_BUDGET).unwrap().is_sound(), sound);
        }
    }

    #[test]
    fn digraph_gadget() {
        let g = Digraph::parse_edge_list("s t\n").unwrap();
        assert!(det_soundness(&gen_from_digraph(&g, "s", "t").unwrap()).unwrap().is_sound());
        let g = Digraph::parse_edge_list("s\nt\n").unwrap();
        match det_soundness(&gen_from_digraph(&g, "s", "t").unwrap()).unwrap() {
            DetVerdict::Unsound(AntiPattern::B { .. }) => {}
            v => panic!("{v:?}"),
        }
        let g = Digraph::parse_edge_list("s u\nu t\n").unwrap();
        assert!(det_soundness(&gen_from_digraph(&g, "s", "t").unwrap()).unwrap().is_sound());
        let g = Digraph::parse_edge_list("s t\nu s\n").unwrap();
        assert!(gen_from_digraph(&g, "s", "t").is_err());
    }

    #[test]
    fn random_is_reproducible_and_classed() {
        let p = RandomParams::det_acyclic(6, 2);
        let a = gen_random(&p, 1).unwrap();
        assert_eq!(a, gen_random(&p, 1).unwrap());
        let f = classify(&a);
        assert!(f.deterministic && f.acyclic);
        let p = RandomParams { nodes: 7, procs: 3, max_results: 2, acyclic: true, deterministic: false, weakly_nd: true };
        for seed in 0..20 {
            let f = classify(&gen_random(&p, seed).unwrap());
            assert!(f.weakly_nd && !f.deterministic && f.acyclic);
        }
        let p = RandomParams { acyclic: false, ..RandomParams::det_acyclic(6, 2) };
        assert!(!classify(&gen_random(&p, 3).unwrap()).acyclic);
    }

    #[test]
    fn structured_is_sound() {
        for seed in 0..5 {
            let neg = gen_structured(60, 4, seed);
            assert!(neg.node_count() >= 60);
            assert!(neg.is_deterministic());
            assert!(oracle_sound(&neg, DEFAULT_BUDGET).unwrap().is_sound(), "seed {seed}");
            assert!(det_soundness(&neg).unwrap().is_sound(), "seed {seed}");
        }
    }
}
