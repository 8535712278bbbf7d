//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use negsound::data::{builtin_spec, oracle_compliance, spec_compliance, Compliance, DataSpec, Finding, SpecKind};
use negsound::fixtures;
use negsound::games::{build_arena, eve_winning, solve_omitting, OmitSolver};
use negsound::generators::{gen_from_cnf, gen_from_digraph, gen_random, gen_structured, random_dag, Cnf3, RandomParams};
use negsound::oracle::{oracle_concurrent, oracle_omit, oracle_sound, OracleVerdict};
use negsound::par;
use negsound::patterns::{det_soundness, find_pattern_f, AntiPattern, DetVerdict};
use negsound::races::race;
use negsound::semantics::render_steps;
use negsound::weak::weak_soundness;
use negsound::{classify, Negotiation, NodeId, OmitInstance, ResultId, Step, DEFAULT_BUDGET};

const FIXTURE_TIME_LIMIT: Duration = Duration::from_secs(1);
const MAX_NODES: usize = 10;
const MAX_PROCS: usize = 4;
const DET_SAMPLES: usize = 1000;
const GAME_SAMPLES: usize = 500;
const OMIT_SAMPLES: usize = 500;
const MAX_INCLUDE_PAIRS: usize = 2;
const WEAK_SAMPLES: usize = 500;
const CNF_MAX_VARS: usize = 3;
const CNF_MAX_CLAUSES: usize = 3;
const DAG_SAMPLES: usize = 200;
const DAG_MAX_VERTICES: usize = 15;
const RACE_SAMPLES: usize = 500;
const DATA_RANDOM_SPECS: usize = 200;
const REQUIRED_AGREEMENT: f64 = 1.0;
const PERF_NODES: usize = 10_000;
const PERF_PROCS: usize = 100;
const PERF_LIMIT: Duration = Duration::from_secs(5);
const SUITE_LIMIT: Duration = Duration::from_secs(600);
/// Seeds tried per requested sample before a corpus counts as short.
const SEED_FACTOR: u64 = 50;

type Check = Result<String, String>;

fn agreement(label: &str, agree: usize, total: usize, required: usize) -> Check {
    let ratio = if total == 0 { 0.0 } else { agree as f64 / total as f64 };
    let msg = format!("{label}: {agree}/{total} agree ({:.1}%)", ratio * 100.0);
    if total < required {
        Err(format!("{msg}, fewer than {required} samples"))
    } else if ratio < REQUIRED_AGREEMENT {
        Err(msg)
    } else {
        Ok(msg)
    }
}

fn ensure(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn id(neg: &Negotiation, s: &str) -> NodeId {
    neg.node_id(s).unwrap()
}

fn sized(seed: u64, min_procs: usize) -> (usize, usize) {
    let nodes = 3 + (seed as usize % (MAX_NODES - 2));
    let procs = min_procs + (seed as usize / 7 % (MAX_PROCS + 1 - min_procs));
    (nodes, procs)
}

/// The first `count` samples the generator accepts, in seed order.
fn corpus(count: usize, make: impl Fn(u64) -> Option<Negotiation> + Sync + Send) -> Vec<Negotiation> {
    let mut out = Vec::new();
    let mut next = 0u64;
    while out.len() < count && next < count as u64 * SEED_FACTOR {
        let seeds: Vec<u64> = (next..next + 256).collect();
        next += 256;
        out.extend(par::map(&seeds, |&s| make(s)).into_iter().flatten());
    }
    out.truncate(count);
    out
}

fn det_params(seed: u64, acyclic: bool) -> RandomParams {
    let (nodes, procs) = sized(seed, 1);
    RandomParams { nodes, procs, max_results: 2, acyclic, deterministic: true, weakly_nd: true }
}

/// Sound acyclic deterministic samples, soundness decided by the oracle.
fn sound_corpus(count: usize) -> Vec<Negotiation> {
    corpus(count, |s| {
        let neg = gen_random(&det_params(s, true), s).ok()?;
        oracle_sound(&neg, DEFAULT_BUDGET).ok()?.is_sound().then_some(neg)
    })
}

fn random_omit(neg: &Negotiation, rng: &mut ChaCha8Rng) -> Vec<NodeId> {
    neg.nodes().filter(|&n| n != neg.fin() && rng.gen_bool(0.2)).collect()
}

fn all_pairs(neg: &Negotiation) -> Vec<Step> {
    neg.nodes().flat_map(|n| neg.out(n).iter().map(move |&a| Step::new(n, a))).collect()
}

fn c1_fixture_verdicts() -> Check {
    let cases: [(&str, Negotiation, bool); 8] = [
        ("FIG1L", fixtures::fig1l(), true),
        ("FIG1M", fixtures::fig1m(), true),
        ("FIG1R", fixtures::fig1r(), true),
        ("FIG1R-MOD", fixtures::fig1r_mod(), false),
        ("FIG1L-MOD", fixtures::fig1l_mod(), false),
        ("ANTI-F", fixtures::anti_f(), false),
        ("ANTI-C", fixtures::anti_c(), false),
        ("NODOM", fixtures::nodom(), true),
    ];
    let mut slowest = Duration::ZERO;
    for (name, neg, expect) in cases {
        let t = Instant::now();
        let c = classify(&neg);
        let (method, sound) = if c.deterministic {
            ("patterns", det_soundness(&neg).map_err(|e| e.to_string())?.is_sound())
        } else if c.acyclic && c.weakly_nd {
            ("weak", weak_soundness(&neg).map_err(|e| e.to_string())?.is_sound())
        } else {
            ("oracle", oracle_sound(&neg, DEFAULT_BUDGET).map_err(|e| e.to_string())?.is_sound())
        };
        let dt = t.elapsed();
        slowest = slowest.max(dt);
        ensure(sound == expect, format!("{name}: {method} says sound={sound}, expected {expect}"))?;
        ensure(dt < FIXTURE_TIME_LIMIT, format!("{name}: {dt:?} exceeds {FIXTURE_TIME_LIMIT:?}"))?;
        if name == "NODOM" {
            ensure(method == "oracle", "NODOM must take the oracle path")?;
        }
    }
    Ok(format!("8/8 fixtures, slowest {slowest:.2?}"))
}

fn c2_witness_fidelity() -> Check {
    let fork = |neg: &Negotiation| -> Result<(String, String, String, String), String> {
        match det_soundness(neg).map_err(|e| e.to_string())? {
            DetVerdict::Unsound(AntiPattern::F(f)) => Ok((
                neg.proc_name(f.p1).into(),
                neg.proc_name(f.p2).into(),
                neg.node_name(f.n1).into(),
                neg.node_name(f.n2).into(),
            )),
            v => Err(format!("expected an F witness, got {v:?}")),
        }
    };
    let f = fixtures::anti_f();
    let got = fork(&f)?;
    ensure(got == ("p0".into(), "p1".into(), "n1".into(), "n2".into()), format!("ANTI-F fork {got:?}"))?;

    let c = fixtures::anti_c();
    match det_soundness(&c).map_err(|e| e.to_string())? {
        DetVerdict::Unsound(AntiPattern::C { circuit }) => {
            let mut nodes: Vec<&str> = circuit.iter().map(|e| c.node_name(e.from)).collect();
            nodes.sort();
            ensure(nodes == ["n1", "n2", "n3"], format!("ANTI-C circuit {nodes:?}"))?;
        }
        v => return Err(format!("ANTI-C: expected a C witness, got {v:?}")),
    }
    ensure(find_pattern_f(&c).map_err(|e| e.to_string())?.is_none(), "ANTI-C has an F pattern")?;

    let lm = fixtures::fig1l_mod();
    let got = fork(&lm)?;
    ensure(got == ("p0".into(), "p1".into(), "n4".into(), "n5".into()), format!("FIG1L-MOD fork {got:?}"))?;

    let rm = fixtures::fig1r_mod();
    match oracle_sound(&rm, DEFAULT_BUDGET).map_err(|e| e.to_string())? {
        OracleVerdict::Unsound { run, stuck } => {
            let r = render_steps(&rm, &run.steps);
            ensure(r == "(n0,a)(n1,b)", format!("FIG1R-MOD oracle run {r}"))?;
            ensure(stuck.is_deadlock(&rm), "FIG1R-MOD witness does not end in a deadlock")?;
        }
        OracleVerdict::Sound => return Err("FIG1R-MOD reported sound".into()),
    }
    Ok("ANTI-F (p0,p1,n1,n2); ANTI-C {n1,n2,n3}, no F; FIG1L-MOD (p0,p1,n4,n5); FIG1R-MOD (n0,a)(n1,b)".into())
}

fn c3_anti_patterns() -> Check {
    let half = DET_SAMPLES / 2;
    let mut lines = Vec::new();
    let mut failed = false;
    for acyclic in [true, false] {
        let negs = corpus(half, |s| gen_random(&det_params(s, acyclic), s).ok());
        let results = par::map(&negs, |neg| {
            let d = det_soundness(neg).map(|v| v.is_sound());
            let o = oracle_sound(neg, DEFAULT_BUDGET).map(|v| v.is_sound());
            match (d, o) {
                (Ok(d), Ok(o)) => (d == o, !o),
                _ => (false, false),
            }
        });
        let agree = results.iter().filter(|r| r.0).count();
        let unsound = results.iter().filter(|r| r.1).count();
        let label = if acyclic { "acyclic" } else { "cyclic" };
        match agreement(label, agree, negs.len(), half) {
            Ok(m) => lines.push(format!("{m}, {unsound} unsound")),
            Err(m) => {
                failed = true;
                lines.push(m);
            }
        }
    }
    let msg = lines.join("; ");
    if failed {
        Err(msg)
    } else {
        Ok(msg)
    }
}

fn c4_games(negs: &[Negotiation]) -> Check {
    let results = par::map(&(0..negs.len()).collect::<Vec<_>>(), |&i| -> Result<bool, String> {
        let neg = &negs[i];
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let omit = random_omit(neg, &mut rng);
        let arena = build_arena(neg, &omit, &[]).map_err(|e| e.to_string())?;
        let eve = eve_winning(&arena).eve_wins(neg);
        let inst = OmitInstance::new(vec![], omit.clone());
        let oracle = oracle_omit(neg, &inst, DEFAULT_BUDGET).map_err(|e| e.to_string())?.is_some();
        let plan = OmitSolver::assume_sound(neg).solve(&inst).map_err(|e| e.to_string())?;
        let run_ok = match &plan {
            Some(p) => p.run.is_successful(neg) && omit.iter().all(|&b| !p.run.visits(b)),
            None => true,
        };
        Ok(eve == oracle && plan.is_some() == eve && run_ok)
    });
    let agree = results.iter().filter(|r| matches!(r, Ok(true))).count();
    agreement("Eve wins vs oracle_omit, runs replay and avoid B", agree, negs.len(), GAME_SAMPLES)
}

fn c5_k_omitting(negs: &[Negotiation]) -> Check {
    let results = par::map(&(0..negs.len()).collect::<Vec<_>>(), |&i| -> Result<(bool, bool), String> {
        let neg = &negs[i];
        let mut rng = ChaCha8Rng::seed_from_u64(1_000_000 + i as u64);
        let omit = random_omit(neg, &mut rng);
        let pairs = all_pairs(neg);
        let two_results: Vec<NodeId> = neg.nodes().filter(|&n| neg.out(n).len() >= 2).collect();
        let include: Vec<Step> = if i % 5 == 0 && !two_results.is_empty() {
            let n = *two_results.choose(&mut rng).unwrap();
            vec![Step::new(n, neg.out(n)[0]), Step::new(n, neg.out(n)[1])]
        } else {
            let k = rng.gen_range(0..=MAX_INCLUDE_PAIRS);
            pairs.choose_multiple(&mut rng, k).copied().collect()
        };
        let same_node = include.len() == 2 && include[0].node == include[1].node && include[0] != include[1];
        let inst = OmitInstance::new(include, omit);
        let fast = solve_omitting(neg, &inst).map_err(|e| e.to_string())?;
        let oracle = oracle_omit(neg, &inst, DEFAULT_BUDGET).map_err(|e| e.to_string())?.is_some();
        let replay = fast.as_ref().is_none_or(|p| {
            p.run.is_successful(neg)
                && inst.include.iter().all(|&s| p.run.contains(s))
                && p.run.steps.iter().all(|&s| !inst.forbids(s))
        });
        let ok = fast.is_some() == oracle && replay && (!same_node || fast.is_none());
        Ok((ok, same_node))
    });
    let agree = results.iter().filter(|r| matches!(r, Ok((true, _)))).count();
    let same = results.iter().filter(|r| matches!(r, Ok((_, true)))).count();
    agreement("solve_omitting vs oracle_omit", agree, negs.len(), OMIT_SAMPLES)
        .map(|m| format!("{m}, {same} two-results-same-node cases all negative"))
}

fn c6_weak() -> Check {
    let negs = corpus(WEAK_SAMPLES, |s| {
        let (nodes, procs) = sized(s, 2);
        let p = RandomParams { nodes, procs, max_results: 2, acyclic: true, deterministic: false, weakly_nd: true };
        gen_random(&p, s).ok()
    });
    let results = par::map(&negs, |neg| {
        let w = weak_soundness(neg).map(|v| v.is_sound());
        let o = oracle_sound(neg, DEFAULT_BUDGET).map(|v| v.is_sound());
        match (w, o) {
            (Ok(w), Ok(o)) => (w == o, !o),
            _ => (false, false),
        }
    });
    let agree = results.iter().filter(|r| r.0).count();
    let unsound = results.iter().filter(|r| r.1).count();
    agreement("weak_soundness vs oracle_sound", agree, negs.len(), WEAK_SAMPLES).map(|m| format!("{m}, {unsound} unsound"))
}

fn c7_sat_gadget() -> Check {
    let formulas = Cnf3::enumerate_canonical(CNF_MAX_VARS, CNF_MAX_CLAUSES);
    let results = par::map(&formulas, |f| -> Result<bool, String> {
        let neg = gen_from_cnf(f).map_err(|e| e.to_string())?;
        let c = classify(&neg);
        let unsound = !oracle_sound(&neg, DEFAULT_BUDGET).map_err(|e| e.to_string())?.is_sound();
        Ok(c.det_acyclic && c.very_weakly_nd && unsound == f.satisfiable())
    });
    let agree = results.iter().filter(|r| matches!(r, Ok(true))).count();
    let sat = formulas.iter().filter(|f| f.satisfiable()).count();
    agreement("formulas (up to symmetry)", agree, formulas.len(), 1).map(|m| format!("{m}, {sat} satisfiable"))
}

fn c8_graph_gadget() -> Check {
    let seeds: Vec<u64> = (0..DAG_SAMPLES as u64).collect();
    let results = par::map(&seeds, |&s| -> Result<(bool, bool), String> {
        let n = 2 + (s as usize % (DAG_MAX_VERTICES - 1));
        let g = random_dag(n, 0.25, s);
        let neg = gen_from_digraph(&g, "v0", &format!("v{}", n - 1)).map_err(|e| e.to_string())?;
        let reach = g.reaches(0, n - 1);
        let sound = det_soundness(&neg).map_err(|e| e.to_string())?.is_sound();
        Ok((sound == reach, reach))
    });
    let agree = results.iter().filter(|r| matches!(r, Ok((true, _)))).count();
    let reach = results.iter().filter(|r| matches!(r, Ok((_, true)))).count();
    agreement("DAGs", agree, seeds.len(), DAG_SAMPLES).map(|m| format!("{m}, {reach} with s→*t"))
}

fn c9_races(negs: &[Negotiation]) -> Check {
    let results = par::map(negs, |neg| -> Result<(usize, usize, usize), String> {
        let (mut agree, mut total, mut races) = (0, 0, 0);
        for m in neg.nodes() {
            for n in neg.nodes() {
                let r = race(neg, m, n).map_err(|e| e.to_string())?.is_race();
                let o = oracle_concurrent(neg, m, n, DEFAULT_BUDGET).map_err(|e| e.to_string())?.is_some();
                total += 1;
                agree += usize::from(r == o);
                races += usize::from(r);
            }
        }
        Ok((agree, total, races))
    });
    let mut pairs = (0, 0, 0);
    let mut clean = 0;
    for (a, t, n) in results.iter().flatten() {
        pairs = (pairs.0 + a, pairs.1 + t, pairs.2 + n);
        clean += usize::from(a == t);
    }
    let l = fixtures::fig1l();
    ensure(
        oracle_concurrent(&l, id(&l, "n1"), id(&l, "n2"), DEFAULT_BUDGET).map_err(|e| e.to_string())?.is_some(),
        "FIG1L: (n1,n2) not concurrently enabled",
    )?;
    agreement("negotiations", clean, negs.len(), RACE_SAMPLES)
        .map(|m| format!("{m}; {}/{} node pairs, {} races; FIG1L n1 ∥ n2", pairs.0, pairs.1, pairs.2))
}

fn c10_data() -> Check {
    let d = fixtures::data1();
    let neg = &d.base;
    let step = |s: &Step| format!("({},{})", neg.node_name(s.node), neg.result_name(s.result));

    let r = builtin_spec(&d, SpecKind::Inconsistent, "x2", DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    match &r.finding {
        Some(Finding::Parallel { first, second, .. }) => {
            let mut got = [step(first), step(second)];
            got.sort();
            ensure(got == ["(n2,a)", "(n3,b)"], format!("inconsistent(x2) at {got:?}"))?;
        }
        f => return Err(format!("inconsistent(x2): {f:?}")),
    }
    let r = builtin_spec(&d, SpecKind::WeaklyRedundant, "x2", DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    match &r.finding {
        Some(Finding::Violation(v)) => {
            let got = (step(&v.first), step(&v.second));
            ensure(got == ("(n3,b)".into(), "(n5,a)".into()), format!("weakly-redundant(x2) pair {got:?}"))?;
        }
        f => return Err(format!("weakly-redundant(x2): {f:?}")),
    }
    let r = builtin_spec(&d, SpecKind::NeverDestroyed, "x1", DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    let n4b = Step::new(id(neg, "n4"), neg.result_of(id(neg, "n4"), "b").unwrap());
    match &r.finding {
        Some(Finding::Violation(v)) => ensure(!v.run.contains(n4b), "never-destroyed(x1) run contains (n4,b)")?,
        f => return Err(format!("never-destroyed(x1): {f:?}")),
    }

    let a = fixtures::data1_acyc();
    let an = &a.base;
    let mut specs = Vec::new();
    for v in 0..a.variables().len() {
        let x = negsound::data::VarId(v as u32);
        specs.push(DataSpec::weakly_redundant(&a, x));
        specs.push(DataSpec::never_destroyed(&a, x));
    }
    let mut pairs = all_pairs(an);
    if an.out(an.fin()).is_empty() {
        pairs.push(Step::new(an.fin(), ResultId::END));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..DATA_RANDOM_SPECS {
        let pick = |rng: &mut ChaCha8Rng, k: usize| pairs.choose_multiple(rng, k).copied().collect::<Vec<_>>();
        let (k1, k2, k) = (rng.gen_range(1..=2), rng.gen_range(1..=2), rng.gen_range(0..=3));
        specs.push(DataSpec { name: format!("random{i}"), o1: pick(&mut rng, k1), o2: pick(&mut rng, k2), o: pick(&mut rng, k) });
    }
    let results = par::map(&specs, |s| -> Result<(bool, bool), String> {
        let fast = spec_compliance(an, s).map_err(|e| e.to_string())?;
        let oracle = oracle_compliance(an, s, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
        let valid = |c: &Compliance| match c {
            Compliance::Complies => true,
            Compliance::Violates(v) => v.verify(an, s),
        };
        Ok((fast.complies() == oracle.complies() && valid(&fast) && valid(&oracle), !fast.complies()))
    });
    let agree = results.iter().filter(|r| matches!(r, Ok((true, _)))).count();
    let violated = results.iter().filter(|r| matches!(r, Ok((_, true)))).count();
    agreement("DATA1 examples ok; DATA1-ACYC fast vs oracle", agree, specs.len(), specs.len())
        .map(|m| format!("{m}, {violated} violated"))
}

fn c11_performance(suite: Duration) -> Check {
    let neg = gen_structured(PERF_NODES, PERF_PROCS, 11);
    ensure(neg.node_count() >= PERF_NODES, format!("generated only {} nodes", neg.node_count()))?;
    ensure(neg.is_deterministic(), "structured negotiation is not deterministic")?;
    let t = Instant::now();
    let v = det_soundness(&neg).map_err(|e| e.to_string())?;
    let dt = t.elapsed();
    ensure(v.is_sound(), "structured negotiation reported unsound")?;
    ensure(dt < PERF_LIMIT, format!("det_soundness took {dt:.2?} on {} nodes, limit {PERF_LIMIT:?}", neg.node_count()))?;
    ensure(suite < SUITE_LIMIT, format!("suite took {suite:.1?}, limit {SUITE_LIMIT:?}"))?;
    Ok(format!(
        "{} nodes / {} processes in {dt:.2?}; criteria 1-10 in {suite:.1?}",
        neg.node_count(),
        neg.proc_count()
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |no: usize, name: &str, t: Instant, r: Check| {
        let dt = t.elapsed();
        match r {
            Ok(m) => println!("PASS [{no:>2}] {name}: {m} ({dt:.1?})"),
            Err(m) => {
                failures += 1;
                println!("FAIL [{no:>2}] {name}: {m} ({dt:.1?})");
            }
        }
    };

    let t = Instant::now();
    report(1, "fixture verdicts", t, c1_fixture_verdicts());
    let t = Instant::now();
    report(2, "witness fidelity", t, c2_witness_fidelity());
    let t = Instant::now();
    report(3, "anti-pattern characterization", t, c3_anti_patterns());
    let t = Instant::now();
    let sound = sound_corpus(GAME_SAMPLES.max(OMIT_SAMPLES).max(RACE_SAMPLES));
    report(4, "omitting game", t, c4_games(&sound));
    let t = Instant::now();
    report(5, "K-omitting", t, c5_k_omitting(&sound));
    let t = Instant::now();
    report(6, "weak soundness", t, c6_weak());
    let t = Instant::now();
    report(7, "SAT gadget", t, c7_sat_gadget());
    let t = Instant::now();
    report(8, "graph gadget", t, c8_graph_gadget());
    let t = Instant::now();
    report(9, "races", t, c9_races(&sound));
    let t = Instant::now();
    report(10, "data analysis", t, c10_data());
    let suite = start.elapsed();
    let t = Instant::now();
    report(11, "performance", t, c11_performance(suite));

    println!("acceptance: {} of 11 criteria passed in {:.1?}", 11 - failures, start.elapsed());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
