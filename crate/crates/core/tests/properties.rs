//! Property-based and differential checks against the oracle.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use negsound::fixtures;
use negsound::generators::{gen_random, RandomParams};
use negsound::ngt::{emit_data_ngt, emit_ngt, parse_ngt};
use negsound::oracle::{oracle_sound, reorder_topologically, respects_order, OracleVerdict};
use negsound::patterns::{det_soundness, DetVerdict};
use negsound::semantics::{enabled, step};
use negsound::weak::{deterministic_part, weak_soundness, WeakVerdict, WeakWitness};
use negsound::{classify, Configuration, Negotiation, Run, Step, DEFAULT_BUDGET};

fn params() -> impl Strategy<Value = (RandomParams, u64)> {
    (3usize..=10, 1usize..=4, 1usize..=3, any::<bool>(), any::<bool>(), any::<u64>()).prop_map(
        |(nodes, procs, max_results, acyclic, deterministic, seed)| {
            let deterministic = deterministic || procs < 2;
            (RandomParams { nodes, procs, max_results, acyclic, deterministic, weakly_nd: true }, seed)
        },
    )
}

/// A random maximal run: pick enabled steps until none is left or n_fin is
/// enabled.
fn random_run(neg: &Negotiation, seed: u64, max_len: usize) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Configuration::initial(neg);
    let mut steps = Vec::new();
    while steps.len() < max_len && !c.is_terminal(neg) {
        let choices: Vec<Step> =
            enabled(neg, &c).into_iter().flat_map(|n| neg.out(n).iter().map(move |&a| Step::new(n, a))).collect();
        let Some(&s) = choices.choose(&mut rng) else { break };
        c = step(neg, &c, s.node, s.result).unwrap();
        steps.push(s);
    }
    Run::initial(neg, steps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_flags_hold((p, seed) in params()) {
        if let Ok(neg) = gen_random(&p, seed) {
            let c = classify(&neg);
            prop_assert_eq!(c.acyclic, p.acyclic);
            prop_assert_eq!(c.deterministic, p.deterministic);
            prop_assert!(c.weakly_nd);
            prop_assert_eq!(gen_random(&p, seed).unwrap(), neg);
        }
    }

    #[test]
    fn ngt_round_trip((p, seed) in params()) {
        if let Ok(neg) = gen_random(&p, seed) {
            let back = parse_ngt(&emit_ngt(&neg)).unwrap().neg;
            prop_assert_eq!(back, neg);
        }
    }

    #[test]
    fn det_soundness_matches_oracle((p, seed) in params()) {
        let p = RandomParams { deterministic: true, ..p };
        if let Ok(neg) = gen_random(&p, seed) {
            let d = det_soundness(&neg).unwrap();
            let o = oracle_sound(&neg, DEFAULT_BUDGET).unwrap();
            prop_assert_eq!(d.is_sound(), o.is_sound());
            if let DetVerdict::Unsound(w) = d {
                prop_assert!(w.verify(&neg), "witness {} does not verify", w.render(&neg));
            }
        }
    }

    #[test]
    fn oracle_witness_replays((p, seed) in params()) {
        if let Ok(neg) = gen_random(&p, seed) {
            if let OracleVerdict::Unsound { run, stuck } = oracle_sound(&neg, DEFAULT_BUDGET).unwrap() {
                prop_assert_eq!(run.last_config(&neg).unwrap(), stuck);
            }
        }
    }

    #[test]
    fn weak_soundness_matches_oracle((p, seed) in params()) {
        let p = RandomParams { acyclic: true, deterministic: false, procs: p.procs.max(2), ..p };
        if let Ok(neg) = gen_random(&p, seed) {
            let w = weak_soundness(&neg).unwrap();
            prop_assert_eq!(w.is_sound(), oracle_sound(&neg, DEFAULT_BUDGET).unwrap().is_sound());
            if let WeakVerdict::Unsound { witness: WeakWitness::OneProc(c), .. } = w {
                // the N_D run reaches n with p still waiting in δ(m,a,p)
                let det = deterministic_part(&neg);
                let mapped: Vec<Step> = c.run.iter().map(|s| {
                    let n = det.node_id(neg.node_name(s.node)).unwrap();
                    let r = if s.result == negsound::ResultId::END { s.result } else { det.result_id(neg.result_name(s.result)).unwrap() };
                    Step::new(n, r)
                }).collect();
                prop_assert!(Run::initial(&det, mapped).is_successful(&det));
            }
        }
    }

    #[test]
    fn topological_reordering((p, seed) in params(), run_seed in any::<u64>()) {
        let p = RandomParams { acyclic: true, ..p };
        if let Ok(neg) = gen_random(&p, seed) {
            let run = random_run(&neg, run_seed, 64);
            let sorted = reorder_topologically(&neg, &run);
            prop_assert!(respects_order(&neg, &sorted));
            prop_assert_eq!(sorted.last_config(&neg).unwrap(), run.last_config(&neg).unwrap());
            let mut a = run.steps.clone();
            let mut b = sorted.steps.clone();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn fixtures_round_trip() {
    for (name, text) in fixtures::ALL {
        let doc = parse_ngt(text).unwrap();
        let emitted = match &doc.data {
            Some(d) => emit_data_ngt(d),
            None => emit_ngt(&doc.neg),
        };
        assert_eq!(parse_ngt(&emitted).unwrap(), doc, "{name}");
    }
}

#[test]
fn seed_sweep_det_acyclic() {
    for seed in 1..=100 {
        let neg = gen_random(&RandomParams::det_acyclic(8, 3), seed).unwrap();
        assert_eq!(
            det_soundness(&neg).unwrap().is_sound(),
            oracle_sound(&neg, DEFAULT_BUDGET).unwrap().is_sound(),
            "seed {seed}"
        );
    }
}

#[test]
fn parallel_and_single_thread_agree() {
    let negs: Vec<Negotiation> =
        (0..64).filter_map(|s| gen_random(&RandomParams::det_acyclic(10, 4), s).ok()).collect();
    let verdict = |n: &Negotiation| format!("{:?}", det_soundness(n).unwrap());
    let par = negsound::par::map(&negs, verdict);
    let one = negsound::par::with_threads(1, || negsound::par::map(&negs, verdict));
    assert_eq!(par, one);
}
