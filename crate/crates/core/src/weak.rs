//! Soundness of acyclic weakly non-deterministic negotiations: the
//! deterministic part must be sound and, for every non-deterministic
//! process p, no omitting run of N_D may strand p.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{GameError, OmitSolver};
use crate::model::{classify, restrict, Negotiation, NodeId, ProcId, ResultId, Step};
use crate::oracle::OmitInstance;
use crate::par;
use crate::patterns::{det_soundness, AntiPattern, PatternError};
use crate::semantics::render_steps;

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum WeakError {
    #[error("negotiation is not acyclic")]
    NotAcyclic,
    #[error("negotiation is not weakly non-deterministic")]
    NotWeaklyNd,
    #[error("expected exactly one non-deterministic process, found {0}")]
    NotSingleNd(usize),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// The tuple of the single-process criterion: after (m,a) process p waits in
/// δ(m,a,p) while the deterministic processes run on to n.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneProcCounterexample {
    pub process: ProcId,
    pub m: NodeId,
    pub a: ResultId,
    pub n: NodeId,
    pub b: ResultId,
    pub omit: Vec<NodeId>,
    /// A successful run of N_D, in the node and result ids of the input.
    pub run: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeakWitness {
    DetPartUnsound(AntiPattern),
    OneProc(OneProcCounterexample),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeakVerdict {
    Sound,
    Unsound { process: Option<ProcId>, witness: WeakWitness },
}

impl WeakVerdict {
    pub fn is_sound(&self) -> bool {
        matches!(self, WeakVerdict::Sound)
    }

    pub fn render(&self, neg: &Negotiation, det_part: &Negotiation) -> String {
        match self {
            WeakVerdict::Sound => "sound".into(),
            WeakVerdict::Unsound { witness: WeakWitness::DetPartUnsound(w), .. } => {
                format!("deterministic part unsound: {}", w.render(det_part))
            }
            WeakVerdict::Unsound { witness: WeakWitness::OneProc(c), .. } => {
                let omit: Vec<&str> = c.omit.iter().map(|&x| neg.node_name(x)).collect();
                format!(
                    "p={} (m,a)=({},{}) (n,b)=({},{}) B={{{}}} run of N_D {}",
                    neg.proc_name(c.process),
                    neg.node_name(c.m),
                    neg.result_name(c.a),
                    neg.node_name(c.n),
                    neg.result_name(c.b),
                    omit.join(","),
                    render_steps(neg, &c.run)
                )
            }
        }
    }
}

/// N_D, the restriction to the deterministic processes.
pub fn deterministic_part(neg: &Negotiation) -> Negotiation {
    restrict(neg, &neg.deterministic_processes()).expect("weakly non-deterministic input keeps every node")
}

fn map_step(from: &Negotiation, to: &Negotiation, s: Step) -> Step {
    let n = to.node_id(from.node_name(s.node)).expect("node survives restriction");
    let r = if s.result == ResultId::END { ResultId::END } else { to.result_id(from.result_name(s.result)).unwrap() };
    Step::new(n, r)
}

fn check_preconditions(neg: &Negotiation) -> Result<(), WeakError> {
    if !neg.is_acyclic() {
        return Err(WeakError::NotAcyclic);
    }
    if !classify(neg).weakly_nd {
        return Err(WeakError::NotWeaklyNd);
    }
    Ok(())
}

/// Search the tuple for process `p` of `neg`, with `det` the sound N_D.
/// Pairs are scanned in ⪯ order of (m, n), then by result.
fn one_proc_search(
    neg: &Negotiation,
    p: ProcId,
    det: &Negotiation,
    solver: &OmitSolver,
) -> Result<Option<OneProcCounterexample>, WeakError> {
    let topo = neg.topo().map_err(|_| WeakError::NotAcyclic)?;
    let order: Vec<NodeId> = topo.order().iter().copied().filter(|&x| neg.in_dom(x, p)).collect();
    let found = par::map(&order, |&m| -> Result<Option<OneProcCounterexample>, WeakError> {
        for &n in order.iter().filter(|&&n| topo.rank(n) > topo.rank(m)) {
            let bs: Vec<ResultId> = if n == neg.fin() && neg.out(n).is_empty() {
                vec![ResultId::END]
            } else {
                neg.out(n).to_vec()
            };
            for &a in neg.out(m) {
                let sp = neg.delta(m, a, p).unwrap();
                if sp.contains(&n) {
                    continue;
                }
                let omit: Vec<NodeId> = sp
                    .iter()
                    .copied()
                    .filter(|&x| topo.rank(m) < topo.rank(x) && topo.rank(x) < topo.rank(n))
                    .collect();
                for &b in &bs {
                    let include = vec![map_step(neg, det, Step::new(m, a)), map_step(neg, det, Step::new(n, b))];
                    let omit_d = omit.iter().map(|&x| det.node_id(neg.node_name(x)).unwrap()).collect();
                    if let Some(plan) = solver.solve(&OmitInstance::new(include, omit_d))? {
                        let run = plan.run.steps.iter().map(|&s| map_step(det, neg, s)).collect();
                        return Ok(Some(OneProcCounterexample { process: p, m, a, n, b, omit, run }));
                    }
                }
            }
        }
        Ok(None)
    });
    for f in found {
        if let Some(c) = f? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

/// The single-non-deterministic-process criterion.
pub fn check_single_nd(neg: &Negotiation) -> Result<WeakVerdict, WeakError> {
    check_preconditions(neg)?;
    let nd = neg.nondeterministic_processes();
    if nd.len() != 1 {
        return Err(WeakError::NotSingleNd(nd.len()));
    }
    let det = deterministic_part(neg);
    if let crate::patterns::DetVerdict::Unsound(w) = det_soundness(&det)? {
        return Ok(WeakVerdict::Unsound { process: None, witness: WeakWitness::DetPartUnsound(w) });
    }
    let solver = OmitSolver::assume_sound(&det);
    Ok(match one_proc_search(neg, nd[0], &det, &solver)? {
        Some(c) => WeakVerdict::Unsound { process: Some(nd[0]), witness: WeakWitness::OneProc(c) },
        None => WeakVerdict::Sound,
    })
}

/// Sound iff N_D is sound and every N^p passes the single-process check.
/// The first failing non-deterministic process is reported, with the
/// witness in the ids of `neg`.
pub fn weak_soundness(neg: &Negotiation) -> Result<WeakVerdict, WeakError> {
    check_preconditions(neg)?;
    let det = deterministic_part(neg);
    if let crate::patterns::DetVerdict::Unsound(w) = det_soundness(&det)? {
        return Ok(WeakVerdict::Unsound { process: None, witness: WeakWitness::DetPartUnsound(w) });
    }
    // (N^p)_D = N_D, so one solver serves every p
    let solver = OmitSolver::assume_sound(&det);
    let dets = neg.deterministic_processes();
    for p in neg.nondeterministic_processes() {
        let mut keep = dets.clone();
        keep.push(p);
        keep.sort();
        let np = restrict(neg, &keep).expect("restriction keeps init and fin");
        let pp = np.proc_id(neg.proc_name(p)).unwrap();
        if let Some(c) = one_proc_search(&np, pp, &det, &solver)? {
            let back = |x: NodeId| neg.node_id(np.node_name(x)).unwrap();
            let ma = map_step(&np, neg, Step::new(c.m, c.a));
            let nb = map_step(&np, neg, Step::new(c.n, c.b));
            let c = OneProcCounterexample {
                process: p,
                m: ma.node,
                a: ma.result,
                n: nb.node,
                b: nb.result,
                omit: c.omit.into_iter().map(back).collect(),
                run: c.run.into_iter().map(|s| map_step(&np, neg, s)).collect(),
            };
            return Ok(WeakVerdict::Unsound { process: Some(p), witness: WeakWitness::OneProc(c) });
        }
    }
    Ok(WeakVerdict::Sound)
}
