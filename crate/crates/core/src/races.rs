//! Co-occurrence and races in sound deterministic negotiations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{bfs_path, has_nonempty_path, local_reach_mask, LocalPath};
use crate::model::{Negotiation, NodeId};
use crate::oracle::OracleError;
use crate::patterns::{det_soundness, find_fork, Fork, PatternError};

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum RaceError {
    #[error("negotiation is not deterministic")]
    NotDeterministic,
    #[error("negotiation is not sound")]
    NotSound,
    #[error("negotiation is not acyclic")]
    NotAcyclic,
    #[error("fork search budget exceeded")]
    BudgetExceeded,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl From<PatternError> for RaceError {
    fn from(e: PatternError) -> Self {
        match e {
            PatternError::NotDeterministic => RaceError::NotDeterministic,
            PatternError::BudgetExceeded => RaceError::BudgetExceeded,
        }
    }
}

/// Why some initial run contains both nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoOccurrence {
    /// Shared domain: a local path between the two nodes.
    Path(LocalPath),
    Fork(Fork),
}

fn check_sound_det(neg: &Negotiation) -> Result<(), RaceError> {
    if !det_soundness(neg)?.is_sound() {
        return Err(RaceError::NotSound);
    }
    Ok(())
}

fn co_occur_unchecked(neg: &Negotiation, m: NodeId, n: NodeId) -> Result<Option<CoOccurrence>, RaceError> {
    let reach = local_reach_mask(neg, &[neg.init()]);
    if !reach[m.index()] || !reach[n.index()] {
        return Ok(None);
    }
    if let Some(f) = find_fork(neg, Some((m, n)), false)? {
        return Ok(Some(CoOccurrence::Fork(f)));
    }
    if neg.dom(m).iter().any(|p| neg.in_dom(n, *p)) {
        let path = |a: NodeId, b: NodeId| bfs_path(neg, &[a], |_| true, |_: &_| true, |x| x == b);
        return Ok(path(m, n).or_else(|| path(n, m)).map(CoOccurrence::Path));
    }
    Ok(None)
}

/// Some initial run executes both m and n.
pub fn co_occur(neg: &Negotiation, m: NodeId, n: NodeId) -> Result<Option<CoOccurrence>, RaceError> {
    check_sound_det(neg)?;
    co_occur_unchecked(neg, m, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoRaceReason {
    SharedDomain,
    PathForward,
    PathBackward,
    NeverTogether,
}

impl NoRaceReason {
    pub fn name(self) -> &'static str {
        match self {
            NoRaceReason::SharedDomain => "shared-domain",
            NoRaceReason::PathForward => "local-path-m-to-n",
            NoRaceReason::PathBackward => "local-path-n-to-m",
            NoRaceReason::NeverTogether => "no-common-run",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RaceVerdict {
    Race(Fork),
    NoRace(NoRaceReason),
}

impl RaceVerdict {
    pub fn is_race(&self) -> bool {
        matches!(self, RaceVerdict::Race(_))
    }
}

/// Races of acyclic, deterministic, sound negotiations.
pub fn race(neg: &Negotiation, m: NodeId, n: NodeId) -> Result<RaceVerdict, RaceError> {
    if !neg.is_deterministic() {
        return Err(RaceError::NotDeterministic);
    }
    if !neg.is_acyclic() {
        return Err(RaceError::NotAcyclic);
    }
    check_sound_det(neg)?;
    race_unchecked(neg, m, n)
}

/// As `race`, with the preconditions vouched for by the caller.
pub fn race_unchecked(neg: &Negotiation, m: NodeId, n: NodeId) -> Result<RaceVerdict, RaceError> {
    if m == n || neg.dom(m).iter().any(|p| neg.in_dom(n, *p)) {
        return Ok(RaceVerdict::NoRace(NoRaceReason::SharedDomain));
    }
    if has_nonempty_path(neg, m, n) {
        return Ok(RaceVerdict::NoRace(NoRaceReason::PathForward));
    }
    if has_nonempty_path(neg, n, m) {
        return Ok(RaceVerdict::NoRace(NoRaceReason::PathBackward));
    }
    match co_occur_unchecked(neg, m, n)? {
        Some(CoOccurrence::Fork(f)) => Ok(RaceVerdict::Race(f)),
        _ => Ok(RaceVerdict::NoRace(NoRaceReason::NeverTogether)),
    }
}
