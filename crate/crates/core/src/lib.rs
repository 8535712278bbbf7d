//! Static analysis of negotiation diagrams: soundness by anti-patterns,
//! omitting games and restriction, races, data specifications, and a
//! state-space oracle for cross-checking.

pub mod data;
pub mod dot;
pub mod fixtures;
pub mod games;
pub mod generators;
pub mod graph;
pub mod model;
pub mod ngt;
pub mod oracle;
pub mod par;
pub mod patterns;
pub mod races;
pub mod semantics;
pub mod weak;

pub use data::{DataNegotiation, DataSpec, Op, SpecKind};
pub use model::{classify, restrict, validate, ClassFlags, Negotiation, NodeId, ProcId, RawNegotiation, ResultId, Step};
pub use ngt::{emit_ngt, parse_ngt};
pub use oracle::{oracle_sound, OmitInstance, DEFAULT_BUDGET};
pub use patterns::{det_soundness, AntiPattern, DetVerdict};
pub use semantics::{Configuration, Run};
pub use weak::weak_soundness;
