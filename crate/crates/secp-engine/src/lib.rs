//! Deterministic coordination-protocol engine.
//!
//! A fixed set of consensus-design proposals is screened by a hard-constraint
//! gate, scored by heterogeneous decision modules through deterministic
//! questionnaires, and then decided under one of four aggregation regimes:
//!
//! - unanimous acceptance with mutual veto,
//! - equal-weight scalar aggregation against a threshold `tau`,
//! - SECP v1.0: a five-component non-scalar pipeline (Pareto filter,
//!   minimax-regret screen, multi-round deliberation with an adaptive
//!   support schedule, constructive-objection resolution, bounded
//!   termination),
//! - SECP v2.0: the same pipeline under a revised parameter set adopted
//!   through a governed modification step (invariant validation plus
//!   supermajority approval, with rollback).
//!
//! Every gate report, assessment, decision, transcript, and protocol change
//! is appended to a hash-chained, write-once audit log that supports tamper
//! detection and full session replay.
//!
//! The engine is strictly deterministic: equal inputs produce bit-identical
//! decisions, reports, and digests.

pub mod audit;
pub mod evaluator;
pub mod evolution;
pub mod gate;
pub mod ids;
pub mod protocol;
pub mod rubric;
pub mod secp;
pub mod session;

pub use ids::{ModuleId, ProposalId, QuestionId, VersionId};
