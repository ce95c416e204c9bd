//! Proposal data model and the hard-constraint gate.
//!
//! Every coordination regime operates only on proposals that pass the joint
//! feasibility predicate `H = H1 ∧ H2 ∧ H3 ∧ H4`:
//!
//! - H1 (Byzantine tolerance): the declared fault model implies `n >= 3f + 1`
//!   and the safety/liveness attestations confirm the tolerance claim,
//! - H2 (message complexity): declared polynomial degree of message growth
//!   is at most 2,
//! - H3 (formal verification): safety and liveness proof attestations pass,
//! - H4 (explainability): the operational explanation is at most 500 words.
//!
//! Semantic safety/liveness checking and proof checking are external to this
//! engine; their outcomes arrive as attestations on the proposal artifact.

use crate::ids::ProposalId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

/// Word budget for the operational explanation (H4).
pub const MAX_EXPLANATION_WORDS: usize = 500;

/// Maximum declared polynomial degree of message growth (H2: O(n^2)).
pub const MAX_MSG_COMPLEXITY_DEGREE: u32 = 2;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("duplicate proposal id `{0}` in proposal set")]
    DuplicateId(ProposalId),
    #[error("proposal id must be non-empty")]
    EmptyId,
    #[error("proposal `{id}`: fault model coefficient a must be >= 1, got {a}")]
    InvalidFaultModel { id: ProposalId, a: u32 },
    #[error("failed to read proposal bundle {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse proposal bundle {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Outcome of an external proof check or tolerance attestation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attestation {
    Pass,
    Fail,
    Absent,
}

impl Attestation {
    pub fn passed(self) -> bool {
        matches!(self, Attestation::Pass)
    }
}

/// Declared Byzantine tolerance as a linear replica bound `n >= a*f + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultModel {
    pub a: u32,
    pub b: u32,
}

impl FaultModel {
    /// The classical resilience bound: the declaration implies `3f + 1 <= n`.
    pub fn implies_classical_bound(self) -> bool {
        self.a >= 3 && self.b >= 1
    }
}

/// A consensus-design proposal treated as a data artifact, never executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: ProposalId,
    /// Generation-time label; carries no weight in evaluation.
    pub label: String,
    pub fault_model: FaultModel,
    /// Declared polynomial degree d of message growth Msg(n) = O(n^d).
    pub msg_complexity_degree: u32,
    pub safety_attestation: Attestation,
    pub liveness_attestation: Attestation,
    /// Operational explanation text, subject to the word budget.
    pub explanation: String,
}

/// Per-predicate result of the hard-constraint gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardConstraintReport {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
    pub joint: bool,
    pub word_count: usize,
}

/// Counts maximal whitespace-separated tokens. No punctuation stripping.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Evaluates H1..H4 on a proposal. Total over valid proposals.
pub fn check_hard_constraints(p: &Proposal) -> HardConstraintReport {
    let attested = p.safety_attestation.passed() && p.liveness_attestation.passed();
    let h1 = p.fault_model.implies_classical_bound() && attested;
    let h2 = p.msg_complexity_degree <= MAX_MSG_COMPLEXITY_DEGREE;
    let h3 = attested;
    let wc = word_count(&p.explanation);
    let h4 = wc <= MAX_EXPLANATION_WORDS;
    HardConstraintReport {
        h1,
        h2,
        h3,
        h4,
        joint: h1 && h2 && h3 && h4,
        word_count: wc,
    }
}

/// Returns the feasible subset (joint = true), order-stable by id.
///
/// Duplicate ids signal a malformed set.
pub fn filter_feasible(proposals: &[Proposal]) -> Result<Vec<Proposal>, GateError> {
    validate_ids(proposals)?;
    let mut feasible: Vec<Proposal> = proposals
        .iter()
        .filter(|p| check_hard_constraints(p).joint)
        .cloned()
        .collect();
    feasible.sort_by(|x, y| x.id.cmp(&y.id));
    Ok(feasible)
}

fn validate_ids(proposals: &[Proposal]) -> Result<(), GateError> {
    let mut seen = BTreeSet::new();
    for p in proposals {
        if p.id.as_str().is_empty() {
            return Err(GateError::EmptyId);
        }
        if !seen.insert(p.id.clone()) {
            return Err(GateError::DuplicateId(p.id.clone()));
        }
        if p.fault_model.a < 1 {
            return Err(GateError::InvalidFaultModel {
                id: p.id.clone(),
                a: p.fault_model.a,
            });
        }
    }
    Ok(())
}

/// One proposal set, as shipped in a bundle file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposalBundle {
    pub proposals: Vec<Proposal>,
}

impl ProposalBundle {
    /// Loads and validates a bundle from a JSON file.
    pub fn load(path: &Path) -> Result<Self, GateError> {
        let text = std::fs::read_to_string(path).map_err(|source| GateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let bundle: ProposalBundle =
            serde_json::from_str(&text).map_err(|source| GateError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        validate_ids(&bundle.proposals)?;
        Ok(bundle)
    }
}
