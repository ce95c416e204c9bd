//! Governed protocol modification: candidate construction, invariant
//! validation, supermajority adoption, versioning, and rollback.
//!
//! A candidate revision is built by applying parameter deltas to the current
//! SECP version. Construction is permissive (aside from range checks on the
//! regret bound); whether a candidate may ever run is decided separately by
//! [`validate_invariants`]. Adoption requires the invariant report to pass
//! *and* an approval quorum; otherwise the current version is retained —
//! the rollback branch. Every stored version is content-hashed so rollback
//! can prove it restores the original bytes.

use crate::ids::{ModuleId, VersionId};
use crate::secp::{Round, SecpParams, TieBreakRule};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("version {0} is not an SECP version and cannot be revised")]
    NotModifiable(VersionId),
    #[error("rho delta {delta} takes rho from {current} to {candidate}, outside [0,1]")]
    RhoDeltaOutOfRange {
        current: f64,
        delta: f64,
        candidate: f64,
    },
    #[error("vote from unregistered module `{0}`")]
    UnregisteredVoter(ModuleId),
    #[error("quorum {quorum} outside [1, {modules}]")]
    QuorumOutOfRange { quorum: u32, modules: usize },
    #[error("version {0} already registered")]
    DuplicateVersion(VersionId),
    #[error("unknown version {0}")]
    UnknownVersion(VersionId),
    #[error("version {id} failed its hash check: stored {stored}, recomputed {recomputed}")]
    HashMismatch {
        id: VersionId,
        stored: String,
        recomputed: String,
    },
    #[error("version {0}: stored bytes differ from canonical serialization")]
    NotCanonical(VersionId),
    #[error("version store i/o at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("version store parse at {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// The coordination rule a protocol version denotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolKind {
    Unanimity,
    Scalar { tau: f64 },
    Secp { params: SecpParams },
}

/// A versioned, hashable description of one coordination rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolVersion {
    pub version_id: VersionId,
    #[serde(flatten)]
    pub kind: ProtocolKind,
    pub parent: Option<VersionId>,
    /// Change rationale, parameter deltas, expected effect.
    pub rationale: String,
    /// Structural declaration that this version's decision path runs only
    /// over proposals that passed the hard-constraint gate.
    pub feasibility_gated: bool,
    /// Hex SHA-256 of the canonical serialization of all other fields.
    pub content_hash: String,
}

#[derive(Serialize)]
struct HashView<'a> {
    version_id: VersionId,
    #[serde(flatten)]
    kind: &'a ProtocolKind,
    parent: Option<VersionId>,
    rationale: &'a str,
    feasibility_gated: bool,
}

fn hash_fields(
    version_id: VersionId,
    kind: &ProtocolKind,
    parent: Option<VersionId>,
    rationale: &str,
    feasibility_gated: bool,
) -> String {
    let view = HashView {
        version_id,
        kind,
        parent,
        rationale,
        feasibility_gated,
    };
    let bytes = serde_json::to_vec(&view).expect("protocol version serializes");
    hex::encode(sha2::Sha256::digest(&bytes))
}

use sha2::Digest;

impl ProtocolVersion {
    pub fn new(
        version_id: VersionId,
        kind: ProtocolKind,
        parent: Option<VersionId>,
        rationale: impl Into<String>,
    ) -> Self {
        let rationale = rationale.into();
        let content_hash = hash_fields(version_id, &kind, parent, &rationale, true);
        Self {
            version_id,
            kind,
            parent,
            rationale,
            feasibility_gated: true,
            content_hash,
        }
    }

    pub fn recompute_hash(&self) -> String {
        hash_fields(
            self.version_id,
            &self.kind,
            self.parent,
            &self.rationale,
            self.feasibility_gated,
        )
    }

    pub fn hash_is_consistent(&self) -> bool {
        self.recompute_hash() == self.content_hash
    }

    /// Canonical on-disk form: compact JSON of the full record.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("protocol version serializes")
    }
}

/// A module's vote on a candidate revision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Approve,
    Reject,
}

/// Parameter deltas a modification may carry. Schedule changes are full
/// replacements; the regret bound moves by a signed delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ParameterDeltas {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<Round>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<TieBreakRule>,
}

impl ParameterDeltas {
    pub fn is_empty(&self) -> bool {
        self.rho_delta.is_none() && self.schedule.is_none() && self.tie_break.is_none()
    }
}

/// A candidate revision: deltas, rationale, and the recorded module votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModificationProposal {
    pub candidate_id: String,
    pub proposers: Vec<ModuleId>,
    pub deltas: ParameterDeltas,
    pub rationale: String,
    #[serde(default)]
    pub votes: BTreeMap<ModuleId, Vote>,
}

/// Constructs the candidate version from the current one and the proposal's
/// deltas. Only SECP versions are modifiable. Construction does not check
/// the revision invariants; that is `validate_invariants`' job.
pub fn revise(
    current: &ProtocolVersion,
    proposal: &ModificationProposal,
) -> Result<ProtocolVersion, EvolutionError> {
    let params = match &current.kind {
        ProtocolKind::Secp { params } => params,
        _ => return Err(EvolutionError::NotModifiable(current.version_id)),
    };
    let mut params = params.clone();
    if let Some(delta) = proposal.deltas.rho_delta {
        let candidate_rho = params.rho + delta;
        if !(0.0..=1.0).contains(&candidate_rho) || candidate_rho.is_nan() {
            return Err(EvolutionError::RhoDeltaOutOfRange {
                current: params.rho,
                delta,
                candidate: candidate_rho,
            });
        }
        params.rho = candidate_rho;
    }
    if let Some(schedule) = &proposal.deltas.schedule {
        params.schedule = schedule.clone();
        params.t_max = schedule.len() as u32;
    }
    if let Some(tie_break) = proposal.deltas.tie_break {
        params.tie_break = tie_break;
    }
    let mut candidate = ProtocolVersion::new(
        current.version_id.next(),
        ProtocolKind::Secp { params },
        Some(current.version_id),
        proposal.rationale.clone(),
    );
    candidate.feasibility_gated = current.feasibility_gated;
    candidate.content_hash = candidate.recompute_hash();
    Ok(candidate)
}

/// Named invariant checks a candidate revision must pass before adoption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvReport {
    pub feasibility_gating: bool,
    pub bounded_termination: bool,
    pub non_scalar_structure: bool,
    pub versioned: bool,
    pub auditable: bool,
    pub pass: bool,
}

/// Evaluates the revision invariants on a candidate. Total: always returns
/// a report, never an error.
pub fn validate_invariants(candidate: &ProtocolVersion, module_count: usize) -> InvReport {
    let feasibility_gating = candidate.feasibility_gated;
    let (bounded_termination, non_scalar_structure) = match &candidate.kind {
        ProtocolKind::Secp { params } => (
            params.t_max >= 1 && params.t_max as usize == params.schedule.len(),
            params.validate(module_count).is_ok(),
        ),
        // Single-shot rules terminate trivially but are not non-scalar
        // five-component pipelines.
        _ => (true, false),
    };
    let versioned = candidate.parent.is_some()
        && candidate
            .parent
            .map(|p| candidate.version_id > p)
            .unwrap_or(false)
        && candidate.hash_is_consistent();
    let auditable = !candidate.rationale.trim().is_empty();
    let pass =
        feasibility_gating && bounded_termination && non_scalar_structure && versioned && auditable;
    InvReport {
        feasibility_gating,
        bounded_termination,
        non_scalar_structure,
        versioned,
        auditable,
        pass,
    }
}

/// Why a candidate was not adopted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionReason {
    InvariantsFailed,
    QuorumNotMet,
}

/// Outcome of the adoption vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AdoptionOutcome {
    Adopted {
        version: ProtocolVersion,
        approvals: u32,
        rejections: u32,
    },
    Retained {
        current: VersionId,
        approvals: u32,
        rejections: u32,
        reason: RetentionReason,
    },
}

impl AdoptionOutcome {
    pub fn adopted(&self) -> bool {
        matches!(self, AdoptionOutcome::Adopted { .. })
    }
}

/// Tallies votes and adopts the candidate iff the invariant report passes
/// and approvals meet the quorum. The invariant gate is non-compensable: no
/// vote count can adopt a failing candidate.
pub fn tally_and_adopt(
    current: &ProtocolVersion,
    candidate: ProtocolVersion,
    proposal: &ModificationProposal,
    inv: &InvReport,
    quorum: u32,
    roster: &[ModuleId],
) -> Result<AdoptionOutcome, EvolutionError> {
    if quorum < 1 || quorum as usize > roster.len() {
        return Err(EvolutionError::QuorumOutOfRange {
            quorum,
            modules: roster.len(),
        });
    }
    for voter in proposal.votes.keys() {
        if !roster.contains(voter) {
            return Err(EvolutionError::UnregisteredVoter(voter.clone()));
        }
    }
    let approvals = proposal
        .votes
        .values()
        .filter(|v| **v == Vote::Approve)
        .count() as u32;
    let rejections = proposal.votes.len() as u32 - approvals;
    if !inv.pass {
        return Ok(AdoptionOutcome::Retained {
            current: current.version_id,
            approvals,
            rejections,
            reason: RetentionReason::InvariantsFailed,
        });
    }
    if approvals < quorum {
        return Ok(AdoptionOutcome::Retained {
            current: current.version_id,
            approvals,
            rejections,
            reason: RetentionReason::QuorumNotMet,
        });
    }
    Ok(AdoptionOutcome::Adopted {
        version: candidate,
        approvals,
        rejections,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    version_id: VersionId,
    parent: Option<VersionId>,
    content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    active: VersionId,
    entries: Vec<ManifestEntry>,
}

/// Directory-backed version store: one canonical JSON file per version plus
/// a chain manifest. Single writer; historical versions are immutable.
pub struct VersionStore {
    dir: PathBuf,
    manifest: Manifest,
}

impl VersionStore {
    const MANIFEST: &'static str = "manifest.json";

    /// Creates a store rooted at `dir` with `genesis` as the active version.
    pub fn create(dir: &Path, genesis: &ProtocolVersion) -> Result<Self, EvolutionError> {
        std::fs::create_dir_all(dir).map_err(|source| EvolutionError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut store = Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                active: genesis.version_id,
                entries: Vec::new(),
            },
        };
        store.register(genesis)?;
        store.write_manifest()?;
        Ok(store)
    }

    /// Opens an existing store.
    pub fn open(dir: &Path) -> Result<Self, EvolutionError> {
        let path = dir.join(Self::MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|source| EvolutionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|source| EvolutionError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn active(&self) -> VersionId {
        self.manifest.active
    }

    pub fn version_ids(&self) -> Vec<VersionId> {
        self.manifest.entries.iter().map(|e| e.version_id).collect()
    }

    fn version_path(&self, id: VersionId) -> PathBuf {
        self.dir.join(format!("{}.json", id.0))
    }

    /// Persists a version. Its id must be new and its hash consistent.
    pub fn register(&mut self, version: &ProtocolVersion) -> Result<(), EvolutionError> {
        if self
            .manifest
            .entries
            .iter()
            .any(|e| e.version_id == version.version_id)
        {
            return Err(EvolutionError::DuplicateVersion(version.version_id));
        }
        if !version.hash_is_consistent() {
            return Err(EvolutionError::HashMismatch {
                id: version.version_id,
                stored: version.content_hash.clone(),
                recomputed: version.recompute_hash(),
            });
        }
        let path = self.version_path(version.version_id);
        std::fs::write(&path, version.canonical_bytes()).map_err(|source| EvolutionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.manifest.entries.push(ManifestEntry {
            version_id: version.version_id,
            parent: version.parent,
            content_hash: version.content_hash.clone(),
        });
        self.write_manifest()
    }

    /// Registers an adopted version and makes it active.
    pub fn adopt(&mut self, version: &ProtocolVersion) -> Result<(), EvolutionError> {
        self.register(version)?;
        self.manifest.active = version.version_id;
        self.write_manifest()
    }

    /// Loads a stored version, verifying byte-level canonical form and the
    /// content hash against both the record and the manifest.
    pub fn load(&self, id: VersionId) -> Result<ProtocolVersion, EvolutionError> {
        let entry = self
            .manifest
            .entries
            .iter()
            .find(|e| e.version_id == id)
            .ok_or(EvolutionError::UnknownVersion(id))?;
        let path = self.version_path(id);
        let bytes = std::fs::read(&path).map_err(|source| EvolutionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let version: ProtocolVersion =
            serde_json::from_slice(&bytes).map_err(|source| EvolutionError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        if version.canonical_bytes() != bytes {
            return Err(EvolutionError::NotCanonical(id));
        }
        let recomputed = version.recompute_hash();
        if recomputed != version.content_hash || recomputed != entry.content_hash {
            return Err(EvolutionError::HashMismatch {
                id,
                stored: entry.content_hash.clone(),
                recomputed,
            });
        }
        Ok(version)
    }

    /// Reverts the active version to a stored one, hash-verified. Rollback
    /// never synthesizes content: the returned version is the stored bytes.
    pub fn rollback(&mut self, to: VersionId) -> Result<ProtocolVersion, EvolutionError> {
        let version = self.load(to)?;
        self.manifest.active = to;
        self.write_manifest()?;
        Ok(version)
    }

    fn write_manifest(&self) -> Result<(), EvolutionError> {
        let path = self.dir.join(Self::MANIFEST);
        let bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, bytes).map_err(|source| EvolutionError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mids(n: usize) -> Vec<ModuleId> {
        (1..=n).map(|i| ModuleId::from(format!("m{i}").as_str())).collect()
    }

    fn secp_version(id: u64, rho: f64) -> ProtocolVersion {
        let params = SecpParams::new(
            rho,
            vec![
                Round { theta: 0.8, kappa: 4 },
                Round { theta: 0.7, kappa: 4 },
            ],
            6,
        )
        .unwrap();
        ProtocolVersion::new(
            VersionId(id),
            ProtocolKind::Secp { params },
            if id > 1 { Some(VersionId(id - 1)) } else { None },
            "baseline parameters",
        )
    }

    fn proposal_with(deltas: ParameterDeltas) -> ModificationProposal {
        ModificationProposal {
            candidate_id: "cand-1".to_owned(),
            proposers: mids(2),
            deltas,
            rationale: "relax the regret bound".to_owned(),
            votes: BTreeMap::new(),
        }
    }

    #[test]
    fn rho_delta_applies_arithmetically() {
        let current = secp_version(3, 0.30);
        let proposal = proposal_with(ParameterDeltas {
            rho_delta: Some(0.10),
            ..Default::default()
        });
        let candidate = revise(&current, &proposal).unwrap();
        // Oracle: re-read the serialized candidate.
        let reread: ProtocolVersion =
            serde_json::from_slice(&candidate.canonical_bytes()).unwrap();
        let rho = match reread.kind {
            ProtocolKind::Secp { params } => params.rho,
            _ => panic!("candidate must stay secp"),
        };
        assert!((rho - 0.40).abs() < 1e-12);
        assert_eq!(candidate.version_id, VersionId(4));
        assert_eq!(candidate.parent, Some(VersionId(3)));
        assert!(candidate.hash_is_consistent());
    }

    #[test]
    fn rho_delta_out_of_range_is_a_construction_error() {
        let current = secp_version(3, 0.95);
        let proposal = proposal_with(ParameterDeltas {
            rho_delta: Some(0.10),
            ..Default::default()
        });
        assert!(matches!(
            revise(&current, &proposal),
            Err(EvolutionError::RhoDeltaOutOfRange { .. })
        ));
    }

    #[test]
    fn empty_deltas_yield_trivial_revision() {
        let current = secp_version(3, 0.30);
        let candidate = revise(&current, &proposal_with(ParameterDeltas::default())).unwrap();
        assert_eq!(candidate.parent, Some(current.version_id));
        match (&candidate.kind, &current.kind) {
            (ProtocolKind::Secp { params: c }, ProtocolKind::Secp { params: p }) => {
                assert_eq!(c, p)
            }
            _ => panic!("kinds must match"),
        }
    }

    #[test]
    fn non_secp_versions_are_not_modifiable() {
        let scalar = ProtocolVersion::new(
            VersionId(2),
            ProtocolKind::Scalar { tau: 0.6 },
            None,
            "control rule",
        );
        assert!(matches!(
            revise(&scalar, &proposal_with(ParameterDeltas::default())),
            Err(EvolutionError::NotModifiable(_))
        ));
    }

    #[test]
    fn bad_schedule_is_constructed_then_rejected_by_invariants() {
        let current = secp_version(3, 0.30);
        // Tightens both coordinates at round 2: not a relaxation.
        let proposal = proposal_with(ParameterDeltas {
            schedule: Some(vec![
                Round { theta: 0.5, kappa: 2 },
                Round { theta: 0.8, kappa: 4 },
            ]),
            ..Default::default()
        });
        let candidate = revise(&current, &proposal).unwrap();
        let report = validate_invariants(&candidate, 6);
        assert!(!report.non_scalar_structure);
        assert!(!report.pass);
    }

    #[test]
    fn valid_candidate_passes_invariants() {
        let current = secp_version(3, 0.30);
        let proposal = proposal_with(ParameterDeltas {
            rho_delta: Some(0.05),
            ..Default::default()
        });
        let candidate = revise(&current, &proposal).unwrap();
        let report = validate_invariants(&candidate, 6);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn empty_schedule_fails_bounded_termination() {
        let current = secp_version(3, 0.30);
        let proposal = proposal_with(ParameterDeltas {
            schedule: Some(Vec::new()),
            ..Default::default()
        });
        let candidate = revise(&current, &proposal).unwrap();
        let report = validate_invariants(&candidate, 6);
        assert!(!report.bounded_termination);
        assert!(!report.pass);
    }

    #[test]
    fn scalar_candidate_fails_non_scalar_structure() {
        let candidate = ProtocolVersion::new(
            VersionId(4),
            ProtocolKind::Scalar { tau: 0.5 },
            Some(VersionId(3)),
            "collapse to scalar",
        );
        let report = validate_invariants(&candidate, 6);
        assert!(!report.non_scalar_structure);
        assert!(report.bounded_termination);
        assert!(!report.pass);
    }

    fn votes(approvals: usize, rejections: usize) -> BTreeMap<ModuleId, Vote> {
        let roster = mids(approvals + rejections);
        roster
            .iter()
            .enumerate()
            .map(|(i, m)| {
                (
                    m.clone(),
                    if i < approvals { Vote::Approve } else { Vote::Reject },
                )
            })
            .collect()
    }

    #[test]
    fn five_of_six_with_passing_invariants_adopts() {
        let current = secp_version(3, 0.25);
        let mut proposal = proposal_with(ParameterDeltas {
            rho_delta: Some(0.10),
            ..Default::default()
        });
        proposal.votes = votes(5, 1);
        let candidate = revise(&current, &proposal).unwrap();
        let inv = validate_invariants(&candidate, 6);
        let outcome =
            tally_and_adopt(&current, candidate, &proposal, &inv, 4, &mids(6)).unwrap();
        match outcome {
            AdoptionOutcome::Adopted { approvals, rejections, version } => {
                assert_eq!((approvals, rejections), (5, 1));
                assert_eq!(version.version_id, VersionId(4));
            }
            other => panic!("expected adoption, got {other:?}"),
        }
    }

    #[test]
    fn exactly_quorum_adopts() {
        let current = secp_version(3, 0.25);
        let mut proposal = proposal_with(ParameterDeltas::default());
        proposal.votes = votes(4, 2);
        let candidate = revise(&current, &proposal).unwrap();
        let inv = validate_invariants(&candidate, 6);
        assert!(tally_and_adopt(&current, candidate, &proposal, &inv, 4, &mids(6))
            .unwrap()
            .adopted());
    }

    #[test]
    fn unanimous_votes_cannot_override_failed_invariants() {
        let current = secp_version(3, 0.25);
        let mut proposal = proposal_with(ParameterDeltas {
            schedule: Some(Vec::new()),
            ..Default::default()
        });
        proposal.votes = votes(6, 0);
        let candidate = revise(&current, &proposal).unwrap();
        let inv = validate_invariants(&candidate, 6);
        let outcome =
            tally_and_adopt(&current, candidate, &proposal, &inv, 4, &mids(6)).unwrap();
        match outcome {
            AdoptionOutcome::Retained { reason, .. } => {
                assert_eq!(reason, RetentionReason::InvariantsFailed)
            }
            other => panic!("expected retention, got {other:?}"),
        }
    }

    #[test]
    fn below_quorum_retains_current() {
        let current = secp_version(3, 0.25);
        let mut proposal = proposal_with(ParameterDeltas::default());
        proposal.votes = votes(3, 3);
        let candidate = revise(&current, &proposal).unwrap();
        let inv = validate_invariants(&candidate, 6);
        let outcome =
            tally_and_adopt(&current, candidate, &proposal, &inv, 4, &mids(6)).unwrap();
        match outcome {
            AdoptionOutcome::Retained { reason, current, .. } => {
                assert_eq!(reason, RetentionReason::QuorumNotMet);
                assert_eq!(current, VersionId(3));
            }
            other => panic!("expected retention, got {other:?}"),
        }
    }

    #[test]
    fn unregistered_voter_is_an_error() {
        let current = secp_version(3, 0.25);
        let mut proposal = proposal_with(ParameterDeltas::default());
        proposal.votes = votes(6, 1); // 7 voters against a 6-module roster
        let candidate = revise(&current, &proposal).unwrap();
        let inv = validate_invariants(&candidate, 6);
        assert!(matches!(
            tally_and_adopt(&current, candidate, &proposal, &inv, 4, &mids(6)),
            Err(EvolutionError::UnregisteredVoter(_))
        ));
    }

    #[test]
    fn store_round_trips_and_rolls_back() {
        let dir = tempfile::tempdir().unwrap();
        let v1 = secp_version(1, 0.25);
        let mut store = VersionStore::create(dir.path(), &v1).unwrap();
        let proposal = proposal_with(ParameterDeltas {
            rho_delta: Some(0.10),
            ..Default::default()
        });
        let v2 = revise(&v1, &proposal).unwrap();
        store.adopt(&v2).unwrap();
        assert_eq!(store.active(), VersionId(2));

        let restored = store.rollback(VersionId(1)).unwrap();
        assert_eq!(store.active(), VersionId(1));
        assert_eq!(restored, v1);
        assert_eq!(restored.canonical_bytes(), v1.canonical_bytes());
    }

    #[test]
    fn rollback_to_unknown_version_errors() {
        let dir = tempfile::tempdir().unwrap();
        let v1 = secp_version(1, 0.25);
        let mut store = VersionStore::create(dir.path(), &v1).unwrap();
        assert!(matches!(
            store.rollback(VersionId(7)),
            Err(EvolutionError::UnknownVersion(_))
        ));
    }

    #[test]
    fn tampered_store_is_detected_by_hash_check() {
        let dir = tempfile::tempdir().unwrap();
        let v1 = secp_version(1, 0.25);
        let mut store = VersionStore::create(dir.path(), &v1).unwrap();
        // Flip one byte in the stored serialization.
        let path = dir.path().join("1.json");
        let mut bytes = std::fs::read(&path).unwrap();
        let idx = bytes.len() / 2;
        bytes[idx] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        let err = store.rollback(VersionId(1));
        assert!(
            matches!(
                err,
                Err(EvolutionError::HashMismatch { .. })
                    | Err(EvolutionError::NotCanonical(_))
                    | Err(EvolutionError::Parse { .. })
            ),
            "tampering must be detected, got {err:?}"
        );
    }
}
