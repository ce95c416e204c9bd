//! Assessment records, decisions, and the two baseline coordination rules:
//! unanimous acceptance with mutual veto, and equal-weight scalar
//! aggregation against a threshold `tau`. Also the coverage machinery
//! shared by every regime.

use crate::ids::{ModuleId, ProposalId, VersionId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("no assessment record from module `{0}`")]
    MissingModule(ModuleId),
    #[error("duplicate assessment record from module `{0}`")]
    DuplicateModule(ModuleId),
    #[error("assessment from unregistered module `{0}`")]
    UnregisteredModule(ModuleId),
    #[error("assessment records name different proposals: `{0}` and `{1}`")]
    MixedProposals(ProposalId, ProposalId),
    #[error("score {score} from module `{module}` outside [0,1]")]
    ScoreOutOfRange { module: ModuleId, score: f64 },
    #[error("duplicate objection id `{objection}` in record from module `{module}`")]
    DuplicateObjection { module: ModuleId, objection: String },
    #[error("threshold tau = {0} outside [0,1]")]
    TauOutOfRange(f64),
    #[error("empty module set")]
    EmptyModuleSet,
    #[error("missing decision for proposal `{0}`")]
    MissingDecision(ProposalId),
    #[error("duplicate decision for proposal `{0}`")]
    DuplicateDecision(ProposalId),
    #[error("relative coverage change undefined: baseline coverage is 0 (absolute delta {delta})")]
    UndefinedRelativeChange { delta: i64 },
}

/// Binary module recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recommendation {
    Accept,
    Veto,
}

/// Lifecycle of an objection. Transitions are monotone: once withdrawn or
/// acknowledged, an objection never reopens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectionStatus {
    Open,
    Withdrawn,
    RebuttedAcknowledged,
}

impl ObjectionStatus {
    pub fn is_resolved(self) -> bool {
        !matches!(self, ObjectionStatus::Open)
    }
}

/// A recorded objection against a proposal. Only constructive objections
/// (concrete, checkable deficiencies) are decision-relevant downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objection {
    pub id: String,
    pub description: String,
    /// Locator into the proposal artifact the objection refers to.
    pub reference: String,
    pub constructive: bool,
    pub status: ObjectionStatus,
}

/// One module's assessment of one proposal: score, recommendation, and
/// objections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub module_id: ModuleId,
    pub proposal_id: ProposalId,
    pub score: f64,
    pub recommendation: Recommendation,
    pub objections: Vec<Objection>,
}

impl AssessmentRecord {
    /// Boundary validation: score range and objection-id uniqueness.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(0.0..=1.0).contains(&self.score) || self.score.is_nan() {
            return Err(ProtocolError::ScoreOutOfRange {
                module: self.module_id.clone(),
                score: self.score,
            });
        }
        let mut seen = BTreeSet::new();
        for o in &self.objections {
            if !seen.insert(&o.id) {
                return Err(ProtocolError::DuplicateObjection {
                    module: self.module_id.clone(),
                    objection: o.id.clone(),
                });
            }
        }
        Ok(())
    }
}

/// The validated set of assessment records for a single proposal: exactly
/// one record per registered module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalAssessments {
    pub proposal_id: ProposalId,
    pub records: Vec<AssessmentRecord>,
}

impl ProposalAssessments {
    pub fn new(
        roster: &[ModuleId],
        records: Vec<AssessmentRecord>,
    ) -> Result<Self, ProtocolError> {
        if roster.is_empty() {
            return Err(ProtocolError::EmptyModuleSet);
        }
        let proposal_id = match records.first() {
            Some(r) => r.proposal_id.clone(),
            None => return Err(ProtocolError::MissingModule(roster[0].clone())),
        };
        let mut seen = BTreeSet::new();
        for r in &records {
            r.validate()?;
            if r.proposal_id != proposal_id {
                return Err(ProtocolError::MixedProposals(
                    proposal_id,
                    r.proposal_id.clone(),
                ));
            }
            if !roster.contains(&r.module_id) {
                return Err(ProtocolError::UnregisteredModule(r.module_id.clone()));
            }
            if !seen.insert(r.module_id.clone()) {
                return Err(ProtocolError::DuplicateModule(r.module_id.clone()));
            }
        }
        for m in roster {
            if !seen.contains(m) {
                return Err(ProtocolError::MissingModule(m.clone()));
            }
        }
        Ok(Self {
            proposal_id,
            records,
        })
    }

    pub fn module_ids(&self) -> Vec<ModuleId> {
        self.records.iter().map(|r| r.module_id.clone()).collect()
    }
}

/// Accept/Reject outcome of a coordination protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Accept,
    Reject,
}

/// One step in a decision's rationale trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    VetoRecorded { module: ModuleId },
    UnanimousSupport,
    GlobalScore { mean: f64, tau: f64 },
    ParetoDominated { by: ProposalId },
    ParetoSurvived,
    RegretExceeded { r_max: f64, rho: f64 },
    RegretWithinBound { r_max: f64, rho: f64 },
    SupportQualified {
        round: u32,
        supporters: u32,
        kappa: u32,
        theta: f64,
    },
    SupportNeverQualified { rounds: u32 },
    ObjectionsUnresolvedAtQualifyingRounds { rounds: Vec<u32> },
    AcceptedAtRound { round: u32 },
}

/// A protocol's decision on one proposal, with the version that produced it,
/// the modules whose assessments it consumed, and a rationale trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub proposal_id: ProposalId,
    pub outcome: Outcome,
    pub protocol_version_id: VersionId,
    pub considered_modules: Vec<ModuleId>,
    pub rationale_trace: Vec<TraceEvent>,
}

/// Coverage of a protocol run: the accepted proposals and their count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub protocol_version_id: VersionId,
    pub accepted_ids: Vec<ProposalId>,
    pub delta_s: u64,
}

/// Unanimous acceptance with mutual veto: accept iff no module vetoes.
pub fn decide_unanimity(assessments: &ProposalAssessments, version: VersionId) -> Decision {
    let vetoes: Vec<&AssessmentRecord> = assessments
        .records
        .iter()
        .filter(|r| r.recommendation == Recommendation::Veto)
        .collect();
    let mut trace = Vec::new();
    let outcome = if vetoes.is_empty() {
        trace.push(TraceEvent::UnanimousSupport);
        Outcome::Accept
    } else {
        for v in &vetoes {
            trace.push(TraceEvent::VetoRecorded {
                module: v.module_id.clone(),
            });
        }
        Outcome::Reject
    };
    Decision {
        proposal_id: assessments.proposal_id.clone(),
        outcome,
        protocol_version_id: version,
        considered_modules: assessments.module_ids(),
        rationale_trace: trace,
    }
}

/// Equal-weight mean of the module scores, accumulated in record order.
pub fn global_score(assessments: &ProposalAssessments) -> f64 {
    let mut sum = 0.0;
    for r in &assessments.records {
        sum += r.score;
    }
    sum / assessments.records.len() as f64
}

/// Scalar control rule: accept iff the equal-weight mean is >= tau.
/// The inequality is weak, so a mean exactly at the threshold accepts.
pub fn decide_scalar(
    assessments: &ProposalAssessments,
    tau: f64,
    version: VersionId,
) -> Result<Decision, ProtocolError> {
    if !(0.0..=1.0).contains(&tau) || tau.is_nan() {
        return Err(ProtocolError::TauOutOfRange(tau));
    }
    let mean = global_score(assessments);
    Ok(Decision {
        proposal_id: assessments.proposal_id.clone(),
        outcome: if mean >= tau {
            Outcome::Accept
        } else {
            Outcome::Reject
        },
        protocol_version_id: version,
        considered_modules: assessments.module_ids(),
        rationale_trace: vec![TraceEvent::GlobalScore { mean, tau }],
    })
}

/// Builds the coverage report for one protocol run: exactly one decision per
/// feasible proposal, accepted ids sorted by proposal id.
pub fn coverage(
    feasible_ids: &[ProposalId],
    decisions: &[Decision],
    version: VersionId,
) -> Result<CoverageReport, ProtocolError> {
    let mut seen = BTreeSet::new();
    for d in decisions {
        if !seen.insert(d.proposal_id.clone()) {
            return Err(ProtocolError::DuplicateDecision(d.proposal_id.clone()));
        }
    }
    for id in feasible_ids {
        if !seen.contains(id) {
            return Err(ProtocolError::MissingDecision(id.clone()));
        }
    }
    let mut accepted_ids: Vec<ProposalId> = decisions
        .iter()
        .filter(|d| d.outcome == Outcome::Accept)
        .map(|d| d.proposal_id.clone())
        .collect();
    accepted_ids.sort();
    Ok(CoverageReport {
        protocol_version_id: version,
        delta_s: accepted_ids.len() as u64,
        accepted_ids,
    })
}

/// Relative coverage change in percent: `100 * (after - before) / before`.
///
/// Undefined when the baseline coverage is zero; the error carries the
/// absolute delta to report instead.
pub fn relative_coverage_change(
    before: &CoverageReport,
    after: &CoverageReport,
) -> Result<f64, ProtocolError> {
    let delta = after.delta_s as i64 - before.delta_s as i64;
    if before.delta_s == 0 {
        return Err(ProtocolError::UndefinedRelativeChange { delta });
    }
    Ok((100 * delta) as f64 / before.delta_s as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn roster(n: usize) -> Vec<ModuleId> {
        (1..=n).map(|i| ModuleId::from(format!("m{i}").as_str())).collect()
    }

    pub(crate) fn assessments_from_scores(
        proposal: &str,
        scores: &[f64],
        vetoes: &[usize],
    ) -> ProposalAssessments {
        let roster = roster(scores.len());
        let records = scores
            .iter()
            .enumerate()
            .map(|(i, s)| AssessmentRecord {
                module_id: roster[i].clone(),
                proposal_id: proposal.into(),
                score: *s,
                recommendation: if vetoes.contains(&i) {
                    Recommendation::Veto
                } else {
                    Recommendation::Accept
                },
                objections: Vec::new(),
            })
            .collect();
        ProposalAssessments::new(&roster, records).unwrap()
    }

    #[test]
    fn unanimity_accepts_when_all_accept() {
        let a = assessments_from_scores("p1", &[1.0; 6], &[]);
        let d = decide_unanimity(&a, VersionId(1));
        assert_eq!(d.outcome, Outcome::Accept);
        assert_eq!(d.rationale_trace, vec![TraceEvent::UnanimousSupport]);
    }

    #[test]
    fn single_veto_rejects() {
        let a = assessments_from_scores("p1", &[1.0; 6], &[3]);
        let d = decide_unanimity(&a, VersionId(1));
        assert_eq!(d.outcome, Outcome::Reject);
        assert_eq!(
            d.rationale_trace,
            vec![TraceEvent::VetoRecorded { module: "m4".into() }]
        );
    }

    #[test]
    fn missing_module_record_rejected() {
        let roster = roster(6);
        let records = vec![AssessmentRecord {
            module_id: "m1".into(),
            proposal_id: "p1".into(),
            score: 0.5,
            recommendation: Recommendation::Accept,
            objections: Vec::new(),
        }];
        assert!(matches!(
            ProposalAssessments::new(&roster, records),
            Err(ProtocolError::MissingModule(_))
        ));
    }

    #[test]
    fn duplicate_module_record_rejected() {
        let roster = roster(1);
        let record = AssessmentRecord {
            module_id: "m1".into(),
            proposal_id: "p1".into(),
            score: 0.5,
            recommendation: Recommendation::Accept,
            objections: Vec::new(),
        };
        assert!(matches!(
            ProposalAssessments::new(&roster, vec![record.clone(), record]),
            Err(ProtocolError::DuplicateModule(_))
        ));
    }

    #[test]
    fn global_score_is_equal_weight_mean() {
        let a = assessments_from_scores("p1", &[1.0; 6], &[]);
        assert_eq!(global_score(&a), 1.0);
        let b = assessments_from_scores("p1", &[0.0; 6], &[]);
        assert_eq!(global_score(&b), 0.0);
        // Independent summation oracle for the mixed case.
        let scores = [0.9, 0.3, 0.6, 0.6, 0.6, 0.6];
        let c = assessments_from_scores("p1", &scores, &[]);
        let oracle: f64 = scores.iter().rev().sum::<f64>() / 6.0;
        assert!((global_score(&c) - 0.6).abs() < 1e-12);
        assert!((global_score(&c) - oracle).abs() < 1e-12);
    }

    #[test]
    fn scalar_accepts_above_threshold() {
        let a = assessments_from_scores("p1", &[0.61; 6], &[]);
        let d = decide_scalar(&a, 0.6, VersionId(2)).unwrap();
        assert_eq!(d.outcome, Outcome::Accept);
    }

    #[test]
    fn scalar_accepts_at_exact_threshold() {
        // Constructed mean-0.6 set; the weak inequality must accept.
        let a = assessments_from_scores("p1", &[0.9, 0.3, 0.6, 0.6, 0.6, 0.6], &[]);
        let d = decide_scalar(&a, 0.6, VersionId(2)).unwrap();
        assert_eq!(d.outcome, Outcome::Accept);
        // Exactly representable variant.
        let b = assessments_from_scores("p1", &[0.5; 6], &[]);
        assert_eq!(
            decide_scalar(&b, 0.5, VersionId(2)).unwrap().outcome,
            Outcome::Accept
        );
    }

    #[test]
    fn scalar_rejects_below_threshold() {
        let a = assessments_from_scores("p1", &[0.55; 6], &[]);
        let d = decide_scalar(&a, 0.6, VersionId(2)).unwrap();
        assert_eq!(d.outcome, Outcome::Reject);
    }

    #[test]
    fn scalar_rejects_bad_tau() {
        let a = assessments_from_scores("p1", &[0.5; 6], &[]);
        assert!(decide_scalar(&a, 1.2, VersionId(2)).is_err());
        assert!(decide_scalar(&a, -0.1, VersionId(2)).is_err());
    }

    #[test]
    fn scalar_compensates_a_zero_score() {
        // One module scores 0 yet the proposal clears tau = 0.6.
        let a = assessments_from_scores("p1", &[0.0, 0.8, 0.8, 0.8, 0.8, 0.8], &[]);
        let d = decide_scalar(&a, 0.6, VersionId(2)).unwrap();
        assert_eq!(d.outcome, Outcome::Accept);
    }

    fn decision(p: &str, outcome: Outcome) -> Decision {
        Decision {
            proposal_id: p.into(),
            outcome,
            protocol_version_id: VersionId(1),
            considered_modules: roster(6),
            rationale_trace: Vec::new(),
        }
    }

    #[test]
    fn coverage_counts_accepts_and_sorts_ids() {
        let ids: Vec<ProposalId> = ["b", "a", "c", "d", "e", "f"]
            .iter()
            .map(|s| ProposalId::from(*s))
            .collect();
        let decisions = vec![
            decision("b", Outcome::Accept),
            decision("a", Outcome::Reject),
            decision("c", Outcome::Accept),
            decision("d", Outcome::Reject),
            decision("e", Outcome::Reject),
            decision("f", Outcome::Reject),
        ];
        let report = coverage(&ids, &decisions, VersionId(1)).unwrap();
        assert_eq!(report.delta_s, 2);
        assert_eq!(
            report.accepted_ids,
            vec![ProposalId::from("b"), ProposalId::from("c")]
        );
    }

    #[test]
    fn coverage_all_rejects_is_zero() {
        let ids = vec![ProposalId::from("a")];
        let decisions = vec![decision("a", Outcome::Reject)];
        assert_eq!(coverage(&ids, &decisions, VersionId(1)).unwrap().delta_s, 0);
    }

    #[test]
    fn coverage_missing_decision_is_error() {
        let ids = vec![ProposalId::from("a"), ProposalId::from("b")];
        let decisions = vec![decision("a", Outcome::Accept)];
        assert!(matches!(
            coverage(&ids, &decisions, VersionId(1)),
            Err(ProtocolError::MissingDecision(_))
        ));
    }

    fn report(delta: u64) -> CoverageReport {
        CoverageReport {
            protocol_version_id: VersionId(1),
            accepted_ids: Vec::new(),
            delta_s: delta,
        }
    }

    #[test]
    fn relative_change_arithmetic() {
        assert_eq!(
            relative_coverage_change(&report(2), &report(3)).unwrap(),
            50.0
        );
        assert_eq!(
            relative_coverage_change(&report(3), &report(3)).unwrap(),
            0.0
        );
        assert_eq!(
            relative_coverage_change(&report(4), &report(2)).unwrap(),
            -50.0
        );
    }

    #[test]
    fn relative_change_undefined_for_zero_baseline() {
        match relative_coverage_change(&report(0), &report(4)) {
            Err(ProtocolError::UndefinedRelativeChange { delta }) => assert_eq!(delta, 4),
            other => panic!("expected undefined relative change, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_score_rejected() {
        let record = AssessmentRecord {
            module_id: "m1".into(),
            proposal_id: "p1".into(),
            score: 1.2,
            recommendation: Recommendation::Accept,
            objections: Vec::new(),
        };
        assert!(record.validate().is_err());
    }
}
