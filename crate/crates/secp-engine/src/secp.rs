//! The SECP decision pipeline: five components applied in sequence.
//!
//! 1. Pareto filter — a proposal dominated by another feasible proposal is
//!    rejected.
//! 2. Minimax-regret screen — a proposal whose worst per-module shortfall
//!    against the best observed proposal exceeds the regret bound `rho` is
//!    rejected.
//! 3. Multi-round deliberation — a pre-specified schedule of support
//!    thresholds `(theta_t, kappa_t)` that weakly relaxes from round to
//!    round; a proposal qualifies in round `t` when at least `kappa_t`
//!    modules score it at or above `theta_t`.
//! 4. Constructive objections — acceptance requires every constructive
//!    objection to be withdrawn or rebutted-with-acknowledgment at the
//!    accepting round; non-constructive disagreement is ignored.
//! 5. Bounded termination — at most `t_max` rounds; no qualifying round
//!    means rejection.
//!
//! A proposal is accepted at the smallest round satisfying components 3 and
//! 4 jointly, provided components 1 and 2 passed. Rejection traces name the
//! first failing component in the fixed order Pareto, regret, support,
//! objections.
//!
//! Pareto dominance and regret are always computed over the full feasible
//! set, not over the survivors of earlier components.

use crate::ids::{ModuleId, ProposalId, VersionId};
use crate::protocol::{
    Decision, ObjectionStatus, Outcome, ProposalAssessments, TraceEvent,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SecpError {
    #[error("regret bound rho = {0} outside [0,1]")]
    RhoOutOfRange(f64),
    #[error("deliberation schedule is empty")]
    EmptySchedule,
    #[error("declared t_max {t_max} does not equal schedule length {len}")]
    TMaxMismatch { t_max: u32, len: usize },
    #[error("round {round}: support threshold theta = {theta} outside [0,1]")]
    ThetaOutOfRange { round: u32, theta: f64 },
    #[error("round {round}: required supporter count kappa = {kappa} outside [1, {modules}]")]
    KappaOutOfRange {
        round: u32,
        kappa: u32,
        modules: usize,
    },
    #[error(
        "schedule does not relax at round {round}: neither theta nor kappa is non-increasing"
    )]
    ScheduleNotRelaxing { round: u32 },
    #[error("score matrix is empty")]
    EmptyMatrix,
    #[error("score matrix incomplete: missing score for (`{module}`, `{proposal}`)")]
    IncompleteMatrix {
        module: ModuleId,
        proposal: ProposalId,
    },
    #[error("score {score} for (`{module}`, `{proposal}`) outside [0,1]")]
    ScoreOutOfRange {
        module: ModuleId,
        proposal: ProposalId,
        score: f64,
    },
    #[error("unknown proposal `{0}`")]
    UnknownProposal(ProposalId),
    #[error("duplicate proposal `{0}` in matrix")]
    DuplicateProposal(ProposalId),
    #[error("duplicate module `{0}` in matrix")]
    DuplicateModule(ModuleId),
    #[error("score vectors cover different module sets")]
    MismatchedModules,
    #[error("deliberation script for `{proposal}` references unknown objection `{module}/{objection}`")]
    UnknownObjection {
        proposal: ProposalId,
        module: ModuleId,
        objection: String,
    },
    #[error(
        "objection `{module}/{objection}` on `{proposal}` is already {status:?}; lifecycle is monotone"
    )]
    ObjectionNotOpen {
        proposal: ProposalId,
        module: ModuleId,
        objection: String,
        status: ObjectionStatus,
    },
    #[error("transcript has {rounds} rounds; round {requested} was never recorded")]
    RoundNotRecorded { rounds: usize, requested: u32 },
}

/// One deliberation round: support threshold and required supporter count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub theta: f64,
    pub kappa: u32,
}

/// Tie-breaking rule when several rounds would qualify. The engine accepts
/// at the earliest such round; the tag exists so a governed modification can
/// name the rule it proposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakRule {
    #[default]
    EarliestRound,
}

/// SECP protocol parameters: regret bound, deliberation schedule, round
/// limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecpParams {
    pub rho: f64,
    pub t_max: u32,
    pub schedule: Vec<Round>,
    #[serde(default)]
    pub tie_break: TieBreakRule,
}

impl SecpParams {
    pub fn new(rho: f64, schedule: Vec<Round>, module_count: usize) -> Result<Self, SecpError> {
        let params = SecpParams {
            rho,
            t_max: schedule.len() as u32,
            schedule,
            tie_break: TieBreakRule::EarliestRound,
        };
        params.validate(module_count)?;
        Ok(params)
    }

    /// Full parameter validation against a module roster size.
    ///
    /// The schedule must weakly relax at every consecutive pair: kappa
    /// non-increasing or theta non-increasing (at least one per pair).
    pub fn validate(&self, module_count: usize) -> Result<(), SecpError> {
        if !(0.0..=1.0).contains(&self.rho) || self.rho.is_nan() {
            return Err(SecpError::RhoOutOfRange(self.rho));
        }
        if self.schedule.is_empty() {
            return Err(SecpError::EmptySchedule);
        }
        if self.t_max as usize != self.schedule.len() {
            return Err(SecpError::TMaxMismatch {
                t_max: self.t_max,
                len: self.schedule.len(),
            });
        }
        for (i, r) in self.schedule.iter().enumerate() {
            let round = i as u32 + 1;
            if !(0.0..=1.0).contains(&r.theta) || r.theta.is_nan() {
                return Err(SecpError::ThetaOutOfRange {
                    round,
                    theta: r.theta,
                });
            }
            if r.kappa < 1 || r.kappa as usize > module_count {
                return Err(SecpError::KappaOutOfRange {
                    round,
                    kappa: r.kappa,
                    modules: module_count,
                });
            }
        }
        for (i, pair) in self.schedule.windows(2).enumerate() {
            if !(pair[1].kappa <= pair[0].kappa || pair[1].theta <= pair[0].theta) {
                return Err(SecpError::ScheduleNotRelaxing { round: i as u32 + 2 });
            }
        }
        Ok(())
    }
}

/// Complete per-(module, proposal) score matrix over the feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    modules: Vec<ModuleId>,
    proposals: Vec<ProposalId>,
    /// Row-major: `scores[p_idx * modules.len() + m_idx]`.
    scores: Vec<f64>,
}

impl ScoreMatrix {
    /// Builds a matrix from explicit rows, one row of module scores per
    /// proposal.
    pub fn from_rows(
        modules: Vec<ModuleId>,
        proposals: Vec<ProposalId>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, SecpError> {
        if modules.is_empty() || proposals.is_empty() {
            return Err(SecpError::EmptyMatrix);
        }
        let mut seen_m = std::collections::BTreeSet::new();
        for m in &modules {
            if !seen_m.insert(m.clone()) {
                return Err(SecpError::DuplicateModule(m.clone()));
            }
        }
        let mut seen_p = std::collections::BTreeSet::new();
        for p in &proposals {
            if !seen_p.insert(p.clone()) {
                return Err(SecpError::DuplicateProposal(p.clone()));
            }
        }
        let mut scores = Vec::with_capacity(modules.len() * proposals.len());
        for (p_idx, row) in rows.iter().enumerate() {
            if row.len() != modules.len() {
                return Err(SecpError::IncompleteMatrix {
                    module: modules[row.len().min(modules.len() - 1)].clone(),
                    proposal: proposals[p_idx].clone(),
                });
            }
            for (m_idx, s) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(s) || s.is_nan() {
                    return Err(SecpError::ScoreOutOfRange {
                        module: modules[m_idx].clone(),
                        proposal: proposals[p_idx].clone(),
                        score: *s,
                    });
                }
                scores.push(*s);
            }
        }
        if rows.len() != proposals.len() {
            return Err(SecpError::IncompleteMatrix {
                module: modules[0].clone(),
                proposal: proposals[rows.len().min(proposals.len() - 1)].clone(),
            });
        }
        Ok(Self {
            modules,
            proposals,
            scores,
        })
    }

    /// Builds the matrix from validated per-proposal assessment sets.
    pub fn from_assessments(
        roster: &[ModuleId],
        per_proposal: &[ProposalAssessments],
    ) -> Result<Self, SecpError> {
        let proposals: Vec<ProposalId> =
            per_proposal.iter().map(|a| a.proposal_id.clone()).collect();
        let rows: Vec<Vec<f64>> = per_proposal
            .iter()
            .map(|a| {
                roster
                    .iter()
                    .map(|m| {
                        a.records
                            .iter()
                            .find(|r| &r.module_id == m)
                            .map(|r| r.score)
                            .ok_or_else(|| SecpError::IncompleteMatrix {
                                module: m.clone(),
                                proposal: a.proposal_id.clone(),
                            })
                    })
                    .collect::<Result<Vec<f64>, SecpError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(roster.to_vec(), proposals, rows)
    }

    pub fn modules(&self) -> &[ModuleId] {
        &self.modules
    }

    pub fn proposals(&self) -> &[ProposalId] {
        &self.proposals
    }

    fn proposal_index(&self, p: &ProposalId) -> Result<usize, SecpError> {
        self.proposals
            .iter()
            .position(|x| x == p)
            .ok_or_else(|| SecpError::UnknownProposal(p.clone()))
    }

    /// The score vector of one proposal, in module order.
    pub fn vector(&self, p: &ProposalId) -> Result<&[f64], SecpError> {
        let idx = self.proposal_index(p)?;
        let n = self.modules.len();
        Ok(&self.scores[idx * n..(idx + 1) * n])
    }

    pub fn score(&self, p: &ProposalId, m: &ModuleId) -> Result<f64, SecpError> {
        let v = self.vector(p)?;
        let m_idx = self
            .modules
            .iter()
            .position(|x| x == m)
            .ok_or(SecpError::MismatchedModules)?;
        Ok(v[m_idx])
    }
}

/// Strict Pareto dominance over aligned score vectors: `q` dominates `p`
/// iff `q` is weakly better everywhere and strictly better somewhere.
pub fn dominates(q: &[f64], p: &[f64]) -> Result<bool, SecpError> {
    if q.len() != p.len() || q.is_empty() {
        return Err(SecpError::MismatchedModules);
    }
    let mut strict = false;
    for (a, b) in q.iter().zip(p.iter()) {
        if a < b {
            return Ok(false);
        }
        if a > b {
            strict = true;
        }
    }
    Ok(strict)
}

/// The non-dominated subset of the matrix, in matrix proposal order.
/// Never empty for a non-empty matrix.
pub fn pareto_filter(matrix: &ScoreMatrix) -> Result<Vec<ProposalId>, SecpError> {
    let mut survivors = Vec::new();
    for p in matrix.proposals() {
        if dominating_proposal(matrix, p)?.is_none() {
            survivors.push(p.clone());
        }
    }
    Ok(survivors)
}

/// The first proposal (in matrix order) that dominates `p`, if any.
pub fn dominating_proposal(
    matrix: &ScoreMatrix,
    p: &ProposalId,
) -> Result<Option<ProposalId>, SecpError> {
    let pv = matrix.vector(p)?;
    for q in matrix.proposals() {
        if q != p && dominates(matrix.vector(q)?, pv)? {
            return Ok(Some(q.clone()));
        }
    }
    Ok(None)
}

/// Per-module regret of `p` against the best observed proposal under each
/// module, and its maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub proposal_id: ProposalId,
    pub per_module: BTreeMap<ModuleId, f64>,
    pub r_max: f64,
}

pub fn regret(matrix: &ScoreMatrix, p: &ProposalId) -> Result<RegretReport, SecpError> {
    let pv = matrix.vector(p)?;
    let mut per_module = BTreeMap::new();
    let mut r_max = 0.0f64;
    for (m_idx, m) in matrix.modules().iter().enumerate() {
        let mut col_max = 0.0f64;
        for q in matrix.proposals() {
            let s = matrix.vector(q)?[m_idx];
            if s > col_max {
                col_max = s;
            }
        }
        let r = col_max - pv[m_idx];
        per_module.insert(m.clone(), r);
        if r > r_max {
            r_max = r;
        }
    }
    Ok(RegretReport {
        proposal_id: p.clone(),
        per_module,
        r_max,
    })
}

/// Proposals whose maximum regret is within `rho`, in matrix order.
pub fn regret_screen(matrix: &ScoreMatrix, rho: f64) -> Result<Vec<ProposalId>, SecpError> {
    if !(0.0..=1.0).contains(&rho) || rho.is_nan() {
        return Err(SecpError::RhoOutOfRange(rho));
    }
    let mut survivors = Vec::new();
    for p in matrix.proposals() {
        if regret(matrix, p)?.r_max <= rho {
            survivors.push(p.clone());
        }
    }
    Ok(survivors)
}

/// Modules supporting `p` at threshold `theta`: those scoring it at or
/// above the threshold, in roster order.
pub fn supporters(
    matrix: &ScoreMatrix,
    p: &ProposalId,
    theta: f64,
) -> Result<Vec<ModuleId>, SecpError> {
    let pv = matrix.vector(p)?;
    Ok(matrix
        .modules()
        .iter()
        .zip(pv.iter())
        .filter(|(_, s)| **s >= theta)
        .map(|(m, _)| m.clone())
        .collect())
}

/// State of one objection during deliberation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectionState {
    pub module: ModuleId,
    pub id: String,
    pub constructive: bool,
    pub status: ObjectionStatus,
}

/// True iff every constructive objection is resolved. Non-constructive
/// objections are ignored.
pub fn all_constructive_resolved(objections: &[ObjectionState]) -> bool {
    objections
        .iter()
        .filter(|o| o.constructive)
        .all(|o| o.status.is_resolved())
}

/// Resolution action scripted by the objecting module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectionAction {
    Withdraw,
    AcknowledgeRebuttal,
}

impl ObjectionAction {
    fn target_status(self) -> ObjectionStatus {
        match self {
            ObjectionAction::Withdraw => ObjectionStatus::Withdrawn,
            ObjectionAction::AcknowledgeRebuttal => ObjectionStatus::RebuttedAcknowledged,
        }
    }
}

/// One scripted objection-lifecycle event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub round: u32,
    pub module: ModuleId,
    pub objection: String,
    pub action: ObjectionAction,
}

/// Scripted deliberation input for one proposal. Events beyond the round
/// limit of the parameters in force are simply never reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DeliberationScript {
    pub events: Vec<ScriptEvent>,
}

/// Record of one executed deliberation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub theta: f64,
    pub kappa: u32,
    pub events: Vec<ScriptEvent>,
    pub support: Vec<ModuleId>,
    pub qualified: bool,
    pub objections_resolved: bool,
}

/// Per-proposal deliberation transcript: at most `t_max` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliberationTranscript {
    pub proposal_id: ProposalId,
    pub rounds: Vec<RoundRecord>,
    pub accepted_round: Option<u32>,
}

impl DeliberationTranscript {
    /// The recorded objection-resolution flag at round `t` (1-based).
    pub fn objections_resolved_at(&self, t: u32) -> Result<bool, SecpError> {
        self.rounds
            .iter()
            .find(|r| r.round == t)
            .map(|r| r.objections_resolved)
            .ok_or(SecpError::RoundNotRecorded {
                rounds: self.rounds.len(),
                requested: t,
            })
    }
}

/// Everything SECP needs to decide one feasible set: validated parameters,
/// the complete score matrix, per-proposal objections, and scripted
/// deliberation events.
pub struct SecpRun<'a> {
    pub params: &'a SecpParams,
    pub matrix: &'a ScoreMatrix,
    pub objections: &'a BTreeMap<ProposalId, Vec<ObjectionState>>,
    pub scripts: &'a BTreeMap<ProposalId, DeliberationScript>,
}

/// Collects initial objection states for each proposal from its assessments.
pub fn objection_states(
    per_proposal: &[ProposalAssessments],
) -> BTreeMap<ProposalId, Vec<ObjectionState>> {
    per_proposal
        .iter()
        .map(|a| {
            let states = a
                .records
                .iter()
                .flat_map(|r| {
                    r.objections.iter().map(|o| ObjectionState {
                        module: r.module_id.clone(),
                        id: o.id.clone(),
                        constructive: o.constructive,
                        status: o.status,
                    })
                })
                .collect();
            (a.proposal_id.clone(), states)
        })
        .collect()
}

/// Decides every proposal in the matrix under the given parameters.
/// Returns decisions and transcripts in matrix proposal order.
pub fn decide_secp(
    run: &SecpRun<'_>,
    version: VersionId,
) -> Result<Vec<(Decision, DeliberationTranscript)>, SecpError> {
    run.params.validate(run.matrix.modules().len())?;
    let mut out = Vec::new();
    for p in run.matrix.proposals() {
        out.push(decide_one(run, p, version)?);
    }
    Ok(out)
}

fn decide_one(
    run: &SecpRun<'_>,
    p: &ProposalId,
    version: VersionId,
) -> Result<(Decision, DeliberationTranscript), SecpError> {
    let modules = run.matrix.modules().to_vec();
    let mut trace = Vec::new();
    let mut transcript = DeliberationTranscript {
        proposal_id: p.clone(),
        rounds: Vec::new(),
        accepted_round: None,
    };
    let reject = |trace: Vec<TraceEvent>, transcript: DeliberationTranscript| {
        Ok((
            Decision {
                proposal_id: p.clone(),
                outcome: Outcome::Reject,
                protocol_version_id: version,
                considered_modules: modules.clone(),
                rationale_trace: trace,
            },
            transcript,
        ))
    };

    // Component 1: Pareto filter.
    if let Some(by) = dominating_proposal(run.matrix, p)? {
        trace.push(TraceEvent::ParetoDominated { by });
        return reject(trace, transcript);
    }
    trace.push(TraceEvent::ParetoSurvived);

    // Component 2: minimax-regret screen.
    let regrets = regret(run.matrix, p)?;
    if regrets.r_max > run.params.rho {
        trace.push(TraceEvent::RegretExceeded {
            r_max: regrets.r_max,
            rho: run.params.rho,
        });
        return reject(trace, transcript);
    }
    trace.push(TraceEvent::RegretWithinBound {
        r_max: regrets.r_max,
        rho: run.params.rho,
    });

    // Components 3–5: bounded deliberation with objection resolution.
    let mut states = run.objections.get(p).cloned().unwrap_or_default();
    let empty = DeliberationScript::default();
    let script = run.scripts.get(p).unwrap_or(&empty);
    let mut qualifying_rounds = Vec::new();
    for (i, round) in run.params.schedule.iter().enumerate() {
        let t = i as u32 + 1;
        let events = apply_events(p, script, t, &mut states)?;
        let support = supporters(run.matrix, p, round.theta)?;
        let qualified = support.len() as u32 >= round.kappa;
        let resolved = all_constructive_resolved(&states);
        transcript.rounds.push(RoundRecord {
            round: t,
            theta: round.theta,
            kappa: round.kappa,
            events,
            support: support.clone(),
            qualified,
            objections_resolved: resolved,
        });
        if qualified {
            qualifying_rounds.push(t);
        }
        if qualified && resolved {
            trace.push(TraceEvent::SupportQualified {
                round: t,
                supporters: support.len() as u32,
                kappa: round.kappa,
                theta: round.theta,
            });
            trace.push(TraceEvent::AcceptedAtRound { round: t });
            transcript.accepted_round = Some(t);
            return Ok((
                Decision {
                    proposal_id: p.clone(),
                    outcome: Outcome::Accept,
                    protocol_version_id: version,
                    considered_modules: modules,
                    rationale_trace: trace,
                },
                transcript,
            ));
        }
    }
    if qualifying_rounds.is_empty() {
        trace.push(TraceEvent::SupportNeverQualified {
            rounds: run.params.t_max,
        });
    } else {
        trace.push(TraceEvent::ObjectionsUnresolvedAtQualifyingRounds {
            rounds: qualifying_rounds,
        });
    }
    reject(trace, transcript)
}

fn apply_events(
    p: &ProposalId,
    script: &DeliberationScript,
    t: u32,
    states: &mut [ObjectionState],
) -> Result<Vec<ScriptEvent>, SecpError> {
    let mut applied = Vec::new();
    for ev in script.events.iter().filter(|e| e.round == t) {
        let state = states
            .iter_mut()
            .find(|s| s.module == ev.module && s.id == ev.objection)
            .ok_or_else(|| SecpError::UnknownObjection {
                proposal: p.clone(),
                module: ev.module.clone(),
                objection: ev.objection.clone(),
            })?;
        if state.status != ObjectionStatus::Open {
            return Err(SecpError::ObjectionNotOpen {
                proposal: p.clone(),
                module: ev.module.clone(),
                objection: ev.objection.clone(),
                status: state.status,
            });
        }
        state.status = ev.action.target_status();
        applied.push(ev.clone());
    }
    Ok(applied)
}
