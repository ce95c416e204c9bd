//! Decision-module evaluators.
//!
//! Two sources produce assessment records behind one interface:
//!
//! - scripted fixtures: per-module files carrying the questionnaire, answer
//!   sheets, recommendations, objections, deliberation events, and the
//!   modification vote — fully deterministic across loads;
//! - remote evaluators: a plain request/response wire contract (one JSON
//!   line each way) with a strict timeout, for live modules.
//!
//! Records from either source are validated against the same invariants at
//! the boundary; invalid records are rejected, never repaired. Downstream
//! protocols cannot distinguish the two sources.

use crate::gate::Proposal;
use crate::ids::{ModuleId, ProposalId};
use crate::protocol::{AssessmentRecord, Objection, ProtocolError, Recommendation};
use crate::rubric::{self, AnswerSheet, QuestionnaireSpec, RubricError};
use crate::secp::{ObjectionAction, ScriptEvent};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvaluatorError {
    #[error("failed to read evaluator fixture {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse evaluator fixture {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("fixture for module `{module}` does not cover proposal `{proposal}`")]
    CoverageGap {
        module: ModuleId,
        proposal: ProposalId,
    },
    #[error(transparent)]
    Rubric(#[from] RubricError),
    #[error(transparent)]
    Record(#[from] ProtocolError),
    #[error("remote endpoint `{addr}` unreachable: {source}")]
    Unreachable {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("remote call to `{addr}` timed out after {budget_ms} ms")]
    Timeout { addr: String, budget_ms: u64 },
    #[error("remote transport failure: {0}")]
    Transport(std::io::Error),
    #[error("malformed remote response: {0}")]
    MalformedResponse(serde_json::Error),
    #[error("remote response names (`{module}`, `{proposal}`), expected (`{expected_module}`, `{expected_proposal}`)")]
    ResponseIdentityMismatch {
        module: ModuleId,
        proposal: ProposalId,
        expected_module: ModuleId,
        expected_proposal: ProposalId,
    },
}

/// A registered decision module: identity, expertise tag, and the
/// questionnaire its scores are computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub module_id: ModuleId,
    pub expertise: String,
    pub questionnaire: QuestionnaireSpec,
}

/// A deliberation event scripted by the owning module for one proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRoundEvent {
    pub round: u32,
    pub objection: String,
    pub action: ObjectionAction,
}

fn default_open() -> crate::protocol::ObjectionStatus {
    crate::protocol::ObjectionStatus::Open
}

/// An objection as written in a fixture file; status defaults to open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureObjection {
    pub id: String,
    pub description: String,
    pub reference: String,
    pub constructive: bool,
    #[serde(default = "default_open")]
    pub status: crate::protocol::ObjectionStatus,
}

impl From<FixtureObjection> for Objection {
    fn from(o: FixtureObjection) -> Self {
        Objection {
            id: o.id,
            description: o.description,
            reference: o.reference,
            constructive: o.constructive,
            status: o.status,
        }
    }
}

/// Scripted evaluation of one proposal by one module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEvaluation {
    pub answers: BTreeMap<crate::ids::QuestionId, rubric::Answer>,
    pub recommendation: Recommendation,
    #[serde(default)]
    pub objections: Vec<FixtureObjection>,
    #[serde(default)]
    pub deliberation: Vec<FixtureRoundEvent>,
}

/// One module's complete scripted behavior for a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorFixture {
    pub module_id: ModuleId,
    pub expertise: String,
    pub questionnaire: QuestionnaireSpec,
    pub proposals: BTreeMap<ProposalId, FixtureEvaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modification_vote: Option<crate::evolution::Vote>,
}

impl EvaluatorFixture {
    pub fn module_spec(&self) -> ModuleSpec {
        ModuleSpec {
            module_id: self.module_id.clone(),
            expertise: self.expertise.clone(),
            questionnaire: self.questionnaire.clone(),
        }
    }

    /// Checks that the fixture covers every proposal of the session.
    pub fn ensure_covers(&self, proposals: &[ProposalId]) -> Result<(), EvaluatorError> {
        for p in proposals {
            if !self.proposals.contains_key(p) {
                return Err(EvaluatorError::CoverageGap {
                    module: self.module_id.clone(),
                    proposal: p.clone(),
                });
            }
        }
        Ok(())
    }

    /// The answer sheet this fixture scripts for a proposal.
    pub fn sheet(&self, proposal: &ProposalId) -> Result<AnswerSheet, EvaluatorError> {
        let eval = self
            .proposals
            .get(proposal)
            .ok_or_else(|| EvaluatorError::CoverageGap {
                module: self.module_id.clone(),
                proposal: proposal.clone(),
            })?;
        Ok(AnswerSheet {
            module_id: self.module_id.clone(),
            proposal_id: proposal.clone(),
            answers: eval.answers.clone(),
        })
    }

    /// Scripted deliberation events, tagged with this module's identity.
    pub fn script_events(&self, proposal: &ProposalId) -> Vec<ScriptEvent> {
        self.proposals
            .get(proposal)
            .map(|e| {
                e.deliberation
                    .iter()
                    .map(|ev| ScriptEvent {
                        round: ev.round,
                        module: self.module_id.clone(),
                        objection: ev.objection.clone(),
                        action: ev.action,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Loads and validates a fixture file.
pub fn load_fixture(path: &Path) -> Result<EvaluatorFixture, EvaluatorError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvaluatorError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fixture: EvaluatorFixture =
        serde_json::from_str(&text).map_err(|source| EvaluatorError::Parse {
            path: path.display().to_string(),
            source,
        })?;
    fixture.questionnaire.validate()?;
    Ok(fixture)
}

/// Produces the assessment record for one (module, proposal) pair from a
/// fixture: the score comes from the questionnaire, recommendation and
/// objections are copied as scripted.
pub fn assess(
    fixture: &EvaluatorFixture,
    spec: &ModuleSpec,
    proposal: &ProposalId,
) -> Result<AssessmentRecord, EvaluatorError> {
    let eval = fixture
        .proposals
        .get(proposal)
        .ok_or_else(|| EvaluatorError::CoverageGap {
            module: fixture.module_id.clone(),
            proposal: proposal.clone(),
        })?;
    let sheet = fixture.sheet(proposal)?;
    let score = rubric::score(&spec.questionnaire, &sheet)?;
    let record = AssessmentRecord {
        module_id: fixture.module_id.clone(),
        proposal_id: proposal.clone(),
        score,
        recommendation: eval.recommendation,
        objections: eval.objections.iter().cloned().map(Into::into).collect(),
    };
    record.validate()?;
    Ok(record)
}

// ── Remote wire contract ────────────────────────────────────────────────

/// Request sent to a remote evaluator: the module spec (including its
/// questionnaire), the full proposal artifact, and an optional bearer token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub module: ModuleSpec,
    pub proposal: Proposal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
}

/// How a remote evaluator reports its score: a full answer sheet (scored by
/// this engine through the questionnaire) or a direct numeric score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scoring", rename_all = "snake_case")]
pub enum RemoteScoring {
    Answers { answers: BTreeMap<crate::ids::QuestionId, rubric::Answer> },
    Direct { score: f64 },
}

/// Response from a remote evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteResponse {
    pub module_id: ModuleId,
    pub proposal_id: ProposalId,
    #[serde(flatten)]
    pub scoring: RemoteScoring,
    pub recommendation: Recommendation,
    #[serde(default)]
    pub objections: Vec<FixtureObjection>,
}

/// One blocking request/response exchange. Implementations must honor the
/// configured time budget.
pub trait Transport {
    fn round_trip(&self, request_line: &str) -> Result<String, EvaluatorError>;
}

/// JSON-line exchange over TCP with connect/read/write timeouts.
pub struct TcpTransport {
    pub addr: String,
    pub timeout: Duration,
}

impl Transport for TcpTransport {
    fn round_trip(&self, request_line: &str) -> Result<String, EvaluatorError> {
        let addrs: Vec<_> = self
            .addr
            .to_socket_addrs()
            .map_err(|source| EvaluatorError::Unreachable {
                addr: self.addr.clone(),
                source,
            })?
            .collect();
        let addr = addrs.first().ok_or_else(|| EvaluatorError::Unreachable {
            addr: self.addr.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no address resolved"),
        })?;
        let stream = TcpStream::connect_timeout(addr, self.timeout).map_err(|source| {
            EvaluatorError::Unreachable {
                addr: self.addr.clone(),
                source,
            }
        })?;
        stream
            .set_read_timeout(Some(self.timeout))
            .and_then(|_| stream.set_write_timeout(Some(self.timeout)))
            .map_err(EvaluatorError::Transport)?;
        let mut writer = stream.try_clone().map_err(EvaluatorError::Transport)?;
        writer
            .write_all(request_line.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .and_then(|_| writer.flush())
            .map_err(EvaluatorError::Transport)?;
        let mut reader = BufReader::new(stream);
        let mut line = String::new();
        match reader.read_line(&mut line) {
            Ok(0) => Err(EvaluatorError::Transport(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "connection closed before a response line",
            ))),
            Ok(_) => Ok(line),
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                Err(EvaluatorError::Timeout {
                    addr: self.addr.clone(),
                    budget_ms: self.timeout.as_millis() as u64,
                })
            }
            Err(e) => Err(EvaluatorError::Transport(e)),
        }
    }
}

/// Calls a remote evaluator and validates the response against the same
/// invariants as scripted records. Returns the record and, when the remote
/// answered through the questionnaire, the answer sheet for the audit log.
pub fn remote_assess(
    transport: &dyn Transport,
    spec: &ModuleSpec,
    proposal: &Proposal,
    auth_token: Option<&str>,
) -> Result<(AssessmentRecord, Option<AnswerSheet>), EvaluatorError> {
    let request = RemoteRequest {
        module: spec.clone(),
        proposal: proposal.clone(),
        auth_token: auth_token.map(str::to_owned),
    };
    let request_line = serde_json::to_string(&request).expect("request serializes");
    let response_line = transport.round_trip(&request_line)?;
    let response: RemoteResponse =
        serde_json::from_str(response_line.trim()).map_err(EvaluatorError::MalformedResponse)?;
    if response.module_id != spec.module_id || response.proposal_id != proposal.id {
        return Err(EvaluatorError::ResponseIdentityMismatch {
            module: response.module_id,
            proposal: response.proposal_id,
            expected_module: spec.module_id.clone(),
            expected_proposal: proposal.id.clone(),
        });
    }
    let (score, sheet) = match &response.scoring {
        RemoteScoring::Answers { answers } => {
            let sheet = AnswerSheet {
                module_id: spec.module_id.clone(),
                proposal_id: proposal.id.clone(),
                answers: answers.clone(),
            };
            (rubric::score(&spec.questionnaire, &sheet)?, Some(sheet))
        }
        RemoteScoring::Direct { score } => (*score, None),
    };
    let record = AssessmentRecord {
        module_id: spec.module_id.clone(),
        proposal_id: proposal.id.clone(),
        score,
        recommendation: response.recommendation,
        objections: response.objections.into_iter().map(Into::into).collect(),
    };
    record.validate()?;
    Ok((record, sheet))
}
