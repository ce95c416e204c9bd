//! Deterministic questionnaire scoring.
//!
//! Modules answer standardized questions as Yes / Partial / No; answers map
//! to 1.0 / 0.5 / 0.0 and aggregate as a weighted mean of per-category means:
//!
//! ```text
//! score = sum_c  w_c * (1 / |Q_c|) * sum_{q in Q_c} value(answer[q])
//! ```
//!
//! Accumulation is fixed left-to-right over the questionnaire's declared
//! category and question order, so equal inputs give bit-identical scores.

use crate::ids::{ModuleId, ProposalId, QuestionId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Weights must sum to 1 within this tolerance; anything worse is rejected
/// rather than renormalized, so logged scores stay traceable.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RubricError {
    #[error("questionnaire `{module}`: category weights sum to {sum}, expected 1")]
    WeightSum { module: ModuleId, sum: f64 },
    #[error("questionnaire `{module}`: category `{category}` has no questions")]
    EmptyCategory { module: ModuleId, category: String },
    #[error("questionnaire `{module}`: duplicate question id `{question}`")]
    DuplicateQuestion {
        module: ModuleId,
        question: QuestionId,
    },
    #[error("questionnaire `{module}`: weight {weight} for category `{category}` outside [0,1]")]
    WeightRange {
        module: ModuleId,
        category: String,
        weight: f64,
    },
    #[error("questionnaire `{module}` has no categories")]
    NoCategories { module: ModuleId },
    #[error("answer sheet for (`{module}`, `{proposal}`) missing answer to `{question}`")]
    MissingAnswer {
        module: ModuleId,
        proposal: ProposalId,
        question: QuestionId,
    },
    #[error("answer sheet for (`{module}`, `{proposal}`) answers unknown question `{question}`")]
    UnknownQuestion {
        module: ModuleId,
        proposal: ProposalId,
        question: QuestionId,
    },
}

/// Categorical answer to a questionnaire item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    No,
    Partial,
    Yes,
}

/// Maps a categorical answer to its numeric value.
pub fn answer_value(answer: Answer) -> f64 {
    match answer {
        Answer::No => 0.0,
        Answer::Partial => 0.5,
        Answer::Yes => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    pub weight: f64,
    pub questions: Vec<Question>,
}

/// A module's scoring schema: weighted categories of ordered questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireSpec {
    pub module_id: ModuleId,
    pub categories: Vec<Category>,
}

impl QuestionnaireSpec {
    /// Checks weight normalization, non-empty categories, and question-id
    /// uniqueness across the spec.
    pub fn validate(&self) -> Result<(), RubricError> {
        if self.categories.is_empty() {
            return Err(RubricError::NoCategories {
                module: self.module_id.clone(),
            });
        }
        let mut sum = 0.0;
        let mut seen: BTreeSet<&QuestionId> = BTreeSet::new();
        for cat in &self.categories {
            if !(0.0..=1.0).contains(&cat.weight) {
                return Err(RubricError::WeightRange {
                    module: self.module_id.clone(),
                    category: cat.id.clone(),
                    weight: cat.weight,
                });
            }
            sum += cat.weight;
            if cat.questions.is_empty() {
                return Err(RubricError::EmptyCategory {
                    module: self.module_id.clone(),
                    category: cat.id.clone(),
                });
            }
            for q in &cat.questions {
                if !seen.insert(&q.id) {
                    return Err(RubricError::DuplicateQuestion {
                        module: self.module_id.clone(),
                        question: q.id.clone(),
                    });
                }
            }
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(RubricError::WeightSum {
                module: self.module_id.clone(),
                sum,
            });
        }
        Ok(())
    }

    pub fn question_count(&self) -> usize {
        self.categories.iter().map(|c| c.questions.len()).sum()
    }
}

/// One module's answers for one proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSheet {
    pub module_id: ModuleId,
    pub proposal_id: ProposalId,
    pub answers: BTreeMap<QuestionId, Answer>,
}

/// Computes the module score for a sheet against its questionnaire.
///
/// The sheet must cover exactly the questionnaire's question ids.
pub fn score(spec: &QuestionnaireSpec, sheet: &AnswerSheet) -> Result<f64, RubricError> {
    spec.validate()?;
    let known: BTreeSet<&QuestionId> = spec
        .categories
        .iter()
        .flat_map(|c| c.questions.iter().map(|q| &q.id))
        .collect();
    for qid in sheet.answers.keys() {
        if !known.contains(qid) {
            return Err(RubricError::UnknownQuestion {
                module: sheet.module_id.clone(),
                proposal: sheet.proposal_id.clone(),
                question: qid.clone(),
            });
        }
    }

    let mut total = 0.0;
    for cat in &spec.categories {
        let mut cat_sum = 0.0;
        for q in &cat.questions {
            let answer = sheet.answers.get(&q.id).ok_or_else(|| {
                RubricError::MissingAnswer {
                    module: sheet.module_id.clone(),
                    proposal: sheet.proposal_id.clone(),
                    question: q.id.clone(),
                }
            })?;
            cat_sum += answer_value(*answer);
        }
        total += cat.weight * (cat_sum / cat.questions.len() as f64);
    }
    Ok(total)
}
