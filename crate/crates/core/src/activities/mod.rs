//! Mini-games and assessments: the binary-matching round, the phase-ordering
//! puzzle, item-keyed quizzes, and pre/post-test cohort reporting.

mod binary;
mod phase;
mod quiz;
mod report;

pub use binary::{gen_binary_round, score_binary_round, BinaryRound, Match};
pub use phase::{check_phase_order, PhaseOrderOutcome, PhaseOrderPuzzle};
pub use quiz::{score_test, AnswerKey, QuizItem};
pub use report::{cohort_report, write_chart_csv, CohortReport, StudentRow};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActivityError {
    #[error("cannot draw {requested} distinct values from {bits}-bit numbers")]
    TooManyPairs { bits: u32, requested: usize },
    #[error("unsupported bit width {0} (expected 4, 6 or 8)")]
    UnsupportedWidth(u32),
    #[error("submitted phases are not a permutation of the reference cycle")]
    NotAPermutation,
    #[error("unknown quiz item `{0}`")]
    UnknownItemId(String),
    #[error("score {value} for `{what}` is outside [0, 1]")]
    OutOfRangeScore { what: String, value: f64 },
}
