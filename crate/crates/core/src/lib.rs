//! Adaptive tutoring engine for serious games.
//!
//! The curriculum is partitioned into content blocks ([`content`]). Student
//! interaction arrives as a stream of telemetry events ([`telemetry`]) that is
//! aggregated per block and discretized into a small state space. One tabular
//! Q-learning agent per block ([`tutor`]) picks an assistance action and is
//! rewarded by the change in the student's next score. Synthetic cohorts
//! ([`sim`]) pre-train the agents before real students arrive.
//!
//! The shipped curriculum teaches traffic-light controller design: [`dsl`] is
//! the controller language with simulator and rubric grader, and
//! [`activities`] holds the mini-games and pre/post-test reporting.

pub mod activities;
pub mod content;
pub mod dsl;
pub mod sim;
pub mod telemetry;
pub mod tutor;

mod docfmt;

pub use docfmt::{DocError, Location};
pub use content::{AssistanceAction, AssistanceKind, BlockGraph, ContentBlock};
pub use telemetry::{EmotionLabel, EventLog, TelemetryEvent, TutorState};
pub use tutor::{Reward, TutorAgent};
