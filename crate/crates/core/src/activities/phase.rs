use serde::{Deserialize, Serialize};

use super::ActivityError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseOrderPuzzle {
    pub reference_cycle: Vec<String>,
    pub submitted: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseOrderOutcome {
    /// Submitted order is some rotation of the reference cycle.
    pub correct: bool,
    /// Positions that agree with the best-aligned rotation.
    pub matched: usize,
    /// `matched / len`, in [0,1]; 1.0 exactly when `correct`.
    pub score: f64,
}

/// A light cycle has no distinguished first phase, so any rotation of the
/// reference is accepted.
pub fn check_phase_order(puzzle: &PhaseOrderPuzzle) -> Result<PhaseOrderOutcome, ActivityError> {
    let reference = &puzzle.reference_cycle;
    let submitted = &puzzle.submitted;
    let mut a = reference.clone();
    let mut b = submitted.clone();
    a.sort();
    b.sort();
    if submitted.is_empty() || a != b {
        return Err(ActivityError::NotAPermutation);
    }
    let n = reference.len();
    let matched = (0..n)
        .map(|shift| (0..n).filter(|&i| submitted[i] == reference[(i + shift) % n]).count())
        .max()
        .unwrap_or(0);
    Ok(PhaseOrderOutcome { correct: matched == n, matched, score: matched as f64 / n as f64 })
}
