use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ActivityError;

/// One round of the binary-to-decimal matching game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryRound {
    pub bits: u32,
    /// Zero-padded binary string and its decimal value.
    pub pairs: Vec<(String, u32)>,
    /// Decimal values offered on the board that match no binary string.
    pub distractors: Vec<u32>,
    pub time_limit_secs: u32,
}

/// A student's claim that `binary` is `decimal`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub binary: String,
    pub decimal: u32,
}

fn secs_per_pair(bits: u32) -> u32 {
    match bits {
        4 => 3,
        6 => 4,
        _ => 5,
    }
}

/// Draws `count` distinct values of width `bits`. With `distractors`, adds
/// min(count, remaining) further unused values; asking for distractors when
/// none remain is an error.
pub fn gen_binary_round(bits: u32, count: usize, distractors: bool, seed: u64) -> Result<BinaryRound, ActivityError> {
    if !matches!(bits, 4 | 6 | 8) {
        return Err(ActivityError::UnsupportedWidth(bits));
    }
    let space = 1usize << bits;
    let n_distract = if distractors { count.min(space.saturating_sub(count)) } else { 0 };
    if count == 0 || count > space || (distractors && n_distract == 0) {
        return Err(ActivityError::TooManyPairs { bits, requested: count + usize::from(distractors) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = sample(&mut rng, space, count + n_distract).into_vec();
    let width = bits as usize;
    let pairs = drawn[..count]
        .iter()
        .map(|&v| (format!("{v:0width$b}"), v as u32))
        .collect();
    let distractors = drawn[count..].iter().map(|&v| v as u32).collect();
    Ok(BinaryRound { bits, pairs, distractors, time_limit_secs: secs_per_pair(bits) * count as u32 })
}

/// 0.7 × accuracy + 0.3 × speed, where speed is the unused share of the time limit.
pub fn score_binary_round(round: &BinaryRound, responses: &[Match], elapsed_secs: f64) -> f64 {
    if round.pairs.is_empty() {
        return 0.0;
    }
    let correct = round
        .pairs
        .iter()
        .filter(|(bin, value)| responses.iter().find(|m| &m.binary == bin).is_some_and(|m| m.decimal == *value))
        .count();
    let accuracy = correct as f64 / round.pairs.len() as f64;
    let limit = f64::from(round.time_limit_secs.max(1));
    let elapsed = if elapsed_secs.is_nan() { limit } else { elapsed_secs.max(0.0) };
    let speed = ((limit - elapsed) / limit).clamp(0.0, 1.0);
    (0.7 * accuracy + 0.3 * speed).clamp(0.0, 1.0)
}
