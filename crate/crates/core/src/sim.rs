//! Synthetic students for pre-training the tutor agents.
//!
//! A student has a latent mastery per block. Assistance of kind `k` raises
//! it by the archetype's responsiveness to `k` plus a little noise, and an
//! attempt scores the mastery plus score noise. Because every archetype has
//! one clearly best kind of assistance, the policy a trained agent should
//! reach is known in advance.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{AssistanceAction, AssistanceKind, BlockGraph, ContentBlock};
use crate::docfmt::{self, DocError};
use crate::telemetry::{BlockFeatures, EmotionLabel, TutorState};
use crate::tutor::{reward_from, Hyperparams, Mode, TutorAgent, TutorError};

const COHORT: &str = include_str!("../data/cohort.toml");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("malformed archetype mix: {0}")]
    MalformedMix(DocError),
    #[error("archetype `{name}`: {message}")]
    InvalidArchetype { name: String, message: String },
    #[error("action `{action}` is not in the catalog of block `{block}`")]
    UnknownAction { block: String, action: String },
    #[error("no tutor agent for block `{0}`")]
    MissingAgent(String),
    #[error(transparent)]
    Tutor(#[from] TutorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionBand {
    /// Inclusive upper mastery bound.
    pub up_to: f64,
    pub label: EmotionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentArchetype {
    pub name: String,
    /// Initial mastery per block id.
    #[serde(default)]
    pub knowledge: BTreeMap<String, f64>,
    /// Initial mastery of blocks missing from `knowledge`.
    #[serde(default)]
    pub default_knowledge: f64,
    /// Mastery gain per assistance kind; missing kinds gain nothing.
    pub responsiveness: BTreeMap<AssistanceKind, f64>,
    /// Multiplier on the nominal block time.
    pub speed_factor: f64,
    #[serde(default)]
    pub emotion_profile: Vec<EmotionBand>,
}

impl StudentArchetype {
    pub fn initial_mastery(&self, block: &str) -> f64 {
        self.knowledge.get(block).copied().unwrap_or(self.default_knowledge)
    }

    pub fn gain(&self, kind: AssistanceKind) -> f64 {
        self.responsiveness.get(&kind).copied().unwrap_or(0.0)
    }

    /// Kind with the largest gain; the earliest kind wins ties.
    pub fn best_kind(&self) -> AssistanceKind {
        let mut best = AssistanceKind::NoAssist;
        for k in AssistanceKind::ALL {
            if self.gain(k) > self.gain(best) {
                best = k;
            }
        }
        best
    }

    pub fn emotion(&self, mastery: f64) -> EmotionLabel {
        self.emotion_profile.iter().find(|b| mastery <= b.up_to).map_or(EmotionLabel::Unknown, |b| b.label)
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |message: String| SimError::InvalidArchetype { name: self.name.clone(), message };
        if self.name.is_empty() {
            return Err(bad("empty name".into()));
        }
        for (block, &m) in self.knowledge.iter().chain([(&String::from("default"), &self.default_knowledge)]) {
            if !(0.0..=1.0).contains(&m) {
                return Err(bad(format!("knowledge of `{block}` is {m}, outside [0, 1]")));
            }
        }
        for (kind, &g) in &self.responsiveness {
            if !(0.0..=0.5).contains(&g) {
                return Err(bad(format!("gain for {kind:?} is {g}, outside [0, 0.5]")));
            }
        }
        if !(self.speed_factor.is_finite() && self.speed_factor > 0.0) {
            return Err(bad(format!("speed_factor {} must be positive", self.speed_factor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    /// Half-width of the uniform noise added to each mastery gain.
    pub mastery: f64,
    /// Half-width of the uniform noise added to each score.
    pub score: f64,
}

impl Default for Noise {
    fn default() -> Self {
        Noise { mastery: 0.05, score: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixEntry {
    pub count: usize,
    #[serde(flatten)]
    pub archetype: StudentArchetype,
}

/// Archetype mix document: which archetypes, how many of each, and the
/// simulation constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeMix {
    #[serde(default = "default_nominal")]
    pub nominal_block_secs: f64,
    #[serde(default)]
    pub noise: Noise,
    pub archetypes: Vec<MixEntry>,
}

fn default_nominal() -> f64 {
    300.0
}

impl ArchetypeMix {
    /// Novice, tinkerer and disengaged archetypes, 13 students.
    pub fn shipped() -> ArchetypeMix {
        Self::from_toml(COHORT).expect("shipped cohort is valid")
    }

    pub fn shipped_document() -> &'static str {
        COHORT
    }

    pub fn from_toml(text: &str) -> Result<ArchetypeMix, SimError> {
        let mix: ArchetypeMix = docfmt::from_toml(text).map_err(SimError::MalformedMix)?;
        mix.validate()?;
        Ok(mix)
    }

    pub fn to_toml(&self) -> String {
        docfmt::to_toml(self)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let malformed = |m: &str| SimError::MalformedMix(DocError { location: None, message: m.to_string() });
        if !(self.nominal_block_secs.is_finite() && self.nominal_block_secs > 0.0) {
            return Err(malformed("nominal_block_secs must be positive"));
        }
        let n = self.noise;
        if !(0.0..=0.5).contains(&n.mastery) || !(0.0..=0.5).contains(&n.score) {
            return Err(malformed("noise half-widths must lie in [0, 0.5]"));
        }
        for e in &self.archetypes {
            e.archetype.validate()?;
        }
        Ok(())
    }

    /// Copy with every count replaced by `count`.
    pub fn with_counts(&self, count: usize) -> ArchetypeMix {
        let mut m = self.clone();
        m.archetypes.iter_mut().for_each(|e| e.count = count);
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedStudent {
    /// Index into [`Cohort::archetypes`].
    pub archetype: usize,
    pub mastery: BTreeMap<String, f64>,
    pub attempts: BTreeMap<String, u32>,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub archetypes: Vec<StudentArchetype>,
    pub students: Vec<SimulatedStudent>,
    pub noise: Noise,
    pub nominal_block_secs: f64,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.students.len()
    }

    pub fn is_empty(&self) -> bool {
        self.students.is_empty()
    }

    pub fn archetype_of(&self, student: &SimulatedStudent) -> &StudentArchetype {
        &self.archetypes[student.archetype]
    }
}

/// Seeded stream for student `index` of a cohort.
fn student_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn fresh_student(archetype: usize, rng: ChaCha8Rng) -> SimulatedStudent {
    SimulatedStudent { archetype, mastery: BTreeMap::new(), attempts: BTreeMap::new(), rng }
}

/// Builds `Σ counts` students in mix order. Deterministic in `seed`.
pub fn spawn_cohort(mix: &ArchetypeMix, seed: u64) -> Cohort {
    let mut students = Vec::new();
    for (a, entry) in mix.archetypes.iter().enumerate() {
        for _ in 0..entry.count {
            let rng = student_rng(seed, students.len() as u64);
            students.push(fresh_student(a, rng));
        }
    }
    Cohort {
        archetypes: mix.archetypes.iter().map(|e| e.archetype.clone()).collect(),
        students,
        noise: mix.noise,
        nominal_block_secs: mix.nominal_block_secs,
    }
}

/// Result of one simulated attempt at a block.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub score: f64,
    pub features: BlockFeatures,
}

fn symmetric(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width > 0.0 {
        rng.random_range(-half_width..=half_width)
    } else {
        0.0
    }
}

impl Cohort {
    fn mastery(&self, student: &mut SimulatedStudent, block: &str) -> f64 {
        let initial = self.archetype_of(student).initial_mastery(block);
        *student.mastery.entry(block.to_string()).or_insert(initial)
    }

    fn scored_attempt(&self, student: &mut SimulatedStudent, block: &str) -> Attempt {
        let archetype = &self.archetypes[student.archetype];
        let mastery = student.mastery[block];
        let score = (mastery + symmetric(&mut student.rng, self.noise.score)).clamp(0.0, 1.0);
        let attempts = student.attempts.entry(block.to_string()).or_insert(0);
        *attempts += 1;
        let features = BlockFeatures {
            latest_score: Some(score),
            time_in_block: self.nominal_block_secs * archetype.speed_factor,
            attempts: *attempts,
            activity_rate: 60.0 / archetype.speed_factor,
            actions: u64::from(*attempts),
            emotion_mode: archetype.emotion(mastery),
        };
        Attempt { score, features }
    }

    /// Unassisted attempt: scores the current mastery without changing it.
    pub fn observe(&self, student: &mut SimulatedStudent, block: &str) -> Attempt {
        self.mastery(student, block);
        self.scored_attempt(student, block)
    }

    /// Applies `action`, then scores an attempt at `block`.
    pub fn simulate_attempt(
        &self,
        student: &mut SimulatedStudent,
        block: &ContentBlock,
        action: &AssistanceAction,
    ) -> Result<Attempt, SimError> {
        if block.action(&action.id) != Some(action) {
            return Err(SimError::UnknownAction { block: block.id.clone(), action: action.id.clone() });
        }
        let m = self.mastery(student, &block.id);
        let gain = self.archetype_of(student).gain(action.kind) + symmetric(&mut student.rng, self.noise.mastery);
        student.mastery.insert(block.id.clone(), (m + gain).clamp(0.0, 1.0));
        Ok(self.scored_attempt(student, &block.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Assistance decisions per block per episode.
    pub steps_per_block: usize,
    /// Episodes per learning-curve point.
    pub bucket: usize,
    /// Keep every update in [`TrainOutcome::steps`].
    #[serde(default)]
    pub record_steps: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { episodes: 5000, seed: 0, steps_per_block: 1, bucket: 100, record_steps: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// (bucket index, mean step reward in the bucket).
    pub curve: Vec<(usize, f64)>,
    /// Mean step reward of every episode.
    pub episode_rewards: Vec<f64>,
    /// Every update made, in order, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<TrainStep>,
}

/// One Q-learning update made during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStep {
    pub block: String,
    pub state: TutorState,
    pub action: String,
    pub reward: f64,
    pub next_state: Option<TutorState>,
}

impl TrainOutcome {
    pub fn mean_reward(&self, episodes: std::ops::Range<usize>) -> f64 {
        let slice = &self.episode_rewards[episodes.start.min(self.episode_rewards.len())
            ..episodes.end.min(self.episode_rewards.len())];
        if slice.is_empty() {
            0.0
        } else {
            slice.iter().sum::<f64>() / slice.len() as f64
        }
    }

    /// Writes `episode_bucket,mean_reward` rows.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["episode_bucket", "mean_reward"])?;
        for (bucket, mean) in &self.curve {
            w.serialize((bucket, mean))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One fresh agent per block of the curriculum.
pub fn fresh_agents(curriculum: &BlockGraph, params: Hyperparams) -> BTreeMap<String, TutorAgent> {
    curriculum.blocks().map(|b| (b.id.clone(), TutorAgent::for_block(b, params))).collect()
}

/// Pre-trains `agents` on simulated students.
///
/// Episode `e` is a new student of the archetype of `cohort.students[e % n]`
/// working through every block in prerequisite order. At each block the
/// student first makes an unassisted attempt, then the block's agent makes
/// `steps_per_block` explore-mode decisions (one by default), each followed
/// by a scored attempt. The reward is the score change; the last step of a
/// block is terminal. Epsilon decays once per episode.
pub fn train(
    agents: &mut BTreeMap<String, TutorAgent>,
    curriculum: &BlockGraph,
    cohort: &Cohort,
    config: &TrainConfig,
) -> Result<TrainOutcome, SimError> {
    let mut outcome = TrainOutcome::default();
    if config.episodes == 0 || cohort.is_empty() {
        return Ok(outcome);
    }
    for b in curriculum.blocks() {
        if !agents.contains_key(&b.id) {
            return Err(SimError::MissingAgent(b.id.clone()));
        }
    }
    let thresholds = curriculum.thresholds();
    let median = cohort.nominal_block_secs;
    let mut policy_rng = student_rng(config.seed, u64::MAX);
    let bucket = config.bucket.max(1);
    let (mut bucket_sum, mut bucket_n) = (0.0, 0usize);

    for e in 0..config.episodes {
        let template = &cohort.students[e % cohort.len()];
        let mut student = fresh_student(template.archetype, student_rng(config.seed, (1 << 32) + e as u64));
        let (mut ep_sum, mut ep_n) = (0.0, 0usize);

        for block in curriculum.topological() {
            let agent = agents.get_mut(&block.id).expect("checked above");
            let first = cohort.observe(&mut student, &block.id);
            let mut state = thresholds.discretize(&first.features, median);
            let mut before = first.score;
            for step in 0..config.steps_per_block {
                let action_id = agent.choose_with(state, Mode::Explore, &mut policy_rng)?.to_string();
                let action = block.action(&action_id).expect("agent actions come from the catalog");
                let attempt = cohort.simulate_attempt(&mut student, block, action)?;
                let reward = reward_from(Some(before), attempt.score)?;
                let next = (step + 1 < config.steps_per_block)
                    .then(|| thresholds.discretize(&attempt.features, median));
                agent.update(state, &action_id, reward, next)?;
                if config.record_steps {
                    outcome.steps.push(TrainStep {
                        block: block.id.clone(),
                        state,
                        action: action_id.clone(),
                        reward: reward.value(),
                        next_state: next,
                    });
                }
                ep_sum += reward.value();
                ep_n += 1;
                before = attempt.score;
                if let Some(n) = next {
                    state = n;
                }
            }
        }
        for agent in agents.values_mut() {
            agent.decay_epsilon();
        }

        let mean = if ep_n > 0 { ep_sum / ep_n as f64 } else { 0.0 };
        outcome.episode_rewards.push(mean);
        bucket_sum += ep_sum;
        bucket_n += ep_n;
        if (e + 1) % bucket == 0 || e + 1 == config.episodes {
            let m = if bucket_n > 0 { bucket_sum / bucket_n as f64 } else { 0.0 };
            outcome.curve.push((e / bucket, m));
            bucket_sum = 0.0;
            bucket_n = 0;
        }
    }
    Ok(outcome)
}
