//! Curriculum model: content blocks arranged in a prerequisite DAG.
//!
//! A curriculum is loaded from a TOML document. Each block carries the
//! activity the student completes there, the help sections they can open,
//! and the catalog of assistance actions its tutor agent may choose from.
//! The catalog always starts with the single `no_assist` action.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activities::AnswerKey;
use crate::docfmt::{self, DocError};
use crate::dsl::Rubric;
use crate::telemetry::Thresholds;

const GRIDLOCK: &str = include_str!("../data/gridlock.toml");

/// Pseudo-block id under which post-test scores are reported.
pub const POST_TEST_BLOCK: &str = "post_test";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssistanceKind {
    NoAssist,
    HintText,
    ShowDocSection,
    PlayDialogue,
    SuggestVideo,
    MarkHelpMenu,
    GateRemedialArea,
}

impl AssistanceKind {
    pub const ALL: [AssistanceKind; 7] = [
        AssistanceKind::NoAssist,
        AssistanceKind::HintText,
        AssistanceKind::ShowDocSection,
        AssistanceKind::PlayDialogue,
        AssistanceKind::SuggestVideo,
        AssistanceKind::MarkHelpMenu,
        AssistanceKind::GateRemedialArea,
    ];

    fn needs_payload(self) -> bool {
        self != AssistanceKind::NoAssist
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssistanceAction {
    pub id: String,
    pub kind: AssistanceKind,
    /// Hint text, help section id, media reference or area id depending on `kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelpSection {
    pub id: String,
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivitySpec {
    Quiz(AnswerKey),
    BinaryMatch {
        bits: u32,
        pairs: usize,
        #[serde(default)]
        distractors: bool,
    },
    PhaseOrder {
        reference_cycle: Vec<String>,
    },
    CodeTask {
        /// Defaults to the shipped traffic-light rubric.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rubric: Option<Rubric>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        starter: Option<String>,
    },
}

impl ActivitySpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ActivitySpec::Quiz(_) => "quiz",
            ActivitySpec::BinaryMatch { .. } => "binary_match",
            ActivitySpec::PhaseOrder { .. } => "phase_order",
            ActivitySpec::CodeTask { .. } => "code_task",
        }
    }

    /// Rubric for a code task.
    pub fn rubric(&self) -> Option<Rubric> {
        match self {
            ActivitySpec::CodeTask { rubric, .. } => Some(rubric.clone().unwrap_or_else(Rubric::traffic)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentBlock {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub prerequisites: Vec<String>,
    pub activity: ActivitySpec,
    #[serde(default)]
    pub help_sections: Vec<HelpSection>,
    /// Instructional prompt shown before the activity starts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub how_to_play: Option<String>,
    pub assistance: Vec<AssistanceAction>,
}

impl ContentBlock {
    pub fn action(&self, id: &str) -> Option<&AssistanceAction> {
        self.assistance.iter().find(|a| a.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurriculumDoc {
    curriculum_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    how_to_play: Option<String>,
    #[serde(default)]
    thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    post_test: Option<AnswerKey>,
    blocks: Vec<ContentBlock>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurriculumError {
    #[error("malformed curriculum document: {0}")]
    MalformedDocument(DocError),
    #[error("block `{block}` requires unknown block `{missing}`")]
    UnknownPrerequisite { block: String, missing: String },
    #[error("prerequisite cycle: {}", .0.join(" -> "))]
    PrerequisiteCycle(Vec<String>),
    #[error("block `{0}` has no `no_assist` action in its assistance catalog")]
    MissingNoAssist(String),
    #[error("block `{block}`: {message}")]
    InvalidBlock { block: String, message: String },
    #[error("unknown block `{0}`")]
    UnknownBlockId(String),
}

/// Validated curriculum. Immutable after load.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGraph {
    curriculum_id: String,
    how_to_play: Option<String>,
    thresholds: Thresholds,
    post_test: Option<AnswerKey>,
    blocks: Vec<ContentBlock>,
    index: HashMap<String, usize>,
    order: Vec<usize>,
}

fn invalid(block: &str, message: impl Into<String>) -> CurriculumError {
    CurriculumError::InvalidBlock { block: block.to_string(), message: message.into() }
}

fn validate_catalog(block: &mut ContentBlock) -> Result<(), CurriculumError> {
    let mut ids = BTreeSet::new();
    for a in &block.assistance {
        if a.id.is_empty() {
            return Err(invalid(&block.id, "assistance action with empty id"));
        }
        if !ids.insert(a.id.as_str()) {
            return Err(invalid(&block.id, format!("assistance id `{}` used twice", a.id)));
        }
        if a.kind.needs_payload() && a.payload.as_deref().is_none_or(str::is_empty) {
            return Err(invalid(&block.id, format!("assistance `{}` needs a payload", a.id)));
        }
        if a.kind == AssistanceKind::ShowDocSection {
            let target = a.payload.as_deref().unwrap_or_default();
            if !block.help_sections.iter().any(|h| h.id == target) {
                return Err(invalid(&block.id, format!("assistance `{}` shows unknown help section `{target}`", a.id)));
            }
        }
    }
    match block.assistance.iter().filter(|a| a.kind == AssistanceKind::NoAssist).count() {
        0 => return Err(CurriculumError::MissingNoAssist(block.id.clone())),
        1 => {}
        _ => return Err(invalid(&block.id, "more than one `no_assist` action")),
    }
    // no_assist heads the catalog; the rest keep document order
    let pos = block.assistance.iter().position(|a| a.kind == AssistanceKind::NoAssist).unwrap_or(0);
    let head = block.assistance.remove(pos);
    block.assistance.insert(0, head);
    Ok(())
}

/// Finds one prerequisite cycle, rotated to start at its earliest block.
fn find_cycle(blocks: &[ContentBlock], index: &HashMap<String, usize>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        i: usize,
        blocks: &[ContentBlock],
        index: &HashMap<String, usize>,
        marks: &mut [Mark],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        marks[i] = Mark::Active;
        stack.push(i);
        for p in &blocks[i].prerequisites {
            let j = index[p.as_str()];
            match marks[j] {
                Mark::Active => {
                    let start = stack.iter().position(|&k| k == j).unwrap_or(0);
                    return Some(stack[start..].to_vec());
                }
                Mark::New => {
                    if let Some(c) = visit(j, blocks, index, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[i] = Mark::Done;
        None
    }

    let mut marks = vec![Mark::New; blocks.len()];
    for i in 0..blocks.len() {
        if marks[i] == Mark::New {
            if let Some(mut cycle) = visit(i, blocks, index, &mut marks, &mut Vec::new()) {
                let min_pos = cycle.iter().enumerate().min_by_key(|(_, &b)| b).map(|(p, _)| p).unwrap_or(0);
                cycle.rotate_left(min_pos);
                return Some(cycle.into_iter().map(|k| blocks[k].id.clone()).collect());
            }
        }
    }
    None
}

impl BlockGraph {
    /// The shipped five-block Gridlock curriculum.
    pub fn gridlock() -> BlockGraph {
        BlockGraph::load(GRIDLOCK).expect("shipped curriculum is valid")
    }

    pub fn gridlock_document() -> &'static str {
        GRIDLOCK
    }

    /// Parses and validates a curriculum document.
    pub fn load(text: &str) -> Result<BlockGraph, CurriculumError> {
        let doc: CurriculumDoc = docfmt::from_toml(text).map_err(CurriculumError::MalformedDocument)?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: CurriculumDoc) -> Result<BlockGraph, CurriculumError> {
        let malformed = |message: &str| {
            CurriculumError::MalformedDocument(DocError { location: None, message: message.to_string() })
        };
        if doc.curriculum_id.is_empty() {
            return Err(malformed("`curriculum_id` is empty"));
        }
        if doc.blocks.is_empty() {
            return Err(malformed("curriculum has no blocks"));
        }

        let mut blocks = doc.blocks;
        let mut index = HashMap::new();
        for (i, b) in blocks.iter().enumerate() {
            if b.id.is_empty() {
                return Err(invalid("", format!("block #{i} has an empty id")));
            }
            if b.id == POST_TEST_BLOCK {
                return Err(invalid(&b.id, "id is reserved for the post-test"));
            }
            if index.insert(b.id.clone(), i).is_some() {
                return Err(invalid(&b.id, "id used by more than one block"));
            }
        }
        for b in &mut blocks {
            if let Some(missing) = b.prerequisites.iter().find(|p| !index.contains_key(p.as_str())) {
                return Err(CurriculumError::UnknownPrerequisite { block: b.id.clone(), missing: missing.clone() });
            }
            let mut seen = BTreeSet::new();
            if let Some(dup) = b.prerequisites.iter().find(|p| !seen.insert(p.as_str())) {
                return Err(invalid(&b.id, format!("prerequisite `{dup}` listed twice")));
            }
            validate_catalog(b)?;
        }
        if let Some(cycle) = find_cycle(&blocks, &index) {
            return Err(CurriculumError::PrerequisiteCycle(cycle));
        }

        // Kahn's algorithm, ties broken by document order.
        let mut indegree: Vec<usize> = blocks.iter().map(|b| b.prerequisites.len()).collect();
        let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); blocks.len()];
        for (i, b) in blocks.iter().enumerate() {
            for p in &b.prerequisites {
                dependents[index[p.as_str()]].push(i);
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..blocks.len()).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(blocks.len());
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &d in &dependents[i] {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    ready.push(Reverse(d));
                }
            }
        }
        debug_assert_eq!(order.len(), blocks.len());

        Ok(BlockGraph {
            curriculum_id: doc.curriculum_id,
            how_to_play: doc.how_to_play,
            thresholds: doc.thresholds,
            post_test: doc.post_test,
            blocks,
            index,
            order,
        })
    }

    /// Canonical document text; loading it yields an equal graph.
    pub fn to_document(&self) -> String {
        docfmt::to_toml(&CurriculumDoc {
            curriculum_id: self.curriculum_id.clone(),
            how_to_play: self.how_to_play.clone(),
            thresholds: self.thresholds.clone(),
            post_test: self.post_test.clone(),
            blocks: self.blocks.clone(),
        })
    }

    pub fn id(&self) -> &str {
        &self.curriculum_id
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn how_to_play(&self) -> Option<&str> {
        self.how_to_play.as_deref()
    }

    pub fn post_test(&self) -> Option<&AnswerKey> {
        self.post_test.as_ref()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn block(&self, id: &str) -> Result<&ContentBlock, CurriculumError> {
        self.index.get(id).map(|&i| &self.blocks[i]).ok_or_else(|| CurriculumError::UnknownBlockId(id.to_string()))
    }

    /// Blocks in document order.
    pub fn blocks(&self) -> impl Iterator<Item = &ContentBlock> {
        self.blocks.iter()
    }

    /// Blocks in topological order (prerequisites first, ties by document order).
    pub fn topological(&self) -> impl Iterator<Item = &ContentBlock> {
        self.order.iter().map(|&i| &self.blocks[i])
    }

    /// Blocks not in `completed` whose prerequisites all are.
    pub fn unlocked_blocks(&self, completed: &BTreeSet<String>) -> Result<BTreeSet<String>, CurriculumError> {
        Ok(self.unlocked_in_order(completed)?.into_iter().collect())
    }

    /// Same as [`unlocked_blocks`](Self::unlocked_blocks), in topological order.
    pub fn unlocked_in_order(&self, completed: &BTreeSet<String>) -> Result<Vec<String>, CurriculumError> {
        if let Some(unknown) = completed.iter().find(|id| !self.contains(id)) {
            return Err(CurriculumError::UnknownBlockId(unknown.clone()));
        }
        Ok(self
            .topological()
            .filter(|b| !completed.contains(&b.id) && b.prerequisites.iter().all(|p| completed.contains(p)))
            .map(|b| b.id.clone())
            .collect())
    }

    /// Assistance actions for `block`; `no_assist` first, stable order.
    pub fn assistance_catalog(&self, block: &str) -> Result<&[AssistanceAction], CurriculumError> {
        Ok(&self.block(block)?.assistance)
    }

    /// Catalog of every block, keyed by block id.
    pub fn catalogs(&self) -> BTreeMap<String, Vec<AssistanceAction>> {
        self.blocks.iter().map(|b| (b.id.clone(), b.assistance.clone())).collect()
    }
}
