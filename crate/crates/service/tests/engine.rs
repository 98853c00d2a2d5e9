use std::collections::BTreeMap;
use std::path::Path;

use gridlock_core::content::BlockGraph;
use gridlock_core::telemetry::{read_log, EventLog, EventPayload, TutorState};
use gridlock_core::{EmotionLabel, TutorAgent};
use gridlock_service::engine::{Delivery, Engine, EngineConfig};
use gridlock_service::ServiceError;
use proptest::prelude::*;

const REFERENCE: &str = include_str!("../../core/corpus/valid/reference.tl");

fn engine(train: bool) -> Engine {
    engine_with(BTreeMap::new(), train)
}

fn engine_with(agents: BTreeMap<String, TutorAgent>, train: bool) -> Engine {
    Engine::new(BlockGraph::gridlock(), agents, EventLog::in_memory(), EngineConfig { train, live_dir: None }).unwrap()
}

fn open(e: &Engine) -> String {
    e.open_session("gridlock", None).unwrap().session
}

fn send(e: &Engine, id: &str, payload: EventPayload) -> u64 {
    e.ingest(id, payload, None, None).unwrap()
}

fn quiz(block: &str, score: f64) -> EventPayload {
    EventPayload::QuizSubmitted { block: block.into(), score }
}

fn complete(e: &Engine, id: &str, block: &str, score: f64) {
    send(e, id, EventPayload::BlockEntered { block: block.into() });
    send(e, id, quiz(block, score));
    send(e, id, EventPayload::BlockCompleted { block: block.into() });
}

fn unlock_code_task(e: &Engine, id: &str) {
    for b in ["intro_quiz", "binary_numbers", "state_machines", "design_specs"] {
        complete(e, id, b, 0.8);
    }
}

#[test]
fn new_session_starts_at_the_entry_block() {
    let e = engine(false);
    let a = e.open_session("gridlock", None).unwrap();
    let b = e.open_session("gridlock", Some(77)).unwrap();
    assert_eq!(a.objective.as_deref(), Some("intro_quiz"));
    assert_ne!(a.session, b.session);
    assert_eq!(b.seed, 77);
    let o = e.objective(&a.session).unwrap();
    assert_eq!(o.unlocked, vec!["intro_quiz".to_string()]);
    assert!(o.completed.is_empty());
}

#[test]
fn unknown_curriculum_is_rejected() {
    let err = engine(false).open_session("chemistry", None).unwrap_err();
    assert_eq!(err.code(), "UnknownCurriculum");
    assert_eq!(err.status(), 404);
}

#[test]
fn objective_advances_and_records_the_benchmark() {
    let e = engine(false);
    let id = open(&e);
    complete(&e, &id, "intro_quiz", 0.75);
    let o = e.objective(&id).unwrap();
    assert_eq!(o.block.as_deref(), Some("binary_numbers"));
    assert_eq!(o.benchmark, Some(0.75));
    assert_eq!(o.completed, vec!["intro_quiz".to_string()]);
    assert!(o.unlocked.contains(&"state_machines".to_string()));
}

#[test]
fn ended_session_is_unknown() {
    let e = engine(false);
    let id = open(&e);
    e.end_session(&id).unwrap();
    assert_eq!(e.objective(&id).unwrap_err().code(), "UnknownSession");
    assert_eq!(e.ingest(&id, quiz("intro_quiz", 0.5), None, None).unwrap_err().code(), "UnknownSession");
    assert_eq!(e.request_assistance(&id, "intro_quiz").unwrap_err().code(), "UnknownSession");
    assert_eq!(e.objective("s999999").unwrap_err().code(), "UnknownSession");
}

#[test]
fn untrained_agent_gives_no_assistance() {
    let e = engine(false);
    let id = open(&e);
    let d = e.request_assistance(&id, "intro_quiz").unwrap();
    assert_eq!(d.action.id, "none");
    assert_eq!(d.delivery, Delivery::None);
    assert!(!d.mandatory_open);
}

#[test]
fn help_badge_is_delivered_as_a_menu_notification() {
    let g = BlockGraph::gridlock();
    let mut agent = TutorAgent::for_block(g.block("intro_quiz").unwrap(), Default::default());
    for s in TutorState::all() {
        agent.update_value(s, "badge_help", 1.0, None).unwrap();
    }
    let e = engine_with(BTreeMap::from([("intro_quiz".to_string(), agent)]), false);
    let id = open(&e);
    send(&e, &id, EventPayload::BlockEntered { block: "intro_quiz".into() });
    send(&e, &id, EventPayload::EmotionSample { label: EmotionLabel::Frustrated });
    send(&e, &id, quiz("intro_quiz", 0.1));
    let d = e.request_assistance(&id, "intro_quiz").unwrap();
    assert_eq!(d.action.id, "badge_help");
    assert_eq!(d.delivery, Delivery::HelpMenuNotification);
    assert!(!d.mandatory_open);
    assert_eq!(d.state.emotion, EmotionLabel::Frustrated);
}

#[test]
fn delivery_mapping_covers_every_kind() {
    use gridlock_core::AssistanceKind::*;
    assert_eq!(Delivery::for_kind(NoAssist), Delivery::None);
    assert_eq!(Delivery::for_kind(HintText), Delivery::PopupDialogue);
    assert_eq!(Delivery::for_kind(PlayDialogue), Delivery::PopupDialogue);
    assert_eq!(Delivery::for_kind(ShowDocSection), Delivery::HelpMenuNotification);
    assert_eq!(Delivery::for_kind(SuggestVideo), Delivery::HelpMenuNotification);
    assert_eq!(Delivery::for_kind(MarkHelpMenu), Delivery::HelpMenuNotification);
    assert_eq!(Delivery::for_kind(GateRemedialArea), Delivery::GateChange);
}

#[test]
fn locked_and_unknown_blocks() {
    let e = engine(false);
    let id = open(&e);
    assert_eq!(e.request_assistance(&id, "code_task").unwrap_err().code(), "BlockLocked");
    assert_eq!(e.submit_code(&id, "code_task", REFERENCE).unwrap_err().code(), "BlockLocked");
    let err = e.ingest(&id, EventPayload::BlockCompleted { block: "code_task".into() }, None, None).unwrap_err();
    assert_eq!((err.code(), err.status()), ("BlockLocked", 409));
    assert_eq!(e.request_assistance(&id, "nowhere").unwrap_err().code(), "UnknownBlockId");
    assert_eq!(e.ingest(&id, quiz("nowhere", 0.5), None, None).unwrap_err().code(), "UnknownBlockId");
}

#[test]
fn code_is_only_accepted_by_code_tasks() {
    let e = engine(false);
    let id = open(&e);
    let err = e.submit_code(&id, "intro_quiz", REFERENCE).unwrap_err();
    assert_eq!(err.code(), "WrongActivityType");
    assert_eq!(err.detail()["activity"], "quiz");
}

#[test]
fn reference_submission_scores_full_marks() {
    let e = engine(false);
    let id = open(&e);
    unlock_code_task(&e, &id);
    let s = e.submit_code(&id, "code_task", REFERENCE).unwrap();
    assert_eq!(s.grade, 1.0);
    assert!(s.diagnostics.is_empty());
    assert!(s.violations.is_empty());
    assert!(!s.trace.is_empty());
    assert!(s.scenario.is_some());
}

#[test]
fn broken_submission_is_logged_with_diagnostics() {
    let e = engine(false);
    let id = open(&e);
    unlock_code_task(&e, &id);
    let s = e.submit_code(&id, "code_task", "controller C { state }").unwrap();
    assert_eq!(s.grade, 0.0);
    assert!(!s.diagnostics.is_empty());
    assert!(s.trace.is_empty());
    let logged = e.log().events().into_iter().find(|ev| ev.seq == s.seq).unwrap();
    assert!(matches!(logged.payload, EventPayload::CodeSubmitted { grade, .. } if grade == 0.0));
}

#[test]
fn server_recorded_events_cannot_be_posted() {
    let e = engine(false);
    let id = open(&e);
    for p in [
        EventPayload::AssistanceShown { block: "intro_quiz".into(), action: "none".into(), state: None },
        EventPayload::CodeSubmitted { block: "code_task".into(), source: String::new(), grade: 1.0 },
        EventPayload::SessionEnded {},
        EventPayload::SessionStarted { curriculum: None, train: true, seed: 0 },
    ] {
        let err = e.ingest(&id, p, None, None).unwrap_err();
        assert_eq!((err.code(), err.status()), ("ServerOnlyEvent", 400));
    }
}

#[test]
fn invalid_payload_is_rejected_without_logging() {
    let e = engine(false);
    let id = open(&e);
    let before = e.log().len();
    let err = e.ingest(&id, quiz("intro_quiz", 1.5), None, None).unwrap_err();
    assert_eq!((err.code(), err.status()), ("InvalidPayload", 422));
    assert_eq!(e.log().len(), before);
}

#[test]
fn next_score_credits_the_decision() {
    let e = engine(true);
    let id = open(&e);
    send(&e, &id, EventPayload::BlockEntered { block: "intro_quiz".into() });
    send(&e, &id, quiz("intro_quiz", 0.4));
    let d = e.request_assistance(&id, "intro_quiz").unwrap();
    send(&e, &id, quiz("intro_quiz", 0.9));
    let agent = e.agent("intro_quiz").unwrap();
    assert!((agent.q(d.state, &d.action.id) - 0.05).abs() < 1e-12);
    assert_eq!(agent.visits(d.state, &d.action.id), 1);
    assert!(e.session_snapshot(&id).unwrap().pending.is_empty());
}

#[test]
fn first_score_counts_from_zero() {
    let e = engine(true);
    let id = open(&e);
    send(&e, &id, EventPayload::BlockEntered { block: "intro_quiz".into() });
    let d = e.request_assistance(&id, "intro_quiz").unwrap();
    send(&e, &id, quiz("intro_quiz", 0.6));
    assert!((e.agent("intro_quiz").unwrap().q(d.state, &d.action.id) - 0.06).abs() < 1e-12);
}

#[test]
fn exploit_sessions_do_not_learn() {
    let e = engine(false);
    let id = open(&e);
    send(&e, &id, quiz("intro_quiz", 0.4));
    let d = e.request_assistance(&id, "intro_quiz").unwrap();
    send(&e, &id, quiz("intro_quiz", 0.9));
    assert_eq!(e.agent("intro_quiz").unwrap().visits(d.state, &d.action.id), 0);
}

#[test]
fn completing_the_block_discards_the_pending_decision() {
    let e = engine(true);
    let id = open(&e);
    send(&e, &id, quiz("intro_quiz", 0.4));
    e.request_assistance(&id, "intro_quiz").unwrap();
    assert_eq!(e.session_snapshot(&id).unwrap().pending.len(), 1);
    send(&e, &id, EventPayload::BlockCompleted { block: "intro_quiz".into() });
    assert!(e.session_snapshot(&id).unwrap().pending.is_empty());
    let agent = e.agent("intro_quiz").unwrap();
    assert!(TutorState::all().all(|s| agent.state_visits(s) == 0));
}

#[test]
fn repeated_idempotency_key_records_once() {
    let e = engine(false);
    let id = open(&e);
    let first = e.ingest(&id, quiz("intro_quiz", 0.3), None, Some("k1")).unwrap();
    let len = e.log().len();
    let again = e.ingest(&id, quiz("intro_quiz", 0.3), None, Some("k1")).unwrap();
    assert_eq!(first, again);
    assert_eq!(e.log().len(), len);
    let other = e.ingest(&id, quiz("intro_quiz", 0.3), None, Some("k2")).unwrap();
    assert!(other > first);
}

fn scripted(e: &Engine) -> String {
    let id = open(e);
    send(e, &id, EventPayload::BlockEntered { block: "intro_quiz".into() });
    for score in [0.2, 0.5, 0.7] {
        send(e, &id, quiz("intro_quiz", score));
        e.request_assistance(&id, "intro_quiz").unwrap();
    }
    send(e, &id, quiz("intro_quiz", 1.0));
    send(e, &id, EventPayload::BlockCompleted { block: "intro_quiz".into() });
    id
}

fn file_engine(dir: &Path) -> Engine {
    let log = EventLog::open(dir.join("events.ndjson")).unwrap();
    Engine::new(BlockGraph::gridlock(), BTreeMap::new(), log, EngineConfig { train: true, live_dir: None }).unwrap()
}

#[test]
fn restart_rebuilds_agents_and_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let (agents, id) = {
        let e = file_engine(dir.path());
        let id = scripted(&e);
        scripted(&e);
        (e.agents(), id)
    };
    let e = file_engine(dir.path());
    for (block, agent) in &agents {
        assert!(agent.bit_identical(&e.agent(block).unwrap()), "{block}");
    }
    assert_eq!(e.objective(&id).unwrap().block.as_deref(), Some("binary_numbers"));
    let next = open(&e);
    assert_eq!(next, "s000003");
}

#[test]
fn tampered_decision_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    scripted(&file_engine(dir.path()));
    let path = dir.path().join("events.ndjson");
    let text = std::fs::read_to_string(&path).unwrap();
    let events = read_log(&path).unwrap();
    let shown = events.iter().find(|e| matches!(e.payload, EventPayload::AssistanceShown { .. })).unwrap();
    let EventPayload::AssistanceShown { action, .. } = &shown.payload else { unreachable!() };
    let forged = if action == "hint_binary" { "doc_numbers" } else { "hint_binary" };
    let line = text.lines().find(|l| l.contains("AssistanceShown")).unwrap();
    std::fs::write(&path, text.replacen(line, &line.replacen(&format!("\"{action}\""), &format!("\"{forged}\""), 1), 1)).unwrap();
    let log = EventLog::open(&path).unwrap();
    let err = Engine::new(BlockGraph::gridlock(), BTreeMap::new(), log, EngineConfig { train: true, live_dir: None })
        .err()
        .expect("forged decision must not replay");
    assert!(matches!(err, ServiceError::ReplayDiverged { seq, .. } if seq == shown.seq), "{err}");
}

#[test]
fn training_is_logged_and_replayed() {
    let dir = tempfile::tempdir().unwrap();
    let trained = {
        let e = file_engine(dir.path());
        e.train(&gridlock_core::sim::ArchetypeMix::shipped(), 30, 5).unwrap();
        e.agents()
    };
    let e = file_engine(dir.path());
    for (block, agent) in &trained {
        assert!(agent.bit_identical(&e.agent(block).unwrap()), "{block}");
    }
}

#[derive(Debug, Clone)]
enum Op {
    Enter(usize),
    Quiz(usize, f64),
    Complete(usize),
    Assist(usize),
}

const BLOCKS: [&str; 5] = ["intro_quiz", "binary_numbers", "state_machines", "design_specs", "code_task"];

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..5usize).prop_map(Op::Enter),
        (0..5usize, 0.0..=1.0f64).prop_map(|(b, s)| Op::Quiz(b, s)),
        (0..5usize).prop_map(Op::Complete),
        (0..5usize).prop_map(Op::Assist),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_is_always_an_unlocked_open_block(ops in prop::collection::vec(op(), 0..40)) {
        let e = engine(true);
        let id = open(&e);
        for op in ops {
            let _ = match op {
                Op::Enter(b) => e.ingest(&id, EventPayload::BlockEntered { block: BLOCKS[b].into() }, None, None).map(|_| ()),
                Op::Quiz(b, s) => e.ingest(&id, quiz(BLOCKS[b], s), None, None).map(|_| ()),
                Op::Complete(b) => e.ingest(&id, EventPayload::BlockCompleted { block: BLOCKS[b].into() }, None, None).map(|_| ()),
                Op::Assist(b) => e.request_assistance(&id, BLOCKS[b]).map(|_| ()),
            };
            let o = e.objective(&id).unwrap();
            match &o.block {
                Some(b) => {
                    prop_assert!(o.unlocked.contains(b));
                    prop_assert!(!o.completed.contains(b));
                }
                None => prop_assert_eq!(o.completed.len(), BLOCKS.len()),
            }
        }
    }
}
