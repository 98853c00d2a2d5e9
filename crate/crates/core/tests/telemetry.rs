use std::sync::Arc;
use std::thread;

use gridlock_core::telemetry::{
    discretize, features_for, read_log, write_log, AttemptsBucket, BlockFeatures, EmotionLabel, EventLog,
    EventPayload, ScoreBucket, TelemetryError, TelemetryEvent, TimeBucket, TutorState,
};
use proptest::prelude::*;

fn quiz(block: &str, score: f64) -> EventPayload {
    EventPayload::QuizSubmitted { block: block.into(), score }
}

fn entered(block: &str) -> EventPayload {
    EventPayload::BlockEntered { block: block.into() }
}

#[test]
fn first_event_gets_seq_one() {
    let log = EventLog::in_memory();
    assert_eq!(log.record("s", 0, entered("a")).unwrap(), 1);
    assert_eq!(log.record("s", 0, entered("b")).unwrap(), 2);
}

#[test]
fn out_of_range_score_is_rejected() {
    let log = EventLog::in_memory();
    let err = log.record("s", 0, quiz("a", 1.3)).unwrap_err();
    match err {
        TelemetryError::InvalidPayload { field, .. } => assert_eq!(field, "score"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(log.is_empty());
}

#[test]
fn concurrent_appends_leave_no_gaps() {
    let log = Arc::new(EventLog::in_memory());
    let handles: Vec<_> = (0..8)
        .map(|w| {
            let log = Arc::clone(&log);
            thread::spawn(move || {
                (0..250).map(|i| log.record(&format!("w{w}"), i, quiz("a", 0.5)).unwrap()).collect::<Vec<_>>()
            })
        })
        .collect();
    let mut seqs: Vec<u64> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
    seqs.sort_unstable();
    assert_eq!(seqs, (1..=2000).collect::<Vec<u64>>());
    let events = log.events();
    assert!(events.windows(2).all(|w| w[1].seq == w[0].seq + 1));
}

#[test]
fn concurrent_file_appends_survive_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.ndjson");
    let log = Arc::new(EventLog::open(&path).unwrap());
    let handles: Vec<_> = (0..4)
        .map(|w| {
            let log = Arc::clone(&log);
            thread::spawn(move || {
                for i in 0..25 {
                    log.record(&format!("w{w}"), i, quiz("a", (i as f64) / 24.0)).unwrap();
                }
            })
        })
        .collect();
    handles.into_iter().for_each(|h| h.join().unwrap());
    let in_memory = log.events();
    drop(log);
    let reread = read_log(&path).unwrap();
    assert_eq!(reread, in_memory);
    let reopened = EventLog::open(&path).unwrap();
    assert_eq!(reopened.record("late", 0, entered("a")).unwrap(), 101);
}

#[test]
fn floats_survive_the_file_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.ndjson");
    let log = EventLog::open(&path).unwrap();
    let tricky = [0.1 + 0.2, 1.0 / 3.0, f64::MIN_POSITIVE, 5e-324, 0.7 * 0.3, 1.0 - f64::EPSILON];
    for v in tricky {
        log.record("s", 0, quiz("a", v)).unwrap();
    }
    log.record("s", 0, EventPayload::InputActivity { mouse_moves: 3, key_presses: 4, window_secs: 0.1 * 3.0 })
        .unwrap();
    drop(log);
    let back = read_log(&path).unwrap();
    for (e, v) in back.iter().zip(tricky) {
        assert_eq!(e.payload.score().unwrap().to_bits(), v.to_bits());
    }
    let mut buf = Vec::new();
    write_log(&back, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn corrupt_line_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ndjson");
    std::fs::write(
        &path,
        "{\"seq\":1,\"ts\":0,\"session\":\"s\",\"type\":\"BlockEntered\",\"payload\":{\"block\":\"a\"}}\n{\"seq\":2,\"ts\"\n",
    )
    .unwrap();
    match read_log(&path) {
        Err(TelemetryError::CorruptLog { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn empty_aggregate() {
    let f = features_for(&[], "s", "a");
    assert_eq!(f.latest_score, None);
    assert_eq!(f.attempts, 0);
    assert_eq!(f.emotion_mode, EmotionLabel::Unknown);
}

#[test]
fn three_event_aggregate() {
    let log = EventLog::in_memory();
    log.record("s", 0, entered("a")).unwrap();
    log.record("s", 90_000, quiz("a", 0.6)).unwrap();
    log.record("s", 120_000, EventPayload::BlockCompleted { block: "a".into() }).unwrap();
    let f = log.with_events(|e| features_for(e, "s", "a"));
    assert_eq!(f.time_in_block, 120.0);
    assert_eq!(f.latest_score, Some(0.6));
    assert_eq!(f.attempts, 1);
}

#[test]
fn emotion_mode_counts() {
    let log = EventLog::in_memory();
    log.record("s", 0, entered("a")).unwrap();
    for label in [EmotionLabel::Frustrated, EmotionLabel::Engaged, EmotionLabel::Frustrated] {
        log.record("s", 1, EventPayload::EmotionSample { label }).unwrap();
    }
    assert_eq!(log.with_events(|e| features_for(e, "s", "a")).emotion_mode, EmotionLabel::Frustrated);
}

#[test]
fn discretize_examples() {
    let f = BlockFeatures {
        latest_score: Some(0.9),
        time_in_block: 300.0,
        attempts: 1,
        emotion_mode: EmotionLabel::Engaged,
        ..Default::default()
    };
    assert_eq!(
        discretize(&f, 300.0),
        TutorState {
            score: ScoreBucket::High,
            time: TimeBucket::Normal,
            emotion: EmotionLabel::Engaged,
            attempts: AttemptsBucket::First
        }
    );
    assert_eq!(
        discretize(&BlockFeatures::default(), 60.0),
        TutorState {
            score: ScoreBucket::Low,
            time: TimeBucket::Fast,
            emotion: EmotionLabel::Unknown,
            attempts: AttemptsBucket::First
        }
    );
    let half = BlockFeatures { latest_score: Some(0.5), ..Default::default() };
    assert_eq!(discretize(&half, 60.0).score, ScoreBucket::Mid);
    let edges = |t: f64, a: u32| {
        let s = discretize(&BlockFeatures { time_in_block: t, attempts: a, ..Default::default() }, 100.0);
        (s.time, s.attempts)
    };
    assert_eq!(edges(75.0, 2), (TimeBucket::Normal, AttemptsBucket::Retry));
    assert_eq!(edges(150.0, 3), (TimeBucket::Normal, AttemptsBucket::Many));
    assert_eq!(edges(150.5, 0), (TimeBucket::Slow, AttemptsBucket::First));
}

const BLOCKS: [&str; 3] = ["a", "b", "c"];

fn payload(block_choice: impl Strategy<Value = &'static str> + Clone + 'static) -> impl Strategy<Value = EventPayload> {
    let b = block_choice;
    prop_oneof![
        b.clone().prop_map(|b| EventPayload::BlockEntered { block: b.into() }),
        (b.clone(), 0.0..=1.0f64).prop_map(|(b, score)| EventPayload::QuizSubmitted { block: b.into(), score }),
        (b.clone(), 0u64..5).prop_map(|(b, count)| EventPayload::ActivityAction { block: b.into(), count }),
        (0u64..100, 0u64..100, 1.0..60.0f64).prop_map(|(m, k, w)| EventPayload::InputActivity {
            mouse_moves: m,
            key_presses: k,
            window_secs: w
        }),
        proptest::sample::select(EmotionLabel::ALL.to_vec()).prop_map(|label| EventPayload::EmotionSample { label }),
        (b.clone(), 0.0..=1.0f64).prop_map(|(b, grade)| EventPayload::CodeSubmitted {
            block: b.into(),
            source: String::new(),
            grade
        }),
        b.prop_map(|b| EventPayload::BlockCompleted { block: b.into() }),
    ]
}

fn to_events(payloads: Vec<(u16, EventPayload)>, start_seq: u64, start_ts: i64) -> Vec<TelemetryEvent> {
    let mut ts = start_ts;
    payloads
        .into_iter()
        .enumerate()
        .map(|(i, (dt, payload))| {
            ts += i64::from(dt);
            TelemetryEvent { seq: start_seq + i as u64, ts, session: "s".into(), payload }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn features_are_pure_and_states_in_range(
        payloads in proptest::collection::vec((0u16..5000, payload(proptest::sample::select(BLOCKS.to_vec()))), 0..60),
        cut in 0usize..60,
    ) {
        let events = to_events(payloads, 1, 0);
        let prefix = &events[..cut.min(events.len())];
        for block in BLOCKS {
            let f1 = features_for(prefix, "s", block);
            let f2 = features_for(prefix, "s", block);
            prop_assert_eq!(&f1, &f2);
            prop_assert!(f1.time_in_block >= 0.0 && f1.activity_rate >= 0.0);
            let s = discretize(&f1, 300.0);
            prop_assert!(s.index() < TutorState::COUNT);
            prop_assert_eq!(discretize(&f2, 300.0), s);
        }
    }

    #[test]
    fn events_for_other_block_do_not_change_features(
        before in proptest::collection::vec((0u16..5000, payload(proptest::sample::select(BLOCKS.to_vec()))), 0..40),
        after in proptest::collection::vec((0u16..5000, payload(Just("z"))), 0..20),
    ) {
        let mut events = to_events(before, 1, 0);
        let base: Vec<BlockFeatures> = BLOCKS.iter().map(|b| features_for(&events, "s", b)).collect();
        let last_ts = events.last().map_or(0, |e| e.ts);
        // input and emotion samples only belong to z once the session is in z
        let mut extra = vec![(0u16, EventPayload::BlockEntered { block: "z".into() })];
        let mut inside = true;
        for (dt, p) in after {
            match &p {
                EventPayload::BlockCompleted { .. } => inside = false,
                EventPayload::BlockEntered { .. } => inside = true,
                EventPayload::InputActivity { .. } | EventPayload::EmotionSample { .. } if !inside => continue,
                _ => {}
            }
            extra.push((dt, p));
        }
        events.extend(to_events(extra, events.len() as u64 + 1, last_ts));
        for (b, f) in BLOCKS.iter().zip(&base) {
            prop_assert_eq!(&features_for(&events, "s", b), f);
        }
    }
}
