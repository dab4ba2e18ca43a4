use std::fs;

use mergeloop::generator::{generate_machine, sample_traces, GeneratorConfig};
use mergeloop::io::format_command_log;
use mergeloop::{
    from_json, parse_command_log, parse_traces, serialize_traces, to_dot, to_json,
    write_step_artifacts, Command, Heuristic, Mode, Sample, Session,
};
use proptest::prelude::*;

fn texts(s: &Sample) -> Vec<(mergeloop::Label, Vec<String>, Vec<String>)> {
    s.traces
        .iter()
        .map(|t| {
            (
                t.label,
                s.input_texts(t).into_iter().map(String::from).collect(),
                s.output_texts(t).into_iter().map(String::from).collect(),
            )
        })
        .collect()
}

fn generated(seed: u64, n: usize) -> Sample {
    let cfg = GeneratorConfig {
        n_traces: n,
        ..GeneratorConfig::with_seed(seed)
    };
    sample_traces(&generate_machine(&cfg).unwrap(), &cfg)
}

#[test]
fn generated_traces_round_trip_through_text() {
    for seed in 1..=5 {
        let s = generated(seed, 300);
        let text = serialize_traces(&s);
        let back = parse_traces(&text, Mode::Mealy).unwrap();
        assert_eq!(texts(&back), texts(&s));
        assert_eq!(serialize_traces(&back), text);
    }
}

#[test]
fn malformed_line_is_reported_by_number() {
    let text = "3 2\n0 1 a/x\n0 2 a/x b\n0 1 b/y\n";
    let err = parse_traces(text, Mode::Mealy).unwrap_err();
    assert_eq!(err.line, 3);
}

#[test]
fn automaton_json_round_trips() {
    let s = generated(4, 200);
    let mut session = Session::new(s, Default::default(), Heuristic::Mealy).unwrap();
    session.apply(&Command::Leap(10)).unwrap();
    let json = to_json(session.automaton());
    let back = from_json(&json).unwrap();
    assert_eq!(to_json(&back), json);
    assert_eq!(to_dot(&back), to_dot(session.automaton()));
}

#[test]
fn step_artifacts_track_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(generated(8, 150), Default::default(), Heuristic::Mealy).unwrap();
    s.apply(&Command::Restart).unwrap();
    // Start from an empty history so no previous step exists.
    while s.step() > 0 {
        s.apply(&Command::Undo).unwrap();
    }
    write_step_artifacts(&s, dir.path()).unwrap();
    let read = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap();
    assert!(!dir.path().join("previous.dot").exists());
    assert_eq!(read("current.dot"), to_dot(s.automaton()));
    assert_eq!(read("trace.log"), "\n");

    s.apply(&Command::Merge(1)).unwrap();
    let before_current = read("current.dot");
    write_step_artifacts(&s, dir.path()).unwrap();
    assert_eq!(read("previous.dot"), to_dot(&s.previous().unwrap()));
    assert_eq!(read("trace.log"), format!("{}\n", s.trace_log()));
    let old_previous = read("previous.dot");
    assert_ne!(read("current.dot"), before_current);

    s.apply(&Command::Undo).unwrap();
    write_step_artifacts(&s, dir.path()).unwrap();
    assert_eq!(read("current.dot"), old_previous);

    let snapshot: serde_json::Value = serde_json::from_str(&read("session.json")).unwrap();
    assert_eq!(snapshot["step"], s.step());
    assert_eq!(snapshot["heuristic"], "mealy");
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn command_logs_round_trip() {
    let log = vec![
        Command::Merge(3),
        Command::MergePair(0, 7),
        Command::Undo,
        Command::Restart,
        Command::Leap(35),
        Command::Set("lowerbound".into(), "10".into()),
        Command::Force(1, 9),
        Command::Insert(2, 4),
    ];
    let text = format_command_log(&log);
    assert_eq!(parse_command_log(&text).unwrap(), log);
    let commented = format!("# recorded\n\n{text}");
    assert_eq!(parse_command_log(&commented).unwrap(), log);
}

proptest! {
    #[test]
    fn arbitrary_mealy_samples_round_trip(
        traces in prop::collection::vec(prop::collection::vec((0usize..4, 0usize..3), 0..7), 1..20)
    ) {
        let ins = ["a", "b", "c", "d"];
        let outs = ["x", "y", "z"];
        let mut s = Sample::new(Mode::Mealy);
        for t in &traces {
            let steps: Vec<(&str, &str)> = t.iter().map(|&(i, o)| (ins[i], outs[o])).collect();
            s.push_io(&steps);
        }
        let back = parse_traces(&serialize_traces(&s), Mode::Mealy).unwrap();
        prop_assert_eq!(texts(&back), texts(&s));
    }

    #[test]
    fn arbitrary_dfa_samples_round_trip(
        words in prop::collection::vec((any::<bool>(), prop::collection::vec(0usize..3, 0..7)), 1..20)
    ) {
        let names = ["a", "b", "c"];
        let mut s = Sample::new(Mode::Dfa);
        for (accept, w) in &words {
            let word: Vec<&str> = w.iter().map(|&i| names[i]).collect();
            s.push_word(*accept, &word);
        }
        let back = parse_traces(&serialize_traces(&s), Mode::Dfa).unwrap();
        prop_assert_eq!(texts(&back), texts(&s));
    }
}
