use std::collections::{BTreeMap, BTreeSet};

use mergeloop::generator::{generate_machine, sample_traces, GeneratorConfig};
use mergeloop::{build_apta, AptaError, Classification, Color, Label, Mode, Sample, Symbol};
use proptest::prelude::*;

/// Distinct prefixes of the sample, the empty prefix included.
fn prefix_set(sample: &Sample) -> BTreeSet<Vec<Symbol>> {
    let mut set = BTreeSet::new();
    set.insert(Vec::new());
    for t in &sample.traces {
        for k in 1..=t.inputs.len() {
            set.insert(t.inputs[..k].to_vec());
        }
    }
    set
}

fn expected(sample: &Sample, t: &mergeloop::Trace) -> Classification {
    match sample.mode {
        Mode::Mealy => Classification::Output(t.outputs.clone()),
        Mode::Dfa => match t.label {
            Label::Accept => Classification::Accept,
            Label::Reject => Classification::Reject,
            Label::None => Classification::Unknown,
        },
    }
}

#[test]
fn generator_samples_replay_exactly() {
    for seed in 1..=20 {
        let cfg = GeneratorConfig::with_seed(seed);
        let sample = sample_traces(&generate_machine(&cfg).unwrap(), &cfg);
        let apta = build_apta(&sample).unwrap();
        assert_eq!(apta.len(), prefix_set(&sample).len(), "seed {seed}");
        for t in &sample.traces {
            assert_eq!(apta.classify(t), expected(&sample, t), "seed {seed}");
        }
        assert!(apta.is_well_formed());
    }
}

#[test]
fn initial_coloring() {
    let cfg = GeneratorConfig::with_seed(3);
    let apta = build_apta(&sample_traces(&generate_machine(&cfg).unwrap(), &cfg)).unwrap();
    assert_eq!(apta.states_with_color(Color::Red), vec![0]);
    let children: BTreeSet<_> = apta
        .state(0)
        .unwrap()
        .edges
        .values()
        .map(|e| e.target)
        .collect();
    let blues: BTreeSet<_> = apta.states_with_color(Color::Blue).into_iter().collect();
    assert_eq!(blues, children);
}

#[test]
fn occurrence_counts_match_prefix_frequencies() {
    let cfg = GeneratorConfig {
        n_traces: 200,
        ..GeneratorConfig::with_seed(11)
    };
    let sample = sample_traces(&generate_machine(&cfg).unwrap(), &cfg);
    let apta = build_apta(&sample).unwrap();
    let mut freq: BTreeMap<Vec<Symbol>, u64> = BTreeMap::new();
    for t in &sample.traces {
        for k in 0..=t.inputs.len() {
            *freq.entry(t.inputs[..k].to_vec()).or_default() += 1;
        }
    }
    for (prefix, n) in freq {
        let mut s = apta.start();
        for &a in &prefix {
            s = apta.target(s, a).unwrap();
        }
        assert_eq!(apta.state(s).unwrap().occurrences, n, "prefix {prefix:?}");
    }
}

#[test]
fn conflicting_dfa_labels_rejected() {
    let mut s = Sample::new(Mode::Dfa);
    s.push_word(true, &["a", "b"]);
    s.push_word(false, &["a", "b"]);
    assert_eq!(
        build_apta(&s).unwrap_err(),
        AptaError::InconsistentSample { trace: 1 }
    );
}

/// Words over {a, b, c}, labelled by a hidden parity rule so samples are
/// always consistent.
fn dfa_sample() -> impl Strategy<Value = Sample> {
    prop::collection::vec(prop::collection::vec(0usize..3, 0..8), 1..40).prop_map(|words| {
        let names = ["a", "b", "c"];
        let mut s = Sample::new(Mode::Dfa);
        for w in words {
            let accept = w.iter().filter(|&&x| x == 0).count() % 2 == 0;
            let word: Vec<&str> = w.iter().map(|&x| names[x]).collect();
            s.push_word(accept, &word);
        }
        s
    })
}

proptest! {
    #[test]
    fn dfa_apta_matches_prefix_oracle(sample in dfa_sample()) {
        let apta = build_apta(&sample).unwrap();
        prop_assert_eq!(apta.len(), prefix_set(&sample).len());
        for t in &sample.traces {
            prop_assert_eq!(apta.classify(t), expected(&sample, t));
        }
        let ids: Vec<_> = apta.states().map(|s| s.id).collect();
        prop_assert_eq!(ids, (0..apta.len()).collect::<Vec<_>>());
    }

    #[test]
    fn bfs_numbering(sample in dfa_sample()) {
        // Children appear in the order a breadth-first walk discovers them.
        let apta = build_apta(&sample).unwrap();
        let mut order = vec![apta.start()];
        let mut i = 0;
        while i < order.len() {
            let s = apta.state(order[i]).unwrap();
            order.extend(s.edges.values().map(|e| e.target));
            i += 1;
        }
        prop_assert_eq!(order, (0..apta.len()).collect::<Vec<_>>());
    }
}
