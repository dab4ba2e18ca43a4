//! DOT and JSON renderings of an [`Automaton`].

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{
    Alphabet, Automaton, Color, Edge, Label, Link, Mode, Slot, StateId, StateInfo,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDoc {
    pub id: StateId,
    pub color: Color,
    pub occurrences: u64,
    pub accept: u64,
    pub reject: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub source: StateId,
    pub target: StateId,
    pub input: String,
    pub output: Option<String>,
    pub count: u64,
}

/// Serialized automaton. The alphabets are optional on input; when absent they
/// are rebuilt from the transitions in order of appearance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomatonDoc {
    pub mode: Mode,
    pub start: StateId,
    pub states: Vec<StateDoc>,
    pub transitions: Vec<TransitionDoc>,
    #[serde(default)]
    pub input_alphabet: Vec<String>,
    #[serde(default)]
    pub output_alphabet: Vec<String>,
}

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("invalid automaton JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("state {0} appears more than once")]
    DuplicateState(StateId),
    #[error("transition references unknown state {0}")]
    UnknownState(StateId),
    #[error("start state {0} is not listed")]
    UnknownStart(StateId),
    #[error("state {state} has two transitions on `{input}`")]
    Nondeterministic { state: StateId, input: String },
    #[error("transition from state {0} must {1} an output in this mode")]
    OutputMismatch(StateId, &'static str),
}

pub fn to_document(a: &Automaton) -> AutomatonDoc {
    let states = a
        .states()
        .map(|s| StateDoc {
            id: s.id,
            color: s.color,
            occurrences: s.occurrences,
            accept: s.accept,
            reject: s.reject,
        })
        .collect();
    let transitions = a
        .transitions()
        .into_iter()
        .map(|t| TransitionDoc {
            source: t.source,
            target: t.target,
            input: a.inputs().text(t.input).to_string(),
            output: t.output.map(|o| a.outputs().text(o).to_string()),
            count: t.count,
        })
        .collect();
    AutomatonDoc {
        mode: a.mode(),
        start: a.start(),
        states,
        transitions,
        input_alphabet: a.inputs().texts().to_vec(),
        output_alphabet: a.outputs().texts().to_vec(),
    }
}

/// Canonical compact JSON: states by id, transitions by (source, input id).
pub fn to_json(a: &Automaton) -> String {
    serde_json::to_string(&to_document(a)).expect("automaton documents always serialize")
}

pub fn to_json_pretty(a: &Automaton) -> String {
    serde_json::to_string_pretty(&to_document(a)).expect("automaton documents always serialize")
}

pub fn from_json(text: &str) -> Result<Automaton, JsonError> {
    from_document(serde_json::from_str(text)?)
}

pub fn from_document(doc: AutomatonDoc) -> Result<Automaton, JsonError> {
    let mut inputs = Alphabet::from_symbols(doc.input_alphabet);
    let mut outputs = Alphabet::from_symbols(doc.output_alphabet);

    let size = doc.states.iter().map(|s| s.id + 1).max().unwrap_or(0);
    let mut slots: Vec<Slot> = (0..size)
        .map(|id| Slot {
            info: StateInfo::new(id),
            link: Link::Vacant,
        })
        .collect();
    for s in &doc.states {
        let slot = &mut slots[s.id];
        if slot.link == Link::Live {
            return Err(JsonError::DuplicateState(s.id));
        }
        slot.link = Link::Live;
        slot.info.color = s.color;
        slot.info.occurrences = s.occurrences;
        slot.info.accept = s.accept;
        slot.info.reject = s.reject;
    }
    let live = |id: StateId, slots: &[Slot]| slots.get(id).is_some_and(|s| s.link == Link::Live);
    if !live(doc.start, &slots) {
        return Err(JsonError::UnknownStart(doc.start));
    }
    for t in doc.transitions {
        for id in [t.source, t.target] {
            if !live(id, &slots) {
                return Err(JsonError::UnknownState(id));
            }
        }
        match (doc.mode, &t.output) {
            (Mode::Dfa, Some(_)) => return Err(JsonError::OutputMismatch(t.source, "not carry")),
            (Mode::Mealy, None) => return Err(JsonError::OutputMismatch(t.source, "carry")),
            _ => {}
        }
        let input = inputs.intern(t.input.as_str());
        let output = t.output.map(|o| outputs.intern(o));
        let edges = &mut slots[t.source].info.edges;
        if edges.contains_key(&input) {
            return Err(JsonError::Nondeterministic {
                state: t.source,
                input: t.input,
            });
        }
        edges.insert(
            input,
            Edge {
                target: t.target,
                output,
                count: t.count,
            },
        );
    }
    Ok(Automaton::from_slots(
        doc.mode, doc.start, inputs, outputs, slots,
    ))
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering. Red states are filled red, blue states light blue,
/// accepting DFA states are drawn with a double circle.
pub fn to_dot(a: &Automaton) -> String {
    let mut out = String::new();
    out.push_str("digraph automaton {\n");
    out.push_str("    rankdir=LR;\n");
    out.push_str("    node [shape=circle];\n");
    out.push_str("    __start [shape=point];\n");
    let _ = writeln!(out, "    __start -> {};", a.start());
    for s in a.states() {
        let mut attrs = format!("label=\"{} ({})\"", s.id, s.occurrences);
        match s.color {
            Color::Red => attrs.push_str(", style=filled, fillcolor=red"),
            Color::Blue => attrs.push_str(", style=filled, fillcolor=lightblue"),
            Color::White => {}
        }
        if a.mode() == Mode::Dfa && s.label() == Label::Accept {
            attrs.push_str(", shape=doublecircle");
        }
        let _ = writeln!(out, "    {} [{}];", s.id, attrs);
    }
    for t in a.transitions() {
        let input = escape(a.inputs().text(t.input));
        let label = match t.output {
            Some(o) => format!("{}:{}", input, escape(a.outputs().text(o))),
            None => input,
        };
        let _ = writeln!(
            out,
            "    {} -> {} [label=\"{} ({})\"];",
            t.source, t.target, label, t.count
        );
    }
    out.push_str("}\n");
    out
}

/// Ids of live states, for diffing two renderings.
pub fn state_ids(a: &Automaton) -> BTreeSet<StateId> {
    a.states().map(|s| s.id).collect()
}
