//! Automaton representation, samples and prefix-tree construction.
//!
//! States live in a slot vector indexed by [`StateId`]. Merging never moves
//! data around: a merged-away state keeps its slot and records the state it was
//! folded into, so resolving a transition target is a union-find lookup and
//! undoing a merge only has to restore the handful of fields that changed.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type StateId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol(pub u32);

impl Symbol {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bijection between symbol text and dense ids, in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, Symbol>,
}

impl Alphabet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut alphabet = Self::new();
        for s in symbols {
            alphabet.intern(s);
        }
        alphabet
    }

    /// Returns the id for `text`, adding it if unseen.
    pub fn intern(&mut self, text: impl Into<String>) -> Symbol {
        let text = text.into();
        if let Some(&sym) = self.index.get(&text) {
            return sym;
        }
        let sym = Symbol(self.symbols.len() as u32);
        self.index.insert(text.clone(), sym);
        self.symbols.push(text);
        sym
    }

    pub fn get(&self, text: &str) -> Option<Symbol> {
        self.index.get(text).copied()
    }

    pub fn text(&self, sym: Symbol) -> &str {
        &self.symbols[sym.index()]
    }

    pub fn contains(&self, sym: Symbol) -> bool {
        sym.index() < self.symbols.len()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.symbols.len() as u32).map(Symbol)
    }

    pub fn texts(&self) -> &[String] {
        &self.symbols
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dfa,
    Mealy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Dfa => f.write_str("dfa"),
            Mode::Mealy => f.write_str("mealy"),
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dfa" => Ok(Mode::Dfa),
            "mealy" => Ok(Mode::Mealy),
            other => Err(format!("unknown mode `{other}` (expected dfa or mealy)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Accept,
    Reject,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub label: Label,
    pub inputs: Vec<Symbol>,
    /// Empty in DFA mode.
    pub outputs: Vec<Symbol>,
}

/// A set of training traces together with the alphabets they are written in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub mode: Mode,
    pub traces: Vec<Trace>,
    pub inputs: Alphabet,
    pub outputs: Alphabet,
}

impl Sample {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            traces: Vec::new(),
            inputs: Alphabet::new(),
            outputs: Alphabet::new(),
        }
    }

    /// Appends a labelled DFA word, interning its symbols.
    pub fn push_word(&mut self, accept: bool, word: &[&str]) {
        let inputs = word.iter().map(|s| self.inputs.intern(*s)).collect();
        self.traces.push(Trace {
            label: if accept { Label::Accept } else { Label::Reject },
            inputs,
            outputs: Vec::new(),
        });
    }

    /// Appends a Mealy trace of `(input, output)` pairs, interning its symbols.
    pub fn push_io(&mut self, steps: &[(&str, &str)]) {
        let mut inputs = Vec::with_capacity(steps.len());
        let mut outputs = Vec::with_capacity(steps.len());
        for (i, o) in steps {
            inputs.push(self.inputs.intern(*i));
            outputs.push(self.outputs.intern(*o));
        }
        self.traces.push(Trace {
            label: Label::None,
            inputs,
            outputs,
        });
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Input words of every trace as text, for comparisons across alphabets.
    pub fn input_texts(&self, trace: &Trace) -> Vec<&str> {
        trace.inputs.iter().map(|&s| self.inputs.text(s)).collect()
    }

    pub fn output_texts(&self, trace: &Trace) -> Vec<&str> {
        trace
            .outputs
            .iter()
            .map(|&s| self.outputs.text(s))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Blue,
    White,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Raw target; resolve with [`Automaton::find`] before use.
    pub target: StateId,
    pub output: Option<Symbol>,
    pub count: u64,
}

/// Per-state statistics and outgoing transitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateInfo {
    pub id: StateId,
    pub color: Color,
    pub occurrences: u64,
    pub accept: u64,
    pub reject: u64,
    pub edges: BTreeMap<Symbol, Edge>,
}

impl StateInfo {
    pub fn new(id: StateId) -> Self {
        Self {
            id,
            color: Color::White,
            occurrences: 0,
            accept: 0,
            reject: 0,
            edges: BTreeMap::new(),
        }
    }

    /// Majority label; `Label::None` when there is no label evidence or a tie.
    pub fn label(&self) -> Label {
        match self.accept.cmp(&self.reject) {
            std::cmp::Ordering::Greater => Label::Accept,
            std::cmp::Ordering::Less => Label::Reject,
            std::cmp::Ordering::Equal => Label::None,
        }
    }

    pub fn transition_count(&self, input: Symbol) -> u64 {
        self.edges.get(&input).map_or(0, |e| e.count)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub source: StateId,
    pub target: StateId,
    pub input: Symbol,
    pub output: Option<Symbol>,
    pub count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Link {
    Live,
    MergedInto(StateId),
    Vacant,
}

#[derive(Clone, Debug)]
pub(crate) struct Slot {
    pub(crate) info: StateInfo,
    pub(crate) link: Link,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Classification {
    Accept,
    Reject,
    Unknown,
    Output(Vec<Symbol>),
    Undefined,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AptaError {
    #[error("sample contains no traces")]
    EmptySample,
    #[error("trace {trace} references symbol id {symbol} outside the alphabet")]
    SymbolOutOfAlphabet { trace: usize, symbol: u32 },
    #[error("trace {trace} is malformed: {reason}")]
    MalformedTrace { trace: usize, reason: &'static str },
    #[error("trace {trace} contradicts an earlier trace with the same prefix")]
    InconsistentSample { trace: usize },
}

#[derive(Clone, Debug)]
pub struct Automaton {
    pub(crate) mode: Mode,
    pub(crate) start: StateId,
    pub(crate) inputs: Alphabet,
    pub(crate) outputs: Alphabet,
    pub(crate) slots: Vec<Slot>,
    /// Serials of applied merge records, most recent last.
    pub(crate) applied: Vec<u64>,
    pub(crate) next_serial: u64,
}

impl Automaton {
    pub(crate) fn from_slots(
        mode: Mode,
        start: StateId,
        inputs: Alphabet,
        outputs: Alphabet,
        slots: Vec<Slot>,
    ) -> Self {
        Self {
            mode,
            start,
            inputs,
            outputs,
            slots,
            applied: Vec::new(),
            next_serial: 0,
        }
    }

    /// Builds a complete Mealy machine from a transition table indexed by
    /// `[state][input]`. State 0 is the start state; all states are red and
    /// carry no occurrence statistics.
    pub fn mealy_machine(
        inputs: Alphabet,
        outputs: Alphabet,
        table: &[Vec<(StateId, Symbol)>],
    ) -> Self {
        let slots = table
            .iter()
            .enumerate()
            .map(|(id, row)| {
                let mut info = StateInfo::new(id);
                info.color = Color::Red;
                for (i, &(target, output)) in row.iter().enumerate() {
                    info.edges.insert(
                        Symbol(i as u32),
                        Edge {
                            target,
                            output: Some(output),
                            count: 0,
                        },
                    );
                }
                Slot {
                    info,
                    link: Link::Live,
                }
            })
            .collect();
        Self::from_slots(Mode::Mealy, 0, inputs, outputs, slots)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn inputs(&self) -> &Alphabet {
        &self.inputs
    }

    pub fn outputs(&self) -> &Alphabet {
        &self.outputs
    }

    /// Representative of `id` after merges.
    pub fn find(&self, mut id: StateId) -> StateId {
        while let Link::MergedInto(parent) = self.slots[id].link {
            id = parent;
        }
        id
    }

    pub fn is_live(&self, id: StateId) -> bool {
        self.slots.get(id).is_some_and(|s| s.link == Link::Live)
    }

    pub fn state(&self, id: StateId) -> Option<&StateInfo> {
        self.is_live(id).then(|| &self.slots[id].info)
    }

    pub fn states(&self) -> impl Iterator<Item = &StateInfo> + '_ {
        self.slots
            .iter()
            .filter(|s| s.link == Link::Live)
            .map(|s| &s.info)
    }

    pub fn len(&self) -> usize {
        self.states().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn color(&self, id: StateId) -> Option<Color> {
        self.state(id).map(|s| s.color)
    }

    pub fn states_with_color(&self, color: Color) -> Vec<StateId> {
        self.states()
            .filter(|s| s.color == color)
            .map(|s| s.id)
            .collect()
    }

    /// Resolved target of the `input` transition leaving `state`.
    pub fn target(&self, state: StateId, input: Symbol) -> Option<StateId> {
        self.slots[state]
            .info
            .edges
            .get(&input)
            .map(|e| self.find(e.target))
    }

    /// All transitions between live states, sorted by source then input.
    pub fn transitions(&self) -> Vec<Transition> {
        self.states()
            .flat_map(|s| {
                s.edges.iter().map(move |(&input, e)| Transition {
                    source: s.id,
                    target: self.find(e.target),
                    input,
                    output: e.output,
                    count: e.count,
                })
            })
            .collect()
    }

    /// Checks structural well-formedness: the start state is live, every
    /// transition lands on a live state, and every state has at most one
    /// transition per input (guaranteed by the edge map, checked for targets).
    pub fn is_well_formed(&self) -> bool {
        self.is_live(self.start)
            && self.states().all(|s| {
                s.edges
                    .values()
                    .all(|e| e.target < self.slots.len() && self.is_live(self.find(e.target)))
            })
    }

    /// Runs `trace` from the start state.
    pub fn classify(&self, trace: &Trace) -> Classification {
        let mut state = self.start;
        let mut emitted = Vec::with_capacity(trace.inputs.len());
        for &input in &trace.inputs {
            let Some(edge) = self.slots[state].info.edges.get(&input) else {
                return Classification::Undefined;
            };
            if let Some(out) = edge.output {
                emitted.push(out);
            }
            state = self.find(edge.target);
        }
        match self.mode {
            Mode::Mealy => Classification::Output(emitted),
            Mode::Dfa => match self.slots[state].info.label() {
                Label::Accept => Classification::Accept,
                Label::Reject => Classification::Reject,
                Label::None => Classification::Unknown,
            },
        }
    }

    /// Transduces a word given as text; `None` when a symbol is unknown to this
    /// automaton or a transition is missing.
    pub fn transduce<'a, I>(&self, word: I) -> Option<Vec<String>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut state = self.start;
        let mut emitted = Vec::new();
        for text in word {
            let input = self.inputs.get(text)?;
            let edge = self.slots[state].info.edges.get(&input)?;
            if let Some(out) = edge.output {
                emitted.push(self.outputs.text(out).to_string());
            }
            state = self.find(edge.target);
        }
        Some(emitted)
    }
}

struct TrieNode {
    children: BTreeMap<Symbol, (usize, Option<Symbol>, u64)>,
    occurrences: u64,
    accept: u64,
    reject: u64,
}

impl TrieNode {
    fn new() -> Self {
        Self {
            children: BTreeMap::new(),
            occurrences: 0,
            accept: 0,
            reject: 0,
        }
    }
}

/// Builds the augmented prefix tree of `sample`.
///
/// State ids follow breadth-first order with children visited by ascending
/// input id, so the root is 0. The root is red, its children blue.
pub fn build_apta(sample: &Sample) -> Result<Automaton, AptaError> {
    if sample.traces.is_empty() {
        return Err(AptaError::EmptySample);
    }
    let mut trie = vec![TrieNode::new()];
    for (t, trace) in sample.traces.iter().enumerate() {
        check_trace(sample, t, trace)?;
        let mut node = 0;
        trie[0].occurrences += 1;
        for (i, &input) in trace.inputs.iter().enumerate() {
            let output = trace.outputs.get(i).copied();
            let next = match trie[node].children.get_mut(&input) {
                Some((child, existing, count)) => {
                    if *existing != output {
                        return Err(AptaError::InconsistentSample { trace: t });
                    }
                    *count += 1;
                    *child
                }
                None => {
                    let child = trie.len();
                    trie.push(TrieNode::new());
                    trie[node].children.insert(input, (child, output, 1));
                    child
                }
            };
            trie[next].occurrences += 1;
            node = next;
        }
        match trace.label {
            Label::Accept => trie[node].accept += 1,
            Label::Reject => trie[node].reject += 1,
            Label::None => {}
        }
        if trie[node].accept > 0 && trie[node].reject > 0 {
            return Err(AptaError::InconsistentSample { trace: t });
        }
    }

    // Renumber breadth-first.
    let mut order = Vec::with_capacity(trie.len());
    let mut renumber = vec![0usize; trie.len()];
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        renumber[node] = order.len();
        order.push(node);
        queue.extend(trie[node].children.values().map(|&(child, _, _)| child));
    }

    let slots = order
        .iter()
        .enumerate()
        .map(|(id, &node)| {
            let n = &trie[node];
            let mut info = StateInfo::new(id);
            info.occurrences = n.occurrences;
            info.accept = n.accept;
            info.reject = n.reject;
            info.edges = n
                .children
                .iter()
                .map(|(&input, &(child, output, count))| {
                    (
                        input,
                        Edge {
                            target: renumber[child],
                            output,
                            count,
                        },
                    )
                })
                .collect();
            Slot {
                info,
                link: Link::Live,
            }
        })
        .collect::<Vec<_>>();

    let mut apta = Automaton::from_slots(
        sample.mode,
        0,
        sample.inputs.clone(),
        sample.outputs.clone(),
        slots,
    );
    apta.slots[0].info.color = Color::Red;
    let children: Vec<StateId> = apta.slots[0]
        .info
        .edges
        .values()
        .map(|e| e.target)
        .collect();
    for child in children {
        if child != 0 {
            apta.slots[child].info.color = Color::Blue;
        }
    }
    Ok(apta)
}

fn check_trace(sample: &Sample, t: usize, trace: &Trace) -> Result<(), AptaError> {
    for &sym in &trace.inputs {
        if !sample.inputs.contains(sym) {
            return Err(AptaError::SymbolOutOfAlphabet {
                trace: t,
                symbol: sym.0,
            });
        }
    }
    for &sym in &trace.outputs {
        if !sample.outputs.contains(sym) {
            return Err(AptaError::SymbolOutOfAlphabet {
                trace: t,
                symbol: sym.0,
            });
        }
    }
    match sample.mode {
        Mode::Dfa => {
            if trace.label == Label::None {
                return Err(AptaError::MalformedTrace {
                    trace: t,
                    reason: "DFA traces need an accept or reject label",
                });
            }
            if !trace.outputs.is_empty() {
                return Err(AptaError::MalformedTrace {
                    trace: t,
                    reason: "DFA traces carry no outputs",
                });
            }
        }
        Mode::Mealy => {
            if trace.label != Label::None {
                return Err(AptaError::MalformedTrace {
                    trace: t,
                    reason: "Mealy traces carry no accept/reject label",
                });
            }
            if trace.outputs.len() != trace.inputs.len() {
                return Err(AptaError::MalformedTrace {
                    trace: t,
                    reason: "Mealy traces need one output per input",
                });
            }
        }
    }
    Ok(())
}
