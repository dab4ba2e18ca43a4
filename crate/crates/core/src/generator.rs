//! Seedable random Mealy targets and trace sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Alphabet, Automaton, Label, Mode, Sample, StateId, Symbol, Trace};

const MAX_RETRIES: usize = 10_000;
const TRAIN_STREAM: u64 = 1;
const HELD_OUT_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_states: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub n_traces: usize,
    /// Probability of ending a trace after each emitted step; lengths are
    /// geometric on 1, 2, ... with mean `1 / stop_probability`.
    pub stop_probability: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_states: 6,
            n_inputs: 4,
            n_outputs: 4,
            n_traces: 1000,
            stop_probability: 0.2,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(&'static str),
    #[error("no minimal strongly connected machine found after {0} attempts")]
    GenerationFailed(usize),
}

impl GeneratorConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.n_states == 0 || self.n_inputs == 0 || self.n_outputs == 0 || self.n_traces == 0 {
            return Err(GeneratorError::InvalidConfig("counts must be at least 1"));
        }
        if !(self.stop_probability > 0.0 && self.stop_probability < 1.0) {
            return Err(GeneratorError::InvalidConfig(
                "stop_probability must lie in (0, 1)",
            ));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

pub fn input_name(i: usize, n_inputs: usize) -> String {
    if n_inputs <= 26 {
        char::from(b'a' + i as u8).to_string()
    } else {
        format!("i{i}")
    }
}

pub fn output_name(o: usize) -> String {
    format!("o{o}")
}

type Table = Vec<Vec<(StateId, u32)>>;

fn strongly_connected(table: &Table) -> bool {
    let n = table.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(s) = stack.pop() {
            for (p, row) in table.iter().enumerate() {
                for &(t, _) in row {
                    let (from, to) = if forward { (p, t) } else { (t, p) };
                    if from == s && !seen[to] {
                        seen[to] = true;
                        stack.push(to);
                    }
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    reach(true) && reach(false)
}

/// Table-filling check that every pair of states is distinguishable.
fn is_minimal(table: &Table) -> bool {
    let n = table.len();
    let mut marked = vec![vec![false; n]; n];
    for p in 0..n {
        for q in p + 1..n {
            if table[p].iter().zip(&table[q]).any(|(a, b)| a.1 != b.1) {
                marked[p][q] = true;
                marked[q][p] = true;
            }
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for p in 0..n {
            for q in p + 1..n {
                if marked[p][q] {
                    continue;
                }
                if table[p]
                    .iter()
                    .zip(&table[q])
                    .any(|(a, b)| marked[a.0][b.0])
                {
                    marked[p][q] = true;
                    marked[q][p] = true;
                    changed = true;
                }
            }
        }
    }
    (0..n).all(|p| (p + 1..n).all(|q| marked[p][q]))
}

/// Generates a complete, strongly connected, minimal Mealy machine. Start
/// state is 0. Candidate tables that fail either property are perturbed one
/// transition at a time.
pub fn generate_machine(cfg: &GeneratorConfig) -> Result<Automaton, GeneratorError> {
    cfg.validate()?;
    let mut rng = cfg.rng(0);
    let (n, k, m) = (cfg.n_states, cfg.n_inputs, cfg.n_outputs);
    let mut table: Table = (0..n)
        .map(|_| {
            (0..k)
                .map(|_| (rng.random_range(0..n), rng.random_range(0..m) as u32))
                .collect()
        })
        .collect();
    for _ in 0..MAX_RETRIES {
        if strongly_connected(&table) && is_minimal(&table) {
            let inputs = Alphabet::from_symbols((0..k).map(|i| input_name(i, k)));
            let outputs = Alphabet::from_symbols((0..m).map(output_name));
            let table: Vec<Vec<(StateId, Symbol)>> = table
                .into_iter()
                .map(|row| row.into_iter().map(|(t, o)| (t, Symbol(o))).collect())
                .collect();
            return Ok(Automaton::mealy_machine(inputs, outputs, &table));
        }
        let (s, i) = (rng.random_range(0..n), rng.random_range(0..k));
        table[s][i] = (rng.random_range(0..n), rng.random_range(0..m) as u32);
    }
    Err(GeneratorError::GenerationFailed(MAX_RETRIES))
}

fn walk(machine: &Automaton, rng: &mut ChaCha8Rng, stop_probability: f64) -> Trace {
    let n_inputs = machine.inputs().len() as u32;
    let mut state = machine.start();
    let mut trace = Trace {
        label: Label::None,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    loop {
        let input = Symbol(rng.random_range(0..n_inputs));
        let edge = &machine
            .state(state)
            .expect("walk stays on live states")
            .edges[&input];
        trace.inputs.push(input);
        trace
            .outputs
            .push(edge.output.expect("Mealy transitions emit"));
        state = machine.find(edge.target);
        if rng.random::<f64>() < stop_probability {
            return trace;
        }
    }
}

fn sample_stream(machine: &Automaton, cfg: &GeneratorConfig, n: usize, stream: u64) -> Sample {
    let mut rng = cfg.rng(stream);
    Sample {
        mode: Mode::Mealy,
        traces: (0..n)
            .map(|_| walk(machine, &mut rng, cfg.stop_probability))
            .collect(),
        inputs: machine.inputs().clone(),
        outputs: machine.outputs().clone(),
    }
}

/// `cfg.n_traces` random walks from the start state.
pub fn sample_traces(machine: &Automaton, cfg: &GeneratorConfig) -> Sample {
    sample_stream(machine, cfg, cfg.n_traces, TRAIN_STREAM)
}

/// The first `n_small` traces of [`sample_traces`].
pub fn undersample_traces(
    machine: &Automaton,
    cfg: &GeneratorConfig,
    n_small: usize,
) -> Result<Sample, GeneratorError> {
    if n_small == 0 || n_small >= cfg.n_traces {
        return Err(GeneratorError::InvalidConfig(
            "n_small must lie in 1..n_traces",
        ));
    }
    Ok(sample_stream(machine, cfg, n_small, TRAIN_STREAM))
}

/// Evaluation traces drawn from a stream disjoint from the training one.
pub fn sample_held_out(machine: &Automaton, cfg: &GeneratorConfig, n: usize) -> Sample {
    sample_stream(machine, cfg, n, HELD_OUT_STREAM)
}

/// Fraction of `traces` on which `learned` emits exactly the recorded
/// outputs. Traces the learned machine cannot run count as disagreements.
pub fn output_agreement(learned: &Automaton, traces: &Sample) -> f64 {
    if traces.is_empty() {
        return 1.0;
    }
    let agree = traces
        .traces
        .iter()
        .filter(|t| {
            let expected: Vec<&str> = traces.output_texts(t);
            learned
                .transduce(traces.input_texts(t))
                .is_some_and(|got| got.iter().map(String::as_str).eq(expected))
        })
        .count();
    agree as f64 / traces.len() as f64
}
