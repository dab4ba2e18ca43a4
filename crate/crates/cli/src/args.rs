use std::path::PathBuf;

use clap::{ArgAction, Parser, ValueEnum};
use mergeloop::generator::GeneratorConfig;
use mergeloop::{Heuristic, HeuristicParams, Mode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RunMode {
    Batch,
    Interactive,
    Replay,
    Serve,
    Generate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HeuristicArg {
    Edsm,
    Mealy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceModeArg {
    Dfa,
    Mealy,
}

/// Interactive evidence-driven state merging.
#[derive(Debug, Parser)]
#[command(name = "mergeloop", version)]
pub struct Cli {
    /// Trace file (batch, interactive, replay).
    pub input: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = RunMode::Batch)]
    pub mode: RunMode,

    #[arg(long = "heuristic-name", alias = "heuristic_name", value_enum, default_value_t = HeuristicArg::Mealy)]
    pub heuristic: HeuristicArg,

    /// Trace file format; defaults to the one the heuristic scores.
    #[arg(long = "trace-mode", value_enum)]
    pub trace_mode: Option<TraceModeArg>,

    #[arg(long = "state-count", alias = "state_count", default_value_t = 0)]
    pub state_count: u64,

    #[arg(long = "symbol-count", alias = "symbol_count", default_value_t = 0)]
    pub symbol_count: u64,

    #[arg(long, aliases = ["lower_bound", "lower-bound"], default_value_t = 0)]
    pub lowerbound: u64,

    /// 1 to keep states below --state-count out of merging and promotion.
    #[arg(long, action = ArgAction::Set, value_parser = parse_switch, default_value = "0")]
    pub sinkson: bool,

    /// Accepted for compatibility; ignored.
    #[arg(long = "data-name", alias = "data_name")]
    pub data_name: Option<String>,

    /// Accepted for compatibility; ignored.
    #[arg(long)]
    pub satdfabound: Option<String>,

    /// Directory for models, DOT files and logs.
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,

    /// Command log to replay (replay mode).
    #[arg(long)]
    pub log: Option<PathBuf>,

    /// Listen address (serve mode); falls back to MERGELOOP_ADDR.
    #[arg(long)]
    pub addr: Option<String>,

    /// Write per-session artifacts below --out-dir (serve mode).
    #[arg(long = "write-artifacts")]
    pub write_artifacts: bool,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    #[arg(long, default_value_t = 6)]
    pub states: usize,

    #[arg(long, default_value_t = 4)]
    pub inputs: usize,

    #[arg(long, default_value_t = 4)]
    pub outputs: usize,

    #[arg(long, default_value_t = 1000)]
    pub traces: usize,

    #[arg(long = "stop-probability", default_value_t = 0.2)]
    pub stop_probability: f64,

    /// Also write the first N traces as `traces<N>.txt` (generate mode).
    #[arg(long)]
    pub undersample: Option<usize>,

    /// Also write N held-out traces from an independent stream (generate mode).
    #[arg(long = "held-out")]
    pub held_out: Option<usize>,
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "on" => Ok(true),
        "0" | "false" | "off" => Ok(false),
        _ => Err(format!("expected 0 or 1, got `{s}`")),
    }
}

impl Cli {
    pub fn heuristic(&self) -> Heuristic {
        match self.heuristic {
            HeuristicArg::Edsm => Heuristic::Edsm,
            HeuristicArg::Mealy => Heuristic::Mealy,
        }
    }

    pub fn trace_mode(&self) -> Mode {
        match self.trace_mode {
            Some(TraceModeArg::Dfa) => Mode::Dfa,
            Some(TraceModeArg::Mealy) => Mode::Mealy,
            None => self.heuristic().mode(),
        }
    }

    pub fn params(&self) -> HeuristicParams {
        HeuristicParams {
            state_count: self.state_count,
            symbol_count: self.symbol_count,
            lowerbound: self.lowerbound,
            sinkson: self.sinkson,
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            seed: self.seed,
            n_states: self.states,
            n_inputs: self.inputs,
            n_outputs: self.outputs,
            n_traces: self.traces,
            stop_probability: self.stop_probability,
        }
    }
}
