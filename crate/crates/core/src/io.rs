//! Trace files, command logs and per-step artifacts.
//!
//! Trace files use an Abbadingo-style layout: a header line
//! `<num_traces> <alphabet_size>` followed by one trace per line,
//! `<label> <length> <symbol>...`. In Mealy mode every symbol is an
//! `<input>/<output>` pair and the label column is present but ignored.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::automaton::{Label, Mode, Sample, StateId, Trace};
use crate::export::{to_document, to_dot, AutomatonDoc};
use crate::heuristics::{Heuristic, HeuristicParams};
use crate::session::{Command, CommandSyntaxError, Session};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceErrorKind {
    #[error("header must be `<num_traces> <alphabet_size>`")]
    MalformedHeader,
    #[error("header declares {declared} {what} but the file has {found}")]
    HeaderMismatch {
        what: &'static str,
        declared: usize,
        found: usize,
    },
    #[error("bad label `{0}`")]
    BadLabel(String),
    #[error("declared length {declared} but found {found} symbols")]
    LengthMismatch { declared: String, found: usize },
    #[error("`{0}` is not an <input>/<output> pair")]
    MalformedSymbolPair(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct TraceParseError {
    /// 1-based line number in the input text.
    pub line: usize,
    pub kind: TraceErrorKind,
}

pub fn parse_traces(text: &str, mode: Mode) -> Result<Sample, TraceParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or(TraceParseError {
        line: 1,
        kind: TraceErrorKind::MalformedHeader,
    })?;
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| TraceParseError {
            line: header_line,
            kind: TraceErrorKind::MalformedHeader,
        })?;
    let [num_traces, alphabet_size] = fields[..] else {
        return Err(TraceParseError {
            line: header_line,
            kind: TraceErrorKind::MalformedHeader,
        });
    };

    let mut sample = Sample::new(mode);
    let mut last_line = header_line;
    for (line, body) in lines {
        last_line = line;
        let trace =
            parse_trace_line(&mut sample, body).map_err(|kind| TraceParseError { line, kind })?;
        sample.traces.push(trace);
    }

    if sample.traces.len() != num_traces {
        return Err(TraceParseError {
            line: if sample.traces.len() < num_traces {
                last_line
            } else {
                header_line
            },
            kind: TraceErrorKind::HeaderMismatch {
                what: "traces",
                declared: num_traces,
                found: sample.traces.len(),
            },
        });
    }
    if sample.inputs.len() != alphabet_size {
        return Err(TraceParseError {
            line: header_line,
            kind: TraceErrorKind::HeaderMismatch {
                what: "input symbols",
                declared: alphabet_size,
                found: sample.inputs.len(),
            },
        });
    }
    Ok(sample)
}

fn parse_trace_line(sample: &mut Sample, body: &str) -> Result<Trace, TraceErrorKind> {
    let mut tokens = body.split_whitespace();
    let label_text = tokens.next().unwrap_or_default();
    let label = match (sample.mode, label_text) {
        (Mode::Dfa, "1") => Label::Accept,
        (Mode::Dfa, "0") => Label::Reject,
        (Mode::Mealy, t) if t.parse::<i64>().is_ok() => Label::None,
        (_, t) => return Err(TraceErrorKind::BadLabel(t.to_string())),
    };
    let length_text = tokens.next().unwrap_or_default();
    let symbols: Vec<&str> = tokens.collect();
    if length_text.parse::<usize>().ok() != Some(symbols.len()) {
        return Err(TraceErrorKind::LengthMismatch {
            declared: length_text.to_string(),
            found: symbols.len(),
        });
    }

    let mut trace = Trace {
        label,
        inputs: Vec::with_capacity(symbols.len()),
        outputs: Vec::new(),
    };
    for token in symbols {
        match sample.mode {
            Mode::Dfa => trace.inputs.push(sample.inputs.intern(token)),
            Mode::Mealy => {
                let (input, output) = token
                    .split_once('/')
                    .filter(|(i, o)| !i.is_empty() && !o.is_empty() && !o.contains('/'))
                    .ok_or_else(|| TraceErrorKind::MalformedSymbolPair(token.to_string()))?;
                trace.inputs.push(sample.inputs.intern(input));
                trace.outputs.push(sample.outputs.intern(output));
            }
        }
    }
    Ok(trace)
}

/// Writes `sample` in the trace-file format; the inverse of [`parse_traces`].
pub fn serialize_traces(sample: &Sample) -> String {
    let used: HashSet<_> = sample.traces.iter().flat_map(|t| &t.inputs).collect();
    let mut out = format!("{} {}\n", sample.traces.len(), used.len());
    for trace in &sample.traces {
        let label = match trace.label {
            Label::Accept => "1",
            Label::Reject | Label::None => "0",
        };
        out.push_str(label);
        let _ = write!(out, " {}", trace.inputs.len());
        for (i, &input) in trace.inputs.iter().enumerate() {
            out.push(' ');
            out.push_str(sample.inputs.text(input));
            if sample.mode == Mode::Mealy {
                out.push('/');
                out.push_str(sample.outputs.text(trace.outputs[i]));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {source}")]
pub struct LogParseError {
    pub line: usize,
    pub source: CommandSyntaxError,
}

/// Parses a command log: one command per line, blank lines and lines
/// starting with `#` ignored.
pub fn parse_command_log(text: &str) -> Result<Vec<Command>, LogParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .map(|(i, l)| {
            l.parse().map_err(|source| LogParseError {
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn format_command_log(commands: &[Command]) -> String {
    commands.iter().map(|c| format!("{c}\n")).collect()
}

/// Serializable summary of a session, written as `session.json`.
#[derive(Debug, Serialize)]
pub struct SessionSnapshot {
    pub heuristic: Heuristic,
    pub mode: Mode,
    pub step: usize,
    pub params: HeuristicParams,
    pub constraints: Vec<(StateId, StateId)>,
    pub trace_log: String,
    pub commands: Vec<String>,
    pub candidates: usize,
    pub automaton: AutomatonDoc,
}

impl SessionSnapshot {
    pub fn of(session: &Session) -> Self {
        Self {
            heuristic: session.heuristic(),
            mode: session.sample().mode,
            step: session.step(),
            params: *session.params(),
            constraints: session
                .constraints()
                .representatives(session.automaton())
                .into_iter()
                .collect(),
            trace_log: session.trace_log(),
            commands: session.commands().iter().map(ToString::to_string).collect(),
            candidates: session.candidates().len(),
            automaton: to_document(session.automaton()),
        }
    }
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Writes `current.dot`, `previous.dot` (from step 1 on), `trace.log` and
/// `session.json` into `out_dir`, returning the paths written.
pub fn write_step_artifacts(session: &Session, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let current = out_dir.join("current.dot");
    write_atomic(&current, to_dot(session.automaton()).as_bytes())?;
    written.push(current);

    let previous = out_dir.join("previous.dot");
    match session.previous() {
        Some(prev) => {
            write_atomic(&previous, to_dot(&prev).as_bytes())?;
            written.push(previous);
        }
        None => match fs::remove_file(&previous) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
            _ => {}
        },
    }

    let log = out_dir.join("trace.log");
    write_atomic(&log, format!("{}\n", session.trace_log()).as_bytes())?;
    written.push(log);

    let snapshot = out_dir.join("session.json");
    let json = serde_json::to_string_pretty(&SessionSnapshot::of(session))
        .expect("session snapshots always serialize");
    write_atomic(&snapshot, json.as_bytes())?;
    written.push(snapshot);
    Ok(written)
}
