//! Interactive merge sessions, batch learning and command replay.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::automaton::{build_apta, AptaError, Automaton, Color, Mode, Sample, StateId};
use crate::heuristics::{is_sink, Heuristic, HeuristicParams, ParamError, ParamName};
use crate::merge::{
    enumerate_candidates, rank_candidates, touches_sink, trace_log, ConstraintSet, Inconsistency,
    MergeCandidate, MergeError, MergeRecord,
};

/// One user instruction, in the text grammar
/// `MERGE <rank>` | `MERGE <red> <blue>` | `UNDO` | `RESTART` | `LEAP <n>` |
/// `SET <param> <value>` | `FORCE <red> <blue>` | `INSERT <p> <q>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Merge(usize),
    MergePair(StateId, StateId),
    Undo,
    Restart,
    Leap(usize),
    Set(String, String),
    Force(StateId, StateId),
    Insert(StateId, StateId),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad command `{text}`: {reason}")]
pub struct CommandSyntaxError {
    pub text: String,
    pub reason: &'static str,
}

impl FromStr for Command {
    type Err = CommandSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| CommandSyntaxError {
            text: s.trim().to_string(),
            reason,
        };
        let tokens: Vec<&str> = s.split_whitespace().collect();
        let Some((keyword, args)) = tokens.split_first() else {
            return Err(err("empty command"));
        };
        let number = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| err("expected a non-negative integer"))
        };
        let positive = |t: &str| match number(t)? {
            0 => Err(err("expected a positive integer")),
            n => Ok(n),
        };
        let cmd = match (keyword.to_ascii_uppercase().as_str(), args) {
            ("MERGE", [rank]) => Command::Merge(positive(rank)?),
            ("MERGE", [red, blue]) => Command::MergePair(number(red)?, number(blue)?),
            ("UNDO", []) => Command::Undo,
            ("RESTART", []) => Command::Restart,
            ("LEAP", [n]) => Command::Leap(positive(n)?),
            ("SET", [param, value]) => Command::Set(param.to_string(), value.to_string()),
            ("FORCE", [red, blue]) => Command::Force(number(red)?, number(blue)?),
            ("INSERT", [p, q]) => Command::Insert(number(p)?, number(q)?),
            ("MERGE" | "UNDO" | "RESTART" | "LEAP" | "SET" | "FORCE" | "INSERT", _) => {
                return Err(err("wrong number of arguments"))
            }
            _ => return Err(err("unknown command")),
        };
        Ok(cmd)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Merge(rank) => write!(f, "MERGE {rank}"),
            Command::MergePair(r, b) => write!(f, "MERGE {r} {b}"),
            Command::Undo => f.write_str("UNDO"),
            Command::Restart => f.write_str("RESTART"),
            Command::Leap(n) => write!(f, "LEAP {n}"),
            Command::Set(p, v) => write!(f, "SET {p} {v}"),
            Command::Force(r, b) => write!(f, "FORCE {r} {b}"),
            Command::Insert(p, q) => write!(f, "INSERT {p} {q}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CommandError {
    #[error("no candidate with rank {0}")]
    UnknownRank(usize),
    #[error("({red}, {blue}) is not a listed candidate")]
    NotACandidate { red: StateId, blue: StateId },
    #[error("history is empty")]
    EmptyHistory,
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("invalid value `{value}` for {param}")]
    InvalidValue { param: String, value: String },
    #[error("invalid state pair ({0}, {1}): {2}")]
    InvalidStatePair(StateId, StateId, &'static str),
}

impl CommandError {
    /// Stable name of the error kind, used by the service and replay logs.
    pub fn kind(&self) -> &'static str {
        match self {
            CommandError::UnknownRank(_) => "UnknownRank",
            CommandError::NotACandidate { .. } => "NotACandidate",
            CommandError::EmptyHistory => "EmptyHistory",
            CommandError::UnknownParam(_) => "UnknownParam",
            CommandError::InvalidValue { .. } => "InvalidValue",
            CommandError::InvalidStatePair(..) => "InvalidStatePair",
        }
    }
}

impl From<ParamError> for CommandError {
    fn from(e: ParamError) -> Self {
        match e {
            ParamError::UnknownParam(p) => CommandError::UnknownParam(p),
            ParamError::InvalidValue { param, value } => CommandError::InvalidValue {
                param: param.to_string(),
                value,
            },
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error(transparent)]
    Apta(#[from] AptaError),
    #[error("heuristic `{heuristic}` cannot score {mode} samples")]
    HeuristicMismatch { heuristic: Heuristic, mode: Mode },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("command {index} failed: {cause}")]
pub struct ReplayError {
    pub index: usize,
    pub cause: CommandError,
}

/// What a successfully applied command did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    /// Merges (plain or forced) executed by the command.
    pub merges: usize,
    /// Records pushed (merges and automatic promotions).
    pub records: usize,
}

/// The full state of an interactive learning session.
#[derive(Clone, Debug)]
pub struct Session {
    sample: Sample,
    apta: Automaton,
    automaton: Automaton,
    history: Vec<MergeRecord>,
    params: HeuristicParams,
    constraints: ConstraintSet,
    heuristic: Heuristic,
    candidates: Vec<MergeCandidate>,
    commands: Vec<Command>,
}

impl Session {
    /// Builds the prefix tree, promotes blue states that cannot be merged
    /// anywhere and computes the first candidate list.
    pub fn new(
        sample: Sample,
        params: HeuristicParams,
        heuristic: Heuristic,
    ) -> Result<Self, SessionError> {
        if heuristic.mode() != sample.mode {
            return Err(SessionError::HeuristicMismatch {
                heuristic,
                mode: sample.mode,
            });
        }
        let apta = build_apta(&sample)?;
        let mut session = Self {
            sample,
            automaton: apta.clone(),
            apta,
            history: Vec::new(),
            params,
            constraints: ConstraintSet::new(),
            heuristic,
            candidates: Vec::new(),
            commands: Vec::new(),
        };
        session.stabilize();
        Ok(session)
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    pub fn automaton(&self) -> &Automaton {
        &self.automaton
    }

    pub fn apta(&self) -> &Automaton {
        &self.apta
    }

    pub fn history(&self) -> &[MergeRecord] {
        &self.history
    }

    pub fn params(&self) -> &HeuristicParams {
        &self.params
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn heuristic(&self) -> Heuristic {
        self.heuristic
    }

    pub fn candidates(&self) -> &[MergeCandidate] {
        &self.candidates
    }

    /// Commands applied successfully so far, in order.
    pub fn commands(&self) -> &[Command] {
        &self.commands
    }

    /// Number of operations on the history stack.
    pub fn step(&self) -> usize {
        self.history.len()
    }

    pub fn trace_log(&self) -> String {
        trace_log(&self.history)
    }

    /// The automaton before the most recent history entry.
    pub fn previous(&self) -> Option<Automaton> {
        let last = self.history.last()?;
        let mut prev = self.automaton.clone();
        prev.undo(last)
            .expect("history top is always the last applied record");
        Some(prev)
    }

    fn push(&mut self, record: MergeRecord) {
        self.history.push(record);
    }

    /// Promotes, lowest id first, every non-sink blue state that has no
    /// consistent red partner scoring at least the lowerbound, then refreshes
    /// the candidate list. Returns the number of promotions.
    pub fn stabilize(&mut self) -> usize {
        // Promotions only recolor, so pair evaluations stay valid across them.
        let mut cache: HashMap<(StateId, StateId), Result<u64, Inconsistency>> = HashMap::new();
        let mut promoted = 0;
        loop {
            let reds = self.automaton.states_with_color(Color::Red);
            let blues = self.automaton.states_with_color(Color::Blue);
            let mut list = Vec::new();
            let mut stranded = None;
            for &blue in &blues {
                let blue_sink = self.is_sink(blue);
                let mut partnered = false;
                for &red in &reds {
                    if blue_sink || self.is_sink(red) {
                        continue;
                    }
                    let result = *cache.entry((red, blue)).or_insert_with(|| {
                        self.automaton.evaluate_merge(
                            red,
                            blue,
                            self.heuristic,
                            &self.params,
                            &self.constraints,
                        )
                    });
                    if let Ok(score) = result {
                        if score >= self.params.lowerbound {
                            partnered = true;
                            list.push(MergeCandidate {
                                rank: 0,
                                red,
                                blue,
                                score,
                            });
                        }
                    }
                }
                if !partnered && !blue_sink && stranded.is_none() {
                    stranded = Some(blue);
                }
            }
            match stranded {
                Some(blue) => {
                    let record = self
                        .automaton
                        .promote(blue)
                        .expect("stranded state is blue");
                    self.push(record);
                    promoted += 1;
                }
                None => {
                    self.candidates = rank_candidates(list);
                    return promoted;
                }
            }
        }
    }

    fn is_sink(&self, id: StateId) -> bool {
        self.automaton
            .state(id)
            .is_some_and(|s| is_sink(s, &self.params))
    }

    fn refresh_candidates(&mut self) {
        self.candidates = enumerate_candidates(
            &mut self.automaton,
            self.heuristic,
            &self.params,
            &self.constraints,
        );
    }

    fn execute(&mut self, red: StateId, blue: StateId) -> Outcome {
        let record = self
            .automaton
            .try_merge(red, blue, self.heuristic, &self.params, &self.constraints)
            .expect("listed candidates always merge");
        self.push(record);
        let promoted = self.stabilize();
        Outcome {
            merges: 1,
            records: 1 + promoted,
        }
    }

    fn check_live_pair(&self, p: StateId, q: StateId) -> Result<(), CommandError> {
        if p == q {
            return Err(CommandError::InvalidStatePair(p, q, "states must differ"));
        }
        if !self.automaton.is_live(p) || !self.automaton.is_live(q) {
            return Err(CommandError::InvalidStatePair(p, q, "state does not exist"));
        }
        Ok(())
    }

    /// Applies one command. On error the session is unchanged.
    pub fn apply(&mut self, command: &Command) -> Result<Outcome, CommandError> {
        let outcome = self.dispatch(command)?;
        self.commands.push(command.clone());
        Ok(outcome)
    }

    fn dispatch(&mut self, command: &Command) -> Result<Outcome, CommandError> {
        match *command {
            Command::Merge(rank) => {
                let c = *rank
                    .checked_sub(1)
                    .and_then(|i| self.candidates.get(i))
                    .ok_or(CommandError::UnknownRank(rank))?;
                Ok(self.execute(c.red, c.blue))
            }
            Command::MergePair(red, blue) => {
                if !self
                    .candidates
                    .iter()
                    .any(|c| c.red == red && c.blue == blue)
                {
                    return Err(CommandError::NotACandidate { red, blue });
                }
                Ok(self.execute(red, blue))
            }
            Command::Undo => {
                let record = self.history.pop().ok_or(CommandError::EmptyHistory)?;
                self.automaton
                    .undo(&record)
                    .expect("history top is always the last applied record");
                self.refresh_candidates();
                Ok(Outcome::default())
            }
            Command::Restart => {
                self.automaton = self.apta.clone();
                self.history.clear();
                let promoted = self.stabilize();
                Ok(Outcome {
                    merges: 0,
                    records: promoted,
                })
            }
            Command::Leap(n) => {
                let mut total = Outcome::default();
                for _ in 0..n {
                    let Some(top) = self.candidates.first().copied() else {
                        break;
                    };
                    let step = self.execute(top.red, top.blue);
                    total.merges += step.merges;
                    total.records += step.records;
                }
                Ok(total)
            }
            Command::Set(ref param, ref value) => {
                let name: ParamName = param.parse()?;
                let mut params = self.params;
                params.set(name, value)?;
                self.params = params;
                let promoted = self.stabilize();
                Ok(Outcome {
                    merges: 0,
                    records: promoted,
                })
            }
            Command::Force(red, blue) => {
                let record = self
                    .automaton
                    .force_merge(red, blue, self.heuristic, &self.params)
                    .map_err(|e| match e {
                        MergeError::InvalidStatePair { red, blue, reason } => {
                            CommandError::InvalidStatePair(red, blue, reason)
                        }
                        other => unreachable!("forced merges only fail on bad pairs: {other}"),
                    })?;
                self.push(record);
                let promoted = self.stabilize();
                Ok(Outcome {
                    merges: 1,
                    records: 1 + promoted,
                })
            }
            Command::Insert(p, q) => {
                self.check_live_pair(p, q)?;
                self.constraints.insert(p, q);
                self.refresh_candidates();
                Ok(Outcome::default())
            }
        }
    }
}

/// Applies `log` to a fresh session, failing on the first rejected command.
pub fn replay(
    sample: Sample,
    params: HeuristicParams,
    heuristic: Heuristic,
    log: &[Command],
) -> Result<Session, ReplayFailure> {
    let mut session = Session::new(sample, params, heuristic)?;
    for (index, command) in log.iter().enumerate() {
        session
            .apply(command)
            .map_err(|cause| ReplayError { index, cause })?;
    }
    Ok(session)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayFailure {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Command(#[from] ReplayError),
}

/// Fully automatic learning: promote any blue state without a partner, else
/// execute the best-scoring merge, until no candidate remains.
///
/// Returns the final automaton and its trace log.
pub fn run_batch(
    sample: &Sample,
    params: &HeuristicParams,
    heuristic: Heuristic,
) -> Result<(Automaton, String), SessionError> {
    if heuristic.mode() != sample.mode {
        return Err(SessionError::HeuristicMismatch {
            heuristic,
            mode: sample.mode,
        });
    }
    let mut a = build_apta(sample)?;
    let constraints = ConstraintSet::new();
    let mut log = Vec::new();
    // Cleared on every merge; promotions leave pair evaluations unchanged.
    let mut scores: HashMap<(StateId, StateId), Option<u64>> = HashMap::new();
    loop {
        let reds = a.states_with_color(Color::Red);
        let blues = a.states_with_color(Color::Blue);
        let mut list = Vec::new();
        for &red in &reds {
            for &blue in &blues {
                if touches_sink(&a, red, blue, params) {
                    continue;
                }
                let score = *scores.entry((red, blue)).or_insert_with(|| {
                    a.evaluate_merge(red, blue, heuristic, params, &constraints)
                        .ok()
                        .filter(|&s| s >= params.lowerbound)
                });
                if let Some(score) = score {
                    list.push(MergeCandidate {
                        rank: 0,
                        red,
                        blue,
                        score,
                    });
                }
            }
        }
        let candidates = rank_candidates(list);
        let stranded = blues.into_iter().find(|&b| {
            !a.state(b).is_some_and(|s| is_sink(s, params))
                && !candidates.iter().any(|c| c.blue == b)
        });
        if let Some(blue) = stranded {
            log.push(a.promote(blue).expect("stranded state is blue").token());
            continue;
        }
        let Some(best) = candidates.first() else {
            break;
        };
        let record = a
            .try_merge(best.red, best.blue, heuristic, params, &constraints)
            .expect("listed candidates always merge");
        log.push(record.token());
        scores.clear();
    }
    Ok((a, log.join(" ")))
}
