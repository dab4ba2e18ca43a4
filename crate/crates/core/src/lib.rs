//! Interactive evidence-driven state merging.
//!
//! A [`Session`] starts from the augmented prefix tree of a [`Sample`] and
//! reduces it by merging blue fringe states into red core states. Every step
//! can be inspected, undone, forced or re-parameterized; always taking the
//! top-ranked candidate reproduces [`run_batch`].
//!
//! ```
//! use mergeloop::{parse_traces, Command, Heuristic, Mode, Session};
//!
//! let sample = parse_traces("2 1\n0 2 a/x a/x\n0 1 a/x\n", Mode::Mealy).unwrap();
//! let mut session = Session::new(sample, Default::default(), Heuristic::Mealy).unwrap();
//! session.apply(&Command::Merge(1)).unwrap();
//! assert_eq!(session.trace_log(), "m1");
//! assert_eq!(session.automaton().len(), 1);
//! ```

pub mod automaton;
pub mod export;
pub mod generator;
pub mod heuristics;
pub mod io;
pub mod merge;
pub mod session;

pub use automaton::{
    build_apta, Alphabet, AptaError, Automaton, Classification, Color, Edge, Label, Mode, Sample,
    StateId, StateInfo, Symbol, Trace, Transition,
};
pub use export::{from_json, to_dot, to_json, AutomatonDoc};
pub use generator::{generate_machine, sample_traces, GeneratorConfig, GeneratorError};
pub use heuristics::{is_sink, merge_score, Heuristic, HeuristicParams, PairScore, ParamName};
pub use io::{parse_command_log, parse_traces, serialize_traces, write_step_artifacts};
pub use merge::{
    enumerate_candidates, trace_log, ConstraintSet, Inconsistency, MergeCandidate, MergeError,
    MergeRecord, RecordKind, Rewrite,
};
pub use session::{replay, run_batch, Command, CommandError, Outcome, ReplayError, Session};
