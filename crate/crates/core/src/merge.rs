//! Journaled state merging over the red-blue fringe.
//!
//! Every elementary rewrite performed by a merge or promotion is recorded in
//! the operation's [`MergeRecord`]; undoing replays the log backwards. Trial
//! merges used for scoring run the same fold and are rolled back immediately.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Automaton, Color, Edge, Link, Mode, StateId, Symbol};
use crate::heuristics::{is_sink, Heuristic, HeuristicParams, PairScore, ScoreTally};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Merge,
    ForcedMerge,
    Promote,
}

/// One elementary, invertible change to an automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rewrite {
    /// `state` was identified with `into`.
    Identify {
        state: StateId,
        into: StateId,
    },
    /// Statistics of `state` before they were summed.
    Stats {
        state: StateId,
        occurrences: u64,
        accept: u64,
        reject: u64,
    },
    /// Transition of `state` on `input` before it was added or rewritten.
    Edge {
        state: StateId,
        input: Symbol,
        prev: Option<Edge>,
    },
    Color {
        state: StateId,
        prev: Color,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeRecord {
    pub kind: RecordKind,
    /// `None` for promotions.
    pub red: Option<StateId>,
    pub blue: StateId,
    /// Evidence score for merges, occurrence count for promotions.
    pub score: u64,
    pub fold_log: Vec<Rewrite>,
    serial: u64,
}

impl MergeRecord {
    /// Trace-log token: `m<score>`, `f<score>` or `x<occurrences>`.
    pub fn token(&self) -> String {
        let prefix = match self.kind {
            RecordKind::Merge => 'm',
            RecordKind::ForcedMerge => 'f',
            RecordKind::Promote => 'x',
        };
        format!("{prefix}{}", self.score)
    }
}

/// Space-separated trace log of a history, oldest first.
pub fn trace_log<'a, I>(records: I) -> String
where
    I: IntoIterator<Item = &'a MergeRecord>,
{
    records
        .into_iter()
        .map(MergeRecord::token)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Inconsistency {
    LabelConflict,
    OutputConflict,
    ConstraintViolation,
    BelowLowerbound,
}

impl fmt::Display for Inconsistency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Inconsistency::LabelConflict => "label-conflict",
            Inconsistency::OutputConflict => "output-conflict",
            Inconsistency::ConstraintViolation => "constraint-violation",
            Inconsistency::BelowLowerbound => "below-lowerbound",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MergeError {
    #[error("merge is inconsistent: {0}")]
    Inconsistent(Inconsistency),
    #[error("invalid state pair ({red}, {blue}): {reason}")]
    InvalidStatePair {
        red: StateId,
        blue: StateId,
        reason: &'static str,
    },
    #[error("state {0} is not blue")]
    NotBlue(StateId),
    #[error("record is not the most recently applied operation")]
    StaleRecord,
}

/// Pairs of states that must never be identified.
///
/// Pairs are stored as given and compared through the automaton's
/// representatives, so they follow merges and undos without rewriting.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pairs: BTreeSet<(StateId, StateId)>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, p: StateId, q: StateId) -> bool {
        self.pairs.insert((p.min(q), p.max(q)))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn violated_by(&self, a: &Automaton) -> bool {
        self.pairs.iter().any(|&(p, q)| a.find(p) == a.find(q))
    }

    /// The pairs expressed in current representative ids.
    pub fn representatives(&self, a: &Automaton) -> BTreeSet<(StateId, StateId)> {
        self.pairs
            .iter()
            .map(|&(p, q)| {
                let (p, q) = (a.find(p), a.find(q));
                (p.min(q), p.max(q))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeCandidate {
    pub rank: usize,
    pub red: StateId,
    pub blue: StateId,
    pub score: u64,
}

struct Fold<'a> {
    heuristic: Heuristic,
    params: &'a HeuristicParams,
    forced: bool,
    log: Vec<Rewrite>,
    tally: ScoreTally,
}

impl Automaton {
    fn apply_inverse(&mut self, rewrite: Rewrite) {
        match rewrite {
            Rewrite::Identify { state, .. } => self.slots[state].link = Link::Live,
            Rewrite::Stats {
                state,
                occurrences,
                accept,
                reject,
            } => {
                let info = &mut self.slots[state].info;
                info.occurrences = occurrences;
                info.accept = accept;
                info.reject = reject;
            }
            Rewrite::Edge { state, input, prev } => {
                let edges = &mut self.slots[state].info.edges;
                match prev {
                    Some(edge) => edges.insert(input, edge),
                    None => edges.remove(&input),
                };
            }
            Rewrite::Color { state, prev } => self.slots[state].info.color = prev,
        }
    }

    fn rollback(&mut self, log: Vec<Rewrite>) {
        for rewrite in log.into_iter().rev() {
            self.apply_inverse(rewrite);
        }
    }

    /// Identifies `y` with `x` and folds their subtrees until deterministic.
    /// Returns false on the first conflicting pair unless the fold is forced.
    fn fold(&mut self, x: StateId, y: StateId, ctx: &mut Fold<'_>) -> bool {
        let (x, y) = (self.find(x), self.find(y));
        if x == y {
            return true;
        }
        let pair = ctx
            .heuristic
            .score_pair(&self.slots[x].info, &self.slots[y].info, ctx.params);
        ctx.tally.add(pair);
        if pair == PairScore::Conflict && !ctx.forced {
            return false;
        }

        ctx.log.push(Rewrite::Identify { state: y, into: x });
        self.slots[y].link = Link::MergedInto(x);
        let (occ, acc, rej) = {
            let q = &self.slots[y].info;
            (q.occurrences, q.accept, q.reject)
        };
        let info = &mut self.slots[x].info;
        ctx.log.push(Rewrite::Stats {
            state: x,
            occurrences: info.occurrences,
            accept: info.accept,
            reject: info.reject,
        });
        info.occurrences += occ;
        info.accept += acc;
        info.reject += rej;

        let moved: Vec<(Symbol, Edge)> = self.slots[y]
            .info
            .edges
            .iter()
            .map(|(&i, e)| (i, e.clone()))
            .collect();
        for (input, ey) in moved {
            let x = self.find(x);
            let existing = self.slots[x].info.edges.get(&input).cloned();
            ctx.log.push(Rewrite::Edge {
                state: x,
                input,
                prev: existing.clone(),
            });
            match existing {
                Some(ex) => {
                    self.slots[x].info.edges.insert(
                        input,
                        Edge {
                            target: ex.target,
                            output: ex.output,
                            count: ex.count + ey.count,
                        },
                    );
                    if !self.fold(ex.target, ey.target, ctx) {
                        return false;
                    }
                }
                None => {
                    self.slots[x].info.edges.insert(input, ey);
                }
            }
        }
        true
    }

    fn conflict_kind(&self) -> Inconsistency {
        match self.mode {
            Mode::Dfa => Inconsistency::LabelConflict,
            Mode::Mealy => Inconsistency::OutputConflict,
        }
    }

    fn check_pair(&self, red: StateId, blue: StateId) -> Result<(), MergeError> {
        let invalid = |reason| MergeError::InvalidStatePair { red, blue, reason };
        if red == blue {
            return Err(invalid("states must differ"));
        }
        match (self.color(red), self.color(blue)) {
            (Some(Color::Red), Some(Color::Blue)) => Ok(()),
            (None, _) | (_, None) => Err(invalid("state does not exist")),
            _ => Err(invalid("expected a red and a blue state")),
        }
    }

    /// Runs the fold of `blue` into `red`. On success the changes stay applied
    /// and the journal plus score are returned; on failure nothing changes.
    fn run_fold(
        &mut self,
        red: StateId,
        blue: StateId,
        heuristic: Heuristic,
        params: &HeuristicParams,
        constraints: Option<&ConstraintSet>,
        forced: bool,
    ) -> Result<(Vec<Rewrite>, u64), Inconsistency> {
        let mut ctx = Fold {
            heuristic,
            params,
            forced,
            log: Vec::new(),
            tally: ScoreTally::default(),
        };
        if !self.fold(red, blue, &mut ctx) {
            self.rollback(ctx.log);
            return Err(self.conflict_kind());
        }
        if constraints.is_some_and(|c| c.violated_by(self)) {
            self.rollback(ctx.log);
            return Err(Inconsistency::ConstraintViolation);
        }
        Ok((ctx.log, ctx.tally.consistent_total()))
    }

    /// Scores the merge of `blue` into `red` without changing the automaton.
    /// The lowerbound is not applied.
    pub fn evaluate_merge(
        &mut self,
        red: StateId,
        blue: StateId,
        heuristic: Heuristic,
        params: &HeuristicParams,
        constraints: &ConstraintSet,
    ) -> Result<u64, Inconsistency> {
        let (log, score) = self.run_fold(red, blue, heuristic, params, Some(constraints), false)?;
        self.rollback(log);
        Ok(score)
    }

    /// Recolors the fringe: every non-red target of a red state is blue, every
    /// other non-red state white.
    fn recolor(&mut self, log: &mut Vec<Rewrite>) {
        let mut fringe = BTreeSet::new();
        for s in self.states().filter(|s| s.color == Color::Red) {
            for e in s.edges.values() {
                fringe.insert(self.find(e.target));
            }
        }
        for id in 0..self.slots.len() {
            if self.slots[id].link != Link::Live {
                continue;
            }
            let prev = self.slots[id].info.color;
            if prev == Color::Red {
                continue;
            }
            let next = if fringe.contains(&id) {
                Color::Blue
            } else {
                Color::White
            };
            if next != prev {
                log.push(Rewrite::Color { state: id, prev });
                self.slots[id].info.color = next;
            }
        }
    }

    fn push_record(
        &mut self,
        kind: RecordKind,
        red: Option<StateId>,
        blue: StateId,
        score: u64,
        fold_log: Vec<Rewrite>,
    ) -> MergeRecord {
        let serial = self.next_serial;
        self.next_serial += 1;
        self.applied.push(serial);
        MergeRecord {
            kind,
            red,
            blue,
            score,
            fold_log,
            serial,
        }
    }

    /// Merges blue state `blue` into red state `red`.
    ///
    /// Fails without touching the automaton if any identified pair conflicts,
    /// a constraint pair would collapse, or the score is below the lowerbound.
    pub fn try_merge(
        &mut self,
        red: StateId,
        blue: StateId,
        heuristic: Heuristic,
        params: &HeuristicParams,
        constraints: &ConstraintSet,
    ) -> Result<MergeRecord, MergeError> {
        self.check_pair(red, blue)?;
        let (mut log, score) = self
            .run_fold(red, blue, heuristic, params, Some(constraints), false)
            .map_err(MergeError::Inconsistent)?;
        if score < params.lowerbound {
            self.rollback(log);
            return Err(MergeError::Inconsistent(Inconsistency::BelowLowerbound));
        }
        self.recolor(&mut log);
        Ok(self.push_record(RecordKind::Merge, Some(red), blue, score, log))
    }

    /// Merges regardless of conflicts, constraints and lowerbound. Where the
    /// two sides disagree, the red side's transition outputs are kept. The
    /// score counts only the consistent pairs.
    pub fn force_merge(
        &mut self,
        red: StateId,
        blue: StateId,
        heuristic: Heuristic,
        params: &HeuristicParams,
    ) -> Result<MergeRecord, MergeError> {
        self.check_pair(red, blue)?;
        let (mut log, score) = self
            .run_fold(red, blue, heuristic, params, None, true)
            .expect("forced folds cannot fail");
        self.recolor(&mut log);
        Ok(self.push_record(RecordKind::ForcedMerge, Some(red), blue, score, log))
    }

    /// Colors `blue` red and its non-red children blue.
    pub fn promote(&mut self, blue: StateId) -> Result<MergeRecord, MergeError> {
        if self.color(blue) != Some(Color::Blue) {
            return Err(MergeError::NotBlue(blue));
        }
        let mut log = vec![Rewrite::Color {
            state: blue,
            prev: Color::Blue,
        }];
        self.slots[blue].info.color = Color::Red;
        self.recolor(&mut log);
        let occurrences = self.slots[blue].info.occurrences;
        Ok(self.push_record(RecordKind::Promote, None, blue, occurrences, log))
    }

    /// Reverts `record`, which must be the most recently applied one.
    pub fn undo(&mut self, record: &MergeRecord) -> Result<(), MergeError> {
        if self.applied.last() != Some(&record.serial) {
            return Err(MergeError::StaleRecord);
        }
        self.applied.pop();
        self.rollback(record.fold_log.clone());
        Ok(())
    }
}

/// Sorts by score descending, then red id, then blue id, and assigns ranks.
pub fn rank_candidates(mut list: Vec<MergeCandidate>) -> Vec<MergeCandidate> {
    list.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(a.red.cmp(&b.red))
            .then(a.blue.cmp(&b.blue))
    });
    for (i, c) in list.iter_mut().enumerate() {
        c.rank = i + 1;
    }
    list
}

/// Whether either side of the pair is excluded as a sink.
pub fn touches_sink(a: &Automaton, red: StateId, blue: StateId, params: &HeuristicParams) -> bool {
    [red, blue]
        .iter()
        .any(|&id| a.state(id).is_some_and(|s| is_sink(s, params)))
}

/// Every red/blue pair whose merge is consistent with score at least the
/// lowerbound, ranked. The automaton is left unchanged.
pub fn enumerate_candidates(
    a: &mut Automaton,
    heuristic: Heuristic,
    params: &HeuristicParams,
    constraints: &ConstraintSet,
) -> Vec<MergeCandidate> {
    let reds = a.states_with_color(Color::Red);
    let blues = a.states_with_color(Color::Blue);
    let mut list = Vec::new();
    for &red in &reds {
        for &blue in &blues {
            if touches_sink(a, red, blue, params) {
                continue;
            }
            if let Ok(score) = a.evaluate_merge(red, blue, heuristic, params, constraints) {
                if score >= params.lowerbound {
                    list.push(MergeCandidate {
                        rank: 0,
                        red,
                        blue,
                        score,
                    });
                }
            }
        }
    }
    rank_candidates(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{build_apta, Sample};
    use crate::export::to_json;

    fn params() -> HeuristicParams {
        HeuristicParams::default()
    }

    #[test]
    fn leaf_merge_scores_zero() {
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[("a", "x")]);
        s.push_io(&[("b", "x")]);
        let mut a = build_apta(&s).unwrap();
        a.promote(1).unwrap();
        let rec = a
            .try_merge(1, 2, Heuristic::Mealy, &params(), &ConstraintSet::new())
            .unwrap();
        assert_eq!(rec.score, 0);
        assert_eq!(rec.token(), "m0");
        assert!(!a.is_live(2));
        assert_eq!(a.target(0, Symbol(1)), Some(1));
    }

    #[test]
    fn label_conflict_leaves_input_untouched() {
        let mut s = Sample::new(Mode::Dfa);
        s.push_word(true, &[]);
        s.push_word(false, &["a"]);
        let mut a = build_apta(&s).unwrap();
        let before = to_json(&a);
        let err = a
            .try_merge(0, 1, Heuristic::Edsm, &params(), &ConstraintSet::new())
            .unwrap_err();
        assert_eq!(err, MergeError::Inconsistent(Inconsistency::LabelConflict));
        assert_eq!(to_json(&a), before);
    }

    // Chain 0 -a/x-> 1 -a/y-> 2. Merging 1 into 0 makes 0 loop on a, and the
    // fold then identifies 2 with 0 as well: pairs (0,1) and (0,2). The pair
    // (0,1) compares a/x against a/y and conflicts.
    #[test]
    fn mealy_chain_fold() {
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[("a", "x"), ("a", "y")]);
        let mut a = build_apta(&s).unwrap();
        let err = a
            .try_merge(0, 1, Heuristic::Mealy, &params(), &ConstraintSet::new())
            .unwrap_err();
        assert_eq!(err, MergeError::Inconsistent(Inconsistency::OutputConflict));

        // Same chain with equal outputs: (0,1) adds min(1,1)=1, then 0 has
        // count 2 on a and 2 is folded into 0 with no shared inputs.
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[("a", "x"), ("a", "x")]);
        let mut a = build_apta(&s).unwrap();
        let rec = a
            .try_merge(0, 1, Heuristic::Mealy, &params(), &ConstraintSet::new())
            .unwrap();
        assert_eq!(rec.score, 1);
        assert_eq!(a.len(), 1);
        assert_eq!(a.target(0, Symbol(0)), Some(0));
        assert_eq!(a.state(0).unwrap().edges[&Symbol(0)].count, 2);
        assert_eq!(a.state(0).unwrap().occurrences, 3);
        assert_eq!(
            rec.fold_log
                .iter()
                .filter(|r| matches!(r, Rewrite::Identify { .. }))
                .count(),
            2
        );
    }

    #[test]
    fn forced_merge_keeps_red_outputs() {
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[("a", "x"), ("a", "y")]);
        let mut a = build_apta(&s).unwrap();
        let rec = a.force_merge(0, 1, Heuristic::Mealy, &params()).unwrap();
        assert_eq!(rec.kind, RecordKind::ForcedMerge);
        assert_eq!(rec.token(), "f0");
        assert_eq!(a.transduce(["a", "a", "a"]), Some(vec!["x".into(); 3]));
    }

    #[test]
    fn constraint_blocks_merge_and_follows_representatives() {
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[("a", "x")]);
        s.push_io(&[("b", "x")]);
        let mut a = build_apta(&s).unwrap();
        let mut c = ConstraintSet::new();
        c.insert(2, 0);
        assert_eq!(
            a.try_merge(0, 2, Heuristic::Mealy, &params(), &c),
            Err(MergeError::Inconsistent(Inconsistency::ConstraintViolation))
        );
        let rec = a.try_merge(0, 1, Heuristic::Mealy, &params(), &c).unwrap();
        assert!(c.representatives(&a).contains(&(0, 2)));
        a.undo(&rec).unwrap();
    }

    #[test]
    fn lowerbound_and_invalid_pairs() {
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[("a", "x")]);
        let mut a = build_apta(&s).unwrap();
        let p = HeuristicParams {
            lowerbound: 1,
            ..params()
        };
        let c = ConstraintSet::new();
        assert_eq!(
            a.try_merge(0, 1, Heuristic::Mealy, &p, &c),
            Err(MergeError::Inconsistent(Inconsistency::BelowLowerbound))
        );
        assert!(matches!(
            a.try_merge(1, 0, Heuristic::Mealy, &p, &c),
            Err(MergeError::InvalidStatePair { .. })
        ));
        assert!(matches!(
            a.try_merge(0, 7, Heuristic::Mealy, &p, &c),
            Err(MergeError::InvalidStatePair { .. })
        ));
        assert_eq!(a.promote(0), Err(MergeError::NotBlue(0)));
    }

    #[test]
    fn promote_and_undo_colors() {
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[("a", "x"), ("b", "y")]);
        s.push_io(&[("b", "x")]);
        let mut a = build_apta(&s).unwrap();
        let before = to_json(&a);
        let rec = a.promote(1).unwrap();
        assert_eq!(rec.token(), "x1");
        assert_eq!(a.states_with_color(Color::Red), vec![0, 1]);
        assert_eq!(a.states_with_color(Color::Blue), vec![2, 3]);
        a.undo(&rec).unwrap();
        assert_eq!(to_json(&a), before);
        assert_eq!(a.undo(&rec), Err(MergeError::StaleRecord));
    }

    #[test]
    fn stale_records_are_refused() {
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[("a", "x"), ("b", "y")]);
        s.push_io(&[("b", "x")]);
        let mut a = build_apta(&s).unwrap();
        let first = a.promote(1).unwrap();
        let second = a.promote(2).unwrap();
        assert_eq!(a.undo(&first), Err(MergeError::StaleRecord));
        a.undo(&second).unwrap();
        a.undo(&first).unwrap();
    }

    #[test]
    fn no_blue_no_candidates() {
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[]);
        let mut a = build_apta(&s).unwrap();
        assert!(
            enumerate_candidates(&mut a, Heuristic::Mealy, &params(), &ConstraintSet::new())
                .is_empty()
        );
    }

    #[test]
    fn single_candidate_rank_one() {
        let mut s = Sample::new(Mode::Mealy);
        s.push_io(&[("a", "x"), ("a", "x")]);
        let mut a = build_apta(&s).unwrap();
        let list = enumerate_candidates(&mut a, Heuristic::Mealy, &params(), &ConstraintSet::new());
        assert_eq!(
            list,
            vec![MergeCandidate {
                rank: 1,
                red: 0,
                blue: 1,
                score: 1
            }]
        );
    }
}
