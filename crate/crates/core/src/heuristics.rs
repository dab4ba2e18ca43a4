//! Merge evidence scoring.
//!
//! A heuristic scores one identified pair of states at a time; a merge's score
//! is the sum over every pair its determinization fold identifies, and a single
//! conflicting pair makes the whole merge inconsistent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Mode, StateInfo};

/// Thresholds steering the merge process.
///
/// `state_count` and `symbol_count` are significance gates: states (resp.
/// transitions) seen fewer times neither add evidence nor cause conflicts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicParams {
    pub state_count: u64,
    pub symbol_count: u64,
    pub lowerbound: u64,
    pub sinkson: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamName {
    StateCount,
    SymbolCount,
    Lowerbound,
    Sinkson,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamError {
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("invalid value `{value}` for {param}")]
    InvalidValue { param: &'static str, value: String },
}

impl ParamName {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::StateCount => "state_count",
            ParamName::SymbolCount => "symbol_count",
            ParamName::Lowerbound => "lowerbound",
            ParamName::Sinkson => "sinkson",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = ParamError;

    /// Accepts `_`/`-` separated spellings, e.g. `lower_bound` or `state-count`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "statecount" => Ok(ParamName::StateCount),
            "symbolcount" => Ok(ParamName::SymbolCount),
            "lowerbound" => Ok(ParamName::Lowerbound),
            "sinkson" => Ok(ParamName::Sinkson),
            _ => Err(ParamError::UnknownParam(s.to_string())),
        }
    }
}

impl HeuristicParams {
    pub fn set(&mut self, param: ParamName, value: &str) -> Result<(), ParamError> {
        let invalid = || ParamError::InvalidValue {
            param: param.as_str(),
            value: value.to_string(),
        };
        match param {
            ParamName::Sinkson => {
                self.sinkson = match value.to_ascii_lowercase().as_str() {
                    "1" | "true" | "on" => true,
                    "0" | "false" | "off" => false,
                    _ => return Err(invalid()),
                }
            }
            _ => {
                let v: u64 = value.parse().map_err(|_| invalid())?;
                match param {
                    ParamName::StateCount => self.state_count = v,
                    ParamName::SymbolCount => self.symbol_count = v,
                    ParamName::Lowerbound => self.lowerbound = v,
                    ParamName::Sinkson => unreachable!(),
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, param: ParamName) -> String {
        match param {
            ParamName::StateCount => self.state_count.to_string(),
            ParamName::SymbolCount => self.symbol_count.to_string(),
            ParamName::Lowerbound => self.lowerbound.to_string(),
            ParamName::Sinkson => u8::from(self.sinkson).to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairScore {
    Consistent(u64),
    Conflict,
}

/// Available pair scorers, selected by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Edsm,
    Mealy,
}

impl Heuristic {
    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Edsm => "edsm",
            Heuristic::Mealy => "mealy",
        }
    }

    /// The sample mode this heuristic is defined for.
    pub fn mode(self) -> Mode {
        match self {
            Heuristic::Edsm => Mode::Dfa,
            Heuristic::Mealy => Mode::Mealy,
        }
    }

    pub fn score_pair(self, q1: &StateInfo, q2: &StateInfo, params: &HeuristicParams) -> PairScore {
        match self {
            Heuristic::Edsm => edsm_pair_score(q1, q2, params),
            Heuristic::Mealy => mealy_pair_score(q1, q2, params),
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "edsm" => Ok(Heuristic::Edsm),
            "mealy" => Ok(Heuristic::Mealy),
            other => Err(format!(
                "unknown heuristic `{other}` (expected edsm or mealy)"
            )),
        }
    }
}

fn significant(q: &StateInfo, params: &HeuristicParams) -> bool {
    q.occurrences >= params.state_count
}

/// Blue-fringe label matching: one point per pair whose labels agree.
pub fn edsm_pair_score(q1: &StateInfo, q2: &StateInfo, params: &HeuristicParams) -> PairScore {
    if !significant(q1, params) || !significant(q2, params) {
        return PairScore::Consistent(0);
    }
    if (q1.accept > 0 && q2.reject > 0) || (q1.reject > 0 && q2.accept > 0) {
        return PairScore::Conflict;
    }
    let matched = (q1.accept > 0 && q2.accept > 0) || (q1.reject > 0 && q2.reject > 0);
    PairScore::Consistent(u64::from(matched))
}

/// Occurrence-weighted output agreement: each shared significant input adds
/// the smaller of the two transition counts; differing outputs conflict.
pub fn mealy_pair_score(q1: &StateInfo, q2: &StateInfo, params: &HeuristicParams) -> PairScore {
    if !significant(q1, params) || !significant(q2, params) {
        return PairScore::Consistent(0);
    }
    let mut score = 0;
    for (input, e1) in &q1.edges {
        let Some(e2) = q2.edges.get(input) else {
            continue;
        };
        if e1.count < params.symbol_count || e2.count < params.symbol_count {
            continue;
        }
        if e1.output != e2.output {
            return PairScore::Conflict;
        }
        score += e1.count.min(e2.count);
    }
    PairScore::Consistent(score)
}

/// Running sum of pair scores; sticky once a conflict is seen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScoreTally {
    total: u64,
    conflict: bool,
}

impl ScoreTally {
    pub fn add(&mut self, pair: PairScore) {
        match pair {
            PairScore::Consistent(inc) => self.total += inc,
            PairScore::Conflict => self.conflict = true,
        }
    }

    pub fn has_conflict(&self) -> bool {
        self.conflict
    }

    /// Sum of the consistent increments seen so far, ignoring conflicts.
    pub fn consistent_total(&self) -> u64 {
        self.total
    }

    pub fn result(&self) -> PairScore {
        if self.conflict {
            PairScore::Conflict
        } else {
            PairScore::Consistent(self.total)
        }
    }
}

/// Score of a whole fold, given every identified pair (root pair first).
pub fn merge_score<'a, I>(
    fold_pairs: I,
    heuristic: Heuristic,
    params: &HeuristicParams,
) -> PairScore
where
    I: IntoIterator<Item = (&'a StateInfo, &'a StateInfo)>,
{
    let mut tally = ScoreTally::default();
    for (q1, q2) in fold_pairs {
        tally.add(heuristic.score_pair(q1, q2, params));
        if tally.has_conflict() {
            break;
        }
    }
    tally.result()
}

/// Low-occurrence states excluded from merging and promotion when `sinkson` is set.
pub fn is_sink(q: &StateInfo, params: &HeuristicParams) -> bool {
    params.sinkson && q.occurrences < params.state_count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{Edge, Symbol};

    fn labelled(accept: u64, reject: u64, occ: u64) -> StateInfo {
        let mut q = StateInfo::new(0);
        q.accept = accept;
        q.reject = reject;
        q.occurrences = occ;
        q
    }

    fn emitting(edges: &[(u32, u32, u64)]) -> StateInfo {
        let mut q = StateInfo::new(0);
        for &(input, output, count) in edges {
            q.edges.insert(
                Symbol(input),
                Edge {
                    target: 0,
                    output: Some(Symbol(output)),
                    count,
                },
            );
            q.occurrences += count;
        }
        q
    }

    #[test]
    fn edsm_cases() {
        let p = HeuristicParams::default();
        let acc = labelled(1, 0, 1);
        let rej = labelled(0, 1, 1);
        let none = labelled(0, 0, 1);
        assert_eq!(edsm_pair_score(&acc, &acc, &p), PairScore::Consistent(1));
        assert_eq!(edsm_pair_score(&rej, &rej, &p), PairScore::Consistent(1));
        assert_eq!(edsm_pair_score(&acc, &rej, &p), PairScore::Conflict);
        assert_eq!(edsm_pair_score(&acc, &none, &p), PairScore::Consistent(0));
        let p = HeuristicParams {
            state_count: 2,
            ..p
        };
        assert_eq!(edsm_pair_score(&acc, &rej, &p), PairScore::Consistent(0));
    }

    #[test]
    fn mealy_cases() {
        let p = HeuristicParams::default();
        let a5 = emitting(&[(0, 0, 5)]);
        let a3 = emitting(&[(0, 0, 3)]);
        let ay = emitting(&[(0, 1, 4)]);
        assert_eq!(mealy_pair_score(&a5, &a3, &p), PairScore::Consistent(3));
        assert_eq!(mealy_pair_score(&a5, &ay, &p), PairScore::Conflict);
        let gated = HeuristicParams {
            symbol_count: 5,
            ..p
        };
        assert_eq!(mealy_pair_score(&a5, &ay, &gated), PairScore::Consistent(0));
        let state_gated = HeuristicParams {
            state_count: 10,
            ..p
        };
        assert_eq!(
            mealy_pair_score(&a5, &ay, &state_gated),
            PairScore::Consistent(0)
        );
        let disjoint = emitting(&[(1, 1, 9)]);
        assert_eq!(
            mealy_pair_score(&a5, &disjoint, &p),
            PairScore::Consistent(0)
        );
    }

    #[test]
    fn merge_score_sum_and_conflict() {
        let p = HeuristicParams::default();
        let leaf = StateInfo::new(1);
        assert_eq!(
            merge_score([(&leaf, &leaf)], Heuristic::Mealy, &p),
            PairScore::Consistent(0)
        );
        let a5 = emitting(&[(0, 0, 5)]);
        let a3 = emitting(&[(0, 0, 3), (1, 0, 2)]);
        let b2 = emitting(&[(1, 0, 4)]);
        assert_eq!(
            merge_score([(&a5, &a3), (&a3, &b2)], Heuristic::Mealy, &p),
            PairScore::Consistent(5)
        );
        let clash = emitting(&[(0, 2, 1)]);
        assert_eq!(
            merge_score(
                [(&a5, &a3), (&a5, &clash), (&a3, &b2)],
                Heuristic::Mealy,
                &p
            ),
            PairScore::Conflict
        );
    }

    #[test]
    fn sinks() {
        let q = labelled(0, 0, 3);
        assert!(!is_sink(&q, &HeuristicParams::default()));
        let p = HeuristicParams {
            state_count: 15,
            sinkson: true,
            ..Default::default()
        };
        assert!(is_sink(&q, &p));
        assert!(!is_sink(&labelled(0, 0, 15), &p));
    }

    #[test]
    fn param_parsing() {
        assert_eq!(
            "lower_bound".parse::<ParamName>(),
            Ok(ParamName::Lowerbound)
        );
        assert_eq!(
            "State-Count".parse::<ParamName>(),
            Ok(ParamName::StateCount)
        );
        assert!("depth".parse::<ParamName>().is_err());
        let mut p = HeuristicParams::default();
        p.set(ParamName::Lowerbound, "10").unwrap();
        p.set(ParamName::Sinkson, "1").unwrap();
        assert_eq!(p.lowerbound, 10);
        assert!(p.sinkson);
        assert!(p.set(ParamName::StateCount, "-1").is_err());
        assert!(p.set(ParamName::Sinkson, "maybe").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_state() -> impl Strategy<Value = StateInfo> {
            proptest::collection::btree_map(0u32..4, (0u32..3, 1u64..20), 0..4).prop_map(|m| {
                let edges: Vec<(u32, u32, u64)> =
                    m.into_iter().map(|(i, (o, c))| (i, o, c)).collect();
                emitting(&edges)
            })
        }

        proptest! {
            #[test]
            fn mealy_symmetric(a in arb_state(), b in arb_state(), s in 0u64..10, y in 0u64..10) {
                let p = HeuristicParams { state_count: s, symbol_count: y, ..Default::default() };
                prop_assert_eq!(mealy_pair_score(&a, &b, &p), mealy_pair_score(&b, &a, &p));
            }

            #[test]
            fn conflicts_persist_at_lower_thresholds(
                a in arb_state(), b in arb_state(), s in 0u64..20, y in 0u64..20,
                ds in 0u64..20, dy in 0u64..20,
            ) {
                let hi = HeuristicParams { state_count: s, symbol_count: y, ..Default::default() };
                let lo = HeuristicParams {
                    state_count: s.saturating_sub(ds),
                    symbol_count: y.saturating_sub(dy),
                    ..Default::default()
                };
                if mealy_pair_score(&a, &b, &hi) == PairScore::Conflict {
                    prop_assert_eq!(mealy_pair_score(&a, &b, &lo), PairScore::Conflict);
                }
            }
        }
    }
}
