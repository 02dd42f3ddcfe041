//! A machine that counts down from a natural number by consuming integer
//! messages and emits twice what it consumed.

use crate::vlsm::Vlsm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CountdownLabel {
    D,
}

/// `⟨n, i⟩`: started from `n`, currently at `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountdownState {
    pub n: i64,
    pub i: i64,
}

impl CountdownState {
    pub fn new(n: i64, i: i64) -> Self {
        CountdownState { n, i }
    }
}

/// Every `⟨n, n⟩` with `n ≥ 0` is initial; exploration enumerates those with
/// `n ≤ max_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Countdown {
    pub max_n: i64,
}

impl Countdown {
    pub fn new(max_n: i64) -> Self {
        Countdown { max_n }
    }
}

pub fn countdown() -> Countdown {
    Countdown::new(6)
}

impl Vlsm for Countdown {
    type Label = CountdownLabel;
    type State = CountdownState;
    type Message = i64;

    fn initial_states(&self) -> Vec<CountdownState> {
        (0..=self.max_n)
            .map(|n| CountdownState::new(n, n))
            .collect()
    }

    fn is_initial_state(&self, s: &CountdownState) -> bool {
        s.n >= 0 && s.n == s.i
    }

    fn initial_messages(&self) -> Vec<i64> {
        vec![2]
    }

    fn labels(&self, _s: &CountdownState) -> Vec<CountdownLabel> {
        vec![CountdownLabel::D]
    }

    fn transition(
        &self,
        _label: &CountdownLabel,
        s: &CountdownState,
        m: Option<&i64>,
    ) -> (CountdownState, Option<i64>) {
        match m {
            Some(&j) => (CountdownState::new(s.n, s.i - j), Some(2 * j)),
            None => (*s, None),
        }
    }

    fn constraint(&self, _label: &CountdownLabel, s: &CountdownState, m: Option<&i64>) -> bool {
        matches!(m, Some(&j) if s.i >= j && j >= 1)
    }
}
