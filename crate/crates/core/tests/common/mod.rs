//! Brute-force oracles shared by the integration tests. They only use the
//! machines' transition and constraint functions, never the explorers.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use vlsmkit::{Trace, TraceOf, Vlsm};

/// Countdown states `(n, i)` and messages after `depth` rounds of the
/// layered definition, from `⟨n,n⟩` for `n ≤ max_n` and messages `{2}`.
/// With `extra` nonempty those inputs are offered at every round as well,
/// which gives the constrained sets.
pub fn countdown_layers(
    max_n: i64,
    depth: usize,
    extra: &[i64],
) -> (BTreeSet<(i64, i64)>, BTreeSet<i64>) {
    let mut states: BTreeSet<(i64, i64)> = (0..=max_n).map(|n| (n, n)).collect();
    let mut messages: BTreeSet<i64> = [2].into_iter().collect();
    for _ in 0..depth {
        let inputs: BTreeSet<i64> = messages.iter().chain(extra).copied().collect();
        let mut next_s = states.clone();
        let mut next_m = messages.clone();
        for &(n, i) in &states {
            for &j in &inputs {
                if i >= j && j >= 1 {
                    next_s.insert((n, i - j));
                    next_m.insert(2 * j);
                }
            }
        }
        states = next_s;
        messages = next_m;
    }
    (states, messages)
}

/// Every constrained trace of `machine` of length at most `depth` from its
/// enumerated initial states, by plain recursion over `inputs`.
pub fn all_traces<V: Vlsm>(
    machine: &V,
    depth: usize,
    inputs: &[Option<V::Message>],
) -> Vec<TraceOf<V>> {
    fn go<V: Vlsm>(
        machine: &V,
        t: TraceOf<V>,
        depth: usize,
        inputs: &[Option<V::Message>],
        out: &mut Vec<TraceOf<V>>,
    ) {
        out.push(t.clone());
        if t.len() == depth {
            return;
        }
        let s = t.last_state().clone();
        for l in machine.labels(&s) {
            for m in inputs {
                if machine.constraint(&l, &s, m.as_ref()) {
                    let mut next = t.clone();
                    next.push(machine, l.clone(), m.clone());
                    go(machine, next, depth, inputs, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    for s in machine.initial_states() {
        go(machine, Trace::empty(s), depth, inputs, &mut out);
    }
    out
}

/// Traces grouped by their final state.
pub fn by_last_state<V: Vlsm>(traces: Vec<TraceOf<V>>) -> BTreeMap<V::State, Vec<TraceOf<V>>> {
    let mut out: BTreeMap<V::State, Vec<TraceOf<V>>> = BTreeMap::new();
    for t in traces {
        out.entry(t.last_state().clone()).or_default().push(t);
    }
    out
}

/// States of a free composition of `parts` after `depth` rounds, computed
/// on the product directly: messages are the initial ones plus everything
/// emitted so far, and each round moves one part.
pub fn product_layers<V: Vlsm>(parts: &[V], depth: usize) -> BTreeSet<Vec<V::State>> {
    let mut starts: Vec<Vec<V::State>> = vec![Vec::new()];
    for p in parts {
        starts = starts
            .into_iter()
            .flat_map(|pre| {
                p.initial_states().into_iter().map(move |s| {
                    let mut v = pre.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    let mut states: BTreeSet<Vec<V::State>> = starts.into_iter().collect();
    let mut messages: BTreeSet<V::Message> =
        parts.iter().flat_map(|p| p.initial_messages()).collect();
    for _ in 0..depth {
        let inputs: Vec<Option<V::Message>> = std::iter::once(None)
            .chain(messages.iter().cloned().map(Some))
            .collect();
        let mut next_s = states.clone();
        let mut next_m = messages.clone();
        for sigma in &states {
            for (k, p) in parts.iter().enumerate() {
                for l in p.labels(&sigma[k]) {
                    for m in &inputs {
                        if p.constraint(&l, &sigma[k], m.as_ref()) {
                            let (post, out) = p.transition(&l, &sigma[k], m.as_ref());
                            let mut next = sigma.clone();
                            next[k] = post;
                            next_s.insert(next);
                            next_m.extend(out);
                        }
                    }
                }
            }
        }
        states = next_s;
        messages = next_m;
    }
    states
}
