//! Bounded exploration: the layered fixpoint of valid states and messages,
//! constrained-state exploration over a supplied input universe, trace
//! enumeration and trace checking.
//!
//! Work inside a layer is data-parallel (one task per source state) when
//! the `parallel` feature is enabled and the bound asks for it; results are
//! merged in source order so the outcome does not depend on scheduling.

use std::collections::{BTreeSet, HashMap};

use crate::error::Result;
use crate::vlsm::{Bound, ExploreMode, RecordOf, TraceOf, TransitionRecord, Vlsm};

pub(crate) fn par_map<T, R, F>(mode: ExploreMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExploreMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// How a state or message first entered the reachable set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin<L, S, M> {
    Initial,
    /// Produced at `layer` by the transition `(label, pre, input)`.
    Step {
        layer: usize,
        pre: S,
        label: L,
        input: Option<M>,
    },
}

impl<L, S, M> Origin<L, S, M> {
    pub fn layer(&self) -> usize {
        match self {
            Origin::Initial => 0,
            Origin::Step { layer, .. } => *layer,
        }
    }
}

type OriginOf<V> = Origin<<V as Vlsm>::Label, <V as Vlsm>::State, <V as Vlsm>::Message>;

/// States and messages reachable within `depth` layers, with the first
/// transition that produced each of them.
#[derive(Debug, Clone)]
pub struct ReachSet<V: Vlsm> {
    pub depth: usize,
    /// True when the last layer added nothing new.
    pub fixpoint: bool,
    state_order: Vec<V::State>,
    states: HashMap<V::State, OriginOf<V>>,
    message_order: Vec<V::Message>,
    messages: HashMap<V::Message, OriginOf<V>>,
}

impl<V: Vlsm> ReachSet<V> {
    /// States in discovery order (layer by layer, canonical within a layer).
    pub fn states(&self) -> &[V::State] {
        &self.state_order
    }

    /// Proper messages in discovery order.
    pub fn proper_messages(&self) -> &[V::Message] {
        &self.message_order
    }

    /// Messages including the always-valid `None`.
    pub fn messages(&self) -> BTreeSet<Option<V::Message>> {
        std::iter::once(None)
            .chain(self.message_order.iter().cloned().map(Some))
            .collect()
    }

    pub fn state_set(&self) -> BTreeSet<V::State> {
        self.state_order.iter().cloned().collect()
    }

    pub fn contains_state(&self, s: &V::State) -> bool {
        self.states.contains_key(s)
    }

    pub fn contains_message(&self, m: Option<&V::Message>) -> bool {
        m.is_none_or(|m| self.messages.contains_key(m))
    }

    pub fn state_origin(&self, s: &V::State) -> Option<&OriginOf<V>> {
        self.states.get(s)
    }

    pub fn message_origin(&self, m: &V::Message) -> Option<&OriginOf<V>> {
        self.messages.get(m)
    }

    /// The states first reached at exactly `layer`.
    pub fn states_at(&self, layer: usize) -> Vec<&V::State> {
        self.state_order
            .iter()
            .filter(|s| self.states[*s].layer() == layer)
            .collect()
    }

    /// A trace reaching `s` by following first-discovery parents.
    pub fn state_witness(&self, machine: &V, s: &V::State) -> Option<TraceOf<V>> {
        let mut rev = Vec::new();
        let mut cur = s.clone();
        loop {
            match self.states.get(&cur)? {
                Origin::Initial => break,
                Origin::Step {
                    pre, label, input, ..
                } => {
                    rev.push((label.clone(), input.clone()));
                    cur = pre.clone();
                }
            }
        }
        rev.reverse();
        Some(crate::vlsm::Trace::replay(machine, cur, rev))
    }

    /// A trace whose last step outputs `m`.
    pub fn message_witness(&self, machine: &V, m: &V::Message) -> Option<TraceOf<V>> {
        match self.messages.get(m)? {
            Origin::Initial => None,
            Origin::Step {
                pre, label, input, ..
            } => {
                let mut trace = self.state_witness(machine, pre)?;
                trace.push(machine, label.clone(), input.clone());
                Some(trace)
            }
        }
    }
}

/// Valid states and messages within `bound.depth` layers of the fixpoint
/// `S_{n+1} = S_n ∪ τˢ(L × S_n × M_n |β)`, `M_{n+1} = M_n ∪ τᵐ(…)`, starting
/// from the initial states and `M₀ ∪ {None}`.
pub fn reach<V: Vlsm>(machine: &V, bound: Bound) -> Result<ReachSet<V>> {
    explore(machine, bound, &[])
}

/// Constrained exploration: like [`reach`], but every message of
/// `universe` is also offered as an input, whether or not it is valid.
/// The returned message set still only holds initial and produced messages.
pub fn reach_constrained<V: Vlsm>(
    machine: &V,
    bound: Bound,
    universe: &[V::Message],
) -> Result<ReachSet<V>> {
    explore(machine, bound, universe)
}

type Produced<V> = (
    <V as Vlsm>::State,
    Option<<V as Vlsm>::Message>,
    <V as Vlsm>::State,
    <V as Vlsm>::Label,
    Option<<V as Vlsm>::Message>,
);

fn explore<V: Vlsm>(machine: &V, bound: Bound, universe: &[V::Message]) -> Result<ReachSet<V>> {
    let mut reach = ReachSet::<V> {
        depth: bound.depth,
        fixpoint: false,
        state_order: Vec::new(),
        states: HashMap::new(),
        message_order: Vec::new(),
        messages: HashMap::new(),
    };
    let mut initial = machine.initial_states();
    initial.sort();
    initial.dedup();
    for s in initial {
        reach.states.insert(s.clone(), Origin::Initial);
        reach.state_order.push(s);
    }
    let mut m0 = machine.initial_messages();
    m0.sort();
    m0.dedup();
    for m in m0 {
        reach.messages.insert(m.clone(), Origin::Initial);
        reach.message_order.push(m);
    }
    bound.check(reach.states.len() + reach.messages.len())?;

    let mut fixed_inputs: Vec<Option<V::Message>> = vec![None];
    let mut extra: Vec<V::Message> = universe.to_vec();
    extra.sort();
    extra.dedup();
    fixed_inputs.extend(extra.into_iter().map(Some));

    let mut state_mark = 0;
    let mut message_mark = 0;
    for layer in 0..bound.depth {
        let all_inputs: Vec<Option<V::Message>> = fixed_inputs
            .iter()
            .cloned()
            .chain(reach.message_order.iter().cloned().map(Some))
            .collect();
        let new_inputs: Vec<Option<V::Message>> = reach.message_order[message_mark..]
            .iter()
            .cloned()
            .map(Some)
            .collect();
        let sources: Vec<(usize, bool)> = (0..reach.state_order.len())
            .map(|i| (i, i >= state_mark))
            .collect();
        let order = &reach.state_order;
        let batches: Vec<Vec<Produced<V>>> = par_map(bound.mode, &sources, |&(i, is_new)| {
            let s = &order[i];
            let inputs = if is_new { &all_inputs } else { &new_inputs };
            let mut out = Vec::new();
            if inputs.is_empty() {
                return out;
            }
            for label in machine.labels(s) {
                for m in inputs {
                    if machine.constraint(&label, s, m.as_ref()) {
                        let (post, output) = machine.transition(&label, s, m.as_ref());
                        out.push((post, output, s.clone(), label.clone(), m.clone()));
                    }
                }
            }
            out
        });
        state_mark = reach.state_order.len();
        message_mark = reach.message_order.len();
        let mut grew = false;
        for (post, output, pre, label, input) in batches.into_iter().flatten() {
            if let Some(out) = output {
                if !reach.messages.contains_key(&out) {
                    reach.messages.insert(
                        out.clone(),
                        Origin::Step {
                            layer: layer + 1,
                            pre: pre.clone(),
                            label: label.clone(),
                            input: input.clone(),
                        },
                    );
                    reach.message_order.push(out);
                    grew = true;
                }
            }
            if !reach.states.contains_key(&post) {
                reach.states.insert(
                    post.clone(),
                    Origin::Step {
                        layer: layer + 1,
                        pre,
                        label,
                        input,
                    },
                );
                reach.state_order.push(post);
                grew = true;
            }
            bound.check(reach.states.len() + reach.messages.len())?;
        }
        if !grew {
            reach.fixpoint = true;
            break;
        }
    }
    Ok(reach)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageValidity<T> {
    Valid(T),
    NotFoundWithinDepth,
}

impl<T> MessageValidity<T> {
    pub fn is_valid(&self) -> bool {
        matches!(self, MessageValidity::Valid(_))
    }
}

/// Decides `m ∈ M_depth`, returning a valid trace that emits `m` (an empty
/// trace for `None` and for initial messages).
pub fn is_valid_message<V: Vlsm>(
    machine: &V,
    m: Option<&V::Message>,
    bound: Bound,
) -> Result<MessageValidity<TraceOf<V>>> {
    let reach = reach(machine, bound)?;
    Ok(message_validity(machine, &reach, m))
}

pub fn message_validity<V: Vlsm>(
    machine: &V,
    reach: &ReachSet<V>,
    m: Option<&V::Message>,
) -> MessageValidity<TraceOf<V>> {
    let empty = || {
        reach
            .states()
            .first()
            .map(|s| crate::vlsm::Trace::empty(s.clone()))
    };
    let witness = match m {
        None => empty(),
        Some(m) => match reach.message_origin(m) {
            None => None,
            Some(Origin::Initial) => empty(),
            Some(Origin::Step { .. }) => reach.message_witness(machine, m),
        },
    };
    witness.map_or(MessageValidity::NotFoundWithinDepth, MessageValidity::Valid)
}

/// All constrained traces of length at most `bound.depth` starting from an
/// enumerated initial state, drawing inputs from `inputs`. Traces come out
/// in canonical depth-first order.
pub fn enumerate_traces<V: Vlsm>(
    machine: &V,
    bound: Bound,
    inputs: &[Option<V::Message>],
) -> Result<Vec<TraceOf<V>>> {
    let mut initial = machine.initial_states();
    initial.sort();
    initial.dedup();
    let per_root: Vec<Result<Vec<TraceOf<V>>>> = par_map(bound.mode, &initial, |s| {
        let mut acc = Vec::new();
        let mut steps = Vec::new();
        extend_traces(machine, s, s, bound, inputs, &mut steps, &mut acc)?;
        Ok(acc)
    });
    let mut all = Vec::new();
    for part in per_root {
        all.extend(part?);
        bound.check(all.len())?;
    }
    Ok(all)
}

fn extend_traces<V: Vlsm>(
    machine: &V,
    start: &V::State,
    cur: &V::State,
    bound: Bound,
    inputs: &[Option<V::Message>],
    steps: &mut Vec<RecordOf<V>>,
    acc: &mut Vec<TraceOf<V>>,
) -> Result<()> {
    acc.push(crate::vlsm::Trace {
        start: start.clone(),
        steps: steps.clone(),
    });
    bound.check(acc.len())?;
    if steps.len() == bound.depth {
        return Ok(());
    }
    for label in machine.labels(cur) {
        for m in inputs {
            if machine.constraint(&label, cur, m.as_ref()) {
                let record = TransitionRecord::run(machine, label.clone(), cur.clone(), m.clone());
                let post = record.post.clone();
                steps.push(record);
                extend_traces(machine, start, &post, bound, inputs, steps, acc)?;
                steps.pop();
            }
        }
    }
    Ok(())
}

/// Valid traces of length at most `bound.depth`: constrained traces whose
/// inputs are all valid messages within the same depth.
pub fn valid_traces<V: Vlsm>(machine: &V, bound: Bound) -> Result<Vec<TraceOf<V>>> {
    let reach = reach(machine, bound)?;
    let inputs: Vec<_> = reach.messages().into_iter().collect();
    enumerate_traces(machine, bound, &inputs)
}

/// Streams the traces [`enumerate_traces`] would return, in the same order,
/// and stops at the first one satisfying `pred`. Returns the number of
/// traces visited and the hit. Work is split over first steps.
pub fn find_trace<V, F>(
    machine: &V,
    bound: Bound,
    inputs: &[Option<V::Message>],
    pred: F,
) -> Result<(usize, Option<TraceOf<V>>)>
where
    V: Vlsm,
    F: Fn(&TraceOf<V>) -> bool + Sync + Send,
{
    let mut initial = machine.initial_states();
    initial.sort();
    initial.dedup();
    let mut visited = 0;
    for s in &initial {
        let empty = crate::vlsm::Trace::empty(s.clone());
        visited += 1;
        if pred(&empty) {
            return Ok((visited, Some(empty)));
        }
        if bound.depth == 0 {
            continue;
        }
        let mut firsts = Vec::new();
        for label in machine.labels(s) {
            for m in inputs {
                if machine.constraint(&label, s, m.as_ref()) {
                    firsts.push(TransitionRecord::run(
                        machine,
                        label.clone(),
                        s.clone(),
                        m.clone(),
                    ));
                }
            }
        }
        let found = par_map(bound.mode, &firsts, |r| {
            let mut steps = vec![r.clone()];
            let mut count = 0;
            let hit = search(machine, s, bound, inputs, &pred, &mut steps, &mut count)?;
            Ok((count, hit))
        });
        for part in found {
            let (count, hit): (usize, Option<TraceOf<V>>) = part?;
            visited += count;
            bound.check(visited)?;
            if hit.is_some() {
                return Ok((visited, hit));
            }
        }
    }
    Ok((visited, None))
}

fn search<V: Vlsm, F: Fn(&TraceOf<V>) -> bool>(
    machine: &V,
    start: &V::State,
    bound: Bound,
    inputs: &[Option<V::Message>],
    pred: &F,
    steps: &mut Vec<RecordOf<V>>,
    count: &mut usize,
) -> Result<Option<TraceOf<V>>> {
    let trace = crate::vlsm::Trace {
        start: start.clone(),
        steps: steps.clone(),
    };
    *count += 1;
    bound.check(*count)?;
    if pred(&trace) {
        return Ok(Some(trace));
    }
    if steps.len() == bound.depth {
        return Ok(None);
    }
    let cur = trace.last_state().clone();
    for label in machine.labels(&cur) {
        for m in inputs {
            if machine.constraint(&label, &cur, m.as_ref()) {
                steps.push(TransitionRecord::run(
                    machine,
                    label.clone(),
                    cur.clone(),
                    m.clone(),
                ));
                let hit = search(machine, start, bound, inputs, pred, steps, count)?;
                steps.pop();
                if hit.is_some() {
                    return Ok(hit);
                }
            }
        }
    }
    Ok(None)
}

/// [`find_trace`] over valid traces.
pub fn find_valid_trace<V, F>(
    machine: &V,
    bound: Bound,
    pred: F,
) -> Result<(usize, Option<TraceOf<V>>)>
where
    V: Vlsm,
    F: Fn(&TraceOf<V>) -> bool + Sync + Send,
{
    let reach = reach(machine, bound)?;
    let inputs: Vec<_> = reach.messages().into_iter().collect();
    find_trace(machine, bound, &inputs, pred)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    Constrained,
    Valid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceVerdict {
    Ok,
    /// `step` is 1-based; step 0 denotes the start state.
    FailAt {
        step: usize,
        reason: String,
    },
}

impl TraceVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, TraceVerdict::Ok)
    }
}

/// Checks initiality, chaining, replay and the constraint at every step;
/// in `Valid` mode also that each input is valid within `bound.depth`.
pub fn check_trace<V: Vlsm>(
    machine: &V,
    trace: &TraceOf<V>,
    mode: TraceMode,
    bound: Bound,
) -> Result<TraceVerdict> {
    let reach = match mode {
        TraceMode::Constrained => None,
        TraceMode::Valid => Some(reach(machine, bound)?),
    };
    Ok(check_trace_with(machine, trace, reach.as_ref()))
}

/// [`check_trace`] against a precomputed message set; `None` checks the
/// constrained mode only.
pub fn check_trace_with<V: Vlsm>(
    machine: &V,
    trace: &TraceOf<V>,
    valid: Option<&ReachSet<V>>,
) -> TraceVerdict {
    match valid {
        None => check_trace_against(machine, trace, None::<&fn(&V::Message) -> bool>),
        Some(reach) => check_trace_against(
            machine,
            trace,
            Some(&|m: &V::Message| reach.contains_message(Some(m))),
        ),
    }
}

/// [`check_trace`] with message validity decided by `valid`.
pub fn check_trace_against<V, F>(machine: &V, trace: &TraceOf<V>, valid: Option<&F>) -> TraceVerdict
where
    V: Vlsm,
    F: Fn(&V::Message) -> bool,
{
    if !machine.is_initial_state(&trace.start) {
        return TraceVerdict::FailAt {
            step: 0,
            reason: format!("start state {:?} is not initial", trace.start),
        };
    }
    let mut cur = &trace.start;
    for (i, r) in trace.steps.iter().enumerate() {
        let step = i + 1;
        let fail = |reason: String| TraceVerdict::FailAt { step, reason };
        if &r.pre != cur {
            return fail("pre-state does not chain from the previous post-state".into());
        }
        if let Err(e) = machine.check_label(&r.label) {
            return fail(e.to_string());
        }
        let (post, output) = machine.transition(&r.label, &r.pre, r.input.as_ref());
        if post != r.post || output != r.output {
            return fail("recorded post-state or output differs from the transition".into());
        }
        if !machine.constraint(&r.label, &r.pre, r.input.as_ref()) {
            return fail(format!("constraint rejects input {:?}", r.input));
        }
        if let (Some(valid), Some(m)) = (valid, r.input.as_ref()) {
            if !valid(m) {
                return fail(format!(
                    "input {m:?} is not a valid message within the bound"
                ));
            }
        }
        cur = &r.post;
    }
    TraceVerdict::Ok
}
