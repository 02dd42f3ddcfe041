//! The machine abstraction: labels, states, messages, a total transition
//! function and a validity constraint over its inputs.
//!
//! Messages are carried as `Option<M>`; `None` is the distinguished
//! "no message" value, which is valid by definition.

use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use crate::error::{Result, VlsmError};

/// Bound for labels, states and messages: structural equality, a total
/// canonical order (used to make every enumeration deterministic) and
/// hashing.
pub trait Value: Clone + Eq + Ord + Hash + Debug + Send + Sync + 'static {}

impl<T: Clone + Eq + Ord + Hash + Debug + Send + Sync + 'static> Value for T {}

/// Component addresses. Addresses are the 1-based component indices of a
/// composition: the component with address `a` sits at index `a`.
pub type Address = usize;

/// A validating labelled state transition and message production system.
///
/// State and message domains may be infinite; everything that enumerates
/// works from `initial_states`, `initial_messages` and the per-state label
/// candidates, so the instantiator decides what finite fragment is explored.
pub trait Vlsm: Send + Sync {
    type Label: Value;
    type State: Value;
    type Message: Value;

    /// Finite enumerator over the initial states that exploration starts from.
    fn initial_states(&self) -> Vec<Self::State>;

    /// Decidable initial-state predicate. May accept more states than
    /// `initial_states` enumerates.
    fn is_initial_state(&self, s: &Self::State) -> bool {
        self.initial_states().contains(s)
    }

    fn initial_messages(&self) -> Vec<Self::Message> {
        Vec::new()
    }

    /// Every label that can be constrained at `s` for some input. Labels not
    /// listed here must fail the constraint at `s`.
    fn labels(&self, s: &Self::State) -> Vec<Self::Label>;

    fn check_label(&self, _label: &Self::Label) -> Result<()> {
        Ok(())
    }

    fn transition(
        &self,
        label: &Self::Label,
        s: &Self::State,
        m: Option<&Self::Message>,
    ) -> (Self::State, Option<Self::Message>);

    fn constraint(&self, label: &Self::Label, s: &Self::State, m: Option<&Self::Message>) -> bool;
}

impl<V: Vlsm + ?Sized> Vlsm for Arc<V> {
    type Label = V::Label;
    type State = V::State;
    type Message = V::Message;

    fn initial_states(&self) -> Vec<Self::State> {
        (**self).initial_states()
    }
    fn is_initial_state(&self, s: &Self::State) -> bool {
        (**self).is_initial_state(s)
    }
    fn initial_messages(&self) -> Vec<Self::Message> {
        (**self).initial_messages()
    }
    fn labels(&self, s: &Self::State) -> Vec<Self::Label> {
        (**self).labels(s)
    }
    fn check_label(&self, label: &Self::Label) -> Result<()> {
        (**self).check_label(label)
    }
    fn transition(
        &self,
        label: &Self::Label,
        s: &Self::State,
        m: Option<&Self::Message>,
    ) -> (Self::State, Option<Self::Message>) {
        (**self).transition(label, s, m)
    }
    fn constraint(&self, label: &Self::Label, s: &Self::State, m: Option<&Self::Message>) -> bool {
        (**self).constraint(label, s, m)
    }
}

/// `τ(label, state, input)`.
pub fn apply<V: Vlsm + ?Sized>(
    machine: &V,
    label: &V::Label,
    state: &V::State,
    input: Option<&V::Message>,
) -> Result<(V::State, Option<V::Message>)> {
    machine.check_label(label)?;
    Ok(machine.transition(label, state, input))
}

/// `β(label, state, input)`.
pub fn is_constrained<V: Vlsm + ?Sized>(
    machine: &V,
    label: &V::Label,
    state: &V::State,
    input: Option<&V::Message>,
) -> bool {
    machine.check_label(label).is_ok() && machine.constraint(label, state, input)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionRecord<L, S, M> {
    pub label: L,
    pub pre: S,
    pub input: Option<M>,
    pub post: S,
    pub output: Option<M>,
}

impl<L: Value, S: Value, M: Value> TransitionRecord<L, S, M> {
    /// Runs the transition and records it.
    pub fn run<V>(machine: &V, label: L, pre: S, input: Option<M>) -> Self
    where
        V: Vlsm<Label = L, State = S, Message = M> + ?Sized,
    {
        let (post, output) = machine.transition(&label, &pre, input.as_ref());
        TransitionRecord {
            label,
            pre,
            input,
            post,
            output,
        }
    }
}

/// A sequence of transitions from `start`. Whether it is constrained or
/// valid is decided by [`crate::explore::check_trace`], not by construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trace<L, S, M> {
    pub start: S,
    pub steps: Vec<TransitionRecord<L, S, M>>,
}

pub type TraceOf<V> = Trace<<V as Vlsm>::Label, <V as Vlsm>::State, <V as Vlsm>::Message>;
pub type RecordOf<V> =
    TransitionRecord<<V as Vlsm>::Label, <V as Vlsm>::State, <V as Vlsm>::Message>;

impl<L: Value, S: Value, M: Value> Trace<L, S, M> {
    pub fn empty(start: S) -> Self {
        Trace {
            start,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_state(&self) -> &S {
        self.steps.last().map_or(&self.start, |r| &r.post)
    }

    /// Every state along the trace, `start` included.
    pub fn states(&self) -> impl Iterator<Item = &S> {
        std::iter::once(&self.start).chain(self.steps.iter().map(|r| &r.post))
    }

    /// Appends `τ(label, last_state, input)`.
    pub fn push<V>(&mut self, machine: &V, label: L, input: Option<M>) -> &TransitionRecord<L, S, M>
    where
        V: Vlsm<Label = L, State = S, Message = M> + ?Sized,
    {
        let pre = self.last_state().clone();
        self.steps
            .push(TransitionRecord::run(machine, label, pre, input));
        self.steps.last().expect("just pushed")
    }

    /// Builds a trace by replaying `(label, input)` pairs from `start`.
    pub fn replay<V, I>(machine: &V, start: S, steps: I) -> Self
    where
        V: Vlsm<Label = L, State = S, Message = M> + ?Sized,
        I: IntoIterator<Item = (L, Option<M>)>,
    {
        let mut trace = Trace::empty(start);
        for (label, input) in steps {
            trace.push(machine, label, input);
        }
        trace
    }

    /// Messages output by some step.
    pub fn outputs(&self) -> impl Iterator<Item = &M> {
        self.steps.iter().filter_map(|r| r.output.as_ref())
    }

    /// The `(label, input)` skeleton, which together with `start` determines
    /// the whole trace.
    pub fn skeleton(&self) -> Vec<(L, Option<M>)> {
        self.steps
            .iter()
            .map(|r| (r.label.clone(), r.input.clone()))
            .collect()
    }
}

/// How enumeration work is scheduled. `Parallel` falls back to sequential
/// when the crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExploreMode {
    Sequential,
    #[default]
    Parallel,
}

pub const DEFAULT_CAP: usize = 1_000_000;

/// Depth and resource bound for every enumerating operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bound {
    pub depth: usize,
    /// Maximum number of explored items (states plus messages, or traces).
    pub cap: usize,
    pub mode: ExploreMode,
}

impl Bound {
    pub fn depth(depth: usize) -> Self {
        Bound {
            depth,
            cap: DEFAULT_CAP,
            mode: ExploreMode::default(),
        }
    }

    pub fn with_cap(self, cap: usize) -> Self {
        Bound { cap, ..self }
    }

    pub fn with_mode(self, mode: ExploreMode) -> Self {
        Bound { mode, ..self }
    }

    pub fn with_depth(self, depth: usize) -> Self {
        Bound { depth, ..self }
    }

    pub(crate) fn check(&self, count: usize) -> Result<()> {
        if count > self.cap {
            Err(VlsmError::ResourceLimit { cap: self.cap })
        } else {
            Ok(())
        }
    }
}
