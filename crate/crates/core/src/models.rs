//! Equivocating machines and the fixed-set and weight-limited equivocation
//! models, with trace reducts and lifts between them.
//!
//! Sender addresses double as 1-based component indices throughout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::compose::{
    free_compose, CompositeLabel, CompositeState, CompositeTrace, Composition, ConstraintOf,
};
use crate::equivocation::{observed_messages, MessageOracle, SentOracle};
use crate::error::{Result, VlsmError};
use crate::explore::{
    check_trace_against, check_trace_with, find_valid_trace, reach, TraceVerdict,
};
use crate::umo::WeightMap;
use crate::vlsm::{Address, Bound, Trace, TraceOf, TransitionRecord, Value, Vlsm};

/// The copies `γ` kept by an equivocating machine. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EquivocatorState<S>(Vec<S>);

impl<S: Clone> EquivocatorState<S> {
    pub fn singleton(s: S) -> Self {
        EquivocatorState(vec![s])
    }

    /// `None` when `copies` is empty.
    pub fn from_copies(copies: Vec<S>) -> Option<Self> {
        (!copies.is_empty()).then_some(EquivocatorState(copies))
    }

    pub fn copies(&self) -> &[S] {
        &self.0
    }

    /// `γ[i]`, 1-based.
    pub fn copy(&self, i: usize) -> Option<&S> {
        i.checked_sub(1).and_then(|k| self.0.get(k))
    }

    pub fn first(&self) -> &S {
        &self.0[0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_equivocating(&self) -> bool {
        self.0.len() > 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EquivocatorAction<L, S> {
    Inner(L),
    Duplicate,
    NewMachine(S),
}

/// `⟨i, action⟩` with `i` a 1-based copy index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EquivocatorLabel<L, S> {
    pub copy: usize,
    pub action: EquivocatorAction<L, S>,
}

impl<L, S> EquivocatorLabel<L, S> {
    pub fn inner(copy: usize, l: L) -> Self {
        EquivocatorLabel {
            copy,
            action: EquivocatorAction::Inner(l),
        }
    }

    pub fn duplicate(copy: usize) -> Self {
        EquivocatorLabel {
            copy,
            action: EquivocatorAction::Duplicate,
        }
    }

    pub fn new_machine(copy: usize, s0: S) -> Self {
        EquivocatorLabel {
            copy,
            action: EquivocatorAction::NewMachine(s0),
        }
    }

    /// The wrapped label when this acts on the first copy.
    pub fn on_first(&self) -> Option<&L> {
        match &self.action {
            EquivocatorAction::Inner(l) if self.copy == 1 => Some(l),
            _ => None,
        }
    }
}

/// A machine that may fork copies of itself. With `enabled` off only
/// `⟨1, l⟩` labels are offered and forking is rejected, which makes it a
/// relabelled copy of the inner machine.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Equivocating<V> {
    inner: V,
    enabled: bool,
}

pub fn equivocating<V: Vlsm>(inner: V) -> Equivocating<V> {
    Equivocating {
        inner,
        enabled: true,
    }
}

pub fn non_equivocating<V: Vlsm>(inner: V) -> Equivocating<V> {
    Equivocating {
        inner,
        enabled: false,
    }
}

impl<V: Vlsm> Equivocating<V> {
    pub fn inner(&self) -> &V {
        &self.inner
    }

    pub fn can_equivocate(&self) -> bool {
        self.enabled
    }
}

impl<V: Vlsm> Vlsm for Equivocating<V> {
    type Label = EquivocatorLabel<V::Label, V::State>;
    type State = EquivocatorState<V::State>;
    type Message = V::Message;

    fn initial_states(&self) -> Vec<Self::State> {
        self.inner
            .initial_states()
            .into_iter()
            .map(EquivocatorState::singleton)
            .collect()
    }

    fn is_initial_state(&self, g: &Self::State) -> bool {
        g.len() == 1 && self.inner.is_initial_state(g.first())
    }

    fn initial_messages(&self) -> Vec<V::Message> {
        self.inner.initial_messages()
    }

    fn labels(&self, g: &Self::State) -> Vec<Self::Label> {
        let mut out = Vec::new();
        let copies = if self.enabled { g.len() } else { 1 };
        for (k, s) in g.copies().iter().take(copies).enumerate() {
            out.extend(
                self.inner
                    .labels(s)
                    .into_iter()
                    .map(|l| EquivocatorLabel::inner(k + 1, l)),
            );
        }
        if self.enabled {
            for i in 1..=g.len() {
                out.push(EquivocatorLabel::duplicate(i));
                out.extend(
                    self.inner
                        .initial_states()
                        .into_iter()
                        .map(|s0| EquivocatorLabel::new_machine(i, s0)),
                );
            }
        }
        out
    }

    fn check_label(&self, label: &Self::Label) -> Result<()> {
        if label.copy == 0 {
            return Err(VlsmError::UnknownLabel("copy index 0".into()));
        }
        match &label.action {
            EquivocatorAction::Inner(l) => self.inner.check_label(l),
            _ => Ok(()),
        }
    }

    fn transition(
        &self,
        label: &Self::Label,
        g: &Self::State,
        m: Option<&V::Message>,
    ) -> (Self::State, Option<V::Message>) {
        let Some(s) = g.copy(label.copy) else {
            return (g.clone(), None);
        };
        let mut copies = g.0.clone();
        match &label.action {
            EquivocatorAction::Inner(l) => {
                let (post, out) = self.inner.transition(l, s, m);
                copies[label.copy - 1] = post;
                (EquivocatorState(copies), out)
            }
            EquivocatorAction::Duplicate => {
                copies.insert(label.copy, s.clone());
                (EquivocatorState(copies), None)
            }
            EquivocatorAction::NewMachine(s0) => {
                copies.insert(label.copy, s0.clone());
                (EquivocatorState(copies), None)
            }
        }
    }

    fn constraint(&self, label: &Self::Label, g: &Self::State, m: Option<&V::Message>) -> bool {
        let Some(s) = g.copy(label.copy) else {
            return false;
        };
        match &label.action {
            EquivocatorAction::Inner(l) => {
                (self.enabled || label.copy == 1) && self.inner.constraint(l, s, m)
            }
            EquivocatorAction::Duplicate => self.enabled && m.is_none(),
            EquivocatorAction::NewMachine(s0) => {
                self.enabled && m.is_none() && self.inner.is_initial_state(s0)
            }
        }
    }
}

impl<V: MessageOracle> MessageOracle for Equivocating<V> {
    fn sender(&self, m: &V::Message) -> Option<Address> {
        self.inner.sender(m)
    }

    fn dependencies(&self, m: &V::Message) -> Vec<V::Message> {
        self.inner.dependencies(m)
    }
}

/// A message counts as sent when some copy has sent it.
impl<V: SentOracle> SentOracle for Equivocating<V> {
    fn sent_messages(&self, g: &Self::State) -> Vec<V::Message> {
        let all: BTreeSet<_> = g
            .copies()
            .iter()
            .flat_map(|s| self.inner.sent_messages(s))
            .collect();
        all.into_iter().collect()
    }

    fn received_messages(&self, g: &Self::State) -> Vec<V::Message> {
        let all: BTreeSet<_> = g
            .copies()
            .iter()
            .flat_map(|s| self.inner.received_messages(s))
            .collect();
        all.into_iter().collect()
    }

    fn has_been_sent(&self, g: &Self::State, m: &V::Message) -> bool {
        g.copies().iter().any(|s| self.inner.has_been_sent(s, m))
    }

    fn has_been_received(&self, g: &Self::State, m: &V::Message) -> bool {
        g.copies()
            .iter()
            .any(|s| self.inner.has_been_received(s, m))
    }
}

/// Constrained traces of a machine that end by emitting a given message.
pub trait Emitter: Vlsm {
    /// Candidate traces from an initial state whose last step outputs `m`,
    /// most preferred first. Empty when the machine cannot emit `m`.
    fn emissions(&self, m: &Self::Message) -> Vec<TraceOf<Self>>
    where
        Self: Sized;
}

pub type StateModel<V> = Composition<Equivocating<V>>;
pub type EquivocatorStateOf<V> = EquivocatorState<<V as Vlsm>::State>;
pub type EquivocatorLabelOf<V> = EquivocatorLabel<<V as Vlsm>::Label, <V as Vlsm>::State>;
pub type StateModelTrace<V> = CompositeTrace<Equivocating<V>>;

fn check_equivocators(n: usize, e: &BTreeSet<Address>) -> Result<()> {
    match e.iter().find(|a| **a == 0 || **a > n) {
        Some(a) => Err(VlsmError::InvalidArgument(format!(
            "equivocator {a} is not one of 1..={n}"
        ))),
        None => Ok(()),
    }
}

fn sent_by_sender<V: SentOracle + MessageOracle>(
    parts: &[V],
    states: &[V::State],
    m: &V::Message,
) -> bool {
    match parts[0].sender(m) {
        Some(a) if (1..=parts.len()).contains(&a) => parts[a - 1].has_been_sent(&states[a - 1], m),
        _ => false,
    }
}

/// `φ_s_eqv`: every input was sent by some copy of its sender.
fn phi_state_sent<V>(parts: Arc<Vec<Equivocating<V>>>) -> ConstraintOf<Equivocating<V>>
where
    V: SentOracle + MessageOracle + 'static,
{
    Arc::new(move |_, sigma, m| m.is_none_or(|m| sent_by_sender(&parts, sigma.parts(), m)))
}

/// State-equivocation model: components in `e` may fork, and every input
/// must have been sent by some copy of its sender.
pub fn state_equiv_fixed<V>(components: Vec<V>, e: &BTreeSet<Address>) -> Result<StateModel<V>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    check_equivocators(components.len(), e)?;
    let parts: Vec<_> = components
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            if e.contains(&(k + 1)) {
                equivocating(v)
            } else {
                non_equivocating(v)
            }
        })
        .collect();
    let phi = phi_state_sent(Arc::new(parts.clone()));
    Ok(free_compose(parts)?.constrain_arc(phi))
}

/// Who may receive a message that its sender has not sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ReceiverRule {
    /// Only members of the equivocator set.
    #[default]
    Equivocators,
    /// Any component, as long as the sender is an equivocator.
    Any,
}

/// Message-equivocation model: an input is either sent by its sender or
/// exchanged between two members of `e`.
pub fn message_equiv_fixed<V>(components: Vec<V>, e: &BTreeSet<Address>) -> Result<Composition<V>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    message_equiv_fixed_with(components, e, ReceiverRule::Equivocators)
}

/// [`message_equiv_fixed`] with the receiver restriction chosen by `rule`.
pub fn message_equiv_fixed_with<V>(
    components: Vec<V>,
    e: &BTreeSet<Address>,
    rule: ReceiverRule,
) -> Result<Composition<V>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    check_equivocators(components.len(), e)?;
    let parts = Arc::new(components.clone());
    let e = e.clone();
    Ok(free_compose(components)?.constrain(move |l, sigma, m| {
        let Some(m) = m else { return true };
        let receiver_ok = rule == ReceiverRule::Any || e.contains(&l.index);
        sent_by_sender(&parts, sigma.parts(), m)
            || (receiver_ok && parts[0].sender(m).is_some_and(|a| e.contains(&a)))
    }))
}

/// The message model with no equivocators.
pub fn no_equivocation<V>(components: Vec<V>) -> Result<Composition<V>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    message_equiv_fixed(components, &BTreeSet::new())
}

/// Indices whose equivocator keeps more than one copy.
pub fn forked<S: Clone>(gamma: &CompositeState<EquivocatorState<S>>) -> BTreeSet<Address> {
    gamma
        .parts()
        .iter()
        .enumerate()
        .filter(|(_, g)| g.is_equivocating())
        .map(|(k, _)| k + 1)
        .collect()
}

/// `t`-limited state-equivocation model: every component may fork while the
/// forked ones weigh less than the threshold after the step.
pub fn state_equiv_limited<V>(components: Vec<V>, weights: Arc<WeightMap>) -> Result<StateModel<V>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    let parts: Vec<_> = components.into_iter().map(equivocating).collect();
    let shared = Arc::new(parts.clone());
    let sent = phi_state_sent(shared.clone());
    Ok(free_compose(parts)?
        .constrain_arc(sent)
        .constrain(move |l, sigma, m| {
            let j = l.index;
            let (post, _) = shared[j - 1].transition(&l.inner, sigma.part(j), m);
            weights.below(&forked(&sigma.with_part(j, post)))
        }))
}

/// Lifts a composition constraint `φ` to the state model: a step on copy
/// `c` of part `j` is allowed when `φ` holds for some choice of one copy per
/// other part. Forking steps are not constrained.
pub fn lift_constraint<V>(phi: ConstraintOf<V>) -> ConstraintOf<Equivocating<V>>
where
    V: Vlsm + 'static,
{
    Arc::new(move |l, gamma, m| {
        let EquivocatorAction::Inner(inner) = &l.inner.action else {
            return true;
        };
        let Some(own) = gamma.part(l.index).copy(l.inner.copy) else {
            return false;
        };
        let label = CompositeLabel::new(l.index, inner.clone());
        let mut choice: Vec<V::State> = gamma.parts().iter().map(|g| g.first().clone()).collect();
        choice[l.index - 1] = own.clone();
        any_selection(gamma.parts(), l.index - 1, 0, &mut choice, &mut |sel| {
            phi(&label, &CompositeState(sel.to_vec()), m)
        })
    })
}

fn any_selection<S: Clone>(
    parts: &[EquivocatorState<S>],
    fixed: usize,
    k: usize,
    choice: &mut Vec<S>,
    f: &mut dyn FnMut(&[S]) -> bool,
) -> bool {
    if k == parts.len() {
        return f(choice);
    }
    if k == fixed {
        return any_selection(parts, fixed, k + 1, choice, f);
    }
    for s in parts[k].copies() {
        choice[k] = s.clone();
        if any_selection(parts, fixed, k + 1, choice, f) {
            return true;
        }
    }
    false
}

/// A free-composition state annotated with the senders whose messages were
/// received before being sent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnnotatedState<S> {
    pub base: CompositeState<S>,
    pub eqv: BTreeSet<Address>,
}

/// `t`-limited message-equivocation model over annotated states.
pub struct AnnotatedModel<V: Vlsm> {
    free: Composition<V>,
    weights: Arc<WeightMap>,
}

impl<V: Vlsm + Clone> Clone for AnnotatedModel<V> {
    fn clone(&self) -> Self {
        AnnotatedModel {
            free: self.free.clone(),
            weights: self.weights.clone(),
        }
    }
}

impl<V: Vlsm + fmt::Debug> fmt::Debug for AnnotatedModel<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnnotatedModel")
            .field("free", &self.free)
            .field("weights", &self.weights)
            .finish()
    }
}

pub fn message_equiv_limited<V: Vlsm>(
    components: Vec<V>,
    weights: Arc<WeightMap>,
) -> Result<AnnotatedModel<V>> {
    Ok(AnnotatedModel {
        free: free_compose(components)?,
        weights,
    })
}

impl<V: SentOracle + MessageOracle> AnnotatedModel<V> {
    pub fn free(&self) -> &Composition<V> {
        &self.free
    }

    pub fn weights(&self) -> &WeightMap {
        &self.weights
    }

    /// `eqv'` after receiving `m` in `σ`.
    pub fn next_eqv(
        &self,
        s: &AnnotatedState<V::State>,
        m: Option<&V::Message>,
    ) -> BTreeSet<Address> {
        let mut eqv = s.eqv.clone();
        if let Some(m) = m {
            if !sent_by_sender(self.free.components(), s.base.parts(), m) {
                eqv.extend(self.free.component(1).sender(m));
            }
        }
        eqv
    }
}

impl<V: SentOracle + MessageOracle> Vlsm for AnnotatedModel<V> {
    type Label = CompositeLabel<V::Label>;
    type State = AnnotatedState<V::State>;
    type Message = V::Message;

    fn initial_states(&self) -> Vec<Self::State> {
        self.free
            .initial_states()
            .into_iter()
            .map(|base| AnnotatedState {
                base,
                eqv: BTreeSet::new(),
            })
            .collect()
    }

    fn is_initial_state(&self, s: &Self::State) -> bool {
        s.eqv.is_empty() && self.free.is_initial_state(&s.base)
    }

    fn initial_messages(&self) -> Vec<V::Message> {
        self.free.initial_messages()
    }

    fn labels(&self, s: &Self::State) -> Vec<Self::Label> {
        self.free.labels(&s.base)
    }

    fn check_label(&self, l: &Self::Label) -> Result<()> {
        self.free.check_label(l)
    }

    fn transition(
        &self,
        l: &Self::Label,
        s: &Self::State,
        m: Option<&V::Message>,
    ) -> (Self::State, Option<V::Message>) {
        let (base, out) = self.free.transition(l, &s.base, m);
        let eqv = self.next_eqv(s, m);
        (AnnotatedState { base, eqv }, out)
    }

    fn constraint(&self, l: &Self::Label, s: &Self::State, m: Option<&V::Message>) -> bool {
        self.free.constraint(l, &s.base, m) && self.weights.below(&self.next_eqv(s, m))
    }
}

/// First copies of every part.
pub fn state_reduct<S: Clone>(gamma: &CompositeState<EquivocatorState<S>>) -> CompositeState<S> {
    CompositeState(gamma.parts().iter().map(|g| g.first().clone()).collect())
}

/// Keeps the steps acting on first copies, in order, over reduced states.
pub fn trace_reduct<V: Vlsm>(trace: &StateModelTrace<V>) -> CompositeTrace<V> {
    Trace {
        start: state_reduct(&trace.start),
        steps: trace
            .steps
            .iter()
            .filter_map(|r| {
                let l = r.label.inner.on_first()?;
                Some(TransitionRecord {
                    label: CompositeLabel::new(r.label.index, l.clone()),
                    pre: state_reduct(&r.pre),
                    input: r.input.clone(),
                    post: state_reduct(&r.post),
                    output: r.output.clone(),
                })
            })
            .collect(),
    }
}

/// Replays a composite trace in the annotated model from `eqv = ∅`.
pub fn annotate<V: SentOracle + MessageOracle>(
    model: &AnnotatedModel<V>,
    trace: &CompositeTrace<V>,
) -> TraceOf<AnnotatedModel<V>> {
    let start = AnnotatedState {
        base: trace.start.clone(),
        eqv: BTreeSet::new(),
    };
    Trace::replay(
        model,
        start,
        trace
            .steps
            .iter()
            .map(|r| (r.label.clone(), r.input.clone())),
    )
}

/// Drops the annotations.
pub fn strip<L: Value, S: Value, M: Value>(
    trace: &Trace<CompositeLabel<L>, AnnotatedState<S>, M>,
) -> Trace<CompositeLabel<L>, CompositeState<S>, M> {
    Trace {
        start: trace.start.base.clone(),
        steps: trace
            .steps
            .iter()
            .map(|r| TransitionRecord {
                label: r.label.clone(),
                pre: r.pre.base.clone(),
                input: r.input.clone(),
                post: r.post.base.clone(),
                output: r.output.clone(),
            })
            .collect(),
    }
}

fn sent_in<V: SentOracle + MessageOracle>(
    model: &StateModel<V>,
    gamma: &CompositeState<EquivocatorStateOf<V>>,
    m: &V::Message,
) -> bool {
    sent_by_sender(model.components(), gamma.parts(), m)
}

fn push_checked<V: Vlsm>(
    model: &StateModel<V>,
    out: &mut StateModelTrace<V>,
    label: CompositeLabel<EquivocatorLabelOf<V>>,
    input: Option<V::Message>,
) -> std::result::Result<(), String> {
    if !model.constraint(&label, out.last_state(), input.as_ref()) {
        return Err(format!(
            "step {label:?} on input {input:?} is not constrained"
        ));
    }
    out.push(model, label, input);
    Ok(())
}

/// Makes `m` sent in the current state by running one of its sender's
/// emissions on a fresh copy appended after the existing ones, emitting
/// unsent inputs of that emission first.
fn ensure_sent<V>(
    model: &StateModel<V>,
    out: &mut StateModelTrace<V>,
    m: &V::Message,
    visiting: &mut BTreeSet<V::Message>,
) -> std::result::Result<(), String>
where
    V: Emitter + SentOracle + MessageOracle,
{
    if sent_in(model, out.last_state(), m) {
        return Ok(());
    }
    let parts = model.components();
    let a = parts[0]
        .sender(m)
        .filter(|a| (1..=parts.len()).contains(a))
        .ok_or_else(|| format!("{m:?} has no sender among the components"))?;
    if !parts[a - 1].can_equivocate() {
        return Err(format!(
            "{m:?} was never sent and its sender {a} cannot equivocate"
        ));
    }
    if !visiting.insert(m.clone()) {
        return Err(format!("{m:?} depends on itself"));
    }
    let mut last = format!("sender {a} cannot emit {m:?}");
    for emission in parts[a - 1].inner().emissions(m) {
        let mut trial = out.clone();
        match run_emission(model, &mut trial, a, &emission, visiting) {
            Ok(()) => {
                *out = trial;
                visiting.remove(m);
                return Ok(());
            }
            Err(e) => last = e,
        }
    }
    visiting.remove(m);
    Err(last)
}

fn run_emission<V>(
    model: &StateModel<V>,
    out: &mut StateModelTrace<V>,
    a: Address,
    emission: &TraceOf<V>,
    visiting: &mut BTreeSet<V::Message>,
) -> std::result::Result<(), String>
where
    V: Emitter + SentOracle + MessageOracle,
{
    let len = out.last_state().part(a).len();
    let fork = EquivocatorLabel::new_machine(len, emission.start.clone());
    push_checked(model, out, CompositeLabel::new(a, fork), None)?;
    let copy = len + 1;
    for r in &emission.steps {
        if let Some(x) = &r.input {
            ensure_sent(model, out, x, visiting)?;
        }
        let label = CompositeLabel::new(a, EquivocatorLabel::inner(copy, r.label.clone()));
        push_checked(model, out, label, r.input.clone())?;
    }
    Ok(())
}

/// A state-model trace whose reduct is `trace`. Each received message not
/// yet sent is first emitted on a fresh copy of its sender. Requires every
/// receipt in `trace` to satisfy the full node condition.
pub fn lift_trace<V>(model: &StateModel<V>, trace: &CompositeTrace<V>) -> Result<StateModelTrace<V>>
where
    V: Emitter + SentOracle + MessageOracle,
{
    for (k, r) in trace.steps.iter().enumerate() {
        let (j, Some(m)) = (r.label.index, &r.input) else {
            continue;
        };
        let Some(part) = model.components().get(j.wrapping_sub(1)) else {
            return Err(VlsmError::CannotLift {
                step: k + 1,
                reason: format!("no component {j}"),
            });
        };
        let seen = observed_messages(part.inner(), r.pre.part(j))?;
        if let Some(d) = part.dependencies(m).into_iter().find(|d| !seen.contains(d)) {
            return Err(VlsmError::CannotLift {
                step: k + 1,
                reason: format!("full node violated: dependency {d:?} was not observed"),
            });
        }
    }
    let start = CompositeState(
        trace
            .start
            .parts()
            .iter()
            .cloned()
            .map(EquivocatorState::singleton)
            .collect(),
    );
    let mut out = Trace::empty(start);
    let mut visiting = BTreeSet::new();
    for (k, r) in trace.steps.iter().enumerate() {
        let fail = |reason| VlsmError::CannotLift {
            step: k + 1,
            reason,
        };
        if let Some(m) = &r.input {
            ensure_sent(model, &mut out, m, &mut visiting).map_err(fail)?;
        }
        let label = CompositeLabel::new(
            r.label.index,
            EquivocatorLabel::inner(1, r.label.inner.clone()),
        );
        push_checked(model, &mut out, label, r.input.clone()).map_err(fail)?;
    }
    if let TraceVerdict::FailAt { step, reason } = check_trace_with(model, &out, None) {
        return Err(VlsmError::CannotLift {
            step: 0,
            reason: format!("lifted trace fails at its step {step}: {reason}"),
        });
    }
    if trace_reduct::<V>(&out) != *trace {
        return Err(VlsmError::CannotLift {
            step: 0,
            reason: "the reduct of the lifted trace differs from the input".into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Discrepancy<A, B> {
    /// A valid state-model trace whose reduct is not valid in the message
    /// model.
    Reduct { trace: A, verdict: TraceVerdict },
    /// A valid message-model trace that does not lift.
    Lift { trace: B, error: VlsmError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivalenceVerdict<A, B> {
    Confirmed {
        depth: usize,
        reducts: usize,
        lifts: usize,
    },
    Refuted(Discrepancy<A, B>),
}

impl<A, B> EquivalenceVerdict<A, B> {
    pub fn is_confirmed(&self) -> bool {
        matches!(self, EquivalenceVerdict::Confirmed { .. })
    }
}

/// Bounded check of both directions between the fixed-set models: reducts
/// of valid state-model traces are valid message-model traces, and every
/// valid message-model trace lifts back to itself. Message validity on both
/// sides is decided within `bound.depth`.
pub fn fixed_equivalence_check<V>(
    components: Vec<V>,
    e: &BTreeSet<Address>,
    rule: ReceiverRule,
    bound: Bound,
) -> Result<EquivalenceVerdict<StateModelTrace<V>, CompositeTrace<V>>>
where
    V: Emitter + SentOracle + MessageOracle + Clone + 'static,
{
    let sm = state_equiv_fixed(components.clone(), e)?;
    let mm = message_equiv_fixed_with(components, e, rule)?;
    let m_reach = reach(&mm, bound)?;
    let valid = |x: &V::Message| m_reach.contains_message(Some(x));
    let reduct_check =
        |t: &StateModelTrace<V>| check_trace_against(&mm, &trace_reduct::<V>(t), Some(&valid));
    let (reducts, bad) = find_valid_trace(&sm, bound, |t| !reduct_check(t).is_ok())?;
    if let Some(trace) = bad {
        let verdict = reduct_check(&trace);
        return Ok(EquivalenceVerdict::Refuted(Discrepancy::Reduct {
            trace,
            verdict,
        }));
    }
    let (lifts, bad) = find_valid_trace(&mm, bound, |t| lift_trace(&sm, t).is_err())?;
    Ok(match bad {
        Some(trace) => {
            let error = lift_trace(&sm, &trace).expect_err("lift failed during the search");
            EquivalenceVerdict::Refuted(Discrepancy::Lift { trace, error })
        }
        None => EquivalenceVerdict::Confirmed {
            depth: bound.depth,
            reducts,
            lifts,
        },
    })
}

/// Bounded check of both directions between the weight-limited models.
/// Reducts are annotated by replay. A valid annotated trace is lifted in
/// the fixed-set state model for its final `eqv`, and the lift must be
/// valid in the limited state model.
pub fn limited_equivalence_check<V>(
    components: Vec<V>,
    weights: Arc<WeightMap>,
    bound: Bound,
) -> Result<EquivalenceVerdict<StateModelTrace<V>, TraceOf<AnnotatedModel<V>>>>
where
    V: Emitter + SentOracle + MessageOracle + Clone + 'static,
{
    let ls = state_equiv_limited(components.clone(), weights.clone())?;
    let am = message_equiv_limited(components.clone(), weights)?;
    let a_reach = reach(&am, bound)?;
    let valid = |x: &V::Message| a_reach.contains_message(Some(x));
    let reduct_check = |t: &StateModelTrace<V>| {
        check_trace_against(&am, &annotate(&am, &trace_reduct::<V>(t)), Some(&valid))
    };
    let (reducts, bad) = find_valid_trace(&ls, bound, |t| !reduct_check(t).is_ok())?;
    if let Some(trace) = bad {
        let verdict = reduct_check(&trace);
        return Ok(EquivalenceVerdict::Refuted(Discrepancy::Reduct {
            trace,
            verdict,
        }));
    }
    let n = components.len();
    let fixed: BTreeMap<BTreeSet<Address>, StateModel<V>> = subsets(n)
        .into_iter()
        .map(|e| state_equiv_fixed(components.clone(), &e).map(|m| (e, m)))
        .collect::<Result<_>>()?;
    let lift = |t: &TraceOf<AnnotatedModel<V>>| {
        let sm = &fixed[&t.last_state().eqv];
        lift_trace(sm, &strip(t)).and_then(|l| match check_trace_with(&ls, &l, None) {
            TraceVerdict::Ok => Ok(l),
            TraceVerdict::FailAt { step, reason } => Err(VlsmError::CannotLift {
                step: 0,
                reason: format!("lift is not limited at its step {step}: {reason}"),
            }),
        })
    };
    let (lifts, bad) = find_valid_trace(&am, bound, |t| lift(t).is_err())?;
    Ok(match bad {
        Some(trace) => {
            let error = lift(&trace).expect_err("lift failed during the search");
            EquivalenceVerdict::Refuted(Discrepancy::Lift { trace, error })
        }
        None => EquivalenceVerdict::Confirmed {
            depth: bound.depth,
            reducts,
            lifts,
        },
    })
}

fn subsets(n: usize) -> Vec<BTreeSet<Address>> {
    (0..1u64 << n)
        .map(|bits| (1..=n).filter(|a| bits >> (a - 1) & 1 == 1).collect())
        .collect()
}
