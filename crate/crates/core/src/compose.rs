//! Free and constrained composition, projections, induced projections and
//! validators.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Result, VlsmError};
use crate::explore::{
    check_trace_against, par_map, reach, reach_constrained, ReachSet, TraceVerdict,
};
use crate::vlsm::{Bound, RecordOf, Trace, TraceOf, TransitionRecord, Vlsm};

/// `⟨s₁, …, sₙ⟩`. Parts are addressed 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompositeState<S>(pub Vec<S>);

impl<S: Clone> CompositeState<S> {
    pub fn part(&self, j: usize) -> &S {
        &self.0[j - 1]
    }

    pub fn parts(&self) -> &[S] {
        &self.0
    }

    pub fn with_part(&self, j: usize, s: S) -> Self {
        let mut parts = self.0.clone();
        parts[j - 1] = s;
        CompositeState(parts)
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }
}

/// `⟨j, l⟩` with `j` 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompositeLabel<L> {
    pub index: usize,
    pub inner: L,
}

impl<L> CompositeLabel<L> {
    pub fn new(index: usize, inner: L) -> Self {
        CompositeLabel { index, inner }
    }
}

pub type Constraint<L, S, M> =
    Arc<dyn Fn(&CompositeLabel<L>, &CompositeState<S>, Option<&M>) -> bool + Send + Sync>;

pub type ConstraintOf<V> = Constraint<<V as Vlsm>::Label, <V as Vlsm>::State, <V as Vlsm>::Message>;

/// The composition of components sharing a message type, optionally
/// restricted by a composition constraint `φ`.
pub struct Composition<V: Vlsm> {
    components: Vec<V>,
    constraint: Option<ConstraintOf<V>>,
}

impl<V: Vlsm + Clone> Clone for Composition<V> {
    fn clone(&self) -> Self {
        Composition {
            components: self.components.clone(),
            constraint: self.constraint.clone(),
        }
    }
}

impl<V: Vlsm + fmt::Debug> fmt::Debug for Composition<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Composition")
            .field("components", &self.components)
            .field("constrained", &self.constraint.is_some())
            .finish()
    }
}

pub type CompositeTrace<V> = Trace<
    CompositeLabel<<V as Vlsm>::Label>,
    CompositeState<<V as Vlsm>::State>,
    <V as Vlsm>::Message,
>;

pub fn free_compose<V: Vlsm>(components: Vec<V>) -> Result<Composition<V>> {
    if components.is_empty() {
        return Err(VlsmError::InvalidArgument(
            "a composition needs at least one component".into(),
        ));
    }
    Ok(Composition {
        components,
        constraint: None,
    })
}

impl<V: Vlsm> Composition<V> {
    /// Adds `φ`, conjoined with any constraint already present.
    pub fn constrain<F>(self, phi: F) -> Self
    where
        F: Fn(&CompositeLabel<V::Label>, &CompositeState<V::State>, Option<&V::Message>) -> bool
            + Send
            + Sync
            + 'static,
    {
        self.constrain_arc(Arc::new(phi))
    }

    pub fn constrain_arc(self, phi: ConstraintOf<V>) -> Self {
        let constraint: ConstraintOf<V> = match self.constraint {
            None => phi,
            Some(prev) => Arc::new(move |l, s, m| prev(l, s, m) && phi(l, s, m)),
        };
        Composition {
            components: self.components,
            constraint: Some(constraint),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[V] {
        &self.components
    }

    /// Component `j` (1-based).
    pub fn component(&self, j: usize) -> &V {
        &self.components[j - 1]
    }

    /// `φ` alone; `true` for a free composition.
    pub fn composition_constraint(
        &self,
        l: &CompositeLabel<V::Label>,
        s: &CompositeState<V::State>,
        m: Option<&V::Message>,
    ) -> bool {
        self.constraint.as_ref().is_none_or(|phi| phi(l, s, m))
    }

    pub fn check_index(&self, j: usize) -> Result<()> {
        if (1..=self.len()).contains(&j) {
            Ok(())
        } else {
            Err(VlsmError::UnknownLabel(format!(
                "component index {j} outside 1..={}",
                self.len()
            )))
        }
    }

    /// The state whose parts are all the first enumerated initial states.
    pub fn initial_state(&self) -> CompositeState<V::State> {
        CompositeState(
            self.components
                .iter()
                .map(|c| {
                    let mut init = c.initial_states();
                    init.sort();
                    init.into_iter()
                        .next()
                        .expect("component has an initial state")
                })
                .collect(),
        )
    }
}

impl<V: Vlsm> Vlsm for Composition<V> {
    type Label = CompositeLabel<V::Label>;
    type State = CompositeState<V::State>;
    type Message = V::Message;

    fn initial_states(&self) -> Vec<Self::State> {
        let mut acc: Vec<Vec<V::State>> = vec![Vec::new()];
        for c in &self.components {
            let mut init = c.initial_states();
            init.sort();
            init.dedup();
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    init.iter().map(move |s| {
                        let mut p = prefix.clone();
                        p.push(s.clone());
                        p
                    })
                })
                .collect();
        }
        acc.into_iter().map(CompositeState).collect()
    }

    fn is_initial_state(&self, s: &Self::State) -> bool {
        s.arity() == self.len()
            && self
                .components
                .iter()
                .zip(s.parts())
                .all(|(c, p)| c.is_initial_state(p))
    }

    fn initial_messages(&self) -> Vec<V::Message> {
        let all: BTreeSet<V::Message> = self
            .components
            .iter()
            .flat_map(|c| c.initial_messages())
            .collect();
        all.into_iter().collect()
    }

    fn labels(&self, s: &Self::State) -> Vec<Self::Label> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                c.labels(&s.0[i])
                    .into_iter()
                    .map(move |l| CompositeLabel::new(i + 1, l))
            })
            .collect()
    }

    fn check_label(&self, label: &Self::Label) -> Result<()> {
        self.check_index(label.index)?;
        self.component(label.index).check_label(&label.inner)
    }

    fn transition(
        &self,
        label: &Self::Label,
        s: &Self::State,
        m: Option<&V::Message>,
    ) -> (Self::State, Option<V::Message>) {
        let j = label.index;
        let (post, out) = self.component(j).transition(&label.inner, s.part(j), m);
        (s.with_part(j, post), out)
    }

    fn constraint(&self, label: &Self::Label, s: &Self::State, m: Option<&V::Message>) -> bool {
        self.check_index(label.index).is_ok()
            && self
                .component(label.index)
                .constraint(&label.inner, s.part(label.index), m)
            && self.composition_constraint(label, s, m)
    }
}

/// The steps of `trace` labelled `⟨j, ·⟩`, as transitions of component `j`.
pub fn project_trace<L, S, M>(
    trace: &Trace<CompositeLabel<L>, CompositeState<S>, M>,
    j: usize,
) -> Trace<L, S, M>
where
    L: Clone,
    S: Clone,
    M: Clone,
{
    Trace {
        start: trace.start.part(j).clone(),
        steps: trace
            .steps
            .iter()
            .filter(|r| r.label.index == j)
            .map(|r| TransitionRecord {
                label: r.label.inner.clone(),
                pre: r.pre.part(j).clone(),
                input: r.input.clone(),
                post: r.post.part(j).clone(),
                output: r.output.clone(),
            })
            .collect(),
    }
}

/// A machine with extra initial messages; everything else is delegated.
#[derive(Debug, Clone)]
pub struct WithInitialMessages<V: Vlsm> {
    pub inner: V,
    pub messages: Arc<BTreeSet<V::Message>>,
}

impl<V: Vlsm> Vlsm for WithInitialMessages<V> {
    type Label = V::Label;
    type State = V::State;
    type Message = V::Message;

    fn initial_states(&self) -> Vec<V::State> {
        self.inner.initial_states()
    }
    fn is_initial_state(&self, s: &V::State) -> bool {
        self.inner.is_initial_state(s)
    }
    fn initial_messages(&self) -> Vec<V::Message> {
        let mut all: BTreeSet<V::Message> = self.inner.initial_messages().into_iter().collect();
        all.extend(self.messages.iter().cloned());
        all.into_iter().collect()
    }
    fn labels(&self, s: &V::State) -> Vec<V::Label> {
        self.inner.labels(s)
    }
    fn check_label(&self, label: &V::Label) -> Result<()> {
        self.inner.check_label(label)
    }
    fn transition(
        &self,
        label: &V::Label,
        s: &V::State,
        m: Option<&V::Message>,
    ) -> (V::State, Option<V::Message>) {
        self.inner.transition(label, s, m)
    }
    fn constraint(&self, label: &V::Label, s: &V::State, m: Option<&V::Message>) -> bool {
        self.inner.constraint(label, s, m)
    }
}

/// Component `j` with the composition's valid messages (within the bound)
/// as its initial messages.
pub fn induced_projection<V: Vlsm + Clone>(
    composite: &Composition<V>,
    j: usize,
    bound: Bound,
) -> Result<WithInitialMessages<V>> {
    composite.check_index(j)?;
    let reach = reach(composite, bound)?;
    Ok(projection_from(composite, j, &reach))
}

pub fn projection_from<V: Vlsm + Clone>(
    composite: &Composition<V>,
    j: usize,
    reach: &ReachSet<Composition<V>>,
) -> WithInitialMessages<V> {
    WithInitialMessages {
        inner: composite.component(j).clone(),
        messages: Arc::new(reach.proper_messages().iter().cloned().collect()),
    }
}

/// A component transition together with a valid composite trace whose last
/// step lifts it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lift<V: Vlsm> {
    pub transition: RecordOf<V>,
    pub composite: CompositeTrace<V>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidatorVerdict<V: Vlsm> {
    /// Every enumerated constrained transition lifted; `lifts` holds one
    /// checked witness per transition.
    Confirmed { depth: usize, lifts: Vec<Lift<V>> },
    Counterexample {
        state: V::State,
        label: V::Label,
        input: Option<V::Message>,
    },
}

impl<V: Vlsm> ValidatorVerdict<V> {
    pub fn is_confirmed(&self) -> bool {
        matches!(self, ValidatorVerdict::Confirmed { .. })
    }
}

/// Valid composite states grouped by their `j`th part, in discovery order.
fn index_by_part<V: Vlsm>(
    reach: &ReachSet<Composition<V>>,
    j: usize,
) -> HashMap<V::State, Vec<CompositeState<V::State>>> {
    let mut index: HashMap<V::State, Vec<CompositeState<V::State>>> = HashMap::new();
    for sigma in reach.states() {
        index
            .entry(sigma.part(j).clone())
            .or_default()
            .push(sigma.clone());
    }
    index
}

/// A component state tagged with its 1-based index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tagged<S> {
    pub index: usize,
    pub state: S,
}

/// The disjoint union of the components of a composition: one state is one
/// component's state. Its layered fixpoint advances every component one
/// step per layer against the shared message pool, so over all depths it
/// yields exactly the valid messages of the free composition, and a
/// composite state is valid in the free composition iff each part is
/// reachable here.
pub struct FreeSum<'a, V: Vlsm> {
    composite: &'a Composition<V>,
}

impl<'a, V: Vlsm> FreeSum<'a, V> {
    pub fn new(composite: &'a Composition<V>) -> Self {
        FreeSum { composite }
    }
}

impl<V: Vlsm> Vlsm for FreeSum<'_, V> {
    type Label = CompositeLabel<V::Label>;
    type State = Tagged<V::State>;
    type Message = V::Message;

    fn initial_states(&self) -> Vec<Self::State> {
        self.composite
            .components()
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                c.initial_states().into_iter().map(move |state| Tagged {
                    index: i + 1,
                    state,
                })
            })
            .collect()
    }

    fn is_initial_state(&self, s: &Self::State) -> bool {
        self.composite.check_index(s.index).is_ok()
            && self.composite.component(s.index).is_initial_state(&s.state)
    }

    fn initial_messages(&self) -> Vec<V::Message> {
        self.composite.initial_messages()
    }

    fn labels(&self, s: &Self::State) -> Vec<Self::Label> {
        self.composite
            .component(s.index)
            .labels(&s.state)
            .into_iter()
            .map(|l| CompositeLabel::new(s.index, l))
            .collect()
    }

    fn check_label(&self, label: &Self::Label) -> Result<()> {
        self.composite.check_label(label)
    }

    fn transition(
        &self,
        label: &Self::Label,
        s: &Self::State,
        m: Option<&V::Message>,
    ) -> (Self::State, Option<V::Message>) {
        if label.index != s.index {
            return (s.clone(), None);
        }
        let (state, out) = self
            .composite
            .component(s.index)
            .transition(&label.inner, &s.state, m);
        (
            Tagged {
                index: s.index,
                state,
            },
            out,
        )
    }

    fn constraint(&self, label: &Self::Label, s: &Self::State, m: Option<&V::Message>) -> bool {
        label.index == s.index
            && self
                .composite
                .component(s.index)
                .constraint(&label.inner, &s.state, m)
    }
}

/// Bounded check that component `j` is a validator.
///
/// Component states are the constrained states of component `j` within
/// `bound.depth` steps, with inputs drawn from `universe` and the valid
/// messages within `bound.depth`. For a free composition a transition
/// lifts iff its state is valid in the induced projection and its input is
/// valid; the lift keeps every other part initial. For a constrained
/// composition the lift is searched among the valid composite states
/// within `2 · bound.depth`. Every lift is replayed and checked before
/// `Confirmed` is returned.
pub fn is_validator<V: Vlsm + Clone>(
    composite: &Composition<V>,
    j: usize,
    bound: Bound,
    universe: &[V::Message],
) -> Result<ValidatorVerdict<V>> {
    composite.check_index(j)?;
    if composite.constraint.is_none() {
        free_validator(composite, j, bound, universe)
    } else {
        constrained_validator(composite, j, bound, universe)
    }
}

type Failure<V> = (
    <V as Vlsm>::State,
    <V as Vlsm>::Label,
    Option<<V as Vlsm>::Message>,
);

/// Runs `lift` on every constrained transition of `component` from each of
/// `states`, stopping at the first failure in enumeration order.
fn collect_lifts<V, F>(
    component: &V,
    states: &[V::State],
    candidates: &[Option<V::Message>],
    mode: crate::vlsm::ExploreMode,
    lift: F,
) -> std::result::Result<Vec<Lift<V>>, Failure<V>>
where
    V: Vlsm,
    F: Fn(&V::State, &V::Label, Option<&V::Message>) -> Option<CompositeTrace<V>> + Sync + Send,
{
    let outcomes = par_map(mode, states, |s| {
        let mut lifts = Vec::new();
        for l in component.labels(s) {
            for m in candidates {
                if !component.constraint(&l, s, m.as_ref()) {
                    continue;
                }
                match lift(s, &l, m.as_ref()) {
                    None => return Err((s.clone(), l, m.clone())),
                    Some(trace) => lifts.push(Lift {
                        transition: TransitionRecord::run(
                            component,
                            l.clone(),
                            s.clone(),
                            m.clone(),
                        ),
                        composite: trace,
                    }),
                }
            }
        }
        Ok(lifts)
    });
    let mut all = Vec::new();
    for o in outcomes {
        all.extend(o?);
    }
    Ok(all)
}

fn finish<V: Vlsm, F>(
    composite: &Composition<V>,
    depth: usize,
    outcome: std::result::Result<Vec<Lift<V>>, Failure<V>>,
    valid: F,
) -> Result<ValidatorVerdict<V>>
where
    F: Fn(&V::Message) -> bool,
{
    let lifts = match outcome {
        Err((state, label, input)) => {
            return Ok(ValidatorVerdict::Counterexample {
                state,
                label,
                input,
            })
        }
        Ok(lifts) => lifts,
    };
    for lift in &lifts {
        if let TraceVerdict::FailAt { step, reason } =
            check_trace_against(composite, &lift.composite, Some(&valid))
        {
            return Err(VlsmError::InvalidArgument(format!(
                "lift witness rejected at step {step}: {reason}"
            )));
        }
    }
    Ok(ValidatorVerdict::Confirmed { depth, lifts })
}

fn offered_inputs<M: Clone + Ord>(universe: &[M], valid: impl Iterator<Item = M>) -> Vec<M> {
    let mut all: BTreeSet<M> = universe.iter().cloned().collect();
    all.extend(valid);
    all.into_iter().collect()
}

fn free_validator<V: Vlsm + Clone>(
    composite: &Composition<V>,
    j: usize,
    bound: Bound,
    universe: &[V::Message],
) -> Result<ValidatorVerdict<V>> {
    let sum = FreeSum::new(composite);
    let sreach = reach(&sum, bound)?;
    let offered = offered_inputs(universe, sreach.proper_messages().iter().cloned());
    let component = composite.component(j);
    let local = reach_constrained(component, bound, &offered)?;
    let projection = WithInitialMessages {
        inner: component.clone(),
        messages: Arc::new(
            offered
                .iter()
                .filter(|m| sreach.contains_message(Some(m)))
                .cloned()
                .collect(),
        ),
    };
    let preach = reach(&projection, bound)?;
    let candidates: Vec<Option<V::Message>> = std::iter::once(None)
        .chain(offered.iter().cloned().map(Some))
        .collect();
    let start = composite.initial_state();
    // outputs of valid projection transitions are valid messages too
    let valid =
        |m: &V::Message| sreach.contains_message(Some(m)) || preach.contains_message(Some(m));
    let outcome = collect_lifts(
        component,
        local.states(),
        &candidates,
        bound.mode,
        |s, l, m| {
            if !m.is_none_or(valid) {
                return None;
            }
            let path = preach.state_witness(&projection, s)?;
            let mut trace = Trace::empty(start.with_part(j, path.start.clone()));
            for r in &path.steps {
                trace.push(
                    composite,
                    CompositeLabel::new(j, r.label.clone()),
                    r.input.clone(),
                );
            }
            trace.push(composite, CompositeLabel::new(j, l.clone()), m.cloned());
            Some(trace)
        },
    );
    finish(composite, bound.depth, outcome, valid)
}

fn constrained_validator<V: Vlsm + Clone>(
    composite: &Composition<V>,
    j: usize,
    bound: Bound,
    universe: &[V::Message],
) -> Result<ValidatorVerdict<V>> {
    let creach = reach(composite, bound.with_depth(2 * bound.depth))?;
    let offered = offered_inputs(
        universe,
        creach
            .proper_messages()
            .iter()
            .filter(|m| {
                creach
                    .message_origin(m)
                    .is_some_and(|o| o.layer() <= bound.depth)
            })
            .cloned(),
    );
    let component = composite.component(j);
    let local = reach_constrained(component, bound, &offered)?;
    let index = index_by_part(&creach, j);
    let candidates: Vec<Option<V::Message>> = std::iter::once(None)
        .chain(offered.iter().cloned().map(Some))
        .collect();
    let outcome = collect_lifts(
        component,
        local.states(),
        &candidates,
        bound.mode,
        |s, l, m| {
            if !creach.contains_message(m) {
                return None;
            }
            let label = CompositeLabel::new(j, l.clone());
            let sigma = index
                .get(s)?
                .iter()
                .find(|sigma| composite.constraint(&label, sigma, m))?;
            let mut trace = creach.state_witness(composite, sigma)?;
            trace.push(composite, label, m.cloned());
            Some(trace)
        },
    );
    finish(composite, bound.depth, outcome, |m| {
        creach.contains_message(Some(m))
    })
}

/// Component `j` constrained by `(β ∧ φ)|ⱼ`: the input is a valid message
/// of the composition and some valid composite state with `j`th part `s`
/// accepts `⟨j, l⟩` with it. Validity is decided within the bound the
/// validator was built with.
pub struct InducedValidator<V: Vlsm> {
    composite: Composition<V>,
    j: usize,
    reach: Arc<ReachSet<Composition<V>>>,
    index: Arc<HashMap<V::State, Vec<CompositeState<V::State>>>>,
}

impl<V: Vlsm + Clone> Clone for InducedValidator<V> {
    fn clone(&self) -> Self {
        InducedValidator {
            composite: self.composite.clone(),
            j: self.j,
            reach: self.reach.clone(),
            index: self.index.clone(),
        }
    }
}

impl<V: Vlsm + fmt::Debug> fmt::Debug for InducedValidator<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InducedValidator")
            .field("j", &self.j)
            .field("depth", &self.reach.depth)
            .finish()
    }
}

pub fn induced_validator<V: Vlsm + Clone>(
    composite: &Composition<V>,
    j: usize,
    bound: Bound,
) -> Result<InducedValidator<V>> {
    composite.check_index(j)?;
    let reach = reach(composite, bound)?;
    let index = index_by_part(&reach, j);
    Ok(InducedValidator {
        composite: composite.clone(),
        j,
        reach: Arc::new(reach),
        index: Arc::new(index),
    })
}

impl<V: Vlsm + Clone> InducedValidator<V> {
    pub fn composite_reach(&self) -> &ReachSet<Composition<V>> {
        &self.reach
    }

    /// A valid composite state that accepts `⟨j, l⟩` with `m` and has `s` as
    /// its `j`th part.
    pub fn lift_state(
        &self,
        l: &V::Label,
        s: &V::State,
        m: Option<&V::Message>,
    ) -> Option<&CompositeState<V::State>> {
        if !self.reach.contains_message(m) {
            return None;
        }
        let label = CompositeLabel::new(self.j, l.clone());
        self.index
            .get(s)?
            .iter()
            .find(|sigma| self.composite.constraint(&label, sigma, m))
    }
}

impl<V: Vlsm + Clone> Vlsm for InducedValidator<V> {
    type Label = V::Label;
    type State = V::State;
    type Message = V::Message;

    fn initial_states(&self) -> Vec<V::State> {
        self.composite.component(self.j).initial_states()
    }
    fn is_initial_state(&self, s: &V::State) -> bool {
        self.composite.component(self.j).is_initial_state(s)
    }
    fn initial_messages(&self) -> Vec<V::Message> {
        self.composite.component(self.j).initial_messages()
    }
    fn labels(&self, s: &V::State) -> Vec<V::Label> {
        self.composite.component(self.j).labels(s)
    }
    fn check_label(&self, label: &V::Label) -> Result<()> {
        self.composite.component(self.j).check_label(label)
    }
    fn transition(
        &self,
        label: &V::Label,
        s: &V::State,
        m: Option<&V::Message>,
    ) -> (V::State, Option<V::Message>) {
        self.composite.component(self.j).transition(label, s, m)
    }
    fn constraint(&self, label: &V::Label, s: &V::State, m: Option<&V::Message>) -> bool {
        self.lift_state(label, s, m).is_some()
    }
}

/// One of two machine kinds sharing a message type, for compositions that
/// replace some components by a different machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Member<A, B> {
    Original(A),
    Substitute(B),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Either<X, Y> {
    Left(X),
    Right(Y),
}

impl<X, Y> Either<X, Y> {
    pub fn left(&self) -> Option<&X> {
        match self {
            Either::Left(x) => Some(x),
            Either::Right(_) => None,
        }
    }

    pub fn right(&self) -> Option<&Y> {
        match self {
            Either::Left(_) => None,
            Either::Right(y) => Some(y),
        }
    }
}

impl<A, B> Vlsm for Member<A, B>
where
    A: Vlsm,
    B: Vlsm<Message = A::Message>,
{
    type Label = Either<A::Label, B::Label>;
    type State = Either<A::State, B::State>;
    type Message = A::Message;

    fn initial_states(&self) -> Vec<Self::State> {
        match self {
            Member::Original(a) => a.initial_states().into_iter().map(Either::Left).collect(),
            Member::Substitute(b) => b.initial_states().into_iter().map(Either::Right).collect(),
        }
    }

    fn is_initial_state(&self, s: &Self::State) -> bool {
        match (self, s) {
            (Member::Original(a), Either::Left(s)) => a.is_initial_state(s),
            (Member::Substitute(b), Either::Right(s)) => b.is_initial_state(s),
            _ => false,
        }
    }

    fn initial_messages(&self) -> Vec<Self::Message> {
        match self {
            Member::Original(a) => a.initial_messages(),
            Member::Substitute(b) => b.initial_messages(),
        }
    }

    fn labels(&self, s: &Self::State) -> Vec<Self::Label> {
        match (self, s) {
            (Member::Original(a), Either::Left(s)) => {
                a.labels(s).into_iter().map(Either::Left).collect()
            }
            (Member::Substitute(b), Either::Right(s)) => {
                b.labels(s).into_iter().map(Either::Right).collect()
            }
            _ => Vec::new(),
        }
    }

    fn check_label(&self, label: &Self::Label) -> Result<()> {
        match (self, label) {
            (Member::Original(a), Either::Left(l)) => a.check_label(l),
            (Member::Substitute(b), Either::Right(l)) => b.check_label(l),
            _ => Err(VlsmError::UnknownLabel(format!("{label:?}"))),
        }
    }

    fn transition(
        &self,
        label: &Self::Label,
        s: &Self::State,
        m: Option<&Self::Message>,
    ) -> (Self::State, Option<Self::Message>) {
        match (self, label, s) {
            (Member::Original(a), Either::Left(l), Either::Left(s)) => {
                let (post, out) = a.transition(l, s, m);
                (Either::Left(post), out)
            }
            (Member::Substitute(b), Either::Right(l), Either::Right(s)) => {
                let (post, out) = b.transition(l, s, m);
                (Either::Right(post), out)
            }
            _ => (s.clone(), None),
        }
    }

    fn constraint(&self, label: &Self::Label, s: &Self::State, m: Option<&Self::Message>) -> bool {
        match (self, label, s) {
            (Member::Original(a), Either::Left(l), Either::Left(s)) => a.constraint(l, s, m),
            (Member::Substitute(b), Either::Right(l), Either::Right(s)) => b.constraint(l, s, m),
            _ => false,
        }
    }
}

/// Projects a trace of an `Original` member back onto the wrapped machine.
pub fn unwrap_original<LA, SA, LB, SB, M>(
    trace: &Trace<Either<LA, LB>, Either<SA, SB>, M>,
) -> Option<Trace<LA, SA, M>>
where
    LA: Clone,
    SA: Clone,
    M: Clone,
{
    Some(Trace {
        start: trace.start.left()?.clone(),
        steps: trace
            .steps
            .iter()
            .map(|r| {
                Some(TransitionRecord {
                    label: r.label.left()?.clone(),
                    pre: r.pre.left()?.clone(),
                    input: r.input.clone(),
                    post: r.post.left()?.clone(),
                    output: r.output.clone(),
                })
            })
            .collect::<Option<Vec<_>>>()?,
    })
}

pub type CompositeTraceOf<V> = TraceOf<Composition<V>>;
