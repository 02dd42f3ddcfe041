//! Byzantine parts that emit any message attributed to them, and bounded
//! comparisons of what honest parts can observe under Byzantine and under
//! equivocating neighbours.
//!
//! A Byzantine part's initial messages are its whole message domain, which
//! here is a finite window supplied by the caller. The same window bounds
//! the inputs on the equivocation side so the two are compared like for
//! like.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::compose::{
    free_compose, is_validator, CompositeLabel, Composition, Either, Member, ValidatorVerdict,
    WithInitialMessages,
};
use crate::equivocation::{check_full_node, MessageOracle, SentOracle};
use crate::error::{Result, VlsmError};
use crate::explore::{find_valid_trace, reach, reach_constrained, valid_traces, TraceVerdict};
use crate::models::{
    message_equiv_fixed_with, message_equiv_limited, AnnotatedModel, ReceiverRule,
};
use crate::umo::WeightMap;
use crate::vlsm::{Address, Bound, TraceOf, Vlsm};

/// Emits any message of `domain` whose sender is `addr`; the label is the
/// message. One state, never left.
#[derive(Clone)]
pub struct Byzantine<V: Vlsm> {
    addr: Address,
    oracle: V,
    domain: Arc<Vec<V::Message>>,
}

impl<V: Vlsm + fmt::Debug> fmt::Debug for Byzantine<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Byzantine")
            .field("addr", &self.addr)
            .field("domain", &self.domain.len())
            .finish()
    }
}

/// `oracle` supplies the sender of each message.
pub fn byzantine_component<V: MessageOracle>(
    addr: Address,
    oracle: V,
    domain: Arc<Vec<V::Message>>,
) -> Byzantine<V> {
    Byzantine {
        addr,
        oracle,
        domain,
    }
}

impl<V: MessageOracle> Byzantine<V> {
    pub fn addr(&self) -> Address {
        self.addr
    }
}

impl<V: MessageOracle> Vlsm for Byzantine<V> {
    type Label = V::Message;
    type State = ();
    type Message = V::Message;

    fn initial_states(&self) -> Vec<()> {
        vec![()]
    }

    fn initial_messages(&self) -> Vec<V::Message> {
        self.domain.to_vec()
    }

    fn labels(&self, _: &()) -> Vec<V::Message> {
        self.domain
            .iter()
            .filter(|m| self.oracle.sender(m) == Some(self.addr))
            .cloned()
            .collect()
    }

    fn transition(
        &self,
        l: &V::Message,
        _: &(),
        _: Option<&V::Message>,
    ) -> ((), Option<V::Message>) {
        ((), Some(l.clone()))
    }

    fn constraint(&self, l: &V::Message, _: &(), _: Option<&V::Message>) -> bool {
        self.oracle.sender(l) == Some(self.addr)
    }
}

impl<V: MessageOracle> MessageOracle for Byzantine<V> {
    fn sender(&self, m: &V::Message) -> Option<Address> {
        self.oracle.sender(m)
    }

    fn dependencies(&self, m: &V::Message) -> Vec<V::Message> {
        self.oracle.dependencies(m)
    }
}

/// The single state is reached by traces emitting nothing, so no message
/// is sent on every trace to it.
impl<V: MessageOracle> SentOracle for Byzantine<V> {
    fn sent_messages(&self, _: &()) -> Vec<V::Message> {
        Vec::new()
    }

    fn received_messages(&self, _: &()) -> Vec<V::Message> {
        Vec::new()
    }
}

pub type Part<V> = Member<V, Byzantine<V>>;

impl<V: MessageOracle> MessageOracle for Part<V> {
    fn sender(&self, m: &V::Message) -> Option<Address> {
        match self {
            Member::Original(v) => v.sender(m),
            Member::Substitute(b) => b.sender(m),
        }
    }

    fn dependencies(&self, m: &V::Message) -> Vec<V::Message> {
        match self {
            Member::Original(v) => v.dependencies(m),
            Member::Substitute(b) => b.dependencies(m),
        }
    }
}

impl<V: SentOracle + MessageOracle> SentOracle for Part<V> {
    fn sent_messages(&self, s: &Self::State) -> Vec<V::Message> {
        match (self, s) {
            (Member::Original(v), Either::Left(s)) => v.sent_messages(s),
            _ => Vec::new(),
        }
    }

    fn received_messages(&self, s: &Self::State) -> Vec<V::Message> {
        match (self, s) {
            (Member::Original(v), Either::Left(s)) => v.received_messages(s),
            _ => Vec::new(),
        }
    }
}

fn check_subset(n: usize, b: &BTreeSet<Address>) -> Result<()> {
    match b.iter().find(|a| **a == 0 || **a > n) {
        Some(a) => Err(VlsmError::InvalidArgument(format!(
            "part {a} is not one of 1..={n}"
        ))),
        None => Ok(()),
    }
}

/// Parts in `b` are replaced by Byzantine parts over `domain`. Honest
/// parts only receive messages their sender has sent; Byzantine parts
/// receive anything.
pub fn byzantine_composition<V>(
    components: Vec<V>,
    b: &BTreeSet<Address>,
    domain: &[V::Message],
) -> Result<Composition<Part<V>>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    check_subset(components.len(), b)?;
    let domain = Arc::new(domain.to_vec());
    let parts: Vec<Part<V>> = components
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            if b.contains(&(k + 1)) {
                Member::Substitute(byzantine_component(k + 1, v, domain.clone()))
            } else {
                Member::Original(v)
            }
        })
        .collect();
    let shared = Arc::new(parts.clone());
    let b = b.clone();
    Ok(free_compose(parts)?.constrain(move |l, sigma, m| {
        let Some(m) = m else { return true };
        let sent = match shared[0].sender(m) {
            Some(a) if (1..=shared.len()).contains(&a) => {
                shared[a - 1].has_been_sent(sigma.part(a), m)
            }
            _ => false,
        };
        sent || b.contains(&l.index)
    }))
}

/// Messages an honest part may be shown, and the depth at which their
/// validity in the equivocation models is decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window<M> {
    pub messages: Vec<M>,
    pub depth: usize,
}

impl<M: Ord + Clone> Window<M> {
    pub fn new(messages: Vec<M>, depth: usize) -> Self {
        Window { messages, depth }
    }

    fn restrict(&self, valid: &[M]) -> BTreeSet<M> {
        let mine: BTreeSet<&M> = self.messages.iter().collect();
        valid.iter().filter(|m| mine.contains(m)).cloned().collect()
    }

    fn all(&self) -> BTreeSet<M> {
        self.messages.iter().cloned().collect()
    }
}

fn projection<V: Vlsm + Clone>(
    component: &V,
    messages: BTreeSet<V::Message>,
) -> WithInitialMessages<V> {
    WithInitialMessages {
        inner: component.clone(),
        messages: Arc::new(messages),
    }
}

/// Window messages that are valid in the composition with Byzantine parts
/// `b`. With `b` nonempty this is the whole window, since a Byzantine
/// part's initial messages are its domain.
fn byzantine_messages<V>(
    components: &[V],
    b: &BTreeSet<Address>,
    window: &Window<V::Message>,
    cap: usize,
) -> Result<BTreeSet<V::Message>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    if !b.is_empty() {
        return Ok(window.all());
    }
    let comp = byzantine_composition(components.to_vec(), b, &window.messages)?;
    let r = reach(&comp, Bound::depth(window.depth).with_cap(cap))?;
    Ok(window.restrict(r.proper_messages()))
}

fn equivocation_messages<V>(
    components: &[V],
    e: &BTreeSet<Address>,
    rule: ReceiverRule,
    window: &Window<V::Message>,
    cap: usize,
) -> Result<BTreeSet<V::Message>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    let mm = message_equiv_fixed_with(components.to_vec(), e, rule)?;
    let r = reach(&mm, Bound::depth(window.depth).with_cap(cap))?;
    Ok(window.restrict(r.proper_messages()))
}

fn limited_messages<V>(
    model: &AnnotatedModel<V>,
    window: &Window<V::Message>,
    cap: usize,
) -> Result<BTreeSet<V::Message>>
where
    V: SentOracle + MessageOracle + Clone,
{
    let r = reach(model, Bound::depth(window.depth).with_cap(cap))?;
    Ok(window.restrict(r.proper_messages()))
}

/// Traces of honest part `j` of length at most `bound.depth` in the
/// projection of the composition with Byzantine parts `b`.
pub fn exposed_byzantine<V>(
    components: &[V],
    b: &BTreeSet<Address>,
    j: Address,
    bound: Bound,
    window: &Window<V::Message>,
) -> Result<Vec<TraceOf<V>>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    check_subset(components.len(), b)?;
    check_part(components.len(), j)?;
    if b.contains(&j) {
        return Err(VlsmError::InvalidArgument(format!("part {j} is Byzantine")));
    }
    let ms = byzantine_messages(components, b, window, bound.cap)?;
    valid_traces(&projection(&components[j - 1], ms), bound)
}

/// Traces of part `j` in the projection of the message-equivocation model
/// with equivocators `e`.
pub fn exposed_equivocation<V>(
    components: &[V],
    e: &BTreeSet<Address>,
    rule: ReceiverRule,
    j: Address,
    bound: Bound,
    window: &Window<V::Message>,
) -> Result<Vec<TraceOf<V>>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    check_part(components.len(), j)?;
    let ms = equivocation_messages(components, e, rule, window, bound.cap)?;
    valid_traces(&projection(&components[j - 1], ms), bound)
}

/// Traces of part `j` in the projection of the weight-limited model.
pub fn exposed_limited<V>(
    model: &AnnotatedModel<V>,
    j: Address,
    bound: Bound,
    window: &Window<V::Message>,
) -> Result<Vec<TraceOf<V>>>
where
    V: SentOracle + MessageOracle + Clone,
{
    model.free().check_index(j)?;
    let ms = limited_messages(model, window, bound.cap)?;
    valid_traces(&projection(model.free().component(j), ms), bound)
}

fn check_part(n: usize, j: Address) -> Result<()> {
    if (1..=n).contains(&j) {
        Ok(())
    } else {
        Err(VlsmError::InvalidArgument(format!(
            "part {j} is not one of 1..={n}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Byzantine,
    Equivocation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ByzantineVerdict<T> {
    /// Number of exposed traces per honest part.
    Confirmed {
        depth: usize,
        exposed: BTreeMap<Address, usize>,
    },
    /// A trace of honest part `part` found on one side only.
    Refuted {
        part: Address,
        only_in: Side,
        trace: T,
    },
}

impl<T> ByzantineVerdict<T> {
    pub fn is_confirmed(&self) -> bool {
        matches!(self, ByzantineVerdict::Confirmed { .. })
    }
}

fn compare<T: Ord + Clone>(part: Address, byz: &[T], eqv: &[T]) -> Option<ByzantineVerdict<T>> {
    let bs: BTreeSet<&T> = byz.iter().collect();
    let es: BTreeSet<&T> = eqv.iter().collect();
    if let Some(t) = bs.difference(&es).next() {
        return Some(ByzantineVerdict::Refuted {
            part,
            only_in: Side::Byzantine,
            trace: (*t).clone(),
        });
    }
    es.difference(&bs)
        .next()
        .map(|t| ByzantineVerdict::Refuted {
            part,
            only_in: Side::Equivocation,
            trace: (*t).clone(),
        })
}

/// First trace in the projection over `messages` on which `component`
/// receives a message before observing its dependencies.
pub fn full_node_violation<V>(
    component: &V,
    messages: BTreeSet<V::Message>,
    bound: Bound,
) -> Result<Option<TraceOf<V>>>
where
    V: SentOracle + MessageOracle + Clone + Sync,
{
    let proj = projection(component, messages);
    let (_, hit) = find_valid_trace(&proj, bound, |t| {
        matches!(
            check_full_node(component, t),
            Ok(TraceVerdict::FailAt { .. }) | Err(_)
        )
    })?;
    Ok(hit)
}

fn require_full_node<V>(
    component: &V,
    j: Address,
    messages: BTreeSet<V::Message>,
    bound: Bound,
) -> Result<()>
where
    V: SentOracle + MessageOracle + Clone + Sync,
{
    let Some(t) = full_node_violation(component, messages, bound)? else {
        return Ok(());
    };
    let why = match check_full_node(component, &t)? {
        TraceVerdict::FailAt { step, reason } => format!("step {step}: {reason}"),
        TraceVerdict::Ok => String::new(),
    };
    Err(VlsmError::PreconditionFailed(format!(
        "part {j} is not a full node on {:?} ({why})",
        t.skeleton()
    )))
}

/// Compares exposed traces for every honest part without checking the
/// hypotheses.
pub fn compare_fixed_exposed<V>(
    components: &[V],
    b: &BTreeSet<Address>,
    rule: ReceiverRule,
    bound: Bound,
    window: &Window<V::Message>,
) -> Result<ByzantineVerdict<TraceOf<V>>>
where
    V: SentOracle + MessageOracle + Clone + 'static,
{
    check_subset(components.len(), b)?;
    let bm = byzantine_messages(components, b, window, bound.cap)?;
    let em = equivocation_messages(components, b, rule, window, bound.cap)?;
    let mut exposed = BTreeMap::new();
    for j in (1..=components.len()).filter(|j| !b.contains(j)) {
        let c = &components[j - 1];
        let byz = valid_traces(&projection(c, bm.clone()), bound)?;
        let eqv = valid_traces(&projection(c, em.clone()), bound)?;
        if let Some(v) = compare(j, &byz, &eqv) {
            return Ok(v);
        }
        exposed.insert(j, byz.len());
    }
    Ok(ByzantineVerdict::Confirmed {
        depth: bound.depth,
        exposed,
    })
}

/// Fixed-set comparison between Byzantine parts `b` and equivocators `b`.
/// Every honest part must be a full node on both sides and a validator for
/// the message-equivocation model over the window; otherwise the result is
/// `PreconditionFailed`.
pub fn fixed_equivalence_check<V>(
    components: &[V],
    b: &BTreeSet<Address>,
    rule: ReceiverRule,
    bound: Bound,
    window: &Window<V::Message>,
) -> Result<ByzantineVerdict<TraceOf<V>>>
where
    V: SentOracle + MessageOracle + Clone + Sync + 'static,
{
    check_subset(components.len(), b)?;
    let bm = byzantine_messages(components, b, window, bound.cap)?;
    let em = equivocation_messages(components, b, rule, window, bound.cap)?;
    let honest: Vec<Address> = (1..=components.len()).filter(|j| !b.contains(j)).collect();
    for &j in &honest {
        require_full_node(&components[j - 1], j, bm.clone(), bound)?;
        require_full_node(&components[j - 1], j, em.clone(), bound)?;
    }
    let mm = message_equiv_fixed_with(components.to_vec(), b, rule)?;
    for &j in &honest {
        if let ValidatorVerdict::Counterexample {
            state,
            label,
            input,
        } = is_validator(&mm, j, bound, &window.messages)?
        {
            return Err(VlsmError::PreconditionFailed(format!(
                "part {j} is not a validator for the message-equivocation model: \
                 {label:?} from {state:?} on {input:?}"
            )));
        }
    }
    compare_fixed_exposed(components, b, rule, bound, window)
}

/// Some constrained transition of part `i` that cannot be embedded in a
/// valid annotated state `⟨σ, eqv⟩` with `σ_i = s`, `m` valid and the
/// limited constraint holding. Part states are explored within
/// `bound.depth` over the window, annotated states within twice that.
pub fn limited_validator_counterexample<V>(
    model: &AnnotatedModel<V>,
    i: Address,
    bound: Bound,
    window: &Window<V::Message>,
) -> Result<Option<(V::State, V::Label, Option<V::Message>)>>
where
    V: SentOracle + MessageOracle + Clone,
{
    model.free().check_index(i)?;
    let component = model.free().component(i);
    let areach = reach(model, bound.with_depth(2 * bound.depth))?;
    let mut index: BTreeMap<&V::State, Vec<_>> = BTreeMap::new();
    for s in areach.states() {
        index.entry(s.base.part(i)).or_default().push(s);
    }
    let local = reach_constrained(component, bound, &window.messages)?;
    let inputs: Vec<Option<V::Message>> = std::iter::once(None)
        .chain(window.messages.iter().cloned().map(Some))
        .collect();
    for s in local.states() {
        for l in component.labels(s) {
            for m in &inputs {
                if !component.constraint(&l, s, m.as_ref()) {
                    continue;
                }
                let cl = CompositeLabel::new(i, l.clone());
                let embeds = areach.contains_message(m.as_ref())
                    && index.get(s).is_some_and(|cands| {
                        cands.iter().any(|a| model.constraint(&cl, a, m.as_ref()))
                    });
                if !embeds {
                    return Ok(Some((s.clone(), l, m.clone())));
                }
            }
        }
    }
    Ok(None)
}

/// Weight-limited comparison. For each part `j` the traces exposed to any
/// Byzantine set `B ∌ j` of weight below the threshold are compared with
/// the traces of `j` in the projection of the annotated model. Hypotheses
/// as in [`fixed_equivalence_check`], with the limited validator condition
/// for every part.
pub fn limited_equivalence_check<V>(
    components: &[V],
    weights: Arc<WeightMap>,
    bound: Bound,
    window: &Window<V::Message>,
) -> Result<ByzantineVerdict<TraceOf<V>>>
where
    V: SentOracle + MessageOracle + Clone + Sync + 'static,
{
    let n = components.len();
    let am = message_equiv_limited(components.to_vec(), weights.clone())?;
    let em = limited_messages(&am, window, bound.cap)?;
    let sets: Vec<BTreeSet<Address>> = (0..1u64 << n)
        .map(|bits| {
            (1..=n)
                .filter(|a| bits >> (a - 1) & 1 == 1)
                .collect::<BTreeSet<_>>()
        })
        .filter(|b| weights.below(b))
        .collect();
    let mut per_part = Vec::new();
    for j in 1..=n {
        let mut bm = BTreeSet::new();
        for b in sets.iter().filter(|b| !b.contains(&j)) {
            bm.extend(byzantine_messages(components, b, window, bound.cap)?);
        }
        require_full_node(&components[j - 1], j, bm.clone(), bound)?;
        require_full_node(&components[j - 1], j, em.clone(), bound)?;
        per_part.push(bm);
    }
    for i in 1..=n {
        if let Some((s, l, m)) = limited_validator_counterexample(&am, i, bound, window)? {
            return Err(VlsmError::PreconditionFailed(format!(
                "part {i} is not a validator for the limited message-equivocation model: \
                 {l:?} from {s:?} on {m:?}"
            )));
        }
    }
    let mut exposed = BTreeMap::new();
    for (k, bm) in per_part.into_iter().enumerate() {
        let c = &components[k];
        let byz = valid_traces(&projection(c, bm), bound)?;
        let eqv = valid_traces(&projection(c, em.clone()), bound)?;
        if let Some(v) = compare(k + 1, &byz, &eqv) {
            return Ok(v);
        }
        exposed.insert(k + 1, byz.len());
    }
    Ok(ByzantineVerdict::Confirmed {
        depth: bound.depth,
        exposed,
    })
}
