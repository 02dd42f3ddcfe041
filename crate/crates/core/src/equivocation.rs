//! Oracles over messages and states, the observation relations derived from
//! them, and local and global evidence of equivocation.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::compose::{CompositeLabel, CompositeState, CompositeTrace, Composition};
use crate::error::{Result, VlsmError};
use crate::explore::{check_trace_with, TraceVerdict};
use crate::vlsm::{Address, Trace, TraceOf, Vlsm};

/// Sender and direct dependencies of a message.
pub trait MessageOracle: Vlsm {
    fn sender(&self, m: &Self::Message) -> Option<Address>;
    fn dependencies(&self, m: &Self::Message) -> Vec<Self::Message>;
}

/// What a state has sent and received, on every trace reaching it.
pub trait SentOracle: Vlsm {
    fn sent_messages(&self, s: &Self::State) -> Vec<Self::Message>;
    fn received_messages(&self, s: &Self::State) -> Vec<Self::Message>;

    fn has_been_sent(&self, s: &Self::State, m: &Self::Message) -> bool {
        self.sent_messages(s).contains(m)
    }

    fn has_been_received(&self, s: &Self::State, m: &Self::Message) -> bool {
        self.received_messages(s).contains(m)
    }
}

/// A constrained trace reaching a given state.
pub trait Traceable: Vlsm {
    fn state_trace(&self, s: &Self::State) -> Result<TraceOf<Self>>
    where
        Self: Sized;
}

/// `m₁ < m₂`: `m₁` is reachable from `m₂` through one or more dependency
/// edges. A dependency cycle is reported as an ill-formed message.
pub fn happens_before<O: MessageOracle>(o: &O, m1: &O::Message, m2: &O::Message) -> Result<bool> {
    Ok(dependency_closure(o, std::slice::from_ref(m2))?.contains(m1))
}

/// Every message reachable from `roots` through one or more dependency
/// edges.
pub fn dependency_closure<O: MessageOracle>(
    o: &O,
    roots: &[O::Message],
) -> Result<BTreeSet<O::Message>> {
    fn visit<O: MessageOracle>(
        o: &O,
        m: &O::Message,
        done: &mut BTreeSet<O::Message>,
        stack: &mut HashSet<O::Message>,
        out: &mut BTreeSet<O::Message>,
    ) -> Result<()> {
        if done.contains(m) {
            return Ok(());
        }
        if !stack.insert(m.clone()) {
            return Err(VlsmError::IllFormedMessage(format!(
                "dependency cycle through {m:?}"
            )));
        }
        for d in o.dependencies(m) {
            out.insert(d.clone());
            visit(o, &d, done, stack, out)?;
        }
        stack.remove(m);
        done.insert(m.clone());
        Ok(())
    }
    let mut done = BTreeSet::new();
    let mut out = BTreeSet::new();
    for m in roots {
        visit(o, m, &mut done, &mut HashSet::new(), &mut out)?;
    }
    Ok(out)
}

/// `m₁ ⊥ m₂`.
pub fn incomparable<O: MessageOracle>(o: &O, m1: &O::Message, m2: &O::Message) -> Result<bool> {
    let same = o.sender(m1).is_some() && o.sender(m1) == o.sender(m2);
    Ok(same && m1 != m2 && !happens_before(o, m1, m2)? && !happens_before(o, m2, m1)?)
}

pub fn directly_observed_messages<O: SentOracle>(o: &O, s: &O::State) -> BTreeSet<O::Message> {
    o.sent_messages(s)
        .into_iter()
        .chain(o.received_messages(s))
        .collect()
}

pub fn directly_observed<O: SentOracle>(o: &O, s: &O::State, m: &O::Message) -> bool {
    o.has_been_sent(s, m) || o.has_been_received(s, m)
}

/// Directly observed messages and all their indirect dependencies.
pub fn observed_messages<O: SentOracle + MessageOracle>(
    o: &O,
    s: &O::State,
) -> Result<BTreeSet<O::Message>> {
    let direct: Vec<O::Message> = directly_observed_messages(o, s).into_iter().collect();
    let mut all = dependency_closure(o, &direct)?;
    all.extend(direct);
    Ok(all)
}

pub fn indirectly_observed<O: SentOracle + MessageOracle>(
    o: &O,
    s: &O::State,
    m: &O::Message,
) -> Result<bool> {
    Ok(observed_messages(o, s)?.contains(m))
}

/// Observed in some part of `σ`.
pub fn composite_observed_messages<V: SentOracle + MessageOracle>(
    c: &Composition<V>,
    sigma: &CompositeState<V::State>,
) -> Result<BTreeSet<V::Message>> {
    let mut all = BTreeSet::new();
    for (k, s) in sigma.parts().iter().enumerate() {
        all.extend(observed_messages(c.component(k + 1), s)?);
    }
    Ok(all)
}

pub fn composite_has_been_sent<V: SentOracle>(
    c: &Composition<V>,
    sigma: &CompositeState<V::State>,
    m: &V::Message,
) -> bool {
    sigma
        .parts()
        .iter()
        .enumerate()
        .any(|(k, s)| c.component(k + 1).has_been_sent(s, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvidenceKind {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Evidence<M> {
    /// Two incomparable observed messages of one sender.
    Pair(M, M),
    /// An observed message that no part has sent.
    Unsent(M),
}

/// Equivocators and one witness each (the least in canonical order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivocationReport<M> {
    pub kind: EvidenceKind,
    pub equivocators: BTreeSet<Address>,
    pub witnesses: BTreeMap<Address, Evidence<M>>,
}

impl<M> EquivocationReport<M> {
    pub fn is_empty(&self) -> bool {
        self.equivocators.is_empty()
    }
}

fn pair_report<O: MessageOracle>(
    o: &O,
    observed: &BTreeSet<O::Message>,
) -> Result<EquivocationReport<O::Message>> {
    let mut by_sender: BTreeMap<Address, Vec<&O::Message>> = BTreeMap::new();
    for m in observed {
        if let Some(a) = o.sender(m) {
            by_sender.entry(a).or_default().push(m);
        }
    }
    let mut witnesses = BTreeMap::new();
    'senders: for (a, msgs) in by_sender {
        for (k, m1) in msgs.iter().enumerate() {
            for m2 in &msgs[k + 1..] {
                if incomparable(o, m1, m2)? {
                    witnesses.insert(a, Evidence::Pair((*m1).clone(), (*m2).clone()));
                    continue 'senders;
                }
            }
        }
    }
    Ok(EquivocationReport {
        kind: EvidenceKind::Local,
        equivocators: witnesses.keys().copied().collect(),
        witnesses,
    })
}

/// Senders with two incomparable messages among those indirectly observed
/// in `s`.
pub fn local_equivocators<O: SentOracle + MessageOracle>(
    o: &O,
    s: &O::State,
) -> Result<EquivocationReport<O::Message>> {
    pair_report(o, &observed_messages(o, s)?)
}

/// [`local_equivocators`] over the directly observed messages only.
pub fn local_equivocators_direct<O: SentOracle + MessageOracle>(
    o: &O,
    s: &O::State,
) -> Result<EquivocationReport<O::Message>> {
    pair_report(o, &directly_observed_messages(o, s))
}

/// Senders of messages observed in `σ` that no part has sent.
pub fn global_equivocators<V: SentOracle + MessageOracle>(
    c: &Composition<V>,
    sigma: &CompositeState<V::State>,
) -> Result<EquivocationReport<V::Message>> {
    let mut witnesses = BTreeMap::new();
    for m in composite_observed_messages(c, sigma)? {
        if composite_has_been_sent(c, sigma, &m) {
            continue;
        }
        if let Some(a) = c.component(1).sender(&m) {
            witnesses.entry(a).or_insert(Evidence::Unsent(m));
        }
    }
    Ok(EquivocationReport {
        kind: EvidenceKind::Global,
        equivocators: witnesses.keys().copied().collect(),
        witnesses,
    })
}

/// Re-checks a local report against `s` clause by clause.
pub fn verify_local<O: SentOracle + MessageOracle>(
    o: &O,
    s: &O::State,
    report: &EquivocationReport<O::Message>,
) -> Result<bool> {
    let observed = observed_messages(o, s)?;
    for (a, ev) in &report.witnesses {
        let Evidence::Pair(m1, m2) = ev else {
            return Ok(false);
        };
        let same_sender = o.sender(m1) == Some(*a) && o.sender(m2) == Some(*a);
        let seen = observed.contains(m1) && observed.contains(m2);
        if !(same_sender && seen && incomparable(o, m1, m2)?) {
            return Ok(false);
        }
    }
    Ok(report.witnesses.keys().copied().collect::<BTreeSet<_>>() == report.equivocators)
}

/// Re-checks a global report against `σ` clause by clause.
pub fn verify_global<V: SentOracle + MessageOracle>(
    c: &Composition<V>,
    sigma: &CompositeState<V::State>,
    report: &EquivocationReport<V::Message>,
) -> Result<bool> {
    let observed = composite_observed_messages(c, sigma)?;
    for (a, ev) in &report.witnesses {
        let Evidence::Unsent(m) = ev else {
            return Ok(false);
        };
        if c.component(1).sender(m) != Some(*a)
            || !observed.contains(m)
            || composite_has_been_sent(c, sigma, m)
        {
            return Ok(false);
        }
    }
    Ok(report.witnesses.keys().copied().collect::<BTreeSet<_>>() == report.equivocators)
}

/// Every proper input's dependencies were observed before it was consumed.
pub fn check_full_node<O: SentOracle + MessageOracle>(
    o: &O,
    trace: &TraceOf<O>,
) -> Result<TraceVerdict> {
    for (i, r) in trace.steps.iter().enumerate() {
        let Some(m) = &r.input else { continue };
        let seen = observed_messages(o, &r.pre)?;
        if let Some(d) = o.dependencies(m).into_iter().find(|d| !seen.contains(d)) {
            return Ok(TraceVerdict::FailAt {
                step: i + 1,
                reason: format!("dependency {d:?} of {m:?} not observed"),
            });
        }
    }
    Ok(TraceVerdict::Ok)
}

/// Checks the sent and received oracles against traces: for every trace,
/// the final state has sent exactly the trace's outputs and received
/// exactly its proper inputs.
pub fn check_oracle_invariance<O: SentOracle>(
    o: &O,
    traces: &[TraceOf<O>],
) -> std::result::Result<(), String> {
    for t in traces {
        let s = t.last_state();
        let outputs: BTreeSet<&O::Message> = t.outputs().collect();
        let inputs: BTreeSet<&O::Message> =
            t.steps.iter().filter_map(|r| r.input.as_ref()).collect();
        let sent: Vec<O::Message> = o.sent_messages(s);
        let received: Vec<O::Message> = o.received_messages(s);
        if sent.iter().collect::<BTreeSet<_>>() != outputs {
            return Err(format!("sent oracle disagrees with a trace reaching {s:?}"));
        }
        if received.iter().collect::<BTreeSet<_>>() != inputs {
            return Err(format!(
                "received oracle disagrees with a trace reaching {s:?}"
            ));
        }
    }
    Ok(())
}

/// A constrained trace reaching `σ` that never exposes global evidence of
/// equivocation beyond what is already exposed, nor beyond `σ`'s own.
///
/// Built greedily from the per-component traces: among the parts with a
/// pending step that the composition accepts, prefer one whose step adds
/// no new equivocator, then the fewest new equivocators, then the lowest
/// index. The result is checked before it is returned.
pub fn minimal_equivocation_trace<V>(
    c: &Composition<V>,
    sigma: &CompositeState<V::State>,
) -> Result<CompositeTrace<V>>
where
    V: SentOracle + MessageOracle + Traceable,
{
    let no_trace = |why: String| VlsmError::NoTrace(format!("{sigma:?}: {why}"));
    if sigma.arity() != c.len() {
        return Err(no_trace("arity mismatch".into()));
    }
    let pending: Vec<TraceOf<V>> = c
        .components()
        .iter()
        .zip(sigma.parts())
        .map(|(v, s)| v.state_trace(s))
        .collect::<Result<_>>()
        .map_err(|e| no_trace(e.to_string()))?;
    let target = global_equivocators(c, sigma)?.equivocators;
    let start = CompositeState(pending.iter().map(|t| t.start.clone()).collect());
    let mut trace: Trace<_, _, _> = Trace::empty(start);
    let mut next = vec![0usize; pending.len()];
    let mut current = global_equivocators(c, trace.last_state())?.equivocators;
    loop {
        let mut best: Option<(bool, usize, usize, BTreeSet<Address>)> = None;
        for (k, t) in pending.iter().enumerate() {
            let Some(step) = t.steps.get(next[k]) else {
                continue;
            };
            let label = CompositeLabel::new(k + 1, step.label.clone());
            let pre = trace.last_state();
            if !c.constraint(&label, pre, step.input.as_ref()) {
                continue;
            }
            let (post, _) = c.transition(&label, pre, step.input.as_ref());
            let after = global_equivocators(c, &post)?.equivocators;
            let added = after.difference(&current).count();
            let key = (added > 0, added, k);
            if best.as_ref().is_none_or(|b| key < (b.0, b.1, b.2)) {
                best = Some((key.0, key.1, key.2, after));
            }
        }
        let Some((_, _, k, after)) = best else { break };
        let step = &pending[k].steps[next[k]];
        trace.push(
            c,
            CompositeLabel::new(k + 1, step.label.clone()),
            step.input.clone(),
        );
        next[k] += 1;
        current = after;
    }
    if trace.last_state() != sigma {
        return Err(no_trace(
            "no constrained schedule of the component traces".into(),
        ));
    }
    if let TraceVerdict::FailAt { step, reason } = check_trace_with(c, &trace, None) {
        return Err(no_trace(format!("step {step}: {reason}")));
    }
    let mut prev = BTreeSet::new();
    for s in trace.states() {
        let g = global_equivocators(c, s)?.equivocators;
        if !prev.is_subset(&g) || !g.is_subset(&target) {
            return Err(no_trace(
                "greedy schedule is not equivocation-monotone".into(),
            ));
        }
        prev = g;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::free_compose;
    use crate::explore::enumerate_traces;
    use crate::umo::{self, mo_protocol, syntactic_universe, umo_component, UmoLabel, UmoState};
    use crate::vlsm::Bound;

    fn init(a: Address) -> UmoState {
        UmoState::initial(a)
    }

    /// Messages 0..4 with a hand-written dependency table.
    struct Table(Vec<Vec<u8>>);

    impl Vlsm for Table {
        type Label = ();
        type State = ();
        type Message = u8;
        fn initial_states(&self) -> Vec<()> {
            vec![()]
        }
        fn labels(&self, _: &()) -> Vec<()> {
            Vec::new()
        }
        fn transition(&self, _: &(), _: &(), _: Option<&u8>) -> ((), Option<u8>) {
            ((), None)
        }
        fn constraint(&self, _: &(), _: &(), _: Option<&u8>) -> bool {
            false
        }
    }

    impl MessageOracle for Table {
        fn sender(&self, _: &u8) -> Option<Address> {
            Some(1)
        }
        fn dependencies(&self, m: &u8) -> Vec<u8> {
            self.0[*m as usize].clone()
        }
    }

    #[test]
    fn happens_before_matches_structural_observation() {
        let u = umo_component(1);
        let msgs = syntactic_universe(&[1, 2], 2);
        for a in msgs.iter().step_by(7) {
            for b in msgs.iter().step_by(5) {
                assert_eq!(happens_before(&u, a, b).unwrap(), umo::happens_before(a, b));
            }
        }
        let a = init(1);
        let b = init(2).received(a.clone());
        let c = init(3).received(b.clone());
        assert!(happens_before(&u, &a, &c).unwrap());
        assert!(!happens_before(&u, &a, &a).unwrap());
    }

    #[test]
    fn dependency_cycles_are_ill_formed() {
        let t = Table(vec![vec![1], vec![2], vec![0], vec![]]);
        assert!(matches!(
            happens_before(&t, &3, &0),
            Err(VlsmError::IllFormedMessage(_))
        ));
        let t = Table(vec![vec![1], vec![2], vec![], vec![0, 2]]);
        assert!(happens_before(&t, &2, &3).unwrap());
        assert!(!happens_before(&t, &3, &2).unwrap());
        assert!(!incomparable(&t, &0, &3).unwrap());
    }

    #[test]
    fn incomparability() {
        let u = umo_component(1);
        let m2 = init(2);
        let m3 = init(2).received(init(1));
        assert!(incomparable(&u, &m2, &m3).unwrap());
        assert!(!incomparable(&u, &init(1), &init(2)).unwrap());
        let later = m2.sent(m2.clone());
        assert!(!incomparable(&u, &m2, &later).unwrap());
    }

    #[test]
    fn observation() {
        let u = umo_component(1);
        let inner = init(3);
        let m = init(2).received(inner.clone());
        let s = init(1).received(m.clone());
        assert!(directly_observed(&u, &s, &m));
        assert!(!directly_observed(&u, &s, &inner));
        assert!(indirectly_observed(&u, &s, &inner).unwrap());
        assert_eq!(
            indirectly_observed(&u, &s, &inner).unwrap(),
            s.observes(&inner)
        );
        assert!(observed_messages(&u, &init(1)).unwrap().is_empty());
    }

    #[test]
    fn local_evidence_from_incomparable_pair() {
        let u = umo_component(1);
        let m2 = init(2);
        let m3 = init(2).received(init(1));
        let s = init(1).received(m2).received(m3);
        let r = local_equivocators(&u, &s).unwrap();
        assert_eq!(r.equivocators, [2].into_iter().collect());
        assert!(verify_local(&u, &s, &r).unwrap());
        let chain = init(1).received(init(2)).received(init(2).sent(init(2)));
        assert!(local_equivocators(&u, &chain).unwrap().is_empty());
    }

    fn fixture() -> (CompositeState<UmoState>, CompositeState<UmoState>) {
        let before = CompositeState(vec![init(1).received(init(2)), init(2)]);
        let after = CompositeState(vec![init(1).received(init(2)), init(2).sent(init(2))]);
        (before, after)
    }

    #[test]
    fn global_evidence_is_not_persistent() {
        let p = mo_protocol(2).unwrap();
        let (before, after) = fixture();
        let r = global_equivocators(&p, &before).unwrap();
        assert_eq!(r.equivocators, [2].into_iter().collect());
        assert!(verify_global(&p, &before, &r).unwrap());
        let (post, _) = p.transition(&CompositeLabel::new(2, UmoLabel::Send), &before, None);
        assert_eq!(post, after);
        assert!(global_equivocators(&p, &after).unwrap().is_empty());
        let initial = CompositeState(vec![init(1), init(2)]);
        assert!(global_equivocators(&p, &initial).unwrap().is_empty());
    }

    #[test]
    fn minimal_trace_sends_before_receiving() {
        let p = mo_protocol(2).unwrap();
        let (_, sigma) = fixture();
        let t = minimal_equivocation_trace(&p, &sigma).unwrap();
        assert_eq!(t.last_state(), &sigma);
        assert_eq!(t.steps[0].label, CompositeLabel::new(2, UmoLabel::Send));
        for s in t.states() {
            assert!(global_equivocators(&p, s).unwrap().is_empty());
        }
        let (eq, _) = fixture();
        let t = minimal_equivocation_trace(&p, &eq).unwrap();
        assert_eq!(t.last_state(), &eq);
        let bad = CompositeState(vec![init(1).sent(init(2)), init(2)]);
        assert!(matches!(
            minimal_equivocation_trace(&p, &bad),
            Err(VlsmError::NoTrace(_))
        ));
    }

    #[test]
    fn full_node_check() {
        let u = umo_component(2);
        let m1 = init(1).sent(init(1)).sent(init(2));
        let t = Trace::replay(
            &u,
            init(2),
            [
                (UmoLabel::Send, None),
                (UmoLabel::Send, None),
                (UmoLabel::Receive, Some(m1)),
            ],
        );
        match check_full_node(&u, &t).unwrap() {
            TraceVerdict::FailAt { step, .. } => assert_eq!(step, 3),
            v => panic!("{v:?}"),
        }
        let t = Trace::replay(&u, init(2), [(UmoLabel::Receive, Some(init(1)))]);
        assert!(check_full_node(&u, &t).unwrap().is_ok());
    }

    #[test]
    fn oracles_agree_with_enumerated_traces() {
        let u = umo_component(1);
        let inputs: Vec<Option<UmoState>> = std::iter::once(None)
            .chain(syntactic_universe(&[1, 2], 1).into_iter().map(Some))
            .collect();
        let traces = enumerate_traces(&u, Bound::depth(3), &inputs).unwrap();
        check_oracle_invariance(&u, &traces).unwrap();
    }

    #[test]
    fn free_composition_reports() {
        let p = free_compose(vec![umo_component(1), umo_component(2)]).unwrap();
        let sigma = CompositeState(vec![init(1).received(init(2).received(init(1))), init(2)]);
        let r = global_equivocators(&p, &sigma).unwrap();
        assert_eq!(r.equivocators, [1, 2].into_iter().collect());
    }
}
