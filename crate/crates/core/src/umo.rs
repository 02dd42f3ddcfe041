//! Message observers: components whose state is the list of everything they
//! sent and received, and whose messages are their states.
//!
//! One component type covers three validity constraints: the unvalidating
//! observer (UMO), the message observer (MO) that checks the structure of
//! received messages, and the equivocation-limited observer (ELMO).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::Zero;

use crate::compose::{free_compose, CompositeLabel, CompositeState, CompositeTrace, Composition};
use crate::equivocation::{MessageOracle, SentOracle, Traceable};
use crate::error::{Result, VlsmError};
use crate::explore::{check_trace_with, TraceVerdict};
use crate::models::Emitter;
use crate::vlsm::{Address, Trace, Vlsm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UmoLabel {
    Send,
    Receive,
}

impl fmt::Display for UmoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UmoLabel::Send => "send",
            UmoLabel::Receive => "receive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation {
    pub kind: UmoLabel,
    pub msg: Arc<UmoState>,
}

/// `⟨obs, addr⟩`. Also the message type: a component sends its state.
/// Ordered by address, then observation list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UmoState {
    pub addr: Address,
    pub obs: Vec<Observation>,
}

pub type UmoMessage = UmoState;

impl UmoState {
    pub fn initial(addr: Address) -> Self {
        UmoState {
            addr,
            obs: Vec::new(),
        }
    }

    pub fn id(&self) -> Address {
        self.addr
    }

    /// The state extended with one observation.
    pub fn observe(&self, kind: UmoLabel, msg: UmoState) -> Self {
        let mut obs = self.obs.clone();
        obs.push(Observation {
            kind,
            msg: Arc::new(msg),
        });
        UmoState {
            addr: self.addr,
            obs,
        }
    }

    pub fn sent(&self, msg: UmoState) -> Self {
        self.observe(UmoLabel::Send, msg)
    }

    pub fn received(&self, msg: UmoState) -> Self {
        self.observe(UmoLabel::Receive, msg)
    }

    /// `⟨obs[..k], addr⟩`.
    pub fn prefix(&self, k: usize) -> Self {
        UmoState {
            addr: self.addr,
            obs: self.obs[..k].to_vec(),
        }
    }

    pub fn sent_messages(&self) -> BTreeSet<UmoState> {
        self.observed(Some(UmoLabel::Send))
    }

    pub fn received_messages(&self) -> BTreeSet<UmoState> {
        self.observed(Some(UmoLabel::Receive))
    }

    pub fn messages(&self) -> BTreeSet<UmoState> {
        self.observed(None)
    }

    fn observed(&self, kind: Option<UmoLabel>) -> BTreeSet<UmoState> {
        self.obs
            .iter()
            .filter(|o| kind.is_none_or(|k| o.kind == k))
            .map(|o| (*o.msg).clone())
            .collect()
    }

    pub fn has_sent(&self, m: &UmoState) -> bool {
        self.obs
            .iter()
            .any(|o| o.kind == UmoLabel::Send && *o.msg == *m)
    }

    pub fn has_received(&self, m: &UmoState) -> bool {
        self.obs
            .iter()
            .any(|o| o.kind == UmoLabel::Receive && *o.msg == *m)
    }

    /// Number of state nodes in the structure, shared nodes counted once
    /// per occurrence.
    pub fn size(&self) -> usize {
        1 + self.obs.iter().map(|o| o.msg.size()).sum::<usize>()
    }

    /// `m < self`: `m` is observed in `self`, directly or through nested
    /// observations.
    pub fn observes(&self, m: &UmoState) -> bool {
        fn go<'a>(s: &'a UmoState, m: &UmoState, seen: &mut HashSet<&'a UmoState>) -> bool {
            s.obs
                .iter()
                .any(|o| *o.msg == *m || (seen.insert(&*o.msg) && go(&o.msg, m, seen)))
        }
        go(self, m, &mut HashSet::new())
    }
}

impl fmt::Display for UmoState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("⟨[")?;
        for (k, o) in self.obs.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "({},{})", o.kind, o.msg)?;
        }
        write!(f, "],{}⟩", self.addr)
    }
}

/// `m₁ < m₂`.
pub fn happens_before(m1: &UmoState, m2: &UmoState) -> bool {
    m2.observes(m1)
}

/// `m₁ ⊥ m₂`: distinct messages of one sender, neither observed in the other.
pub fn incomparable(m1: &UmoState, m2: &UmoState) -> bool {
    m1.addr == m2.addr && m1 != m2 && !happens_before(m1, m2) && !happens_before(m2, m1)
}

/// Per-address positive weights and a positive threshold. Addresses
/// without an entry weigh as much as the threshold.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightMap {
    weights: BTreeMap<Address, Ratio<i64>>,
    threshold: Ratio<i64>,
}

impl WeightMap {
    pub fn new(weights: BTreeMap<Address, Ratio<i64>>, threshold: Ratio<i64>) -> Result<Self> {
        if threshold <= Ratio::zero() {
            return Err(VlsmError::InvalidArgument(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        if let Some((a, w)) = weights.iter().find(|(_, w)| **w <= Ratio::zero()) {
            return Err(VlsmError::InvalidArgument(format!(
                "weight of {a} must be positive, got {w}"
            )));
        }
        Ok(WeightMap { weights, threshold })
    }

    /// Weight 1 for each of `1..=n`.
    pub fn unit(n: usize, threshold: Ratio<i64>) -> Result<Self> {
        WeightMap::new(
            (1..=n).map(|a| (a, Ratio::from_integer(1))).collect(),
            threshold,
        )
    }

    pub fn threshold(&self) -> Ratio<i64> {
        self.threshold
    }

    pub fn weights(&self) -> &BTreeMap<Address, Ratio<i64>> {
        &self.weights
    }

    pub fn weight(&self, a: Address) -> Ratio<i64> {
        self.weights.get(&a).copied().unwrap_or(self.threshold)
    }

    pub fn total<'a>(&self, addrs: impl IntoIterator<Item = &'a Address>) -> Ratio<i64> {
        addrs.into_iter().map(|a| self.weight(*a)).sum()
    }

    /// `Σ weight < t`.
    pub fn below(&self, addrs: &BTreeSet<Address>) -> bool {
        self.total(addrs) < self.threshold
    }
}

/// `ψ_msg_valid` for addresses `1..=n`.
pub fn psi_msg_valid(m: &UmoState, n: usize) -> bool {
    (1..=n).contains(&m.addr)
        && m.obs.iter().enumerate().all(|(k, o)| match o.kind {
            UmoLabel::Send => o.msg.addr == m.addr && o.msg.obs[..] == m.obs[..k],
            UmoLabel::Receive => psi_msg_valid(&o.msg, n),
        })
}

/// `ψ_full_node(s, m)`: every dependency of `m` is observed in `s`.
pub fn psi_full_node(s: &UmoState, m: &UmoState) -> bool {
    let have = s.messages();
    m.obs.iter().all(|o| have.contains(&o.msg))
}

/// `ψ_no_self_equiv(s, m)` for the component of address `i`.
pub fn psi_no_self_equiv(s: &UmoState, m: &UmoState, i: Address) -> bool {
    !(m.addr == i && s.addr == i) || s.has_sent(m)
}

/// `ψ_msg_valid_full` for addresses `1..=n`. Each nested receive is checked
/// for self-equivocation against the address of the state that made it.
pub fn psi_msg_valid_full(m: &UmoState, n: usize) -> bool {
    (1..=n).contains(&m.addr)
        && m.obs.iter().enumerate().all(|(k, o)| {
            let before = m.prefix(k);
            match o.kind {
                UmoLabel::Send => o.msg.addr == m.addr && o.msg.obs[..] == m.obs[..k],
                UmoLabel::Receive => {
                    psi_full_node(&before, &o.msg) && psi_no_self_equiv(&before, &o.msg, m.addr)
                }
            }
        })
}

/// Addresses with an incomparable pair among the messages received by `s`,
/// accumulated receive by receive.
pub fn local_equivocators_full(s: &UmoState) -> BTreeSet<Address> {
    let mut found = BTreeSet::new();
    for (k, o) in s.obs.iter().enumerate() {
        if o.kind == UmoLabel::Receive
            && s.obs[..k]
                .iter()
                .any(|p| p.kind == UmoLabel::Receive && incomparable(&o.msg, &p.msg))
        {
            found.insert(o.msg.addr);
        }
    }
    found
}

/// `ψ_equiv(s)`.
pub fn psi_equiv(s: &UmoState, weights: &WeightMap) -> bool {
    weights.below(&local_equivocators_full(s))
}

/// Senders of messages received by some part of `σ` but sent by none.
pub fn global_equivocators_full(sigma: &CompositeState<UmoState>) -> BTreeSet<Address> {
    sigma
        .parts()
        .iter()
        .flat_map(|s| s.received_messages())
        .filter(|m| !sigma.parts().iter().any(|p| p.has_sent(m)))
        .map(|m| m.addr)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Validation {
    Umo,
    Mo { n: usize },
    Elmo { n: usize, weights: Arc<WeightMap> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UmoComponent {
    pub addr: Address,
    pub validation: Validation,
}

pub fn umo_component(addr: Address) -> UmoComponent {
    UmoComponent {
        addr,
        validation: Validation::Umo,
    }
}

pub fn mo_component(addr: Address, n: usize) -> UmoComponent {
    UmoComponent {
        addr,
        validation: Validation::Mo { n },
    }
}

pub fn elmo_component(addr: Address, n: usize, weights: Arc<WeightMap>) -> UmoComponent {
    UmoComponent {
        addr,
        validation: Validation::Elmo { n, weights },
    }
}

impl UmoComponent {
    /// `ψ_ELMO(s, m)` if this is an ELMO component, else the receive part
    /// of its constraint.
    pub fn accepts_receive(&self, s: &UmoState, m: &UmoState) -> bool {
        match &self.validation {
            Validation::Umo => true,
            Validation::Mo { n } => psi_msg_valid(m, *n),
            Validation::Elmo { n, weights } => {
                psi_full_node(s, m)
                    && psi_msg_valid_full(m, *n)
                    && psi_no_self_equiv(s, m, self.addr)
                    && psi_equiv(&s.received(m.clone()), weights)
            }
        }
    }

    /// The unique constrained trace encoded in `s`, replaying its
    /// observations in order.
    pub fn extract_trace(&self, s: &UmoState) -> Result<Trace<UmoLabel, UmoState, UmoState>> {
        let fail = |index: usize, reason: String| VlsmError::Extraction { index, reason };
        if s.addr != self.addr {
            return Err(fail(
                0,
                format!("address {} is not the component's {}", s.addr, self.addr),
            ));
        }
        let mut trace = Trace::empty(UmoState::initial(self.addr));
        for (k, o) in s.obs.iter().enumerate() {
            let pre = trace.last_state().clone();
            let (label, input) = match o.kind {
                UmoLabel::Send => {
                    if *o.msg != pre {
                        return Err(fail(
                            k + 1,
                            format!("sent {} but the state was {pre}", o.msg),
                        ));
                    }
                    (UmoLabel::Send, None)
                }
                UmoLabel::Receive => (UmoLabel::Receive, Some((*o.msg).clone())),
            };
            if !self.constraint(&label, &pre, input.as_ref()) {
                return Err(fail(
                    k + 1,
                    format!("{label} of {} is not constrained", o.msg),
                ));
            }
            trace.push(self, label, input);
        }
        Ok(trace)
    }
}

impl Vlsm for UmoComponent {
    type Label = UmoLabel;
    type State = UmoState;
    type Message = UmoState;

    fn initial_states(&self) -> Vec<UmoState> {
        vec![UmoState::initial(self.addr)]
    }

    fn is_initial_state(&self, s: &UmoState) -> bool {
        s.addr == self.addr && s.obs.is_empty()
    }

    fn labels(&self, _s: &UmoState) -> Vec<UmoLabel> {
        vec![UmoLabel::Send, UmoLabel::Receive]
    }

    fn transition(
        &self,
        label: &UmoLabel,
        s: &UmoState,
        m: Option<&UmoState>,
    ) -> (UmoState, Option<UmoState>) {
        match (label, m) {
            (UmoLabel::Send, Some(m)) => (s.clone(), Some(m.clone())),
            (UmoLabel::Send, None) => (s.sent(s.clone()), Some(s.clone())),
            (UmoLabel::Receive, None) => (s.clone(), None),
            (UmoLabel::Receive, Some(m)) => (s.received(m.clone()), None),
        }
    }

    fn constraint(&self, label: &UmoLabel, s: &UmoState, m: Option<&UmoState>) -> bool {
        match (label, m) {
            (UmoLabel::Send, None) => true,
            (UmoLabel::Receive, Some(m)) => self.accepts_receive(s, m),
            _ => false,
        }
    }
}

impl MessageOracle for UmoComponent {
    fn sender(&self, m: &UmoState) -> Option<Address> {
        Some(m.addr)
    }

    fn dependencies(&self, m: &UmoState) -> Vec<UmoState> {
        m.messages().into_iter().collect()
    }
}

impl SentOracle for UmoComponent {
    fn sent_messages(&self, s: &UmoState) -> Vec<UmoState> {
        s.sent_messages().into_iter().collect()
    }

    fn received_messages(&self, s: &UmoState) -> Vec<UmoState> {
        s.received_messages().into_iter().collect()
    }

    fn has_been_sent(&self, s: &UmoState, m: &UmoState) -> bool {
        s.has_sent(m)
    }

    fn has_been_received(&self, s: &UmoState, m: &UmoState) -> bool {
        s.has_received(m)
    }
}

impl Traceable for UmoComponent {
    fn state_trace(&self, s: &UmoState) -> Result<Trace<UmoLabel, UmoState, UmoState>> {
        self.extract_trace(s)
    }
}

impl Emitter for UmoComponent {
    fn emissions(&self, m: &UmoState) -> Vec<Trace<UmoLabel, UmoState, UmoState>> {
        match self.extract_trace(m) {
            Ok(mut t) if m.addr == self.addr => {
                t.push(self, UmoLabel::Send, None);
                vec![t]
            }
            _ => Vec::new(),
        }
    }
}

/// Free composition of the UMO components `1..=n`.
pub fn umo_protocol(n: usize) -> Result<Composition<UmoComponent>> {
    free_compose((1..=n).map(umo_component).collect())
}

/// Free composition of the MO components `1..=n`.
pub fn mo_protocol(n: usize) -> Result<Composition<UmoComponent>> {
    free_compose((1..=n).map(|i| mo_component(i, n)).collect())
}

/// The ELMO components `1..=n` under `φ_ELMO`: a receive is allowed only if
/// the post-state's global equivocators weigh less than the threshold.
pub fn elmo_protocol(n: usize, weights: WeightMap) -> Result<Composition<UmoComponent>> {
    let weights = Arc::new(weights);
    let comp = free_compose(
        (1..=n)
            .map(|i| elmo_component(i, n, weights.clone()))
            .collect(),
    )?;
    Ok(comp.constrain(move |l, sigma, m| phi_elmo(&weights, l, sigma, m)))
}

pub fn phi_elmo(
    weights: &WeightMap,
    l: &CompositeLabel<UmoLabel>,
    sigma: &CompositeState<UmoState>,
    m: Option<&UmoState>,
) -> bool {
    match (l.inner, m) {
        (UmoLabel::Receive, Some(m)) => {
            let post = sigma.with_part(l.index, sigma.part(l.index).received(m.clone()));
            weights.below(&global_equivocators_full(&post))
        }
        _ => true,
    }
}

/// The UMO ring restriction: component `i` only receives from `(i mod 3) + 1`.
pub fn ring_constraint(
    l: &CompositeLabel<UmoLabel>,
    _sigma: &CompositeState<UmoState>,
    m: Option<&UmoState>,
) -> bool {
    match (l.inner, m) {
        (UmoLabel::Receive, Some(m)) => m.addr == (l.index % 3) + 1,
        _ => true,
    }
}

/// A constrained trace of the protocol reaching `σ`, interleaving the
/// per-component extractions. A pending receive is scheduled once its
/// message has been output earlier in the trace, or straight away if no
/// part of `σ` ever sends it; parts are visited round-robin.
pub fn extract_composite_trace(
    protocol: &Composition<UmoComponent>,
    sigma: &CompositeState<UmoState>,
) -> Result<CompositeTrace<UmoComponent>> {
    if sigma.arity() != protocol.len() {
        return Err(VlsmError::Extraction {
            index: 0,
            reason: format!(
                "state has {} parts, protocol {}",
                sigma.arity(),
                protocol.len()
            ),
        });
    }
    let pending: Vec<Trace<UmoLabel, UmoState, UmoState>> = protocol
        .components()
        .iter()
        .zip(sigma.parts())
        .map(|(c, s)| c.extract_trace(s))
        .collect::<Result<_>>()?;
    let eventually_sent: BTreeSet<&UmoState> = pending.iter().flat_map(|t| t.outputs()).collect();
    let mut next = vec![0usize; pending.len()];
    let mut emitted: BTreeSet<UmoState> = BTreeSet::new();
    let start = CompositeState(
        protocol
            .components()
            .iter()
            .map(|c| UmoState::initial(c.addr))
            .collect(),
    );
    let mut trace = Trace::empty(start);
    let total: usize = pending.iter().map(|t| t.len()).sum();
    while trace.len() < total {
        let mut progressed = false;
        for j in 0..pending.len() {
            while let Some(step) = pending[j].steps.get(next[j]) {
                let ready = match &step.input {
                    None => true,
                    Some(m) => emitted.contains(m) || !eventually_sent.contains(m),
                };
                if !ready {
                    break;
                }
                let rec = trace.push(
                    protocol,
                    CompositeLabel::new(j + 1, step.label),
                    step.input.clone(),
                );
                if let Some(out) = &rec.output {
                    emitted.insert(out.clone());
                }
                next[j] += 1;
                progressed = true;
            }
        }
        if !progressed {
            return Err(VlsmError::Extraction {
                index: trace.len() + 1,
                reason: "no pending step can be scheduled".into(),
            });
        }
    }
    if let TraceVerdict::FailAt { step, reason } = check_trace_with(protocol, &trace, None) {
        return Err(VlsmError::Extraction {
            index: step,
            reason,
        });
    }
    Ok(trace)
}

/// Every state of addresses `addrs` built in `rounds` rounds of appending
/// one observation of an earlier-built state, whether or not any component
/// could reach it. Used as a syntactic message universe.
pub fn syntactic_universe(addrs: &[Address], rounds: usize) -> Vec<UmoState> {
    let mut all: BTreeSet<UmoState> = addrs.iter().map(|&a| UmoState::initial(a)).collect();
    for _ in 0..rounds {
        let prev: Vec<UmoState> = all.iter().cloned().collect();
        for s in &prev {
            for m in &prev {
                all.insert(s.sent(m.clone()));
                all.insert(s.received(m.clone()));
            }
        }
    }
    all.into_iter().collect()
}
