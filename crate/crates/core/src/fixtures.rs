//! Small named scenarios used by the tests and the command-line tool.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_rational::Ratio;

use crate::compose::{CompositeLabel, CompositeState, CompositeTrace, Composition, ConstraintOf};
use crate::error::Result;
use crate::models::{
    message_equiv_fixed_with, message_equiv_limited, AnnotatedModel, AnnotatedState,
    EquivocatorLabel, EquivocatorState, ReceiverRule, StateModel, StateModelTrace,
};
use crate::table::Table;
use crate::umo::{mo_component, UmoComponent, UmoLabel, UmoState, WeightMap};
use crate::vlsm::{Address, Trace, TraceOf};

fn senders(pairs: &[(&str, Address)]) -> Arc<BTreeMap<String, Address>> {
    Arc::new(pairs.iter().map(|(m, a)| (m.to_string(), *a)).collect())
}

/// Three parts: 1 sends `a` or `b` but not both, 2 answers `a` with `c`
/// and `b` with `d`, and 3 collects answers. Only 2 equivocates.
pub fn answers_components() -> Vec<Table> {
    let who = senders(&[("a", 1), ("b", 1), ("c", 2), ("d", 2)]);
    vec![
        Table::new(&["s0"])
            .row("s0", "send_a", None, "sa", Some("a"))
            .row("s0", "send_b", None, "sb", Some("b"))
            .with_senders(who.clone()),
        Table::new(&["q0"])
            .row("q0", "receive", Some("a"), "qa", None)
            .row("q0", "receive", Some("b"), "qb", None)
            .row("qa", "send", None, "qc", Some("c"))
            .row("qb", "send", None, "qd", Some("d"))
            .with_senders(who.clone()),
        Table::new(&["r0"])
            .row("r0", "receive", Some("c"), "rc", None)
            .row("r0", "receive", Some("d"), "rd", None)
            .row("rc", "receive", Some("d"), "rcd", None)
            .row("rd", "receive", Some("c"), "rcd", None)
            .with_senders(who),
    ]
}

pub fn answers_equivocators() -> BTreeSet<Address> {
    [2].into_iter().collect()
}

pub fn answers_message_model() -> Result<Composition<Table>> {
    message_equiv_fixed_with(
        answers_components(),
        &answers_equivocators(),
        ReceiverRule::Any,
    )
}

/// Part 3 receives both answers although 1 only sent `a`.
pub fn answers_message_trace(model: &Composition<Table>) -> CompositeTrace<Table> {
    let step =
        |j, l: &str, m: Option<&str>| (CompositeLabel::new(j, l.to_string()), m.map(str::to_owned));
    Trace::replay(
        model,
        model.initial_state(),
        [
            step(1, "send_a", None),
            step(2, "receive", Some("a")),
            step(2, "send", None),
            step(3, "receive", Some("c")),
            step(3, "receive", Some("d")),
        ],
    )
}

/// Two parts where the composition constraint keeps `(s1, q1)` out of reach
/// and only that state emits `m`. Part 1 equivocates.
pub fn joint_components() -> Vec<Table> {
    let who = senders(&[("m", 1)]);
    vec![
        Table::new(&["s0"])
            .row("s0", "l0", None, "s1", None)
            .row("s1", "l2", None, "s1", Some("m"))
            .with_senders(who.clone()),
        Table::new(&["q0"])
            .row("q0", "l1", None, "q1", None)
            .with_senders(who),
    ]
}

pub fn joint_constraint() -> ConstraintOf<Table> {
    Arc::new(|l, sigma, _| {
        let at = |s: &str, q: &str| sigma.part(1) == s && sigma.part(2) == q;
        match (l.index, l.inner.as_str()) {
            (1, "l0") | (2, "l1") => at("s0", "q0"),
            (1, "l2") => at("s1", "q1"),
            _ => false,
        }
    })
}

/// The state-model run that emits `m`: fork a fresh copy after moving the
/// first one, let part 2 move against the fresh copy, then emit.
pub fn joint_state_trace(model: &StateModel<Table>) -> StateModelTrace<Table> {
    let eq = |copy, l: &str| EquivocatorLabel::inner(copy, l.to_string());
    Trace::replay(
        model,
        model.initial_state(),
        [
            (CompositeLabel::new(1, eq(1, "l0")), None),
            (
                CompositeLabel::new(1, EquivocatorLabel::new_machine(1, "s0".to_string())),
                None,
            ),
            (
                CompositeLabel::new(2, EquivocatorLabel::inner(1, "l1".to_string())),
                None,
            ),
            (CompositeLabel::new(1, eq(1, "l2")), None),
        ],
    )
}

/// Two MO parts and the two orders of "1 sends, 2 receives it". The base
/// states agree at the end while the annotations differ.
pub fn order_ambiguity() -> Result<(
    AnnotatedModel<UmoComponent>,
    TraceOf<AnnotatedModel<UmoComponent>>,
    TraceOf<AnnotatedModel<UmoComponent>>,
)> {
    let weights = Arc::new(WeightMap::unit(2, Ratio::from_integer(2))?);
    let model = message_equiv_limited(vec![mo_component(1, 2), mo_component(2, 2)], weights)?;
    let start = AnnotatedState {
        base: CompositeState(vec![UmoState::initial(1), UmoState::initial(2)]),
        eqv: BTreeSet::new(),
    };
    let m1 = UmoState::initial(1);
    let send = (CompositeLabel::new(1, UmoLabel::Send), None);
    let receive = (CompositeLabel::new(2, UmoLabel::Receive), Some(m1));
    let sent_first = Trace::replay(&model, start.clone(), [send.clone(), receive.clone()]);
    let received_first = Trace::replay(&model, start, [receive, send]);
    Ok((model, sent_first, received_first))
}

/// Part 1 has received `⟨[],2⟩` which part 2 has not sent, and the state
/// after part 2 sends it.
pub fn unsent_receipt() -> (CompositeState<UmoState>, CompositeState<UmoState>) {
    let m2 = UmoState::initial(2);
    let before = CompositeState(vec![
        UmoState::initial(1).received(m2.clone()),
        UmoState::initial(2),
    ]);
    let after = before.with_part(2, UmoState::initial(2).sent(m2));
    (before, after)
}

/// The five-step run of two MO parts where 2 forks a fresh copy that
/// receives 1's message and answers it.
pub fn forked_mo_trace(model: &StateModel<UmoComponent>) -> StateModelTrace<UmoComponent> {
    let m1 = UmoState::initial(1);
    let on = |j, copy, l| CompositeLabel::new(j, EquivocatorLabel::inner(copy, l));
    Trace::replay(
        model,
        model.initial_state(),
        [
            (on(1, 1, UmoLabel::Send), None),
            (on(2, 1, UmoLabel::Send), None),
            (
                CompositeLabel::new(2, EquivocatorLabel::new_machine(1, UmoState::initial(2))),
                None,
            ),
            (on(2, 2, UmoLabel::Receive), Some(m1)),
            (on(2, 2, UmoLabel::Send), None),
        ],
    )
}

/// `[s]` for each part.
pub fn singletons<S: Clone>(sigma: &CompositeState<S>) -> CompositeState<EquivocatorState<S>> {
    CompositeState(
        sigma
            .parts()
            .iter()
            .cloned()
            .map(EquivocatorState::singleton)
            .collect(),
    )
}
