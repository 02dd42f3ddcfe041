//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria in `KNOWN_FAILURES` are expected to fail under the bounded
//! checks (MO parts are not full nodes). Their counterexample is printed
//! together with the ELMO run of the same check. The process fails when any
//! outcome differs from its expectation.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use num_rational::Ratio;

use vlsmkit::byzantine::{self, ByzantineVerdict, Window};
use vlsmkit::compose::{is_validator, CompositeState, Composition, ValidatorVerdict};
use vlsmkit::countdown::{countdown, CountdownState};
use vlsmkit::equivocation::{global_equivocators, local_equivocators, minimal_equivocation_trace};
use vlsmkit::explore::{
    check_trace, check_trace_with, enumerate_traces, reach, reach_constrained, valid_traces,
    TraceMode, TraceVerdict,
};
use vlsmkit::fixtures;
use vlsmkit::models::{
    self, forked, lift_trace, message_equiv_fixed, message_equiv_fixed_with, state_equiv_fixed,
    state_equiv_limited, trace_reduct, Discrepancy, EquivalenceVerdict, ReceiverRule,
};
use vlsmkit::umo::{
    elmo_component, elmo_protocol, extract_composite_trace, local_equivocators_full, mo_component,
    mo_protocol, syntactic_universe, umo_component, umo_protocol, UmoComponent, UmoLabel, UmoState,
    WeightMap,
};
use vlsmkit::{Address, Bound, VlsmError};

/// Criteria whose bounded check is expected to fail; see the module docs.
const KNOWN_FAILURES: &[usize] = &[8, 10, 11];

// Bounds, pinned.
const COUNTDOWN_MAX_N: i64 = 6;
const COUNTDOWN_DEPTH: usize = 5;
const EXTRACTION_DEPTH: usize = 4;
const COMPOSITE_DEPTH: usize = 3;
const VALIDATOR_DEPTH: usize = 3;
const EQUIVOCATION_DEPTH: usize = 4;
const EQUIVALENCE_DEPTH: usize = 4;
const BRIDGE_DEPTH: usize = 3;
const BYZANTINE_DEPTH: usize = 3;
const WINDOW_DEPTH: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Result<Outcome, VlsmError>;

fn set<T: Ord>(xs: impl IntoIterator<Item = T>) -> BTreeSet<T> {
    xs.into_iter().collect()
}

fn init(a: Address) -> UmoState {
    UmoState::initial(a)
}

fn unit(n: usize, t: i64) -> WeightMap {
    WeightMap::unit(n, Ratio::from_integer(t)).unwrap()
}

fn inputs(universe: &[UmoState]) -> Vec<Option<UmoState>> {
    std::iter::once(None)
        .chain(universe.iter().cloned().map(Some))
        .collect()
}

/// Inputs offered to constrained exploration: the initial messages of
/// `1..=n` and one round of observations on them.
fn universe(n: usize) -> Vec<UmoState> {
    syntactic_universe(&(1..=n).collect::<Vec<_>>(), 1)
}

fn criterion_1() -> Result<Outcome, VlsmError> {
    let c = countdown();
    let max = COUNTDOWN_MAX_N;
    let offered: Vec<i64> = (1..=max).collect();
    let bound = Bound::depth(COUNTDOWN_DEPTH);
    let pair = |s: &CountdownState| (s.n, s.i);

    let valid = reach(&c, bound)?;
    let constrained = reach_constrained(&c, bound, &offered)?;
    let lib_valid = (
        set(valid.states().iter().map(pair)),
        set(valid.proper_messages().iter().copied()),
    );
    let lib_constrained = (
        set(constrained.states().iter().map(pair)),
        set(constrained.proper_messages().iter().copied()),
    );
    let oracle_valid = common::countdown_layers(max, COUNTDOWN_DEPTH, &[]);
    let oracle_constrained = common::countdown_layers(max, COUNTDOWN_DEPTH, &offered);

    let all_pairs = set((0..=max).flat_map(|n| (0..=n).map(move |i| (n, i))));
    let parity_pairs = set(all_pairs.iter().copied().filter(|(n, i)| (n - i) % 2 == 0));
    let evens = set((1..=max).map(|j| 2 * j));
    let powers = set((1..).map(|k| 1i64 << k).take_while(|&p| p / 2 <= max));

    let mut detail = String::new();
    let mut pass = true;
    let mut expect = |what: &str, got: &BTreeSet<_>, want: &BTreeSet<_>| {
        if got != want {
            pass = false;
            let _ = write!(detail, "{what}: got {got:?}, want {want:?}; ");
        }
    };
    expect("constrained states", &lib_constrained.0, &all_pairs);
    expect(
        "constrained states (oracle)",
        &oracle_constrained.0,
        &all_pairs,
    );
    expect("valid states", &lib_valid.0, &parity_pairs);
    expect("valid states (oracle)", &oracle_valid.0, &parity_pairs);
    let mut expect_m = |what: &str, got: &BTreeSet<i64>, want: &BTreeSet<i64>| {
        if got != want {
            pass = false;
            let _ = write!(detail, "{what}: got {got:?}, want {want:?}; ");
        }
    };
    expect_m("constrained messages", &lib_constrained.1, &evens);
    expect_m(
        "constrained messages (oracle)",
        &oracle_constrained.1,
        &evens,
    );
    expect_m("valid messages", &lib_valid.1, &powers);
    expect_m("valid messages (oracle)", &oracle_valid.1, &powers);
    if pass {
        detail = format!(
            "{} constrained / {} valid states, constrained messages {:?}, valid messages {:?}",
            all_pairs.len(),
            parity_pairs.len(),
            evens,
            powers
        );
    }
    Ok(Outcome::new(pass, detail))
}

fn criterion_2() -> Result<Outcome, VlsmError> {
    let offered = inputs(&universe(2));
    let mut states = 0;
    for (name, u) in [
        ("UMO 1", umo_component(1)),
        ("UMO 2", umo_component(2)),
        ("MO 1", mo_component(1, 2)),
        ("MO 2", mo_component(2, 2)),
    ] {
        let oracle = common::all_traces(&u, EXTRACTION_DEPTH, &offered);
        let lib = enumerate_traces(&u, Bound::depth(EXTRACTION_DEPTH), &offered)?;
        if set(lib) != set(oracle.iter().cloned()) {
            return Ok(Outcome::new(
                false,
                format!("{name}: enumerator and oracle disagree"),
            ));
        }
        let by_state = common::by_last_state::<UmoComponent>(oracle);
        for (s, traces) in &by_state {
            if traces.len() != 1 {
                return Ok(Outcome::new(
                    false,
                    format!("{name}: {} traces reach {s}", traces.len()),
                ));
            }
            if u.extract_trace(s)? != traces[0] {
                return Ok(Outcome::new(
                    false,
                    format!("{name}: extraction differs at {s}"),
                ));
            }
        }
        states += by_state.len();
    }
    Ok(Outcome::new(
        true,
        format!("{states} states, each with exactly one trace"),
    ))
}

fn criterion_3() -> Result<Outcome, VlsmError> {
    let mut checked = 0;
    for n in 1..=3 {
        for (name, p) in [("UMO", umo_protocol(n)?), ("MO", mo_protocol(n)?)] {
            let bound = Bound::depth(COMPOSITE_DEPTH);
            for sigma in reach_constrained(&p, bound, &universe(n))?.states() {
                let t = extract_composite_trace(&p, sigma)?;
                let ok = t.last_state() == sigma
                    && check_trace(&p, &t, TraceMode::Constrained, bound)?.is_ok();
                if !ok {
                    return Ok(Outcome::new(
                        false,
                        format!("{name} n={n}: extraction of {sigma:?} fails"),
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(Outcome::new(
        true,
        format!("{checked} composite states extracted and checked"),
    ))
}

fn criterion_4() -> Result<Outcome, VlsmError> {
    let bound = Bound::depth(VALIDATOR_DEPTH);
    let mut detail = String::new();
    let cases: Vec<(String, Composition<UmoComponent>, usize)> = vec![
        ("MO n=2".into(), mo_protocol(2)?, 2),
        ("MO n=3".into(), mo_protocol(3)?, 3),
        ("ELMO n=2 t=2".into(), elmo_protocol(2, unit(2, 2))?, 2),
    ];
    for (name, p, n) in &cases {
        for j in 1..=*n {
            match is_validator(p, j, bound, &universe(*n))? {
                ValidatorVerdict::Confirmed { lifts, .. } => {
                    let _ = write!(detail, "{name} part {j}: {} lifts; ", lifts.len());
                }
                ValidatorVerdict::Counterexample {
                    state,
                    label,
                    input,
                } => {
                    return Ok(Outcome::new(
                        false,
                        format!("{name} part {j}: counterexample {state} {label} {input:?}"),
                    ));
                }
            }
        }
    }
    let junk = init(2).sent(init(2)).sent(init(3));
    let umo = umo_protocol(3)?;
    let mut wide = universe(3);
    wide.push(junk.clone());
    let wide_found = !is_validator(&umo, 1, bound, &wide)?.is_confirmed();
    let exact = match is_validator(&umo, 1, bound, std::slice::from_ref(&junk))? {
        ValidatorVerdict::Counterexample {
            state,
            label,
            input,
        } => state == init(1) && label == UmoLabel::Receive && input.as_ref() == Some(&junk),
        ValidatorVerdict::Confirmed { .. } => false,
    };
    let _ = write!(
        detail,
        "UMO part 1: counterexample receive {junk} at {}",
        init(1)
    );
    Ok(Outcome::new(wide_found && exact, detail))
}

/// Constrained states of the fixed-set message model of two MO parts with
/// `E = {2}`.
fn fixed_mo_states() -> Result<(Composition<UmoComponent>, Vec<CompositeState<UmoState>>), VlsmError>
{
    let mm = message_equiv_fixed(vec![mo_component(1, 2), mo_component(2, 2)], &set([2]))?;
    let states = reach_constrained(&mm, Bound::depth(EQUIVOCATION_DEPTH), &universe(2))?
        .states()
        .to_vec();
    Ok((mm, states))
}

fn criterion_5() -> Result<Outcome, VlsmError> {
    let (mm, states) = fixed_mo_states()?;
    let mut with_local = 0;
    for sigma in &states {
        let global = global_equivocators(&mm, sigma)?.equivocators;
        for j in 1..=2 {
            let local = local_equivocators(mm.component(j), sigma.part(j))?.equivocators;
            if !local.is_subset(&global) {
                return Ok(Outcome::new(
                    false,
                    format!("part {j} of {sigma:?}: local {local:?} ⊄ global {global:?}"),
                ));
            }
            with_local += usize::from(!local.is_empty());
        }
    }
    let (before, after) = fixtures::unsent_receipt();
    let p = mo_protocol(2)?;
    let g_before = global_equivocators(&p, &before)?.equivocators;
    let g_after = global_equivocators(&p, &after)?.equivocators;
    let persists = g_before == set([2]) && g_after.is_empty();
    Ok(Outcome::new(
        persists,
        format!(
            "{} states, {with_local} parts with local evidence, no violation; fixture global {g_before:?} then {g_after:?}",
            states.len()
        ),
    ))
}

fn criterion_6() -> Result<Outcome, VlsmError> {
    let (mm, states) = fixed_mo_states()?;
    for sigma in &states {
        let t = minimal_equivocation_trace(&mm, sigma)?;
        let last = global_equivocators(&mm, sigma)?.equivocators;
        if t.last_state() != sigma || !check_trace_with(&mm, &t, None).is_ok() {
            return Ok(Outcome::new(false, format!("bad trace for {sigma:?}")));
        }
        let mut prev = BTreeSet::new();
        for s in t.states() {
            let g = global_equivocators(&mm, s)?.equivocators;
            if !prev.is_subset(&g) || !g.is_subset(&last) {
                return Ok(Outcome::new(
                    false,
                    format!("{sigma:?}: prefix sets {prev:?} then {g:?}, final {last:?}"),
                ));
            }
            prev = g;
        }
    }
    Ok(Outcome::new(
        true,
        format!("{} states, all prefixes monotone and bounded", states.len()),
    ))
}

fn criterion_7() -> Result<Outcome, VlsmError> {
    let w = Arc::new(unit(2, 2));
    let mut states = BTreeSet::new();
    for j in 1..=2 {
        let e = elmo_component(j, 2, w.clone());
        for s in reach_constrained(&e, Bound::depth(EQUIVOCATION_DEPTH), &universe(2))?.states() {
            states.insert((j, s.clone()));
        }
    }
    let p = elmo_protocol(2, unit(2, 2))?;
    for sigma in reach_constrained(&p, Bound::depth(EQUIVOCATION_DEPTH), &universe(2))?.states() {
        for j in 1..=2 {
            states.insert((j, sigma.part(j).clone()));
        }
    }
    let mut nonempty = 0;
    for (j, s) in &states {
        let direct = local_equivocators(&elmo_component(*j, 2, w.clone()), s)?.equivocators;
        let full = local_equivocators_full(s);
        if direct != full {
            return Ok(Outcome::new(false, format!("{s}: {direct:?} vs {full:?}")));
        }
        nonempty += usize::from(!full.is_empty());
    }
    Ok(Outcome::new(
        true,
        format!(
            "{} states agree, {nonempty} with equivocators",
            states.len()
        ),
    ))
}

/// Reducts of valid state-model traces against valid message-model
/// traces, as sets. A lift is usually longer than the trace it lifts, so
/// the inclusion of the message-model set is shown trace by trace with
/// `lift_trace`, whose result is checked to reduce back to its input.
fn fixed_sets(
    components: Vec<UmoComponent>,
    e: &BTreeSet<Address>,
) -> Result<(bool, String), VlsmError> {
    let bound = Bound::depth(EQUIVALENCE_DEPTH);
    let sm = state_equiv_fixed(components.clone(), e)?;
    let mm = message_equiv_fixed_with(components, e, ReceiverRule::Any)?;
    let reducts = set(valid_traces(&sm, bound)?
        .iter()
        .map(trace_reduct::<UmoComponent>));
    let valid = set(valid_traces(&mm, bound)?);
    let not_valid = reducts.difference(&valid).count();
    let mut lifted = 0;
    let mut first_failure = None;
    for t in &valid {
        match lift_trace(&sm, t) {
            Ok(_) => lifted += 1,
            Err(err) if first_failure.is_none() => first_failure = Some((t, err)),
            Err(_) => {}
        }
    }
    let mut detail = format!(
        "{} distinct reducts ({not_valid} not valid), {} valid message traces ({lifted} lift)",
        reducts.len(),
        valid.len()
    );
    if let Some((t, err)) = &first_failure {
        let _ = write!(detail, "; first without a lift ({err}): {}", skeleton(t));
    }
    Ok((not_valid == 0 && first_failure.is_none(), detail))
}

fn skeleton<S, M: std::fmt::Display>(
    t: &vlsmkit::Trace<vlsmkit::compose::CompositeLabel<UmoLabel>, S, M>,
) -> String {
    t.steps
        .iter()
        .map(|r| match &r.input {
            Some(m) => format!("{}:{} {m}", r.label.index, r.label.inner),
            None => format!("{}:{}", r.label.index, r.label.inner),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn mo2() -> Vec<UmoComponent> {
    vec![mo_component(1, 2), mo_component(2, 2)]
}

fn elmo2(t: i64) -> Vec<UmoComponent> {
    let w = Arc::new(unit(2, t));
    vec![elmo_component(1, 2, w.clone()), elmo_component(2, 2, w)]
}

fn criterion_8() -> Result<Outcome, VlsmError> {
    let e = set([2]);
    let bound = Bound::depth(EQUIVALENCE_DEPTH);
    let (pass, detail) = match models::fixed_equivalence_check(mo2(), &e, ReceiverRule::Any, bound)?
    {
        EquivalenceVerdict::Confirmed { reducts, lifts, .. } => (
            true,
            format!("confirmed ({reducts} reducts, {lifts} lifts)"),
        ),
        EquivalenceVerdict::Refuted(Discrepancy::Reduct { trace, verdict }) => (
            false,
            format!("reduct rejected ({verdict:?}) for {} steps", trace.len()),
        ),
        EquivalenceVerdict::Refuted(Discrepancy::Lift { trace, error }) => {
            (false, format!("no lift ({error}): {}", skeleton(&trace)))
        }
    };
    let (elmo_pass, elmo_detail) = fixed_sets(elmo2(2), &e)?;
    let elmo = if elmo_pass { "equal" } else { "differ" };
    Ok(Outcome::new(
        pass,
        format!("MO: {detail} | ELMO t=2, sets {elmo}: {elmo_detail}"),
    ))
}

fn criterion_9() -> Result<Outcome, VlsmError> {
    let mm = fixtures::answers_message_model()?;
    let t = fixtures::answers_message_trace(&mm);
    let valid = check_trace(&mm, &t, TraceMode::Valid, Bound::depth(t.len()))?.is_ok();
    let sm = state_equiv_fixed(
        fixtures::answers_components(),
        &fixtures::answers_equivocators(),
    )?;
    let no_lift = match lift_trace(&sm, &t) {
        Err(VlsmError::CannotLift { step, reason }) => Some(format!("step {step}: {reason}")),
        _ => None,
    };

    let e = set([1]);
    let joint_sm = state_equiv_fixed(fixtures::joint_components(), &e)?.constrain_arc(
        models::lift_constraint::<vlsmkit::table::Table>(fixtures::joint_constraint()),
    );
    let run = fixtures::joint_state_trace(&joint_sm);
    let m = "m".to_string();
    let emitted = check_trace_with(&joint_sm, &run, None).is_ok() && run.outputs().any(|o| *o == m);
    let joint_mm = message_equiv_fixed(fixtures::joint_components(), &e)?
        .constrain_arc(fixtures::joint_constraint());
    let r = reach(&joint_mm, Bound::depth(8))?;
    let unreachable = r.fixpoint && !r.contains_message(Some(&m));

    let pass = valid && no_lift.is_some() && emitted && unreachable;
    Ok(Outcome::new(
        pass,
        format!(
            "c/d trace valid: {valid}, lift: {}; m emitted by the state model: {emitted}, \
             m absent from the message-model fixpoint (depth {}): {unreachable}",
            no_lift.unwrap_or_else(|| "succeeded".into()),
            r.depth
        ),
    ))
}

fn limited_verdict(components: Vec<UmoComponent>) -> Result<(bool, String), VlsmError> {
    let w = Arc::new(unit(2, 2));
    Ok(
        match models::limited_equivalence_check(components, w, Bound::depth(EQUIVALENCE_DEPTH))? {
            EquivalenceVerdict::Confirmed { reducts, lifts, .. } => (
                true,
                format!("confirmed ({reducts} reducts, {lifts} lifts)"),
            ),
            EquivalenceVerdict::Refuted(Discrepancy::Reduct { trace, verdict }) => (
                false,
                format!("reduct rejected ({verdict:?}) for {} steps", trace.len()),
            ),
            EquivalenceVerdict::Refuted(Discrepancy::Lift { trace, error }) => {
                (false, format!("no lift ({error}): {}", skeleton(&trace)))
            }
        },
    )
}

/// Validity transfers from the fixed-set state models with light sets to
/// the limited one, and back to the fixed-set model of the forked parts.
fn bridge_lemmas() -> Result<(bool, String), VlsmError> {
    let bound = Bound::depth(BRIDGE_DEPTH);
    let w = unit(2, 2);
    let ls = state_equiv_limited(mo2(), Arc::new(w.clone()))?;
    let ls_reach = reach(&ls, bound)?;
    let mut up = 0;
    let mut fixed = BTreeMap::new();
    for e in [set([]), set([1]), set([2]), set([1, 2])] {
        let sm = state_equiv_fixed(mo2(), &e)?;
        let sm_reach = reach(&sm, bound)?;
        if w.below(&e) {
            for t in valid_traces(&sm, bound)? {
                if let TraceVerdict::FailAt { step, reason } =
                    check_trace_with(&ls, &t, Some(&ls_reach))
                {
                    return Ok((
                        false,
                        format!("E={e:?} trace not limited-valid at {step}: {reason}"),
                    ));
                }
                up += 1;
            }
        }
        fixed.insert(e, (sm, sm_reach));
    }
    let mut down = 0;
    for t in valid_traces(&ls, bound)? {
        let e = forked(t.last_state());
        let (sm, sm_reach) = &fixed[&e];
        if let TraceVerdict::FailAt { step, reason } = check_trace_with(sm, &t, Some(sm_reach)) {
            return Ok((
                false,
                format!("limited trace not valid for E={e:?} at {step}: {reason}"),
            ));
        }
        down += 1;
    }
    Ok((
        true,
        format!("bridges hold ({up} fixed→limited, {down} limited→fixed)"),
    ))
}

fn criterion_10() -> Result<Outcome, VlsmError> {
    let (pass, detail) = limited_verdict(mo2())?;
    let (_, elmo) = limited_verdict(elmo2(2))?;
    let (bridges, bridge_detail) = bridge_lemmas()?;
    let (model, a, b) = fixtures::order_ambiguity()?;
    let ambiguity = a.last_state().base == b.last_state().base
        && a.last_state().eqv.is_empty()
        && b.last_state().eqv == set([1])
        && check_trace_with(&model, &a, None).is_ok()
        && check_trace_with(&model, &b, None).is_ok();
    Ok(Outcome::new(
        pass && bridges && ambiguity,
        format!(
            "MO: {detail} | ELMO t=2: {elmo} | {bridge_detail} | order fixture eqv ∅ vs {{1}}: {ambiguity}"
        ),
    ))
}

fn byzantine_text(
    v: Result<ByzantineVerdict<vlsmkit::Trace<UmoLabel, UmoState, UmoState>>, VlsmError>,
) -> (bool, String) {
    match v {
        Ok(ByzantineVerdict::Confirmed { exposed, .. }) => {
            (true, format!("confirmed, exposed traces {exposed:?}"))
        }
        Ok(ByzantineVerdict::Refuted {
            part,
            only_in,
            trace,
        }) => (
            false,
            format!(
                "part {part} trace of {} steps only on the {only_in:?} side",
                trace.len()
            ),
        ),
        Err(e) => (false, e.to_string()),
    }
}

fn criterion_11() -> Result<Outcome, VlsmError> {
    let bound = Bound::depth(BYZANTINE_DEPTH);
    let window = Window::new(universe(2), WINDOW_DEPTH);
    let b = set([2]);
    let fixed = |c: Vec<UmoComponent>| {
        byzantine::fixed_equivalence_check(&c, &b, ReceiverRule::Any, bound, &window)
    };
    let limited = |c: Vec<UmoComponent>| {
        byzantine::limited_equivalence_check(&c, Arc::new(unit(2, 2)), bound, &window)
    };
    let (mo_fixed, mo_fixed_text) = byzantine_text(fixed(mo2()));
    let (mo_limited, mo_limited_text) = byzantine_text(limited(mo2()));
    let (_, elmo_fixed) = byzantine_text(fixed(elmo2(2)));
    let (_, elmo_limited) = byzantine_text(limited(elmo2(2)));
    let umo = fixed(vec![umo_component(1), umo_component(2)]);
    let precondition = matches!(umo, Err(VlsmError::PreconditionFailed(_)));
    Ok(Outcome::new(
        mo_fixed && mo_limited && precondition,
        format!(
            "MO fixed: {mo_fixed_text} | MO limited: {mo_limited_text} | ELMO fixed: {elmo_fixed} | \
             ELMO limited: {elmo_limited} | UMO precondition failed: {precondition}"
        ),
    ))
}

mod cli {
    use std::path::{Path, PathBuf};
    use std::process::{Command, Output};

    use serde_json::{json, Value};

    pub struct Run {
        dir: tempfile::TempDir,
    }

    impl Run {
        pub fn new() -> Self {
            Run {
                dir: tempfile::tempdir().unwrap(),
            }
        }

        pub fn file(&self, name: &str, contents: &[u8]) -> PathBuf {
            let p = self.dir.path().join(name);
            std::fs::write(&p, contents).unwrap();
            p
        }

        pub fn json(&self, name: &str, v: &Value) -> PathBuf {
            self.file(name, v.to_string().as_bytes())
        }
    }

    pub fn run(scenario: &Path, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_vlsmkit"))
            .arg("--scenario")
            .arg(scenario)
            .args(args)
            .env_remove("VLSMKIT_CAP")
            .output()
            .unwrap()
    }

    pub fn code(o: &Output) -> i32 {
        o.status.code().unwrap_or(-1)
    }

    pub fn umo(addr: usize, obs: &[(&str, Value)]) -> Value {
        let obs: Vec<Value> = obs
            .iter()
            .map(|(k, m)| json!({ "kind": k, "msg": m }))
            .collect();
        json!({ "addr": addr, "obs": obs })
    }

    pub fn countdown_trace(n: i64, inputs: &[i64]) -> Value {
        let mut i = n;
        let steps: Vec<Value> = inputs
            .iter()
            .map(|&x| {
                i -= x;
                json!({ "label": "d", "input": x, "post": { "n": n, "i": i }, "output": 2 * x })
            })
            .collect();
        json!({ "start": { "n": n, "i": n }, "steps": steps })
    }

    pub fn answers_trace() -> Value {
        let step = |part: usize, label: &str, input: Value, post: [&str; 3], output: Value| json!({ "label": { "part": part, "label": label }, "input": input, "post": post, "output": output });
        json!({
            "start": ["s0", "q0", "r0"],
            "steps": [
                step(1, "send_a", Value::Null, ["sa", "q0", "r0"], json!("a")),
                step(2, "receive", json!("a"), ["sa", "qa", "r0"], Value::Null),
                step(2, "send", Value::Null, ["sa", "qc", "r0"], json!("c")),
                step(3, "receive", json!("c"), ["sa", "qc", "rc"], Value::Null),
                step(3, "receive", json!("d"), ["sa", "qc", "rcd"], Value::Null),
            ],
        })
    }
}

fn criterion_12() -> Result<Outcome, VlsmError> {
    use cli::{code, run};
    use serde_json::json;

    let w = cli::Run::new();
    let mut failures: Vec<String> = Vec::new();
    fn exit_is(failures: &mut Vec<String>, what: &str, got: i32, want: i32) {
        if got != want {
            failures.push(format!("{what}: exit {got}, want {want}"));
        }
    }

    // countdown fixtures
    let cd = w.json(
        "countdown.json",
        &json!({ "protocol": "countdown", "depth": COUNTDOWN_DEPTH }),
    );
    let good = w.json("good.json", &cli::countdown_trace(6, &[2, 4]));
    let odd = w.json("odd.json", &cli::countdown_trace(5, &[2, 2, 1]));
    exit_is(
        &mut failures,
        "valid countdown trace",
        code(&run(
            &cd,
            &["check", good.to_str().unwrap(), "--mode", "valid"],
        )),
        0,
    );
    exit_is(
        &mut failures,
        "odd input, constrained",
        code(&run(&cd, &["check", odd.to_str().unwrap()])),
        0,
    );
    exit_is(
        &mut failures,
        "odd input, valid",
        code(&run(
            &cd,
            &["check", odd.to_str().unwrap(), "--mode", "valid"],
        )),
        1,
    );
    let text = std::fs::read(&good).unwrap();
    let cut = w.file("cut.json", &text[..text.len() / 2]);
    exit_is(
        &mut failures,
        "truncated trace",
        code(&run(&cd, &["check", cut.to_str().unwrap()])),
        2,
    );

    // unsent receipt and its repair
    let mo = w.json("mo.json", &json!({ "protocol": "mo", "n": 2, "depth": 3 }));
    let m2 = cli::umo(2, &[]);
    let before = w.json(
        "before.json",
        &json!([cli::umo(1, &[("receive", m2.clone())]), cli::umo(2, &[])]),
    );
    let after = w.json(
        "after.json",
        &json!([
            cli::umo(1, &[("receive", m2.clone())]),
            cli::umo(2, &[("send", m2.clone())])
        ]),
    );
    exit_is(
        &mut failures,
        "unsent receipt",
        code(&run(&mo, &["detect", before.to_str().unwrap()])),
        3,
    );
    exit_is(
        &mut failures,
        "after the send",
        code(&run(&mo, &["detect", after.to_str().unwrap()])),
        0,
    );

    // c/d fixture
    let answers = w.json(
        "answers.json",
        &json!({ "protocol": "answers", "n": 3, "adversary": { "fixed_equivocators": [2] }, "receiver": "any", "depth": 5 }),
    );
    let at = w.json("answers-trace.json", &cli::answers_trace());
    exit_is(
        &mut failures,
        "c/d trace",
        code(&run(
            &answers,
            &["check", at.to_str().unwrap(), "--mode", "valid"],
        )),
        0,
    );
    let eq = run(&answers, &["equivalence"]);
    exit_is(&mut failures, "c/d equivalence", code(&eq), 1);
    if !String::from_utf8_lossy(&eq.stdout).contains("cannot equivocate") {
        failures.push("c/d equivalence does not report the missing lift".into());
    }

    let umo_byz = w.json(
        "umo.json",
        &json!({ "protocol": "umo", "n": 2, "adversary": { "byzantine": [2] }, "depth": 2 }),
    );
    exit_is(
        &mut failures,
        "UMO Byzantine check",
        code(&run(&umo_byz, &["equivalence", "--receiver", "any"])),
        4,
    );
    let mo_trace = w.json(
        "mo-trace.json",
        &json!({ "start": [cli::umo(1, &[]), cli::umo(2, &[])], "steps": [] }),
    );
    exit_is(
        &mut failures,
        "cap reached",
        code(&run(
            &mo,
            &[
                "check",
                mo_trace.to_str().unwrap(),
                "--mode",
                "valid",
                "--cap",
                "1",
            ],
        )),
        5,
    );

    // replay determinism and round trips
    let mut round_trips = 0;
    for (name, sc, kind) in [
        ("countdown", &cd, "trace"),
        ("mo", &mo, "trace"),
        ("answers", &answers, "trace"),
    ] {
        for seed in ["0", "1", "2"] {
            let a = run(sc, &["simulate", "--seed", seed]);
            let b = run(sc, &["simulate", "--seed", seed]);
            if a.stdout != b.stdout || code(&a) != 0 {
                failures.push(format!("{name} seed {seed}: simulation not reproducible"));
                continue;
            }
            let t = w.file(&format!("{name}-{seed}.json"), &a.stdout);
            let again = run(sc, &["fmt", t.to_str().unwrap(), "--kind", kind]);
            if again.stdout != a.stdout {
                failures.push(format!("{name} seed {seed}: round trip changed the trace"));
            }
            exit_is(
                &mut failures,
                &format!("{name} seed {seed} replay"),
                code(&run(sc, &["check", t.to_str().unwrap(), "--mode", "valid"])),
                0,
            );
            round_trips += 1;
        }
    }
    for (path, kind, sc) in [
        (&good, "trace", &cd),
        (&before, "state", &mo),
        (&at, "trace", &answers),
    ] {
        let once = run(sc, &["fmt", path.to_str().unwrap(), "--kind", kind]);
        let p = w.file("once.json", &once.stdout);
        if code(&once) != 0
            || run(sc, &["fmt", p.to_str().unwrap(), "--kind", kind]).stdout != once.stdout
        {
            failures.push(format!("{}: fixture does not round-trip", path.display()));
        }
        round_trips += 1;
    }
    let report = run(&mo, &["detect", before.to_str().unwrap()]);
    let rp = w.file("report.json", &report.stdout);
    if run(&mo, &["fmt", rp.to_str().unwrap(), "--kind", "report"]).stdout != report.stdout {
        failures.push("report does not round-trip".into());
    }

    Ok(if failures.is_empty() {
        Outcome::new(
            true,
            format!("exit codes 0-5 as documented, {round_trips} round trips identical"),
        )
    } else {
        Outcome::new(false, failures.join("; "))
    })
}

fn main() {
    let criteria: [(usize, &str, Check); 12] = [
        (1, "countdown characterizations", criterion_1),
        (2, "unique component traces", criterion_2),
        (3, "composite extraction", criterion_3),
        (4, "validators", criterion_4),
        (5, "local evidence within global", criterion_5),
        (6, "minimal equivocation traces", criterion_6),
        (7, "local evidence, two computations", criterion_7),
        (8, "fixed-set model equivalence", criterion_8),
        (9, "negative fixtures", criterion_9),
        (10, "limited model equivalence", criterion_10),
        (11, "Byzantine equivalence", criterion_11),
        (12, "command-line contract", criterion_12),
    ];
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    let total = Instant::now();
    for (n, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let started = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let known = KNOWN_FAILURES.contains(&n);
        let note = match (outcome.pass, known) {
            (true, false) | (false, true) => "",
            (false, false) => " [unexpected]",
            (true, true) => " [unexpected pass, update KNOWN_FAILURES]",
        };
        if outcome.pass == known {
            unexpected.push(n);
        }
        println!(
            "criterion {n:>2} {} ({:.1}s) {name}{}{note}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            if known && !outcome.pass {
                " [known]"
            } else {
                ""
            },
            outcome.detail
        );
    }
    println!("total {:.1}s", total.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        println!("unexpected outcomes: {unexpected:?}");
        std::process::exit(1);
    }
}
