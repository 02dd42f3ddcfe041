//! The subcommands. Each returns the text for stdout and an exit code.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use vlsmkit::byzantine::{self, ByzantineVerdict, Side, Window};
use vlsmkit::compose::{free_compose, CompositeState, Composition};
use vlsmkit::countdown::Countdown;
use vlsmkit::equivocation::{global_equivocators, local_equivocators};
use vlsmkit::explore::{check_trace, TraceMode, TraceVerdict};
use vlsmkit::fixtures::answers_components;
use vlsmkit::models::{
    self, message_equiv_fixed_with, message_equiv_limited, AnnotatedModel, Discrepancy,
    EquivalenceVerdict,
};
use vlsmkit::table::Table;
use vlsmkit::umo::{syntactic_universe, UmoComponent, UmoState};
use vlsmkit::{Bound, Trace, TraceOf, Vlsm};

use crate::codec::{parse, render, Codec, PartReport};
use crate::error::CliError;
use crate::scenario::{Adversary, Protocol, Scenario};

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

impl Outcome {
    fn new(code: i32, v: Value) -> Self {
        Outcome {
            code,
            stdout: render(v),
        }
    }
}

/// The machine a scenario describes for simulation and checking.
enum Machine {
    Countdown(Countdown),
    Composite(Composition<UmoComponent>),
    Limited(AnnotatedModel<UmoComponent>),
    Answers(Composition<Table>),
}

fn machine(sc: &Scenario) -> Result<Machine, CliError> {
    if sc.protocol == Protocol::Countdown {
        return Ok(Machine::Countdown(
            sc.max_n
                .map_or_else(vlsmkit::countdown::countdown, Countdown::new),
        ));
    }
    if sc.protocol == Protocol::Answers {
        let parts = answers_components();
        return Ok(Machine::Answers(match &sc.adversary {
            Adversary::FixedEquivocators(e) => {
                message_equiv_fixed_with(parts, e, sc.receiver.into())?
            }
            _ => free_compose(parts)?,
        }));
    }
    let parts = sc.components()?;
    Ok(match &sc.adversary {
        Adversary::None if sc.protocol == Protocol::Elmo => {
            let w = sc.weight_map()?;
            Machine::Composite(vlsmkit::umo::elmo_protocol(sc.n, w)?)
        }
        Adversary::None => Machine::Composite(free_compose(parts)?),
        Adversary::FixedEquivocators(e) => {
            Machine::Composite(message_equiv_fixed_with(parts, e, sc.receiver.into())?)
        }
        Adversary::Limited => {
            Machine::Limited(message_equiv_limited(parts, sc.weight_map()?.into())?)
        }
        Adversary::Byzantine(_) | Adversary::ByzantineLimited => {
            return Err(CliError::Usage(
                "Byzantine adversaries are only supported by `equivalence`".into(),
            ))
        }
    })
}

pub fn read(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn decode<T: Codec>(path: &str, text: &str) -> Result<T, CliError> {
    parse(text)
        .and_then(|v| T::decode(&v))
        .map_err(|source| CliError::Decode {
            path: path.into(),
            source,
        })
}

/// A random constrained run of at most `depth` steps. Inputs are drawn
/// from the initial messages and the outputs of the run so far, so the
/// result is a valid trace.
fn random_trace<V: Vlsm>(m: &V, depth: usize, seed: u64) -> Result<TraceOf<V>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = m.initial_states();
    if starts.is_empty() {
        return Err(CliError::Usage("the machine has no initial state".into()));
    }
    let mut trace = Trace::empty(starts[rng.gen_range(0..starts.len())].clone());
    let mut pool: BTreeSet<V::Message> = m.initial_messages().into_iter().collect();
    while trace.len() < depth {
        let s = trace.last_state().clone();
        let mut moves: Vec<(V::Label, Option<V::Message>)> = m
            .labels(&s)
            .into_iter()
            .flat_map(|l| {
                std::iter::once(None)
                    .chain(pool.iter().cloned().map(Some))
                    .map(move |i| (l.clone(), i))
            })
            .filter(|(l, i)| m.constraint(l, &s, i.as_ref()))
            .collect();
        if moves.is_empty() {
            break;
        }
        let (l, i) = moves.swap_remove(rng.gen_range(0..moves.len()));
        if let Some(out) = &trace.push(m, l, i).output {
            pool.insert(out.clone());
        }
    }
    Ok(trace)
}

pub fn simulate(sc: &Scenario, depth: usize, seed: u64) -> Result<Outcome, CliError> {
    let v = match machine(sc)? {
        Machine::Countdown(c) => random_trace(&c, depth, seed)?.encode(),
        Machine::Composite(c) => random_trace(&c, depth, seed)?.encode(),
        Machine::Limited(a) => random_trace(&a, depth, seed)?.encode(),
        Machine::Answers(c) => random_trace(&c, depth, seed)?.encode(),
    };
    Ok(Outcome::new(0, v))
}

fn check_on<V>(
    m: &V,
    path: &str,
    text: &str,
    mode: TraceMode,
    bound: Bound,
) -> Result<Outcome, CliError>
where
    V: Vlsm,
    TraceOf<V>: Codec,
{
    let t: TraceOf<V> = decode(path, text)?;
    Ok(match check_trace(m, &t, mode, bound)? {
        TraceVerdict::Ok => Outcome::new(0, json!({ "verdict": "ok", "steps": t.len() })),
        TraceVerdict::FailAt { step, reason } => Outcome::new(
            1,
            json!({ "verdict": "fail", "step": step, "reason": reason }),
        ),
    })
}

pub fn check(
    sc: &Scenario,
    path: &str,
    mode: TraceMode,
    bound: Bound,
) -> Result<Outcome, CliError> {
    let text = read(path)?;
    match machine(sc)? {
        Machine::Countdown(c) => check_on(&c, path, &text, mode, bound),
        Machine::Composite(c) => check_on(&c, path, &text, mode, bound),
        Machine::Limited(a) => check_on(&a, path, &text, mode, bound),
        Machine::Answers(c) => check_on(&c, path, &text, mode, bound),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Local,
    Global,
}

/// Equivocation evidence in a composite state, or in the last state of a
/// composite trace (a file with a `steps` key).
pub fn detect(sc: &Scenario, path: &str, scope: Scope) -> Result<Outcome, CliError> {
    let text = read(path)?;
    let Machine::Composite(c) = machine(sc)? else {
        return Err(CliError::Usage(
            "detection needs a umo, mo or elmo scenario without a limited adversary".into(),
        ));
    };
    let value = parse(&text).map_err(|source| CliError::Decode {
        path: path.into(),
        source,
    })?;
    let sigma: CompositeState<UmoState> = if value.get("steps").is_some() {
        let t: TraceOf<Composition<UmoComponent>> = decode(path, &text)?;
        t.last_state().clone()
    } else {
        decode(path, &text)?
    };
    if sigma.arity() != sc.n {
        return Err(CliError::Usage(format!(
            "state has {} parts, scenario has {}",
            sigma.arity(),
            sc.n
        )));
    }
    let reports: Vec<PartReport<UmoState>> = match scope {
        Scope::Local => (1..=sc.n)
            .map(|j| {
                Ok(PartReport {
                    part: Some(j),
                    report: local_equivocators(c.component(j), sigma.part(j))?,
                })
            })
            .collect::<Result<_, CliError>>()?,
        Scope::Global => vec![PartReport {
            part: None,
            report: global_equivocators(&c, &sigma)?,
        }],
    };
    let found = reports.iter().any(|r| !r.report.is_empty());
    Ok(Outcome::new(
        if found { 3 } else { 0 },
        Value::Array(reports.iter().map(Codec::encode).collect()),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Fixed,
    Limited,
    ByzFixed,
    ByzLimited,
}

fn default_kind(adversary: &Adversary) -> Result<Kind, CliError> {
    Ok(match adversary {
        Adversary::FixedEquivocators(_) => Kind::Fixed,
        Adversary::Limited => Kind::Limited,
        Adversary::Byzantine(_) => Kind::ByzFixed,
        Adversary::ByzantineLimited => Kind::ByzLimited,
        Adversary::None => {
            return Err(CliError::Usage(
                "no adversary in the scenario; pass --kind".into(),
            ))
        }
    })
}

fn model_verdict<A: Codec, B: Codec>(v: EquivalenceVerdict<A, B>) -> Outcome {
    match v {
        EquivalenceVerdict::Confirmed {
            depth,
            reducts,
            lifts,
        } => Outcome::new(
            0,
            json!({ "verdict": "confirmed", "depth": depth, "reducts": reducts, "lifts": lifts }),
        ),
        EquivalenceVerdict::Refuted(Discrepancy::Reduct { trace, verdict }) => {
            let reason = match verdict {
                TraceVerdict::FailAt { step, reason } => format!("step {step}: {reason}"),
                TraceVerdict::Ok => String::new(),
            };
            Outcome::new(
                1,
                json!({ "verdict": "refuted", "direction": "reduct", "reason": reason, "trace": trace.encode() }),
            )
        }
        EquivalenceVerdict::Refuted(Discrepancy::Lift { trace, error }) => Outcome::new(
            1,
            json!({ "verdict": "refuted", "direction": "lift", "reason": error.to_string(), "trace": trace.encode() }),
        ),
    }
}

fn byzantine_verdict<T: Codec>(v: ByzantineVerdict<T>) -> Outcome {
    match v {
        ByzantineVerdict::Confirmed { depth, exposed } => Outcome::new(
            0,
            json!({ "verdict": "confirmed", "depth": depth, "exposed": exposed }),
        ),
        ByzantineVerdict::Refuted {
            part,
            only_in,
            trace,
        } => {
            let side = match only_in {
                Side::Byzantine => "byzantine",
                Side::Equivocation => "equivocation",
            };
            Outcome::new(
                1,
                json!({ "verdict": "refuted", "part": part, "only_in": side, "trace": trace.encode() }),
            )
        }
    }
}

pub struct WindowSpec {
    pub rounds: usize,
    pub depth: usize,
}

pub fn equivalence(
    sc: &Scenario,
    kind: Option<Kind>,
    bound: Bound,
    window: &WindowSpec,
) -> Result<Outcome, CliError> {
    let kind = kind.map_or_else(|| default_kind(&sc.adversary), Ok)?;
    let set = |what: &str| match &sc.adversary {
        Adversary::FixedEquivocators(s) | Adversary::Byzantine(s) => Ok(s.clone()),
        _ => Err(CliError::Usage(format!(
            "--kind {what} needs an address set in the adversary"
        ))),
    };
    if sc.protocol == Protocol::Answers {
        if kind != Kind::Fixed {
            return Err(CliError::Usage(
                "the answers protocol supports --kind fixed only".into(),
            ));
        }
        let e = set("fixed")?;
        return Ok(model_verdict(models::fixed_equivalence_check(
            answers_components(),
            &e,
            sc.receiver.into(),
            bound,
        )?));
    }
    let parts = sc.components()?;
    let win = || {
        let addrs: Vec<_> = (1..=sc.n).collect();
        Window::new(syntactic_universe(&addrs, window.rounds), window.depth)
    };
    Ok(match kind {
        Kind::Fixed => model_verdict(models::fixed_equivalence_check(
            parts,
            &set("fixed")?,
            sc.receiver.into(),
            bound,
        )?),
        Kind::Limited => model_verdict(models::limited_equivalence_check(
            parts,
            sc.weight_map()?.into(),
            bound,
        )?),
        Kind::ByzFixed => byzantine_verdict(byzantine::fixed_equivalence_check(
            &parts,
            &set("byz-fixed")?,
            sc.receiver.into(),
            bound,
            &win(),
        )?),
        Kind::ByzLimited => byzantine_verdict(byzantine::limited_equivalence_check(
            &parts,
            sc.weight_map()?.into(),
            bound,
            &win(),
        )?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmtKind {
    Trace,
    State,
    Report,
}

/// Parses a file as the scenario's trace, state or report type and prints
/// it back in canonical form.
pub fn fmt(sc: &Scenario, path: &str, kind: FmtKind) -> Result<Outcome, CliError> {
    let text = read(path)?;
    fn again<T: Codec>(path: &str, text: &str) -> Result<Value, CliError> {
        decode::<T>(path, text).map(|x| x.encode())
    }
    fn reports(path: &str, text: &str) -> Result<Value, CliError> {
        decode::<Vec<PartReport<UmoState>>>(path, text).map(|x| x.encode())
    }
    let v = match (machine(sc)?, kind) {
        (Machine::Countdown(_), FmtKind::Trace) => again::<TraceOf<Countdown>>(path, &text)?,
        (Machine::Countdown(_), FmtKind::State) => {
            again::<vlsmkit::countdown::CountdownState>(path, &text)?
        }
        (Machine::Composite(_), FmtKind::Trace) => {
            again::<TraceOf<Composition<UmoComponent>>>(path, &text)?
        }
        (Machine::Composite(_), FmtKind::State) => again::<CompositeState<UmoState>>(path, &text)?,
        (Machine::Limited(_), FmtKind::Trace) => {
            again::<TraceOf<AnnotatedModel<UmoComponent>>>(path, &text)?
        }
        (Machine::Limited(_), FmtKind::State) => {
            again::<vlsmkit::models::AnnotatedState<UmoState>>(path, &text)?
        }
        (Machine::Answers(_), FmtKind::Trace) => again::<TraceOf<Composition<Table>>>(path, &text)?,
        (Machine::Answers(_), FmtKind::State) => again::<CompositeState<String>>(path, &text)?,
        (Machine::Countdown(_) | Machine::Answers(_), FmtKind::Report) => {
            return Err(CliError::Usage(
                "reports are defined for umo-family scenarios".into(),
            ))
        }
        (_, FmtKind::Report) => reports(path, &text)?,
    };
    Ok(Outcome::new(0, v))
}
