//! JSON forms of states, labels, messages, traces and reports. Keys are
//! written in sorted order so serializing a parsed file gives back the
//! same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde_json::{json, Map, Value};
use thiserror::Error;

use vlsmkit::compose::{CompositeLabel, CompositeState};
use vlsmkit::countdown::{CountdownLabel, CountdownState};
use vlsmkit::equivocation::{EquivocationReport, Evidence, EvidenceKind};
use vlsmkit::models::{AnnotatedState, EquivocatorAction, EquivocatorLabel, EquivocatorState};
use vlsmkit::umo::{Observation, UmoLabel, UmoState};
use vlsmkit::{Address, Trace, TransitionRecord};

#[derive(Debug, Error)]
#[error("{0}")]
pub struct DecodeError(pub String);

fn bad(what: &str, v: &Value) -> DecodeError {
    let mut shown = v.to_string();
    if shown.len() > 80 {
        shown.truncate(77);
        shown.push_str("...");
    }
    DecodeError(format!("expected {what}, found {shown}"))
}

pub trait Codec: Sized {
    fn encode(&self) -> Value;
    fn decode(v: &Value) -> Result<Self, DecodeError>;
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, DecodeError> {
    v.get(key)
        .ok_or_else(|| DecodeError(format!("missing field `{key}`")))
}

fn array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>, DecodeError> {
    v.as_array().ok_or_else(|| bad(what, v))
}

fn natural(v: &Value) -> Result<usize, DecodeError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| bad("a natural number", v))
}

impl Codec for i64 {
    fn encode(&self) -> Value {
        json!(self)
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        v.as_i64().ok_or_else(|| bad("an integer", v))
    }
}

impl Codec for usize {
    fn encode(&self) -> Value {
        json!(self)
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        natural(v)
    }
}

impl Codec for String {
    fn encode(&self) -> Value {
        json!(self)
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        v.as_str()
            .map(str::to_owned)
            .ok_or_else(|| bad("a string", v))
    }
}

impl Codec for CountdownLabel {
    fn encode(&self) -> Value {
        json!("d")
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        match v.as_str() {
            Some("d") => Ok(CountdownLabel::D),
            _ => Err(bad("\"d\"", v)),
        }
    }
}

impl Codec for CountdownState {
    fn encode(&self) -> Value {
        json!({ "n": self.n, "i": self.i })
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        Ok(CountdownState::new(
            i64::decode(field(v, "n")?)?,
            i64::decode(field(v, "i")?)?,
        ))
    }
}

impl Codec for UmoLabel {
    fn encode(&self) -> Value {
        json!(self.to_string())
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        match v.as_str() {
            Some("send") => Ok(UmoLabel::Send),
            Some("receive") => Ok(UmoLabel::Receive),
            _ => Err(bad("\"send\" or \"receive\"", v)),
        }
    }
}

impl Codec for UmoState {
    fn encode(&self) -> Value {
        let obs: Vec<Value> = self
            .obs
            .iter()
            .map(|o| json!({ "kind": o.kind.encode(), "msg": o.msg.encode() }))
            .collect();
        json!({ "addr": self.addr, "obs": obs })
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        let addr = natural(field(v, "addr")?)?;
        let obs = array(field(v, "obs")?, "an observation list")?
            .iter()
            .map(|o| {
                Ok(Observation {
                    kind: UmoLabel::decode(field(o, "kind")?)?,
                    msg: Arc::new(UmoState::decode(field(o, "msg")?)?),
                })
            })
            .collect::<Result<_, DecodeError>>()?;
        Ok(UmoState { addr, obs })
    }
}

impl<T: Codec> Codec for Option<T> {
    fn encode(&self) -> Value {
        self.as_ref().map_or(Value::Null, Codec::encode)
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        if v.is_null() {
            Ok(None)
        } else {
            T::decode(v).map(Some)
        }
    }
}

impl<T: Codec> Codec for Vec<T> {
    fn encode(&self) -> Value {
        Value::Array(self.iter().map(Codec::encode).collect())
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        array(v, "a list")?.iter().map(T::decode).collect()
    }
}

impl<L: Codec> Codec for CompositeLabel<L> {
    fn encode(&self) -> Value {
        json!({ "part": self.index, "label": self.inner.encode() })
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        Ok(CompositeLabel::new(
            natural(field(v, "part")?)?,
            L::decode(field(v, "label")?)?,
        ))
    }
}

impl<S: Codec> Codec for CompositeState<S> {
    fn encode(&self) -> Value {
        Value::Array(self.0.iter().map(Codec::encode).collect())
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        let parts = array(v, "a list of part states")?
            .iter()
            .map(S::decode)
            .collect::<Result<Vec<_>, _>>()?;
        if parts.is_empty() {
            return Err(bad("at least one part state", v));
        }
        Ok(CompositeState(parts))
    }
}

impl<S: Codec + Clone> Codec for EquivocatorState<S> {
    fn encode(&self) -> Value {
        Value::Array(self.copies().iter().map(Codec::encode).collect())
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        let copies = array(v, "a list of copies")?
            .iter()
            .map(S::decode)
            .collect::<Result<Vec<_>, _>>()?;
        EquivocatorState::from_copies(copies).ok_or_else(|| bad("at least one copy", v))
    }
}

impl<L: Codec, S: Codec> Codec for EquivocatorLabel<L, S> {
    fn encode(&self) -> Value {
        let action = match &self.action {
            EquivocatorAction::Inner(l) => json!({ "inner": l.encode() }),
            EquivocatorAction::Duplicate => json!("duplicate"),
            EquivocatorAction::NewMachine(s) => json!({ "new_machine": s.encode() }),
        };
        json!({ "copy": self.copy, "action": action })
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        let copy = natural(field(v, "copy")?)?;
        let a = field(v, "action")?;
        let action = if a.as_str() == Some("duplicate") {
            EquivocatorAction::Duplicate
        } else if let Some(l) = a.get("inner") {
            EquivocatorAction::Inner(L::decode(l)?)
        } else if let Some(s) = a.get("new_machine") {
            EquivocatorAction::NewMachine(S::decode(s)?)
        } else {
            return Err(bad("an equivocator action", a));
        };
        Ok(EquivocatorLabel { copy, action })
    }
}

impl<S: Codec> Codec for AnnotatedState<S> {
    fn encode(&self) -> Value {
        json!({ "base": self.base.encode(), "eqv": self.eqv.iter().collect::<Vec<_>>() })
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        let eqv = array(field(v, "eqv")?, "a list of addresses")?
            .iter()
            .map(natural)
            .collect::<Result<BTreeSet<_>, _>>()?;
        Ok(AnnotatedState {
            base: CompositeState::decode(field(v, "base")?)?,
            eqv,
        })
    }
}

/// Steps carry label, input, post-state and output; pre-states are implied
/// by chaining from `start`.
impl<L: Codec, S: Codec + Clone, M: Codec> Codec for Trace<L, S, M> {
    fn encode(&self) -> Value {
        let steps: Vec<Value> = self
            .steps
            .iter()
            .map(|r| {
                json!({
                    "label": r.label.encode(),
                    "input": r.input.encode(),
                    "post": r.post.encode(),
                    "output": r.output.encode(),
                })
            })
            .collect();
        json!({ "start": self.start.encode(), "steps": steps })
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        let start = S::decode(field(v, "start")?)?;
        let mut pre = start.clone();
        let mut steps = Vec::new();
        for r in array(field(v, "steps")?, "a list of steps")? {
            let post = S::decode(field(r, "post")?)?;
            steps.push(TransitionRecord {
                label: L::decode(field(r, "label")?)?,
                pre: std::mem::replace(&mut pre, post.clone()),
                input: Option::<M>::decode(field(r, "input")?)?,
                post,
                output: Option::<M>::decode(field(r, "output")?)?,
            });
        }
        Ok(Trace { start, steps })
    }
}

/// An equivocation report, tagged with the part it was computed for when
/// the scope is local.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartReport<M> {
    pub part: Option<Address>,
    pub report: EquivocationReport<M>,
}

impl<M: Codec> Codec for PartReport<M> {
    fn encode(&self) -> Value {
        let witnesses: Vec<Value> = self
            .report
            .witnesses
            .iter()
            .map(|(a, e)| match e {
                Evidence::Pair(x, y) => json!({ "sender": a, "pair": [x.encode(), y.encode()] }),
                Evidence::Unsent(m) => json!({ "sender": a, "unsent": m.encode() }),
            })
            .collect();
        let kind = match self.report.kind {
            EvidenceKind::Local => "local",
            EvidenceKind::Global => "global",
        };
        let mut out = json!({
            "kind": kind,
            "equivocators": self.report.equivocators.iter().collect::<Vec<_>>(),
            "witnesses": witnesses,
        });
        if let Some(j) = self.part {
            out["part"] = json!(j);
        }
        out
    }
    fn decode(v: &Value) -> Result<Self, DecodeError> {
        let kind = match field(v, "kind")?.as_str() {
            Some("local") => EvidenceKind::Local,
            Some("global") => EvidenceKind::Global,
            _ => return Err(bad("\"local\" or \"global\"", v)),
        };
        let equivocators = array(field(v, "equivocators")?, "a list of addresses")?
            .iter()
            .map(natural)
            .collect::<Result<BTreeSet<_>, _>>()?;
        let mut witnesses = BTreeMap::new();
        for w in array(field(v, "witnesses")?, "a list of witnesses")? {
            let a = natural(field(w, "sender")?)?;
            let e = if let Some(p) = w.get("pair") {
                match array(p, "a pair of messages")?.as_slice() {
                    [x, y] => Evidence::Pair(M::decode(x)?, M::decode(y)?),
                    _ => return Err(bad("a pair of messages", p)),
                }
            } else {
                Evidence::Unsent(M::decode(field(w, "unsent")?)?)
            };
            witnesses.insert(a, e);
        }
        let part = v.get("part").map(natural).transpose()?;
        Ok(PartReport {
            part,
            report: EquivocationReport {
                kind,
                equivocators,
                witnesses,
            },
        })
    }
}

/// Rebuilds `v` with every object's keys inserted in sorted order.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let sorted: BTreeMap<String, Value> =
                m.into_iter().map(|(k, x)| (k, canonical(x))).collect();
            Value::Object(sorted.into_iter().collect::<Map<_, _>>())
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(canonical).collect()),
        x => x,
    }
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn render(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&canonical(v)).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn parse(text: &str) -> Result<Value, DecodeError> {
    serde_json::from_str(text).map_err(|e| DecodeError(format!("malformed JSON: {e}")))
}
