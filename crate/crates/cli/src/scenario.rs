//! Scenario files: which protocol, how many parts, which adversary and how
//! deep to explore.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use vlsmkit::models::ReceiverRule;
use vlsmkit::umo::{elmo_component, mo_component, umo_component, UmoComponent, WeightMap};
use vlsmkit::{Address, DEFAULT_CAP};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Countdown,
    Umo,
    Mo,
    Elmo,
    /// Three table machines: 1 sends `a` or `b`, 2 answers `a` with `c` and
    /// `b` with `d`, 3 collects answers.
    Answers,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    #[default]
    None,
    FixedEquivocators(BTreeSet<Address>),
    /// Equivocators bounded by `threshold`.
    Limited,
    Byzantine(BTreeSet<Address>),
    ByzantineLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    #[default]
    Equivocators,
    Any,
}

impl From<Receiver> for ReceiverRule {
    fn from(r: Receiver) -> Self {
        match r {
            Receiver::Equivocators => ReceiverRule::Equivocators,
            Receiver::Any => ReceiverRule::Any,
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub protocol: Protocol,
    #[serde(default = "one")]
    pub n: usize,
    /// Largest starting value enumerated by the countdown machine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<i64>,
    /// Address to weight, written `"p/q"` or `"p"`. Missing entries are 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<Address, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<String>,
    #[serde(default)]
    pub adversary: Adversary,
    #[serde(default)]
    pub receiver: Receiver,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
}

fn ratio(what: &str, s: &str) -> Result<Ratio<i64>, CliError> {
    s.trim()
        .parse::<Ratio<i64>>()
        .map_err(|_| CliError::Usage(format!("{what}: `{s}` is not a rational number")))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("bad scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    fn needs_weights(&self) -> bool {
        self.protocol == Protocol::Elmo
            || matches!(
                self.adversary,
                Adversary::Limited | Adversary::ByzantineLimited
            )
    }

    fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.n == 0 {
            return usage("n must be at least 1".into());
        }
        if self.protocol == Protocol::Countdown {
            if self.adversary != Adversary::None {
                return usage("the countdown protocol takes no adversary".into());
            }
            if self.n != 1 {
                return usage("the countdown protocol has a single part".into());
            }
        } else if self.protocol == Protocol::Answers {
            if self.n != 3 {
                return usage("the answers protocol has three parts".into());
            }
            if !matches!(
                self.adversary,
                Adversary::None | Adversary::FixedEquivocators(_)
            ) {
                return usage("the answers protocol takes a fixed equivocator set only".into());
            }
        }
        if self.protocol != Protocol::Countdown && self.max_n.is_some() {
            return usage("max_n applies to the countdown protocol only".into());
        }
        if self.needs_weights() && self.threshold.is_none() {
            return usage(format!(
                "protocol {:?} with adversary {:?} needs a threshold",
                self.protocol, self.adversary
            ));
        }
        if !self.needs_weights() && (self.weights.is_some() || self.threshold.is_some()) {
            return usage("weights and threshold need elmo or a limited adversary".into());
        }
        let in_range = |set: &BTreeSet<Address>| set.iter().all(|a| (1..=self.n).contains(a));
        match &self.adversary {
            Adversary::FixedEquivocators(e) | Adversary::Byzantine(e) if !in_range(e) => {
                return usage(format!("adversary addresses must lie in 1..={}", self.n));
            }
            _ => {}
        }
        if let Some(w) = &self.weights {
            if !in_range(&w.keys().copied().collect()) {
                return usage(format!("weight addresses must lie in 1..={}", self.n));
            }
        }
        if self.needs_weights() {
            self.weight_map()?;
        }
        Ok(())
    }

    pub fn weight_map(&self) -> Result<WeightMap, CliError> {
        let threshold = ratio(
            "threshold",
            self.threshold
                .as_deref()
                .ok_or_else(|| CliError::Usage("missing threshold".into()))?,
        )?;
        let given = self.weights.clone().unwrap_or_default();
        let weights = (1..=self.n)
            .map(|a| {
                let w = given
                    .get(&a)
                    .map_or(Ok(Ratio::from_integer(1)), |s| ratio("weight", s))?;
                Ok((a, w))
            })
            .collect::<Result<_, CliError>>()?;
        WeightMap::new(weights, threshold).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn components(&self) -> Result<Vec<UmoComponent>, CliError> {
        let n = self.n;
        Ok(match self.protocol {
            Protocol::Countdown | Protocol::Answers => {
                return Err(CliError::Usage(format!(
                    "{:?} is not a umo-family protocol",
                    self.protocol
                )))
            }
            Protocol::Umo => (1..=n).map(umo_component).collect(),
            Protocol::Mo => (1..=n).map(|i| mo_component(i, n)).collect(),
            Protocol::Elmo => {
                let w = Arc::new(self.weight_map()?);
                (1..=n).map(|i| elmo_component(i, n, w.clone())).collect()
            }
        })
    }

    /// `--cap`, then `VLSMKIT_CAP`, then the scenario, then the default.
    pub fn cap(&self, flag: Option<usize>) -> Result<usize, CliError> {
        if let Some(c) = flag {
            return Ok(c);
        }
        if let Ok(v) = std::env::var("VLSMKIT_CAP") {
            return v
                .parse()
                .map_err(|_| CliError::Usage(format!("VLSMKIT_CAP: `{v}` is not a number")));
        }
        Ok(self.cap.unwrap_or(DEFAULT_CAP))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_adversaries() {
        let s = Scenario::parse(
            r#"{"protocol":"mo","n":2,"adversary":{"fixed_equivocators":[2]},"depth":3}"#,
        )
        .unwrap();
        assert_eq!(
            s.adversary,
            Adversary::FixedEquivocators([2].into_iter().collect())
        );
        let s = Scenario::parse(
            r#"{"protocol":"mo","n":2,"adversary":"limited","threshold":"2","depth":3}"#,
        )
        .unwrap();
        assert_eq!(
            s.weight_map().unwrap(),
            WeightMap::unit(2, Ratio::from_integer(2)).unwrap()
        );
    }

    #[test]
    fn rejects_inconsistent_files() {
        for bad in [
            r#"{"protocol":"elmo","n":2,"depth":3}"#,
            r#"{"protocol":"mo","n":2,"adversary":{"byzantine":[3]},"depth":3}"#,
            r#"{"protocol":"countdown","adversary":"limited","threshold":"1","depth":3}"#,
            r#"{"protocol":"mo","n":2,"depth":3,"colour":"red"}"#,
            r#"{"protocol":"elmo","n":2,"threshold":"0","depth":3}"#,
            r#"{"protocol":"elmo","n":2,"weights":{"1":"x"},"threshold":"1","depth":3}"#,
        ] {
            assert!(
                matches!(Scenario::parse(bad), Err(CliError::Usage(_))),
                "{bad}"
            );
        }
    }
}
