//! Finite machines given by an explicit transition table, for small
//! hand-built scenarios.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::equivocation::{MessageOracle, SentOracle};
use crate::models::Emitter;
use crate::vlsm::{Address, Trace, Vlsm};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Row {
    pub from: String,
    pub label: String,
    pub input: Option<String>,
    pub to: String,
    pub output: Option<String>,
}

/// States, labels and messages are strings. Only listed rows are
/// constrained; anything else leaves the state unchanged.
#[derive(Debug, Clone, Default)]
pub struct Table {
    initial: Vec<String>,
    initial_messages: Vec<String>,
    rows: Vec<Row>,
    senders: Arc<BTreeMap<String, Address>>,
    dependencies: Arc<BTreeMap<String, Vec<String>>>,
}

fn owned(m: Option<&str>) -> Option<String> {
    m.map(str::to_owned)
}

impl Table {
    pub fn new(initial: &[&str]) -> Self {
        Table {
            initial: initial.iter().map(|s| s.to_string()).collect(),
            ..Table::default()
        }
    }

    pub fn row(
        mut self,
        from: &str,
        label: &str,
        input: Option<&str>,
        to: &str,
        output: Option<&str>,
    ) -> Self {
        self.rows.push(Row {
            from: from.into(),
            label: label.into(),
            input: owned(input),
            to: to.into(),
            output: owned(output),
        });
        self
    }

    pub fn with_initial_messages(mut self, ms: &[&str]) -> Self {
        self.initial_messages = ms.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_senders(mut self, senders: Arc<BTreeMap<String, Address>>) -> Self {
        self.senders = senders;
        self
    }

    pub fn with_dependencies(mut self, deps: Arc<BTreeMap<String, Vec<String>>>) -> Self {
        self.dependencies = deps;
        self
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    fn find(&self, label: &str, s: &str, m: Option<&String>) -> Option<&Row> {
        self.rows
            .iter()
            .find(|r| r.label == label && r.from == s && r.input.as_ref() == m)
    }

    /// Messages picked up on every path to each reachable state, where
    /// `pick` selects the message of a row.
    fn on_every_path(
        &self,
        pick: impl Fn(&Row) -> Option<&String>,
    ) -> BTreeMap<String, BTreeSet<String>> {
        let mut known: BTreeMap<String, BTreeSet<String>> = self
            .initial
            .iter()
            .map(|s| (s.clone(), BTreeSet::new()))
            .collect();
        loop {
            let mut changed = false;
            for r in &self.rows {
                let Some(before) = known.get(&r.from) else {
                    continue;
                };
                let mut cand = before.clone();
                cand.extend(pick(r).cloned());
                let next = match known.get(&r.to) {
                    None => cand,
                    Some(cur) => cur.intersection(&cand).cloned().collect(),
                };
                if known.get(&r.to) != Some(&next) {
                    known.insert(r.to.clone(), next);
                    changed = true;
                }
            }
            if !changed {
                return known;
            }
        }
    }
}

impl Vlsm for Table {
    type Label = String;
    type State = String;
    type Message = String;

    fn initial_states(&self) -> Vec<String> {
        self.initial.clone()
    }

    fn initial_messages(&self) -> Vec<String> {
        self.initial_messages.clone()
    }

    fn labels(&self, s: &String) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .rows
            .iter()
            .filter(|r| &r.from == s)
            .map(|r| &r.label)
            .collect();
        set.into_iter().cloned().collect()
    }

    fn transition(
        &self,
        label: &String,
        s: &String,
        m: Option<&String>,
    ) -> (String, Option<String>) {
        match self.find(label, s, m) {
            Some(r) => (r.to.clone(), r.output.clone()),
            None => (s.clone(), None),
        }
    }

    fn constraint(&self, label: &String, s: &String, m: Option<&String>) -> bool {
        self.find(label, s, m).is_some()
    }
}

impl MessageOracle for Table {
    fn sender(&self, m: &String) -> Option<Address> {
        self.senders.get(m).copied()
    }

    fn dependencies(&self, m: &String) -> Vec<String> {
        self.dependencies.get(m).cloned().unwrap_or_default()
    }
}

impl SentOracle for Table {
    fn sent_messages(&self, s: &String) -> Vec<String> {
        let all = self.on_every_path(|r| r.output.as_ref());
        all.get(s)
            .map(|x| x.iter().cloned().collect())
            .unwrap_or_default()
    }

    fn received_messages(&self, s: &String) -> Vec<String> {
        let all = self.on_every_path(|r| r.input.as_ref());
        all.get(s)
            .map(|x| x.iter().cloned().collect())
            .unwrap_or_default()
    }
}

impl Emitter for Table {
    /// Shortest row paths first, each row used at most once per path.
    fn emissions(&self, m: &String) -> Vec<Trace<String, String, String>> {
        let mut out = Vec::new();
        let mut queue: VecDeque<(String, Vec<usize>)> = self
            .initial
            .iter()
            .map(|s| (s.clone(), Vec::new()))
            .collect();
        while let Some((start, path)) = queue.pop_front() {
            let cur = path.last().map_or(&start, |k| &self.rows[*k].to).clone();
            for (k, r) in self.rows.iter().enumerate() {
                if r.from != cur || path.contains(&k) {
                    continue;
                }
                let mut next = path.clone();
                next.push(k);
                if r.output.as_ref() == Some(m) {
                    out.push(Trace::replay(
                        self,
                        start.clone(),
                        next.iter()
                            .map(|k| (self.rows[*k].label.clone(), self.rows[*k].input.clone())),
                    ));
                }
                queue.push_back((start.clone(), next));
            }
        }
        out
    }
}
