//! In-memory model of diagonal-free timed safety automata.

use std::collections::HashSet;
use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::dbm::{KFunction, Relation};

/// `clock ∼ constant`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomicConstraint {
    pub clock: String,
    pub relation: Relation,
    pub constant: u32,
}

impl AtomicConstraint {
    pub fn new(clock: impl Into<String>, relation: Relation, constant: u32) -> Self {
        AtomicConstraint {
            clock: clock.into(),
            relation,
            constant,
        }
    }
}

/// A guard or invariant conjunct. Only atomic constraints are supported by the
/// analysis; difference constraints are representable so that validation can
/// reject them with a precise diagnostic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    Atomic(AtomicConstraint),
    Difference {
        left: String,
        right: String,
        relation: Relation,
        constant: i64,
    },
}

impl Constraint {
    pub fn atomic(clock: impl Into<String>, relation: Relation, constant: u32) -> Self {
        Constraint::Atomic(AtomicConstraint::new(clock, relation, constant))
    }

    fn clocks(&self) -> Vec<&str> {
        match self {
            Constraint::Atomic(a) => vec![a.clock.as_str()],
            Constraint::Difference { left, right, .. } => vec![left.as_str(), right.as_str()],
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Atomic(a) => write!(f, "{}{}{}", a.clock, a.relation.symbol(), a.constant),
            Constraint::Difference {
                left,
                right,
                relation,
                constant,
            } => write!(f, "{left}-{right}{}{constant}", relation.symbol()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub invariant: Vec<Constraint>,
}

/// An edge `source --guard, action, resets--> target`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Switch {
    pub source: String,
    pub guard: Vec<Constraint>,
    pub action: String,
    pub resets: Vec<String>,
    pub target: String,
}

/// A single-process timed automaton. Declaration order of every list is
/// significant and preserved.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimedAutomaton {
    /// System name (used only for serialization).
    pub name: String,
    /// Process name (used only for serialization).
    pub process: String,
    pub clocks: Vec<String>,
    pub alphabet: Vec<String>,
    pub locations: Vec<Location>,
    pub initial: String,
    pub switches: Vec<Switch>,
}

/// What a validation violation refers to.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Subject {
    Automaton,
    Clock(usize),
    Action(usize),
    Location(usize),
    Switch(usize),
}

/// A broken well-formedness rule.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Violation {
    pub subject: Subject,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Subject::Automaton => write!(f, "{}", self.rule),
            Subject::Clock(i) => write!(f, "clock #{i}: {}", self.rule),
            Subject::Action(i) => write!(f, "action #{i}: {}", self.rule),
            Subject::Location(i) => write!(f, "location #{i}: {}", self.rule),
            Subject::Switch(i) => write!(f, "switch #{i}: {}", self.rule),
        }
    }
}

impl TimedAutomaton {
    /// A named automaton with no declarations yet.
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        TimedAutomaton {
            process: name.clone(),
            name,
            clocks: Vec::new(),
            alphabet: Vec::new(),
            locations: Vec::new(),
            initial: String::new(),
            switches: Vec::new(),
        }
    }

    pub fn location_index(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.id == id)
    }

    pub fn clock_index(&self, id: &str) -> Option<usize> {
        self.clocks.iter().position(|c| c == id)
    }

    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }

    /// Check the well-formedness rules; violations are returned as data.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let mut push = |subject: Subject, rule: String| out.push(Violation { subject, rule });

        let mut seen = HashSet::new();
        for (i, c) in self.clocks.iter().enumerate() {
            if !seen.insert(c) {
                push(Subject::Clock(i), format!("duplicate clock {c}"));
            }
        }
        let mut seen = HashSet::new();
        for (i, a) in self.alphabet.iter().enumerate() {
            if !seen.insert(a) {
                push(Subject::Action(i), format!("duplicate action {a}"));
            }
            if self.clocks.contains(a) {
                push(Subject::Action(i), format!("{a} is both a clock and an action"));
            }
        }
        let mut seen = HashSet::new();
        for (i, l) in self.locations.iter().enumerate() {
            if !seen.insert(&l.id) {
                push(Subject::Location(i), format!("duplicate location {}", l.id));
            }
            self.check_constraints(&l.invariant, &mut |r| push(Subject::Location(i), r));
        }
        match self.location(&self.initial) {
            None => push(
                Subject::Automaton,
                format!("initial location {} is not declared", self.initial),
            ),
            Some(l) => {
                let zero = Rational64::from_integer(0);
                let ok = l.invariant.iter().all(|c| match c {
                    Constraint::Atomic(a) => a.relation.holds(zero, a.constant as i64),
                    Constraint::Difference { .. } => true,
                });
                if !ok {
                    let i = self.location_index(&l.id).unwrap();
                    push(
                        Subject::Location(i),
                        "initial invariant unsatisfied by zero valuation".to_string(),
                    );
                }
            }
        }
        for (i, s) in self.switches.iter().enumerate() {
            for end in [&s.source, &s.target] {
                if self.location(end).is_none() {
                    push(Subject::Switch(i), format!("undeclared location {end}"));
                }
            }
            if !self.alphabet.contains(&s.action) {
                push(Subject::Switch(i), format!("undeclared action {}", s.action));
            }
            for r in &s.resets {
                if !self.clocks.contains(r) {
                    push(Subject::Switch(i), format!("undeclared clock {r}"));
                }
            }
            self.check_constraints(&s.guard, &mut |r| push(Subject::Switch(i), r));
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    fn check_constraints(&self, cs: &[Constraint], push: &mut dyn FnMut(String)) {
        for c in cs {
            if matches!(c, Constraint::Difference { .. }) {
                push(format!("diagonal constraint {c}"));
            }
            for clock in c.clocks() {
                if !self.clocks.iter().any(|k| k == clock) {
                    push(format!("undeclared clock {clock}"));
                }
            }
        }
    }

    /// All `(clock, constant)` pairs mentioned in guards and invariants.
    fn constants(&self) -> impl Iterator<Item = (&str, i64)> {
        self.locations
            .iter()
            .flat_map(|l| l.invariant.iter())
            .chain(self.switches.iter().flat_map(|s| s.guard.iter()))
            .filter_map(|c| match c {
                Constraint::Atomic(a) => Some((a.clock.as_str(), a.constant as i64)),
                Constraint::Difference { .. } => None,
            })
    }

    /// Per-clock ceilings of this automaton alone: max constant + 1, min 1.
    pub fn ceilings(&self) -> Vec<i64> {
        self.clocks
            .iter()
            .map(|c| {
                self.constants()
                    .filter(|(k, _)| k == c)
                    .map(|(_, m)| m + 1)
                    .max()
                    .unwrap_or(1)
                    .max(1)
            })
            .collect()
    }

    /// Copy with clock `from` renamed to `to` everywhere.
    pub fn rename_clock(&self, from: &str, to: &str) -> TimedAutomaton {
        let mut t = self.clone();
        let rn = |s: &mut String| {
            if s == from {
                *s = to.to_string();
            }
        };
        let rc = |c: &mut Constraint| match c {
            Constraint::Atomic(a) => {
                if a.clock == from {
                    a.clock = to.to_string();
                }
            }
            Constraint::Difference { left, right, .. } => {
                if left == from {
                    *left = to.to_string();
                }
                if right == from {
                    *right = to.to_string();
                }
            }
        };
        t.clocks.iter_mut().for_each(rn);
        for l in &mut t.locations {
            l.invariant.iter_mut().for_each(rc);
        }
        for s in &mut t.switches {
            s.guard.iter_mut().for_each(rc);
            s.resets.iter_mut().for_each(rn);
        }
        t
    }
}

/// Rename clocks of `b` that collide with names used by `a` (or with any
/// action name) by appending a suffix, so the two clock sets are disjoint.
pub fn rename_apart(a: &TimedAutomaton, b: &TimedAutomaton) -> TimedAutomaton {
    let mut taken: HashSet<String> = a
        .clocks
        .iter()
        .chain(&a.alphabet)
        .chain(&b.clocks)
        .chain(&b.alphabet)
        .cloned()
        .collect();
    let mut out = b.clone();
    for c in &b.clocks {
        if !a.clocks.contains(c) && !a.alphabet.contains(c) {
            continue;
        }
        let mut n = 1;
        let fresh = loop {
            let cand = if n == 1 { format!("{c}_b") } else { format!("{c}_b{n}") };
            if !taken.contains(&cand) {
                break cand;
            }
            n += 1;
        };
        taken.insert(fresh.clone());
        out = out.rename_clock(c, &fresh);
    }
    out
}

/// Ceilings over the joint clock order `C_A ++ C_B`. This is simultaneously
/// the ceiling of each original clock and of its virtual partner: position `i`
/// belongs to `χ_i`.
pub fn k_function(a: &TimedAutomaton, b: &TimedAutomaton) -> KFunction {
    let mut ceilings = a.ceilings();
    ceilings.extend(b.ceilings());
    KFunction::new(ceilings)
}
