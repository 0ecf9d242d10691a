//! Shared helpers for the integration tests: fixture loading and automaton
//! generators.

#![allow(dead_code)]

pub mod kernel;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use tabisim::{parse, Constraint, Location, Relation, Switch, TimedAutomaton};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture(name: &str) -> TimedAutomaton {
    parse(&fixture_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// The six example automata, `a1` … `a6`, in order.
pub fn examples() -> Vec<TimedAutomaton> {
    (1..=6).map(|i| fixture(&format!("a{i}.tck"))).collect()
}

/// Parametric automaton: `l0` (x ≤ p) offers `a` (reset x) to `l1` at any
/// time and `tau` (x ≥ p, reset x) to `l2`; `l1` and `l2` (both x ≤ 1) loop
/// on `tau` once x reaches 1.
pub fn synthetic(p: u32) -> TimedAutomaton {
    parse(&format!(
        "system:synthetic_{p}
clock:1:x
event:a
event:tau
process:P
location:P:l0{{initial: : invariant: x<={p}}}
location:P:l1{{invariant: x<=1}}
location:P:l2{{invariant: x<=1}}
edge:P:l0:l1:a{{do: x=0}}
edge:P:l0:l2:tau{{provided: x>={p} : do: x=0}}
edge:P:l1:l1:tau{{provided: x>=1 : do: x=0}}
edge:P:l2:l2:tau{{provided: x>=1 : do: x=0}}
"
    ))
    .expect("synthetic automaton parses")
}

/// A straight line of `len` switches `l_i → l_{i+1}` over clocks
/// `c_0 … c_len`; switch `i` is guarded by `c_i ≤ i + 1` and resets
/// `c_{i+1}`. Its plain zone graph branches at every location.
pub fn chain(len: usize) -> TimedAutomaton {
    let mut text = format!("system:chain_{len}\n");
    for i in 0..=len {
        text.push_str(&format!("clock:1:c{i}\n"));
    }
    text.push_str("event:a\nprocess:P\nlocation:P:l0{initial:}\n");
    for i in 1..=len {
        text.push_str(&format!("location:P:l{i}{{}}\n"));
    }
    for i in 0..len {
        text.push_str(&format!(
            "edge:P:l{i}:l{}:a{{provided: c{i}<={} : do: c{}=0}}\n",
            i + 1,
            i + 1,
            i + 1
        ));
    }
    parse(&text).expect("chain automaton parses")
}

const RELATIONS: [Relation; 4] = [Relation::Lt, Relation::Le, Relation::Ge, Relation::Gt];

/// Shape limits for random automata.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub locations: usize,
    pub clocks: usize,
    pub max_constant: u32,
    pub switches: usize,
    pub actions: usize,
}

pub const DESK: Shape = Shape {
    locations: 3,
    clocks: 2,
    max_constant: 3,
    switches: 4,
    actions: 2,
};

fn random_guard(rng: &mut impl Rng, clocks: &[String], max_constant: u32) -> Vec<Constraint> {
    let n = rng.gen_range(0..=clocks.len().min(2));
    (0..n)
        .map(|_| {
            Constraint::atomic(
                clocks.choose(rng).unwrap().clone(),
                *RELATIONS.choose(rng).unwrap(),
                rng.gen_range(0..=max_constant),
            )
        })
        .collect()
}

/// Upper-bound invariant that holds at the zero valuation.
fn random_invariant(rng: &mut impl Rng, clocks: &[String], max_constant: u32, initial: bool) -> Vec<Constraint> {
    if clocks.is_empty() || rng.gen_bool(0.6) {
        return Vec::new();
    }
    let rel = if rng.gen_bool(0.5) { Relation::Le } else { Relation::Lt };
    let low = if initial || rel == Relation::Lt { 1 } else { 0 };
    vec![Constraint::atomic(
        clocks.choose(rng).unwrap().clone(),
        rel,
        rng.gen_range(low.min(max_constant).max(low)..=max_constant.max(low)),
    )]
}

/// A random valid automaton within `shape`.
pub fn random_automaton(rng: &mut impl Rng, shape: Shape) -> TimedAutomaton {
    let clocks: Vec<String> = (0..rng.gen_range(1..=shape.clocks)).map(|i| format!("x{i}")).collect();
    let alphabet: Vec<String> = (0..shape.actions)
        .map(|i| ((b'a' + i as u8) as char).to_string())
        .collect();
    let n_loc = rng.gen_range(1..=shape.locations);
    let locations: Vec<Location> = (0..n_loc)
        .map(|i| Location {
            id: format!("l{i}"),
            invariant: random_invariant(rng, &clocks, shape.max_constant, i == 0),
        })
        .collect();
    let switches = (0..rng.gen_range(0..=shape.switches))
        .map(|_| Switch {
            source: format!("l{}", rng.gen_range(0..n_loc)),
            guard: random_guard(rng, &clocks, shape.max_constant),
            action: alphabet.choose(rng).unwrap().clone(),
            resets: clocks.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect(),
            target: format!("l{}", rng.gen_range(0..n_loc)),
        })
        .collect();
    let ta = TimedAutomaton {
        name: "random".into(),
        process: "P".into(),
        clocks,
        alphabet,
        locations,
        initial: "l0".into(),
        switches,
    };
    ta.validate().expect("generator produces valid automata");
    ta
}

/// A small random edit of `a`: one guard constant, relation or reset toggled.
pub fn mutate(rng: &mut impl Rng, a: &TimedAutomaton, max_constant: u32) -> TimedAutomaton {
    let mut b = a.clone();
    if b.switches.is_empty() {
        return b;
    }
    let i = rng.gen_range(0..b.switches.len());
    match rng.gen_range(0..3) {
        0 if !b.switches[i].guard.is_empty() => {
            if let Constraint::Atomic(g) = &mut b.switches[i].guard[0] {
                g.constant = rng.gen_range(0..=max_constant);
            }
        }
        1 if !b.switches[i].guard.is_empty() => {
            if let Constraint::Atomic(g) = &mut b.switches[i].guard[0] {
                g.relation = *RELATIONS.choose(rng).unwrap();
            }
        }
        _ => {
            let c = b.clocks.choose(rng).unwrap().clone();
            let r = &mut b.switches[i].resets;
            if let Some(p) = r.iter().position(|x| *x == c) {
                r.remove(p);
            } else {
                r.push(c);
            }
        }
    }
    b
}

/// `a` with its switches and locations listed in a shuffled order (same
/// automaton up to presentation).
pub fn shuffled(rng: &mut impl Rng, a: &TimedAutomaton) -> TimedAutomaton {
    let mut b = a.clone();
    b.switches.shuffle(rng);
    b.locations.shuffle(rng);
    b
}

/// A pair for differential testing: unrelated, mutated, or reshuffled.
pub fn random_pair(rng: &mut impl Rng, shape: Shape) -> (TimedAutomaton, TimedAutomaton) {
    let a = random_automaton(rng, shape);
    let b = match rng.gen_range(0..4) {
        0 => random_automaton(rng, shape),
        1 => shuffled(rng, &a),
        _ => mutate(rng, &a, shape.max_constant),
    };
    (a, b)
}
