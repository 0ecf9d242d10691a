//! Clock regions and a brute-force region-product bisimulation oracle.
//!
//! The oracle is independent of the virtual-clock machinery: it explores the
//! product of both automata over the joint clock set `C_A ∪ C_B`, one region
//! at a time, and computes the greatest bisimulation on that finite graph.
//! It is meant for cross-validation at desk scale only.

use std::collections::HashMap;

use num_rational::Rational64;
use thiserror::Error;

use crate::dbm::{Bound, Dbm, KFunction, Relation};
use crate::ta::{k_function, rename_apart, Constraint, TimedAutomaton};

/// Largest joint clock count the oracle accepts.
pub const ORACLE_MAX_CLOCKS: usize = 4;
/// Largest constant the oracle accepts.
pub const ORACLE_MAX_CONSTANT: i64 = 4;
/// Largest product graph the oracle will build.
pub const ORACLE_MAX_NODES: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle limited to {ORACLE_MAX_CLOCKS} clocks and constants up to {ORACLE_MAX_CONSTANT}; got {clocks} clocks, constant {constant}")]
    TooLarge { clocks: usize, constant: i64 },
    #[error("product graph exceeds {ORACLE_MAX_NODES} nodes")]
    TooManyNodes,
    #[error("invalid automaton: {0}")]
    Invalid(String),
}

fn frac(q: Rational64) -> Rational64 {
    q - q.floor()
}

/// Region equivalence of two valuations under ceilings `k`.
pub fn region_equivalent(u: &[Rational64], v: &[Rational64], k: &KFunction) -> bool {
    assert_eq!(u.len(), v.len(), "valuation length mismatch");
    let n = u.len();
    let bounded = |w: &[Rational64], c: usize| w[c] <= Rational64::from_integer(k.ceilings[c]);
    for c in 0..n {
        match (bounded(u, c), bounded(v, c)) {
            (false, false) => continue,
            (true, true) => {
                if u[c].floor() != v[c].floor() || frac(u[c]).is_integer() != frac(v[c]).is_integer() {
                    return false;
                }
            }
            _ => return false,
        }
    }
    for c in 0..n {
        for d in 0..n {
            if c == d || !bounded(u, c) || !bounded(u, d) {
                continue;
            }
            if (frac(u[c]) <= frac(u[d])) != (frac(v[c]) <= frac(v[d])) {
                return false;
            }
        }
    }
    true
}

/// Split a zone so that every clock has a fixed integer part: `c = m`,
/// `m − 1 < c < m` for `m ≤ k(c)`, or `c > k(c)`.
pub fn split_clock_values(d: &Dbm, k: &KFunction) -> Vec<Dbm> {
    let mut zones = vec![d.clone()];
    if d.is_empty() {
        return Vec::new();
    }
    for c in 1..=d.dim() {
        let kc = k.at(c);
        let mut next = Vec::new();
        for z in &zones {
            let mut push = |piece: Dbm| {
                if !piece.is_empty() {
                    next.push(piece);
                }
            };
            push(z.constrain(c, Relation::Le, 0));
            for m in 1..=kc {
                push(z.constrain(c, Relation::Gt, m - 1).constrain(c, Relation::Lt, m));
                push(z.constrain(c, Relation::Ge, m).constrain(c, Relation::Le, m));
            }
            push(z.constrain(c, Relation::Gt, kc));
        }
        zones = next;
    }
    zones
}

/// Upper integer bound `m` of a clock lying strictly inside `(m−1, m)` with
/// `m ≤ k`, if it does.
fn fractional_ceiling(d: &Dbm, c: usize, k: &KFunction) -> Option<i64> {
    match (d.get(c, 0), d.get(0, c)) {
        (Bound::Strict(m), Bound::Strict(l)) if m <= k.at(c) && l == -(m - 1) => Some(m),
        _ => None,
    }
}

/// Split zones with fixed integer parts by the order of fractional parts of
/// every pair of clocks inside an open unit interval.
pub fn order_frac(d: &Dbm, k: &KFunction) -> Vec<Dbm> {
    let mut zones = vec![d.clone()];
    let fractional: Vec<(usize, i64)> = (1..=d.dim())
        .filter_map(|c| fractional_ceiling(d, c, k).map(|m| (c, m)))
        .collect();
    for (a, &(i, zi)) in fractional.iter().enumerate() {
        for &(j, zj) in &fractional[a + 1..] {
            let diff = zi - zj;
            let mut next = Vec::new();
            for z in &zones {
                for piece in [
                    z.constrain_entry(i, j, Bound::Weak(diff))
                        .constrain_entry(j, i, Bound::Weak(-diff)),
                    z.constrain_entry(i, j, Bound::Strict(diff)),
                    z.constrain_entry(j, i, Bound::Strict(-diff)),
                ] {
                    if !piece.is_empty() {
                        next.push(piece);
                    }
                }
            }
            zones = next;
        }
    }
    zones
}

/// Partition a zone into the regions (intersected with the zone) it meets.
pub fn extract_regions(d: &Dbm, k: &KFunction) -> Vec<Dbm> {
    split_clock_values(d, k).iter().flat_map(|z| order_frac(z, k)).collect()
}

/// Position of a clock inside a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    /// `c = m` with `m ≤ k(c)`.
    Integer(i64),
    /// `m − 1 < c < m` with `m ≤ k(c)`.
    Open(i64),
    /// `c > k(c)`.
    Above,
}

fn slot(d: &Dbm, c: usize, k: &KFunction) -> Slot {
    match (d.get(c, 0), d.get(0, c)) {
        (Bound::Weak(m), Bound::Weak(l)) if m == -l && m <= k.at(c) => Slot::Integer(m),
        (Bound::Strict(m), Bound::Strict(l)) if l == -(m - 1) && m <= k.at(c) => Slot::Open(m),
        (_, lower) if lower <= Bound::Strict(-k.at(c)) => Slot::Above,
        (u, l) => panic!("zone is not inside a single region: clock {c} has bounds {u} / {l}"),
    }
}

/// The full region containing a zone that lies inside one region.
///
/// Zones obtained by splitting may carry extra difference constraints between
/// clocks above their ceilings; those constraints are dropped so that every
/// region has exactly one representation.
pub fn region_of(d: &Dbm, k: &KFunction) -> Dbm {
    assert!(!d.is_empty(), "empty zone has no region");
    let n = d.dim();
    let slots: Vec<Slot> = (0..=n)
        .map(|c| if c == 0 { Slot::Integer(0) } else { slot(d, c, k) })
        .collect();
    let mut r = Dbm::universe(n);
    for (c, s) in slots.iter().enumerate().skip(1) {
        r = match *s {
            Slot::Integer(m) => r.constrain(c, Relation::Le, m).constrain(c, Relation::Ge, m),
            Slot::Open(m) => r.constrain(c, Relation::Lt, m).constrain(c, Relation::Gt, m - 1),
            Slot::Above => r.constrain(c, Relation::Gt, k.at(c)),
        };
    }
    for i in 1..=n {
        for j in 1..=n {
            if let (Slot::Open(zi), Slot::Open(zj)) = (slots[i], slots[j]) {
                let diff = zi - zj;
                let b = d.get(i, j);
                let tie = b == Bound::Weak(diff) && d.get(j, i) == Bound::Weak(-diff);
                if tie {
                    r = r.constrain_entry(i, j, Bound::Weak(diff));
                } else if b <= Bound::Strict(diff) {
                    r = r.constrain_entry(i, j, Bound::Strict(diff));
                }
            }
        }
    }
    debug_assert!(r.includes(d), "region must contain the zone");
    r
}

#[derive(Clone, Debug)]
struct OracleSwitch {
    source: usize,
    guard: Vec<(usize, Relation, i64)>,
    action: usize,
    resets: Vec<usize>,
    target: usize,
}

#[derive(Clone, Debug)]
struct OracleSide {
    invariants: Vec<Vec<(usize, Relation, i64)>>,
    switches: Vec<OracleSwitch>,
    initial: usize,
}

fn columns(ta: &TimedAutomaton, offset: usize, cs: &[Constraint]) -> Vec<(usize, Relation, i64)> {
    cs.iter()
        .map(|c| match c {
            Constraint::Atomic(a) => (
                offset + ta.clock_index(&a.clock).unwrap() + 1,
                a.relation,
                a.constant as i64,
            ),
            Constraint::Difference { .. } => unreachable!("validated"),
        })
        .collect()
}

impl OracleSide {
    fn new(ta: &TimedAutomaton, offset: usize, alphabet: &[String]) -> Self {
        let loc = |id: &str| ta.location_index(id).unwrap();
        OracleSide {
            invariants: ta.locations.iter().map(|l| columns(ta, offset, &l.invariant)).collect(),
            switches: ta
                .switches
                .iter()
                .map(|s| OracleSwitch {
                    source: loc(&s.source),
                    guard: columns(ta, offset, &s.guard),
                    action: alphabet.iter().position(|a| *a == s.action).unwrap(),
                    resets: s
                        .resets
                        .iter()
                        .map(|c| offset + ta.clock_index(c).unwrap() + 1)
                        .collect(),
                    target: loc(&s.target),
                })
                .collect(),
            initial: loc(&ta.initial),
        }
    }

    /// Regions are uniform w.r.t. constraints with constants below the
    /// ceilings, so satisfaction is decided by a single intersection.
    fn satisfies(region: &Dbm, cs: &[(usize, Relation, i64)]) -> bool {
        let mut d = region.clone();
        for &(c, r, m) in cs {
            d = d.constrain(c, r, m);
        }
        d == *region
    }

    /// Enabled `action` moves from `(location, region)`: (target, resets).
    fn moves(&self, location: usize, region: &Dbm, action: usize) -> Vec<(usize, Vec<usize>)> {
        self.switches
            .iter()
            .filter(|s| s.source == location && s.action == action && Self::satisfies(region, &s.guard))
            .filter(|s| Self::satisfies(&region.reset(&s.resets), &self.invariants[s.target]))
            .map(|s| (s.target, s.resets.clone()))
            .collect()
    }
}

type Node = (usize, usize, Dbm);

#[derive(Default)]
struct NodeInfo {
    /// A delay is possible on one side only.
    delay_mismatch: bool,
    delay_successors: Vec<usize>,
    /// Per action and A-move: the joint targets over all answering B-moves.
    a_moves: Vec<Vec<usize>>,
    /// Per action and B-move: the joint targets over all answering A-moves.
    b_moves: Vec<Vec<usize>>,
}

/// Decide timed bisimilarity of `a` and `b` on the region product graph.
/// `k` must hold ceilings for the joint clock order `C_A ++ C_B`; `None`
/// uses [`k_function`].
pub fn oracle_bisim(a: &TimedAutomaton, b: &TimedAutomaton, k: Option<&KFunction>) -> Result<bool, OracleError> {
    a.validate().map_err(|v| OracleError::Invalid(v[0].to_string()))?;
    b.validate().map_err(|v| OracleError::Invalid(v[0].to_string()))?;
    let b = rename_apart(a, b);
    let k = k.cloned().unwrap_or_else(|| k_function(a, &b));
    let dim = a.clocks.len() + b.clocks.len();
    let constant = k.max() - 1;
    if dim > ORACLE_MAX_CLOCKS || constant > ORACLE_MAX_CONSTANT {
        return Err(OracleError::TooLarge { clocks: dim, constant });
    }
    let mut alphabet = a.alphabet.clone();
    for s in &b.alphabet {
        if !alphabet.contains(s) {
            alphabet.push(s.clone());
        }
    }
    let sa = OracleSide::new(a, 0, &alphabet);
    let sb = OracleSide::new(&b, a.clocks.len(), &alphabet);

    let mut ids: HashMap<Node, usize> = HashMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut info: Vec<NodeInfo> = Vec::new();
    let mut intern = |n: Node, nodes: &mut Vec<Node>| -> Result<usize, OracleError> {
        if let Some(&id) = ids.get(&n) {
            return Ok(id);
        }
        if nodes.len() >= ORACLE_MAX_NODES {
            return Err(OracleError::TooManyNodes);
        }
        ids.insert(n.clone(), nodes.len());
        nodes.push(n);
        Ok(nodes.len() - 1)
    };
    intern((sa.initial, sb.initial, Dbm::zero(dim)), &mut nodes)?;
    let mut next = 0;
    while next < nodes.len() {
        let (la, lb, region) = nodes[next].clone();
        next += 1;
        let mut ni = NodeInfo::default();
        for r in extract_regions(&region.future(), &k) {
            let in_a = OracleSide::satisfies(&r, &sa.invariants[la]);
            let in_b = OracleSide::satisfies(&r, &sb.invariants[lb]);
            if in_a && in_b {
                ni.delay_successors
                    .push(intern((la, lb, region_of(&r, &k)), &mut nodes)?);
            } else if in_a != in_b {
                ni.delay_mismatch = true;
            }
        }
        for action in 0..alphabet.len() {
            let ma = sa.moves(la, &region, action);
            let mb = sb.moves(lb, &region, action);
            let mut joint = vec![vec![0usize; mb.len()]; ma.len()];
            for (i, (ta, ra)) in ma.iter().enumerate() {
                for (j, (tb, rb)) in mb.iter().enumerate() {
                    let mut r = ra.clone();
                    r.extend(rb);
                    joint[i][j] = intern((*ta, *tb, region_of(&region.reset(&r), &k)), &mut nodes)?;
                }
            }
            ni.a_moves.extend(joint.iter().cloned());
            ni.b_moves
                .extend((0..mb.len()).map(|j| joint.iter().map(|row| row[j]).collect::<Vec<_>>()));
        }
        info.push(ni);
    }

    let mut alive: Vec<bool> = info.iter().map(|n| !n.delay_mismatch).collect();
    loop {
        let mut changed = false;
        for id in 0..nodes.len() {
            if !alive[id] {
                continue;
            }
            let ni = &info[id];
            let ok = ni.delay_successors.iter().all(|&s| alive[s])
                && ni.a_moves.iter().all(|targets| targets.iter().any(|&t| alive[t]))
                && ni.b_moves.iter().all(|targets| targets.iter().any(|&t| alive[t]));
            if !ok {
                alive[id] = false;
                changed = true;
            }
        }
        if !changed {
            return Ok(alive[0]);
        }
    }
}
