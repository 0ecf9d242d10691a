//! Virtual constraints: canonical zones over the virtual clocks only.
//!
//! These are the unit in which the checker reports where two automata differ.
//! A [`VcSet`] is a disjunction; sets produced by [`and_not`] and [`combine`]
//! are pairwise disjoint and free of empty members.

use std::fmt;

use crate::dbm::{Bound, Dbm, KFunction};

/// A canonical zone whose clocks are exactly the virtual block `χ_0 … χ_{n-1}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VirtualConstraint {
    zone: Dbm,
}

/// A disjunction of virtual constraints, in production order.
pub type VcSet = Vec<VirtualConstraint>;

impl VirtualConstraint {
    /// Wrap a zone over virtual clocks (canonicalized on the way in).
    pub fn new(zone: Dbm) -> Self {
        VirtualConstraint {
            zone: zone.canonicalize(),
        }
    }

    /// The constraint satisfied by every virtual valuation.
    pub fn top(dim: usize) -> Self {
        VirtualConstraint {
            zone: Dbm::universe(dim),
        }
    }

    pub fn zone(&self) -> &Dbm {
        &self.zone
    }

    pub fn dim(&self) -> usize {
        self.zone.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.zone.is_empty()
    }

    pub fn and(&self, other: &VirtualConstraint) -> VirtualConstraint {
        VirtualConstraint {
            zone: self.zone.intersect(&other.zone),
        }
    }

    pub fn includes(&self, other: &VirtualConstraint) -> bool {
        self.zone.includes(&other.zone)
    }
}

/// Virtual part of a zone whose virtual block starts at DBM column `split`.
pub fn extract_virtual_constraint(d: &Dbm, split: usize) -> VirtualConstraint {
    VirtualConstraint {
        zone: d.extract_virtual(split),
    }
}

/// Intersect the virtual block (starting at column `split`) of `d` with `φ`.
pub fn apply_vc(d: &Dbm, split: usize, phi: &VirtualConstraint) -> Dbm {
    d.intersect_block(split, &phi.zone)
}

/// k-normalization of a virtual constraint with the virtual ceilings.
pub fn norm_vc(phi: &VirtualConstraint, k: &KFunction) -> VirtualConstraint {
    VirtualConstraint {
        zone: phi.zone.k_normalize(k),
    }
}

/// `φ1 ∧ ¬φ2` as a disjoint set of non-empty constraints.
///
/// The atoms of `φ2` that are strictly tighter than `φ1`'s are visited in
/// row-major order; member `j` keeps atoms `1 … j−1` and negates atom `j`.
/// Atoms not tighter than `φ1` cannot exclude any point of `φ1` and are
/// skipped.
pub fn and_not(phi1: &VirtualConstraint, phi2: &VirtualConstraint) -> VcSet {
    assert_eq!(phi1.dim(), phi2.dim(), "dimension mismatch");
    if phi1.is_empty() {
        return Vec::new();
    }
    if phi2.is_empty() || phi1.and(phi2).is_empty() {
        return vec![phi1.clone()];
    }
    let n = phi1.dim();
    let mut out = Vec::new();
    let mut current = phi1.zone.clone();
    for i in 0..=n {
        for j in 0..=n {
            if i == j {
                continue;
            }
            let atom = phi2.zone.get(i, j);
            if atom >= current.get(i, j) {
                continue;
            }
            let negated = atom.complement().expect("tighter atom is finite");
            let outside = current.constrain_entry(j, i, negated);
            if !outside.is_empty() {
                out.push(VirtualConstraint { zone: outside });
            }
            current = current.constrain_entry(i, j, atom);
            if current.is_empty() {
                return out;
            }
        }
    }
    out
}

/// Rewrite a list of constraints into a disjoint set with the same union.
pub fn combine(vcs: &[VirtualConstraint]) -> VcSet {
    let mut result: VcSet = Vec::new();
    for phi in vcs {
        if phi.is_empty() {
            continue;
        }
        let mut rest = vec![phi.clone()];
        for r in &result {
            rest = rest.iter().flat_map(|x| and_not(x, r)).collect();
            if rest.is_empty() {
                break;
            }
        }
        result.extend(rest);
    }
    result
}

/// Merge members of a disjoint set whose union is convex, until no two
/// members can be merged. The union is unchanged and the result stays
/// disjoint.
pub fn merge_convex(set: VcSet) -> VcSet {
    let mut set = set;
    let mut merged = true;
    while merged {
        merged = false;
        'scan: for i in 0..set.len() {
            for j in i + 1..set.len() {
                let hull = VirtualConstraint {
                    zone: set[i].zone.hull(&set[j].zone),
                };
                let rest: VcSet = and_not(&hull, &set[i])
                    .iter()
                    .flat_map(|r| and_not(r, &set[j]))
                    .collect();
                if rest.is_empty() {
                    set[i] = hull;
                    set.swap_remove(j);
                    merged = true;
                    break 'scan;
                }
            }
        }
    }
    set
}

/// `{x ∧ y | x ∈ xs, y ∈ ys}` without empty members.
pub fn conjoin_sets(xs: &[VirtualConstraint], ys: &[VirtualConstraint]) -> VcSet {
    let mut out = Vec::new();
    for x in xs {
        for y in ys {
            let c = x.and(y);
            if !c.is_empty() {
                out.push(c);
            }
        }
    }
    out
}

/// `{x ∧ φ | x ∈ xs}` without empty members.
pub fn restrict(xs: &[VirtualConstraint], phi: &VirtualConstraint) -> VcSet {
    conjoin_sets(xs, std::slice::from_ref(phi))
}

/// Whether the union of `xs` covers `phi`.
pub fn covers(xs: &[VirtualConstraint], phi: &VirtualConstraint) -> bool {
    let mut rest = vec![phi.clone()];
    for x in xs {
        rest = rest.iter().flat_map(|r| and_not(r, x)).collect();
        if rest.is_empty() {
            return true;
        }
    }
    rest.is_empty()
}

/// Whether two sets denote the same union of valuations.
pub fn same_union(xs: &[VirtualConstraint], ys: &[VirtualConstraint]) -> bool {
    xs.iter().all(|x| covers(ys, x)) && ys.iter().all(|y| covers(xs, y))
}

fn name(i: usize) -> String {
    format!("χ{}", i - 1)
}

fn lower_text(b: Bound) -> Option<String> {
    match b {
        Bound::Weak(0) | Bound::Infinity => None,
        Bound::Weak(z) => Some(format!("{} ≤ ", -z)),
        Bound::Strict(z) => Some(format!("{} < ", -z)),
    }
}

fn upper_text(b: Bound) -> Option<String> {
    match b {
        Bound::Infinity => None,
        Bound::Weak(z) => Some(format!(" ≤ {z}")),
        Bound::Strict(z) => Some(format!(" < {z}")),
    }
}

impl fmt::Display for VirtualConstraint {
    /// Readable conjunction: clocks that are equal in every member are grouped
    /// as `χa = χb`, followed by their common bounds; difference atoms implied
    /// by single-clock bounds are omitted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = &self.zone;
        if d.is_empty() {
            return write!(f, "false");
        }
        let n = d.dim();
        let mut rep: Vec<usize> = (0..=n).collect();
        for i in 1..=n {
            for j in 1..i {
                if rep[j] == j && d.ties(i, j) {
                    rep[i] = j;
                    break;
                }
            }
        }
        let mut atoms = Vec::new();
        for i in 1..=n {
            if rep[i] != i {
                continue;
            }
            let class: Vec<String> = (i..=n).filter(|&j| rep[j] == i).map(name).collect();
            let chain = class.join(" = ");
            let (up, lo) = (d.get(i, 0), d.get(0, i));
            let exact = match (up, lo) {
                (Bound::Weak(u), Bound::Weak(l)) if u == -l => Some(u),
                _ => None,
            };
            let text = if let Some(v) = exact {
                format!("{chain} = {v}")
            } else {
                match (lower_text(lo), upper_text(up)) {
                    (None, None) if class.len() == 1 => continue,
                    (lo, up) => format!("{}{chain}{}", lo.unwrap_or_default(), up.unwrap_or_default()),
                }
            };
            atoms.push(text);
        }
        for i in 1..=n {
            for j in 1..=n {
                if i == j || rep[i] != i || rep[j] != j {
                    continue;
                }
                let b = d.get(i, j);
                if b.is_infinite() || b == d.get(i, 0) + d.get(0, j) {
                    continue;
                }
                let op = if b.is_strict() { "<" } else { "≤" };
                atoms.push(format!("{} - {} {op} {}", name(i), name(j), b.value().unwrap()));
            }
        }
        if atoms.is_empty() {
            write!(f, "true")
        } else {
            write!(f, "{}", atoms.join(" ∧ "))
        }
    }
}

impl fmt::Debug for VirtualConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

/// Render a set as JSON-ready strings.
pub fn render_set(set: &[VirtualConstraint]) -> Vec<String> {
    set.iter().map(|v| v.to_string()).collect()
}
