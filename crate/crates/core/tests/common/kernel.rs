//! Independent checks of the zone kernel: random operation sequences on
//! DBMs and random virtual-constraint pairs, each validated against the
//! pointwise definitions by sampling rational valuations.

use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::Rng;
use tabisim::region::extract_regions;
use tabisim::vc::{covers, same_union};
use tabisim::{and_not, combine, Bound, Dbm, KFunction, Relation, VirtualConstraint};

const RELATIONS: [Relation; 4] = [Relation::Lt, Relation::Le, Relation::Ge, Relation::Gt];

fn q(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

/// One step of a random DBM sequence.
#[derive(Clone, Debug)]
pub enum Op {
    Constrain(usize, Relation, i64),
    Difference(usize, usize, Bound),
    Future,
    Past,
    Reset(Vec<usize>),
    Free(usize),
    Intersect(Dbm),
    Normalize(KFunction),
}

/// Membership straight from the definition of a DBM: every entry bounds the
/// corresponding clock difference.
pub fn satisfies(d: &Dbm, v: &[Rational64]) -> bool {
    if d.is_empty() {
        return false;
    }
    let value = |i: usize| if i == 0 { q(0, 1) } else { v[i - 1] };
    for i in 0..=d.dim() {
        for j in 0..=d.dim() {
            if i == j {
                continue;
            }
            let diff = value(i) - value(j);
            let ok = match d.get(i, j) {
                Bound::Infinity => true,
                Bound::Weak(z) => diff <= q(z, 1),
                Bound::Strict(z) => diff < q(z, 1),
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// A point of a canonical non-empty zone, chosen clock by clock inside the
/// interval left open by the clocks chosen so far.
pub fn sample_point(rng: &mut impl Rng, d: &Dbm) -> Vec<Rational64> {
    assert!(!d.is_empty());
    let n = d.dim();
    let mut v: Vec<Rational64> = Vec::with_capacity(n);
    for i in 1..=n {
        // lower: v_i > or ≥ lo; upper: v_i < or ≤ hi.
        let mut lo = (q(0, 1), false);
        let mut hi: Option<(Rational64, bool)> = None;
        let mut tighten_lo = |value: Rational64, strict: bool| {
            if value > lo.0 || (value == lo.0 && strict) {
                lo = (value, strict);
            }
        };
        let lower_from = |b: Bound, base: Rational64| b.value().map(|z| (base - q(z, 1), b.is_strict()));
        if let Some((val, s)) = lower_from(d.get(0, i), q(0, 1)) {
            tighten_lo(val, s);
        }
        for j in 1..i {
            if let Some((val, s)) = lower_from(d.get(j, i), v[j - 1]) {
                tighten_lo(val, s);
            }
        }
        let mut tighten_hi = |b: Bound, base: Rational64| {
            if let Some(z) = b.value() {
                let val = base + q(z, 1);
                let better = match hi {
                    None => true,
                    Some((h, s)) => val < h || (val == h && b.is_strict() && !s),
                };
                if better {
                    hi = Some((val, b.is_strict()));
                }
            }
        };
        tighten_hi(d.get(i, 0), q(0, 1));
        for j in 1..i {
            tighten_hi(d.get(i, j), v[j - 1]);
        }
        let mut options = Vec::new();
        match hi {
            None => {
                if !lo.1 {
                    options.push(lo.0);
                }
                for step in [q(1, 3), q(1, 1), q(5, 2)] {
                    options.push(lo.0 + step);
                }
            }
            Some((h, hs)) => {
                assert!(
                    lo.0 < h || (lo.0 == h && !lo.1 && !hs),
                    "canonical zone has an empty slice"
                );
                if !lo.1 {
                    options.push(lo.0);
                }
                if !hs {
                    options.push(h);
                }
                if lo.0 < h {
                    options.push((lo.0 + h) / 2);
                    options.push(lo.0 + (h - lo.0) / 3);
                }
            }
        }
        v.push(*options.choose(rng).unwrap());
    }
    v
}

/// A valuation on a small grid, in or out of any particular zone.
pub fn grid_point(rng: &mut impl Rng, dim: usize, max: i64) -> Vec<Rational64> {
    (0..dim).map(|_| q(rng.gen_range(0..=4 * max), 4)).collect()
}

pub fn random_op(rng: &mut impl Rng, dim: usize, max: i64) -> Op {
    let clock = |rng: &mut dyn rand::RngCore| rng.gen_range(1..=dim);
    match rng.gen_range(0..8) {
        0 => Op::Constrain(clock(rng), *RELATIONS.choose(rng).unwrap(), rng.gen_range(0..=max)),
        1 if dim >= 2 => {
            let i = clock(rng);
            let j = (i % dim) + 1;
            let z = rng.gen_range(-max..=max);
            Op::Difference(
                i,
                j,
                if rng.gen_bool(0.5) {
                    Bound::Weak(z)
                } else {
                    Bound::Strict(z)
                },
            )
        }
        2 => Op::Future,
        3 => Op::Past,
        4 => Op::Reset((1..=dim).filter(|_| rng.gen_bool(0.5)).collect()),
        5 => Op::Free(clock(rng)),
        6 => Op::Intersect(random_zone(rng, dim, max)),
        _ => Op::Normalize(KFunction::new((0..dim).map(|_| rng.gen_range(0..=max)).collect())),
    }
}

/// A zone built from a few random atomic constraints, possibly after a delay.
pub fn random_zone(rng: &mut impl Rng, dim: usize, max: i64) -> Dbm {
    let mut d = if rng.gen_bool(0.5) {
        Dbm::zero(dim).future()
    } else {
        Dbm::universe(dim)
    };
    for _ in 0..rng.gen_range(0..=3) {
        d = d.constrain(
            rng.gen_range(1..=dim),
            *RELATIONS.choose(rng).unwrap(),
            rng.gen_range(0..=max),
        );
    }
    if dim >= 2 && rng.gen_bool(0.3) {
        let z = rng.gen_range(-max..=max);
        d = d.constrain_entry(1, 2, Bound::Weak(z));
    }
    d
}

fn apply(d: &Dbm, op: &Op) -> Dbm {
    match op {
        Op::Constrain(c, r, m) => d.constrain(*c, *r, *m),
        Op::Difference(i, j, b) => d.constrain_entry(*i, *j, *b),
        Op::Future => d.future(),
        Op::Past => d.past(),
        Op::Reset(r) => d.reset(r),
        Op::Free(c) => d.free(*c),
        Op::Intersect(e) => d.intersect(e),
        Op::Normalize(k) => d.k_normalize(k),
    }
}

fn holds(r: Relation, x: Rational64, m: i64) -> bool {
    let m = q(m, 1);
    match r {
        Relation::Lt => x < m,
        Relation::Le => x <= m,
        Relation::Ge => x >= m,
        Relation::Gt => x > m,
    }
}

/// Canonical form is a fixpoint of closure: rebuilding from the entries
/// changes nothing.
fn check_canonical(d: &Dbm) -> Result<(), String> {
    if d.is_empty() {
        return Ok(());
    }
    let n = d.dim();
    let entries = (0..=n)
        .flat_map(|i| (0..=n).map(move |j| (i, j)))
        .map(|(i, j)| d.get(i, j))
        .collect();
    if Dbm::from_entries(n, entries) != *d {
        return Err(format!("not canonical: {}", d.to_debug_string()));
    }
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                if d.get(i, j) > d.get(i, k) + d.get(k, j) {
                    return Err(format!("triangle ({i},{k},{j}) violated: {}", d.to_debug_string()));
                }
            }
        }
    }
    Ok(())
}

/// Every region of `norm` meets `d`: normalization only adds valuations
/// that are region equivalent to ones already present.
pub fn check_normalization_sound(d: &Dbm, norm: &Dbm, k: &KFunction) -> Result<(), String> {
    if !norm.includes(d) {
        return Err("normalization lost valuations".into());
    }
    if norm.k_normalize(k) != *norm {
        return Err("normalization is not idempotent".into());
    }
    for r in extract_regions(norm, k) {
        if r.intersect(d).is_empty() {
            return Err(format!(
                "region {} of the normalized zone misses {}",
                r.to_debug_string(),
                d.to_debug_string()
            ));
        }
    }
    Ok(())
}

/// Whether `v + sign·t` lies in `d` for some `t ≥ 0`, solved exactly: the
/// clock differences are unaffected by `t`, and each single-clock entry
/// bounds `t` from one side.
fn shift_reaches(d: &Dbm, v: &[Rational64], sign: i64) -> bool {
    let n = d.dim();
    for i in 1..=n {
        for j in 1..=n {
            if i != j && !d.get(i, j).admits(v[i - 1] - v[j - 1]) {
                return false;
            }
        }
    }
    let mut lo = (q(0, 1), false);
    let mut hi: Option<(Rational64, bool)> = None;
    let mut lower = |val: Rational64, strict: bool| {
        if val > lo.0 || (val == lo.0 && strict) {
            lo = (val, strict);
        }
    };
    let mut uppers = Vec::new();
    for i in 1..=n {
        let (up, down) = (d.get(i, 0), d.get(0, i));
        let vi = v[i - 1];
        if sign > 0 {
            // v_i + t ⊲ up, −v_i − t ⊲ down
            if let Some(z) = up.value() {
                uppers.push((q(z, 1) - vi, up.is_strict()));
            }
            if let Some(z) = down.value() {
                lower(-(q(z, 1) + vi), down.is_strict());
            }
        } else {
            // v_i − t ⊲ up, −v_i + t ⊲ down
            if let Some(z) = up.value() {
                lower(vi - q(z, 1), up.is_strict());
            }
            if let Some(z) = down.value() {
                uppers.push((q(z, 1) + vi, down.is_strict()));
            }
        }
    }
    for (val, strict) in uppers {
        let better = match hi {
            None => true,
            Some((h, s)) => val < h || (val == h && strict && !s),
        };
        if better {
            hi = Some((val, strict));
        }
    }
    match hi {
        None => true,
        Some((h, hs)) => lo.0 < h || (lo.0 == h && !lo.1 && !hs),
    }
}

/// Check one operation against the pointwise definition.
fn check_step(rng: &mut impl Rng, prev: &Dbm, op: &Op, next: &Dbm, max: i64) -> Result<(), String> {
    let fail = |what: &str, v: &[Rational64]| {
        Err(format!(
            "{op:?}: {what} at {v:?}\n  before {}\n  after  {}",
            prev.to_debug_string(),
            next.to_debug_string()
        ))
    };
    check_canonical(next)?;
    let dim = prev.dim();
    for _ in 0..8 {
        let v = grid_point(rng, dim, max + 1);
        if next.contains(&v) != satisfies(next, &v) {
            return fail("membership disagrees with the entries", &v);
        }
        let expected = match op {
            Op::Constrain(c, r, m) => Some(satisfies(prev, &v) && holds(*r, v[c - 1], *m)),
            Op::Difference(i, j, b) => Some(satisfies(prev, &v) && b.admits(v[i - 1] - v[j - 1])),
            Op::Intersect(e) => Some(satisfies(prev, &v) && satisfies(e, &v)),
            _ => None,
        };
        if let Some(e) = expected {
            if e != satisfies(next, &v) {
                return fail("result differs from the definition", &v);
            }
        }
    }
    if prev.is_empty() {
        return if next.is_empty() {
            Ok(())
        } else {
            fail("empty input gave a non-empty zone", &[])
        };
    }
    for _ in 0..6 {
        let u = sample_point(rng, prev);
        if !satisfies(prev, &u) {
            return fail("sampled point outside its zone", &u);
        }
        let images: Vec<Vec<Rational64>> = match op {
            Op::Future => [q(0, 1), q(1, 2), q(3, 1)]
                .iter()
                .map(|t| u.iter().map(|x| x + t).collect())
                .collect(),
            Op::Past => {
                let m = *u.iter().min().unwrap();
                [q(0, 1), m / 2, m]
                    .iter()
                    .map(|t| u.iter().map(|x| x - t).collect())
                    .collect()
            }
            Op::Reset(r) => {
                vec![u
                    .iter()
                    .enumerate()
                    .map(|(i, x)| if r.contains(&(i + 1)) { q(0, 1) } else { *x })
                    .collect()]
            }
            Op::Free(c) => [q(0, 1), q(1, 2), q(7, 1)]
                .iter()
                .map(|t| {
                    let mut w = u.clone();
                    w[c - 1] = *t;
                    w
                })
                .collect(),
            Op::Normalize(_) => vec![u.clone()],
            _ => Vec::new(),
        };
        for w in images {
            if !satisfies(next, &w) {
                return fail("image of a point is missing", &w);
            }
        }
    }
    if !next.is_empty() {
        for _ in 0..6 {
            let v = sample_point(rng, next);
            let explained = match op {
                Op::Reset(r) => r.iter().all(|c| v[c - 1] == q(0, 1)),
                Op::Past => shift_reaches(prev, &v, 1),
                Op::Future => shift_reaches(prev, &v, -1),
                _ => true,
            };
            if !explained {
                return fail("point of the result has no pre-image", &v);
            }
        }
    }
    if let Op::Normalize(k) = op {
        check_normalization_sound(prev, next, k)?;
    }
    Ok(())
}

/// Run a random sequence of `len` operations from a random start zone,
/// checking every step.
pub fn run_sequence(rng: &mut impl Rng, dim: usize, max: i64, len: usize) -> Result<(), String> {
    let mut d = if rng.gen_bool(0.5) {
        Dbm::zero(dim)
    } else {
        random_zone(rng, dim, max)
    };
    check_canonical(&d)?;
    for _ in 0..len {
        let op = random_op(rng, dim, max);
        let next = apply(&d, &op);
        check_step(rng, &d, &op, &next, max)?;
        d = next;
    }
    Ok(())
}

/// A random constraint over `dim` virtual clocks.
pub fn random_vc(rng: &mut impl Rng, dim: usize, max: i64) -> VirtualConstraint {
    VirtualConstraint::new(random_zone(rng, dim, max))
}

fn disjoint_nonempty(set: &[VirtualConstraint]) -> Result<(), String> {
    for (i, x) in set.iter().enumerate() {
        if x.is_empty() {
            return Err(format!("member {i} is empty"));
        }
        for y in &set[i + 1..] {
            if !x.and(y).is_empty() {
                return Err(format!("{x} and {y} overlap"));
            }
        }
    }
    Ok(())
}

/// `and_not(φ1, φ2)`: disjoint non-empty members inside `φ1` and outside
/// `φ2` that, together with `φ1 ∧ φ2`, cover `φ1`.
pub fn check_and_not(rng: &mut impl Rng, p1: &VirtualConstraint, p2: &VirtualConstraint) -> Result<(), String> {
    let out = and_not(p1, p2);
    let ctx = || format!("and_not({p1}, {p2}) = {out:?}");
    disjoint_nonempty(&out).map_err(|e| format!("{}: {e}", ctx()))?;
    for m in &out {
        if !p1.includes(m) || !m.and(p2).is_empty() {
            return Err(format!("{}: {m} not inside φ1 ∖ φ2", ctx()));
        }
    }
    let mut with_common = out.clone();
    with_common.push(p1.and(p2));
    if !covers(&with_common, p1) {
        return Err(format!("{}: union misses part of φ1", ctx()));
    }
    let dim = p1.dim();
    for _ in 0..10 {
        let v = if rng.gen_bool(0.5) && !p1.is_empty() {
            sample_point(rng, p1.zone())
        } else {
            grid_point(rng, dim, 5)
        };
        let expected = satisfies(p1.zone(), &v) && !satisfies(p2.zone(), &v);
        let got = out.iter().filter(|m| satisfies(m.zone(), &v)).count();
        if got != usize::from(expected) {
            return Err(format!("{}: {v:?} lies in {got} members", ctx()));
        }
    }
    Ok(())
}

/// `combine(xs)`: disjoint non-empty members with the same union as `xs`.
pub fn check_combine(rng: &mut impl Rng, xs: &[VirtualConstraint]) -> Result<(), String> {
    let out = combine(xs);
    let ctx = || format!("combine({xs:?}) = {out:?}");
    disjoint_nonempty(&out).map_err(|e| format!("{}: {e}", ctx()))?;
    let nonempty: Vec<VirtualConstraint> = xs.iter().filter(|x| !x.is_empty()).cloned().collect();
    if !same_union(&out, &nonempty) {
        return Err(format!("{}: union changed", ctx()));
    }
    let dim = xs[0].dim();
    for _ in 0..10 {
        let v = grid_point(rng, dim, 5);
        let inside = xs.iter().any(|x| satisfies(x.zone(), &v));
        let got = out.iter().filter(|m| satisfies(m.zone(), &v)).count();
        if got != usize::from(inside) {
            return Err(format!("{}: {v:?} lies in {got} members", ctx()));
        }
    }
    Ok(())
}

/// One random `and_not` pair and one random `combine` list of dimension
/// 1 to 3.
pub fn run_vc_pair(rng: &mut impl Rng) -> Result<(), String> {
    let dim = rng.gen_range(1..=3);
    let p1 = random_vc(rng, dim, 4);
    let p2 = random_vc(rng, dim, 4);
    check_and_not(rng, &p1, &p2)?;
    let xs: Vec<VirtualConstraint> = (0..rng.gen_range(1..=4)).map(|_| random_vc(rng, dim, 4)).collect();
    check_combine(rng, &xs)
}
