//! Difference bound matrices: the zone kernel.
//!
//! A [`Dbm`] over `n` clocks is an `(n+1)×(n+1)` matrix of [`Bound`]s where
//! entry `(i, j)` encodes the constraint `c_i − c_j ≺ z`. Index 0 is the
//! reference clock, which is always zero, so `(i, 0)` is an upper bound on
//! `c_i` and `(0, j)` is a negated lower bound on `c_j`.
//!
//! Every public operation returns a canonical (shortest-path closed) matrix or
//! the distinguished empty zone. The empty zone has a single representation per
//! dimension, so structural equality coincides with set equality.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

/// One DBM entry: `c_i − c_j < z`, `c_i − c_j ≤ z` or no constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bound {
    /// `< z`
    Strict(i64),
    /// `≤ z`
    Weak(i64),
    /// `< ∞` (unconstrained); infinity is always strict.
    Infinity,
}

impl Bound {
    /// The neutral bound `≤ 0` found on the diagonal.
    pub const ZERO: Bound = Bound::Weak(0);

    /// Finite value of the bound, if any.
    pub fn value(self) -> Option<i64> {
        match self {
            Bound::Strict(z) | Bound::Weak(z) => Some(z),
            Bound::Infinity => None,
        }
    }

    pub fn is_strict(self) -> bool {
        !matches!(self, Bound::Weak(_))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Bound::Infinity)
    }

    /// The bound describing the complement of `x − y ≺ z`, expressed as a
    /// constraint on `y − x`: `¬(x − y < z) ⇔ y − x ≤ −z` and
    /// `¬(x − y ≤ z) ⇔ y − x < −z`. Returns `None` for infinity, whose
    /// complement is empty.
    pub fn complement(self) -> Option<Bound> {
        match self {
            Bound::Strict(z) => Some(Bound::Weak(-z)),
            Bound::Weak(z) => Some(Bound::Strict(-z)),
            Bound::Infinity => None,
        }
    }

    /// Whether a concrete difference `d` satisfies the bound.
    pub fn admits(self, d: Rational64) -> bool {
        match self {
            Bound::Strict(z) => d < Rational64::from_integer(z),
            Bound::Weak(z) => d <= Rational64::from_integer(z),
            Bound::Infinity => true,
        }
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Bound::Infinity, Bound::Infinity) => Ordering::Equal,
            (Bound::Infinity, _) => Ordering::Greater,
            (_, Bound::Infinity) => Ordering::Less,
            (a, b) => {
                let (za, zb) = (a.value().unwrap(), b.value().unwrap());
                za.cmp(&zb).then_with(|| match (a.is_strict(), b.is_strict()) {
                    (true, false) => Ordering::Less,
                    (false, true) => Ordering::Greater,
                    _ => Ordering::Equal,
                })
            }
        }
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Bound {
    type Output = Bound;

    fn add(self, rhs: Bound) -> Bound {
        match (self, rhs) {
            (Bound::Infinity, _) | (_, Bound::Infinity) => Bound::Infinity,
            (Bound::Weak(a), Bound::Weak(b)) => Bound::Weak(a + b),
            (a, b) => Bound::Strict(a.value().unwrap() + b.value().unwrap()),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Strict(z) => write!(f, "< {z}"),
            Bound::Weak(z) => write!(f, "<= {z}"),
            Bound::Infinity => write!(f, "< inf"),
        }
    }
}

/// Comparison operator of an atomic clock constraint `c ∼ m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    Lt,
    Le,
    Ge,
    Gt,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }

    /// Whether the value `v` satisfies `v ∼ m`.
    pub fn holds(self, v: Rational64, m: i64) -> bool {
        let m = Rational64::from_integer(m);
        match self {
            Relation::Lt => v < m,
            Relation::Le => v <= m,
            Relation::Ge => v >= m,
            Relation::Gt => v > m,
        }
    }
}

/// Per-clock ceilings used by k-normalization and region construction.
///
/// `ceilings[i]` is the ceiling of DBM clock `i + 1`; the reference clock
/// implicitly has ceiling 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KFunction {
    pub ceilings: Vec<i64>,
}

impl KFunction {
    pub fn new(ceilings: Vec<i64>) -> Self {
        KFunction { ceilings }
    }

    /// The same ceiling for each of `dim` clocks.
    pub fn uniform(dim: usize, k: i64) -> Self {
        KFunction { ceilings: vec![k; dim] }
    }

    /// Ceiling of DBM column `index` (0 is the reference clock).
    pub fn at(&self, index: usize) -> i64 {
        if index == 0 {
            0
        } else {
            self.ceilings[index - 1]
        }
    }

    pub fn dim(&self) -> usize {
        self.ceilings.len()
    }

    pub fn max(&self) -> i64 {
        self.ceilings.iter().copied().max().unwrap_or(0)
    }
}

/// Entries are stored encoded as `2z` (strict) or `2z + 1` (weak), with
/// `i64::MAX` for infinity, so that integer order is bound order.
const RAW_INF: i64 = i64::MAX;

fn encode(b: Bound) -> i64 {
    match b {
        Bound::Strict(z) => z << 1,
        Bound::Weak(z) => (z << 1) | 1,
        Bound::Infinity => RAW_INF,
    }
}

fn decode(r: i64) -> Bound {
    if r == RAW_INF {
        Bound::Infinity
    } else if r & 1 == 1 {
        Bound::Weak(r >> 1)
    } else {
        Bound::Strict(r >> 1)
    }
}

/// Sum of two encoded bounds: weak only if both are weak.
#[inline]
fn raw_add(a: i64, b: i64) -> i64 {
    if a == RAW_INF || b == RAW_INF {
        RAW_INF
    } else {
        a + b - ((a | b) & 1)
    }
}

const RAW_ZERO: i64 = 1;

/// A zone over `dim` clocks, always kept canonical (or empty).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dbm {
    dim: usize,
    entries: Vec<i64>,
    empty: bool,
}

impl Dbm {
    fn filled(dim: usize, b: Bound) -> Self {
        let n = dim + 1;
        Dbm {
            dim,
            entries: vec![encode(b); n * n],
            empty: false,
        }
    }

    /// The singleton zone containing only the all-zero valuation.
    pub fn zero(dim: usize) -> Self {
        Dbm::filled(dim, Bound::ZERO)
    }

    /// All non-negative valuations.
    pub fn universe(dim: usize) -> Self {
        let mut d = Dbm::filled(dim, Bound::Infinity);
        for i in 0..=dim {
            d.set(i, i, Bound::ZERO);
            d.set(0, i, Bound::ZERO);
        }
        d
    }

    /// The empty zone of the given dimension.
    pub fn empty(dim: usize) -> Self {
        let mut d = Dbm::filled(dim, Bound::Strict(0));
        d.empty = true;
        d
    }

    /// Build a zone from raw entries (row-major, `(dim+1)²` of them) and
    /// canonicalize. Diagonal entries are forced to at most `≤ 0`.
    pub fn from_entries(dim: usize, entries: Vec<Bound>) -> Self {
        assert_eq!(entries.len(), (dim + 1) * (dim + 1), "entry count mismatch");
        let mut d = Dbm {
            dim,
            entries: entries.into_iter().map(encode).collect(),
            empty: false,
        };
        for i in 0..=dim {
            if d.get(i, i) > Bound::ZERO {
                d.set(i, i, Bound::ZERO);
            }
            if d.get(0, i) > Bound::ZERO {
                d.set(0, i, Bound::ZERO);
            }
        }
        d.canonicalize()
    }

    /// Number of clocks, excluding the reference clock.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Entry `(i, j)`: the bound on `c_i − c_j`.
    pub fn get(&self, i: usize, j: usize) -> Bound {
        decode(self.entries[i * (self.dim + 1) + j])
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, b: Bound) {
        let n = self.dim + 1;
        self.entries[i * n + j] = encode(b);
    }

    fn mark_empty(&mut self) {
        *self = Dbm::empty(self.dim);
    }

    /// Floyd–Warshall closure. Yields the empty zone iff a negative cycle
    /// exists.
    pub fn canonicalize(mut self) -> Dbm {
        if self.empty {
            return self;
        }
        let n = self.dim + 1;
        let e = &mut self.entries;
        for k in 0..n {
            for i in 0..n {
                let ik = e[i * n + k];
                if ik == RAW_INF {
                    continue;
                }
                for j in 0..n {
                    let kj = e[k * n + j];
                    if kj == RAW_INF {
                        continue;
                    }
                    let via = ik + kj - ((ik | kj) & 1);
                    if via < e[i * n + j] {
                        e[i * n + j] = via;
                    }
                }
            }
            for i in 0..n {
                if e[i * n + i] < RAW_ZERO {
                    self.mark_empty();
                    return self;
                }
            }
        }
        self
    }

    /// Whether every entry is already triangle-tight.
    pub fn is_canonical(&self) -> bool {
        self.empty || self.clone().canonicalize() == *self
    }

    /// Tighten entry `(i, j)` to `b` and restore canonical form in O(n²).
    pub fn constrain_entry(&self, i: usize, j: usize, b: Bound) -> Dbm {
        let mut d = self.clone();
        d.tighten(i, j, b);
        d
    }

    fn tighten(&mut self, i: usize, j: usize, b: Bound) {
        let n = self.dim + 1;
        let b = encode(b);
        if self.empty || b >= self.entries[i * n + j] {
            return;
        }
        if raw_add(b, self.entries[j * n + i]) < RAW_ZERO {
            self.mark_empty();
            return;
        }
        let e = &mut self.entries;
        e[i * n + j] = b;
        for k in 0..n {
            let ki = e[k * n + i];
            if ki == RAW_INF {
                continue;
            }
            let kij = raw_add(ki, b);
            for l in 0..n {
                let via = raw_add(kij, e[j * n + l]);
                if via < e[k * n + l] {
                    e[k * n + l] = via;
                }
            }
        }
    }

    /// Intersect with the atomic constraint `c_clock ∼ m` (clock index ≥ 1).
    pub fn constrain(&self, clock: usize, relation: Relation, m: i64) -> Dbm {
        assert!(clock >= 1 && clock <= self.dim, "clock index out of range");
        match relation {
            Relation::Lt => self.constrain_entry(clock, 0, Bound::Strict(m)),
            Relation::Le => self.constrain_entry(clock, 0, Bound::Weak(m)),
            Relation::Ge => self.constrain_entry(0, clock, Bound::Weak(-m)),
            Relation::Gt => self.constrain_entry(0, clock, Bound::Strict(-m)),
        }
    }

    /// Entry-wise intersection of two zones of equal dimension.
    pub fn intersect(&self, other: &Dbm) -> Dbm {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        if self.empty || other.empty {
            return Dbm::empty(self.dim);
        }
        let mut d = self.clone();
        let mut changed = false;
        for (e, o) in d.entries.iter_mut().zip(&other.entries) {
            if *o < *e {
                *e = *o;
                changed = true;
            }
        }
        if changed {
            d.canonicalize()
        } else {
            d
        }
    }

    /// Delay closure: removes every upper bound on single clocks.
    pub fn future(&self) -> Dbm {
        let mut d = self.clone();
        if d.empty {
            return d;
        }
        for i in 1..=d.dim {
            d.set(i, 0, Bound::Infinity);
        }
        d
    }

    /// Backward delay closure: `{u | ∃δ ≥ 0. u + δ ∈ D}`.
    pub fn past(&self) -> Dbm {
        let mut d = self.clone();
        if d.empty {
            return d;
        }
        for i in 1..=d.dim {
            let mut lower = Bound::ZERO;
            for j in 1..=d.dim {
                let b = d.get(j, i);
                if b < lower {
                    lower = b;
                }
            }
            d.set(0, i, lower);
        }
        d
    }

    /// Set every clock in `clocks` to zero.
    pub fn reset(&self, clocks: &[usize]) -> Dbm {
        let mut d = self.clone();
        if d.empty {
            return d;
        }
        for &c in clocks {
            assert!(c >= 1 && c <= d.dim, "clock index out of range");
            for j in 0..=d.dim {
                let row = d.get(0, j);
                let col = d.get(j, 0);
                d.set(c, j, row);
                d.set(j, c, col);
            }
            d.set(c, c, Bound::ZERO);
        }
        d
    }

    /// Release clock `c`: `{[c ↦ δ]u | u ∈ D, δ ≥ 0}`.
    pub fn free(&self, c: usize) -> Dbm {
        assert!(c >= 1 && c <= self.dim, "clock index out of range");
        let mut d = self.clone();
        if d.empty {
            return d;
        }
        for j in 0..=d.dim {
            if j != c {
                d.set(c, j, Bound::Infinity);
                let col = d.get(j, 0);
                d.set(j, c, col);
            }
        }
        d.set(0, c, Bound::ZERO);
        d
    }

    /// `inner ⊆ outer`, decided entry-wise on canonical forms.
    pub fn includes(&self, inner: &Dbm) -> bool {
        assert_eq!(self.dim, inner.dim, "dimension mismatch");
        if inner.empty {
            return true;
        }
        if self.empty {
            return false;
        }
        inner.entries.iter().zip(&self.entries).all(|(i, o)| i <= o)
    }

    /// The smallest zone containing both operands (entry-wise maximum of
    /// the canonical forms, which is canonical again).
    pub fn hull(&self, other: &Dbm) -> Dbm {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        if self.empty {
            return other.clone();
        }
        if other.empty {
            return self.clone();
        }
        Dbm {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| *a.max(b))
                .collect(),
            empty: false,
        }
    }

    /// k-normalization (extrapolation) with per-clock ceilings.
    ///
    /// Upper bounds above the row clock's ceiling are dropped and lower bounds
    /// below the negated column clock's ceiling are relaxed to `< −k`. A clock
    /// whose lower bound already exceeds its ceiling keeps only that lower
    /// bound: every difference entry in its row and column is dropped too.
    /// Without that last rule re-canonicalization can push such a lower bound
    /// back up through a difference entry, and repeated normalization would
    /// never settle. The result is re-canonicalized; the rules are re-applied
    /// until the matrix is stable, so normalization is idempotent.
    pub fn k_normalize(&self, k: &KFunction) -> Dbm {
        assert_eq!(k.dim(), self.dim, "ceiling count mismatch");
        let mut d = self.clone();
        if d.empty {
            return d;
        }
        loop {
            let next = d.extrapolate_once(k).canonicalize();
            if next == d {
                return d;
            }
            d = next;
        }
    }

    fn extrapolate_once(&self, k: &KFunction) -> Dbm {
        let above = |c: usize| c != 0 && self.get(0, c) < Bound::Weak(-k.at(c));
        let mut d = self.clone();
        for i in 0..=self.dim {
            for j in 0..=self.dim {
                if i == j {
                    continue;
                }
                let b = self.get(i, j);
                let Some(z) = b.value() else { continue };
                let relaxed = if i == 0 && above(j) {
                    Bound::Strict(-k.at(j))
                } else if z > k.at(i) || above(i) || above(j) {
                    Bound::Infinity
                } else if z < -k.at(j) {
                    Bound::Strict(-k.at(j))
                } else {
                    b
                };
                d.set(i, j, relaxed);
            }
        }
        d
    }

    /// Sub-matrix over the reference clock and the given clock columns
    /// (in the given order). Canonical when `self` is.
    pub fn project(&self, clocks: &[usize]) -> Dbm {
        if self.empty {
            return Dbm::empty(clocks.len());
        }
        let idx: Vec<usize> = std::iter::once(0).chain(clocks.iter().copied()).collect();
        let mut d = Dbm::filled(clocks.len(), Bound::ZERO);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                d.set(a, b, self.get(i, j));
            }
        }
        d
    }

    /// Sub-matrix over the reference clock and the trailing clocks starting at
    /// column `split`.
    pub fn extract_virtual(&self, split: usize) -> Dbm {
        assert!(split >= 1 && split <= self.dim + 1, "split out of range");
        let clocks: Vec<usize> = (split..=self.dim).collect();
        self.project(&clocks)
    }

    /// Intersect the block `[0] ∪ [offset, offset + block.dim)` with `block`.
    pub fn intersect_block(&self, offset: usize, block: &Dbm) -> Dbm {
        assert!(offset >= 1 && offset + block.dim <= self.dim + 1, "block out of range");
        if self.empty || block.empty {
            return Dbm::empty(self.dim);
        }
        let map = |a: usize| if a == 0 { 0 } else { offset + a - 1 };
        let mut d = self.clone();
        let mut changed = false;
        let (n, bn) = (self.dim + 1, block.dim + 1);
        for a in 0..bn {
            for b in 0..bn {
                let (i, j) = (map(a), map(b));
                let nb = block.entries[a * bn + b];
                if nb < d.entries[i * n + j] {
                    d.entries[i * n + j] = nb;
                    changed = true;
                }
            }
        }
        if changed {
            d.canonicalize()
        } else {
            d
        }
    }

    /// Membership of a valuation (one value per clock, reference excluded).
    pub fn contains(&self, valuation: &[Rational64]) -> bool {
        assert_eq!(valuation.len(), self.dim, "valuation length mismatch");
        if self.empty {
            return false;
        }
        let value = |i: usize| {
            if i == 0 {
                Rational64::from_integer(0)
            } else {
                valuation[i - 1]
            }
        };
        (0..=self.dim).all(|i| (0..=self.dim).all(|j| i == j || self.get(i, j).admits(value(i) - value(j))))
    }

    /// Whether clock `c` is identically zero in the zone.
    pub fn is_zero_clock(&self, c: usize) -> bool {
        !self.empty && self.get(c, 0) == Bound::ZERO && self.get(0, c) == Bound::ZERO
    }

    /// Whether clocks `a` and `b` are equal in every member valuation.
    pub fn ties(&self, a: usize, b: usize) -> bool {
        !self.empty && self.get(a, b) == Bound::ZERO && self.get(b, a) == Bound::ZERO
    }

    /// Debug serialization: one `ci - cj ≺ z` line per non-trivial entry in
    /// row-major order; `empty` for the empty zone.
    pub fn to_debug_string(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Dbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return writeln!(f, "empty");
        }
        for i in 0..=self.dim {
            for j in 0..=self.dim {
                let b = self.get(i, j);
                if i == j || b.is_infinite() || (i == 0 && b == Bound::ZERO) {
                    continue;
                }
                writeln!(f, "c{i} - c{j} {b}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Dbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return write!(f, "Dbm(dim={}, empty)", self.dim);
        }
        write!(f, "Dbm(dim={}; ", self.dim)?;
        let mut first = true;
        for i in 0..=self.dim {
            for j in 0..=self.dim {
                let b = self.get(i, j);
                if i == j || b.is_infinite() || (i == 0 && b == Bound::ZERO) {
                    continue;
                }
                if !first {
                    write!(f, ", ")?;
                }
                first = false;
                write!(f, "c{i}-c{j} {b}")?;
            }
        }
        write!(f, ")")
    }
}
