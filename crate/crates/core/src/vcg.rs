//! Virtual clock graphs: zone graphs of an automaton extended with the shared
//! virtual clocks `χ_0 … χ_{|C_A|+|C_B|-1}`.
//!
//! DBM layout of a context: column 0 is the reference clock, columns
//! `1 ..= n_orig` are the automaton's own clocks in declaration order and the
//! trailing `n_virt` columns are the virtual clocks. Original clock `i` of
//! side A is paired with `χ_i`; original clock `i` of side B with
//! `χ_{|C_A|+i}`. The graph is never materialized; successors are computed on
//! demand.

use crate::dbm::{Dbm, KFunction, Relation};
use crate::ta::{k_function, Constraint, TimedAutomaton};
use crate::vc::{extract_virtual_constraint, VirtualConstraint};

/// Which automaton a context belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// A regarding B.
    A,
    /// B regarding A.
    B,
}

/// A clock bound in DBM-column terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ColumnConstraint {
    pub column: usize,
    pub relation: Relation,
    pub constant: i64,
}

/// Intersect a zone with a conjunction of column constraints.
pub fn constrain_all(d: &Dbm, cs: &[ColumnConstraint]) -> Dbm {
    let mut d = d.clone();
    for c in cs {
        if d.is_empty() {
            break;
        }
        d = d.constrain(c.column, c.relation, c.constant);
    }
    d
}

/// A switch with clocks and locations resolved to indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledSwitch {
    /// Position in the automaton's switch list.
    pub id: usize,
    pub source: usize,
    pub guard: Vec<ColumnConstraint>,
    /// Index into the joint alphabet of both automata.
    pub action: usize,
    pub resets: Vec<usize>,
    pub target: usize,
}

/// A node of a virtual clock graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymbolicState {
    pub location: usize,
    pub zone: Dbm,
}

/// Synchronization status of a symbolic state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateClass {
    /// Every original clock equals its virtual partner.
    Synchronized,
    /// Every original clock equals its partner or is identically zero.
    SemiSynchronized,
    Neither,
}

/// One side of the analysis: an automaton lifted over the virtual clocks.
#[derive(Clone, Debug)]
pub struct VcgContext {
    pub side: Side,
    pub automaton: TimedAutomaton,
    /// Number of the automaton's own clocks.
    pub originals: usize,
    /// Number of virtual clocks (`|C_A| + |C_B|`).
    pub virtuals: usize,
    /// Index of this side's first partner among the virtual clocks.
    pub partner_offset: usize,
    /// Joint alphabet: A's actions in order, then B's additional ones.
    pub alphabet: Vec<String>,
    pub initial: usize,
    pub invariants: Vec<Vec<ColumnConstraint>>,
    pub switches: Vec<CompiledSwitch>,
    /// Ceilings for every DBM column of this context.
    pub k: KFunction,
    /// Ceilings of the virtual block alone.
    pub virtual_k: KFunction,
}

fn compile_constraints(ta: &TimedAutomaton, cs: &[Constraint]) -> Vec<ColumnConstraint> {
    cs.iter()
        .map(|c| match c {
            Constraint::Atomic(a) => ColumnConstraint {
                column: ta.clock_index(&a.clock).expect("validated clock") + 1,
                relation: a.relation,
                constant: a.constant as i64,
            },
            Constraint::Difference { .. } => panic!("difference constraints are rejected by validation"),
        })
        .collect()
}

impl VcgContext {
    fn new(
        side: Side,
        ta: &TimedAutomaton,
        partner_offset: usize,
        virtuals: usize,
        alphabet: &[String],
        joint_k: &KFunction,
    ) -> Self {
        let originals = ta.clocks.len();
        let loc = |id: &str| ta.location_index(id).expect("validated location");
        let switches = ta
            .switches
            .iter()
            .enumerate()
            .map(|(id, s)| CompiledSwitch {
                id,
                source: loc(&s.source),
                guard: compile_constraints(ta, &s.guard),
                action: alphabet.iter().position(|a| *a == s.action).expect("joint alphabet"),
                resets: s
                    .resets
                    .iter()
                    .map(|c| ta.clock_index(c).expect("validated clock") + 1)
                    .collect(),
                target: loc(&s.target),
            })
            .collect();
        let mut k = joint_k.ceilings[partner_offset..partner_offset + originals].to_vec();
        k.extend(&joint_k.ceilings);
        VcgContext {
            side,
            automaton: ta.clone(),
            originals,
            virtuals,
            partner_offset,
            alphabet: alphabet.to_vec(),
            initial: loc(&ta.initial),
            invariants: ta
                .locations
                .iter()
                .map(|l| compile_constraints(ta, &l.invariant))
                .collect(),
            switches,
            k: KFunction::new(k),
            virtual_k: joint_k.clone(),
        }
    }

    /// Total number of DBM clocks.
    pub fn dim(&self) -> usize {
        self.originals + self.virtuals
    }

    /// DBM column of the first virtual clock.
    pub fn split(&self) -> usize {
        self.originals + 1
    }

    /// DBM column of virtual clock `χ_i`.
    pub fn virtual_column(&self, i: usize) -> usize {
        self.split() + i
    }

    /// DBM column of the virtual partner of original column `c`.
    pub fn partner(&self, c: usize) -> usize {
        self.virtual_column(self.partner_offset + c - 1)
    }

    pub fn location_name(&self, l: usize) -> &str {
        &self.automaton.locations[l].id
    }

    pub fn initial_state(&self) -> SymbolicState {
        SymbolicState {
            location: self.initial,
            zone: Dbm::zero(self.dim()),
        }
    }

    pub fn with_invariant(&self, d: &Dbm, location: usize) -> Dbm {
        constrain_all(d, &self.invariants[location])
    }

    /// Delay successor: `future(D) ∧ I(l)`.
    pub fn epsilon_successor(&self, s: &SymbolicState) -> SymbolicState {
        SymbolicState {
            location: s.location,
            zone: self.with_invariant(&s.zone.future(), s.location),
        }
    }

    /// Non-empty successors through switches labelled `action` (joint
    /// alphabet index), in switch declaration order.
    pub fn action_successors(&self, s: &SymbolicState, action: usize) -> Vec<(usize, SymbolicState)> {
        self.switches
            .iter()
            .filter(|sw| sw.source == s.location && sw.action == action)
            .filter_map(|sw| {
                let guarded = constrain_all(&s.zone, &sw.guard);
                if guarded.is_empty() {
                    return None;
                }
                let zone = self.with_invariant(&guarded.reset(&sw.resets), sw.target);
                (!zone.is_empty()).then_some((
                    sw.id,
                    SymbolicState {
                        location: sw.target,
                        zone,
                    },
                ))
            })
            .collect()
    }

    pub fn classify(&self, d: &Dbm) -> StateClass {
        let mut semi = false;
        for c in 1..=self.originals {
            if d.ties(c, self.partner(c)) {
                continue;
            }
            if d.is_zero_clock(c) {
                semi = true;
            } else {
                return StateClass::Neither;
            }
        }
        if semi {
            StateClass::SemiSynchronized
        } else {
            StateClass::Synchronized
        }
    }

    /// Virtual clocks (as `χ` indices) whose partner is identically zero.
    pub fn zero_partners(&self, d: &Dbm) -> Vec<usize> {
        (1..=self.originals)
            .filter(|&c| d.is_zero_clock(c))
            .map(|c| self.partner_offset + c - 1)
            .collect()
    }

    pub fn virtual_constraint(&self, d: &Dbm) -> VirtualConstraint {
        extract_virtual_constraint(d, self.split())
    }

    /// Intersect the virtual block of `d` with `φ`.
    pub fn apply(&self, d: &Dbm, phi: &VirtualConstraint) -> Dbm {
        crate::vc::apply_vc(d, self.split(), phi)
    }

    /// Columns of the given virtual clocks.
    pub fn virtual_columns(&self, chis: &[usize]) -> Vec<usize> {
        chis.iter().map(|&i| self.virtual_column(i)).collect()
    }
}

/// Build both contexts. `b` must already use clock names disjoint from `a`.
pub fn make_contexts(a: &TimedAutomaton, b: &TimedAutomaton) -> (VcgContext, VcgContext) {
    let mut alphabet = a.alphabet.clone();
    for s in &b.alphabet {
        if !alphabet.contains(s) {
            alphabet.push(s.clone());
        }
    }
    let k = k_function(a, b);
    let virtuals = a.clocks.len() + b.clocks.len();
    (
        VcgContext::new(Side::A, a, 0, virtuals, &alphabet, &k),
        VcgContext::new(Side::B, b, a.clocks.len(), virtuals, &alphabet, &k),
    )
}

/// `extract_virtual(dB) ⊇ extract_virtual(dA)`.
pub fn virtually_includes(ca: &VcgContext, da: &Dbm, cb: &VcgContext, db: &Dbm) -> bool {
    cb.virtual_constraint(db).includes(&ca.virtual_constraint(da))
}

pub fn virtually_equivalent(ca: &VcgContext, da: &Dbm, cb: &VcgContext, db: &Dbm) -> bool {
    virtually_includes(ca, da, cb, db) && virtually_includes(cb, db, ca, da)
}

/// The virtual clocks reset by `sync`: partners of identically-zero originals
/// on either side, in ascending order.
pub fn sync_resets(ca: &VcgContext, sa: &SymbolicState, cb: &VcgContext, sb: &SymbolicState) -> Vec<usize> {
    let mut r = ca.zero_partners(&sa.zone);
    r.extend(cb.zero_partners(&sb.zone));
    r.sort_unstable();
    r.dedup();
    r
}

/// Re-synchronize a virtually equivalent pair of semi-synchronized states by
/// resetting the virtual partners of identically-zero originals.
///
/// # Panics
/// If either state is not semi-synchronized or the pair is not virtually
/// equivalent; both are caller contract violations.
pub fn sync_pair(
    ca: &VcgContext,
    sa: &SymbolicState,
    cb: &VcgContext,
    sb: &SymbolicState,
) -> (SymbolicState, SymbolicState) {
    assert!(
        ca.classify(&sa.zone) != StateClass::Neither && cb.classify(&sb.zone) != StateClass::Neither,
        "sync requires semi-synchronized states"
    );
    assert!(
        virtually_equivalent(ca, &sa.zone, cb, &sb.zone),
        "sync requires virtually equivalent states"
    );
    let r = sync_resets(ca, sa, cb, sb);
    if r.is_empty() {
        return (sa.clone(), sb.clone());
    }
    (
        SymbolicState {
            location: sa.location,
            zone: sa.zone.reset(&ca.virtual_columns(&r)),
        },
        SymbolicState {
            location: sb.location,
            zone: sb.zone.reset(&cb.virtual_columns(&r)),
        },
    )
}
