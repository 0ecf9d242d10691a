//! Timed bisimulation checking for diagonal-free timed automata.
//!
//! Two automata are compared on a *virtual clock graph*: each automaton is
//! extended with one virtual clock per clock of both automata, and the
//! symbolic states of the two graphs are paired up. Where the pairing fails,
//! the checker reports the offending valuations of the virtual clocks as a
//! disjoint set of [`VirtualConstraint`]s, pulled back to the initial states.
//!
//! Module overview:
//! - [`dbm`]: bounds, difference bound matrices and k-normalization.
//! - [`ta`]: the timed-automaton model and its well-formedness rules.
//! - [`parser`]: the textual automaton format (parse and serialize).
//! - [`vc`]: virtual constraints and disjoint set operations on them.
//! - [`vcg`]: symbolic states and successors of the virtual clock graph.
//! - [`revert`]: pulling contradictions back through transitions.
//! - [`checker`]: the bisimulation search.
//! - [`region`]: clock regions and an independent region-product oracle.

pub mod checker;
pub mod dbm;
pub mod parser;
pub mod region;
pub mod revert;
pub mod ta;
pub mod vc;
pub mod vcg;

pub use checker::{check_bisimilar, check_bisimilar_with, CheckError, CheckOptions, Checker, Verdict};
pub use dbm::{Bound, Dbm, KFunction, Relation};
pub use parser::{parse, serialize, ParseError, SourceSpan};
pub use region::{extract_regions, oracle_bisim, region_equivalent, OracleError};
pub use ta::{k_function, rename_apart, AtomicConstraint, Constraint, Location, Switch, TimedAutomaton, Violation};
pub use vc::{and_not, combine, VcSet, VirtualConstraint};
pub use vcg::{make_contexts, SymbolicState, VcgContext};
