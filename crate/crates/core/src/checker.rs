//! The bisimulation decision procedure over a pair of virtual clock graphs.
//!
//! Both the unbounded check (with the delay shortcut that keeps alternating
//! delay/action sequences linear) and the bounded check of a given order are
//! provided. Contradictions are virtual constraints describing initial
//! configurations that have no bisimilar partner.
//!
//! The unbounded check shares work between paths: every normalized
//! synchronized pair is evaluated once, and re-evaluated only when the
//! contradictions established for a pair it reads grow (a worklist fixpoint
//! starting from "no contradictions"). The bounded check keeps a visited set
//! local to the current path.

use std::collections::{HashMap, HashSet, VecDeque};
use std::time::Instant;

use log::{info, trace};
use serde_json::json;
use thiserror::Error;

use crate::dbm::Dbm;
use crate::revert::{revert_epsilon_trans, revert_switch, revert_sync};
use crate::ta::{rename_apart, TimedAutomaton, Violation};
use crate::vc::{
    and_not, combine, conjoin_sets, covers, merge_convex, norm_vc, render_set, restrict, VcSet, VirtualConstraint,
};
use crate::vcg::{make_contexts, sync_pair, virtually_equivalent, SymbolicState, VcgContext};

/// Default bound on the number of visited pairs.
pub const DEFAULT_MAX_VISITED: u64 = 10_000_000;

/// Stack reserved for the recursive search; depth grows with the number of
/// distinct normalized pairs along one path.
const SEARCH_STACK_BYTES: usize = 1 << 30;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    /// `Some(n)` runs the bounded check of order `n`.
    pub order: Option<usize>,
    /// k-normalize visited keys and contradictions (disable only to observe
    /// non-termination in tests).
    pub normalize: bool,
    /// Abort once more than this many pairs have been visited.
    pub max_visited: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            order: None,
            normalize: true,
            max_visited: DEFAULT_MAX_VISITED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("automaton {which} is invalid: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { which: char, violations: Vec<Violation> },
    #[error("visited-pair limit of {0} exceeded")]
    VisitedLimit(u64),
    #[error("transition matching made no progress: {0}")]
    NoProgress(String),
}

/// Result of a top-level check.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub bisimilar: bool,
    pub contradictions: VcSet,
    /// Number of pair evaluations: entries into the bounded check's visited
    /// set, or evaluations and re-evaluations of pairs in the unbounded check.
    pub pairs_visited: u64,
    /// Deepest recursion reached.
    pub max_depth: usize,
    pub millis: f64,
}

impl Verdict {
    /// JSON form; `millis` is included only on request so that output is
    /// reproducible byte for byte.
    pub fn to_json(&self, with_millis: bool) -> serde_json::Value {
        let mut v = json!({
            "bisimilar": self.bisimilar,
            "contradictions": render_set(&self.contradictions),
            "pairs_visited": self.pairs_visited,
        });
        if with_millis {
            v["millis"] = json!(self.millis);
        }
        v
    }
}

type VisitedKey = (usize, Dbm, usize, Dbm);

/// A normalized synchronized pair of the unbounded check.
#[derive(Clone, Debug)]
struct Node {
    a: SymbolicState,
    b: SymbolicState,
    value: VcSet,
    readers: HashSet<usize>,
    queued: bool,
}

/// How deep recursive calls may go.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Budget {
    Unbounded,
    Order(usize),
}

type Transitions = [(usize, SymbolicState)];

/// Search state for one query over a fixed pair of contexts.
pub struct Checker<'c> {
    ca: &'c VcgContext,
    cb: &'c VcgContext,
    options: CheckOptions,
    /// Pairs on the current path of the bounded check.
    visited: HashSet<VisitedKey>,
    /// Dense ids of the normalized pairs met by the unbounded check.
    ids: HashMap<VisitedKey, usize>,
    /// Per id: a representative synchronized pair, the contradictions
    /// established for it so far and the ids whose evaluation read them.
    nodes: Vec<Node>,
    /// Ids currently being evaluated, innermost last.
    evaluating: Vec<usize>,
    /// Ids whose evaluation is stale because something they read grew.
    worklist: VecDeque<usize>,
    /// Whether some established contradiction grew since the flag was reset.
    grew: bool,
    pairs_visited: u64,
    depth: usize,
    max_depth: usize,
}

impl<'c> Checker<'c> {
    pub fn new(ca: &'c VcgContext, cb: &'c VcgContext, options: CheckOptions) -> Self {
        Checker {
            ca,
            cb,
            options,
            visited: HashSet::new(),
            ids: HashMap::new(),
            nodes: Vec::new(),
            evaluating: Vec::new(),
            worklist: VecDeque::new(),
            grew: false,
            pairs_visited: 0,
            depth: 0,
            max_depth: 0,
        }
    }

    pub fn pairs_visited(&self) -> u64 {
        self.pairs_visited
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Mark a pair as being on the current path of the bounded check.
    pub fn mark_visited(&mut self, a: &SymbolicState, b: &SymbolicState) {
        let key = self.key(a, b);
        self.visited.insert(key);
    }

    fn key(&self, a: &SymbolicState, b: &SymbolicState) -> VisitedKey {
        if self.options.normalize {
            (
                a.location,
                a.zone.k_normalize(&self.ca.k),
                b.location,
                b.zone.k_normalize(&self.cb.k),
            )
        } else {
            (a.location, a.zone.clone(), b.location, b.zone.clone())
        }
    }

    fn count_visit(&mut self) -> Result<(), CheckError> {
        self.pairs_visited += 1;
        if self.pairs_visited > self.options.max_visited {
            return Err(CheckError::VisitedLimit(self.options.max_visited));
        }
        Ok(())
    }

    /// Insert into the bounded check's visited set; `false` if already present.
    fn enter(&mut self, key: &VisitedKey) -> Result<bool, CheckError> {
        if self.visited.contains(key) {
            return Ok(false);
        }
        self.visited.insert(key.clone());
        self.count_visit()?;
        Ok(true)
    }

    /// Contradictions of the action moves of a synchronized pair in the
    /// unbounded check, before reverting the sync.
    ///
    /// Each normalized pair is evaluated once when first met, reading the
    /// contradictions currently established for the pairs it reaches (none
    /// for pairs still being evaluated). Whenever a pair's contradictions
    /// grow, the pairs that read them are queued for re-evaluation; see
    /// [`Checker::check_for_virt_bisim`]. Every evaluation yields genuine
    /// contradictions, so the established sets only grow and the iteration
    /// reaches a fixpoint.
    fn solve_actions(&mut self, ea: &SymbolicState, eb: &SymbolicState) -> Result<VcSet, CheckError> {
        let key = self.key(ea, eb);
        let fresh = self.nodes.len();
        let id = *self.ids.entry(key).or_insert(fresh);
        if id == fresh {
            self.nodes.push(Node {
                a: ea.clone(),
                b: eb.clone(),
                value: Vec::new(),
                readers: HashSet::new(),
                queued: false,
            });
        }
        if let Some(&reader) = self.evaluating.last() {
            self.nodes[id].readers.insert(reader);
        }
        if id == fresh {
            self.evaluate(id)?;
        }
        Ok(self.nodes[id].value.clone())
    }

    /// (Re-)evaluate the action moves of a pair, enlarging its established
    /// contradictions and queueing its readers if they grow.
    fn evaluate(&mut self, id: usize) -> Result<(), CheckError> {
        self.count_visit()?;
        let (ea, eb) = (self.nodes[id].a.clone(), self.nodes[id].b.clone());
        self.evaluating.push(id);
        let result = self.check_actions(&ea, &eb, Budget::Unbounded);
        self.evaluating.pop();
        let result = self.normalize_set(result?);
        let node = &mut self.nodes[id];
        if result.iter().all(|c| covers(&node.value, c)) {
            return Ok(());
        }
        node.value.extend(result);
        node.value = merge_convex(combine(&node.value));
        self.grew = true;
        trace!(
            "contradictions of ({}, {}) grew to {}",
            self.ca.location_name(ea.location),
            self.cb.location_name(eb.location),
            self.nodes[id].value.len()
        );
        let readers: Vec<usize> = self.nodes[id].readers.iter().copied().collect();
        for r in readers {
            if !self.nodes[r].queued {
                self.nodes[r].queued = true;
                self.worklist.push_back(r);
            }
        }
        Ok(())
    }

    /// Re-evaluate queued pairs until none is stale.
    fn drain(&mut self) -> Result<(), CheckError> {
        while let Some(id) = self.worklist.pop_front() {
            self.nodes[id].queued = false;
            self.evaluate(id)?;
        }
        Ok(())
    }

    fn two_sided_difference(&self, a: &SymbolicState, b: &SymbolicState) -> VcSet {
        let va = self.ca.virtual_constraint(&a.zone);
        let vb = self.cb.virtual_constraint(&b.zone);
        let mut out = and_not(&va, &vb);
        out.extend(and_not(&vb, &va));
        out
    }

    fn recurse(&mut self, a: &SymbolicState, b: &SymbolicState, budget: Budget) -> Result<VcSet, CheckError> {
        self.depth += 1;
        self.max_depth = self.max_depth.max(self.depth);
        let r = match budget {
            Budget::Unbounded => self.virt_bisim(a, b),
            Budget::Order(n) => self.check_for_virt_bisim_in_order(a, b, n),
        };
        self.depth -= 1;
        r
    }

    /// Unbounded check of a pair of semi-synchronized states.
    ///
    /// Explores from the pair, then re-evaluates stale pairs until the
    /// established contradictions stop growing, and finally reads the answer
    /// for the pair off the fixpoint.
    pub fn check_for_virt_bisim(&mut self, sa: &SymbolicState, sb: &SymbolicState) -> Result<VcSet, CheckError> {
        if !self.evaluating.is_empty() {
            return self.virt_bisim(sa, sb);
        }
        loop {
            self.grew = false;
            let result = self.virt_bisim(sa, sb)?;
            self.drain()?;
            if !self.grew {
                return Ok(result);
            }
        }
    }

    fn virt_bisim(&mut self, sa: &SymbolicState, sb: &SymbolicState) -> Result<VcSet, CheckError> {
        let (ca, cb) = (self.ca, self.cb);
        trace!(
            "depth {}: ({}, {}) unbounded",
            self.depth,
            ca.location_name(sa.location),
            cb.location_name(sb.location)
        );
        if !virtually_equivalent(ca, &sa.zone, cb, &sb.zone) {
            return Ok(self.two_sided_difference(sa, sb));
        }
        let (ea, eb) = sync_pair(ca, sa, cb, sb);
        let eps_a = ca.epsilon_successor(&ea);
        let eps_b = cb.epsilon_successor(&eb);
        if ea.zone != eps_a.zone || eb.zone != eps_b.zone {
            let res = self.recurse(&eps_a, &eps_b, Budget::Unbounded)?;
            let contra = self.revert_delays(&ea, &eps_a, &eb, &eps_b, &res);
            return Ok(revert_sync(ca, sa, cb, sb, &contra));
        }
        let c = self.solve_actions(&ea, &eb)?;
        Ok(revert_sync(ca, sa, cb, sb, &c))
    }

    /// Bounded check of order `n`.
    pub fn check_for_virt_bisim_in_order(
        &mut self,
        sa: &SymbolicState,
        sb: &SymbolicState,
        n: usize,
    ) -> Result<VcSet, CheckError> {
        let (ca, cb) = (self.ca, self.cb);
        trace!(
            "depth {}: ({}, {}) order {n}",
            self.depth,
            ca.location_name(sa.location),
            cb.location_name(sb.location)
        );
        if n == 0 || !virtually_equivalent(ca, &sa.zone, cb, &sb.zone) {
            return Ok(self.two_sided_difference(sa, sb));
        }
        let (ea, eb) = sync_pair(ca, sa, cb, sb);
        let key = self.key(&ea, &eb);
        if !self.enter(&key)? {
            return Ok(Vec::new());
        }
        let result = self.bounded_body(sa, sb, &ea, &eb, n - 1);
        self.visited.remove(&key);
        result
    }

    fn bounded_body(
        &mut self,
        sa: &SymbolicState,
        sb: &SymbolicState,
        ea: &SymbolicState,
        eb: &SymbolicState,
        next: usize,
    ) -> Result<VcSet, CheckError> {
        let eps_a = self.ca.epsilon_successor(ea);
        let eps_b = self.cb.epsilon_successor(eb);
        let res = self.recurse(&eps_a, &eps_b, Budget::Order(next))?;
        let sync_cond = self.revert_delays(ea, &eps_a, eb, &eps_b, &res);
        if !sync_cond.is_empty() {
            return Ok(revert_sync(self.ca, sa, self.cb, sb, &sync_cond));
        }
        let c = self.check_actions(ea, eb, Budget::Order(next))?;
        Ok(revert_sync(self.ca, sa, self.cb, sb, &c))
    }

    fn revert_delays(
        &self,
        ea: &SymbolicState,
        eps_a: &SymbolicState,
        eb: &SymbolicState,
        eps_b: &SymbolicState,
        res: &[VirtualConstraint],
    ) -> VcSet {
        let (ca, cb) = (self.ca, self.cb);
        let mut contra = revert_epsilon_trans(
            &ea.zone,
            &eps_a.zone,
            ca.split(),
            &restrict(res, &ca.virtual_constraint(&eps_a.zone)),
        );
        contra.extend(revert_epsilon_trans(
            &eb.zone,
            &eps_b.zone,
            cb.split(),
            &restrict(res, &cb.virtual_constraint(&eps_b.zone)),
        ));
        combine(&contra)
    }

    /// Contradictions of the first action whose moves cannot be matched,
    /// expressed on the synchronized pair.
    fn check_actions(&mut self, ea: &SymbolicState, eb: &SymbolicState, budget: Budget) -> Result<VcSet, CheckError> {
        for action in 0..self.ca.alphabet.len() {
            let ta = self.ca.action_successors(ea, action);
            let tb = self.cb.action_successors(eb, action);
            let c = self.check_outgoing_transitions(ea, eb, &ta, &tb, budget)?;
            if !c.is_empty() {
                trace!("contradiction on action {}", self.ca.alphabet[action]);
                return Ok(c);
            }
        }
        Ok(Vec::new())
    }

    /// k-normalize (when enabled) and make disjoint.
    fn normalize_set(&self, set: VcSet) -> VcSet {
        if self.options.normalize {
            merge_convex(combine(
                &set.iter().map(|c| norm_vc(c, &self.ca.virtual_k)).collect::<Vec<_>>(),
            ))
        } else {
            merge_convex(combine(&set))
        }
    }

    fn normalize_target(&self, ctx: &VcgContext, d: &Dbm) -> VirtualConstraint {
        if self.options.normalize {
            ctx.virtual_constraint(&d.k_normalize(&ctx.k))
        } else {
            ctx.virtual_constraint(d)
        }
    }

    /// Match the σ-successors of two synchronized states against each other.
    fn check_outgoing_transitions(
        &mut self,
        ea: &SymbolicState,
        eb: &SymbolicState,
        ta: &Transitions,
        tb: &Transitions,
        budget: Budget,
    ) -> Result<VcSet, CheckError> {
        let (ca, cb) = (self.ca, self.cb);
        if ta.is_empty() && tb.is_empty() {
            return Ok(Vec::new());
        }
        if ta.is_empty() || tb.is_empty() {
            let mut out = Vec::new();
            for (id, s) in ta {
                out.push(revert_switch(
                    ca,
                    &ea.zone,
                    &ca.switches[*id],
                    &ca.virtual_constraint(&s.zone),
                ));
            }
            for (id, s) in tb {
                out.push(revert_switch(
                    cb,
                    &eb.zone,
                    &cb.switches[*id],
                    &cb.virtual_constraint(&s.zone),
                ));
            }
            return Ok(combine(&out));
        }
        let (m, n) = (ta.len(), tb.len());
        let mut found: Vec<Vec<VcSet>> = vec![vec![Vec::new(); n]; m];
        let mut finished = vec![vec![false; n]; m];
        let mut sweeps = 0usize;
        loop {
            sweeps += 1;
            let mut grew = false;
            for i in 0..m {
                for j in 0..n {
                    if finished[i][j] {
                        continue;
                    }
                    let (sa, sb) = (&ta[i].1, &tb[j].1);
                    let eq_a = ca.apply(&sa.zone, &cb.virtual_constraint(&sb.zone));
                    let eq_b = cb.apply(&sb.zone, &ca.virtual_constraint(&sa.zone));
                    let cont = if eq_a.is_empty() || eq_b.is_empty() {
                        Vec::new()
                    } else {
                        self.check_target_pair(
                            &SymbolicState {
                                location: sa.location,
                                zone: eq_a,
                            },
                            &SymbolicState {
                                location: sb.location,
                                zone: eq_b,
                            },
                            &found[i][j],
                            budget,
                        )?
                    };
                    finished[i][j] = cont.is_empty();
                    if cont.iter().any(|c| !covers(&found[i][j], c)) {
                        grew = true;
                    }
                    found[i][j].extend(cont);
                }
            }
            let c = self.search_contradiction(ea, eb, ta, tb, &found);
            if !c.is_empty() {
                return Ok(c);
            }
            if self.no_contradiction_possible(ea, eb, ta, tb, &found, &finished) {
                return Ok(Vec::new());
            }
            if !grew {
                return Err(CheckError::NoProgress(format!(
                    "{m}x{n} transition matrix at ({}, {}) unchanged after sweep {sweeps}",
                    ca.location_name(ea.location),
                    cb.location_name(eb.location)
                )));
            }
        }
    }

    /// Check the part of a target pair not yet covered by `found`.
    fn check_target_pair(
        &mut self,
        sa: &SymbolicState,
        sb: &SymbolicState,
        found: &[VirtualConstraint],
        budget: Budget,
    ) -> Result<VcSet, CheckError> {
        let (ca, cb) = (self.ca, self.cb);
        let mut without = vec![ca.virtual_constraint(&sa.zone)];
        for f in found {
            without = without.iter().flat_map(|x| and_not(x, f)).collect();
        }
        let mut contradictions = Vec::new();
        for phi in &without {
            let a = SymbolicState {
                location: sa.location,
                zone: ca.apply(&sa.zone, phi),
            };
            let b = SymbolicState {
                location: sb.location,
                zone: cb.apply(&sb.zone, phi),
            };
            contradictions.extend(self.recurse(&a, &b, budget)?);
        }
        Ok(self.normalize_set(contradictions))
    }

    /// Revert, for every transition, the part of its target that no partner
    /// transition can answer.
    fn search_contradiction(
        &self,
        ea: &SymbolicState,
        eb: &SymbolicState,
        ta: &Transitions,
        tb: &Transitions,
        found: &[Vec<VcSet>],
    ) -> VcSet {
        let (ca, cb) = (self.ca, self.cb);
        let mut out = Vec::new();
        for (i, (id, s)) in ta.iter().enumerate() {
            let va = ca.virtual_constraint(&s.zone);
            let cells: Vec<VcSet> = tb
                .iter()
                .enumerate()
                .map(|(j, (_, t))| {
                    let mut c = found[i][j].clone();
                    c.extend(and_not(&va, &cb.virtual_constraint(&t.zone)));
                    c
                })
                .collect();
            for phi in find_contradiction(&va, &cells) {
                let r = revert_switch(ca, &ea.zone, &ca.switches[*id], &phi);
                if !r.is_empty() {
                    out.push(r);
                }
            }
        }
        for (j, (id, t)) in tb.iter().enumerate() {
            let vb = cb.virtual_constraint(&t.zone);
            let cells: Vec<VcSet> = ta
                .iter()
                .enumerate()
                .map(|(i, (_, s))| {
                    let mut c = found[i][j].clone();
                    c.extend(and_not(&vb, &ca.virtual_constraint(&s.zone)));
                    c
                })
                .collect();
            for phi in find_contradiction(&vb, &cells) {
                let r = revert_switch(cb, &eb.zone, &cb.switches[*id], &phi);
                if !r.is_empty() {
                    out.push(r);
                }
            }
        }
        combine(&out)
    }

    /// Whether no contradiction can arise even if every unfinished cell ends
    /// up covering its whole (normalized) target intersection.
    fn no_contradiction_possible(
        &self,
        ea: &SymbolicState,
        eb: &SymbolicState,
        ta: &Transitions,
        tb: &Transitions,
        found: &[Vec<VcSet>],
        finished: &[Vec<bool>],
    ) -> bool {
        let pessimistic: Vec<Vec<VcSet>> = (0..ta.len())
            .map(|i| {
                (0..tb.len())
                    .map(|j| {
                        if finished[i][j] {
                            return found[i][j].clone();
                        }
                        let c = self
                            .normalize_target(self.ca, &ta[i].1.zone)
                            .and(&self.normalize_target(self.cb, &tb[j].1.zone));
                        if c.is_empty() {
                            Vec::new()
                        } else {
                            vec![c]
                        }
                    })
                    .collect()
            })
            .collect();
        self.search_contradiction(ea, eb, ta, tb, &pessimistic).is_empty()
    }
}

/// The part of `v` lying in every cell's union: `v ∧ ⋀_j ⋁ cells[j]`.
fn find_contradiction(v: &VirtualConstraint, cells: &[VcSet]) -> VcSet {
    let mut result = vec![v.clone()];
    for cell in cells {
        result = conjoin_sets(&result, cell);
        if result.is_empty() {
            return result;
        }
    }
    combine(&result)
}

/// Decide timed bisimilarity of `a` and `b` with default options.
pub fn check_bisimilar(a: &TimedAutomaton, b: &TimedAutomaton) -> Result<Verdict, CheckError> {
    check_bisimilar_with(a, b, &CheckOptions::default())
}

/// Decide timed bisimilarity of `a` and `b`.
pub fn check_bisimilar_with(
    a: &TimedAutomaton,
    b: &TimedAutomaton,
    options: &CheckOptions,
) -> Result<Verdict, CheckError> {
    a.validate()
        .map_err(|violations| CheckError::Invalid { which: 'A', violations })?;
    b.validate()
        .map_err(|violations| CheckError::Invalid { which: 'B', violations })?;
    let b = rename_apart(a, b);
    let (ca, cb) = make_contexts(a, &b);
    let start = Instant::now();
    let outcome = std::thread::scope(|scope| {
        std::thread::Builder::new()
            .name("bisim-search".into())
            .stack_size(SEARCH_STACK_BYTES)
            .spawn_scoped(scope, || {
                let mut checker = Checker::new(&ca, &cb, options.clone());
                let (sa, sb) = (ca.initial_state(), cb.initial_state());
                let result = match options.order {
                    Some(n) => checker.check_for_virt_bisim_in_order(&sa, &sb, n),
                    None => checker.check_for_virt_bisim(&sa, &sb),
                };
                (result, checker.pairs_visited(), checker.max_depth())
            })
            .expect("spawn search thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    });
    let (result, pairs_visited, max_depth) = outcome;
    let contradictions = result?;
    let millis = start.elapsed().as_secs_f64() * 1000.0;
    info!(
        "{} vs {}: {} contradiction(s), {pairs_visited} pairs, depth {max_depth}, {millis:.2} ms",
        a.name,
        b.name,
        contradictions.len()
    );
    Ok(Verdict {
        bisimilar: contradictions.is_empty(),
        contradictions,
        pairs_visited,
        max_depth,
        millis,
    })
}
