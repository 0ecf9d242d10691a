//! Pulling contradictions backwards through action transitions, delays and
//! the sync step.

use crate::dbm::Dbm;
use crate::vc::{combine, VcSet, VirtualConstraint};
use crate::vcg::{constrain_all, sync_pair, sync_resets, ColumnConstraint, CompiledSwitch, SymbolicState, VcgContext};

/// Pre-image of `d_split ⊆ reset(d, r)` inside `d`, undoing the resets one
/// clock at a time in ascending column order:
/// `mr(d, s, ∅) = s` and `mr(d, s, r) = d ∩ free(mr(reset(d, {c}), s, r∖{c}), c)`
/// with `c = min r`.
pub fn multiple_reset(d: &Dbm, d_split: &Dbm, r: &[usize]) -> Dbm {
    let mut r = r.to_vec();
    r.sort_unstable();
    r.dedup();
    multiple_reset_sorted(d, d_split, &r)
}

fn multiple_reset_sorted(d: &Dbm, d_split: &Dbm, r: &[usize]) -> Dbm {
    match r.split_first() {
        None => d_split.clone(),
        Some((&c, rest)) => {
            let inner = multiple_reset_sorted(&d.reset(&[c]), d_split, rest);
            if inner.is_empty() {
                return inner;
            }
            d.intersect(&inner.free(c))
        }
    }
}

/// The part of the source zone `d_a` (as a virtual constraint) from which the
/// switch `(guard, resets, invariant)` leads into `φ_split`.
pub fn revert_action_trans(
    d_a: &Dbm,
    split: usize,
    guard: &[ColumnConstraint],
    resets: &[usize],
    invariant: &[ColumnConstraint],
    phi_split: &VirtualConstraint,
) -> VirtualConstraint {
    let enabled = constrain_all(d_a, guard);
    let target = constrain_all(&enabled.reset(resets), invariant);
    let target = crate::vc::apply_vc(&target, split, phi_split);
    if target.is_empty() {
        return VirtualConstraint::new(Dbm::empty(phi_split.dim()));
    }
    crate::vc::extract_virtual_constraint(&multiple_reset(&enabled, &target, resets), split)
}

/// [`revert_action_trans`] for a compiled switch of a context.
pub fn revert_switch(
    ctx: &VcgContext,
    d_a: &Dbm,
    switch: &CompiledSwitch,
    phi: &VirtualConstraint,
) -> VirtualConstraint {
    revert_action_trans(
        d_a,
        ctx.split(),
        &switch.guard,
        &switch.resets,
        &ctx.invariants[switch.target],
        phi,
    )
}

/// For each split of the delay target `d_eps`, the part of `d` that can delay
/// into it. Empty results are dropped.
pub fn revert_epsilon_trans(d: &Dbm, d_eps: &Dbm, split: usize, phi_splits: &[VirtualConstraint]) -> VcSet {
    phi_splits
        .iter()
        .filter_map(|phi| {
            let reached = crate::vc::apply_vc(d_eps, split, phi);
            if reached.is_empty() {
                return None;
            }
            let from = d.intersect(&reached.past());
            (!from.is_empty()).then(|| crate::vc::extract_virtual_constraint(&from, split))
        })
        .collect()
}

/// Translate constraints on the synchronized pair back to the pre-sync pair
/// `(s_a, s_b)`, combining the pre-images of both sides.
pub fn revert_sync(
    ca: &VcgContext,
    s_a: &SymbolicState,
    cb: &VcgContext,
    s_b: &SymbolicState,
    phis: &[VirtualConstraint],
) -> VcSet {
    if phis.is_empty() {
        return Vec::new();
    }
    let r = sync_resets(ca, s_a, cb, s_b);
    if r.is_empty() {
        return combine(phis);
    }
    let (e_a, e_b) = sync_pair(ca, s_a, cb, s_b);
    let (ra, rb) = (ca.virtual_columns(&r), cb.virtual_columns(&r));
    let mut out = Vec::new();
    for phi in phis {
        for (ctx, s, e, cols) in [(ca, s_a, &e_a, &ra), (cb, s_b, &e_b, &rb)] {
            let target = ctx.apply(&e.zone, phi);
            if target.is_empty() {
                continue;
            }
            let pre = multiple_reset(&s.zone, &target, cols);
            if !pre.is_empty() {
                out.push(ctx.virtual_constraint(&pre));
            }
        }
    }
    combine(&out)
}
