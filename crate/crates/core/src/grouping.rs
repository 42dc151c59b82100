//! Sliding-window assembly of trilateration groups.
//!
//! A window is anchored at every measurement's send time and collects the
//! target's measurements sent within `[anchor, anchor + window]`. Windows
//! providing fewer than three unique SLBs are skipped; within a window each
//! SLB contributes at most one measurement (the one sent nearest the
//! anchor); overlapping windows that select the same member set emit one
//! group. Overlapping non-identical groups are intentional — they raise
//! estimate density and the cost/CRLB filter prunes them later.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::ranging::RangeMeasurement;
use crate::types::DeviceId;

/// Default grouping window, seconds.
pub const DEFAULT_GROUP_WINDOW_S: f64 = 5.0;

/// Minimum unique SLBs for a solvable group.
pub const MIN_UNIQUE_SLBS: usize = 3;

/// Measurements co-windowed for one joint trilateration of `target`.
#[derive(Debug, Clone)]
pub struct PingGroup {
    pub group_id: u32,
    pub target: DeviceId,
    /// Mean of member send times.
    pub t_center: f64,
    /// One measurement per unique SLB, ≥ 3 of them, send times within the
    /// grouping window of each other.
    pub members: Vec<RangeMeasurement>,
}

/// Generic sliding-window selection shared by ToF grouping and TDoA arrival
/// grouping. `items` must be pre-sorted by `time` (ties broken by caller);
/// returns deduplicated member index sets in anchor order.
pub fn window_groups<T>(
    items: &[T],
    time: impl Fn(&T) -> f64,
    slb: impl Fn(&T) -> DeviceId,
    window_s: f64,
    min_unique: usize,
) -> Vec<Vec<usize>> {
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();

    for anchor in 0..items.len() {
        let t_anchor = time(&items[anchor]);
        // One member per SLB: the one nearest the anchor time (earliest in
        // the window, since all members are at or after the anchor).
        let mut per_slb: BTreeMap<DeviceId, usize> = BTreeMap::new();
        for (idx, item) in items.iter().enumerate().skip(anchor) {
            if time(item) > t_anchor + window_s {
                break;
            }
            per_slb.entry(slb(item)).or_insert(idx);
        }
        if per_slb.len() < min_unique {
            continue;
        }
        let members: Vec<usize> = per_slb.into_values().collect();
        let mut sorted = members;
        sorted.sort_unstable();
        if seen.insert(sorted.clone()) {
            groups.push(sorted);
        }
    }
    groups
}

/// Builds trilateration groups from one target's filtered measurements.
/// Input order does not matter; the output is deterministic.
pub fn build_groups(
    measurements: &[RangeMeasurement],
    target: DeviceId,
    window_s: f64,
) -> Vec<PingGroup> {
    let mut sorted: Vec<RangeMeasurement> = measurements.to_vec();
    sorted.sort_by(|a, b| {
        a.t_send
            .total_cmp(&b.t_send)
            .then(a.slb.cmp(&b.slb))
            .then(a.t_recv.total_cmp(&b.t_recv))
            .then(a.sender.cmp(&b.sender))
    });

    let index_sets = window_groups(&sorted, |m| m.t_send, |m| m.slb, window_s, MIN_UNIQUE_SLBS);

    index_sets
        .into_iter()
        .enumerate()
        .map(|(id, indices)| {
            let members: Vec<RangeMeasurement> = indices.iter().map(|&i| sorted[i]).collect();
            let t_center = members.iter().map(|m| m.t_send).sum::<f64>() / members.len() as f64;
            PingGroup {
                group_id: id as u32,
                target,
                t_center,
                members,
            }
        })
        .collect()
}
