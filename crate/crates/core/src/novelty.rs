//! Behavior descriptors and k-nearest-neighbor novelty.
//!
//! Novelty of a descriptor on one slot is the mean distance to its `k`
//! closest slot-eligible references. When fewer than `k` references exist the
//! mean runs over all of them; with none the score is absent. A descriptor is
//! never compared against entries that carry its own individual id.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    ArchivedDescriptor, BehaviorDescriptor, Individual, NoveltyArchive, Slot, SlotValue,
    Trajectory,
};

/// Projects a trajectory onto the five behavior slots.
pub fn extract_descriptors(traj: &Trajectory, steps: usize) -> Result<BehaviorDescriptor> {
    if traj.len() != steps || steps == 0 {
        return Err(Error::TrajectoryLength {
            expected: steps,
            actual: traj.len(),
        });
    }
    let last = &traj.steps[steps - 1];
    let mid = &traj.steps[steps / 2];
    let touch = traj.t_touch.map(|t| traj.steps[t].ee);
    Ok(BehaviorDescriptor::new(last.object.position, touch, mid.ee))
}

/// Shortest-arc distance between two angles.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn value_distance(a: SlotValue, b: SlotValue) -> f64 {
    match (a, b) {
        (SlotValue::Position(p), SlotValue::Position(q)) => (p - q).norm(),
        (SlotValue::Angle(x), SlotValue::Angle(y)) => angular_distance(x, y),
        _ => unreachable!("a slot always holds one kind of value"),
    }
}

/// Euclidean distance on position slots, wrapped angular distance on orientation slots.
pub fn slot_distance(a: &BehaviorDescriptor, b: &BehaviorDescriptor, slot: Slot) -> Result<f64> {
    match (a.value(slot), b.value(slot)) {
        (Some(x), Some(y)) => Ok(value_distance(x, y)),
        _ => Err(Error::IneligibleSlot(slot)),
    }
}

/// Mean of the `k` smallest values, or of all of them when fewer exist.
///
/// The selected values are summed in ascending order so the result does not
/// depend on the input order.
pub(crate) fn mean_of_k_smallest(dists: &mut [f64], k: usize) -> Option<f64> {
    if dists.is_empty() {
        return None;
    }
    let k = k.min(dists.len());
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    let nearest = &mut dists[..k];
    nearest.sort_unstable_by(f64::total_cmp);
    Some(nearest.iter().sum::<f64>() / k as f64)
}

/// Descriptors novelty is measured against: population, offspring and archive.
#[derive(Clone, Debug, Default)]
pub struct ReferenceSet {
    entries: Vec<ArchivedDescriptor>,
}

impl ReferenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(pool: &[Individual], archive: &NoveltyArchive) -> Self {
        let mut refs = ReferenceSet {
            entries: Vec::with_capacity(pool.len() + archive.len()),
        };
        refs.extend_individuals(pool);
        refs.entries.extend_from_slice(archive.entries());
        refs
    }

    pub fn push(&mut self, id: u64, descriptor: BehaviorDescriptor) {
        self.entries.push(ArchivedDescriptor { id, descriptor });
    }

    pub fn extend_individuals(&mut self, pool: &[Individual]) {
        self.entries.extend(pool.iter().map(|i| ArchivedDescriptor {
            id: i.id,
            descriptor: i.descriptor,
        }));
    }

    pub fn entries(&self) -> &[ArchivedDescriptor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Per-slot views holding only eligible entries.
    fn slot_views(&self) -> [Vec<(u64, SlotValue)>; 5] {
        Slot::ALL.map(|slot| {
            self.entries
                .iter()
                .filter_map(|e| e.descriptor.value(slot).map(|v| (e.id, v)))
                .collect()
        })
    }
}

fn novelty_against(
    x: SlotValue,
    exclude: Option<u64>,
    refs: &[(u64, SlotValue)],
    k: usize,
) -> Option<f64> {
    let mut dists: Vec<f64> = refs
        .iter()
        .filter(|(id, _)| Some(*id) != exclude)
        .map(|(_, v)| value_distance(x, *v))
        .collect();
    mean_of_k_smallest(&mut dists, k)
}

/// k-NN novelty of `x` on `slot`. `exclude` is the id of `x` itself, if it is
/// part of `refs`. Returns `Ok(None)` when no eligible reference remains.
pub fn knn_novelty(
    x: &BehaviorDescriptor,
    exclude: Option<u64>,
    refs: &ReferenceSet,
    k: usize,
    slot: Slot,
) -> Result<Option<f64>> {
    if k == 0 {
        return Err(Error::ZeroNeighbors);
    }
    let value = x.value(slot).ok_or(Error::IneligibleSlot(slot))?;
    let mut dists: Vec<f64> = refs
        .entries
        .iter()
        .filter(|e| Some(e.id) != exclude)
        .filter_map(|e| e.descriptor.value(slot))
        .map(|v| value_distance(value, v))
        .collect();
    Ok(mean_of_k_smallest(&mut dists, k))
}

/// Fills the five novelty slots of every individual in `pool`.
/// Ineligible slots are marked invalid. Order is preserved.
pub fn update_novelty(pool: &mut [Individual], refs: &ReferenceSet, k: usize) -> Result<()> {
    update_novelty_slots(pool, refs, k, &Slot::ALL)
}

/// As [`update_novelty`], restricted to `slots`; other slots are left untouched.
pub fn update_novelty_slots(
    pool: &mut [Individual],
    refs: &ReferenceSet,
    k: usize,
    slots: &[Slot],
) -> Result<()> {
    if k == 0 {
        return Err(Error::ZeroNeighbors);
    }
    if pool.is_empty() {
        return Ok(());
    }
    let views = refs.slot_views();
    pool.par_iter_mut().for_each(|ind| {
        for &slot in slots {
            let score = ind
                .descriptor
                .value(slot)
                .and_then(|v| novelty_against(v, Some(ind.id), &views[slot.index()], k));
            ind.novelty.set(slot, score);
        }
    });
    Ok(())
}

/// Novelty on the flat concatenation of all slots (ineligible parts zeroed),
/// for each individual in `pool`, against `pool` plus `archive`.
pub fn concatenated_novelty(
    pool: &[Individual],
    archive: &NoveltyArchive,
    k: usize,
) -> Result<Vec<Option<f64>>> {
    if k == 0 {
        return Err(Error::ZeroNeighbors);
    }
    let refs: Vec<(u64, [f64; 8])> = pool
        .iter()
        .map(|i| (i.id, i.descriptor.concatenated()))
        .chain(
            archive
                .entries()
                .iter()
                .map(|e| (e.id, e.descriptor.concatenated())),
        )
        .collect();
    Ok(pool
        .par_iter()
        .map(|ind| {
            let x = ind.descriptor.concatenated();
            let mut dists: Vec<f64> = refs
                .iter()
                .filter(|(id, _)| *id != ind.id)
                .map(|(_, v)| euclid(&x, v))
                .collect();
            mean_of_k_smallest(&mut dists, k)
        })
        .collect())
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
