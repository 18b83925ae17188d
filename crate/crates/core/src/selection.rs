//! Parent sampling and survivor selection.
//!
//! Selection routines return pool indices; callers keep ownership of the
//! individuals.

use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Individual, MutationKind, NoveltyArchive, Slot};
use crate::novelty::concatenated_novelty;

fn check_size(requested: usize, available: usize) -> Result<()> {
    if requested > available {
        Err(Error::PoolTooSmall {
            requested,
            available,
        })
    } else {
        Ok(())
    }
}

/// `n` distinct indices into a pool of `len`, uniformly without replacement.
pub fn random_sample_indices<R: Rng + ?Sized>(len: usize, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    check_size(n, len)?;
    Ok(rand::seq::index::sample(rng, len, n).into_vec())
}

pub fn random_sample<R: Rng + ?Sized>(pop: &[Individual], n: usize, rng: &mut R) -> Result<Vec<Individual>> {
    Ok(random_sample_indices(pop.len(), n, rng)?
        .into_iter()
        .map(|i| pop[i].clone())
        .collect())
}

/// Descending by score, absent scores last, ties by lower index.
fn rank_desc(scores: &[Option<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| match (scores[a], scores[b]) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    idx
}

/// Round-robin over the five slots: each turn takes the most novel individual
/// on that slot among those not yet chosen. Slots without a remaining eligible
/// candidate are skipped.
pub fn multi_bc_sel(pool: &[Individual], mu: usize) -> Result<Vec<usize>> {
    check_size(mu, pool.len())?;
    let orders: Vec<Vec<usize>> = Slot::ALL
        .iter()
        .map(|&slot| {
            let scores: Vec<Option<f64>> = pool.iter().map(|i| i.novelty.get(slot)).collect();
            let valid = scores.iter().filter(|s| s.is_some()).count();
            let mut order = rank_desc(&scores);
            order.truncate(valid);
            order
        })
        .collect();
    let mut cursors = [0usize; 5];
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::with_capacity(mu);
    while out.len() < mu {
        let mut progressed = false;
        for (order, cursor) in orders.iter().zip(cursors.iter_mut()) {
            if out.len() == mu {
                break;
            }
            while *cursor < order.len() && taken[order[*cursor]] {
                *cursor += 1;
            }
            if let Some(&i) = order.get(*cursor) {
                taken[i] = true;
                out.push(i);
                progressed = true;
            }
        }
        if !progressed {
            // No valid novelty anywhere: fall back to pool order.
            out.extend((0..pool.len()).filter(|&i| !taken[i]).take(mu - out.len()));
        }
    }
    Ok(out)
}

/// Single-descriptor novelty search: rank by novelty of the concatenated
/// vector against `pool` and `archive`, keep the top `mu`.
pub fn ns_select(pool: &[Individual], archive: &NoveltyArchive, k: usize, mu: usize) -> Result<Vec<usize>> {
    check_size(mu, pool.len())?;
    let scores = concatenated_novelty(pool, archive, k)?;
    let mut order = rank_desc(&scores);
    order.truncate(mu);
    Ok(order)
}

pub fn random_select<R: Rng + ?Sized>(pool: &[Individual], mu: usize, rng: &mut R) -> Result<Vec<usize>> {
    random_sample_indices(pool.len(), mu, rng)
}

/// Size of each regeneration group: `floor(min(mu, |a_s|) / 2)`.
pub fn regeneration_group_size(mu: usize, archive_len: usize) -> usize {
    mu.min(archive_len) / 2
}

/// Mean of the valid slot scores, each divided by that slot's maximum over the archive.
fn group_scores(archive: &[Individual], slots: [Slot; 2]) -> Vec<Option<f64>> {
    let max = slots.map(|s| {
        archive
            .iter()
            .filter_map(|i| i.novelty.get(s))
            .fold(0.0f64, f64::max)
    });
    archive
        .iter()
        .map(|ind| {
            let parts: Vec<f64> = slots
                .iter()
                .zip(max)
                .filter_map(|(s, m)| {
                    ind.novelty
                        .get(*s)
                        .map(|v| if m > 0.0 { v / m } else { 0.0 })
                })
                .collect();
            (!parts.is_empty()).then(|| parts.iter().sum::<f64>() / parts.len() as f64)
        })
        .collect()
}

/// Picks the regeneration set from the success archive: the `n_R` entries
/// most novel in approach (mid-episode slots) tagged for exploration, then
/// the `n_R` remaining entries most novel in prehension (touch slots) tagged
/// for refinement.
pub fn regenerate_select(archive: &[Individual], mu: usize) -> Vec<(usize, MutationKind)> {
    let n_r = regeneration_group_size(mu, archive.len());
    if n_r == 0 {
        return Vec::new();
    }
    let approach = group_scores(archive, [Slot::MidPosition, Slot::MidOrientation]);
    let prehension = group_scores(archive, [Slot::TouchPosition, Slot::TouchOrientation]);

    let mut chosen = vec![false; archive.len()];
    let mut out = Vec::with_capacity(2 * n_r);
    for i in rank_desc(&approach).into_iter().take(n_r) {
        chosen[i] = true;
        out.push((i, MutationKind::Explore));
    }
    out.extend(
        rank_desc(&prehension)
            .into_iter()
            .filter(|&i| !chosen[i])
            .take(n_r)
            .map(|i| (i, MutationKind::Refine)),
    );
    out
}
