//! Initialization and mutation.
//!
//! The explore operator moves the first waypoint a lot and the rest of the
//! genome barely at all; refine does the opposite. The closure-timing gene is
//! grouped with the later waypoints. Noise is Gaussian and results are
//! clamped back into `[-1, 1]`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{Genome, MutationKind};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationParams {
    /// Std-dev applied to the focused gene group.
    pub sigma_big: f64,
    /// Std-dev applied to the frozen gene group.
    pub sigma_small: f64,
    /// Std-dev of the baseline operator, all genes.
    pub sigma_uniform: f64,
}

impl Default for MutationParams {
    fn default() -> Self {
        MutationParams {
            sigma_big: 0.3,
            sigma_small: 0.01,
            sigma_uniform: 0.1,
        }
    }
}

impl MutationParams {
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let all = [self.sigma_big, self.sigma_small, self.sigma_uniform];
        if all.iter().any(|s| !s.is_finite() || *s < 0.0) {
            v.push("mutation scales must be finite and non-negative".to_string());
        }
        if !(self.sigma_small < self.sigma_big) {
            v.push(format!(
                "sigma_small < sigma_big (got {} and {})",
                self.sigma_small, self.sigma_big
            ));
        }
        v
    }
}

/// `mu` genomes with genes drawn uniformly from `[-1, 1]`.
pub fn init_pop<R: Rng + ?Sized>(mu: usize, joints: usize, rng: &mut R) -> Vec<Genome> {
    let len = Genome::len_for(joints);
    (0..mu)
        .map(|_| {
            let genes = (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect();
            Genome::new(genes).expect("uniform genes are in range")
        })
        .collect()
}

fn perturb<R: Rng + ?Sized>(g: &Genome, sigma_of: impl Fn(usize) -> f64, rng: &mut R) -> Genome {
    let genes = g
        .genes()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let sigma = sigma_of(i);
            // Leave the gene bit-identical when its scale is zero.
            if sigma == 0.0 {
                return x;
            }
            let z: f64 = StandardNormal.sample(rng);
            x + sigma * z
        })
        .collect();
    Genome::clamped(genes)
}

/// Large noise on waypoint 1, small noise on waypoints 2, 3 and the closure gene.
pub fn mutate_explore<R: Rng + ?Sized>(g: &Genome, p: &MutationParams, rng: &mut R) -> Genome {
    let j = g.joints();
    perturb(g, |i| if i < j { p.sigma_big } else { p.sigma_small }, rng)
}

/// Small noise on waypoint 1, large noise on waypoints 2, 3 and the closure gene.
pub fn mutate_refine<R: Rng + ?Sized>(g: &Genome, p: &MutationParams, rng: &mut R) -> Genome {
    let j = g.joints();
    perturb(g, |i| if i < j { p.sigma_small } else { p.sigma_big }, rng)
}

pub fn mutate_uniform<R: Rng + ?Sized>(g: &Genome, sigma: f64, rng: &mut R) -> Genome {
    perturb(g, |_| sigma, rng)
}

/// Applies the operator named by `kind`. `Init` leaves the genome as is.
pub fn mutate_with<R: Rng + ?Sized>(
    g: &Genome,
    kind: MutationKind,
    p: &MutationParams,
    rng: &mut R,
) -> Genome {
    match kind {
        MutationKind::Explore => mutate_explore(g, p, rng),
        MutationKind::Refine => mutate_refine(g, p, rng),
        MutationKind::Uniform => mutate_uniform(g, p.sigma_uniform, rng),
        MutationKind::Init => g.clone(),
    }
}

/// Explore with probability `p_e`, refine otherwise, independently per genome.
pub fn mutate_er<R: Rng + ?Sized>(
    batch: &[Genome],
    p_e: f64,
    p_r: f64,
    params: &MutationParams,
    rng: &mut R,
) -> Vec<(Genome, MutationKind)> {
    let hints = vec![None; batch.len()];
    mutate_er_hinted(batch, &hints, p_e, p_r, params, rng.random())
}

/// [`mutate_er`] where some elements carry a forced operator.
///
/// Element `i` draws from its own generator derived from `stream` and `i`,
/// so the outcome does not depend on evaluation order. The explore/refine coin
/// is drawn for hinted elements too, keeping their streams aligned.
pub fn mutate_er_hinted(
    batch: &[Genome],
    hints: &[Option<MutationKind>],
    p_e: f64,
    p_r: f64,
    params: &MutationParams,
    stream: u64,
) -> Vec<(Genome, MutationKind)> {
    debug_assert_eq!(batch.len(), hints.len());
    debug_assert!((p_e + p_r - 1.0).abs() < 1e-9);
    batch
        .iter()
        .zip(hints)
        .enumerate()
        .map(|(i, (g, hint))| {
            let mut r = rng::element_rng(stream, i as u64);
            let coin = if r.random_bool(p_e.clamp(0.0, 1.0)) {
                MutationKind::Explore
            } else {
                MutationKind::Refine
            };
            let kind = hint.unwrap_or(coin);
            (mutate_with(g, kind, params, &mut r), kind)
        })
        .collect()
}

/// Baseline mutation of a batch, one derived generator per element.
pub fn mutate_uniform_batch(batch: &[Genome], sigma: f64, stream: u64) -> Vec<Genome> {
    batch
        .iter()
        .enumerate()
        .map(|(i, g)| mutate_uniform(g, sigma, &mut rng::element_rng(stream, i as u64)))
        .collect()
}
