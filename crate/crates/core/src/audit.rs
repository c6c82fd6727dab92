//! Randomized search for the L1-sensitivity of dataset maps over neighbouring
//! datasets.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;

use crate::bernstein::BernsteinDegree;
use crate::error::{Error, Result};
use crate::mechanisms::bernstein_aggregates;
use crate::noise::derive_seed;
use crate::statistics::{covariance_exact, unnormalized_cov, unnormalized_var, variance_exact, Dataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborModel {
    AddRemove,
    Swap,
}

/// Two neighbouring datasets. Under add-remove, `extended` is `base` plus one
/// appended record; under swap, the two differ in exactly one position.
#[derive(Clone, Debug)]
pub struct NeighborPair {
    pub base: Dataset,
    pub extended: Dataset,
    pub model: NeighborModel,
}

#[derive(Clone, Copy)]
enum Proposal {
    Uniform,
    Corner,
    Boundary,
    /// Every base record sits at one corner; the changed record at the opposite one.
    Extreme,
}

fn draw_record(rng: &mut Xoshiro256PlusPlus, d: usize, proposal: Proposal) -> Vec<f64> {
    (0..d)
        .map(|_| match proposal {
            Proposal::Uniform => rng.random::<f64>(),
            Proposal::Corner | Proposal::Extreme => f64::from(rng.random_bool(0.5) as u8),
            Proposal::Boundary => {
                let t = rng.random::<f64>().powi(8);
                if rng.random_bool(0.5) {
                    t
                } else {
                    1.0 - t
                }
            }
        })
        .collect()
}

/// Draws a neighbouring pair with `n` base records in `d` columns. Records
/// mix uniform, corner and boundary-heavy proposals to reach the extremes.
pub fn random_neighbor_pair(n: usize, d: usize, model: NeighborModel, seed: u64) -> Result<NeighborPair> {
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    if model == NeighborModel::Swap && n == 0 {
        return Err(Error::domain("swap neighbours need at least one record"));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let proposal = match rng.random_range(0..4) {
        0 => Proposal::Uniform,
        1 => Proposal::Corner,
        2 => Proposal::Boundary,
        _ => Proposal::Extreme,
    };
    let mut flat = Vec::with_capacity(n * d);
    let corner = draw_record(&mut rng, d, Proposal::Corner);
    for _ in 0..n {
        match proposal {
            Proposal::Extreme => flat.extend_from_slice(&corner),
            p => flat.extend(draw_record(&mut rng, d, p)),
        }
    }
    let changed = match proposal {
        Proposal::Extreme => corner.iter().map(|c| 1.0 - c).collect(),
        _ => {
            let mix = [Proposal::Uniform, Proposal::Corner, Proposal::Boundary];
            let p = mix[rng.random_range(0..3)];
            draw_record(&mut rng, d, p)
        }
    };
    let base = Dataset::from_flat(d, flat)?;
    let extended = match model {
        NeighborModel::AddRemove => base.with_record(&changed)?,
        NeighborModel::Swap => {
            let i = rng.random_range(0..n);
            base.with_replaced(i, &changed)?
        }
    };
    Ok(NeighborPair { base, extended, model })
}

/// Outcome of a sensitivity search.
#[derive(Clone, Debug)]
pub struct SensitivityReport {
    pub pairs: usize,
    pub max_l1: f64,
    pub min_l1: f64,
    /// Range of the coordinate-wise differences `f(extended) − f(base)`.
    pub min_diff: f64,
    pub max_diff: f64,
    /// Largest L1 difference per base size.
    pub max_l1_by_size: Vec<(usize, f64)>,
    /// The pair attaining `max_l1`.
    pub argmax: NeighborPair,
}

struct Probe {
    size_slot: usize,
    l1: f64,
    min_diff: f64,
    max_diff: f64,
    trial: u64,
}

/// Largest observed `‖f(D') − f(D)‖₁` over `trials` random pairs per base size.
/// Pairs are derived from `(seed, trial, size slot)` and evaluated in parallel;
/// the result does not depend on the thread count.
pub fn empirical_sensitivity<F>(
    map: F,
    dim: usize,
    model: NeighborModel,
    trials: usize,
    sizes: &[usize],
    seed: u64,
) -> Result<SensitivityReport>
where
    F: Fn(&Dataset) -> Result<Vec<f64>> + Sync,
{
    if trials == 0 || sizes.is_empty() {
        return Err(Error::domain("need at least one trial and one size"));
    }
    let probes: Vec<Probe> = (0..sizes.len())
        .flat_map(|slot| (0..trials as u64).map(move |t| (slot, t)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(slot, trial)| {
            let pair = random_neighbor_pair(sizes[slot], dim, model, derive_seed(seed, trial, slot as u64))?;
            let a = map(&pair.base)?;
            let b = map(&pair.extended)?;
            if a.len() != b.len() {
                return Err(Error::domain("map changed output length between neighbours"));
            }
            let (mut l1, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for (x, y) in a.iter().zip(&b) {
                let diff = y - x;
                l1 += diff.abs();
                lo = lo.min(diff);
                hi = hi.max(diff);
            }
            Ok(Probe { size_slot: slot, l1, min_diff: lo, max_diff: hi, trial })
        })
        .collect::<Result<_>>()?;

    let mut best = &probes[0];
    let mut by_size = vec![f64::NEG_INFINITY; sizes.len()];
    let (mut min_l1, mut min_diff, mut max_diff) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &probes {
        if p.l1 > best.l1 {
            best = p;
        }
        by_size[p.size_slot] = by_size[p.size_slot].max(p.l1);
        min_l1 = min_l1.min(p.l1);
        min_diff = min_diff.min(p.min_diff);
        max_diff = max_diff.max(p.max_diff);
    }
    let argmax = random_neighbor_pair(
        sizes[best.size_slot],
        dim,
        model,
        derive_seed(seed, best.trial, best.size_slot as u64),
    )?;
    Ok(SensitivityReport {
        pairs: probes.len(),
        max_l1: best.l1,
        min_l1,
        min_diff,
        max_diff,
        max_l1_by_size: sizes.iter().copied().zip(by_size).collect(),
        argmax,
    })
}

/// Bernstein aggregate vector of degree `k`.
pub fn bernstein_map(k: u32) -> Result<impl Fn(&Dataset) -> Result<Vec<f64>> + Sync> {
    let degree = BernsteinDegree::new(k)?;
    Ok(move |d: &Dataset| bernstein_aggregates(d, degree))
}

/// `[uvar(D)]` on the first column.
pub fn uvar_map(d: &Dataset) -> Result<Vec<f64>> {
    Ok(vec![unnormalized_var(d)])
}

/// `[ucov(D)]` on the first two columns.
pub fn ucov_map(d: &Dataset) -> Result<Vec<f64>> {
    Ok(vec![unnormalized_cov(d)?])
}

/// `[n − uvar(D), uvar(D)]`.
pub fn transformed_map(d: &Dataset) -> Result<Vec<f64>> {
    let u = unnormalized_var(d);
    Ok(vec![d.len() as f64 - u, u])
}

/// Normalized variance, for the swap model.
pub fn variance_map(d: &Dataset) -> Result<Vec<f64>> {
    Ok(vec![variance_exact(d)?])
}

/// Normalized covariance, for the swap model.
pub fn covariance_map(d: &Dataset) -> Result<Vec<f64>> {
    Ok(vec![covariance_exact(d)?])
}
