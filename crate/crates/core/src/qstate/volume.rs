use rayon::prelude::*;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

use super::GeneratorBasis;

/// Natural log of the Hilbert-Schmidt volume of the `d`-dimensional state
/// space, in the metric where the Bloch coordinates are Euclidean:
///
/// `V_d = √d (2π)^{d(d−1)/2} Γ(1)Γ(2)⋯Γ(d) / Γ(d²)`.
pub fn ln_hs_volume(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let df = d as f64;
    let mut ln_v = 0.5 * df.ln() + (df * (df - 1.0) / 2.0) * (2.0 * std::f64::consts::PI).ln();
    for k in 1..=d {
        ln_v += ln_factorial(k - 1);
    }
    ln_v -= ln_factorial(d * d - 1);
    Ok(ln_v)
}

pub fn hs_volume(d: usize) -> Result<f64> {
    Ok(ln_hs_volume(d)?.exp())
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub accepted: u64,
    pub samples: u64,
}

/// Rejection-sampling estimate of the state-space volume over the bounding
/// box of the Bloch coordinates. Work is split into `chunks` independently
/// seeded units, so the result depends only on `(samples, seed, chunks)`.
pub fn mc_hs_volume(d: usize, samples: u64, seed: u64, chunks: usize) -> Result<VolumeEstimate> {
    let basis = GeneratorBasis::new(d)?;
    if samples == 0 || chunks == 0 {
        return Err(Error::InvalidParameter("sample and chunk counts must be positive".into()));
    }
    let ranges: Vec<(f64, f64)> = (0..basis.len()).map(|j| basis.coordinate_range(j)).collect();
    let box_volume: f64 = ranges.iter().map(|(lo, hi)| hi - lo).product();
    let per_chunk = samples / chunks as u64;
    let remainder = samples % chunks as u64;
    let accepted: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = per_chunk + u64::from((c as u64) < remainder);
            let mut r = rng::substream(seed, c as u64);
            let mut tau = vec![0.0; ranges.len()];
            let mut hits = 0u64;
            for _ in 0..n {
                for (t, (lo, hi)) in tau.iter_mut().zip(&ranges) {
                    *t = r.random_range(*lo..*hi);
                }
                let m = basis.operator(&tau).expect("length matches basis");
                if linalg::is_positive_definite(&m) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let frac = accepted as f64 / samples as f64;
    Ok(VolumeEstimate {
        value: frac * box_volume,
        standard_error: (frac * (1.0 - frac) / samples as f64).sqrt() * box_volume,
        accepted,
        samples,
    })
}
