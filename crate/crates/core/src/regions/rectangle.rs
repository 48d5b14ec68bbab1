use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::likelihood::{self, log_add, log_likelihood_of, ExperimentData};
use crate::linalg::{self, CMatrix};
use crate::qstate::{BlochVector, DensityMatrix, GeneratorBasis};
use crate::rng;

const SLICE_TOL: f64 = 1e-9;
/// Half widths below this count as a degenerate slice.
const MIN_HALF_WIDTH: f64 = 1e-6;

/// Axis-aligned box in Bloch coordinates around the likelihood peak.
#[derive(Clone, Debug, Serialize)]
pub struct Rectangle {
    pub center: Vec<f64>,
    pub dim: usize,
    /// `(r_j⁻, r_j⁺)` per coordinate.
    pub half_widths: Vec<(f64, f64)>,
    pub eta: f64,
    /// Fraction of the box made of valid states, once estimated.
    pub f: Option<f64>,
    /// `∏_j (r_j⁻ + r_j⁺)`
    pub v_r: f64,
    pub ln_v_r: f64,
    /// Log-likelihood the drop `ln η` is measured from.
    pub reference_log_likelihood: f64,
    /// Whether the center was moved off a boundary maximum.
    pub recentered: bool,
}

impl Rectangle {
    pub fn center_bloch(&self) -> BlochVector {
        BlochVector {
            tau: self.center.clone(),
            dim: self.dim,
        }
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.half_widths.iter().map(|(a, b)| a + b).collect()
    }

    /// `(lower, upper)` per coordinate.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.center
            .iter()
            .zip(&self.half_widths)
            .map(|(c, (lo, hi))| (c - lo, c + hi))
            .collect()
    }
}

/// Rectangle around the maximum-likelihood state.
pub fn build_rectangle(data: &ExperimentData, eta: f64) -> Result<Rectangle> {
    let (state, max) = likelihood::mle(data)?;
    build_rectangle_around(data, &state, max, eta)
}

/// Rectangle around a given maximizer `peak` with log-likelihood `max`.
///
/// Along each coordinate the half width is the smaller of the distance at
/// which the likelihood has dropped by `η` and the distance to the state
/// space boundary. A peak on the boundary gives zero widths; the center is
/// then moved towards `𝟙/d` until the likelihood has dropped by
/// `min(1, ln η / 2)`.
pub fn build_rectangle_around(data: &ExperimentData, peak: &DensityMatrix, max: f64, eta: f64) -> Result<Rectangle> {
    if !(eta > 1.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("η = {eta} must exceed 1")));
    }
    let d = data.dim();
    if peak.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: peak.dim(),
        });
    }
    let basis = GeneratorBasis::new(d)?;
    let threshold = max - eta.ln();
    let mut center = peak.matrix().clone();
    let mut widths = half_widths(data, &basis, &center, threshold);
    let mut recentered = false;
    if degenerate_coordinate(&widths).is_some() {
        let mixed = linalg::identity(d).unscale(d as f64);
        let target = max - (eta.ln() / 2.0).min(1.0);
        let at = |t: f64| center.scale(1.0 - t) + mixed.scale(t);
        let t = if log_likelihood_of(data, &mixed) >= target {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            while hi - lo > SLICE_TOL {
                let mid = 0.5 * (lo + hi);
                if log_likelihood_of(data, &at(mid)) >= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        center = at(t);
        widths = half_widths(data, &basis, &center, threshold);
        recentered = true;
    }
    if let Some(j) = degenerate_coordinate(&widths) {
        return Err(Error::DegenerateRegion(format!(
            "coordinate {j} has half widths {:?}",
            widths[j]
        )));
    }
    let ln_v_r: f64 = widths.iter().map(|(a, b)| (a + b).ln()).sum();
    Ok(Rectangle {
        center: basis.coordinates(&center),
        dim: d,
        v_r: widths.iter().map(|(a, b)| a + b).product(),
        half_widths: widths,
        eta,
        f: None,
        ln_v_r,
        reference_log_likelihood: max,
        recentered,
    })
}

fn degenerate_coordinate(widths: &[(f64, f64)]) -> Option<usize> {
    widths
        .iter()
        .position(|(a, b)| !(*a >= MIN_HALF_WIDTH && *b >= MIN_HALF_WIDTH && a.is_finite() && b.is_finite()))
}

fn half_widths(data: &ExperimentData, basis: &GeneratorBasis, center: &CMatrix, threshold: f64) -> Vec<(f64, f64)> {
    (0..basis.len())
        .map(|j| {
            let (lo, hi) = basis.coordinate_range(j);
            let cap = hi - lo;
            let side = |sign: f64| {
                let dir = basis.ops()[j].scale(sign);
                let at = |s: f64| center + dir.scale(s);
                let y = boundary_distance(&at, cap);
                let x = drop_distance(data, &at, y, threshold);
                x.min(y)
            };
            (side(-1.0), side(1.0))
        })
        .collect()
}

/// Largest `s ∈ [0, cap]` keeping `at(s)` positive semidefinite.
fn boundary_distance(at: &impl Fn(f64) -> CMatrix, cap: f64) -> f64 {
    if linalg::min_eigenvalue(&at(0.0)) < 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > SLICE_TOL {
        let mid = 0.5 * (lo + hi);
        if linalg::min_eigenvalue(&at(mid)) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Distance at which the log-likelihood falls to `threshold`; infinite when
/// it stays above it up to `limit`.
fn drop_distance(data: &ExperimentData, at: &impl Fn(f64) -> CMatrix, limit: f64, threshold: f64) -> f64 {
    if log_likelihood_of(data, &at(limit)) > threshold {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, limit);
    while hi - lo > SLICE_TOL {
        let mid = 0.5 * (lo + hi);
        if log_likelihood_of(data, &at(mid)) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Monte Carlo lower bound on the normalization `∫ ℒ dσ`.
#[derive(Clone, Debug, Serialize)]
pub struct NormalizationEstimate {
    /// `ln(⟨ℒ⟩_R · f · ∏Δr_j)`
    pub log_value: f64,
    /// Standard error of `log_value` (natural-log units).
    pub standard_error: f64,
    /// Fraction of samples that were valid states.
    pub f: f64,
    pub accepted: u64,
    pub samples: u64,
}

#[derive(Clone, Copy)]
struct Partial {
    log_sum: f64,
    log_sum_sq: f64,
    accepted: u64,
}

impl Partial {
    fn merge(self, other: Self) -> Self {
        Self {
            log_sum: log_add(self.log_sum, other.log_sum),
            log_sum_sq: log_add(self.log_sum_sq, other.log_sum_sq),
            accepted: self.accepted + other.accepted,
        }
    }
}

/// Uniform samples in the rectangle, invalid operators counting as zero.
/// Work is split into `chunks` independently seeded units.
pub fn mc_normalization_lower_bound(
    data: &ExperimentData,
    rect: &Rectangle,
    samples: u64,
    seed: u64,
    chunks: usize,
) -> Result<NormalizationEstimate> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!("{samples} samples; at least 1000 required")));
    }
    if chunks == 0 {
        return Err(Error::InvalidParameter("chunk count must be positive".into()));
    }
    if rect.dim != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: rect.dim,
        });
    }
    let basis = GeneratorBasis::new(rect.dim)?;
    let bounds = rect.bounds();
    let reference = rect.reference_log_likelihood;
    let per_chunk = samples / chunks as u64;
    let remainder = samples % chunks as u64;
    let empty = Partial {
        log_sum: f64::NEG_INFINITY,
        log_sum_sq: f64::NEG_INFINITY,
        accepted: 0,
    };
    let total = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = per_chunk + u64::from((c as u64) < remainder);
            let mut r = rng::substream(seed, c as u64);
            let mut tau = vec![0.0; bounds.len()];
            let mut acc = empty;
            for _ in 0..n {
                for (t, (lo, hi)) in tau.iter_mut().zip(&bounds) {
                    *t = r.random_range(*lo..*hi);
                }
                let m = basis.operator(&tau).expect("length matches basis");
                if !linalg::is_positive_definite(&m) {
                    continue;
                }
                acc.accepted += 1;
                let rel = log_likelihood_of(data, &m) - reference;
                acc.log_sum = log_add(acc.log_sum, rel);
                acc.log_sum_sq = log_add(acc.log_sum_sq, 2.0 * rel);
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(empty, Partial::merge);
    if total.accepted == 0 || total.log_sum == f64::NEG_INFINITY {
        return Err(Error::DegenerateRegion(format!(
            "no valid state with positive likelihood among {samples} samples"
        )));
    }
    let n = samples as f64;
    let log_mean = total.log_sum - n.ln();
    // Relative variance of the sample mean: (E[w²]/E[w]² − 1)/N.
    let ratio = (n.ln() + total.log_sum_sq - 2.0 * total.log_sum).exp();
    let standard_error = ((ratio - 1.0).max(0.0) / n).sqrt();
    Ok(NormalizationEstimate {
        log_value: reference + log_mean + rect.ln_v_r,
        standard_error,
        f: total.accepted as f64 / n,
        accepted: total.accepted,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::Setting;
    use crate::qstate::hs_volume;
    use approx::assert_abs_diff_eq;

    fn mub_data(counts: [u64; 6]) -> ExperimentData {
        ExperimentData::new(
            2,
            vec![
                Setting::pauli("x", &counts[0..2]).unwrap(),
                Setting::pauli("y", &counts[2..4]).unwrap(),
                Setting::pauli("z", &counts[4..6]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn symmetric_data_gives_symmetric_box() {
        let data = mub_data([50; 6]);
        let rect = build_rectangle(&data, 1e5).unwrap();
        assert!(!rect.recentered);
        for (c, (lo, hi)) in rect.center.iter().zip(&rect.half_widths) {
            assert!(c.abs() < 1e-6);
            assert!((lo - hi).abs() / hi < 0.05);
        }
        let product: f64 = rect.side_lengths().iter().product();
        assert_abs_diff_eq!(rect.v_r, product, epsilon = 1e-12 * product);
    }

    #[test]
    fn boundary_peak_uses_state_space_edge() {
        let data = ExperimentData::new(2, vec![Setting::pauli("z", &[10, 0]).unwrap()]).unwrap();
        let rect = build_rectangle(&data, 1e5).unwrap();
        assert!(rect.recentered);
        let z = 2;
        let basis = GeneratorBasis::new(2).unwrap();
        let edge_center = basis.operator(&rect.center).unwrap();
        // Upwards the likelihood only grows, so the width is the distance to the pure state.
        let top = rect.center[z] + rect.half_widths[z].1;
        assert_abs_diff_eq!(top, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-6);
        assert!(linalg::min_eigenvalue(&edge_center) > 0.0);
    }

    #[test]
    fn larger_eta_never_shrinks() {
        let data = mub_data([30, 20, 26, 24, 40, 10]);
        let small = build_rectangle(&data, 1e3).unwrap();
        let large = build_rectangle(&data, 1e5).unwrap();
        for (a, b) in small.half_widths.iter().zip(&large.half_widths) {
            assert!(b.0 >= a.0 - 1e-9 && b.1 >= a.1 - 1e-9);
        }
    }

    #[test]
    fn flat_likelihood_recovers_volume() {
        let data = mub_data([0; 6]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rect = Rectangle {
            center: vec![0.0; 3],
            dim: 2,
            half_widths: vec![(s, s); 3],
            eta: 1e5,
            f: None,
            v_r: (2.0 * s).powi(3),
            ln_v_r: 3.0 * (2.0 * s).ln(),
            reference_log_likelihood: 0.0,
            recentered: false,
        };
        let est = mc_normalization_lower_bound(&data, &rect, 200_000, 7, 4).unwrap();
        let exact = hs_volume(2).unwrap().ln();
        assert!((est.log_value - exact).abs() < 3.0 * est.standard_error, "{est:?} vs {exact}");
        let again = mc_normalization_lower_bound(&data, &rect, 200_000, 7, 4).unwrap();
        assert_eq!(est.log_value.to_bits(), again.log_value.to_bits());
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let data = mub_data([1; 6]);
        let rect = build_rectangle(&data, 1e5).unwrap();
        assert!(matches!(
            mc_normalization_lower_bound(&data, &rect, 10, 0, 1),
            Err(Error::InvalidParameter(_))
        ));
    }
}
