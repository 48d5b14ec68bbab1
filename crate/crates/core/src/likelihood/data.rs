use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qstate::{ops, DensityMatrix};

/// Tolerance on POVM completeness, per matrix entry.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Tolerance on effect positivity (minimum eigenvalue).
pub const EFFECT_PSD_TOL: f64 = 1e-9;

/// One outcome of a measurement setting and the number of times it occurred.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub effect: CMatrix,
    pub count: u64,
}

/// A complete POVM together with its observed counts.
#[derive(Clone, Debug)]
pub struct Setting {
    pub label: String,
    pub outcomes: Vec<Outcome>,
}

impl Setting {
    pub fn new(label: impl Into<String>, outcomes: Vec<Outcome>) -> Self {
        Self {
            label: label.into(),
            outcomes,
        }
    }

    /// Rank-one projective setting built from an orthonormal basis.
    pub fn projective(label: impl Into<String>, basis: &[Vec<Complex64>], counts: &[u64]) -> Result<Self> {
        if basis.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: counts.len(),
            });
        }
        let outcomes = basis
            .iter()
            .zip(counts)
            .map(|(v, &count)| Outcome {
                effect: linalg::projector(v),
                count,
            })
            .collect();
        Ok(Self::new(label, outcomes))
    }

    /// Product Pauli eigenbasis setting such as `"xx"`, outcomes ordered as
    /// in [`ops::product_basis`].
    pub fn pauli(axes: &str, counts: &[u64]) -> Result<Self> {
        Self::projective(axes, &ops::product_basis(axes)?, counts)
    }

    pub fn total(&self) -> u64 {
        self.outcomes.iter().map(|o| o.count).sum()
    }
}

/// Measurement record: several complete POVMs on a `d`-dimensional system.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    dim: usize,
    settings: Vec<Setting>,
}

impl ExperimentData {
    pub fn new(dim: usize, settings: Vec<Setting>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if settings.is_empty() {
            return Err(Error::InvalidPovm("no measurement settings".into()));
        }
        for (s, setting) in settings.iter().enumerate() {
            if setting.outcomes.is_empty() {
                return Err(Error::InvalidPovm(format!("setting {s} has no outcomes")));
            }
            let mut sum = CMatrix::zeros(dim, dim);
            for (k, o) in setting.outcomes.iter().enumerate() {
                if o.effect.nrows() != dim || o.effect.ncols() != dim {
                    return Err(Error::InvalidPovm(format!(
                        "setting {s} effect {k} is {}x{}, expected {dim}x{dim}",
                        o.effect.nrows(),
                        o.effect.ncols()
                    )));
                }
                let dev = linalg::max_hermitian_deviation(&o.effect);
                if dev > COMPLETENESS_TOL {
                    return Err(Error::InvalidPovm(format!(
                        "setting {s} effect {k} is not Hermitian (deviation {dev:.3e})"
                    )));
                }
                let min = linalg::min_eigenvalue(&o.effect);
                if min < -EFFECT_PSD_TOL {
                    return Err(Error::InvalidPovm(format!(
                        "setting {s} effect {k} has negative eigenvalue {min:.3e}"
                    )));
                }
                sum += &o.effect;
            }
            let residual = (sum - linalg::identity(dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if residual > COMPLETENESS_TOL {
                return Err(Error::InvalidPovm(format!(
                    "setting {s} ('{}') is incomplete: max |Σ E − 𝟙| entry = {residual:.3e}",
                    setting.label
                )));
            }
        }
        Ok(Self { dim, settings })
    }

    /// Two-qubit data in the product eigenbases of the given Pauli settings.
    pub fn pauli_settings(settings: &[(&str, Vec<u64>)]) -> Result<Self> {
        let dim = settings
            .first()
            .map(|(axes, _)| 1usize << axes.len())
            .ok_or_else(|| Error::InvalidPovm("no measurement settings".into()))?;
        let built = settings
            .iter()
            .map(|(axes, counts)| Setting::pauli(axes, counts))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, built)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &Outcome> {
        self.settings.iter().flat_map(|s| s.outcomes.iter())
    }

    /// Total count `n` over all settings.
    pub fn total_counts(&self) -> u64 {
        self.settings.iter().map(Setting::total).sum()
    }

    /// Same effects with every count multiplied by `m`.
    pub fn scaled(&self, m: u64) -> Self {
        let mut out = self.clone();
        for s in &mut out.settings {
            for o in &mut s.outcomes {
                o.count *= m;
            }
        }
        out
    }
}

/// Multinomial counts for each setting, `shots` split evenly across settings
/// (the first `shots mod k` settings receive one extra shot).
pub fn simulate_counts<R: Rng + ?Sized>(
    state: &DensityMatrix,
    settings: &[Setting],
    shots: u64,
    rng: &mut R,
) -> Result<ExperimentData> {
    let dim = state.dim();
    let template = ExperimentData::new(dim, settings.to_vec())?;
    let k = settings.len() as u64;
    let mut out = Vec::with_capacity(settings.len());
    for (i, setting) in template.settings.iter().enumerate() {
        let n = shots / k + u64::from((i as u64) < shots % k);
        let probs: Vec<f64> = setting
            .outcomes
            .iter()
            .map(|o| linalg::inner(state.matrix(), &o.effect).max(0.0))
            .collect();
        let counts = multinomial(n, &probs, rng)?;
        let outcomes = setting
            .outcomes
            .iter()
            .zip(counts)
            .map(|(o, count)| Outcome {
                effect: o.effect.clone(),
                count,
            })
            .collect();
        out.push(Setting::new(setting.label.clone(), outcomes));
    }
    ExperimentData::new(dim, out)
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) || probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidParameter("outcome probabilities must be nonnegative".into()));
    }
    let mut remaining_n = n;
    let mut remaining_p = 1.0;
    let mut counts = Vec::with_capacity(probs.len());
    for (i, p) in probs.iter().map(|p| p / total).enumerate() {
        if i + 1 == probs.len() {
            counts.push(remaining_n);
            break;
        }
        let q = if remaining_p > 0.0 { (p / remaining_p).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if remaining_n == 0 || q == 0.0 {
            0
        } else {
            Binomial::new(remaining_n, q)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng)
        };
        counts.push(draw);
        remaining_n -= draw;
        remaining_p -= p;
    }
    Ok(counts)
}
