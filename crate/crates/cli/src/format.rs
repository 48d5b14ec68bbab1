//! JSON experiment files. Matrices are row-major nested arrays of `[re, im]`
//! pairs; every validation error names the offending JSON-pointer path.

use entverify::likelihood::{ExperimentData, Outcome, Setting};
use entverify::linalg::CMatrix;
use entverify::regions::{ConfidenceParams, Method};
use entverify::witness::WitnessSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;

use crate::CliError;

pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub settings: Vec<SettingEntry>,
    pub witness: WitnessEntry,
    #[serde(default)]
    pub params: ParamsEntry,
}

/// One complete POVM with its counts.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingEntry {
    pub label: String,
    pub outcomes: Vec<OutcomeEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeEntry {
    pub effect: MatrixRows,
    pub count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessPreset {
    PhiPlusLinear,
    PhiPlusNonlinear,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessEntry {
    Preset {
        name: WitnessPreset,
    },
    Linear {
        w: MatrixRows,
    },
    AccessibleNonlinear {
        w: MatrixRows,
        u: MatrixRows,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<[f64; 2]>>,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_acceptance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_log10: Option<f64>,
    #[serde(default)]
    pub sa: SaEntry,
}

/// Validated contents of an experiment file.
pub struct Experiment {
    pub data: ExperimentData,
    pub witness: WitnessSpec,
    pub params: ParamsEntry,
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for segment in path.iter() {
        match segment {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    out
}

fn invalid(pointer: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Invalid {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// Parses the JSON text of an experiment file without validating it.
pub fn parse(text: &str) -> Result<ExperimentFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let pointer = pointer(err.path());
        let inner = err.into_inner();
        CliError::Parse {
            pointer,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

pub fn matrix(rows: &MatrixRows, dim: usize, at: &str) -> Result<CMatrix, CliError> {
    if rows.len() != dim {
        return Err(invalid(at, format!("expected {dim} rows, found {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(invalid(format!("{at}/{i}"), format!("expected {dim} entries, found {}", row.len())));
        }
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(invalid(format!("{at}/{i}/{j}"), "entry is not finite"));
            }
        }
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn matrix_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

impl WitnessEntry {
    pub fn build(&self, dim: usize) -> Result<WitnessSpec, CliError> {
        let spec = match self {
            Self::Preset { name } => {
                if dim != 4 {
                    return Err(invalid("/witness/name", format!("preset needs dimension 4, file has {dim}")));
                }
                match name {
                    WitnessPreset::PhiPlusLinear => WitnessSpec::phi_plus_linear(),
                    WitnessPreset::PhiPlusNonlinear => WitnessSpec::phi_plus_nonlinear(),
                }
            }
            Self::Linear { w } => {
                WitnessSpec::linear(matrix(w, dim, "/witness/w")?).map_err(|e| invalid("/witness", e.to_string()))?
            }
            Self::AccessibleNonlinear { w, u, reference } => {
                let w = matrix(w, dim, "/witness/w")?;
                let u = matrix(u, dim, "/witness/u")?;
                let reference = match reference {
                    Some(r) if r.len() != dim => {
                        return Err(invalid(
                            "/witness/reference",
                            format!("expected {dim} amplitudes, found {}", r.len()),
                        ))
                    }
                    Some(r) => Some(r.iter().map(|z| Complex64::new(z[0], z[1])).collect()),
                    None => None,
                };
                WitnessSpec::accessible_nonlinear(w, u, reference).map_err(|e| invalid("/witness", e.to_string()))?
            }
        };
        Ok(spec)
    }
}

impl ExperimentFile {
    /// Checks every setting for shape, positivity and completeness, and builds
    /// the witness.
    pub fn validate(self) -> Result<Experiment, CliError> {
        let dim = self.dimension;
        if dim < 2 {
            return Err(invalid("/dimension", format!("dimension {dim} must be at least 2")));
        }
        if self.settings.is_empty() {
            return Err(invalid("/settings", "no measurement settings"));
        }
        let mut settings = Vec::with_capacity(self.settings.len());
        for (s, entry) in self.settings.iter().enumerate() {
            if entry.outcomes.is_empty() {
                return Err(invalid(format!("/settings/{s}/outcomes"), "setting has no outcomes"));
            }
            let outcomes = entry
                .outcomes
                .iter()
                .enumerate()
                .map(|(k, o)| {
                    Ok(Outcome {
                        effect: matrix(&o.effect, dim, &format!("/settings/{s}/outcomes/{k}/effect"))?,
                        count: o.count,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let setting = Setting::new(entry.label.clone(), outcomes);
            // Validating one setting at a time pins errors to their index.
            ExperimentData::new(dim, vec![setting.clone()])
                .map_err(|e| invalid(format!("/settings/{s}"), e.to_string()))?;
            settings.push(setting);
        }
        let data = ExperimentData::new(dim, settings).map_err(|e| invalid("/settings", e.to_string()))?;
        if data.total_counts() == 0 {
            return Err(invalid("/settings", "no counts recorded"));
        }
        let witness = self.witness.build(dim)?;
        let p = &self.params;
        for (name, value) in [("eta", p.eta), ("epsilon_log10", p.epsilon_log10)] {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(invalid(format!("/params/{name}"), "value is not finite"));
                }
            }
        }
        if matches!(p.eta, Some(eta) if eta <= 1.0) {
            return Err(invalid("/params/eta", "η must exceed 1"));
        }
        if matches!(p.epsilon_log10, Some(x) if x >= 0.0) {
            return Err(invalid("/params/epsilon_log10", "log₁₀ ε must be negative"));
        }
        Ok(Experiment {
            data,
            witness,
            params: self.params,
        })
    }

    pub fn from_data(data: &ExperimentData, witness: WitnessEntry, description: Option<String>) -> Self {
        Self {
            dimension: data.dim(),
            description,
            settings: data
                .settings()
                .iter()
                .map(|s| SettingEntry {
                    label: s.label.clone(),
                    outcomes: s
                        .outcomes
                        .iter()
                        .map(|o| OutcomeEntry {
                            effect: matrix_rows(&o.effect),
                            count: o.count,
                        })
                        .collect(),
                })
                .collect(),
            witness,
            params: ParamsEntry::default(),
        }
    }
}

impl ParamsEntry {
    /// Solver parameters with file values over library defaults.
    pub fn to_confidence(&self) -> ConfidenceParams {
        let mut params = ConfidenceParams::default();
        if let Some(v) = self.eta {
            params.eta = v;
        }
        if let Some(v) = self.mc_samples {
            params.mc_samples = v;
        }
        if let Some(v) = self.seed {
            params.seed = v;
        }
        if let Some(v) = self.method {
            params.method = v;
        }
        let sa = &self.sa;
        params.sa.t0 = sa.t0.or(params.sa.t0);
        if let Some(v) = sa.step0 {
            params.sa.step0 = v;
        }
        if let Some(v) = sa.steps {
            params.sa.steps = v;
        }
        if let Some(v) = sa.target_acceptance {
            params.sa.target_acceptance = v;
        }
        if let Some(v) = sa.repeats {
            params.sa.repeats = v;
        }
        params
    }
}
