//! JSON configuration schema for simulation experiments and standalone
//! hypothesis files.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::TestKind;
use crate::model::{basis_columns, Directions, EntryLaw, Spike, SpikedModel};
use crate::spectral::SpikePartition;

fn default_mixture_draws() -> usize {
    20_000
}

/// One spike declaration in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeConfig {
    pub d: f64,
    #[serde(default = "one")]
    pub multiplicity: usize,
}

fn one() -> usize {
    1
}

/// Population model description: `M` is derived as `round(y * N)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub y: f64,
    pub spikes: Vec<SpikeConfig>,
    /// Either the token `"standard-basis"` or an explicit orthonormal
    /// column matrix.
    #[serde(default = "standard_basis")]
    pub directions: DirectionsConfig,
    pub law: EntryLaw,
}

fn standard_basis() -> DirectionsConfig {
    DirectionsConfig::Token("standard-basis".into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionsConfig {
    Token(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TestKindConfig {
    Equality,
    Orthogonality,
}

impl From<TestKindConfig> for TestKind {
    fn from(k: TestKindConfig) -> Self {
        match k {
            TestKindConfig::Equality => TestKind::Equality,
            TestKindConfig::Orthogonality => TestKind::Orthogonality,
        }
    }
}

/// Hypothesis description inside a scenario config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisConfig {
    pub kind: TestKindConfig,
    /// Standard-basis axes (1-based) spanning the hypothesized subspace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_axes: Option<Vec<usize>>,
    /// Explicit orthonormal basis, one inner vector per column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_matrix: Option<Vec<Vec<f64>>>,
    /// Tested spike indices, 1-based per-index positions.
    pub target_spikes: Vec<usize>,
}

/// Rotation of one axis toward another, used by the power alternatives:
/// the vector at `from_axis` becomes `cos(phi) e_from + sin(phi) e_toward`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RotationConfig {
    pub from_axis: usize,
    pub toward_axis: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlternativeConfig {
    pub rotations: Vec<RotationConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_i: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecdf: Option<String>,
}

/// A full simulation experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelConfig,
    pub hypothesis: HypothesisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<AlternativeConfig>,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    #[serde(default = "default_mixture_draws")]
    pub mixture_draws: usize,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Row dimension `M = round(y N)`.
    pub fn dim(&self) -> usize {
        (self.model.y * self.model.n as f64).round() as usize
    }

    pub fn rank(&self) -> usize {
        self.model.spikes.iter().map(|s| s.multiplicity).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "level {} must lie in (0, 1)",
                self.level
            )));
        }
        if self.model.n == 0 || !(self.model.y > 0.0 && self.model.y.is_finite()) {
            return Err(Error::InvalidConfig("invalid model dimensions".into()));
        }
        if self.dim() < self.rank() {
            return Err(Error::InvalidConfig(format!(
                "dimension M = {} is below the declared spike count {}",
                self.dim(),
                self.rank()
            )));
        }
        if self.hypothesis.target_spikes.is_empty() {
            return Err(Error::InvalidConfig("empty target set".into()));
        }
        for &t in &self.hypothesis.target_spikes {
            if t == 0 || t > self.rank() {
                return Err(Error::InvalidConfig(format!(
                    "target spike {t} out of 1..={}",
                    self.rank()
                )));
            }
        }
        if self.hypothesis.z0_axes.is_none() && self.hypothesis.z0_matrix.is_none() {
            return Err(Error::InvalidConfig(
                "hypothesis needs z0_axes or z0_matrix".into(),
            ));
        }
        if let Some(alt) = &self.alternative {
            for r in &alt.rotations {
                if r.from_axis == 0 || r.toward_axis == 0 || r.from_axis == r.toward_axis {
                    return Err(Error::InvalidConfig("invalid rotation axes".into()));
                }
                if r.from_axis > self.dim() || r.toward_axis > self.dim() {
                    return Err(Error::InvalidConfig(
                        "rotation axis exceeds the dimension".into(),
                    ));
                }
            }
        }
        match &self.model.directions {
            DirectionsConfig::Token(t) if t == "standard-basis" => {}
            DirectionsConfig::Token(t) => {
                return Err(Error::InvalidConfig(format!(
                    "unknown directions token '{t}'"
                )))
            }
            DirectionsConfig::Matrix(_) => {}
        }
        self.model.law.validate()?;
        Ok(())
    }

    /// Materialize the population model; `rotation` applies the alternative
    /// rotations at angle `phi` to the spike directions (equality-test power).
    pub fn build_model(&self, rotation: Option<f64>) -> Result<SpikedModel> {
        let m = self.dim();
        let spikes: Vec<Spike> = self
            .model
            .spikes
            .iter()
            .map(|s| Spike {
                d: s.d,
                multiplicity: s.multiplicity,
            })
            .collect();
        let mut dirs = match &self.model.directions {
            DirectionsConfig::Token(_) => None,
            DirectionsConfig::Matrix(rows) => Some(rows_to_matrix(rows, m, self.rank())?),
        };
        if let Some(phi) = rotation {
            if phi != 0.0 {
                let alt = self.alternative.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("power run without an alternative spec".into())
                })?;
                let mut mat = dirs.unwrap_or_else(|| standard_dirs(m, self.rank()));
                apply_rotations(&mut mat, &alt.rotations, phi, RotationTarget::SpikeAxes)?;
                dirs = Some(mat);
            }
        }
        let directions = match dirs {
            Some(mat) => Directions::Explicit(mat),
            None => Directions::StandardBasis,
        };
        SpikedModel::new(m, self.model.n, spikes, directions, self.model.law.clone())
    }

    /// Hypothesized subspace basis; `rotation` applies the alternative
    /// rotations at angle `phi` to the basis (orthogonality-test power).
    pub fn build_z0(&self, rotation: Option<f64>) -> Result<Array2<f64>> {
        let m = self.dim();
        let mut z0 = match (&self.hypothesis.z0_axes, &self.hypothesis.z0_matrix) {
            (Some(axes), None) => basis_columns(m, axes)?,
            (None, Some(rows)) => {
                rows_to_matrix(rows, m, self.hypothesis.target_spikes.len().max(1))?
            }
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "give z0_axes or z0_matrix, not both".into(),
                ))
            }
            (None, None) => unreachable!("validated"),
        };
        if let Some(phi) = rotation {
            if phi != 0.0 {
                let alt = self.alternative.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("power run without an alternative spec".into())
                })?;
                apply_rotations(&mut z0, &alt.rotations, phi, RotationTarget::BasisAxes)?;
            }
        }
        Ok(z0)
    }

    /// Declared multiplicity partition of the leading eigenvalues.
    pub fn partition(&self) -> Result<SpikePartition> {
        let mults: Vec<usize> = self.model.spikes.iter().map(|s| s.multiplicity).collect();
        SpikePartition::from_multiplicities(&mults)
    }

    /// Tested per-index set, 0-based.
    pub fn target_indices(&self) -> Vec<usize> {
        self.hypothesis
            .target_spikes
            .iter()
            .map(|t| t - 1)
            .collect()
    }
}

fn standard_dirs(m: usize, r: usize) -> Array2<f64> {
    let mut mat = Array2::zeros((m, r));
    for j in 0..r {
        mat[(j, j)] = 1.0;
    }
    mat
}

fn rows_to_matrix(rows: &[Vec<f64>], m: usize, _hint: usize) -> Result<Array2<f64>> {
    if rows.len() != m {
        return Err(Error::InvalidConfig(format!(
            "matrix has {} rows, expected {m}",
            rows.len()
        )));
    }
    let cols = rows.first().map(|r| r.len()).unwrap_or(0);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidConfig("ragged matrix rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((m, cols), flat).map_err(|e| Error::InvalidConfig(e.to_string()))
}

enum RotationTarget {
    /// Rotate spike direction columns (matched by their standard axis).
    SpikeAxes,
    /// Rotate hypothesis basis columns (matched by their standard axis).
    BasisAxes,
}

fn apply_rotations(
    mat: &mut Array2<f64>,
    rotations: &[RotationConfig],
    phi: f64,
    _target: RotationTarget,
) -> Result<()> {
    let (c, s) = (phi.cos(), phi.sin());
    for rot in rotations {
        let from = rot.from_axis - 1;
        let toward = rot.toward_axis - 1;
        if from >= mat.nrows() || toward >= mat.nrows() {
            return Err(Error::InvalidConfig("rotation axis out of range".into()));
        }
        // find the column currently equal to e_from
        let col = (0..mat.ncols()).find(|&j| {
            let cview = mat.column(j);
            cview[from] == 1.0 && cview.iter().map(|v| v * v).sum::<f64>() == 1.0
        });
        let j = col.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "no standard-basis column on axis {} to rotate",
                rot.from_axis
            ))
        })?;
        let mut column = mat.column_mut(j);
        column[from] = c;
        column[toward] = s;
    }
    Ok(())
}

/// Standalone hypothesis file consumed by the `test` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisFile {
    pub kind: TestKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_axes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_matrix: Option<Vec<Vec<f64>>>,
    /// Declared multiplicities of the leading spikes.
    pub multiplicities: Vec<usize>,
    /// Tested spike indices, 1-based.
    pub target_spikes: Vec<usize>,
    #[serde(default)]
    pub kappa4: f64,
    /// Non-target spike directions as standard axes (1-based) or a matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement_axes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement_matrix: Option<Vec<Vec<f64>>>,
    /// Target spike directions (fourth-cumulant terms only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_axes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub mixture: MixtureConfig,
}

fn default_levels() -> Vec<f64> {
    vec![0.1]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub draws: usize,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            draws: default_mixture_draws(),
            seed: 0,
            stream: 0,
        }
    }
}

impl HypothesisFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let h: HypothesisFile = serde_json::from_str(text)?;
        if h.multiplicities.is_empty() || h.multiplicities.iter().any(|&m| m == 0) {
            return Err(Error::InvalidConfig("invalid multiplicities".into()));
        }
        let r: usize = h.multiplicities.iter().sum();
        if h.target_spikes.is_empty() || h.target_spikes.iter().any(|&t| t == 0 || t > r) {
            return Err(Error::InvalidConfig("invalid target spikes".into()));
        }
        Ok(h)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build(&self, m: usize) -> Result<(crate::inference::Hypothesis, SpikePartition)> {
        let z0 = match (&self.z0_axes, &self.z0_matrix) {
            (Some(axes), None) => basis_columns(m, axes)?,
            (None, Some(rows)) => rows_to_matrix(rows, m, 1)?,
            _ => {
                return Err(Error::InvalidConfig(
                    "hypothesis needs exactly one of z0_axes/z0_matrix".into(),
                ))
            }
        };
        let complement_dirs = match (&self.complement_axes, &self.complement_matrix) {
            (Some(axes), None) => Some(basis_columns(m, axes)?),
            (None, Some(rows)) => Some(rows_to_matrix(rows, m, 1)?),
            (None, None) => None,
            _ => {
                return Err(Error::InvalidConfig(
                    "give complement_axes or complement_matrix, not both".into(),
                ))
            }
        };
        let target_dirs = match (&self.target_axes, &self.target_matrix) {
            (Some(axes), None) => Some(basis_columns(m, axes)?),
            (None, Some(rows)) => Some(rows_to_matrix(rows, m, 1)?),
            (None, None) => None,
            _ => {
                return Err(Error::InvalidConfig(
                    "give target_axes or target_matrix, not both".into(),
                ))
            }
        };
        let hyp = crate::inference::Hypothesis {
            kind: self.kind.into(),
            z0,
            target: self.target_spikes.iter().map(|t| t - 1).collect(),
            complement_dirs,
            target_dirs,
        };
        Ok((hyp, SpikePartition::from_multiplicities(&self.multiplicities)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json() -> String {
        r#"{
            "name": "demo",
            "model": {
                "n": 200, "y": 0.5,
                "spikes": [{"d": 9.0}, {"d": 7.0}],
                "law": {"kind": "gaussian"}
            },
            "hypothesis": {
                "kind": "equality",
                "z0_axes": [1, 2],
                "target_spikes": [1, 2]
            },
            "reps": 4, "level": 0.1, "seed": 7
        }"#
        .to_string()
    }

    #[test]
    fn parses_and_validates() {
        let cfg = ScenarioConfig::from_json(&sample_json()).unwrap();
        assert_eq!(cfg.dim(), 100);
        assert_eq!(cfg.rank(), 2);
        assert_eq!(cfg.target_indices(), vec![0, 1]);
        let model = cfg.build_model(None).unwrap();
        assert_eq!(model.dim(), 100);
        let z0 = cfg.build_z0(None).unwrap();
        assert_eq!(z0.dim(), (100, 2));
        assert_eq!(z0[(0, 0)], 1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_json()).unwrap();
        v["level"] = serde_json::json!(1.5);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&sample_json()).unwrap();
        v["reps"] = serde_json::json!(0);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&sample_json()).unwrap();
        v["hypothesis"]["target_spikes"] = serde_json::json!([3]);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        // missing required field
        let mut v: serde_json::Value = serde_json::from_str(&sample_json()).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn rotation_builds_tilted_directions() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_json()).unwrap();
        v["alternative"] = serde_json::json!({
            "rotations": [
                {"from_axis": 1, "toward_axis": 4},
                {"from_axis": 2, "toward_axis": 5}
            ]
        });
        let cfg = ScenarioConfig::from_json(&v.to_string()).unwrap();
        let phi = std::f64::consts::FRAC_PI_4;
        let model = cfg.build_model(Some(phi)).unwrap();
        let v1 = model.direction(0);
        assert!((v1[0] - phi.cos()).abs() < 1e-15);
        assert!((v1[3] - phi.sin()).abs() < 1e-15);
        // phi = 0 keeps the standard basis
        let model = cfg.build_model(Some(0.0)).unwrap();
        assert_eq!(model.direction(0)[0], 1.0);
    }

    #[test]
    fn two_point_law_round_trip() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_json()).unwrap();
        v["model"]["law"] = serde_json::json!({
            "kind": "two-point",
            "value_hi": 2.0f64.sqrt(),
            "value_lo": -(0.5f64.sqrt()),
            "prob_hi": 1.0 / 3.0
        });
        let cfg = ScenarioConfig::from_json(&v.to_string()).unwrap();
        let (k3, k4) = cfg.model.law.cumulants();
        assert!((k4 + 1.5).abs() < 1e-12);
        assert!(k3 > 0.0);
        let text = cfg.to_json().unwrap();
        let cfg2 = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(cfg2.model.law, cfg.model.law);
    }

    #[test]
    fn hypothesis_file_round_trip() {
        let h = HypothesisFile {
            kind: TestKindConfig::Orthogonality,
            z0_axes: Some(vec![3, 4]),
            z0_matrix: None,
            multiplicities: vec![1, 1, 1],
            target_spikes: vec![1, 2],
            kappa4: 0.0,
            complement_axes: Some(vec![3]),
            complement_matrix: None,
            target_axes: None,
            target_matrix: None,
            levels: vec![0.1],
            mixture: MixtureConfig::default(),
        };
        let text = h.to_json().unwrap();
        let h2 = HypothesisFile::from_json(&text).unwrap();
        let (hyp, part) = h2.build(10).unwrap();
        assert_eq!(hyp.target, vec![0, 1]);
        assert_eq!(part.groups().len(), 3);
        assert_eq!(hyp.complement_dirs.as_ref().unwrap().dim(), (10, 1));
    }
}
