//! Canonical boundary data and initial fields.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::FieldMap;
use crate::grid::Grid;

/// Boundary data (and initial guess) sampled on every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Preset {
    /// The same value everywhere.
    Constant { value: Vec<f64> },
    /// `x / |x|` (the first `n` components; remaining components zero).
    #[serde(rename = "radial-degree-1")]
    RadialDegreeOne,
    /// `(cos φ, sin φ, 0, ...)` with `φ(x) = slope·x_1 + amplitude·exp(-|x|²/width²)`.
    SmoothBump {
        #[serde(default = "default_slope")]
        slope: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    /// `(cos φ, sin φ, 0, ...)` with `φ(x) = scale·|x_1 - x0|^exponent`: Hölder
    /// continuous with exactly that exponent at `x0` when `exponent < 1`.
    HolderProfile {
        exponent: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// A field snapshot written by `solve`.
    File { path: std::path::PathBuf },
}

fn default_slope() -> f64 {
    0.5
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_width() -> f64 {
    0.5
}

fn default_scale() -> f64 {
    1.0
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Constant { .. } => "constant",
            Preset::RadialDegreeOne => "radial-degree-1",
            Preset::SmoothBump { .. } => "smooth-bump",
            Preset::HolderProfile { .. } => "holder-profile",
            Preset::File { .. } => "file",
        }
    }

    pub fn validate(&self, n: usize, target_dim: usize) -> Vec<String> {
        let mut problems = Vec::new();
        match self {
            Preset::Constant { value } => {
                if value.len() != target_dim {
                    problems.push(format!(
                        "constant preset has {} components, target dimension is {target_dim}",
                        value.len()
                    ));
                }
            }
            Preset::RadialDegreeOne => {
                if target_dim < n {
                    problems.push(format!("radial-degree-1 needs N >= n, got N = {target_dim}, n = {n}"));
                }
            }
            Preset::SmoothBump { width, .. } => {
                if !(*width > 0.0) {
                    problems.push(format!("smooth-bump width must be positive, got {width}"));
                }
            }
            Preset::HolderProfile { exponent, .. } => {
                if !(*exponent > 0.0) {
                    problems.push(format!("holder-profile exponent must be positive, got {exponent}"));
                }
            }
            Preset::File { path } => {
                if !path.exists() {
                    problems.push(format!("preset file {} does not exist", path.display()));
                }
            }
        }
        problems
    }

    /// Sample the preset on `grid` (collar cells frozen).
    pub fn sample(&self, grid: &Grid, target_dim: usize) -> Result<FieldMap> {
        let problems = self.validate(grid.n(), target_dim);
        if !problems.is_empty() {
            return Err(invalid(problems.join("; ")));
        }
        let angle_field = |phi: &dyn Fn(&[f64]) -> f64| {
            FieldMap::from_fn(grid, target_dim, |x| {
                let a = phi(x);
                let mut v = vec![0.0; target_dim];
                v[0] = a.cos();
                v[1] = a.sin();
                v
            })
        };
        Ok(match self {
            Preset::Constant { value } => FieldMap::constant(grid, value),
            Preset::RadialDegreeOne => FieldMap::from_fn(grid, target_dim, |x| {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let mut v = vec![0.0; target_dim];
                if norm == 0.0 {
                    v[0] = 1.0;
                } else {
                    for (d, c) in x.iter().enumerate() {
                        v[d] = c / norm;
                    }
                }
                v
            }),
            Preset::SmoothBump { slope, amplitude, width } => angle_field(&|x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                slope * x[0] + amplitude * (-r2 / (width * width)).exp()
            }),
            Preset::HolderProfile { exponent, x0, scale } => {
                angle_field(&|x: &[f64]| scale * (x[0] - x0).abs().powf(*exponent))
            }
            Preset::File { path } => {
                let snap = crate::cli_io::snapshot::read_snapshot(path)?;
                snap.check_grid(grid)?;
                if snap.field.dim() != target_dim {
                    return Err(invalid(format!(
                        "snapshot has N = {}, config has N = {target_dim}",
                        snap.field.dim()
                    )));
                }
                snap.field
            }
        })
    }
}
