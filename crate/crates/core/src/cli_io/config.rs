//! Run configuration files (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid_with_cap, default_collar_width, AxisBox, BallSpec, Grid, DEFAULT_CELL_CAP};
use crate::kernel::NearField;
use crate::manifold::ManifoldSpec;
use crate::minimize::MinimizeOptions;
use crate::params::FractionalParams;
use crate::presets::Preset;

/// Version of the config, manifest and report schemas.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "box")]
    pub domain: BoxConfig,
    pub h: f64,
    /// Defaults to twice the diameter of the box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collar_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Unvalidated `(s, p, n, N)`, so that every violation can be reported at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub s: f64,
    pub p: f64,
    pub n: usize,
    pub target_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Sphere,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub kind: ManifoldKind,
    /// Connectivity index; defaults to `N` for spheres.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<usize>,
    /// Refuse to run unless `λ > max{p, 2}`.
    #[serde(default)]
    pub require_hypotheses: bool,
}

/// One diagnostic probe and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProbeConfig {
    Energy {
        balls: Vec<BallSpec>,
    },
    Caccioppoli {
        center: Vec<f64>,
        rhos: Vec<f64>,
    },
    Decay {
        centers: Vec<Vec<f64>>,
        radius: f64,
        #[serde(default = "default_theta")]
        theta: f64,
        /// Defaults to `0.1 ×` the median normalized energy at `radius`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps1: Option<f64>,
    },
    Blowup {
        center: Vec<f64>,
        radius: f64,
    },
    Singular {
        scales: Vec<f64>,
        /// Defaults to `0.1 ×` the median normalized energy at the largest scale.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps1: Option<f64>,
    },
    Holder {
        region: BallSpec,
        radii: Vec<f64>,
        #[serde(default = "default_holder_residual")]
        residual_threshold: f64,
    },
    Gehring {
        balls: Vec<BallSpec>,
        /// Defaults to the embedding exponent for `(n, s, p)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
        /// Defaults to `[1.25 p, 1.5 p]`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_bars: Option<Vec<f64>>,
        #[serde(default = "default_enlargement")]
        enlargement: f64,
    },
    Holefill {
        center: Vec<f64>,
        radii: Vec<f64>,
        /// Defaults to `sp`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        /// Defaults to `p`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        #[serde(default = "default_holefill_tol")]
        tol: f64,
    },
}

fn default_theta() -> f64 {
    0.25
}

fn default_holder_residual() -> f64 {
    crate::diagnostics::HolderOptions::default().residual_threshold
}

fn default_enlargement() -> f64 {
    2.0
}

fn default_holefill_tol() -> f64 {
    0.05
}

impl ProbeConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProbeConfig::Energy { .. } => "energy",
            ProbeConfig::Caccioppoli { .. } => "caccioppoli",
            ProbeConfig::Decay { .. } => "decay",
            ProbeConfig::Blowup { .. } => "blowup",
            ProbeConfig::Singular { .. } => "singular",
            ProbeConfig::Holder { .. } => "holder",
            ProbeConfig::Gehring { .. } => "gehring",
            ProbeConfig::Holefill { .. } => "holefill",
        }
    }

    fn validate(&self, label: &str, n: usize, p: f64, problems: &mut Vec<String>) {
        let mut point = |what: &str, x: &[f64]| {
            if x.len() != n {
                problems.push(format!("{label}: {what} has {} coordinates, expected n = {n}", x.len()));
            }
        };
        let positive = |what: &str, xs: &[f64], problems: &mut Vec<String>| {
            if xs.is_empty() {
                problems.push(format!("{label}: {what} must not be empty"));
            }
            if let Some(x) = xs.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                problems.push(format!("{label}: {what} must be positive, got {x}"));
            }
        };
        match self {
            ProbeConfig::Energy { balls } | ProbeConfig::Gehring { balls, .. } => {
                for b in balls {
                    point("ball center", &b.center);
                }
                let radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
                positive("ball radii", &radii, problems);
            }
            ProbeConfig::Caccioppoli { center, rhos } => {
                point("center", center);
                positive("rhos", rhos, problems);
            }
            ProbeConfig::Decay { centers, radius, theta, eps1 } => {
                for c in centers {
                    point("center", c);
                }
                if centers.is_empty() {
                    problems.push(format!("{label}: centers must not be empty"));
                }
                positive("radius", &[*radius], problems);
                if !(*theta > 0.0 && *theta < 0.5) {
                    problems.push(format!(
                        "{label}: θ must lie in (0, 1/2) as the decay estimate requires, got {theta}"
                    ));
                }
                if let Some(e) = eps1 {
                    positive("eps1", &[*e], problems);
                }
            }
            ProbeConfig::Blowup { center, radius } => {
                point("center", center);
                positive("radius", &[*radius], problems);
            }
            ProbeConfig::Singular { scales, eps1 } => {
                positive("scales", scales, problems);
                if let Some(e) = eps1 {
                    positive("eps1", &[*e], problems);
                }
            }
            ProbeConfig::Holder { region, radii, residual_threshold } => {
                point("region center", &region.center);
                positive("region radius", &[region.radius], problems);
                positive("radii", radii, problems);
                positive("residual_threshold", &[*residual_threshold], problems);
            }
            ProbeConfig::Holefill { center, radii, alpha, beta, tol } => {
                point("center", center);
                positive("radii", radii, problems);
                for e in alpha.iter().chain(beta.iter()) {
                    positive("exponents", &[*e], problems);
                }
                positive("tol", &[*tol], problems);
            }
        }
        if let ProbeConfig::Gehring { q, p_bars, enlargement, .. } = self {
            if let Some(q) = q {
                if !(*q > 1.0 && *q < p) {
                    problems.push(format!("{label}: q must lie in (1, p) = (1, {p}), got {q}"));
                }
            }
            if let Some(b) = p_bars.iter().flatten().find(|b| !(**b > p)) {
                problems.push(format!("{label}: every p̄ must exceed p = {p}, got {b}"));
            }
            if !(*enlargement >= 1.0) {
                problems.push(format!("{label}: enlargement must be at least 1, got {enlargement}"));
            }
        }
    }
}

/// Parameter lists for a Cartesian sweep; an empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    /// Applied to every decay probe.
    pub theta: Vec<f64>,
    /// Applied to every decay and singular probe.
    pub eps1: Vec<f64>,
}

/// One point of a sweep. `None` keeps the base value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub h: Option<f64>,
    pub theta: Option<f64>,
    pub eps1: Option<f64>,
}

impl SweepConfig {
    /// Points in lexicographic order `(s, p, h, θ, ε₁)`, last axis fastest.
    pub fn points(&self) -> Vec<SweepPoint> {
        fn axis(v: &[f64]) -> Vec<Option<f64>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        }
        let mut out = Vec::new();
        for &s in &axis(&self.s) {
            for &p in &axis(&self.p) {
                for &h in &axis(&self.h) {
                    for &theta in &axis(&self.theta) {
                        for &eps1 in &axis(&self.eps1) {
                            out.push(SweepPoint { s, p, h, theta, eps1 });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub grid: GridConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub near_field: NearField,
    pub manifold: ManifoldConfig,
    /// Exterior data, also used as the initial guess inside the box.
    pub boundary: Preset,
    #[serde(default)]
    pub minimize: MinimizeOptions,
    #[serde(default)]
    pub diagnostics: Vec<ProbeConfig>,
    /// Seeds the minimizer restarts; overrides `minimize.seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl RunConfig {
    /// Parse and validate; every violated precondition is reported.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<()> {
        let problems = self.validate();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.format_version != FORMAT_VERSION {
            problems.push(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            ));
        }
        let ParamsConfig { s, p, n, target_dim } = self.params;
        if let Err(e) = FractionalParams::new(s, p, n, target_dim) {
            problems.extend(e.to_string().trim_start_matches("invalid parameter: ").split("; ").map(String::from));
        }
        let g = &self.grid;
        if g.domain.lo.len() != n || g.domain.hi.len() != n {
            problems.push(format!("grid box corners must have n = {n} coordinates"));
        } else if let Err(e) = AxisBox::new(g.domain.lo.clone(), g.domain.hi.clone()) {
            problems.push(e.to_string());
        }
        if !(g.h > 0.0 && g.h.is_finite()) {
            problems.push(format!("grid h must be positive, got {}", g.h));
        }
        if let Some(c) = g.collar_width {
            if !(c > 0.0 && c.is_finite()) {
                problems.push(format!("grid collar_width must be positive, got {c}"));
            }
        }
        if self.manifold.kind == ManifoldKind::Sphere && target_dim < 2 {
            problems.push("sphere targets need N >= 2".into());
        }
        if self.manifold.require_hypotheses {
            if let Err(e) = self.manifold_spec().check_hypotheses(p) {
                problems.push(e.to_string());
            }
        }
        problems.extend(self.boundary.validate(n, target_dim));
        problems.extend(self.minimize.validate());
        for (k, probe) in self.diagnostics.iter().enumerate() {
            probe.validate(&format!("diagnostics[{k}] ({})", probe.kind()), n, p, &mut problems);
        }
        if let Some(sweep) = &self.sweep {
            for (name, list) in [("s", &sweep.s), ("p", &sweep.p), ("h", &sweep.h), ("eps1", &sweep.eps1)] {
                if let Some(v) = list.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    problems.push(format!("sweep.{name} values must be positive, got {v}"));
                }
            }
            if let Some(t) = sweep.theta.iter().find(|t| !(**t > 0.0 && **t < 0.5)) {
                problems.push(format!(
                    "sweep.theta: θ must lie in (0, 1/2) as the decay estimate requires, got {t}"
                ));
            }
        }
        problems
    }

    pub fn fractional_params(&self) -> Result<FractionalParams> {
        let c = self.params;
        FractionalParams::new(c.s, c.p, c.n, c.target_dim)
    }

    pub fn domain(&self) -> Result<AxisBox> {
        AxisBox::new(self.grid.domain.lo.clone(), self.grid.domain.hi.clone())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let domain = self.domain()?;
        let collar = self.grid.collar_width.unwrap_or_else(|| default_collar_width(&domain));
        build_grid_with_cap(
            self.fractional_params()?,
            domain,
            self.grid.h,
            collar,
            self.grid.cell_cap.unwrap_or(DEFAULT_CELL_CAP),
        )
    }

    pub fn manifold_spec(&self) -> ManifoldSpec {
        let base = match self.manifold.kind {
            ManifoldKind::Sphere => ManifoldSpec::sphere(self.params.target_dim),
            ManifoldKind::Euclidean => ManifoldSpec::euclidean(self.params.target_dim),
        };
        match self.manifold.lambda {
            Some(l) => base.with_lambda(l),
            None => base,
        }
    }

    /// Minimizer options with the run seed applied.
    pub fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions {
            seed: self.seed,
            ..self.minimize.clone()
        }
    }

    /// The configuration of one sweep point (without its sweep block).
    pub fn at_point(&self, point: &SweepPoint) -> RunConfig {
        let mut out = self.clone();
        out.sweep = None;
        if let Some(s) = point.s {
            out.params.s = s;
        }
        if let Some(p) = point.p {
            out.params.p = p;
        }
        if let Some(h) = point.h {
            out.grid.h = h;
        }
        for probe in &mut out.diagnostics {
            match probe {
                ProbeConfig::Decay { theta, eps1, .. } => {
                    if let Some(t) = point.theta {
                        *theta = t;
                    }
                    if point.eps1.is_some() {
                        *eps1 = point.eps1;
                    }
                }
                ProbeConfig::Singular { eps1, .. } => {
                    if point.eps1.is_some() {
                        *eps1 = point.eps1;
                    }
                }
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "format_version": 1,
        "grid": { "box": { "lo": [-1.0], "hi": [1.0] }, "h": 0.0625, "collar_width": 0.25 },
        "params": { "s": 0.4, "p": 2.0, "n": 1, "target_dim": 2 },
        "manifold": { "kind": "sphere" },
        "boundary": { "kind": "smooth-bump" }
    }"#;

    #[test]
    fn minimal_config_loads_with_defaults() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert_eq!(c.minimize, MinimizeOptions::default());
        assert_eq!(c.near_field, NearField::Auto);
        assert!(c.diagnostics.is_empty());
        assert_eq!(c.build_grid().unwrap().interior_indices().len(), 32);
    }

    #[test]
    fn every_violation_is_listed() {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        v["params"]["s"] = 1.5.into();
        v["grid"]["h"] = (-1.0).into();
        v["diagnostics"] = serde_json::json!([
            { "probe": "decay", "centers": [[0.0]], "radius": 0.5, "theta": 0.7 }
        ]);
        let err = RunConfig::from_json(&v.to_string()).unwrap_err();
        let Error::Validation(list) = err else { panic!("expected a validation error") };
        assert_eq!(list.len(), 3, "{list:?}");
        assert!(list.iter().any(|m| m.contains("θ must lie in (0, 1/2)")));
        assert!(list.iter().any(|m| m.contains("s must lie in (0, 1)")));
    }

    #[test]
    fn sweep_points_are_cartesian() {
        let sweep = SweepConfig {
            s: vec![0.3, 0.4],
            p: vec![2.0, 3.0],
            ..SweepConfig::default()
        };
        let pts = sweep.points();
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].s, pts[1].p), (Some(0.3), Some(3.0)));
        assert_eq!(SweepConfig::default().points().len(), 1);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        v["grid"]["hh"] = 1.into();
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }
}
