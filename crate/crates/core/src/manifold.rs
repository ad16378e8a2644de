//! Target manifolds: nearest-point projection, tangent projectors, shifted
//! retractions and the comparison-map construction.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy::{dist2, gagliardo_energy};
use crate::error::{invalid, Error, Result};
use crate::field::FieldMap;
use crate::grid::BallSpec;
use crate::kernel::KernelTable;

/// Points closer than this to the origin are outside the sphere's projection tube.
pub const SPHERE_TUBE_MIN: f64 = 1e-8;

const SHIFT_CLEARANCE: f64 = 1e-12;

type ProjectFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;
type TangentFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type RetractFn = dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync;

/// User-supplied target given by its projection, tangent projector (row-major
/// `N x N`) and shifted retraction `P_a`; optionally the inverse of `P_a`
/// restricted to the target.
#[derive(Clone)]
pub struct CustomTarget {
    pub project: Arc<ProjectFn>,
    pub tangent_projector: Arc<TangentFn>,
    pub retraction_shifted: Arc<RetractFn>,
    pub retraction_inverse: Option<Arc<RetractFn>>,
}

#[derive(Clone)]
pub enum TargetKind {
    /// Unit sphere `S^(N-1)`.
    Sphere,
    /// No constraint: `π = id`, `Π = I`.
    Euclidean,
    Custom(CustomTarget),
}

impl fmt::Debug for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::Sphere => write!(f, "Sphere"),
            TargetKind::Euclidean => write!(f, "Euclidean"),
            TargetKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    kind: TargetKind,
    ambient_dim: usize,
    lambda_conn: usize,
    reach_rho: f64,
}

impl ManifoldSpec {
    /// `S^(N-1) ⊂ R^N`; its first nontrivial homotopy group is `π_(N-1)`, so `λ = N`.
    pub fn sphere(ambient_dim: usize) -> Self {
        ManifoldSpec {
            kind: TargetKind::Sphere,
            ambient_dim,
            lambda_conn: ambient_dim,
            reach_rho: 1.0,
        }
    }

    pub fn euclidean(ambient_dim: usize) -> Self {
        ManifoldSpec {
            kind: TargetKind::Euclidean,
            ambient_dim,
            lambda_conn: usize::MAX,
            reach_rho: f64::INFINITY,
        }
    }

    pub fn custom(ambient_dim: usize, target: CustomTarget, lambda_conn: usize, reach_rho: f64) -> Self {
        ManifoldSpec {
            kind: TargetKind::Custom(target),
            ambient_dim,
            lambda_conn,
            reach_rho,
        }
    }

    pub fn with_lambda(mut self, lambda_conn: usize) -> Self {
        self.lambda_conn = lambda_conn;
        self
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn lambda_conn(&self) -> usize {
        self.lambda_conn
    }

    pub fn reach_rho(&self) -> f64 {
        self.reach_rho
    }

    pub fn is_constrained(&self) -> bool {
        !matches!(self.kind, TargetKind::Euclidean)
    }

    /// Topological hypothesis `λ > max{p, 2}` for runs that claim it.
    pub fn check_hypotheses(&self, p: f64) -> Result<()> {
        if (self.lambda_conn as f64) > p.max(2.0) {
            Ok(())
        } else {
            Err(invalid(format!(
                "connectivity index λ = {} must exceed max(p, 2) = {}",
                self.lambda_conn,
                p.max(2.0)
            )))
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            TargetKind::Sphere => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= SPHERE_TUBE_MIN {
                    return Err(Error::OutsideTube { norm });
                }
                Ok(x.iter().map(|v| v / norm).collect())
            }
            TargetKind::Euclidean => Ok(x.to_vec()),
            TargetKind::Custom(c) => (c.project)(x),
        }
    }

    /// `Π(u)` as a row-major `N x N` matrix.
    pub fn tangent_projector(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        match &self.kind {
            TargetKind::Sphere => {
                let mut m = vec![0.0; n * n];
                for r in 0..n {
                    for c in 0..n {
                        m[r * n + c] = if r == c { 1.0 } else { 0.0 } - u[r] * u[c];
                    }
                }
                m
            }
            TargetKind::Euclidean => {
                let mut m = vec![0.0; n * n];
                for r in 0..n {
                    m[r * n + r] = 1.0;
                }
                m
            }
            TargetKind::Custom(c) => (c.tangent_projector)(u),
        }
    }

    /// `Π⊥(u) = I - Π(u)`.
    pub fn normal_projector(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut m = self.tangent_projector(u);
        for r in 0..n {
            for c in 0..n {
                m[r * n + c] = if r == c { 1.0 } else { 0.0 } - m[r * n + c];
            }
        }
        m
    }

    /// `Π(u) v` without forming the matrix where possible.
    pub fn apply_tangent(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        match &self.kind {
            TargetKind::Sphere => {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                v.iter().zip(u).map(|(vi, ui)| vi - dot * ui).collect()
            }
            TargetKind::Euclidean => v.to_vec(),
            TargetKind::Custom(c) => mat_vec(&(c.tangent_projector)(u), v),
        }
    }

    /// `|(π(u) - π(v)) - Π(v)(u - v)| = |Π⊥(v)(u - v)|` for `u, v` on the target.
    pub fn taylor_remainder(&self, u: &[f64], v: &[f64]) -> f64 {
        let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
        let tangent = self.apply_tangent(v, &diff);
        dist2(&diff, &tangent).sqrt()
    }

    /// `P_a(x) = P(x - a)`.
    pub fn retraction_shifted(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            TargetKind::Sphere => {
                let d: Vec<f64> = x.iter().zip(a).map(|(x, a)| x - a).collect();
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::RetractionSingular);
                }
                Ok(d.iter().map(|v| v / norm).collect())
            }
            TargetKind::Euclidean => Ok(x.iter().zip(a).map(|(x, a)| x - a).collect()),
            TargetKind::Custom(c) => (c.retraction_shifted)(x, a),
        }
    }

    /// `(P_a|_N)^-1 (y)`: the point of the target that `P_a` sends to `y`.
    pub fn retraction_inverse(&self, y: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            TargetKind::Sphere => {
                // x = a + t y with |x| = 1 and t > 0
                let ay: f64 = a.iter().zip(y).map(|(a, y)| a * y).sum();
                let aa: f64 = a.iter().map(|v| v * v).sum();
                let disc = ay * ay - aa + 1.0;
                if aa >= 1.0 || disc < 0.0 {
                    return Err(invalid("shift must lie inside the unit ball"));
                }
                let t = -ay + disc.sqrt();
                Ok(a.iter().zip(y).map(|(a, y)| a + t * y).collect())
            }
            TargetKind::Euclidean => Ok(y.iter().zip(a).map(|(y, a)| y + a).collect()),
            TargetKind::Custom(c) => match &c.retraction_inverse {
                Some(inv) => inv(y, a),
                None => Ok(y.to_vec()),
            },
        }
    }

    /// Project every value of the field onto the target.
    pub fn project_field(&self, field: &mut FieldMap) -> Result<()> {
        for i in 0..field.len() {
            let p = self.project(field.value(i))?;
            field.value_mut(i).copy_from_slice(&p);
        }
        Ok(())
    }

    /// Largest distance of a field value from its projection.
    pub fn constraint_violation(&self, field: &FieldMap) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..field.len() {
            let p = self.project(field.value(i))?;
            worst = worst.max(dist2(&p, field.value(i)).sqrt());
        }
        Ok(worst)
    }
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|r| (0..n).map(|c| m[r * n + c] * v[c]).sum()).collect()
}

/// Uniform sample of the ball of the given radius in `R^dim`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
    dir.iter().map(|v| v / norm * r).collect()
}

/// Largest difference quotients of `P_a` restricted to the target and of its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProbe {
    pub shift: Vec<f64>,
    pub samples: usize,
    pub forward_max: f64,
    pub inverse_max: f64,
}

pub fn lipschitz_probe<R: Rng + ?Sized>(
    manifold: &ManifoldSpec,
    shift: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<LipschitzProbe> {
    let dim = manifold.ambient_dim();
    let mut forward_max: f64 = 0.0;
    let mut inverse_max: f64 = 0.0;
    for k in 0..samples {
        let x = manifold.project(&sample_ball(rng, dim, 1.0))?;
        // pair separations from 1e-3 to 1
        let scale = 10f64.powf(-3.0 * (k as f64 + 0.5) / samples as f64);
        let step: Vec<f64> = sample_ball(rng, dim, scale);
        let moved: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        let y = manifold.project(&moved)?;
        let dxy = dist2(&x, &y).sqrt();
        if dxy == 0.0 {
            continue;
        }
        let px = manifold.retraction_shifted(&x, shift)?;
        let py = manifold.retraction_shifted(&y, shift)?;
        let dp = dist2(&px, &py).sqrt();
        forward_max = forward_max.max(dp / dxy);
        if dp > 0.0 {
            inverse_max = inverse_max.max(dxy / dp);
        }
    }
    Ok(LipschitzProbe {
        shift: shift.to_vec(),
        samples,
        forward_max,
        inverse_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOptions {
    /// Radius `r` of the inner ball where the cutoff equals 1. Defaults to `R/2`.
    pub inner_radius: Option<f64>,
    /// Shifts are drawn uniformly from `B_(shift_radius)(0) ⊂ R^N`.
    pub shift_radius: f64,
    pub shift_samples: usize,
    /// Fresh batches of `shift_samples` drawn when a whole batch hits the singular set.
    pub max_retries: usize,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        ComparisonOptions {
            inner_radius: None,
            shift_radius: 0.5,
            shift_samples: 64,
            max_retries: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    pub field: FieldMap,
    pub shift: Vec<f64>,
    /// Ball-by-everything energy of the result.
    pub energy_w: f64,
    /// Ball-by-everything energy of the unconstrained interpolant `v`.
    pub energy_v: f64,
    /// `energy_w / energy_v`; `None` when `energy_v = 0`.
    pub c_meas: Option<f64>,
    pub rejected_shifts: usize,
}

/// Comparison map for the ball `B_R(x0)`: interpolate towards the mean over
/// `mean_ball` with a piecewise-linear radial cutoff, push the interpolant
/// back to the target through `(P_a|_N)^-1 ∘ P_a` for the best sampled shift
/// `a`, and leave every cell outside the ball (and every frozen cell) as is.
pub fn comparison_map<R: Rng + ?Sized>(
    field: &FieldMap,
    kernel: &KernelTable,
    manifold: &ManifoldSpec,
    ball: &BallSpec,
    mean_ball: &BallSpec,
    opts: &ComparisonOptions,
    rng: &mut R,
) -> Result<ComparisonResult> {
    let grid = kernel.grid();
    field.check_compatible(grid.len())?;
    let outer = ball.radius;
    let inner = opts.inner_radius.unwrap_or(0.5 * outer);
    if !(inner > 0.0 && inner < outer) {
        return Err(invalid(format!("cutoff radii need 0 < r < R, got r = {inner}, R = {outer}")));
    }
    if opts.shift_samples == 0 {
        return Err(invalid("shift_samples must be positive"));
    }
    let idx: Vec<usize> = grid
        .ball_indices(ball)
        .into_iter()
        .filter(|&i| !field.is_frozen(i))
        .collect();
    let mean_idx = grid.ball_indices(mean_ball);
    if mean_idx.is_empty() {
        return Err(invalid("mean ball contains no cells"));
    }
    let mean = crate::energy::ball_mean(field, &mean_idx);

    let mut v = field.clone();
    for &i in &idx {
        let r = grid.distance(i, &ball.center);
        let eta = ((outer - r) / (outer - inner)).clamp(0.0, 1.0);
        let ui = field.value(i).to_vec();
        for (d, slot) in v.value_mut(i).iter_mut().enumerate() {
            *slot = eta * mean[d] + (1.0 - eta) * ui[d];
        }
    }
    let all: Vec<usize> = (0..grid.len()).collect();
    let energy_v = gagliardo_energy(&v, kernel, &idx, &all)?;

    let dim = field.dim();
    let mut best: Option<(f64, Vec<f64>, FieldMap)> = None;
    let mut rejected = 0;
    for _batch in 0..=opts.max_retries {
        for _ in 0..opts.shift_samples {
            let a = sample_ball(rng, dim, opts.shift_radius);
            let clear = idx.iter().all(|&i| dist2(v.value(i), &a).sqrt() >= SHIFT_CLEARANCE);
            if !clear {
                rejected += 1;
                continue;
            }
            let mut w = field.clone();
            for &i in &idx {
                let y = manifold.retraction_shifted(v.value(i), &a)?;
                let x = manifold.retraction_inverse(&y, &a)?;
                w.value_mut(i).copy_from_slice(&x);
            }
            let e = gagliardo_energy(&w, kernel, &idx, &all)?;
            if best.as_ref().map_or(true, |(be, _, _)| e < *be) {
                best = Some((e, a, w));
            }
        }
        if best.is_some() {
            break;
        }
    }
    let (energy_w, shift, w) = best.ok_or(Error::ShiftRetriesExhausted((opts.max_retries + 1) * opts.shift_samples))?;
    Ok(ComparisonResult {
        field: w,
        shift,
        energy_w,
        energy_v,
        c_meas: (energy_v > 0.0).then(|| energy_w / energy_v),
        rejected_shifts: rejected,
    })
}
