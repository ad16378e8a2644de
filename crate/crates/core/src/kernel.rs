//! Cell-pair weights `w(i,j) ≈ ∫_{cell_i}∫_{cell_j} |x-y|^-(n+sp) dx dy`.
//!
//! On a uniform lattice the weight only depends on the per-axis absolute
//! offsets `|k_d|` between the two cells, so the table stores one value per
//! offset vector instead of one per pair. Symmetry is then exact by
//! construction.
//!
//! Writing `x - y = h (k + t)`, the difference of two uniform points in unit
//! cells has the tent density `Π_d (1 - |t_d|)` on `[-1,1]^n`, which turns the
//! 2n-dimensional pair integral into
//!
//! ```text
//! w(k) = h^(2n-a) F(k),   F(k) = ∫_{[-1,1]^n} Π_d (1 - |t_d|) |k + t|^(-a) dt,   a = n + sp.
//! ```
//!
//! Near pairs (`|k| < 2√n`) integrate `F` numerically, with vertex-graded
//! rules on the orthants that contain the singular point `t = -k`. Far pairs
//! use the midpoint value `|k|^-a`.
//!
//! For face-adjacent cells `F` is finite only when `sp < 1`. For larger `sp`
//! the [`NearField::Regularized`] rule weights the near pairs by
//! `|k|^-p ∫ tent |k+t|^(p-a)`, which is what a locally affine field sees,
//! and is finite for every admissible `(s, p)`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::params::FractionalParams;
use crate::quadrature::{box_integral, vertex_graded_integral, GaussLegendre};

const GRADED_LEVELS: usize = 40;
const NEAR_SPLITS: usize = 4;

/// How near-diagonal pair weights are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NearField {
    /// `Exact` when the cell-pair integral converges (`sp < 1`), else `Regularized`.
    #[default]
    Auto,
    Exact,
    Regularized,
}

#[derive(Debug)]
pub struct KernelTable {
    grid: Grid,
    params: FractionalParams,
    near_field: NearField,
    table: Vec<f64>,
    strides: [usize; 3],
    dims: [usize; 3],
    tail: OnceLock<Vec<f64>>,
}

pub fn build_kernel(grid: &Grid, params: &FractionalParams) -> Result<KernelTable> {
    build_kernel_with(grid, params, NearField::Auto)
}

pub fn build_kernel_with(grid: &Grid, params: &FractionalParams, near_field: NearField) -> Result<KernelTable> {
    let n = grid.n();
    if params.n() != n {
        return Err(invalid(format!("params have n = {} but the grid has n = {n}", params.n())));
    }
    let sp = params.sp();
    let mode = match near_field {
        NearField::Auto if sp < 1.0 => NearField::Exact,
        NearField::Auto => NearField::Regularized,
        NearField::Exact if sp >= 1.0 => return Err(Error::DivergentNearField { sp }),
        other => other,
    };

    let mut dims = [1usize; 3];
    dims[..n].copy_from_slice(grid.dims());
    let strides = [1, dims[0], dims[0] * dims[1]];
    let total = dims.iter().product::<usize>();
    let a = params.kernel_exponent();
    let h = grid.h();
    let scale = h.powf(2.0 * n as f64 - a);
    let near_radius2 = 4.0 * n as f64;

    let mut table = vec![0.0; total];
    let mut cache = NearIntegrator::new(n);
    for (idx, slot) in table.iter_mut().enumerate() {
        if idx == 0 {
            continue;
        }
        let k = [idx % dims[0], (idx / dims[0]) % dims[1], idx / (dims[0] * dims[1])];
        let k = [k[0] as f64, k[1] as f64, k[2] as f64];
        let r2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        *slot = if r2 >= near_radius2 {
            scale * r2.powf(-0.5 * a)
        } else {
            match mode {
                NearField::Exact => scale * cache.tent_integral(&k[..n], -a)?,
                _ => scale * r2.powf(-0.5 * params.p()) * cache.tent_integral(&k[..n], params.p() - a)?,
            }
        };
    }

    Ok(KernelTable {
        grid: grid.clone(),
        params: *params,
        near_field: mode,
        table,
        strides,
        dims,
        tail: OnceLock::new(),
    })
}

struct NearIntegrator {
    n: usize,
    graded: GaussLegendre,
    smooth: GaussLegendre,
}

impl NearIntegrator {
    fn new(n: usize) -> Self {
        let graded_order = if n == 3 { 8 } else { 12 };
        NearIntegrator {
            n,
            graded: GaussLegendre::new(graded_order),
            smooth: GaussLegendre::new(8),
        }
    }

    /// `∫_{[-1,1]^n} Π(1-|t_d|) |k+t|^e dt`, split into the `2^n` orthants
    /// where the tent is smooth.
    fn tent_integral(&mut self, k: &[f64], e: f64) -> Result<f64> {
        let n = self.n;
        let mut total = 0.0;
        for orthant in 0..(1usize << n) {
            let sign: Vec<f64> = (0..n).map(|d| if orthant >> d & 1 == 1 { -1.0 } else { 1.0 }).collect();
            // The singular point t = -k sits at a vertex of this orthant iff
            // every -k_d is 0 or the far end sign_d.
            let singular = (0..n).all(|d| k[d] == 0.0 || -k[d] == sign[d]);
            if singular {
                // Local coordinates r in [0,1]^n pointing into the orthant
                // from t = -k. The tent factor is r_d on axes where the
                // vertex sits at |t_d| = 1 and 1 - r_d where it sits at 0;
                // forming it from t itself would cancel catastrophically.
                let nnz = k.iter().filter(|v| **v != 0.0).count() as f64;
                let value = vertex_graded_integral(&self.graded, n, nnz + e, GRADED_LEVELS, |r| {
                    let mut tent = 1.0;
                    let mut r2 = 0.0;
                    for d in 0..n {
                        tent *= if k[d] == 0.0 { 1.0 - r[d] } else { r[d] };
                        r2 += r[d] * r[d];
                    }
                    tent * r2.powf(0.5 * e)
                });
                match value {
                    Some(v) => total += v,
                    None => return Err(invalid(format!("cell-pair integral with exponent {e} diverges"))),
                }
            } else {
                let lo: Vec<f64> = sign.iter().map(|s| s.min(0.0)).collect();
                let hi: Vec<f64> = sign.iter().map(|s| s.max(0.0)).collect();
                total += box_integral(&self.smooth, &lo, &hi, NEAR_SPLITS, |t| {
                    let mut tent = 1.0;
                    let mut r2 = 0.0;
                    for d in 0..n {
                        tent *= 1.0 - t[d].abs();
                        let v = k[d] + t[d];
                        r2 += v * v;
                    }
                    tent * r2.powf(0.5 * e)
                });
            }
        }
        Ok(total)
    }
}

impl KernelTable {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &FractionalParams {
        &self.params
    }

    /// The near-field rule actually used (`Auto` resolved).
    pub fn near_field(&self) -> NearField {
        self.near_field
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    #[inline]
    fn offset_index(&self, i: usize, j: usize) -> usize {
        let a = self.grid.lattice_coords(i);
        let b = self.grid.lattice_coords(j);
        a[0].abs_diff(b[0]) + a[1].abs_diff(b[1]) * self.strides[1] + a[2].abs_diff(b[2]) * self.strides[2]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.table[self.offset_index(i, j)]
    }

    /// Weight for a lattice offset given per axis (signs ignored).
    pub fn offset_weight(&self, offset: &[i64]) -> f64 {
        let mut idx = 0;
        for (d, k) in offset.iter().enumerate() {
            idx += (k.unsigned_abs() as usize) * self.strides[d];
        }
        self.table[idx]
    }

    /// Call `f(j, w(i,j))` for every cell `j` in ascending order (including
    /// `j = i`, whose weight is 0).
    #[inline]
    pub fn visit_row<F: FnMut(usize, f64)>(&self, i: usize, mut f: F) {
        let c = self.grid.lattice_coords(i);
        let [d0, d1, d2] = self.dims;
        let [_, s1, s2] = self.strides;
        let mut j = 0;
        for z in 0..d2 {
            let oz = c[2].abs_diff(z) * s2;
            for y in 0..d1 {
                let oy = oz + c[1].abs_diff(y) * s1;
                let row = &self.table[oy..oy + d0];
                let cx = c[0];
                // left of i: offsets cx, cx-1, ..., 1; right: 0, 1, ...
                for x in 0..d0 {
                    f(j, row[cx.abs_diff(x)]);
                    j += 1;
                }
            }
        }
    }

    /// Per-cell `τ_i = ∫_{R^n \ E} |x_i - y|^-(n+sp) dy`, with `E` the box
    /// covered by the lattice; zero on collar cells. Computed on first use.
    pub fn exterior_tail(&self) -> &[f64] {
        self.tail.get_or_init(|| {
            let ext = self.grid.extended_box();
            let sp = self.params.sp();
            let a = self.params.kernel_exponent();
            let rule = GaussLegendre::new(8);
            let mut out = vec![0.0; self.grid.len()];
            let interior = self.grid.interior_indices();
            let values = crate::sum::par_map_ordered(interior, |i| {
                exterior_tail_at(self.grid.center(i), &ext.lo, &ext.hi, a, sp, &rule)
            });
            for (&i, v) in interior.iter().zip(values) {
                out[i] = v;
            }
            out
        })
    }
}

/// `∫_{R^n \ [lo,hi]} |x-y|^-a dy` for `x` inside the box, `a = n + sp`.
///
/// The divergence of `(y-x)|y-x|^-a` is `-sp |y-x|^-a`, so the exterior
/// integral equals `(1/sp) Σ_faces δ_f ∫_face |y-x|^-a dA` with `δ_f` the
/// distance from `x` to the face's plane.
pub fn exterior_tail_at(x: &[f64], lo: &[f64], hi: &[f64], a: f64, sp: f64, rule: &GaussLegendre) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for axis in 0..n {
        for plane in [lo[axis], hi[axis]] {
            let delta = (plane - x[axis]).abs();
            let face = match n {
                1 => delta.powf(-a),
                _ => {
                    let others: Vec<usize> = (0..n).filter(|&d| d != axis).collect();
                    face_integral(x, lo, hi, &others, delta, a, rule)
                }
            };
            total += delta * face;
        }
    }
    total / sp
}

fn face_integral(x: &[f64], lo: &[f64], hi: &[f64], axes: &[usize], delta: f64, a: f64, rule: &GaussLegendre) -> f64 {
    let pieces: Vec<Vec<(f64, f64)>> = axes
        .iter()
        .map(|&d| graded_pieces(x[d], lo[d], hi[d], delta))
        .collect();
    let delta2 = delta * delta;
    match axes.len() {
        1 => pieces[0]
            .iter()
            .map(|&(p, q)| {
                rule.integrate(p, q, |y| {
                    let dy = y - x[axes[0]];
                    (delta2 + dy * dy).powf(-0.5 * a)
                })
            })
            .sum(),
        2 => {
            let mut acc = 0.0;
            for &(p0, q0) in &pieces[0] {
                for &(p1, q1) in &pieces[1] {
                    acc += rule.integrate(p0, q0, |y0| {
                        let d0 = y0 - x[axes[0]];
                        rule.integrate(p1, q1, |y1| {
                            let d1 = y1 - x[axes[1]];
                            (delta2 + d0 * d0 + d1 * d1).powf(-0.5 * a)
                        })
                    });
                }
            }
            acc
        }
        _ => unreachable!("n <= 3"),
    }
}

/// Split `[lo, hi]` at `foot ± δ·{0, 1/2, 1, 2, 4, ...}`.
fn graded_pieces(foot: f64, lo: f64, hi: f64, delta: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![lo, hi];
    if foot > lo && foot < hi {
        cuts.push(foot);
    }
    let mut step = 0.5 * delta;
    while step < (hi - lo) {
        for c in [foot - step, foot + step] {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        step *= 2.0;
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| (w[0], w[1])).filter(|(p, q)| q > p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisBox};

    fn grid(n: usize, s: f64, p: f64, h: f64, collar: f64) -> Grid {
        let params = FractionalParams::new(s, p, n, 2).unwrap();
        build_grid(params, AxisBox::centered_cube(n, 1.0).unwrap(), h, collar).unwrap()
    }

    /// Second difference of `G(t) = t^(2-a) / ((1-a)(2-a))` is the exact 1D
    /// tent integral of `|k + t|^-a` for `k >= 1`.
    fn tent_1d_closed_form(k: f64, a: f64) -> f64 {
        let g = |t: f64| if t == 0.0 { 0.0 } else { t.powf(2.0 - a) / ((1.0 - a) * (2.0 - a)) };
        g(k + 1.0) - 2.0 * g(k) + g(k - 1.0)
    }

    #[test]
    fn one_dimensional_near_weight_matches_closed_form() {
        let g = grid(1, 0.4, 2.0, 0.1, 0.5);
        let k = build_kernel(&g, g.params()).unwrap();
        assert_eq!(k.near_field(), NearField::Exact);
        let a = 1.8;
        let expected = 0.1f64.powf(2.0 - a) * tent_1d_closed_form(1.0, a);
        let got = k.offset_weight(&[1]);
        assert!((got / expected - 1.0).abs() < 1e-9, "{got} vs {expected}");
        // |k| = 2 is already far: midpoint
        assert_eq!(k.offset_weight(&[2]), 0.1f64.powf(2.0 - a) * 2f64.powf(-a));
    }

    #[test]
    fn well_separated_pair_is_midpoint() {
        let g = grid(1, 0.5, 2.0, 0.1, 0.5);
        let k = build_kernel(&g, g.params()).unwrap();
        let w = k.offset_weight(&[10]);
        assert!((w / 0.01 - 1.0).abs() < 0.01);
    }

    #[test]
    fn symmetric_and_zero_diagonal() {
        let g = grid(2, 0.3, 2.0, 0.25, 0.5);
        let k = build_kernel(&g, g.params()).unwrap();
        for i in (0..g.len()).step_by(7) {
            assert_eq!(k.weight(i, i), 0.0);
            for j in (0..g.len()).step_by(5) {
                assert_eq!(k.weight(i, j), k.weight(j, i));
                if i != j {
                    assert!(k.weight(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn visit_row_agrees_with_weight() {
        let g = grid(2, 0.3, 2.0, 0.25, 0.5);
        let k = build_kernel(&g, g.params()).unwrap();
        let i = 37;
        let mut seen = 0;
        k.visit_row(i, |j, w| {
            assert_eq!(w, k.weight(i, j));
            assert_eq!(j, seen);
            seen += 1;
        });
        assert_eq!(seen, g.len());
    }

    #[test]
    fn exact_mode_rejected_when_divergent() {
        let g = grid(1, 0.6, 2.0, 0.25, 0.5);
        assert!(matches!(
            build_kernel_with(&g, g.params(), NearField::Exact),
            Err(Error::DivergentNearField { .. })
        ));
        let k = build_kernel(&g, g.params()).unwrap();
        assert_eq!(k.near_field(), NearField::Regularized);
        assert!(k.offset_weight(&[1]).is_finite());
    }

    #[test]
    fn regularized_near_weight_for_affine_pairs() {
        // For u(x) = x in 1D the cell-pair energy is ∫∫ |x-y|^(p-a); the
        // regularized weight reproduces it exactly: w |k h|^p.
        let g = grid(1, 0.6, 2.0, 0.1, 0.5);
        let k = build_kernel(&g, g.params()).unwrap();
        let a = 2.2;
        let e = 2.0 - a;
        // ∫ tent |1+t|^e over [-1,1]: second difference of t^(e+2)/((e+1)(e+2))
        let gfun = |t: f64| if t == 0.0 { 0.0 } else { t.powf(e + 2.0) / ((e + 1.0) * (e + 2.0)) };
        let f = gfun(2.0) - 2.0 * gfun(1.0) + gfun(0.0);
        let pair_energy = 0.1f64.powf(2.0 + e) * f;
        let got = k.offset_weight(&[1]) * 0.1f64.powi(2);
        assert!((got / pair_energy - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_tail_closed_form() {
        let g = grid(1, 0.4, 2.0, 0.25, 0.5);
        let k = build_kernel(&g, g.params()).unwrap();
        let ext = g.extended_box();
        for &i in g.interior_indices() {
            let x = g.center(i)[0];
            let expected = ((x - ext.lo[0]).powf(-0.8) + (ext.hi[0] - x).powf(-0.8)) / 0.8;
            assert!((k.exterior_tail()[i] / expected - 1.0).abs() < 1e-12);
        }
        for &i in g.collar_indices() {
            assert_eq!(k.exterior_tail()[i], 0.0);
        }
    }

    #[test]
    fn two_dimensional_tail_matches_radial_bounds() {
        // A square of half-width L contains the disc of radius L and sits in
        // the disc of radius L√2, bracketing the exterior integral at its
        // center between the two radial closed forms 2π r^-sp / sp.
        let g = grid(2, 0.5, 2.5, 0.25, 1.0);
        let k = build_kernel(&g, g.params()).unwrap();
        let rule = GaussLegendre::new(8);
        let ext = g.extended_box();
        let sp = 1.25;
        let v = exterior_tail_at(&[0.0, 0.0], &ext.lo, &ext.hi, 3.25, sp, &rule);
        let l: f64 = 2.0;
        let upper = 2.0 * std::f64::consts::PI * l.powf(-sp) / sp;
        let lower = 2.0 * std::f64::consts::PI * (l * 2f64.sqrt()).powf(-sp) / sp;
        assert!(v < upper && v > lower, "{lower} < {v} < {upper}");
        assert!(k.exterior_tail().iter().all(|t| t.is_finite()));
    }

    #[test]
    fn two_dimensional_tail_matches_brute_force() {
        // Polar sum over the exterior of the square, far enough out.
        let rule = GaussLegendre::new(8);
        let lo = [-1.0, -1.0];
        let hi = [1.0, 1.0];
        let x = [0.3, -0.5];
        let a = 2.0 + 1.2;
        let v = exterior_tail_at(&x, &lo, &hi, a, 1.2, &rule);
        // For each direction, the ray leaves the box at distance ρ(θ);
        // ∫_ρ^∞ r^(1-a) dr = ρ^(2-a)/(a-2).
        let m = 20000;
        let mut acc = 0.0;
        for q in 0..m {
            let th = (q as f64 + 0.5) / m as f64 * std::f64::consts::TAU;
            let (s, c) = th.sin_cos();
            let mut rho = f64::INFINITY;
            for (dir, p) in [(c, x[0]), (s, x[1])] {
                if dir > 0.0 {
                    rho = rho.min((1.0 - p) / dir);
                } else if dir < 0.0 {
                    rho = rho.min((-1.0 - p) / dir);
                }
            }
            acc += rho.powf(2.0 - a) / (a - 2.0);
        }
        acc *= std::f64::consts::TAU / m as f64;
        assert!((v / acc - 1.0).abs() < 1e-6, "{v} vs {acc}");
    }
}
