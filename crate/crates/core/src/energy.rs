//! Discrete Gagliardo energies, the fractional p-Laplacian and Campanato
//! quotients.
//!
//! Conventions:
//!
//! * `gagliardo_energy(A, B) = Σ_{i∈A, j∈B} w(i,j) |u_i - u_j|^p`, an ordered
//!   sum, so the total over all cells counts every unordered pair twice, as
//!   the double integral over `R^n x R^n` does.
//! * When every collar cell carries the same value `c`, the interaction with
//!   the exterior beyond the collar is added in closed form:
//!   `t_i = h^n τ_i |u_i - c|^p` with `τ_i` from
//!   [`KernelTable::exterior_tail`]. It enters the total twice (both orders)
//!   and a localized energy once. Otherwise it is dropped and a bound on the
//!   dropped mass is reported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldMap;
use crate::grid::{BallSpec, Grid};
use crate::kernel::{KernelTable, NearField};
use crate::sum::{compensated_sum, par_map_ordered, CompensatedSum};

/// `|d|^p` and `|d|^(p-2)` from `|d|^2`, with fast paths for common `p`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Power {
    p: f64,
    kind: PowerKind,
}

#[derive(Debug, Clone, Copy)]
enum PowerKind {
    Two,
    TwoAndHalf,
    Three,
    General,
}

impl Power {
    pub(crate) fn new(p: f64) -> Self {
        let kind = if p == 2.0 {
            PowerKind::Two
        } else if p == 2.5 {
            PowerKind::TwoAndHalf
        } else if p == 3.0 {
            PowerKind::Three
        } else {
            PowerKind::General
        };
        Power { p, kind }
    }

    #[inline]
    pub(crate) fn pow_p(&self, r2: f64) -> f64 {
        match self.kind {
            PowerKind::Two => r2,
            PowerKind::TwoAndHalf => r2 * r2.sqrt().sqrt(),
            PowerKind::Three => r2 * r2.sqrt(),
            PowerKind::General => {
                if r2 == 0.0 {
                    0.0
                } else {
                    r2.powf(0.5 * self.p)
                }
            }
        }
    }

    /// `|d|^(p-2)`, continuously extended by 0 at `d = 0` for `p > 2`.
    #[inline]
    pub(crate) fn pow_pm2(&self, r2: f64) -> f64 {
        match self.kind {
            PowerKind::Two => 1.0,
            PowerKind::TwoAndHalf => r2.sqrt().sqrt(),
            PowerKind::Three => r2.sqrt(),
            PowerKind::General => {
                if r2 == 0.0 {
                    0.0
                } else {
                    r2.powf(0.5 * self.p - 1.0)
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// How the interaction with the exterior beyond the collar is handled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TailMode {
    /// Constant exterior data, added in closed form.
    Analytic { exterior_value: Vec<f64> },
    /// Non-constant collar; the beyond-collar mass is dropped. `bound`
    /// assumes the far exterior takes values within the collar's range.
    Dropped { bound: f64 },
}

/// Per-cell exterior terms `t_i` (zero on the collar) and the mode used.
pub fn exterior_terms(field: &FieldMap, kernel: &KernelTable) -> (Vec<f64>, TailMode) {
    let grid = kernel.grid();
    let power = Power::new(kernel.params().p());
    let vol = grid.cell_volume();
    let tau = kernel.exterior_tail();
    match field.constant_exterior(grid) {
        Some(c) => {
            let terms = (0..field.len())
                .map(|i| if tau[i] == 0.0 { 0.0 } else { vol * tau[i] * power.pow_p(dist2(field.value(i), &c)) })
                .collect();
            (terms, TailMode::Analytic { exterior_value: c })
        }
        None => {
            let collar = grid.collar_indices();
            let dim = field.dim();
            let mut mean = vec![0.0; dim];
            for (d, m) in mean.iter_mut().enumerate() {
                *m = compensated_sum(collar.iter().map(|&i| field.value(i)[d])) / collar.len() as f64;
            }
            let spread = collar
                .iter()
                .map(|&i| dist2(field.value(i), &mean).sqrt())
                .fold(0.0, f64::max);
            let bound = compensated_sum(grid.interior_indices().iter().map(|&i| {
                let r = dist2(field.value(i), &mean).sqrt() + spread;
                2.0 * vol * tau[i] * r.powf(kernel.params().p())
            }));
            (vec![0.0; field.len()], TailMode::Dropped { bound })
        }
    }
}

fn row_energy(field: &FieldMap, kernel: &KernelTable, power: &Power, i: usize) -> f64 {
    let ui = field.value(i);
    let mut acc = CompensatedSum::new();
    kernel.visit_row(i, |j, w| {
        if w != 0.0 {
            acc.add(w * power.pow_p(dist2(ui, field.value(j))));
        }
    });
    acc.value()
}

/// `Σ_{j} w(i,j)|u_i-u_j|^p` for each listed row, in the given order.
pub fn row_energies(field: &FieldMap, kernel: &KernelTable, rows: &[usize]) -> Vec<f64> {
    let power = Power::new(kernel.params().p());
    par_map_ordered(rows, |i| row_energy(field, kernel, &power, i))
}

pub fn gagliardo_energy(field: &FieldMap, kernel: &KernelTable, region_a: &[usize], region_b: &[usize]) -> Result<f64> {
    field.check_compatible(kernel.len())?;
    let power = Power::new(kernel.params().p());
    if region_b.len() == kernel.len() && region_b.iter().enumerate().all(|(k, &j)| k == j) {
        return Ok(compensated_sum(row_energies(field, kernel, region_a)));
    }
    let rows = par_map_ordered(region_a, |i| {
        let ui = field.value(i);
        compensated_sum(
            region_b
                .iter()
                .map(|&j| kernel.weight(i, j) * power.pow_p(dist2(ui, field.value(j)))),
        )
    });
    Ok(compensated_sum(rows))
}

/// Both variables over all of `R^n` (each unordered pair counted twice).
pub fn total_energy(field: &FieldMap, kernel: &KernelTable) -> Result<f64> {
    field.check_compatible(kernel.len())?;
    let all: Vec<usize> = (0..kernel.len()).collect();
    let rows = row_energies(field, kernel, &all);
    let (tails, _) = exterior_terms(field, kernel);
    let mut acc = CompensatedSum::new();
    for (r, t) in rows.iter().zip(&tails) {
        acc.add(*r);
        acc.add(2.0 * t);
    }
    Ok(acc.value())
}

/// One variable in the ball, the other over all of `R^n`.
pub fn localized_energy(field: &FieldMap, kernel: &KernelTable, ball: &BallSpec) -> Result<f64> {
    field.check_compatible(kernel.len())?;
    let idx = kernel.grid().ball_indices(ball);
    let rows = row_energies(field, kernel, &idx);
    let (tails, _) = exterior_terms(field, kernel);
    let mut acc = CompensatedSum::new();
    for (r, &i) in rows.iter().zip(&idx) {
        acc.add(*r);
        acc.add(tails[i]);
    }
    Ok(acc.value())
}

/// Per-cell one-sided energies `Σ_j w(i,j)|u_i-u_j|^p + t_i` for every cell;
/// a localized energy is the sum of these over the ball.
pub fn one_sided_energies(field: &FieldMap, kernel: &KernelTable) -> Result<Vec<f64>> {
    field.check_compatible(kernel.len())?;
    let all: Vec<usize> = (0..kernel.len()).collect();
    let rows = row_energies(field, kernel, &all);
    let (tails, _) = exterior_terms(field, kernel);
    Ok(rows.iter().zip(&tails).map(|(r, t)| r + t).collect())
}

/// `R^(sp-n)` times the localized energy: invariant under `u ↦ u(λ·)`.
pub fn normalized_energy(field: &FieldMap, kernel: &KernelTable, ball: &BallSpec) -> Result<f64> {
    Ok(ball.radius.powf(kernel.params().sp_minus_n()) * localized_energy(field, kernel, ball)?)
}

/// Weighted tail `Σ_j h^n |u_j|^(p-1) / (1 + |x_j - x0|^(n+sp))`, the
/// discrete membership gauge for data entering the nonlocal operator.
pub fn tail_integral(field: &FieldMap, grid: &Grid, x0: &[f64]) -> Result<f64> {
    field.check_compatible(grid.len())?;
    let p = grid.params().p();
    let a = grid.params().kernel_exponent();
    let vol = grid.cell_volume();
    Ok(compensated_sum((0..grid.len()).map(|j| {
        let norm = field.value(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        vol * norm.powf(p - 1.0) / (1.0 + grid.distance(j, x0).powf(a))
    })))
}

fn operator_row(field: &FieldMap, kernel: &KernelTable, power: &Power, tails: &TailInfo, i: usize, out: &mut [f64]) {
    let ui = field.value(i);
    let dim = ui.len();
    let mut acc = [CompensatedSum::new(); 8];
    let mut big;
    let acc: &mut [CompensatedSum] = if dim <= 8 {
        &mut acc[..dim]
    } else {
        big = vec![CompensatedSum::new(); dim];
        &mut big
    };
    kernel.visit_row(i, |j, w| {
        if w == 0.0 {
            return;
        }
        let uj = field.value(j);
        let g = w * power.pow_pm2(dist2(ui, uj));
        if g != 0.0 {
            for d in 0..dim {
                acc[d].add(g * (ui[d] - uj[d]));
            }
        }
    });
    let inv_vol = 1.0 / kernel.grid().cell_volume();
    for d in 0..dim {
        out[d] = 2.0 * acc[d].value() * inv_vol;
    }
    if let Some(c) = &tails.exterior {
        let tau = tails.tau[i];
        if tau != 0.0 {
            let g = 2.0 * tau * power.pow_pm2(dist2(ui, c));
            for d in 0..dim {
                out[d] += g * (ui[d] - c[d]);
            }
        }
    }
}

struct TailInfo<'a> {
    tau: &'a [f64],
    exterior: Option<Vec<f64>>,
}

impl<'a> TailInfo<'a> {
    fn new(field: &FieldMap, kernel: &'a KernelTable) -> Self {
        TailInfo {
            tau: kernel.exterior_tail(),
            exterior: field.constant_exterior(kernel.grid()),
        }
    }
}

/// Pointwise density `2 Σ_{j≠i} w(i,j)|u_i-u_j|^(p-2)(u_i-u_j) / h^n`, plus
/// the beyond-collar contribution `2 τ_i |u_i-c|^(p-2)(u_i-c)` under
/// constant exterior data.
pub fn fractional_p_laplacian(field: &FieldMap, kernel: &KernelTable, i: usize) -> Result<Vec<f64>> {
    kernel.params().require_operator_range()?;
    field.check_compatible(kernel.len())?;
    let power = Power::new(kernel.params().p());
    let tails = TailInfo::new(field, kernel);
    let mut out = vec![0.0; field.dim()];
    operator_row(field, kernel, &power, &tails, i, &mut out);
    Ok(out)
}

/// The operator at every listed cell, flattened `cells.len() x N`.
pub fn fractional_p_laplacian_cells(field: &FieldMap, kernel: &KernelTable, cells: &[usize]) -> Result<Vec<f64>> {
    kernel.params().require_operator_range()?;
    field.check_compatible(kernel.len())?;
    Ok(operator_cells(field, kernel, cells))
}

pub(crate) fn operator_cells(field: &FieldMap, kernel: &KernelTable, cells: &[usize]) -> Vec<f64> {
    let power = Power::new(kernel.params().p());
    let tails = TailInfo::new(field, kernel);
    let dim = field.dim();
    let rows = par_map_ordered(cells, |i| {
        let mut out = vec![0.0; dim];
        operator_row(field, kernel, &power, &tails, i, &mut out);
        out
    });
    rows.concat()
}

/// `Σ_{i<j} 2 w |u_i-u_j|^(p-2) (u_i-u_j)·(φ_i-φ_j)` plus the beyond-collar
/// term, i.e. the distributional pairing `<(-Δ_p)^s u, φ>`.
pub fn weak_residual(field: &FieldMap, kernel: &KernelTable, test: &FieldMap) -> Result<f64> {
    kernel.params().require_operator_range()?;
    field.check_compatible(kernel.len())?;
    test.check_compatible(kernel.len())?;
    if test.dim() != field.dim() {
        return Err(Error::Mismatch(format!(
            "test field has dimension {}, field has {}",
            test.dim(),
            field.dim()
        )));
    }
    let support: Vec<usize> = (0..test.len())
        .filter(|&i| test.value(i).iter().any(|v| *v != 0.0))
        .collect();
    if let Some(&i) = support.iter().find(|&&i| field.is_frozen(i)) {
        return Err(Error::TestFieldOnFrozen(i));
    }
    let mut in_support = vec![false; test.len()];
    for &i in &support {
        in_support[i] = true;
    }
    let power = Power::new(kernel.params().p());
    let tails = TailInfo::new(field, kernel);
    let vol = kernel.grid().cell_volume();
    let rows = par_map_ordered(&support, |i| {
        let ui = field.value(i);
        let pi = test.value(i);
        let mut acc = CompensatedSum::new();
        kernel.visit_row(i, |j, w| {
            // each unordered pair once: skip supported partners below i
            if w == 0.0 || (in_support[j] && j < i) {
                return;
            }
            let uj = field.value(j);
            let pj = test.value(j);
            let g = w * power.pow_pm2(dist2(ui, uj));
            if g != 0.0 {
                let mut dot = 0.0;
                for d in 0..ui.len() {
                    dot += (ui[d] - uj[d]) * (pi[d] - pj[d]);
                }
                acc.add(2.0 * g * dot);
            }
        });
        if let Some(c) = &tails.exterior {
            let g = 2.0 * vol * tails.tau[i] * power.pow_pm2(dist2(ui, c));
            let dot: f64 = ui.iter().zip(c).zip(pi).map(|((u, c), f)| (u - c) * f).sum();
            acc.add(g * dot);
        }
        acc.value()
    });
    Ok(compensated_sum(rows))
}

pub(crate) fn ball_mean(field: &FieldMap, idx: &[usize]) -> Vec<f64> {
    let dim = field.dim();
    (0..dim)
        .map(|d| compensated_sum(idx.iter().map(|&i| field.value(i)[d])) / idx.len().max(1) as f64)
        .collect()
}

/// `r^-lam Σ_{i∈B_r} h^n |u_i - mean_B u|^p`.
pub fn campanato_quotient(field: &FieldMap, grid: &Grid, ball: &BallSpec, lam: f64, p: f64) -> Result<f64> {
    field.check_compatible(grid.len())?;
    let idx = grid.ball_indices(ball);
    if idx.is_empty() {
        return Ok(0.0);
    }
    let mean = ball_mean(field, &idx);
    let power = Power::new(p);
    let vol = grid.cell_volume();
    let sum = compensated_sum(idx.iter().map(|&i| vol * power.pow_p(dist2(field.value(i), &mean))));
    Ok(ball.radius.powf(-lam) * sum)
}

/// One localized/normalized energy entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedEntry {
    pub ball: BallSpec,
    pub localized: f64,
    pub normalized: f64,
    /// `R < 2h`: too few cells for the normalization to mean much.
    pub under_resolved: bool,
    /// The ball contains collar cells, so truncation error may dominate.
    pub touches_collar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub s: f64,
    pub p: f64,
    pub n: usize,
    pub h: f64,
    pub collar_width: f64,
    pub near_field: NearField,
    pub tail_mode: TailMode,
    pub total: f64,
    /// Beyond-collar part of `total` (zero when dropped).
    pub tail: f64,
    pub localized: Vec<LocalizedEntry>,
}

pub fn energy_report(field: &FieldMap, kernel: &KernelTable, balls: &[BallSpec]) -> Result<EnergyReport> {
    let grid = kernel.grid();
    let params = kernel.params();
    let total = total_energy(field, kernel)?;
    let (tails, tail_mode) = exterior_terms(field, kernel);
    let tail = 2.0 * compensated_sum(tails.iter().copied());
    let mut localized = Vec::with_capacity(balls.len());
    for ball in balls {
        let loc = localized_energy(field, kernel, ball)?;
        let idx = grid.ball_indices(ball);
        localized.push(LocalizedEntry {
            ball: ball.clone(),
            localized: loc,
            normalized: ball.radius.powf(params.sp_minus_n()) * loc,
            under_resolved: ball.radius < 2.0 * grid.h(),
            touches_collar: idx.iter().any(|&i| !grid.is_interior(i)),
        });
    }
    Ok(EnergyReport {
        s: params.s(),
        p: params.p(),
        n: params.n(),
        h: grid.h(),
        collar_width: grid.collar_width(),
        near_field: kernel.near_field(),
        tail_mode,
        total,
        tail,
        localized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisBox};
    use crate::kernel::build_kernel;
    use crate::params::FractionalParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, s: f64, p: f64, h: f64, collar: f64) -> (Grid, KernelTable) {
        let params = FractionalParams::new(s, p, n, 2).unwrap();
        let g = build_grid(params, AxisBox::centered_cube(n, 0.5).unwrap(), h, collar).unwrap();
        let k = build_kernel(&g, &params).unwrap();
        (g, k)
    }

    fn random_field(g: &Grid, seed: u64) -> FieldMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FieldMap::from_fn(g, 2, |_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
    }

    fn naive(field: &FieldMap, k: &KernelTable, a: &[usize], b: &[usize], p: f64) -> f64 {
        let mut s = 0.0;
        for &i in a {
            for &j in b {
                let d: f64 = field.value(i).iter().zip(field.value(j)).map(|(x, y)| (x - y).powi(2)).sum();
                s += k.weight(i, j) * d.sqrt().powf(p);
            }
        }
        s
    }

    #[test]
    fn power_fast_paths_agree() {
        for p in [2.0, 2.5, 3.0, 2.2] {
            let pw = Power::new(p);
            for r in [0.3f64, 1.0, 1.7] {
                assert!((pw.pow_p(r * r) - r.powf(p)).abs() < 1e-14);
                assert!((pw.pow_pm2(r * r) - r.powf(p - 2.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_field_has_zero_energy_and_operator() {
        let (g, k) = setup(2, 0.5, 2.5, 0.125, 0.25);
        let f = FieldMap::constant(&g, &[0.6, 0.8]);
        assert_eq!(total_energy(&f, &k).unwrap(), 0.0);
        assert_eq!(localized_energy(&f, &k, &BallSpec::new(vec![0.0, 0.0], 0.3)).unwrap(), 0.0);
        assert_eq!(fractional_p_laplacian(&f, &k, 10).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_cell_field_hand_sum() {
        let (g, k) = setup(1, 0.5, 2.0, 0.25, 0.25);
        let mut f = FieldMap::zeros(g.len(), 2);
        f.value_mut(3)[0] = 1.0;
        let pair = [2usize, 3];
        let e = gagliardo_energy(&f, &k, &pair, &pair).unwrap();
        assert_eq!(e, 2.0 * k.weight(2, 3));
    }

    #[test]
    fn matches_naive_double_loop() {
        let (g, k) = setup(1, 0.4, 2.5, 0.125, 0.125);
        assert_eq!(g.len(), 10);
        let f = random_field(&g, 3);
        let a: Vec<usize> = (0..8).collect();
        let e = gagliardo_energy(&f, &k, &a, &a).unwrap();
        assert!((e - naive(&f, &k, &a, &a, 2.5)).abs() <= 1e-12 * e);
        let all: Vec<usize> = (0..g.len()).collect();
        let e = gagliardo_energy(&f, &k, &a[..3], &all).unwrap();
        assert!((e - naive(&f, &k, &a[..3], &all, 2.5)).abs() <= 1e-12 * e);
    }

    #[test]
    fn whole_grid_ball_is_total() {
        let (g, k) = setup(2, 0.3, 2.0, 0.125, 0.25);
        let mut f = random_field(&g, 1);
        for &i in g.collar_indices() {
            f.value_mut(i).copy_from_slice(&[1.0, 0.0]);
        }
        let tot = total_energy(&f, &k).unwrap();
        let all = BallSpec::new(vec![0.0, 0.0], 100.0);
        let loc = localized_energy(&f, &k, &all).unwrap();
        let (tails, mode) = exterior_terms(&f, &k);
        assert!(matches!(mode, TailMode::Analytic { .. }));
        let t: f64 = tails.iter().sum();
        assert!(t > 0.0);
        assert!((tot - (loc + t)).abs() < 1e-12 * tot);
    }

    #[test]
    fn dropped_tail_reports_bound() {
        let (g, k) = setup(1, 0.4, 2.0, 0.125, 0.25);
        let f = random_field(&g, 2);
        let (tails, mode) = exterior_terms(&f, &k);
        assert!(tails.iter().all(|t| *t == 0.0));
        match mode {
            TailMode::Dropped { bound } => assert!(bound > 0.0 && bound.is_finite()),
            _ => panic!("expected dropped tail"),
        }
    }

    #[test]
    fn p2_operator_is_dense_matrix_product() {
        let (g, k) = setup(1, 0.4, 2.0, 0.125, 0.25);
        let f = random_field(&g, 4);
        let m = g.len();
        let vol = g.cell_volume();
        for i in 0..m {
            let op = fractional_p_laplacian(&f, &k, i).unwrap();
            for d in 0..2 {
                // row i of L = 2/h^n (diag(Σ_j w) - W), no tail (collar not constant)
                let mut v = 0.0;
                for j in 0..m {
                    let lij = if i == j {
                        (0..m).map(|l| k.weight(i, l)).sum::<f64>()
                    } else {
                        -k.weight(i, j)
                    };
                    v += 2.0 / vol * lij * f.value(j)[d];
                }
                assert!((op[d] - v).abs() < 1e-9 * (1.0 + v.abs()), "{} vs {v}", op[d]);
            }
        }
    }

    #[test]
    fn p3_two_value_field() {
        let (g, k) = setup(1, 0.4, 3.0, 0.125, 0.25);
        let f = FieldMap::from_fn(&g, 2, |x| if x[0] < 0.0 { vec![0.0, 0.0] } else { vec![2.0, 0.0] });
        let i = g.nearest_cell(&[0.0625]);
        let op = fractional_p_laplacian(&f, &k, i).unwrap();
        let mut expected = 0.0;
        for j in 0..g.len() {
            if g.center(j)[0] < 0.0 {
                expected += 2.0 * k.weight(i, j) * 2.0 * 2.0;
            }
        }
        expected /= g.cell_volume();
        assert!((op[0] - expected).abs() < 1e-12 * expected);
        assert_eq!(op[1], 0.0);
    }

    #[test]
    fn summation_by_parts() {
        for p in [2.0, 2.5, 3.0] {
            let (g, k) = setup(2, 0.5, p, 0.125, 0.125);
            let mut u = random_field(&g, 7);
            for &i in g.collar_indices() {
                u.value_mut(i).copy_from_slice(&[0.0, 1.0]);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let phi = FieldMap::from_fn(&g, 2, |x| {
                if x.iter().all(|v| v.abs() < 0.5) && rng.gen_bool(0.6) {
                    vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
                } else {
                    vec![0.0, 0.0]
                }
            });
            let weak = weak_residual(&u, &k, &phi).unwrap();
            let mut strong = 0.0;
            for i in 0..g.len() {
                let op = fractional_p_laplacian(&u, &k, i).unwrap();
                strong += (op[0] * phi.value(i)[0] + op[1] * phi.value(i)[1]) * g.cell_volume();
            }
            assert!((weak - strong).abs() <= 1e-10 * weak.abs().max(1.0), "{weak} vs {strong}");
        }
    }

    #[test]
    fn weak_residual_rejects_frozen_support() {
        let (g, k) = setup(1, 0.4, 2.0, 0.125, 0.25);
        let u = random_field(&g, 1);
        let mut phi = FieldMap::zeros(g.len(), 2);
        phi.value_mut(0)[0] = 1.0;
        assert!(matches!(weak_residual(&u, &k, &phi), Err(Error::TestFieldOnFrozen(0))));
        let zero = FieldMap::zeros(g.len(), 2);
        assert_eq!(weak_residual(&u, &k, &zero).unwrap(), 0.0);
    }

    #[test]
    fn operator_requires_p_at_least_two() {
        let (g, k) = setup(1, 0.4, 1.5, 0.125, 0.25);
        let u = random_field(&g, 1);
        assert!(fractional_p_laplacian(&u, &k, 3).is_err());
        assert!(total_energy(&u, &k).unwrap() > 0.0);
    }

    #[test]
    fn campanato_of_linear_field_is_scale_free_at_lam_three() {
        let params = FractionalParams::new(0.5, 2.0, 1, 2).unwrap();
        let g = build_grid(params, AxisBox::centered_cube(1, 1.0).unwrap(), 1.0 / 256.0, 1.0 / 64.0).unwrap();
        let f = FieldMap::from_fn(&g, 2, |x| vec![x[0], 0.0]);
        let q1 = campanato_quotient(&f, &g, &BallSpec::new(vec![0.0], 0.25), 3.0, 2.0).unwrap();
        let q2 = campanato_quotient(&f, &g, &BallSpec::new(vec![0.0], 0.5), 3.0, 2.0).unwrap();
        assert!((q1 / q2 - 1.0).abs() < 0.1);
        assert!((q1 - 2.0 / 3.0).abs() < 0.01);
        let c = FieldMap::constant(&g, &[1.0, 2.0]);
        assert_eq!(campanato_quotient(&c, &g, &BallSpec::new(vec![0.0], 0.5), 1.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn tail_integral_of_constant() {
        let (g, _) = setup(1, 0.4, 2.5, 0.125, 0.25);
        let c = FieldMap::constant(&g, &[3.0, 4.0]);
        let t = tail_integral(&c, &g, &[0.0]).unwrap();
        let weights: f64 = (0..g.len())
            .map(|j| g.cell_volume() / (1.0 + g.distance(j, &[0.0]).powf(1.0 + 1.0)))
            .sum();
        assert!((t - 5f64.powf(1.5) * weights).abs() < 1e-12 * t);
        assert_eq!(tail_integral(&FieldMap::zeros(g.len(), 2), &g, &[0.0]).unwrap(), 0.0);
    }
}
