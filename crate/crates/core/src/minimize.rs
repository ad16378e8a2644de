//! Constrained minimization of the discrete energy with frozen exterior data.
//!
//! The objective over the free cells `F` is
//!
//! ```text
//! J(u) = Σ_{i∈F} Σ_j w|u_i-u_j|^p + Σ_{i∈F} Σ_{j∉F} w|u_i-u_j|^p + 2 Σ_{i∈F} t_i
//! ```
//!
//! which differs from the total energy by terms that only involve frozen
//! cells. Each iteration moves along the tangential gradient in density units
//! and projects back to the target:
//! `u_i ← π(u_i - τ Π(u_i) ∇_i J / h^n)`. The trial step is the
//! Barzilai-Borwein length of the previous step, followed by Armijo
//! backtracking, so every accepted step strictly lowers `J`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{dist2, operator_cells, total_energy, Power};
use crate::error::{invalid, Error, Result};
use crate::field::FieldMap;
use crate::kernel::KernelTable;
use crate::manifold::{sample_ball, ManifoldSpec};
use crate::sum::{compensated_sum, par_map_ordered, CompensatedSum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Initial step in density units; `None` means `h^sp / p`.
    pub step_init: Option<f64>,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
    /// Stop once `max_i |Π(u_i) ∇_i J| / h^n` falls below this.
    pub grad_tol: f64,
    /// Total number of runs; run 0 starts from the given field, the others
    /// from seeded tangent perturbations of it.
    pub restarts: usize,
    pub restart_noise: f64,
    /// Largest displacement of a single cell value per step.
    pub max_cell_step: f64,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 2000,
            step_init: None,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 40,
            grad_tol: 1e-6,
            restarts: 1,
            restart_noise: 0.2,
            max_cell_step: 0.5,
            seed: 0,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.max_iters == 0 {
            problems.push("minimize.max_iters must be positive".to_string());
        }
        if let Some(step) = self.step_init {
            if !(step > 0.0) {
                problems.push(format!("minimize.step_init must be positive, got {step}"));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            problems.push(format!("minimize.backtrack must lie in (0, 1), got {}", self.backtrack));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            problems.push(format!(
                "minimize.sufficient_decrease must lie in (0, 1), got {}",
                self.sufficient_decrease
            ));
        }
        if !(self.grad_tol > 0.0) {
            problems.push(format!("minimize.grad_tol must be positive, got {}", self.grad_tol));
        }
        if self.restarts == 0 {
            problems.push("minimize.restarts must be at least 1".to_string());
        }
        if !(self.restart_noise >= 0.0) {
            problems.push("minimize.restart_noise must be nonnegative".to_string());
        }
        if !(self.max_cell_step > 0.0) {
            problems.push("minimize.max_cell_step must be positive".to_string());
        }
        problems
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// No step length passed the sufficient-decrease test.
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MinimizerResult {
    pub field: FieldMap,
    pub energy: f64,
    /// Total energy after every accepted step of the winning run.
    pub energy_history: Vec<f64>,
    pub projected_grad_norm: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub restarts_used: usize,
    pub winning_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub tangential_residual: f64,
    pub constraint_violation: f64,
}

struct Objective<'a> {
    kernel: &'a KernelTable,
    power: Power,
    p: f64,
    free: Vec<usize>,
    free_mask: Vec<bool>,
    tau: &'a [f64],
    exterior: Option<Vec<f64>>,
    vol: f64,
}

impl<'a> Objective<'a> {
    fn new(field: &FieldMap, kernel: &'a KernelTable, free: Vec<usize>) -> Self {
        let mut free_mask = vec![false; field.len()];
        for &i in &free {
            free_mask[i] = true;
        }
        Objective {
            kernel,
            power: Power::new(kernel.params().p()),
            p: kernel.params().p(),
            free,
            free_mask,
            tau: kernel.exterior_tail(),
            exterior: field.constant_exterior(kernel.grid()),
            vol: kernel.grid().cell_volume(),
        }
    }

    /// `J(u)` and its gradient on the free cells (flattened `free x N`).
    fn eval(&self, u: &FieldMap) -> (f64, Vec<f64>) {
        let dim = u.dim();
        let rows = par_map_ordered(&self.free, |i| {
            let ui = u.value(i);
            let mut energy = CompensatedSum::new();
            let mut grad = vec![CompensatedSum::new(); dim];
            self.kernel.visit_row(i, |j, w| {
                if w == 0.0 {
                    return;
                }
                let uj = u.value(j);
                let r2 = dist2(ui, uj);
                let e = w * self.power.pow_p(r2);
                energy.add(if self.free_mask[j] { e } else { 2.0 * e });
                let g = w * self.power.pow_pm2(r2);
                if g != 0.0 {
                    for d in 0..dim {
                        grad[d].add(g * (ui[d] - uj[d]));
                    }
                }
            });
            let mut g: Vec<f64> = grad.iter().map(|s| 2.0 * self.p * s.value()).collect();
            if let Some(c) = &self.exterior {
                let tau = self.tau[i];
                if tau != 0.0 {
                    let r2 = dist2(ui, c);
                    energy.add(2.0 * self.vol * tau * self.power.pow_p(r2));
                    let gt = 2.0 * self.p * self.vol * tau * self.power.pow_pm2(r2);
                    for d in 0..dim {
                        g[d] += gt * (ui[d] - c[d]);
                    }
                }
            }
            (energy.value(), g)
        });
        let value = compensated_sum(rows.iter().map(|r| r.0));
        let grad = rows.into_iter().flat_map(|r| r.1).collect();
        (value, grad)
    }
}

/// Euclidean gradient of the total energy with respect to the listed cells,
/// `2p Σ_j w|u_i-u_j|^(p-2)(u_i-u_j)` plus the beyond-collar term; zero on
/// all other cells. Equals `p h^n` times the fractional p-Laplacian.
pub fn energy_gradient(field: &FieldMap, kernel: &KernelTable, free_cells: &[usize]) -> Result<Vec<f64>> {
    field.check_compatible(kernel.len())?;
    let obj = Objective::new(field, kernel, free_cells.to_vec());
    let (_, g) = obj.eval(field);
    let dim = field.dim();
    let mut out = vec![0.0; field.len() * dim];
    for (k, &i) in free_cells.iter().enumerate() {
        out[i * dim..(i + 1) * dim].copy_from_slice(&g[k * dim..(k + 1) * dim]);
    }
    Ok(out)
}

/// Per free cell `|Π(u_i) (-Δ_p)^s u(x_i)|`, in the order of `field.free_cells()`.
pub fn tangential_residual_cells(field: &FieldMap, kernel: &KernelTable, manifold: &ManifoldSpec) -> Result<Vec<f64>> {
    kernel.params().require_operator_range()?;
    field.check_compatible(kernel.len())?;
    let free = field.free_cells();
    let ops = operator_cells(field, kernel, &free);
    let dim = field.dim();
    Ok(free
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let t = manifold.apply_tangent(field.value(i), &ops[k * dim..(k + 1) * dim]);
            t.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect())
}

/// `max_i |Π(u_i) (-Δ_p)^s u(x_i)|` over the free cells.
pub fn tangential_residual(field: &FieldMap, kernel: &KernelTable, manifold: &ManifoldSpec) -> Result<f64> {
    Ok(tangential_residual_cells(field, kernel, manifold)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Energy of pairs and exterior terms that only involve frozen cells.
fn frozen_energy(field: &FieldMap, kernel: &KernelTable) -> f64 {
    let frozen: Vec<usize> = (0..field.len()).filter(|&i| field.is_frozen(i)).collect();
    let power = Power::new(kernel.params().p());
    let tau = kernel.exterior_tail();
    let exterior = field.constant_exterior(kernel.grid());
    let vol = kernel.grid().cell_volume();
    let rows = par_map_ordered(&frozen, |i| {
        let ui = field.value(i);
        let mut acc = CompensatedSum::new();
        kernel.visit_row(i, |j, w| {
            if w != 0.0 && field.is_frozen(j) {
                acc.add(w * power.pow_p(dist2(ui, field.value(j))));
            }
        });
        if let Some(c) = &exterior {
            acc.add(2.0 * vol * tau[i] * power.pow_p(dist2(ui, c)));
        }
        acc.value()
    });
    compensated_sum(rows)
}

struct RunOutcome {
    field: FieldMap,
    history: Vec<f64>,
    grad_norm: f64,
    stop: StopReason,
    iterations: usize,
}

fn tangential_step(manifold: &ManifoldSpec, u: &FieldMap, free: &[usize], grad: &[f64], vol: f64) -> Vec<f64> {
    let dim = u.dim();
    let mut out = Vec::with_capacity(grad.len());
    for (k, &i) in free.iter().enumerate() {
        let g: Vec<f64> = grad[k * dim..(k + 1) * dim].iter().map(|v| v / vol).collect();
        out.extend(manifold.apply_tangent(u.value(i), &g));
    }
    out
}

fn max_cell_norm(v: &[f64], dim: usize) -> f64 {
    v.chunks(dim)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn run_descent(
    start: FieldMap,
    obj: &Objective,
    manifold: &ManifoldSpec,
    opts: &MinimizeOptions,
    step0: f64,
    offset: f64,
) -> RunOutcome {
    let dim = start.dim();
    let free = &obj.free;
    let mut u = start;
    let (mut j_val, mut grad) = obj.eval(&u);
    let mut pg = tangential_step(manifold, &u, free, &grad, obj.vol);
    let mut history = vec![j_val + offset];
    let mut step = step0;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    let mut grad_norm = max_cell_norm(&pg, dim);

    for _ in 0..opts.max_iters {
        if grad_norm < opts.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut tau = step;
        if tau * grad_norm > opts.max_cell_step {
            tau = opts.max_cell_step / grad_norm;
        }
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let mut trial = u.clone();
            let mut ok = true;
            for (k, &i) in free.iter().enumerate() {
                let moved: Vec<f64> = u
                    .value(i)
                    .iter()
                    .zip(&pg[k * dim..(k + 1) * dim])
                    .map(|(a, g)| a - tau * g)
                    .collect();
                match manifold.project(&moved) {
                    Ok(p) => trial.value_mut(i).copy_from_slice(&p),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                let (j_new, g_new) = obj.eval(&trial);
                let mut slope = 0.0;
                for (k, &i) in free.iter().enumerate() {
                    for d in 0..dim {
                        slope += grad[k * dim + d] * (trial.value(i)[d] - u.value(i)[d]);
                    }
                }
                if j_new < j_val && j_new <= j_val + opts.sufficient_decrease * slope {
                    accepted = Some((trial, j_new, g_new));
                    break;
                }
            }
            tau *= opts.backtrack;
        }
        let Some((trial, j_new, g_new)) = accepted else {
            stop = StopReason::LineSearchFailed;
            break;
        };
        let pg_new = tangential_step(manifold, &trial, free, &g_new, obj.vol);
        // Barzilai-Borwein length from the displacement and the change of
        // the tangential gradient.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for (k, &i) in free.iter().enumerate() {
            for d in 0..dim {
                let s = trial.value(i)[d] - u.value(i)[d];
                let y = pg_new[k * dim + d] - pg[k * dim + d];
                ss += s * s;
                sy += s * y;
            }
        }
        step = if sy > 0.0 && ss > 0.0 { ss / sy } else { 2.0 * tau };
        u = trial;
        j_val = j_new;
        grad = g_new;
        pg = pg_new;
        grad_norm = max_cell_norm(&pg, dim);
        history.push(j_val + offset);
        iterations += 1;
    }
    if stop == StopReason::MaxIterations && grad_norm < opts.grad_tol {
        stop = StopReason::GradientTolerance;
    }
    RunOutcome {
        field: u,
        history,
        grad_norm,
        stop,
        iterations,
    }
}

fn perturbed_start(initial: &FieldMap, manifold: &ManifoldSpec, amplitude: f64, seed: u64) -> Result<FieldMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = initial.clone();
    for i in initial.free_cells() {
        let noise = sample_ball(&mut rng, initial.dim(), amplitude);
        let t = manifold.apply_tangent(initial.value(i), &noise);
        let moved: Vec<f64> = initial.value(i).iter().zip(&t).map(|(a, b)| a + b).collect();
        let p = manifold.project(&moved)?;
        out.value_mut(i).copy_from_slice(&p);
    }
    Ok(out)
}

pub fn minimize(
    initial: &FieldMap,
    kernel: &KernelTable,
    manifold: &ManifoldSpec,
    opts: &MinimizeOptions,
) -> Result<MinimizerResult> {
    let problems = opts.validate();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    initial.check_compatible(kernel.len())?;
    if initial.dim() != manifold.ambient_dim() {
        return Err(Error::Mismatch(format!(
            "field values live in R^{} but the target is in R^{}",
            initial.dim(),
            manifold.ambient_dim()
        )));
    }
    let violation = manifold.constraint_violation(initial)?;
    if violation > 1e-10 {
        return Err(invalid(format!("initial field is off the target by {violation:e}")));
    }
    let params = kernel.params();
    let h = kernel.grid().h();
    let step0 = opts.step_init.unwrap_or(h.powf(params.sp()) / params.p());
    let obj = Objective::new(initial, kernel, initial.free_cells());
    let offset = frozen_energy(initial, kernel);

    let mut best: Option<(usize, RunOutcome)> = None;
    let mut summaries = Vec::with_capacity(opts.restarts);
    for k in 0..opts.restarts {
        let start = if k == 0 {
            initial.clone()
        } else {
            perturbed_start(initial, manifold, opts.restart_noise, opts.seed.wrapping_add(k as u64))?
        };
        let run = run_descent(start, &obj, manifold, opts, step0, offset);
        let energy = *run.history.last().expect("history starts non-empty");
        summaries.push(RestartSummary {
            restart: k,
            energy,
            iterations: run.iterations,
            converged: run.stop == StopReason::GradientTolerance,
        });
        let better = best
            .as_ref()
            .map_or(true, |(_, b)| energy < *b.history.last().expect("non-empty"));
        if better {
            best = Some((k, run));
        }
    }
    let (winner, run) = best.expect("at least one restart");
    let energy = total_energy(&run.field, kernel)?;
    let tangential = if params.p() >= 2.0 {
        tangential_residual(&run.field, kernel, manifold)?
    } else {
        f64::NAN
    };
    let constraint_violation = manifold.constraint_violation(&run.field)?;
    Ok(MinimizerResult {
        energy,
        energy_history: run.history,
        projected_grad_norm: run.grad_norm,
        converged: run.stop == StopReason::GradientTolerance,
        stop_reason: run.stop,
        iterations: run.iterations,
        restarts_used: opts.restarts,
        winning_restart: winner,
        restarts: summaries,
        tangential_residual: tangential,
        constraint_violation,
        field: run.field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::fractional_p_laplacian;
    use crate::grid::{build_grid, AxisBox, Grid};
    use crate::kernel::build_kernel;
    use crate::params::FractionalParams;
    use rand::Rng;

    fn setup(n: usize, s: f64, p: f64, h: f64) -> (Grid, KernelTable) {
        let params = FractionalParams::new(s, p, n, 2).unwrap();
        let g = build_grid(params, AxisBox::centered_cube(n, 0.5).unwrap(), h, 0.25).unwrap();
        let k = build_kernel(&g, &params).unwrap();
        (g, k)
    }

    #[test]
    fn constant_data_needs_no_iterations() {
        let (g, k) = setup(2, 0.5, 2.5, 0.125);
        let f = FieldMap::constant(&g, &[0.0, 1.0]);
        let res = minimize(&f, &k, &ManifoldSpec::sphere(2), &MinimizeOptions::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.energy, 0.0);
        assert!(res.converged);
    }

    #[test]
    fn gradient_matches_operator() {
        let (g, k) = setup(1, 0.4, 2.0, 0.0625);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = FieldMap::from_fn(&g, 2, |_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        for &i in g.collar_indices() {
            f.value_mut(i).copy_from_slice(&[1.0, 0.0]);
        }
        let free = f.free_cells();
        let grad = energy_gradient(&f, &k, &free).unwrap();
        for &i in &free {
            let op = fractional_p_laplacian(&f, &k, i).unwrap();
            for d in 0..2 {
                let expected = 2.0 * g.cell_volume() * op[d];
                assert!((grad[i * 2 + d] - expected).abs() < 1e-10 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn descent_is_monotone_and_on_sphere() {
        let (g, k) = setup(1, 0.4, 2.0, 0.0625);
        let f = FieldMap::from_fn(&g, 2, |x| {
            let t: f64 = if x[0] < -0.5 { 0.0 } else if x[0] > 0.5 { 1.0 } else { 2.0 };
            vec![t.cos(), t.sin()]
        });
        let opts = MinimizeOptions {
            max_iters: 300,
            restarts: 2,
            ..Default::default()
        };
        let res = minimize(&f, &k, &ManifoldSpec::sphere(2), &opts).unwrap();
        assert!(res.energy_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.constraint_violation <= 1e-12);
        for &i in g.collar_indices() {
            assert_eq!(res.field.value(i), f.value(i));
        }
        let last = *res.energy_history.last().unwrap();
        assert!((last - res.energy).abs() < 1e-9 * res.energy);
    }
}
