use serde::{Deserialize, Serialize};

use crate::energy::one_sided_energies;
use crate::error::{invalid, Error, Result};
use crate::field::FieldMap;
use crate::grid::BallSpec;
use crate::kernel::KernelTable;
use crate::params::FractionalParams;
use crate::sum::compensated_sum;

/// An exponent pair `(p₂, q)` from the embedding behind the reverse-Hölder
/// step: `p₂` is the midpoint of `(max{p, n/(n-s)}, np/(n-sp))` and
/// `q = n p₂ / (n + s p₂)`, so that `1 < q < p`. Needs `sp < n`.
pub fn gehring_exponents(params: &FractionalParams) -> Result<(f64, f64)> {
    let (n, s, p) = (params.n() as f64, params.s(), params.p());
    if !(params.sp() < n) {
        return Err(invalid(format!("reverse-Hölder exponents need sp < n, got sp = {}", params.sp())));
    }
    let lo = p.max(n / (n - s));
    let hi = n * p / (n - params.sp());
    let p2 = 0.5 * (lo + hi);
    Ok((p2, n * p2 / (n + s * p2)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GehringBall {
    pub ball: BallSpec,
    /// `(mean_B Γ^p)^(1/p)`.
    pub mean_p: f64,
    /// `(mean_B Γ^q)^(1/q)`.
    pub mean_q: f64,
    /// `mean_p / mean_q` on the same ball; at least 1 by the power-mean inequality.
    pub power_mean_ratio: Option<f64>,
    /// `(mean_B Γ^p)^(1/p) / (mean_{σB} Γ^q)^(1/q)`: the reverse-Hölder constant.
    pub reverse_holder_ratio: Option<f64>,
    /// `(mean_B Γ^p̄)^(1/p̄)` for each higher exponent.
    pub higher_moments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GehringProbe {
    pub q: f64,
    pub p: f64,
    pub p_bars: Vec<f64>,
    pub enlargement: f64,
    /// `Γ` on every cell.
    pub gamma: Vec<f64>,
    pub balls: Vec<GehringBall>,
    pub max_reverse_holder: Option<f64>,
    pub min_reverse_holder: Option<f64>,
    /// Largest higher moment per `p̄` over all balls.
    pub max_higher_moments: Vec<f64>,
}

fn power_mean(gamma: &[f64], idx: &[usize], e: f64) -> f64 {
    let m = compensated_sum(idx.iter().map(|&i| gamma[i].powf(e))) / idx.len() as f64;
    m.powf(1.0 / e)
}

/// Reverse-Hölder ratios of `Γ(y) = (one-sided energy density at y)^(1/p)`
/// on the given balls, each compared with its `enlargement`-fold dilate.
pub fn gehring_probe(
    field: &FieldMap,
    kernel: &KernelTable,
    balls: &[BallSpec],
    q: f64,
    p_bars: &[f64],
    enlargement: f64,
) -> Result<GehringProbe> {
    let p = kernel.params().p();
    let grid = kernel.grid();
    let mut problems = Vec::new();
    if !(q > 1.0 && q < p) {
        problems.push(format!("gehring: q must lie in (1, p) = (1, {p}), got {q}"));
    }
    if let Some(b) = p_bars.iter().find(|&&b| !(b > p)) {
        problems.push(format!("gehring: higher exponents must exceed p = {p}, got {b}"));
    }
    if !(enlargement >= 1.0) {
        problems.push(format!("gehring: enlargement must be at least 1, got {enlargement}"));
    }
    for b in balls {
        if grid.ball_indices(b).is_empty() {
            problems.push(format!("gehring: ball at {:?} with radius {} holds no cells", b.center, b.radius));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let vol = grid.cell_volume();
    let gamma: Vec<f64> = one_sided_energies(field, kernel)?
        .into_iter()
        .map(|e| (e.max(0.0) / vol).powf(1.0 / p))
        .collect();

    let ratio = |a: f64, b: f64| {
        if b > 0.0 {
            Some(a / b)
        } else {
            None
        }
    };
    let rows: Vec<GehringBall> = balls
        .iter()
        .map(|ball| {
            let idx = grid.ball_indices(ball);
            let wide = grid.ball_indices(&ball.scaled(enlargement));
            let mean_p = power_mean(&gamma, &idx, p);
            let mean_q = power_mean(&gamma, &idx, q);
            let wide_q = power_mean(&gamma, &wide, q);
            GehringBall {
                ball: ball.clone(),
                mean_p,
                mean_q,
                power_mean_ratio: ratio(mean_p, mean_q),
                reverse_holder_ratio: ratio(mean_p, wide_q),
                higher_moments: p_bars.iter().map(|&b| power_mean(&gamma, &idx, b)).collect(),
            }
        })
        .collect();
    let rh = rows.iter().filter_map(|r| r.reverse_holder_ratio);
    let max_reverse_holder = rh.clone().reduce(f64::max);
    let min_reverse_holder = rh.reduce(f64::min);
    let max_higher_moments = (0..p_bars.len())
        .map(|k| rows.iter().map(|r| r.higher_moments[k]).fold(0.0, f64::max))
        .collect();
    Ok(GehringProbe {
        q,
        p,
        p_bars: p_bars.to_vec(),
        enlargement,
        gamma,
        balls: rows,
        max_reverse_holder,
        min_reverse_holder,
        max_higher_moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisBox};
    use crate::kernel::build_kernel;
    use crate::presets::Preset;

    #[test]
    fn exponent_ladder_is_ordered() {
        for (s, p, n) in [(0.4, 2.0, 1), (0.5, 2.5, 2), (0.3, 3.0, 3), (0.9, 1.05, 1)] {
            let params = FractionalParams::new(s, p, n, 2).unwrap();
            let (p2, q) = gehring_exponents(&params).unwrap();
            assert!(1.0 < q && q < p && p <= p2, "{s} {p} {n}: {p2} {q}");
        }
        let params = FractionalParams::new(0.5, 2.5, 1, 2).unwrap();
        assert!(gehring_exponents(&params).is_err());
    }

    #[test]
    fn constant_field_is_vacuous_and_smooth_field_obeys_power_means() {
        let params = FractionalParams::new(0.4, 2.0, 1, 2).unwrap();
        let g = build_grid(params, AxisBox::centered_cube(1, 1.0).unwrap(), 1.0 / 32.0, 0.25).unwrap();
        let k = build_kernel(&g, &params).unwrap();
        let balls = [BallSpec::new(vec![0.0], 0.2), BallSpec::new(vec![0.3], 0.1)];
        let c = FieldMap::constant(&g, &[1.0, 0.0]);
        let rep = gehring_probe(&c, &k, &balls, 1.5, &[3.0], 2.0).unwrap();
        assert!(rep.gamma.iter().all(|&v| v == 0.0));
        assert!(rep.balls.iter().all(|b| b.power_mean_ratio.is_none()));
        let f = Preset::SmoothBump { slope: 0.5, amplitude: 1.0, width: 0.5 }.sample(&g, 2).unwrap();
        let rep = gehring_probe(&f, &k, &balls, 1.5, &[3.0, 4.0], 2.0).unwrap();
        for b in &rep.balls {
            assert!(b.power_mean_ratio.unwrap() >= 1.0 - 1e-12);
            assert!(b.higher_moments[1] >= b.higher_moments[0] - 1e-12);
        }
        assert!(gehring_probe(&f, &k, &balls, 2.5, &[3.0], 2.0).is_err());
    }
}
