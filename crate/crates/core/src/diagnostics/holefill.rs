use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolefillReport {
    pub alpha: f64,
    pub beta: f64,
    /// `None` for the identically zero sequence, where any `θ` fits.
    pub theta: Option<f64>,
    pub a: f64,
    pub b: f64,
    /// `‖fit - data‖ / ‖data‖` over the consecutive pairs.
    pub relative_residual: f64,
    pub consistent: bool,
}

/// Solve the normal equations of a least-squares problem with at most three
/// columns; `None` when they are singular.
fn least_squares(cols: &[&[f64]], rhs: &[f64]) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut m = vec![vec![0.0; k + 1]; k];
    for r in 0..k {
        for c in 0..k {
            m[r][c] = cols[r].iter().zip(cols[c]).map(|(a, b)| a * b).sum();
        }
        m[r][k] = cols[r].iter().zip(rhs).map(|(a, b)| a * b).sum();
    }
    let scale = (0..k).map(|r| m[r][r]).fold(0.0, f64::max);
    for c in 0..k {
        let piv = (c..k).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if !(m[piv][c].abs() > 1e-13 * scale) {
            return None;
        }
        m.swap(c, piv);
        for r in 0..k {
            if r != c {
                let f = m[r][c] / m[c][c];
                for j in c..=k {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
    }
    Some((0..k).map(|r| m[r][k] / m[r][r]).collect())
}

/// Fit `h(r_k) ≈ θ h(r_{k+1}) + A d_k^-α + B d_k^-β`, `d_k = r_{k+1} - r_k`,
/// with nonnegative coefficients over consecutive radii, and decide whether
/// the sequence is consistent with a hole-filling bound (`θ < 1` and a
/// relative residual at most `tol`).
pub fn holefill_check(radii: &[f64], values: &[f64], alpha: f64, beta: f64, tol: f64) -> Result<HolefillReport> {
    let mut problems = Vec::new();
    if radii.len() != values.len() {
        problems.push(format!("hole-filling: {} radii but {} values", radii.len(), values.len()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        problems.push("hole-filling: radii must be strictly increasing".into());
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        problems.push("hole-filling: values must be finite and nonnegative".into());
    }
    if !(alpha > 0.0 && beta > 0.0) {
        problems.push(format!("hole-filling: exponents must be positive, got {alpha}, {beta}"));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    if radii.len() < 4 {
        return Err(Error::TooFewRadii { found: radii.len() });
    }
    if values.iter().all(|&v| v == 0.0) {
        return Ok(HolefillReport {
            alpha,
            beta,
            theta: None,
            a: 0.0,
            b: 0.0,
            relative_residual: 0.0,
            consistent: true,
        });
    }

    let pairs = radii.len() - 1;
    let target: Vec<f64> = values[..pairs].to_vec();
    let outer: Vec<f64> = values[1..].to_vec();
    let ca: Vec<f64> = radii.windows(2).map(|w| (w[1] - w[0]).powf(-alpha)).collect();
    let cb: Vec<f64> = radii.windows(2).map(|w| (w[1] - w[0]).powf(-beta)).collect();
    let columns: [&[f64]; 3] = [&outer, &ca, &cb];

    // Nonnegative least squares by enumerating active sets.
    let mut best: Option<([f64; 3], f64)> = None;
    for mask in 0u32..8 {
        let chosen: Vec<usize> = (0..3).filter(|b| mask & (1 << b) != 0).collect();
        let cols: Vec<&[f64]> = chosen.iter().map(|&c| columns[c]).collect();
        let Some(sol) = least_squares(&cols, &target) else { continue };
        if sol.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut coef = [0.0; 3];
        for (&c, v) in chosen.iter().zip(sol) {
            coef[c] = v;
        }
        let rss: f64 = (0..pairs)
            .map(|k| {
                let fit = coef[0] * outer[k] + coef[1] * ca[k] + coef[2] * cb[k];
                (fit - target[k]).powi(2)
            })
            .sum();
        if best.map_or(true, |(_, r)| rss < r) {
            best = Some((coef, rss));
        }
    }
    let (coef, rss) = best.expect("the empty active set is always feasible");
    let norm: f64 = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    let relative_residual = if norm > 0.0 { rss.sqrt() / norm } else { rss.sqrt() };
    Ok(HolefillReport {
        alpha,
        beta,
        theta: Some(coef[0]),
        a: coef[1],
        b: coef[2],
        relative_residual,
        consistent: coef[0] < 1.0 && relative_residual <= tol,
    })
}
