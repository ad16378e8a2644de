use serde::{Deserialize, Serialize};

use crate::energy::campanato_quotient;
use crate::error::{Error, Result};
use crate::field::FieldMap;
use crate::grid::{BallSpec, Grid};
use crate::sum::par_map_ordered;

use super::fit_line;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HolderOptions {
    /// Largest rms residual (in log space) for which an exponent is reported.
    pub residual_threshold: f64,
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions { residual_threshold: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HolderStatus {
    Fitted,
    ResidualTooLarge,
    /// The quotients do not shrink with the radius.
    NoDecay,
    /// Every quotient vanishes.
    InfinitelySmooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub region: BallSpec,
    pub p: f64,
    pub radii: Vec<f64>,
    /// Radius of the continuum ball with the same volume as each discrete ball.
    pub effective_radii: Vec<f64>,
    /// `max_z r^-n Σ_{B_r(z)} h^n |u - mean|^p` over region cells `z`.
    pub quotients: Vec<f64>,
    /// Center attaining each maximum.
    pub argmax: Vec<Vec<f64>>,
    /// Slope of `log quotient` against `log r`.
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub residual: Option<f64>,
    pub status: HolderStatus,
}

/// Fit the power of `r` in the worst Campanato quotient over `region`.
///
/// Radii below `2h`, or for which `B_r(z)` leaves the domain for some
/// `z` in the region, are skipped.
pub fn holder_fit(
    field: &FieldMap,
    grid: &Grid,
    region: &BallSpec,
    p: f64,
    radii: &[f64],
    opts: &HolderOptions,
) -> Result<HolderReport> {
    field.check_compatible(grid.len())?;
    let n = grid.n() as f64;
    let mut usable: Vec<f64> = radii
        .iter()
        .copied()
        .filter(|&r| r >= 2.0 * grid.h() - 1e-12 && grid.ball_inside_domain(&BallSpec::new(region.center.clone(), region.radius + r)))
        .collect();
    usable.sort_by(f64::total_cmp);
    usable.dedup();
    if usable.len() < 3 {
        return Err(Error::TooFewRadii { found: usable.len() });
    }
    let centers = grid.ball_indices(region);
    if centers.is_empty() {
        return Err(Error::Validation(vec!["holder fit: region contains no cells".into()]));
    }
    // Every center is a cell center, so each discrete ball holds the same
    // number of cells; its volume-equivalent radius replaces the nominal one.
    let probe = grid.center(grid.nearest_cell(&region.center)).to_vec();
    let unit_ball = unit_ball_volume(grid.n());
    let mut quotients = Vec::with_capacity(usable.len());
    let mut argmax = Vec::with_capacity(usable.len());
    let mut effective = Vec::with_capacity(usable.len());
    for &r in &usable {
        let cells = grid.ball_indices(&BallSpec::new(probe.clone(), r)).len() as f64;
        let r_eff = (cells * grid.cell_volume() / unit_ball).powf(1.0 / n);
        effective.push(r_eff);
        let q = par_map_ordered(&centers, |z| {
            let nominal = campanato_quotient(field, grid, &BallSpec::new(grid.center(z).to_vec(), r), n, p).unwrap_or(0.0);
            nominal * (r / r_eff).powf(n)
        });
        let (k, best) = q
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) });
        quotients.push(best);
        argmax.push(grid.center(centers[k]).to_vec());
    }

    let mut report = HolderReport {
        region: region.clone(),
        p,
        radii: usable.clone(),
        effective_radii: effective.clone(),
        quotients: quotients.clone(),
        argmax,
        beta: None,
        alpha: None,
        residual: None,
        status: HolderStatus::InfinitelySmooth,
    };
    if quotients.iter().all(|&q| q == 0.0) {
        return Ok(report);
    }
    if quotients.iter().any(|&q| !(q > 0.0)) {
        report.status = HolderStatus::NoDecay;
        return Ok(report);
    }
    let lx: Vec<f64> = effective.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = quotients.iter().map(|q| q.ln()).collect();
    let (_, slope, residual) = fit_line(&lx, &ly);
    report.beta = Some(slope);
    report.residual = Some(residual);
    report.status = if !(slope > 0.0) {
        HolderStatus::NoDecay
    } else if residual > opts.residual_threshold {
        HolderStatus::ResidualTooLarge
    } else {
        report.alpha = Some((slope / p).min(1.0));
        HolderStatus::Fitted
    };
    Ok(report)
}

fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI / 3.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisBox};
    use crate::params::FractionalParams;
    use crate::presets::Preset;

    fn grid(h: f64) -> Grid {
        let params = FractionalParams::new(0.4, 2.0, 1, 2).unwrap();
        build_grid(params, AxisBox::centered_cube(1, 1.0).unwrap(), h, 0.25).unwrap()
    }

    #[test]
    fn affine_field_has_exponent_one() {
        let g = grid(1.0 / 256.0);
        let f = FieldMap::from_fn(&g, 2, |x| vec![x[0], 2.0 * x[0]]);
        let region = BallSpec::new(vec![0.0], 0.1);
        let rep = holder_fit(&f, &g, &region, 2.0, &[0.02, 0.04, 0.08, 0.16], &HolderOptions::default()).unwrap();
        assert_eq!(rep.status, HolderStatus::Fitted);
        assert!((rep.beta.unwrap() - 2.0).abs() < 0.1, "{rep:?}");
        assert!((rep.alpha.unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn constant_field_is_infinitely_smooth() {
        let g = grid(1.0 / 64.0);
        let f = FieldMap::constant(&g, &[0.0, 1.0]);
        let rep = holder_fit(&f, &g, &BallSpec::new(vec![0.0], 0.1), 2.0, &[0.05, 0.1, 0.2], &HolderOptions::default()).unwrap();
        assert_eq!(rep.status, HolderStatus::InfinitelySmooth);
        assert_eq!(rep.alpha, None);
    }

    #[test]
    fn known_holder_exponent_is_recovered() {
        let g = grid(1.0 / 512.0);
        let f = Preset::HolderProfile { exponent: 0.3, x0: 0.0, scale: 1.0 }.sample(&g, 2).unwrap();
        let rep = holder_fit(&f, &g, &BallSpec::new(vec![0.0], 0.2), 2.0, &[0.01, 0.02, 0.04, 0.08], &HolderOptions::default()).unwrap();
        assert_eq!(rep.status, HolderStatus::Fitted);
        assert!((rep.alpha.unwrap() - 0.3).abs() < 0.1, "{rep:?}");
    }

    #[test]
    fn too_few_radii() {
        let g = grid(1.0 / 64.0);
        let f = FieldMap::constant(&g, &[0.0, 1.0]);
        let err = holder_fit(&f, &g, &BallSpec::new(vec![0.0], 0.1), 2.0, &[0.01, 0.1, 0.2], &HolderOptions::default()).unwrap_err();
        assert!(matches!(err, Error::TooFewRadii { found: 2 }));
    }
}
