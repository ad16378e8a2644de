use serde::{Deserialize, Serialize};

use crate::energy::{ball_mean, dist2, localized_energy, Power};
use crate::error::{invalid, Result};
use crate::field::FieldMap;
use crate::grid::BallSpec;
use crate::kernel::KernelTable;
use crate::sum::compensated_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliEntry {
    pub rho: f64,
    /// Localized energy of `B_ρ`.
    pub lhs: f64,
    /// `ρ^-sp Σ_{B_6ρ} h^n |u - mean_{B_6ρ} u|^p`.
    pub rhs_core: f64,
    /// `lhs / rhs_core`, with `0/0 = 0`; `None` when only `rhs_core` vanishes.
    pub ratio: Option<f64>,
    /// `ρ < 2h`; excluded from the supremum.
    pub under_resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliReport {
    pub center: Vec<f64>,
    pub entries: Vec<CaccioppoliEntry>,
    /// Largest resolved ratio: the empirical constant.
    pub sup_ratio: Option<f64>,
}

/// Ratio of the energy on `B_ρ` to the oscillation on `B_6ρ` for each `ρ`.
pub fn caccioppoli_sweep(field: &FieldMap, kernel: &KernelTable, x0: &[f64], rhos: &[f64]) -> Result<CaccioppoliReport> {
    kernel.params().require_operator_range()?;
    let grid = kernel.grid();
    let problems: Vec<String> = rhos
        .iter()
        .filter(|&&rho| !(rho > 0.0) || !grid.ball_inside_domain(&BallSpec::new(x0.to_vec(), 6.0 * rho)))
        .map(|rho| format!("caccioppoli: B_6ρ with ρ = {rho} must be a ball inside the domain"))
        .collect();
    if !problems.is_empty() {
        return Err(invalid(problems.join("; ")));
    }
    let params = kernel.params();
    let power = Power::new(params.p());
    let vol = grid.cell_volume();
    let mut entries = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let lhs = localized_energy(field, kernel, &BallSpec::new(x0.to_vec(), rho))?;
        let big = grid.ball_indices(&BallSpec::new(x0.to_vec(), 6.0 * rho));
        let mean = ball_mean(field, &big);
        let osc = compensated_sum(big.iter().map(|&i| vol * power.pow_p(dist2(field.value(i), &mean))));
        let rhs_core = rho.powf(-params.sp()) * osc;
        let ratio = if rhs_core > 0.0 {
            Some(lhs / rhs_core)
        } else if lhs == 0.0 {
            Some(0.0)
        } else {
            None
        };
        entries.push(CaccioppoliEntry {
            rho,
            lhs,
            rhs_core,
            ratio,
            under_resolved: rho < 2.0 * grid.h(),
        });
    }
    let sup_ratio = entries
        .iter()
        .filter(|e| !e.under_resolved)
        .filter_map(|e| e.ratio)
        .reduce(f64::max);
    Ok(CaccioppoliReport {
        center: x0.to_vec(),
        entries,
        sup_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisBox};
    use crate::kernel::build_kernel;
    use crate::params::FractionalParams;

    #[test]
    fn constant_field_ratio_is_zero() {
        let params = FractionalParams::new(0.4, 2.0, 1, 2).unwrap();
        let g = build_grid(params, AxisBox::centered_cube(1, 1.0).unwrap(), 1.0 / 32.0, 0.25).unwrap();
        let k = build_kernel(&g, &params).unwrap();
        let f = FieldMap::constant(&g, &[1.0, 0.0]);
        let rep = caccioppoli_sweep(&f, &k, &[0.0], &[0.03, 0.1, 0.15]).unwrap();
        assert!(rep.entries.iter().all(|e| e.lhs == 0.0 && e.ratio == Some(0.0)));
        assert!(rep.entries[0].under_resolved);
        assert_eq!(rep.sup_ratio, Some(0.0));
        assert!(caccioppoli_sweep(&f, &k, &[0.0], &[0.2]).is_err());
    }
}
