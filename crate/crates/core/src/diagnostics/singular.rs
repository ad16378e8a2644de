use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldMap;
use crate::grid::{BallSpec, Grid};
use crate::kernel::KernelTable;
use crate::energy::one_sided_energies;
use crate::sum::{compensated_sum, par_map_ordered};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedCell {
    pub index: usize,
    pub center: Vec<f64>,
    /// Normalized energy at each scale, in the order of `scales`.
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub size: usize,
    pub centroid: Vec<f64>,
    /// Flagged cell with the largest minimum-over-scales normalized energy.
    pub peak: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSetReport {
    pub eps1: f64,
    /// Scales in ascending order.
    pub scales: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub flagged: Vec<FlaggedCell>,
    pub clusters: Vec<Cluster>,
    /// Center of the interior cell with the largest one-sided energy density.
    pub density_argmax: Vec<f64>,
    /// Curve at the density argmax, flagged or not.
    pub argmax_energies: Vec<f64>,
}

fn check_scales(grid: &Grid, scales: &[f64]) -> Result<Vec<f64>> {
    let h = grid.h();
    let mut problems: Vec<String> = scales
        .iter()
        .filter(|&&r| !(r >= 2.0 * h - 1e-12))
        .map(|r| format!("singular set: scale {r} is below the resolution 2h = {}", 2.0 * h))
        .collect();
    if scales.is_empty() {
        problems.push("singular set: at least one scale is needed".into());
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    Ok(sorted)
}

/// Normalized energies `R^(sp-n) Σ_{B_R(x_i)} e_j` for every listed cell and scale.
fn curves(grid: &Grid, per_cell: &[f64], cells: &[usize], scales: &[f64]) -> Vec<Vec<f64>> {
    let factor = grid.params().sp_minus_n();
    par_map_ordered(cells, |i| {
        scales
            .iter()
            .map(|&r| {
                let idx = grid.ball_indices(&BallSpec::new(grid.center(i).to_vec(), r));
                r.powf(factor) * compensated_sum(idx.iter().map(|&j| per_cell[j]))
            })
            .collect()
    })
}

/// `0.1 ×` the median over interior cells of the normalized energy at `r_max`.
pub fn default_threshold(field: &FieldMap, kernel: &KernelTable, r_max: f64) -> Result<f64> {
    let grid = kernel.grid();
    check_scales(grid, &[r_max])?;
    let per_cell = one_sided_energies(field, kernel)?;
    let mut values: Vec<f64> = curves(grid, &per_cell, grid.interior_indices(), &[r_max])
        .into_iter()
        .map(|c| c[0])
        .collect();
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let median = if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    };
    Ok(0.1 * median)
}

/// Flag interior cells whose normalized energy exceeds `eps1` at every scale.
pub fn singular_detect(field: &FieldMap, kernel: &KernelTable, eps1: f64, scales: &[f64]) -> Result<SingularSetReport> {
    let grid = kernel.grid();
    let scales = check_scales(grid, scales)?;
    if !(eps1 > 0.0) {
        return Err(Error::Validation(vec![format!("singular set: ε₁ must be positive, got {eps1}")]));
    }
    let per_cell = one_sided_energies(field, kernel)?;
    let interior = grid.interior_indices();
    let all_curves = curves(grid, &per_cell, interior, &scales);

    let mut flagged = Vec::new();
    let mut is_flagged = vec![false; grid.len()];
    for (&i, curve) in interior.iter().zip(&all_curves) {
        if curve.iter().all(|&e| e > eps1) {
            is_flagged[i] = true;
            flagged.push(FlaggedCell {
                index: i,
                center: grid.center(i).to_vec(),
                energies: curve.clone(),
            });
        }
    }

    let min_of = |c: &[f64]| c.iter().copied().fold(f64::INFINITY, f64::min);
    let position: std::collections::HashMap<usize, usize> =
        flagged.iter().enumerate().map(|(k, f)| (f.index, k)).collect();
    let mut seen = vec![false; grid.len()];
    let mut clusters = Vec::new();
    for cell in &flagged {
        if seen[cell.index] {
            continue;
        }
        seen[cell.index] = true;
        let mut queue = VecDeque::from([cell.index]);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for j in grid.neighbors(i) {
                if is_flagged[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        let n = grid.n();
        let centroid: Vec<f64> = (0..n)
            .map(|d| members.iter().map(|&i| grid.center(i)[d]).sum::<f64>() / members.len() as f64)
            .collect();
        let peak = members
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let ea = min_of(&flagged[position[&a]].energies);
                let eb = min_of(&flagged[position[&b]].energies);
                ea.total_cmp(&eb).then(b.cmp(&a))
            })
            .expect("nonempty cluster");
        clusters.push(Cluster {
            size: members.len(),
            centroid,
            peak: grid.center(peak).to_vec(),
        });
    }

    let (arg_pos, _) = interior
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(best, bv), (k, &i)| {
            if per_cell[i] > bv {
                (k, per_cell[i])
            } else {
                (best, bv)
            }
        });

    Ok(SingularSetReport {
        eps1,
        r_min: scales[0],
        r_max: *scales.last().expect("nonempty"),
        density_argmax: grid.center(interior[arg_pos]).to_vec(),
        argmax_energies: all_curves[arg_pos].clone(),
        scales,
        flagged,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisBox};
    use crate::kernel::build_kernel;
    use crate::params::FractionalParams;
    use crate::presets::Preset;

    #[test]
    fn curves_match_normalized_energy() {
        let params = FractionalParams::new(0.4, 2.0, 1, 2).unwrap();
        let g = build_grid(params, AxisBox::centered_cube(1, 1.0).unwrap(), 1.0 / 32.0, 0.25).unwrap();
        let k = build_kernel(&g, &params).unwrap();
        let f = Preset::HolderProfile { exponent: 0.3, x0: 0.0, scale: 1.0 }.sample(&g, 2).unwrap();
        let per = one_sided_energies(&f, &k).unwrap();
        let i = g.interior_indices()[10];
        let c = curves(&g, &per, &[i], &[0.1, 0.2]);
        for (r, e) in [0.1, 0.2].iter().zip(&c[0]) {
            let direct = crate::energy::normalized_energy(&f, &k, &BallSpec::new(g.center(i).to_vec(), *r)).unwrap();
            assert!((direct - e).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn threshold_monotone_and_guards() {
        let params = FractionalParams::new(0.4, 2.0, 1, 2).unwrap();
        let g = build_grid(params, AxisBox::centered_cube(1, 1.0).unwrap(), 1.0 / 32.0, 0.25).unwrap();
        let k = build_kernel(&g, &params).unwrap();
        let f = Preset::HolderProfile { exponent: 0.3, x0: 0.0, scale: 1.0 }.sample(&g, 2).unwrap();
        let scales = [0.0625, 0.125];
        let lo = singular_detect(&f, &k, 0.05, &scales).unwrap();
        let hi = singular_detect(&f, &k, 0.2, &scales).unwrap();
        assert!(hi.flagged.iter().all(|c| lo.flagged.iter().any(|d| d.index == c.index)));
        assert!(singular_detect(&f, &k, 0.1, &[0.01]).is_err());
        assert!(singular_detect(&f, &k, 0.0, &scales).is_err());
        let c = FieldMap::constant(&g, &[1.0, 0.0]);
        let rep = singular_detect(&c, &k, 1e-6, &scales).unwrap();
        assert!(rep.flagged.is_empty() && rep.clusters.is_empty());
    }
}
