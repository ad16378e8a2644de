use serde::{Deserialize, Serialize};

use crate::energy::{ball_mean, localized_energy, normalized_energy};
use crate::error::{invalid, Error, Result};
use crate::field::FieldMap;
use crate::grid::BallSpec;
use crate::kernel::KernelTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayStatus {
    Measured,
    /// Both normalized energies vanish.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub theta: f64,
    pub eps1: f64,
    /// Normalized energy of `B_R`.
    pub e_r: f64,
    /// Normalized energy of `B_θR`.
    pub e_theta_r: f64,
    pub ratio: Option<f64>,
    pub status: DecayStatus,
    /// Whether the smallness hypothesis `e_R < ε₁` held.
    pub small: bool,
}

/// Compare the normalized energies of `B_θR(x0)` and `B_R(x0)`.
pub fn decay_probe(
    field: &FieldMap,
    kernel: &KernelTable,
    x0: &[f64],
    radius: f64,
    theta: f64,
    eps1: f64,
) -> Result<DecayReport> {
    kernel.params().require_operator_range()?;
    let h = kernel.grid().h();
    let mut problems = Vec::new();
    if !(theta > 0.0 && theta < 0.5) {
        problems.push(format!("decay: θ must lie in (0, 1/2), got {theta}"));
    }
    if !(eps1 > 0.0) {
        problems.push(format!("decay: ε₁ must be positive, got {eps1}"));
    }
    if !(theta * radius >= 2.0 * h) {
        problems.push(format!("decay: θR = {} is below the resolution 2h = {}", theta * radius, 2.0 * h));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let e_r = normalized_energy(field, kernel, &BallSpec::new(x0.to_vec(), radius))?;
    let e_theta_r = normalized_energy(field, kernel, &BallSpec::new(x0.to_vec(), theta * radius))?;
    let (ratio, status) = if e_r == 0.0 && e_theta_r == 0.0 {
        (None, DecayStatus::Vacuous)
    } else if e_r == 0.0 {
        (None, DecayStatus::Measured)
    } else {
        (Some(e_theta_r / e_r), DecayStatus::Measured)
    };
    Ok(DecayReport {
        center: x0.to_vec(),
        radius,
        theta,
        eps1,
        e_r,
        e_theta_r,
        ratio,
        status,
        small: e_r < eps1,
    })
}

#[derive(Debug, Clone)]
pub struct BlowUp {
    pub field: FieldMap,
    pub mean: Vec<f64>,
    /// `ε` with `ε^p` the localized energy of the ball.
    pub scale: f64,
}

/// `v = (u - mean_B u) / ε` with `ε^p` the localized energy of `B`, applied
/// to every cell so the exterior data transforms consistently. The result
/// has unit localized energy and zero mean over the ball.
pub fn blowup_normalize(field: &FieldMap, kernel: &KernelTable, ball: &BallSpec) -> Result<BlowUp> {
    let energy = localized_energy(field, kernel, ball)?;
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let idx = kernel.grid().ball_indices(ball);
    if idx.is_empty() {
        return Err(invalid("blow-up ball contains no cells"));
    }
    let mean = ball_mean(field, &idx);
    let scale = energy.powf(1.0 / kernel.params().p());
    let mut out = field.clone();
    for i in 0..out.len() {
        for (v, m) in out.value_mut(i).iter_mut().zip(&mean) {
            *v = (*v - m) / scale;
        }
    }
    Ok(BlowUp {
        field: out,
        mean,
        scale,
    })
}
