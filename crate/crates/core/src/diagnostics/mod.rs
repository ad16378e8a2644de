//! Regularity probes on computed fields: Caccioppoli ratios, decay of the
//! normalized energy, singular-set detection, Hölder exponents from
//! Campanato quotients, reverse-Hölder ratios and the hole-filling fit.

mod caccioppoli;
mod decay;
mod gehring;
mod holder;
mod holefill;
mod singular;

pub use caccioppoli::{caccioppoli_sweep, CaccioppoliEntry, CaccioppoliReport};
pub use decay::{blowup_normalize, decay_probe, BlowUp, DecayReport, DecayStatus};
pub use gehring::{gehring_exponents, gehring_probe, GehringBall, GehringProbe};
pub use holder::{holder_fit, HolderOptions, HolderReport, HolderStatus};
pub use holefill::{holefill_check, HolefillReport};
pub use singular::{default_threshold, singular_detect, Cluster, FlaggedCell, SingularSetReport};

/// Least-squares line `y = a + b x`; returns `(a, b, rms residual)`.
pub(crate) fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (intercept, slope, (rss / m).sqrt())
}

#[cfg(test)]
mod tests {
    #[test]
    fn line_fit_is_exact_on_lines() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v).collect();
        let (a, b, r) = super::fit_line(&x, &y);
        assert!((a - 1.5).abs() < 1e-14 && (b + 2.0).abs() < 1e-14 && r < 1e-14);
    }
}
