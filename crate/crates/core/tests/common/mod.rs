#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Monte Carlo estimate of `∫_{Q}∫_{Q+kh} |x-y|^-a dx dy` over two cubes
/// of side `h`, computed independently of the library.
///
/// Sampling runs over the displacement `z = y - x`, whose weight is the
/// exact overlap volume of the cube with the shifted cube, computed from the
/// interval endpoints so that tiny displacements keep full precision. `z` is drawn from `q(z) ∝ |z|^-β` on a ball that covers the
/// support, with `β = n + sp - 1`, which keeps the importance weights
/// bounded near the singular point. Radius and direction are stratified on
/// a jittered grid; the estimator stays unbiased.
pub fn mc_pair_integral(n: usize, h: f64, k: &[i64], a: f64, samples: usize, seed: u64) -> f64 {
    assert!(n == 1 || n == 2);
    let sp = a - n as f64;
    let beta = (n as f64 + sp - 1.0).max(0.0);
    let reach = (k.iter().map(|&v| (v.unsigned_abs() as f64 + 1.0).powi(2)).sum::<f64>()).sqrt() * h;
    let sphere = if n == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
    let norm = (n as f64 - beta) / (sphere * reach.powf(n as f64 - beta));
    let overlap = |z: &[f64]| -> f64 {
        z.iter()
            .zip(k)
            .map(|(&zd, &kd)| {
                let lo = (kd as f64 * h - zd).max(0.0);
                let hi = ((kd + 1) as f64 * h - zd).min(h);
                (hi - lo).max(0.0)
            })
            .product()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = if n == 1 { samples } else { (samples as f64).sqrt().round() as usize };
    let mut acc = 0.0;
    let mut count = 0usize;
    let mut z = vec![0.0; n];
    for a_idx in 0..side {
        for b_idx in 0..(if n == 1 { 1 } else { side }) {
            let ur = (a_idx as f64 + rng.gen::<f64>()) / side as f64;
            let r = reach * ur.powf(1.0 / (n as f64 - beta));
            let weight = |z: &[f64]| {
                let ov = overlap(z);
                if ov > 0.0 {
                    ov * r.powf(-a) / (norm * r.powf(-beta))
                } else {
                    0.0
                }
            };
            if n == 1 {
                // Both signs of the same radius: an antithetic pair.
                acc += 0.5 * (weight(&[r]) + weight(&[-r]));
            } else {
                let phi = 2.0 * std::f64::consts::PI * (b_idx as f64 + rng.gen::<f64>()) / side as f64;
                z[0] = r * phi.cos();
                z[1] = r * phi.sin();
                acc += weight(&z);
            }
            count += 1;
        }
    }
    acc / count as f64
}
