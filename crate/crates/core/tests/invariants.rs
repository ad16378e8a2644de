//! Structural invariants over randomly drawn parameters and fields.

use gagliardo::cli_io::snapshot::Snapshot;
use gagliardo::diagnostics::{blowup_normalize, gehring_probe, singular_detect};
use gagliardo::energy::{localized_energy, total_energy};
use gagliardo::field::FieldMap;
use gagliardo::grid::{build_grid, AxisBox, BallSpec, Grid};
use gagliardo::kernel::{build_kernel, KernelTable};
use gagliardo::manifold::ManifoldSpec;
use gagliardo::minimize::{minimize, MinimizeOptions};
use gagliardo::params::FractionalParams;
use proptest::prelude::*;

fn problem(s: f64, p: f64, n: usize) -> (Grid, KernelTable) {
    let params = FractionalParams::new(s, p, n, 2).unwrap();
    let h = if n == 1 { 1.0 / 16.0 } else { 0.25 };
    let grid = build_grid(params, AxisBox::centered_cube(n, 1.0).unwrap(), h, 0.25).unwrap();
    let kernel = build_kernel(&grid, &params).unwrap();
    (grid, kernel)
}

/// Values drawn from `raw` (cycled), constant `(0, 1)` outside the box.
fn field_from(grid: &Grid, raw: &[f64]) -> FieldMap {
    let mut f = FieldMap::from_fn(grid, 2, |_| vec![0.0, 1.0]);
    for (k, &i) in grid.interior_indices().iter().enumerate() {
        let a = raw[(2 * k) % raw.len()];
        let b = raw[(2 * k + 1) % raw.len()];
        f.value_mut(i).copy_from_slice(&[a, b]);
    }
    f
}

fn params() -> impl Strategy<Value = (f64, f64, usize)> {
    (0.1f64..0.9, 2.0f64..3.5, 1usize..=2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_nonnegative_and_even((s, p, n) in params(), raw in prop::collection::vec(-2.0f64..2.0, 8..40)) {
        let (grid, kernel) = problem(s, p, n);
        let u = field_from(&grid, &raw);
        let e = total_energy(&u, &kernel).unwrap();
        prop_assert!(e >= 0.0);
        let mut neg = u.clone();
        for i in 0..grid.len() {
            for v in neg.value_mut(i) {
                *v = -*v;
            }
        }
        let e_neg = total_energy(&neg, &kernel).unwrap();
        prop_assert!((e - e_neg).abs() <= 1e-12 * e.max(1.0));
        // Adding a constant to every cell changes nothing.
        let mut shifted = u.clone();
        for i in 0..grid.len() {
            shifted.value_mut(i)[0] += 0.75;
        }
        let e_shift = total_energy(&shifted, &kernel).unwrap();
        prop_assert!((e - e_shift).abs() <= 1e-10 * e.max(1.0));
    }

    #[test]
    fn raising_the_threshold_never_flags_more((s, p) in (0.2f64..0.8, 2.0f64..3.0), raw in prop::collection::vec(-1.0f64..1.0, 8..40), lo in 0.01f64..1.0, factor in 1.0f64..10.0) {
        let (grid, kernel) = problem(s, p, 1);
        let u = field_from(&grid, &raw);
        let scales = [2.0 * grid.h(), 3.0 * grid.h()];
        let a = singular_detect(&u, &kernel, lo, &scales).unwrap();
        let b = singular_detect(&u, &kernel, lo * factor, &scales).unwrap();
        prop_assert!(b.flagged.len() <= a.flagged.len());
        for cell in &b.flagged {
            prop_assert!(a.flagged.iter().any(|c| c.index == cell.index));
        }
    }

    #[test]
    fn power_mean_ratio_is_at_least_one((s, p, n) in params(), raw in prop::collection::vec(-2.0f64..2.0, 8..40), r in 0.2f64..0.6) {
        let (grid, kernel) = problem(s, p, n);
        let u = field_from(&grid, &raw);
        let ball = BallSpec::new(vec![0.0; n], r);
        let probe = gehring_probe(&u, &kernel, &[ball], 1.5, &[1.5 * p], 1.5).unwrap();
        if let Some(ratio) = probe.balls[0].power_mean_ratio {
            prop_assert!(ratio >= 1.0 - 1e-12, "ratio {ratio}");
        }
    }

    #[test]
    fn blowup_has_unit_energy_and_zero_mean((s, p, n) in params(), raw in prop::collection::vec(-2.0f64..2.0, 8..40), r in 0.3f64..0.8) {
        let (grid, kernel) = problem(s, p, n);
        let u = field_from(&grid, &raw);
        let ball = BallSpec::new(vec![0.0; n], r);
        let b = blowup_normalize(&u, &kernel, &ball).unwrap();
        prop_assert!((localized_energy(&b.field, &kernel, &ball).unwrap() - 1.0).abs() <= 1e-10);
        let idx = grid.ball_indices(&ball);
        for d in 0..2 {
            let mean = idx.iter().map(|&i| b.field.value(i)[d]).sum::<f64>() / idx.len() as f64;
            prop_assert!(mean.abs() <= 1e-10);
        }
    }

    #[test]
    fn snapshots_round_trip((s, p, n) in params(), raw in prop::collection::vec(-1e3f64..1e3, 8..40)) {
        let (grid, _) = problem(s, p, n);
        let u = field_from(&grid, &raw);
        let bytes = Snapshot::new(&grid, &u).unwrap().to_bytes();
        let back = Snapshot::from_bytes(&bytes).unwrap();
        back.check_grid(&grid).unwrap();
        prop_assert_eq!(back.field, u);
        prop_assert_eq!(Snapshot::from_bytes(&bytes).unwrap().to_bytes(), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn minimization_is_deterministic(s in 0.2f64..0.8, seed in any::<u64>()) {
        let (grid, kernel) = problem(s, 2.0, 1);
        let u = FieldMap::from_fn(&grid, 2, |x| {
            let t = 1.5 * x[0];
            vec![t.cos(), t.sin()]
        });
        let opts = MinimizeOptions { max_iters: 100, restarts: 2, seed, ..MinimizeOptions::default() };
        let sphere = ManifoldSpec::sphere(2);
        let a = minimize(&u, &kernel, &sphere, &opts).unwrap();
        let b = minimize(&u, &kernel, &sphere, &opts).unwrap();
        prop_assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        prop_assert_eq!(a.field, b.field);
        prop_assert!(a.energy <= total_energy(&u, &kernel).unwrap() * (1.0 + 1e-12));
    }
}
