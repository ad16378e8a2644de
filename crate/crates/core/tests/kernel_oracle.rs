mod common;

use gagliardo::grid::{build_grid, AxisBox};
use gagliardo::kernel::{build_kernel_with, NearField};
use gagliardo::params::FractionalParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn near_weights_match_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let n = 1 + trial % 2;
        let s = rng.gen_range(0.15..0.45);
        let h = [1.0 / 8.0, 1.0 / 16.0][rng.gen_range(0..2)];
        let params = FractionalParams::new(s, 2.0, n, 2).unwrap();
        let grid = build_grid(params, AxisBox::centered_cube(n, 0.5).unwrap(), h, 0.25).unwrap();
        let kernel = build_kernel_with(&grid, &params, NearField::Exact).unwrap();
        let i = grid.interior_indices()[rng.gen_range(0..grid.interior_indices().len())];
        let nb = grid.neighbors(i);
        let j = nb[rng.gen_range(0..nb.len())];
        let ci = grid.lattice_coords(i);
        let cj = grid.lattice_coords(j);
        let k: Vec<i64> = (0..n).map(|d| cj[d] as i64 - ci[d] as i64).collect();
        let oracle = common::mc_pair_integral(n, h, &k, params.kernel_exponent(), 1_000_000, 100 + trial as u64);
        let rel = (kernel.weight(i, j) - oracle).abs() / oracle;
        worst = worst.max(rel);
        println!("n={n} k={k:?} rel {rel:e}");
        assert!(rel < 5e-3, "n={n} s={s} k={k:?}: table {} oracle {oracle} rel {rel}", kernel.weight(i, j));
    }
    println!("worst near-field relative error {worst:e}");
}

#[test]
fn far_weights_match_midpoint_rule() {
    for (n, s) in [(1, 0.4), (2, 0.3)] {
        let params = FractionalParams::new(s, 2.0, n, 2).unwrap();
        let h = 1.0 / 16.0;
        let grid = build_grid(params, AxisBox::centered_cube(n, 1.0).unwrap(), h, 0.25).unwrap();
        let kernel = build_kernel_with(&grid, &params, NearField::Exact).unwrap();
        let a = params.kernel_exponent();
        let offsets: Vec<Vec<i64>> = if n == 1 { vec![vec![8], vec![13]] } else { vec![vec![8, 0], vec![6, 6], vec![11, 3]] };
        for k in offsets {
            let dist = k.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt() * h;
            let midpoint = h.powi(2 * n as i32) * dist.powf(-a);
            let table = kernel.offset_weight(&k);
            let oracle = common::mc_pair_integral(n, h, &k, a, 1_000_000, 7);
            assert!((table - midpoint).abs() <= 1e-2 * midpoint, "{k:?}");
            assert!((oracle - midpoint).abs() <= 1e-2 * midpoint, "{k:?}: oracle {oracle} midpoint {midpoint}");
        }
    }
}
