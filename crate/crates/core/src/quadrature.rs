//! Tensor Gauss-Legendre rules and the vertex-graded variant used for the
//! singular cell-pair integrals.

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m + 0.5)).cos();
            for _ in 0..100 {
                let (p, p_prev) = legendre(order, x);
                let dp = m * (x * p - p_prev) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (p, p_prev) = legendre(order, x);
            let dp = m * (x * p - p_prev) / (x * x - 1.0);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if order == 0 {
        return (p0, 0.0);
    }
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Integrate `f` over the axis-aligned box `[lo, hi]` (dimension 1..=3) with a
/// tensor rule on a uniform `splits^n` subdivision.
pub fn box_integral<F: FnMut(&[f64]) -> f64>(
    rule: &GaussLegendre,
    lo: &[f64],
    hi: &[f64],
    splits: usize,
    mut f: F,
) -> f64 {
    let n = lo.len();
    let mut acc = 0.0;
    let mut sub = vec![0usize; n];
    let mut sub_lo = vec![0.0; n];
    let mut sub_hi = vec![0.0; n];
    let total = splits.pow(n as u32);
    for flat in 0..total {
        let mut rem = flat;
        for d in 0..n {
            sub[d] = rem % splits;
            rem /= splits;
            let width = (hi[d] - lo[d]) / splits as f64;
            sub_lo[d] = lo[d] + width * sub[d] as f64;
            sub_hi[d] = sub_lo[d] + width;
        }
        acc += tensor_rule(rule, &sub_lo, &sub_hi, &mut f);
    }
    acc
}

fn tensor_rule<F: FnMut(&[f64]) -> f64>(rule: &GaussLegendre, lo: &[f64], hi: &[f64], f: &mut F) -> f64 {
    let n = lo.len();
    let q = rule.nodes.len();
    let mut point = vec![0.0; n];
    let mut acc = 0.0;
    let total = q.pow(n as u32);
    let mut jac = 1.0;
    for d in 0..n {
        jac *= 0.5 * (hi[d] - lo[d]);
    }
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for d in 0..n {
            let k = rem % q;
            rem /= q;
            point[d] = 0.5 * (lo[d] + hi[d]) + 0.5 * (hi[d] - lo[d]) * rule.nodes[k];
            w *= rule.weights[k];
        }
        acc += w * f(&point);
    }
    acc * jac
}

/// Integrate over the unit cube `[0,1]^n` a function that is singular at the
/// origin and asymptotically homogeneous of degree `degree` there.
///
/// The cube is split into dyadic shells `[0,2^-m]^n \ [0,2^-m-1]^n`; each shell
/// is a union of `2^n - 1` boxes integrated with the tensor rule. After
/// `levels` shells the remainder is summed as a geometric series with ratio
/// `2^-(n + degree)`, the exact scaling of the leading term.
pub fn vertex_graded_integral<F: FnMut(&[f64]) -> f64>(
    rule: &GaussLegendre,
    n: usize,
    degree: f64,
    levels: usize,
    mut f: F,
) -> Option<f64> {
    let ratio = 2f64.powf(-(n as f64 + degree));
    if !(ratio < 1.0) {
        return None;
    }
    let mut total = 0.0;
    let mut last = 0.0;
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for m in 0..levels {
        let outer = 0.5f64.powi(m as i32);
        let inner = 0.5 * outer;
        let mut shell = 0.0;
        for pattern in 1..(1usize << n) {
            for d in 0..n {
                if pattern >> d & 1 == 1 {
                    lo[d] = inner;
                    hi[d] = outer;
                } else {
                    lo[d] = 0.0;
                    hi[d] = inner;
                }
            }
            shell += tensor_rule(rule, &lo, &hi, &mut f);
        }
        total += shell;
        last = shell;
    }
    Some(total + last * ratio / (1.0 - ratio))
}
