//! Uniform cell lattice over a box domain plus an exterior collar.
//!
//! Cells are stored in row-major order over the *extended* lattice (interior
//! box grown by the collar on every side), axis 0 fastest. A cell is interior
//! when its center lies in the domain box; every other cell belongs to the
//! collar, where exterior (Dirichlet) data lives.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::FractionalParams;

pub const DEFAULT_CELL_CAP: usize = 40_000;

const LATTICE_EPS: f64 = 1e-9;

/// Axis-aligned box `[lo_0, hi_0] x ... x [lo_{n-1}, hi_{n-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("box corners must have the same, nonzero dimension"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(invalid(format!("box is empty: lo = {lo:?}, hi = {hi:?}")));
        }
        Ok(AxisBox { lo, hi })
    }

    /// `[-half, half]^n`
    pub fn centered_cube(n: usize, half: f64) -> Result<Self> {
        AxisBox::new(vec![-half; n], vec![half; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }
}

/// Open ball `B_R(x0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        BallSpec { center, radius }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BallSpec {
            center: self.center.clone(),
            radius: self.radius * factor,
        }
    }
}

/// JSON header describing a grid; enough to rebuild it bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub params: FractionalParams,
    #[serde(rename = "box")]
    pub domain: AxisBox,
    pub h: f64,
    pub collar_width: f64,
}

#[derive(Debug, Clone)]
pub struct Grid {
    params: FractionalParams,
    domain: AxisBox,
    h: f64,
    collar_width: f64,
    collar_cells: usize,
    interior_dims: Vec<usize>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    origin: Vec<f64>,
    centers: Vec<f64>,
    interior: Vec<bool>,
    interior_indices: Vec<usize>,
    collar_indices: Vec<usize>,
}

/// Default collar width: twice the diameter of the domain.
pub fn default_collar_width(domain: &AxisBox) -> f64 {
    2.0 * domain.diameter()
}

pub fn build_grid(params: FractionalParams, domain: AxisBox, h: f64, collar_width: f64) -> Result<Grid> {
    build_grid_with_cap(params, domain, h, collar_width, DEFAULT_CELL_CAP)
}

pub fn build_grid_with_cap(
    params: FractionalParams,
    domain: AxisBox,
    h: f64,
    collar_width: f64,
    cap: usize,
) -> Result<Grid> {
    let n = params.n();
    if domain.dim() != n {
        return Err(invalid(format!("box has dimension {} but n = {n}", domain.dim())));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("cell size h must be positive, got {h}")));
    }
    if !(collar_width >= h) {
        return Err(invalid(format!("collar width {collar_width} must be at least h = {h}")));
    }
    let interior_dims: Vec<usize> = domain
        .lo
        .iter()
        .zip(&domain.hi)
        .map(|(a, b)| ((b - a) / h + LATTICE_EPS).floor() as usize)
        .collect();
    if interior_dims.iter().any(|&m| m == 0) {
        return Err(invalid(format!("box {domain:?} holds no cell of size {h}")));
    }
    let collar_cells = (collar_width / h + LATTICE_EPS).floor() as usize;
    let dims: Vec<usize> = interior_dims.iter().map(|m| m + 2 * collar_cells).collect();
    let total = dims.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d));
    let total = match total {
        Some(t) if t <= cap => t,
        Some(t) => return Err(Error::GridTooLarge { cells: t, cap }),
        None => return Err(Error::GridTooLarge { cells: usize::MAX, cap }),
    };

    let mut strides = vec![1usize; n];
    for d in 1..n {
        strides[d] = strides[d - 1] * dims[d - 1];
    }
    let origin: Vec<f64> = domain
        .lo
        .iter()
        .map(|lo| lo - collar_cells as f64 * h + 0.5 * h)
        .collect();

    let mut centers = Vec::with_capacity(total * n);
    let mut interior = Vec::with_capacity(total);
    let mut interior_indices = Vec::new();
    let mut collar_indices = Vec::new();
    for idx in 0..total {
        let mut inside = true;
        let mut rem = idx;
        for d in 0..n {
            let k = rem % dims[d];
            rem /= dims[d];
            centers.push(origin[d] + k as f64 * h);
            inside &= k >= collar_cells && k < collar_cells + interior_dims[d];
        }
        interior.push(inside);
        if inside {
            interior_indices.push(idx);
        } else {
            collar_indices.push(idx);
        }
    }

    Ok(Grid {
        params,
        domain,
        h,
        collar_width,
        collar_cells,
        interior_dims,
        dims,
        strides,
        origin,
        centers,
        interior,
        interior_indices,
        collar_indices,
    })
}

impl Grid {
    pub fn from_header(header: &GridHeader) -> Result<Grid> {
        build_grid(header.params, header.domain.clone(), header.h, header.collar_width)
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            params: self.params,
            domain: self.domain.clone(),
            h: self.h,
            collar_width: self.collar_width,
        }
    }

    pub fn params(&self) -> &FractionalParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n() as i32)
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    pub fn collar_width(&self) -> f64 {
        self.collar_width
    }

    pub fn collar_cells(&self) -> usize {
        self.collar_cells
    }

    /// Lattice extent per axis, collar included.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn interior_dims(&self) -> &[usize] {
        &self.interior_dims
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.centers[i * n..(i + 1) * n]
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior[i]
    }

    pub fn interior_indices(&self) -> &[usize] {
        &self.interior_indices
    }

    pub fn collar_indices(&self) -> &[usize] {
        &self.collar_indices
    }

    /// The box covered by all cells, collar included.
    pub fn extended_box(&self) -> AxisBox {
        let c = self.collar_cells as f64 * self.h;
        let lo = self.domain.lo.iter().map(|v| v - c).collect();
        let hi = self
            .domain
            .lo
            .iter()
            .zip(&self.interior_dims)
            .map(|(v, m)| v + *m as f64 * self.h + c)
            .collect();
        AxisBox { lo, hi }
    }

    pub fn lattice_coords(&self, i: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rem = i;
        for d in 0..self.n() {
            out[d] = rem % self.dims[d];
            rem /= self.dims[d];
        }
        out
    }

    pub fn index_of(&self, coords: &[usize]) -> Option<usize> {
        let mut idx = 0;
        for d in 0..self.n() {
            if coords[d] >= self.dims[d] {
                return None;
            }
            idx += coords[d] * self.strides[d];
        }
        Some(idx)
    }

    /// Index of the cell whose center is nearest to `x` (clamped to the lattice).
    pub fn nearest_cell(&self, x: &[f64]) -> usize {
        let mut coords = [0usize; 3];
        for d in 0..self.n() {
            let k = ((x[d] - self.origin[d]) / self.h).round();
            coords[d] = k.clamp(0.0, (self.dims[d] - 1) as f64) as usize;
        }
        self.index_of(&coords[..self.n()]).expect("clamped coordinates")
    }

    pub fn distance(&self, i: usize, x: &[f64]) -> f64 {
        self.center(i)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Cells whose centers satisfy `|center - x0| < R`, ascending.
    pub fn ball_indices(&self, ball: &BallSpec) -> Vec<usize> {
        let n = self.n();
        if !(ball.radius > 0.0) {
            return Vec::new();
        }
        let r2 = ball.radius * ball.radius;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for d in 0..n {
            let a = ((ball.center[d] - ball.radius - self.origin[d]) / self.h).floor();
            let b = ((ball.center[d] + ball.radius - self.origin[d]) / self.h).ceil();
            if b < 0.0 || a > (self.dims[d] - 1) as f64 {
                return Vec::new();
            }
            lo[d] = a.max(0.0) as usize;
            hi[d] = b.min((self.dims[d] - 1) as f64) as usize;
        }
        let mut out = Vec::new();
        let mut coords = [0usize; 3];
        let (z_lo, z_hi) = if n == 3 { (lo[2], hi[2]) } else { (0, 0) };
        let (y_lo, y_hi) = if n >= 2 { (lo[1], hi[1]) } else { (0, 0) };
        for z in z_lo..=z_hi {
            coords[2] = z;
            for y in y_lo..=y_hi {
                coords[1] = y;
                for x in lo[0]..=hi[0] {
                    coords[0] = x;
                    let idx = self.index_of(&coords[..n]).expect("in range");
                    let c = self.center(idx);
                    let d2: f64 = c.iter().zip(&ball.center).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d2 < r2 {
                        out.push(idx);
                    }
                }
            }
        }
        out
    }

    /// Cells in `B_{r_out}(center) \ B_{r_in}(center)`, ascending.
    pub fn annulus_indices(&self, center: &[f64], r_in: f64, r_out: f64) -> Result<Vec<usize>> {
        if !(r_in >= 0.0 && r_in < r_out) {
            return Err(invalid(format!("annulus needs 0 <= r_in < r_out, got {r_in}, {r_out}")));
        }
        let outer = self.ball_indices(&BallSpec::new(center.to_vec(), r_out));
        if r_in == 0.0 {
            return Ok(outer);
        }
        let inner = self.ball_indices(&BallSpec::new(center.to_vec(), r_in));
        let mut inner_iter = inner.iter().peekable();
        Ok(outer
            .into_iter()
            .filter(|i| {
                while let Some(&&j) = inner_iter.peek() {
                    if j < *i {
                        inner_iter.next();
                    } else {
                        break;
                    }
                }
                inner_iter.peek().map_or(true, |&&j| j != *i)
            })
            .collect())
    }

    /// Lattice neighbours (including diagonal ones) of cell `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let n = self.n();
        let c = self.lattice_coords(i);
        let mut out = Vec::new();
        let span = 3usize.pow(n as u32);
        for code in 0..span {
            let mut rem = code;
            let mut coords = [0usize; 3];
            let mut valid = true;
            let mut is_self = true;
            for d in 0..n {
                let step = (rem % 3) as i64 - 1;
                rem /= 3;
                is_self &= step == 0;
                let v = c[d] as i64 + step;
                if v < 0 || v >= self.dims[d] as i64 {
                    valid = false;
                }
                coords[d] = v.max(0) as usize;
            }
            if valid && !is_self {
                out.push(self.index_of(&coords[..n]).expect("checked"));
            }
        }
        out
    }

    /// Whether `B_R(x0)` is contained in the domain box.
    pub fn ball_inside_domain(&self, ball: &BallSpec) -> bool {
        (0..self.n()).all(|d| {
            ball.center[d] - ball.radius >= self.domain.lo[d] - 1e-12
                && ball.center[d] + ball.radius <= self.domain.hi[d] + 1e-12
        })
    }
}
