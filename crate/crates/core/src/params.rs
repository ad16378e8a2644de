//! Fractional order, integrability exponent and dimensions of a problem.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `(s, p, n, N)`: the energy is `∫∫ |u(x)-u(y)|^p / |x-y|^(n+sp)` for maps
/// from `R^n` into a target embedded in `R^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct FractionalParams {
    s: f64,
    p: f64,
    n: usize,
    target_dim: usize,
    sp_minus_n: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    s: f64,
    p: f64,
    n: usize,
    target_dim: usize,
}

impl TryFrom<RawParams> for FractionalParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        FractionalParams::new(raw.s, raw.p, raw.n, raw.target_dim)
    }
}

impl From<FractionalParams> for RawParams {
    fn from(p: FractionalParams) -> Self {
        RawParams {
            s: p.s,
            p: p.p,
            n: p.n,
            target_dim: p.target_dim,
        }
    }
}

impl FractionalParams {
    pub fn new(s: f64, p: f64, n: usize, target_dim: usize) -> Result<Self> {
        let mut problems = Vec::new();
        if !(s > 0.0 && s < 1.0) {
            problems.push(format!("s must lie in (0, 1), got {s}"));
        }
        if !(p > 1.0 && p.is_finite()) {
            problems.push(format!("p must be > 1, got {p}"));
        }
        if !(1..=3).contains(&n) {
            problems.push(format!("spatial dimension n must be 1, 2 or 3, got {n}"));
        }
        if target_dim < 2 {
            problems.push(format!("target dimension N must be >= 2, got {target_dim}"));
        }
        if !problems.is_empty() {
            return Err(invalid(problems.join("; ")));
        }
        Ok(FractionalParams {
            s,
            p,
            n,
            target_dim,
            sp_minus_n: s * p - n as f64,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    pub fn sp_minus_n(&self) -> f64 {
        self.sp_minus_n
    }

    /// Exponent `n + sp` of the interaction kernel.
    pub fn kernel_exponent(&self) -> f64 {
        self.n as f64 + self.sp()
    }

    /// The fractional p-Laplacian and everything built on it is only
    /// considered for `p >= 2`.
    pub fn require_operator_range(&self) -> Result<()> {
        if self.p >= 2.0 {
            Ok(())
        } else {
            Err(Error::OperatorRange(self.p))
        }
    }

    /// `sp < n`, the regime the regularity statements are made in.
    pub fn is_subcritical(&self) -> bool {
        self.sp_minus_n < 0.0
    }

    pub fn with_sp(&self, s: f64, p: f64) -> Result<Self> {
        FractionalParams::new(s, p, self.n, self.target_dim)
    }

    pub fn regime_tag(&self) -> &'static str {
        if self.is_subcritical() {
            "subcritical"
        } else {
            "outside-theorem-regime"
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(FractionalParams::new(0.0, 2.0, 1, 2).is_err());
        assert!(FractionalParams::new(1.0, 2.0, 1, 2).is_err());
        assert!(FractionalParams::new(0.5, 1.0, 1, 2).is_err());
        assert!(FractionalParams::new(0.5, 2.0, 4, 2).is_err());
        assert!(FractionalParams::new(0.5, 2.0, 2, 1).is_err());
    }

    #[test]
    fn derived_quantity_is_consistent() {
        let p = FractionalParams::new(0.3, 2.5, 2, 3).unwrap();
        assert_eq!(p.sp_minus_n(), 0.3 * 2.5 - 2.0);
        assert!(p.is_subcritical());
    }

    #[test]
    fn operator_range() {
        let p = FractionalParams::new(0.3, 1.5, 2, 3).unwrap();
        assert!(matches!(p.require_operator_range(), Err(Error::OperatorRange(_))));
    }

    #[test]
    fn serde_validates() {
        let ok: FractionalParams =
            serde_json::from_str(r#"{"s":0.5,"p":2.0,"n":2,"target_dim":2}"#).unwrap();
        assert_eq!(ok.sp(), 1.0);
        let bad = serde_json::from_str::<FractionalParams>(r#"{"s":1.5,"p":2.0,"n":2,"target_dim":2}"#);
        assert!(bad.is_err());
    }
}
