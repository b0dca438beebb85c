//! Scalar special functions and a bracketing root finder.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// Gaussian tail probability `Q(x) = P(Z > x)` for a standard normal `Z`.
///
/// Evaluated through the complementary error function, which keeps the
/// absolute error at the level of double rounding across the whole line.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `ln Q(x)`, finite for every finite `x`. Past the point where `Q`
/// underflows it switches to the asymptotic tail expansion.
pub fn ln_q_function(x: f64) -> f64 {
    if x < 0.0 {
        return (-q_function(-x)).ln_1p();
    }
    if x < 37.0 {
        return q_function(x).ln();
    }
    let r = 1.0 / (x * x);
    let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
    -0.5 * x * x - x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))`, stable in both tails.
pub fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Logistic surrogate of the Gaussian tail: `Q(x) ≈ 1 - sigmoid(eta * x)`.
pub fn q_sigmoid_approx(x: f64, eta: f64) -> f64 {
    sigmoid(-eta * x)
}

/// Natural log of the binomial coefficient `C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Floor that absorbs representation error on values that are integral in
/// exact arithmetic (e.g. `1e-3 / 1e-4`).
pub(crate) fn robust_floor(x: f64) -> f64 {
    (x + 1e-9 * x.abs().max(1.0)).floor()
}

pub(crate) fn robust_ceil(x: f64) -> f64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}

/// Search interval and stopping rule for [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: u32,
}

impl RootBracket {
    pub const DEFAULT_TOL: f64 = 1e-9;
    pub const DEFAULT_MAX_ITER: u32 = 200;

    pub fn new(lo: f64, hi: f64, tol: f64, max_iter: u32) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidConfig(format!("bracket requires lo < hi, got [{lo}, {hi}]")));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidConfig(format!("bracket tolerance must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(Error::InvalidConfig("bracket max_iter must be positive".into()));
        }
        Ok(Self { lo, hi, tol, max_iter })
    }

    /// Bracket with the default tolerance (1e-9) and iteration cap (200).
    pub fn with_defaults(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, Self::DEFAULT_TOL, Self::DEFAULT_MAX_ITER)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> u32 {
        self.max_iter
    }
}

/// Bisection on a sign-changing bracket.
///
/// Returns the midpoint of the final bracket once its width is at most
/// `tol`, or an exact zero if one is hit along the way. The interval also
/// stops shrinking once it reaches adjacent floats, which is treated as
/// converged.
pub fn bisect<F>(f: F, bracket: &RootBracket) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo * f_hi < 0.0) {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;

    for _ in 0..bracket.max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= bracket.tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= bracket.tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::NoConvergence { max_iter: bracket.max_iter })
    }
}
