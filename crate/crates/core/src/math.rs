//! Scalar special functions used by the samplers.
//!
//! Everything routes through `libm` so the crate builds without `std`.

use core::f64::consts::{PI, SQRT_2};

pub use libm::{atan, erfc, exp, expm1, fabs, floor, log, log1p, pow, sqrt, tanh};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Inverse logit.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `ln(logistic(x))` without cancellation for large |x|.
pub fn ln_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -log1p(exp(-x))
    } else {
        x - log1p(exp(x))
    }
}

/// `x * ln(y)` with the convention `0 * ln(0) = 0`.
pub fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * log(y)
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// `ln(sum(exp(v)))`; `-inf` for an empty or all `-inf` slice.
pub fn ln_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = v.iter().map(|&x| exp(x - max)).sum();
    max + log(s)
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Natural log of the standard normal CDF, accurate deep in the lower tail.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > 0.0 {
        log1p(-0.5 * erfc(x / SQRT_2))
    } else if x > -30.0 {
        log(0.5 * erfc(-x / SQRT_2))
    } else {
        // Asymptotic Mills-ratio expansion.
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)
            + 105.0 / (x2 * x2 * x2 * x2);
        -0.5 * x2 - log(-x) - LN_SQRT_2PI + log(series)
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let max_iter = 10_000 + 10 * sqrt(a.max(b)) as usize;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// `ln I_x(a, b)`, the log of the regularized incomplete beta function.
///
/// Stays finite (and accurate) when `I_x(a, b)` itself underflows.
pub fn ln_beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x >= 1.0 {
        return 0.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_beta_reg_front(a, b, x)
    } else {
        let upper = ln_beta_reg_front(b, a, 1.0 - x);
        log1p(-exp(upper))
    }
}

fn ln_beta_reg_front(a: f64, b: f64, x: f64) -> f64 {
    a * log(x) + b * log1p(-x) - ln_beta(a, b) - log(a) + log(beta_cf(a, b, x))
}

/// Log density of Beta(a, b) at `x`.
pub fn ln_beta_pdf(a: f64, b: f64, x: f64) -> f64 {
    (a - 1.0) * log(x) + (b - 1.0) * log1p(-x) - ln_beta(a, b)
}

/// Scale of the Pólya-Gamma gamma-series representation, `1 / (2π²)`.
pub const INV_TWO_PI_SQ: f64 = 1.0 / (2.0 * PI * PI);
