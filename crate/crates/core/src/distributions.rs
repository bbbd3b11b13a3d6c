//! Random-variate kernels for the Gibbs samplers: Pólya-Gamma with real
//! shape, Beta truncated to `[0.5, 1)`, Gaussian full conditionals in
//! precision form, and Dirichlet.
//!
//! All kernels are stateless; determinism comes entirely from the caller's
//! random stream.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};

use crate::linalg::{Cholesky, Matrix};
use crate::math::{
    atan, exp, fabs, floor, ln_beta, ln_beta_pdf, ln_beta_reg, ln_norm_cdf, log, pow, sqrt,
    INV_TWO_PI_SQ,
};
use crate::{Error, Result};

/// Parameters of PG(b, c): shape `b > 0` (any real) and tilt `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyaGammaParams {
    b: f64,
    c: f64,
}

impl PolyaGammaParams {
    pub fn new(b: f64, c: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::Domain { name: "b", value: b });
        }
        if !c.is_finite() {
            return Err(Error::Domain { name: "c", value: c });
        }
        Ok(PolyaGammaParams { b, c })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `E[ω] = b tanh(c/2) / (2c)`.
    pub fn mean(&self) -> f64 {
        if fabs(self.c) < 1e-8 {
            self.b / 4.0
        } else {
            self.b * crate::math::tanh(0.5 * self.c) / (2.0 * self.c)
        }
    }
}

/// Number of explicit gamma terms in the series used for the fractional part
/// of the shape; the remainder is replaced by a moment-matched gamma draw.
pub const DEFAULT_PG_TRUNCATION: usize = 20;

/// Hybrid PG(b, c) sampler.
///
/// The integer part of `b` is drawn exactly as a sum of PG(1, c) variates
/// (Devroye-style alternating-series rejection). A fractional remainder
/// `f = b - ⌊b⌋` is drawn from the gamma-series representation
/// `(1/2π²) Σ g_k / ((k - ½)² + c²/4π²)`, `g_k ~ Gamma(f, 1)`, truncated after
/// `truncation` terms; the omitted tail is replaced by one gamma variate with
/// the tail's exact mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyaGammaSampler {
    truncation: usize,
}

impl Default for PolyaGammaSampler {
    fn default() -> Self {
        PolyaGammaSampler {
            truncation: DEFAULT_PG_TRUNCATION,
        }
    }
}

const PG_TRUNC: f64 = 0.64;

impl PolyaGammaSampler {
    pub fn with_truncation(truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::validation("Pólya-Gamma truncation must be positive"));
        }
        Ok(PolyaGammaSampler { truncation })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn sample<R: Rng + ?Sized>(&self, params: &PolyaGammaParams, rng: &mut R) -> f64 {
        self.draw(params.b, params.c, rng)
    }

    /// Unchecked draw; callers guarantee `b > 0` and finite `c`.
    pub fn draw<R: Rng + ?Sized>(&self, b: f64, c: f64, rng: &mut R) -> f64 {
        debug_assert!(b > 0.0 && c.is_finite());
        let whole = floor(b);
        let frac = b - whole;
        let mut total = 0.0;
        for _ in 0..whole as u64 {
            total += pg_one(c, rng);
        }
        if frac > 0.0 {
            total += self.series(frac, c, rng);
        }
        if total > 0.0 {
            total
        } else {
            // Only reachable when every gamma term underflows (tiny fractional shape).
            f64::MIN_POSITIVE
        }
    }

    fn series<R: Rng + ?Sized>(&self, shape: f64, c: f64, rng: &mut R) -> f64 {
        let d = c * c / (4.0 * PI * PI);
        let gamma = Gamma::new(shape, 1.0).expect("fractional shape is in (0, 1)");
        let mut sum = 0.0;
        for k in 1..=self.truncation {
            let x = k as f64 - 0.5;
            sum += gamma.sample(rng) / (x * x + d);
        }
        let (s1, s2) = series_tail_sums(self.truncation as f64, d);
        if s1 > 0.0 && s2 > 0.0 {
            let tail_shape = shape * s1 * s1 / s2;
            let tail_scale = s2 / s1;
            if let Ok(tail) = Gamma::new(tail_shape, tail_scale) {
                sum += tail.sample(rng);
            }
        }
        sum * INV_TWO_PI_SQ
    }
}

/// Tail sums `Σ_{k>K} 1/((k-½)² + d)` and `Σ_{k>K} 1/((k-½)² + d)²`,
/// from the midpoint rule with its leading Euler-Maclaurin correction.
pub(crate) fn series_tail_sums(k: f64, d: f64) -> (f64, f64) {
    let k2d = k * k + d;
    let s = sqrt(d);
    let int1 = if s > 0.0 { atan(s / k) / s } else { 1.0 / k };
    let ratio = d / (k * k);
    let int2 = if ratio < 1e-3 {
        // Series of ∫_K^∞ (x²+d)^-2 dx in powers of d/K².
        let mut acc = 0.0;
        let mut term = 1.0 / (k * k * k);
        for m in 0..8 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * (m as f64 + 1.0) * term / (2.0 * m as f64 + 3.0);
            term *= ratio;
        }
        acc
    } else {
        (int1 - k / k2d) / (2.0 * d)
    };
    // Σ_{k>K} f(k-½) ≈ ∫_K^∞ f + f'(K)/24 - 7 f'''(K)/5760.
    let u2 = k2d * k2d;
    let f1_d1 = -2.0 * k / u2;
    let f1_d3 = -24.0 * k * (k * k - d) / (u2 * u2);
    let f2_d1 = -4.0 * k / (u2 * k2d);
    let f2_d3 = (-120.0 * k * k * k + 72.0 * k * d) / (u2 * u2 * k2d);
    (
        int1 + f1_d1 / 24.0 - 7.0 * f1_d3 / 5760.0,
        int2 + f2_d1 / 24.0 - 7.0 * f2_d3 / 5760.0,
    )
}

/// One draw from PG(1, c): `J*(1, |c|/2) / 4` by alternating-series rejection
/// from a mixture of a truncated exponential and a truncated inverse Gaussian.
fn pg_one<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    let z = fabs(c) * 0.5;
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let p_exp = exponential_mass(z, fz);
    loop {
        let u: f64 = rng.random();
        let x = if u < p_exp {
            let e: f64 = Exp1.sample(rng);
            PG_TRUNC + e / fz
        } else {
            truncated_inverse_gaussian(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0u32;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Probability that the proposal comes from the exponential piece.
fn exponential_mass(z: f64, fz: f64) -> f64 {
    let t = PG_TRUNC;
    let rt = sqrt(1.0 / t);
    let b = rt * (t * z - 1.0);
    let a = -rt * (t * z + 1.0);
    let x0 = log(fz) + fz * t;
    let xb = x0 - z + ln_norm_cdf(b);
    let xa = x0 + z + ln_norm_cdf(a);
    let q_over_p = 4.0 / PI * (exp(xb) + exp(xa));
    1.0 / (1.0 + q_over_p)
}

/// Coefficient `a_n(x)` of the alternating series for the J*(1) density.
fn series_coef(n: u32, x: f64) -> f64 {
    let h = n as f64 + 0.5;
    let k = h * PI;
    if x > PG_TRUNC {
        k * exp(-0.5 * k * k * x)
    } else if x > 0.0 {
        exp(-1.5 * (log(0.5 * PI) + log(x)) + log(k) - 2.0 * h * h / x)
    } else {
        0.0
    }
}

/// Inverse Gaussian IG(1/z, 1) truncated to `(0, 0.64)`.
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = PG_TRUNC;
    if z < 1.0 / t {
        // Mean above the truncation point: propose from the truncated Lévy
        // law and accept with probability exp(-z² x / 2).
        loop {
            let x = loop {
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                if e1 * e1 <= 2.0 * e2 / t {
                    let r = 1.0 + e1 * t;
                    break t / (r * r);
                }
            };
            let alpha = exp(-0.5 * z * z * x);
            if rng.random::<f64>() <= alpha {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let n: f64 = StandardNormal.sample(rng);
            let y = n * n;
            let mu_y = mu * y;
            let mut x = mu + 0.5 * mu * mu_y - 0.5 * mu * sqrt(4.0 * mu_y + mu_y * mu_y);
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < t {
                return x;
            }
        }
    }
}

/// Draws PG(b, c) with the default hybrid sampler.
pub fn sample_polya_gamma<R: Rng + ?Sized>(params: &PolyaGammaParams, rng: &mut R) -> f64 {
    PolyaGammaSampler::default().sample(params, rng)
}

/// Beta(alpha, beta) restricted to `[0.5, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedBetaParams {
    alpha: f64,
    beta: f64,
}

impl TruncatedBetaParams {
    pub const LOWER_BOUND: f64 = 0.5;

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
            });
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain {
                name: "beta",
                value: beta,
            });
        }
        Ok(TruncatedBetaParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Inverse-CDF draw from Beta(alpha, beta) conditioned on `[0.5, 1)`.
///
/// Works with the reflected variable `y = 1 - x ~ Beta(beta, alpha)` on
/// `(0, 0.5]` and inverts `ln I_y` in log space, so it stays exact when
/// nearly all of the untruncated mass lies below 0.5.
pub fn sample_truncated_beta_half<R: Rng + ?Sized>(params: &TruncatedBetaParams, rng: &mut R) -> f64 {
    let p = params.beta;
    let q = params.alpha;
    let ln_total = ln_beta_reg(p, q, 0.5);
    let u: f64 = Open01.sample(rng);
    let target = log(u) + ln_total;
    let y = invert_ln_beta_reg(p, q, target);
    (1.0 - y).clamp(TruncatedBetaParams::LOWER_BOUND, ONE_MINUS_ULP)
}

/// Solves `ln I_y(p, q) = target` for `y` in `(0, 0.5]`, by safeguarded
/// Newton iteration on `t = ln y`.
fn invert_ln_beta_reg(p: f64, q: f64, target: f64) -> f64 {
    let mut lo = -700.0f64;
    let mut hi = log(0.5);
    let h = |t: f64| ln_beta_reg(p, q, exp(t)) - target;
    if h(lo) >= 0.0 {
        return exp(lo);
    }
    if h(hi) <= 0.0 {
        return 0.5;
    }
    // Small-y approximation I_y ≈ y^p / (p B(p, q)).
    let mut t = ((target + log(p) + ln_beta(p, q)) / p).clamp(lo, hi);
    for _ in 0..200 {
        let ln_i = ln_beta_reg(p, q, exp(t));
        let f = ln_i - target;
        if f == 0.0 {
            return exp(t);
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let y = exp(t);
        let slope = exp(t + ln_beta_pdf(p, q, y) - ln_i);
        let mut next = t - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if fabs(next - t) < 1e-13 * fabs(t).max(1.0) || hi - lo < 1e-14 {
            return exp(next);
        }
        t = next;
    }
    exp(t)
}

/// Gaussian full conditional `N(Q⁻¹ m, Q⁻¹)` given precision `Q` and linear term `m`.
#[derive(Debug, Clone)]
pub struct GaussianFullConditional {
    precision: Matrix,
    linear_term: Vec<f64>,
}

impl GaussianFullConditional {
    pub fn new(precision: Matrix, linear_term: Vec<f64>) -> Result<Self> {
        if precision.rows() != precision.cols() || precision.rows() != linear_term.len() {
            return Err(Error::validation(alloc::format!(
                "precision is {}x{} but linear term has length {}",
                precision.rows(),
                precision.cols(),
                linear_term.len()
            )));
        }
        if precision.asymmetry() > 1e-10 {
            return Err(Error::validation("precision matrix is not symmetric"));
        }
        Ok(GaussianFullConditional {
            precision,
            linear_term,
        })
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.linear_term
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        Ok(Cholesky::new(&self.precision)?.solve(&self.linear_term))
    }
}

/// One draw via `Q = L Lᵀ`: `x = L⁻ᵀ (L⁻¹ m + z)`, `z ~ N(0, I)`.
pub fn sample_gaussian_full_conditional<R: Rng + ?Sized>(
    fc: &GaussianFullConditional,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let chol = Cholesky::new(&fc.precision)?;
    let mut x = fc.linear_term.clone();
    chol.solve_lower_in_place(&mut x);
    for xi in x.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *xi += z;
    }
    chol.solve_upper_in_place(&mut x);
    Ok(x)
}

/// `ln G` for `G ~ Gamma(shape, 1)`, finite even when `G` underflows.
pub(crate) fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("shape >= 1").sample(rng);
        log(g)
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("shape + 1 > 1").sample(rng);
        let u: f64 = Open01.sample(rng);
        log(g) + log(u) / shape
    }
}

/// Dirichlet draw from normalized gamma variates, computed in log space.
pub fn sample_dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if concentration.is_empty() {
        return Err(Error::validation("Dirichlet needs at least one component"));
    }
    for &a in concentration {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Domain {
                name: "concentration",
                value: a,
            });
        }
    }
    let logs: Vec<f64> = concentration
        .iter()
        .map(|&a| ln_gamma_variate(a, rng))
        .collect();
    let norm = crate::math::ln_sum_exp(&logs);
    let mut out: Vec<f64> = logs
        .iter()
        .map(|&l| exp(l - norm).max(f64::MIN_POSITIVE))
        .collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    Ok(out)
}

/// Exact PG(b, c) variance, `b / (4 c³) (sinh c - c) sech²(c/2)`, used by diagnostics.
pub fn polya_gamma_variance(b: f64, c: f64) -> f64 {
    if fabs(c) < 1e-3 {
        // Taylor expansion around c = 0: b/24 - b c²/240.
        return b / 24.0 - b * c * c / 240.0;
    }
    let sech = 1.0 / libm::cosh(0.5 * c);
    b / (4.0 * pow(c, 3.0)) * (libm::sinh(c) - c) * sech * sech
}
