//! Kernels shared by the three Gibbs samplers.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::distributions::{
    sample_gaussian_full_conditional, sample_truncated_beta_half, GaussianFullConditional,
    PolyaGammaSampler, TruncatedBetaParams,
};
use crate::linalg::Matrix;
use crate::math::{ln_logistic, log};
use crate::{Error, Result};

/// `ω_i ~ PG(w_i, η_i)`.
pub(crate) fn draw_omegas<R: Rng + ?Sized>(
    pg: &PolyaGammaSampler,
    weights: &[f64],
    eta: &[f64],
    omega: &mut [f64],
    rng: &mut R,
) {
    for ((o, &w), &e) in omega.iter_mut().zip(weights).zip(eta) {
        *o = pg.draw(w, e, rng);
    }
}

/// `β ~ N(Q⁻¹ m, Q⁻¹)` with `Q = XᵀΩX + I/σ²`.
pub(crate) fn draw_coefficients<R: Rng + ?Sized>(
    x: &Matrix,
    omega: &[f64],
    linear_term: Vec<f64>,
    prior_variance: f64,
    context: &str,
    iteration: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut q = x.weighted_gram(omega);
    for j in 0..q.rows() {
        q.set(j, j, q.get(j, j) + 1.0 / prior_variance);
    }
    let fc = GaussianFullConditional::new(q, linear_term)?;
    sample_gaussian_full_conditional(&fc, rng).map_err(|e| numeric(context, iteration, e))
}

pub(crate) fn numeric(context: &str, iteration: usize, e: Error) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot } => Error::Numeric {
            context: context.into(),
            iteration,
            detail: format!("precision matrix not positive definite at pivot {pivot}"),
        },
        other => other,
    }
}

pub(crate) fn linear_predictor(
    x: &Matrix,
    beta: &[f64],
    out: &mut [f64],
    context: &str,
    iteration: usize,
) -> Result<()> {
    for (i, o) in out.iter_mut().enumerate() {
        *o = crate::linalg::dot(x.row(i), beta);
        if !o.is_finite() {
            return Err(Error::Numeric {
                context: context.into(),
                iteration,
                detail: format!("non-finite linear predictor at row {i}"),
            });
        }
    }
    Ok(())
}

pub(crate) fn truncated_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    Ok(sample_truncated_beta_half(&TruncatedBetaParams::new(a, b)?, rng))
}

/// Weighted 2×2 cross-tabulation `[observed][latent]` of two 0/1 vectors.
pub(crate) fn cross_tab(observed: &[u8], latent: &[u8], weights: &[f64]) -> [[f64; 2]; 2] {
    let mut t = [[0.0; 2]; 2];
    for ((&o, &l), &w) in observed.iter().zip(latent).zip(weights) {
        t[o as usize][l as usize] += w;
    }
    t
}

/// Beta₀.₅ draws of `(S_e, S_p)` from a weighted cross-tabulation.
pub(crate) fn draw_error_rates<R: Rng + ?Sized>(
    tab: &[[f64; 2]; 2],
    hyper: [f64; 4],
    rng: &mut R,
) -> Result<(f64, f64)> {
    let [alpha_e, beta_e, alpha_p, beta_p] = hyper;
    let spec = truncated_beta(alpha_p + tab[0][0], beta_p + tab[1][0], rng)?;
    let sens = truncated_beta(alpha_e + tab[1][1], beta_e + tab[0][1], rng)?;
    Ok((sens, spec))
}

/// Log odds that a binary latent truth equals 1 given its logit `eta`, the
/// observed report `y`, the error rates and the unit weight.
pub(crate) fn latent_log_odds(eta: f64, y: u8, sens: f64, spec: f64, w: f64) -> f64 {
    let (report_if_one, report_if_zero) = if y == 1 {
        (log(sens), log(1.0 - spec))
    } else {
        (log(1.0 - sens), log(spec))
    };
    let a = w * (ln_logistic(eta) + report_if_one);
    let b = w * (ln_logistic(-eta) + report_if_zero);
    a - b
}

/// Bernoulli draw with probability `logistic(log_odds)`; infinite odds are
/// deterministic.
pub(crate) fn bernoulli_log_odds<R: Rng + ?Sized>(log_odds: f64, rng: &mut R) -> u8 {
    let p = crate::math::logistic(log_odds);
    let u: f64 = rng.random();
    u8::from(u < p)
}
