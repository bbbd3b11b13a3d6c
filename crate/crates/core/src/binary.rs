//! Misreported binary response: logistic regression for the latent truth
//! `Ỹ`, with reports `Y` governed by sensitivity `S_e = P(Y=1 | Ỹ=1)` and
//! specificity `S_p = P(Y=0 | Ỹ=0)`. Both mixture layers are raised to the
//! scaled survey weight.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{DesignMatrix, ScaledWeights, SurveyDataset};
use crate::distributions::{PolyaGammaSampler, DEFAULT_PG_TRUNCATION};
use crate::draws::{PosteriorDraws, Provenance};
use crate::gibbs;
use crate::linalg::Matrix;
use crate::math::{ln_logistic, log, logistic};
use crate::rng::stream;
use crate::{Error, Result};

pub const SENS: &str = "sens";
pub const SPEC: &str = "spec";

/// Sampler settings shared by all models.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Prior variance `σ²_β` of every regression coefficient.
    pub prior_variance: f64,
    pub alpha_e: f64,
    pub beta_e: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
    pub seed: u64,
    /// Clamp `(S_e, S_p)` instead of sampling them.
    pub fix_rates: Option<(f64, f64)>,
    /// Clamp the (outcome) regression coefficients.
    pub fix_beta: Option<Vec<f64>>,
    /// Keep every retained latent draw instead of only marginal means.
    pub keep_latent_draws: bool,
    pub pg_truncation: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 10_000,
            burn_in: 1_000,
            prior_variance: 10.0,
            alpha_e: 1.0,
            beta_e: 1.0,
            alpha_p: 1.0,
            beta_p: 1.0,
            seed: 0,
            fix_rates: None,
            fix_beta: None,
            keep_latent_draws: false,
            pg_truncation: DEFAULT_PG_TRUNCATION,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::validation(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(self.prior_variance > 0.0 && self.prior_variance.is_finite()) {
            return Err(Error::validation("prior_variance must be positive and finite"));
        }
        for (name, v) in [
            ("alpha_e", self.alpha_e),
            ("beta_e", self.beta_e),
            ("alpha_p", self.alpha_p),
            ("beta_p", self.beta_p),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive and finite")));
            }
        }
        if let Some((se, sp)) = self.fix_rates {
            for (name, v) in [("sensitivity", se), ("specificity", sp)] {
                if !(0.5..=1.0).contains(&v) {
                    return Err(Error::validation(format!("fixed {name} {v} outside [0.5, 1]")));
                }
            }
        }
        if self.pg_truncation == 0 {
            return Err(Error::validation("pg_truncation must be positive"));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.iterations - self.burn_in
    }

    pub(crate) fn hyper(&self) -> [f64; 4] {
        [self.alpha_e, self.beta_e, self.alpha_p, self.beta_p]
    }

    pub(crate) fn sampler(&self) -> Result<PolyaGammaSampler> {
        PolyaGammaSampler::with_truncation(self.pg_truncation)
    }
}

/// Current values of every unknown in the binary model.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMisreportState {
    pub beta: Vec<f64>,
    pub sens: f64,
    pub spec: f64,
    pub latent_true: Vec<u8>,
    pub omega: Vec<f64>,
}

/// `P(Ỹ = 1 | ·)` for one unit, computed in log space. `p` must lie in
/// `[0, 1]`; at the endpoints the answer does not depend on `y`.
pub fn latent_true_full_conditional(p: f64, y_obs: u8, sens: f64, spec: f64, w: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let eta = log(p) - log(1.0 - p);
    logistic(gibbs::latent_log_odds(eta, y_obs, sens, spec, w))
}

/// Complete-data weighted log pseudo-likelihood
/// `Σ w̃_i [log f(Ỹ_i | β) + log f(Y_i | Ỹ_i, S_e, S_p)]`.
pub fn log_pseudo_likelihood_binary(
    state: &BinaryMisreportState,
    y: &[u8],
    x: &Matrix,
    weights: &[f64],
) -> f64 {
    let mut total = 0.0;
    for i in 0..y.len() {
        let eta = crate::linalg::dot(x.row(i), &state.beta);
        let truth = state.latent_true[i];
        let regression = if truth == 1 { ln_logistic(eta) } else { ln_logistic(-eta) };
        let report = match (truth, y[i]) {
            (1, 1) => state.sens,
            (1, _) => 1.0 - state.sens,
            (_, 1) => 1.0 - state.spec,
            _ => state.spec,
        };
        total += weights[i] * (regression + log(report));
    }
    total
}

/// Fits the binary model to a dataset with a 0/1 response.
pub fn gibbs_fit_binary(
    data: &SurveyDataset,
    design: &DesignMatrix,
    weights: &ScaledWeights,
    cfg: &FitConfig,
) -> Result<PosteriorDraws> {
    let y = data.binary_response()?;
    fit_binary(&y, design, weights.values(), cfg)
}

/// Fits the binary model to raw arrays. Sweep order: `ω → β → S_e → S_p → Ỹ`.
pub fn fit_binary(y: &[u8], design: &DesignMatrix, weights: &[f64], cfg: &FitConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let n = y.len();
    let x = design.matrix();
    if x.rows() != n || weights.len() != n {
        return Err(Error::validation(format!(
            "design has {} rows and {} weights for {n} responses",
            x.rows(),
            weights.len()
        )));
    }
    if let Some(i) = y.iter().position(|&v| v > 1) {
        return Err(Error::validation(format!("row {i}: response is not binary")));
    }
    let p = x.cols();
    if let Some(b) = &cfg.fix_beta {
        if b.len() != p {
            return Err(Error::validation(format!("fix_beta has {} values for {p} coefficients", b.len())));
        }
    }
    let pg = cfg.sampler()?;
    let mut rng = stream(cfg.seed);

    let mut names: Vec<String> = design.column_names().to_vec();
    names.push(SENS.to_string());
    names.push(SPEC.to_string());
    let model = if cfg.fix_rates == Some((1.0, 1.0)) { "naive" } else { "binary-me" };
    let mut draws = PosteriorDraws::new(
        names,
        Provenance {
            model: model.into(),
            seed: cfg.seed,
            iterations: cfg.iterations,
            burn_in: cfg.burn_in,
        },
    );
    let positives = y.iter().filter(|&&v| v == 1).count();
    if n > 0 && (positives == 0 || positives == n) {
        draws.warn(format!(
            "observed response is all {}; error rates are weakly identified",
            u8::from(positives == n)
        ));
    }

    let (init_se, init_sp) = cfg.fix_rates.unwrap_or((0.9, 0.9));
    let mut state = BinaryMisreportState {
        beta: cfg.fix_beta.clone().unwrap_or_else(|| vec![0.0; p]),
        sens: init_se,
        spec: init_sp,
        latent_true: y.to_vec(),
        omega: vec![0.0; n],
    };
    let mut eta = vec![0.0; n];
    let mut latent_sum = vec![0.0; n];
    let mut latent_draws = Vec::new();
    let mut row = vec![0.0; p + 2];

    for it in 0..cfg.iterations {
        if cfg.fix_beta.is_none() {
            gibbs::linear_predictor(x, &state.beta, &mut eta, "regression", it)?;
            gibbs::draw_omegas(&pg, weights, &eta, &mut state.omega, &mut rng);
            let kappa: Vec<f64> = state
                .latent_true
                .iter()
                .zip(weights)
                .map(|(&t, &w)| w * (f64::from(t) - 0.5))
                .collect();
            state.beta = gibbs::draw_coefficients(
                x,
                &state.omega,
                x.tr_mul_vec(&kappa),
                cfg.prior_variance,
                "regression",
                it,
                &mut rng,
            )?;
        }
        gibbs::linear_predictor(x, &state.beta, &mut eta, "regression", it)?;

        if cfg.fix_rates.is_none() {
            let tab = gibbs::cross_tab(y, &state.latent_true, weights);
            let (se, sp) = gibbs::draw_error_rates(&tab, cfg.hyper(), &mut rng)?;
            state.sens = se;
            state.spec = sp;
        }

        for i in 0..n {
            let lo = gibbs::latent_log_odds(eta[i], y[i], state.sens, state.spec, weights[i]);
            state.latent_true[i] = gibbs::bernoulli_log_odds(lo, &mut rng);
        }

        if it >= cfg.burn_in {
            row[..p].copy_from_slice(&state.beta);
            row[p] = state.sens;
            row[p + 1] = state.spec;
            draws.push(&row)?;
            for (s, &t) in latent_sum.iter_mut().zip(&state.latent_true) {
                *s += f64::from(t);
            }
            if cfg.keep_latent_draws {
                latent_draws.push(state.latent_true.iter().map(|&t| u32::from(t)).collect());
            }
        }
    }
    let kept = cfg.retained() as f64;
    draws.set_latent_means(latent_sum.into_iter().map(|s| s / kept).collect(), 1);
    if cfg.keep_latent_draws {
        draws.set_latent_draws(latent_draws);
    }
    Ok(draws)
}

/// Naive weighted logistic fit: the binary model with `S_e = S_p = 1`.
pub fn fit_naive(y: &[u8], design: &DesignMatrix, weights: &[f64], cfg: &FitConfig) -> Result<PosteriorDraws> {
    let cfg = FitConfig {
        fix_rates: Some((1.0, 1.0)),
        ..cfg.clone()
    };
    fit_binary(y, design, weights, &cfg)
}
