//! Outcome regression on a subset `S_f` of the sample whose binary covariate
//! (citizenship) is misreported. The latent true covariate `x̃_c` follows a
//! logistic model on the full sample `S`; observed reports follow
//! sensitivity `S_e` and specificity `S_p`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::binary::{self, FitConfig, SENS, SPEC};
use crate::data::{
    build_design_matrix, encode_design, orthogonalize_against, scale_weights_within, subset_basis, DesignMatrix, Formula,
    ScaledWeights, SurveyDataset, WeightScope,
};
use crate::draws::{PosteriorDraws, Provenance};
use crate::gibbs;
use crate::linalg::dot;
use crate::math::{ln_logistic, logistic};
use crate::rng::stream;
use crate::{Error, Result};

/// Prefix of citizenship-equation coefficient names in posterior draws.
pub const CITIZENSHIP_PREFIX: &str = "citizenship_model:";

/// Inputs of the two-equation model.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoEquationData {
    y: Vec<u8>,
    x1: DesignMatrix,
    citizenship_col: usize,
    outcome_rows: Vec<usize>,
    outcome_weights: Vec<f64>,
    x_obs: Vec<u8>,
    x2: DesignMatrix,
    weights: Vec<f64>,
}

impl TwoEquationData {
    /// `y` and `x1` cover the subset rows in order; `x_obs`, `x2`,
    /// `weights` and `subset` cover the full sample. The column of `x1`
    /// named `citizenship` is a placeholder overwritten by the latent
    /// covariate. Outcome weights reuse the full-sample scaling unless
    /// `rescale_outcome_weights` is set.
    pub fn new(
        y: Vec<u8>,
        x1: DesignMatrix,
        citizenship: &str,
        x_obs: Vec<u8>,
        x2: DesignMatrix,
        weights: &ScaledWeights,
        subset: &[bool],
        rescale_outcome_weights: bool,
    ) -> Result<Self> {
        let n = x_obs.len();
        if x2.rows() != n || weights.len() != n || subset.len() != n {
            return Err(Error::validation(format!(
                "full-sample inputs differ in length: {n} reports, {} design rows, {} weights, {} subset flags",
                x2.rows(),
                weights.len(),
                subset.len()
            )));
        }
        let outcome_rows: Vec<usize> = (0..n).filter(|&i| subset[i]).collect();
        if y.len() != outcome_rows.len() || x1.rows() != outcome_rows.len() {
            return Err(Error::validation(format!(
                "subset has {} units but {} outcomes and {} outcome design rows",
                outcome_rows.len(),
                y.len(),
                x1.rows()
            )));
        }
        if let Some(i) = y.iter().position(|&v| v > 1) {
            return Err(Error::validation(format!("outcome row {i} is not binary")));
        }
        if let Some(i) = x_obs.iter().position(|&v| v > 1) {
            return Err(Error::validation(format!("observed covariate row {i} is not binary")));
        }
        let citizenship_col = x1
            .column_index(citizenship)
            .ok_or_else(|| Error::schema(format!("outcome design has no column `{citizenship}`")))?;
        if outcome_rows.len() > 1 && outcome_rows.len() < n {
            let f = subset_basis(subset);
            let ftx = f.transpose().matmul(x2.matrix());
            let tol = 1e-8 * x2.matrix().max_abs().max(1.0);
            if ftx.max_abs() >= tol {
                return Err(Error::validation(format!(
                    "citizenship design is not orthogonal to subset membership (max |F'X| = {:e})",
                    ftx.max_abs()
                )));
            }
        }
        let mut outcome_weights = weights.select(&outcome_rows);
        if rescale_outcome_weights {
            outcome_weights = scale_weights_within(&outcome_weights, WeightScope::Subset)?
                .values()
                .to_vec();
        }
        Ok(TwoEquationData {
            y,
            x1,
            citizenship_col,
            outcome_rows,
            outcome_weights,
            x_obs,
            x2,
            weights: weights.values().to_vec(),
        })
    }

    /// Builds both designs from a dataset: the outcome design from
    /// `controls` plus the error-prone column over the subset, and the
    /// citizenship design from `citizenship_terms` (no intercept) projected
    /// off `[1, subset indicator]`.
    pub fn from_dataset(
        data: &SurveyDataset,
        controls: &Formula,
        citizenship: &str,
        citizenship_terms: &Formula,
        rescale_outcome_weights: bool,
    ) -> Result<Self> {
        let subset = data
            .subset()
            .ok_or_else(|| Error::validation("the covariate model needs a subset flag"))?
            .to_vec();
        let rows = data.subset_indices();
        let x_obs = data.column(citizenship)?.as_binary(citizenship)?;
        let y_all = data.binary_response()?;
        let y: Vec<u8> = rows.iter().map(|&i| y_all[i]).collect();
        let full_controls = encode_design(data, controls)?;
        let x_obs_f: Vec<f64> = rows.iter().map(|&i| f64::from(x_obs[i])).collect();
        let x1 = full_controls.select_rows(&rows).with_column(citizenship, &x_obs_f)?;
        x1.check_rank()?;
        let mut x2_terms = citizenship_terms.clone();
        x2_terms.intercept = false;
        let x2_star = build_design_matrix(data, &x2_terms)?;
        let x2 = orthogonalize_against(&x2_star, &subset_basis(&subset))?;
        let weights = crate::data::scale_weights(data.raw_weight())?;
        TwoEquationData::new(y, x1, citizenship, x_obs, x2, &weights, &subset, rescale_outcome_weights)
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn x1(&self) -> &DesignMatrix {
        &self.x1
    }

    pub fn citizenship_column(&self) -> usize {
        self.citizenship_col
    }

    pub fn citizenship_name(&self) -> &str {
        &self.x1.column_names()[self.citizenship_col]
    }

    /// Positions of the subset units within the full sample.
    pub fn outcome_rows(&self) -> &[usize] {
        &self.outcome_rows
    }

    pub fn outcome_weights(&self) -> &[f64] {
        &self.outcome_weights
    }

    pub fn observed_covariate(&self) -> &[u8] {
        &self.x_obs
    }

    pub fn x2(&self) -> &DesignMatrix {
        &self.x2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Outcome design with the observed covariate in the citizenship column.
    pub fn naive_design(&self) -> DesignMatrix {
        let mut d = self.x1.clone();
        let col: Vec<f64> = self.outcome_rows.iter().map(|&i| f64::from(self.x_obs[i])).collect();
        d.matrix_mut().set_column(self.citizenship_col, &col);
        d
    }
}

/// Options specific to the two-equation sampler.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CovariateOptions {
    /// Omit the outcome likelihood from the latent covariate update for
    /// subset units, reproducing the published step verbatim.
    pub strict_step7: bool,
    /// Clamp the citizenship-equation coefficients.
    pub fix_beta2: Option<Vec<f64>>,
}

/// Current values of every unknown in the two-equation model.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoEquationState {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub sens: f64,
    pub spec: f64,
    /// Over the full sample.
    pub latent_xc: Vec<u8>,
    pub omega1: Vec<f64>,
    pub omega2: Vec<f64>,
}

/// `(S_p, S_e)` draws from the weighted cross-tabulation of observed against
/// latent covariate.
pub fn update_error_rates<R: rand::Rng + ?Sized>(
    x_obs: &[u8],
    latent: &[u8],
    weights: &[f64],
    hyper: [f64; 4],
    rng: &mut R,
) -> Result<(f64, f64)> {
    let tab = gibbs::cross_tab(x_obs, latent, weights);
    let (sens, spec) = gibbs::draw_error_rates(&tab, hyper, rng)?;
    Ok((spec, sens))
}

/// `P(x̃_c = 1 | ·)` for one unit. `outcome` carries, for subset units, the
/// outcome weight and the weighted Bernoulli log-likelihood of `y` under
/// `x̃_c = 1` and `x̃_c = 0`.
pub fn latent_citizenship_probability(
    p_c: f64,
    x_obs: u8,
    sens: f64,
    spec: f64,
    w: f64,
    outcome: Option<(f64, f64)>,
) -> f64 {
    if p_c <= 0.0 {
        return 0.0;
    }
    if p_c >= 1.0 {
        return 1.0;
    }
    let eta = crate::math::log(p_c) - crate::math::log(1.0 - p_c);
    let mut lo = gibbs::latent_log_odds(eta, x_obs, sens, spec, w);
    if let Some((ll1, ll0)) = outcome {
        lo += ll1 - ll0;
    }
    logistic(lo)
}

fn outcome_log_lik(y: u8, eta: f64) -> f64 {
    if y == 1 {
        ln_logistic(eta)
    } else {
        ln_logistic(-eta)
    }
}

/// Runs the seven-step sweep: `ω₁` over the subset, `ω₂` over the sample,
/// `S_p`, `S_e`, `β₁`, `β₂`, then `x̃_c` unit by unit.
pub fn gibbs_fit_covariate_me(
    data: &TwoEquationData,
    cfg: &FitConfig,
    opts: &CovariateOptions,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let x1_names = data.x1.column_names().to_vec();
    let x2_names = data.x2.column_names().to_vec();
    let (p1, p2) = (x1_names.len(), x2_names.len());
    if let Some(b) = &cfg.fix_beta {
        if b.len() != p1 {
            return Err(Error::validation(format!("fix_beta has {} values for {p1} outcome coefficients", b.len())));
        }
    }
    if let Some(b) = &opts.fix_beta2 {
        if b.len() != p2 {
            return Err(Error::validation(format!(
                "fix_beta2 has {} values for {p2} citizenship coefficients",
                b.len()
            )));
        }
    }
    let pg = cfg.sampler()?;
    let mut rng = stream(cfg.seed);
    let n = data.x_obs.len();
    let nf = data.y.len();
    let cc = data.citizenship_col;

    let mut names = x1_names.clone();
    names.extend(x2_names.iter().map(|n| format!("{CITIZENSHIP_PREFIX}{n}")));
    names.push(SENS.to_string());
    names.push(SPEC.to_string());
    let mut draws = PosteriorDraws::new(
        names,
        Provenance {
            model: "covariate-me".into(),
            seed: cfg.seed,
            iterations: cfg.iterations,
            burn_in: cfg.burn_in,
        },
    );

    let (se0, sp0) = cfg.fix_rates.unwrap_or((0.9, 0.9));
    let mut st = TwoEquationState {
        beta1: cfg.fix_beta.clone().unwrap_or_else(|| vec![0.0; p1]),
        beta2: opts.fix_beta2.clone().unwrap_or_else(|| vec![0.0; p2]),
        sens: se0,
        spec: sp0,
        latent_xc: data.x_obs.clone(),
        omega1: vec![0.0; nf],
        omega2: vec![0.0; n],
    };
    let mut x1 = data.x1.matrix().clone();
    let refresh = |x1: &mut crate::linalg::Matrix, latent: &[u8]| {
        for (r, &i) in data.outcome_rows.iter().enumerate() {
            x1.set(r, cc, f64::from(latent[i]));
        }
    };
    refresh(&mut x1, &st.latent_xc);
    let x2 = data.x2.matrix();
    let kappa1: Vec<f64> = data
        .y
        .iter()
        .zip(&data.outcome_weights)
        .map(|(&y, &w)| w * (f64::from(y) - 0.5))
        .collect();
    let mut eta1 = vec![0.0; nf];
    let mut eta2 = vec![0.0; n];
    // Position within the subset of each sample unit, if any.
    let mut subset_pos = vec![usize::MAX; n];
    for (r, &i) in data.outcome_rows.iter().enumerate() {
        subset_pos[i] = r;
    }
    let mut latent_sum = vec![0.0; n];
    let mut latent_draws = Vec::new();
    let mut row = vec![0.0; p1 + p2 + 2];
    const OUTCOME: &str = "outcome equation";
    const CITIZENSHIP: &str = "citizenship equation";

    for it in 0..cfg.iterations {
        // Steps 1-2.
        if cfg.fix_beta.is_none() {
            gibbs::linear_predictor(&x1, &st.beta1, &mut eta1, OUTCOME, it)?;
            gibbs::draw_omegas(&pg, &data.outcome_weights, &eta1, &mut st.omega1, &mut rng);
        }
        if opts.fix_beta2.is_none() {
            gibbs::linear_predictor(x2, &st.beta2, &mut eta2, CITIZENSHIP, it)?;
            gibbs::draw_omegas(&pg, &data.weights, &eta2, &mut st.omega2, &mut rng);
        }
        // Steps 3-4.
        if cfg.fix_rates.is_none() {
            let (sp, se) = update_error_rates(&data.x_obs, &st.latent_xc, &data.weights, cfg.hyper(), &mut rng)?;
            st.spec = sp;
            st.sens = se;
        }
        // Steps 5-6.
        if cfg.fix_beta.is_none() {
            st.beta1 = gibbs::draw_coefficients(
                &x1,
                &st.omega1,
                x1.tr_mul_vec(&kappa1),
                cfg.prior_variance,
                OUTCOME,
                it,
                &mut rng,
            )?;
        }
        if opts.fix_beta2.is_none() {
            let kappa2: Vec<f64> = st
                .latent_xc
                .iter()
                .zip(&data.weights)
                .map(|(&t, &w)| w * (f64::from(t) - 0.5))
                .collect();
            st.beta2 = gibbs::draw_coefficients(
                x2,
                &st.omega2,
                x2.tr_mul_vec(&kappa2),
                cfg.prior_variance,
                CITIZENSHIP,
                it,
                &mut rng,
            )?;
        }
        // Step 7.
        gibbs::linear_predictor(x2, &st.beta2, &mut eta2, CITIZENSHIP, it)?;
        let beta_c = st.beta1[cc];
        for i in 0..n {
            let mut lo = gibbs::latent_log_odds(eta2[i], data.x_obs[i], st.sens, st.spec, data.weights[i]);
            let r = subset_pos[i];
            if r != usize::MAX && !opts.strict_step7 {
                let base = dot(x1.row(r), &st.beta1) - beta_c * x1.get(r, cc);
                let y = data.y[r];
                let w = data.outcome_weights[r];
                lo += w * (outcome_log_lik(y, base + beta_c) - outcome_log_lik(y, base));
            }
            if lo.is_nan() {
                return Err(Error::Numeric {
                    context: "latent covariate".into(),
                    iteration: it,
                    detail: format!("undefined update probability at row {i}"),
                });
            }
            let v = gibbs::bernoulli_log_odds(lo, &mut rng);
            st.latent_xc[i] = v;
            if r != usize::MAX {
                x1.set(r, cc, f64::from(v));
            }
        }
        debug_assert!(data
            .outcome_rows
            .iter()
            .enumerate()
            .all(|(r, &i)| x1.get(r, cc) == f64::from(st.latent_xc[i])));

        if it >= cfg.burn_in {
            row[..p1].copy_from_slice(&st.beta1);
            row[p1..p1 + p2].copy_from_slice(&st.beta2);
            row[p1 + p2] = st.sens;
            row[p1 + p2 + 1] = st.spec;
            draws.push(&row)?;
            for (s, &t) in latent_sum.iter_mut().zip(&st.latent_xc) {
                *s += f64::from(t);
            }
            if cfg.keep_latent_draws {
                latent_draws.push(st.latent_xc.iter().map(|&t| u32::from(t)).collect());
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

/// Naive weighted logistic regression of the outcome on the controls and the
/// observed covariate, restricted to the subset.
pub fn fit_naive_covariate(data: &TwoEquationData, cfg: &FitConfig) -> Result<PosteriorDraws> {
    binary::fit_naive(&data.y, &data.naive_design(), &data.outcome_weights, cfg)
}

/// Per-draw `logit⁻¹(x'β₁)` at a covariate profile with the citizenship
/// column set to `citizenship`. Outcome coefficients are the draw columns
/// that are neither error rates nor citizenship-equation coefficients.
pub fn predict_insurance_probability(
    draws: &PosteriorDraws,
    profile: &BTreeMap<String, f64>,
    citizenship_column: &str,
    citizenship: u8,
) -> Result<Vec<f64>> {
    let mut cols = Vec::new();
    let mut x = Vec::new();
    for (j, name) in draws.names().iter().enumerate() {
        if name == SENS || name == SPEC || name.starts_with(CITIZENSHIP_PREFIX) {
            continue;
        }
        let v = if name == citizenship_column {
            f64::from(citizenship)
        } else {
            *profile
                .get(name)
                .ok_or_else(|| Error::schema(format!("profile has no value for `{name}`")))?
        };
        cols.push(j);
        x.push(v);
    }
    if !cols.iter().any(|&j| draws.names()[j] == citizenship_column) {
        return Err(Error::schema(format!("draws have no coefficient `{citizenship_column}`")));
    }
    Ok(draws
        .rows()
        .map(|r| logistic(cols.iter().zip(&x).map(|(&j, &v)| r[j] * v).sum()))
        .collect())
}
