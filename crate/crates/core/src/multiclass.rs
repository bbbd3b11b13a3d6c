//! Misreported K-category response. The latent class follows a
//! multinomial logit with the last class as reference (`β_K = 0`); reports
//! follow a column-stochastic reporting-rate matrix `R` with
//! `r[j][k] = P(report j | truth k)` and Dirichlet priors on its columns.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Open01};

use crate::binary::FitConfig;
use crate::data::{DesignMatrix, ScaledWeights, SurveyDataset};
use crate::distributions::sample_dirichlet;
use crate::draws::{PosteriorDraws, Provenance};
use crate::gibbs;
use crate::linalg::{dot, Matrix};
use crate::math::{exp, fabs, ln_sum_exp, log};
use crate::rng::stream;
use crate::{Error, Result};

/// Column-stochastic K×K matrix of reporting probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportingRateMatrix {
    k: usize,
    /// Row-major: `r[report * k + truth]`.
    r: Vec<f64>,
}

impl ReportingRateMatrix {
    /// `rows[report][truth]`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::validation("reporting matrix needs at least 2 classes"));
        }
        let mut r = Vec::with_capacity(k * k);
        for row in rows {
            let row = row.as_ref();
            if row.len() != k {
                return Err(Error::validation("reporting matrix must be square"));
            }
            r.extend_from_slice(row);
        }
        let m = ReportingRateMatrix { k, r };
        for t in 0..k {
            let col = m.column(t);
            if col.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::validation(format!("column {t} has a negative entry")));
            }
            let s: f64 = col.iter().sum();
            if fabs(s - 1.0) > 1e-12 {
                return Err(Error::validation(format!("column {t} sums to {s}, not 1")));
            }
        }
        Ok(m)
    }

    pub fn identity(k: usize) -> Self {
        let mut r = vec![0.0; k * k];
        for i in 0..k {
            r[i * k + i] = 1.0;
        }
        ReportingRateMatrix { k, r }
    }

    /// Two-class matrix with class 1 playing the role of "positive".
    pub fn from_error_rates(sens: f64, spec: f64) -> Self {
        ReportingRateMatrix {
            k: 2,
            r: vec![sens, 1.0 - spec, 1.0 - sens, spec],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, report: usize, truth: usize) -> f64 {
        self.r[report * self.k + truth]
    }

    pub fn column(&self, truth: usize) -> Vec<f64> {
        (0..self.k).map(|j| self.get(j, truth)).collect()
    }

    fn set_column(&mut self, truth: usize, col: &[f64]) {
        for (j, &v) in col.iter().enumerate() {
            self.r[j * self.k + truth] = v;
        }
    }

    pub fn as_matrix(&self) -> Matrix {
        Matrix::from_row_major(self.k, self.k, self.r.clone()).expect("square")
    }

    /// Largest `|Σ_j r[j][k] - 1|` over columns.
    pub fn column_sum_error(&self) -> f64 {
        (0..self.k)
            .map(|t| fabs(self.column(t).iter().sum::<f64>() - 1.0))
            .fold(0.0, f64::max)
    }
}

/// Current values of every unknown in the multiclass model.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassState {
    /// K vectors; the last is the fixed zero reference.
    pub betas: Vec<Vec<f64>>,
    pub rates: ReportingRateMatrix,
    /// Latent class index in `0..K`.
    pub latent_class: Vec<u32>,
    /// Row-major n×K class probabilities.
    pub class_probs: Vec<f64>,
}

/// Options specific to the multiclass sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassOptions {
    /// Dirichlet prior concentration per component; defaults to `1/K`.
    pub concentration: Option<f64>,
    /// Restrict every diagonal entry `r[k][k]` to exceed 1/2.
    pub diagonal_dominance: bool,
    /// Clamp `R` instead of sampling it.
    pub fix_reporting: Option<ReportingRateMatrix>,
}

impl Default for MulticlassOptions {
    fn default() -> Self {
        MulticlassOptions {
            concentration: None,
            diagonal_dominance: true,
            fix_reporting: None,
        }
    }
}

/// `P(Ỹ = k | ·) ∝ (p_k · r[y][k])^w`, normalized after max-subtraction.
pub fn latent_class_full_conditional(
    p_row: &[f64],
    y_obs: usize,
    rates: &ReportingRateMatrix,
    w: f64,
) -> Vec<f64> {
    let logs: Vec<f64> = p_row
        .iter()
        .enumerate()
        .map(|(k, &p)| w * (log(p) + log(rates.get(y_obs, k))))
        .collect();
    normalize_logs(&logs)
}

fn normalize_logs(logs: &[f64]) -> Vec<f64> {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![1.0 / logs.len() as f64; logs.len()];
    }
    let e: Vec<f64> = logs.iter().map(|&l| exp(l - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Gumbel-max draw of an index from unnormalized log weights.
fn gumbel_max<R: Rng + ?Sized>(logs: &[f64], rng: &mut R) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, &l) in logs.iter().enumerate() {
        let u: f64 = Open01.sample(rng);
        let v = l - log(-log(u));
        if v > best_val {
            best_val = v;
            best = k;
        }
    }
    best
}

/// Draws column `truth` of `R` from `Dirichlet(concentration + counts)`.
/// With `diagonal_dominance` the draw is conditioned on `r[truth][truth] > 1/2`,
/// sampled exactly by aggregation: the diagonal entry from a Beta truncated to
/// `[1/2, 1)`, the rest as the remaining mass times a Dirichlet.
pub fn reporting_column_update<R: Rng + ?Sized>(
    counts: &[f64],
    concentration: f64,
    truth: usize,
    diagonal_dominance: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let a: Vec<f64> = counts.iter().map(|&c| concentration + c).collect();
    if !diagonal_dominance {
        return sample_dirichlet(&a, rng);
    }
    if truth >= a.len() {
        return Err(Error::validation("truth class out of range"));
    }
    let rest: Vec<f64> = a
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != truth)
        .map(|(_, &v)| v)
        .collect();
    let diag = gibbs::truncated_beta(a[truth], rest.iter().sum(), rng)?;
    let others = sample_dirichlet(&rest, rng)?;
    let mut col = Vec::with_capacity(a.len());
    let mut it = others.into_iter();
    for j in 0..a.len() {
        col.push(if j == truth {
            diag
        } else {
            (1.0 - diag) * it.next().expect("K-1 components")
        });
    }
    Ok(col)
}

/// Fits the multiclass model to a dataset whose response has K ≥ 2 declared levels.
pub fn gibbs_fit_multiclass(
    data: &SurveyDataset,
    design: &DesignMatrix,
    weights: &ScaledWeights,
    cfg: &FitConfig,
    opts: &MulticlassOptions,
) -> Result<PosteriorDraws> {
    fit_multiclass(data.response(), data.response_levels(), design, weights.values(), cfg, opts)
}

/// Sweep order: for each non-reference class, PG auxiliaries then `β_k`;
/// then the columns of `R`; then the latent classes.
pub fn fit_multiclass(
    y: &[u32],
    levels: &[String],
    design: &DesignMatrix,
    weights: &[f64],
    cfg: &FitConfig,
    opts: &MulticlassOptions,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let k = levels.len();
    if k < 2 {
        return Err(Error::validation("multiclass model needs at least 2 classes"));
    }
    let n = y.len();
    let x = design.matrix();
    let p = x.cols();
    if x.rows() != n || weights.len() != n {
        return Err(Error::validation("design, weights and response differ in length"));
    }
    if let Some(i) = y.iter().position(|&c| c as usize >= k) {
        return Err(Error::validation(format!("row {i}: class {} outside 0..{k}", y[i])));
    }
    let concentration = opts.concentration.unwrap_or(1.0 / k as f64);
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::validation("Dirichlet concentration must be positive"));
    }
    let fixed_rates = match (&opts.fix_reporting, cfg.fix_rates) {
        (Some(r), _) => {
            if r.num_classes() != k {
                return Err(Error::validation("fixed reporting matrix has the wrong size"));
            }
            Some(r.clone())
        }
        (None, Some((se, sp))) if k == 2 => Some(ReportingRateMatrix::from_error_rates(se, sp)),
        (None, Some(_)) => {
            return Err(Error::validation("fix_rates only applies to two classes; fix the reporting matrix instead"));
        }
        (None, None) => None,
    };
    let free = k - 1;
    if let Some(b) = &cfg.fix_beta {
        if b.len() != free * p {
            return Err(Error::validation(format!(
                "fix_beta has {} values, expected {}",
                b.len(),
                free * p
            )));
        }
    }
    let pg = cfg.sampler()?;
    let mut rng = stream(cfg.seed);

    let mut names = Vec::new();
    for level in levels {
        for c in design.column_names() {
            names.push(format!("{level}:{c}"));
        }
    }
    for truth in levels {
        for report in levels {
            names.push(format!("r[{report}|{truth}]"));
        }
    }
    let mut draws = PosteriorDraws::new(
        names,
        Provenance {
            model: "multiclass-me".into(),
            seed: cfg.seed,
            iterations: cfg.iterations,
            burn_in: cfg.burn_in,
        },
    );
    let mut observed = vec![false; k];
    y.iter().for_each(|&c| observed[c as usize] = true);
    for (c, seen) in observed.iter().enumerate() {
        if !seen {
            draws.warn(format!("class `{}` is never observed; its reporting column follows the prior", levels[c]));
        }
    }

    let mut betas = vec![vec![0.0; p]; k];
    if let Some(b) = &cfg.fix_beta {
        for c in 0..free {
            betas[c].copy_from_slice(&b[c * p..(c + 1) * p]);
        }
    }
    let mut rates = fixed_rates.clone().unwrap_or_else(|| {
        let off = 0.1 / (k - 1) as f64;
        let mut r = vec![off; k * k];
        for i in 0..k {
            r[i * k + i] = 0.9;
        }
        ReportingRateMatrix { k, r }
    });
    let mut latent = y.to_vec();
    let mut lin = vec![0.0; n * k];
    let mut eta = vec![0.0; n];
    let mut offset = vec![0.0; n];
    let mut omega = vec![0.0; n];
    let mut latent_sum = vec![0.0; n * k];
    let mut latent_draws = Vec::new();
    let mut row = Vec::with_capacity(k * p + k * k);
    let mut logs = vec![0.0; k];

    for it in 0..cfg.iterations {
        if cfg.fix_beta.is_none() {
            fill_linear(x, &betas, &mut lin, it)?;
            for c in 0..free {
                for i in 0..n {
                    let l = &lin[i * k..(i + 1) * k];
                    let others: Vec<f64> = (0..k).filter(|&j| j != c).map(|j| l[j]).collect();
                    offset[i] = ln_sum_exp(&others);
                    eta[i] = l[c] - offset[i];
                }
                gibbs::draw_omegas(&pg, weights, &eta, &mut omega, &mut rng);
                let b: Vec<f64> = (0..n)
                    .map(|i| {
                        let indicator = if latent[i] as usize == c { 0.5 } else { -0.5 };
                        weights[i] * indicator + omega[i] * offset[i]
                    })
                    .collect();
                betas[c] = gibbs::draw_coefficients(
                    x,
                    &omega,
                    x.tr_mul_vec(&b),
                    cfg.prior_variance,
                    "multinomial regression",
                    it,
                    &mut rng,
                )?;
                for i in 0..n {
                    lin[i * k + c] = dot(x.row(i), &betas[c]);
                }
            }
        }
        fill_linear(x, &betas, &mut lin, it)?;

        if fixed_rates.is_none() {
            let mut counts = vec![0.0; k * k];
            for i in 0..n {
                counts[latent[i] as usize * k + y[i] as usize] += weights[i];
            }
            for truth in 0..k {
                let col = reporting_column_update(
                    &counts[truth * k..(truth + 1) * k],
                    concentration,
                    truth,
                    opts.diagonal_dominance,
                    &mut rng,
                )?;
                rates.set_column(truth, &col);
            }
        }

        let ln_rates: Vec<f64> = rates.r.iter().map(|&v| log(v)).collect();
        for i in 0..n {
            let l = &lin[i * k..(i + 1) * k];
            let norm = ln_sum_exp(l);
            let yi = y[i] as usize;
            for c in 0..k {
                logs[c] = weights[i] * (l[c] - norm + ln_rates[yi * k + c]);
            }
            latent[i] = if logs.iter().all(|&v| v == f64::NEG_INFINITY) {
                yi as u32
            } else {
                gumbel_max(&logs, &mut rng) as u32
            };
        }

        if it >= cfg.burn_in {
            row.clear();
            for b in &betas {
                row.extend_from_slice(b);
            }
            for truth in 0..k {
                row.extend(rates.column(truth));
            }
            draws.push(&row)?;
            for (i, &c) in latent.iter().enumerate() {
                latent_sum[i * k + c as usize] += 1.0;
            }
            if cfg.keep_latent_draws {
                latent_draws.push(latent.clone());
            }
        }
    }
    let kept = cfg.retained() as f64;
    draws.set_latent_means(latent_sum.into_iter().map(|s| s / kept).collect(), k);
    if cfg.keep_latent_draws {
        draws.set_latent_draws(latent_draws);
    }
    Ok(draws)
}

fn fill_linear(x: &Matrix, betas: &[Vec<f64>], lin: &mut [f64], it: usize) -> Result<()> {
    let k = betas.len();
    for i in 0..x.rows() {
        for (c, b) in betas.iter().enumerate() {
            let v = dot(x.row(i), b);
            if !v.is_finite() {
                return Err(Error::Numeric {
                    context: "multinomial regression".into(),
                    iteration: it,
                    detail: format!("non-finite linear predictor at row {i}"),
                });
            }
            lin[i * k + c] = v;
        }
    }
    Ok(())
}

/// Softmax class probabilities for one design row.
pub fn class_probabilities(x_row: &[f64], betas: &[Vec<f64>]) -> Vec<f64> {
    let l: Vec<f64> = betas.iter().map(|b| dot(x_row, b)).collect();
    normalize_logs(&l)
}
