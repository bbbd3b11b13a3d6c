//! Simulation harness: synthetic populations with misreported responses,
//! informative Poisson sampling, replicated naive-versus-mixture fits, and a
//! synthetic two-equation dataset with known truth.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::binary::{fit_binary, fit_naive, FitConfig};
use crate::covariate::TwoEquationData;
use crate::data::{scale_weights, Column, DesignMatrix, Formula, SurveyDataset};
use crate::draws::{quantile_sorted, PosteriorDraws};
use crate::linalg::{dot, Matrix};
use crate::math::{exp, fabs, logistic};
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

pub const MIXTURE: &str = "mixture";
pub const NAIVE: &str = "naive";

/// Truth and design of a replication study.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub size: usize,
    pub beta_true: Vec<f64>,
    pub sens_true: f64,
    pub spec_true: f64,
    /// Exponent `a` of the size variable `exp{a (z - Ỹ)}`.
    pub informativeness: f64,
    pub expected_sample_size: f64,
    pub replicates: usize,
    /// Draw one population and resample it in every replicate.
    pub fix_population: bool,
}

impl PopulationSpec {
    /// Full-size study: N = 100,000, E[n] = 1,000, 100 replicates.
    pub fn full() -> Self {
        PopulationSpec {
            size: 100_000,
            beta_true: vec![0.7, -2.0, 0.5, -0.3],
            sens_true: 0.9,
            spec_true: 0.75,
            informativeness: 0.1,
            expected_sample_size: 1000.0,
            replicates: 100,
            fix_population: false,
        }
    }

    /// Desk-scale study: N = 20,000, E[n] = 800, 30 replicates.
    pub fn reduced() -> Self {
        PopulationSpec {
            size: 20_000,
            expected_sample_size: 800.0,
            replicates: 30,
            ..PopulationSpec::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.beta_true.is_empty() {
            return Err(Error::validation("population size and beta_true must be non-empty"));
        }
        for (name, v) in [("sens_true", self.sens_true), ("spec_true", self.spec_true)] {
            if !(v > 0.5 && v <= 1.0) {
                return Err(Error::validation(format!("{name} = {v} outside (0.5, 1]")));
            }
        }
        if !(self.expected_sample_size > 0.0 && self.expected_sample_size < self.size as f64) {
            return Err(Error::validation(format!(
                "expected_sample_size {} must lie in (0, {})",
                self.expected_sample_size, self.size
            )));
        }
        if !self.informativeness.is_finite() {
            return Err(Error::validation("informativeness must be finite"));
        }
        Ok(())
    }

    pub fn coefficient_names(&self) -> Vec<String> {
        (1..=self.beta_true.len()).map(|j| format!("x{j}")).collect()
    }
}

/// Synthetic population: covariates, true and reported responses, and the
/// sampling noise `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub x: Matrix,
    pub z: Vec<f64>,
    pub truth: Vec<u8>,
    pub observed: Vec<u8>,
}

/// Flips ones with probability `1 - sens` and zeros with probability `1 - spec`.
pub fn inject_misreports<R: Rng + ?Sized>(truth: &[u8], sens: f64, spec: f64, rng: &mut R) -> Vec<u8> {
    truth
        .iter()
        .map(|&t| {
            let u: f64 = rng.random();
            if t == 1 {
                u8::from(u < sens)
            } else {
                u8::from(u >= spec)
            }
        })
        .collect()
}

/// Standard-normal covariates (no intercept), `Ỹ ~ Bernoulli(logit⁻¹(xβ))`,
/// misreported reports `Y`, and `z ~ N(0, 1)`.
pub fn generate_population<R: Rng + ?Sized>(spec: &PopulationSpec, rng: &mut R) -> Result<Population> {
    spec.validate()?;
    let p = spec.beta_true.len();
    let n = spec.size;
    let data: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
    let x = Matrix::from_row_major(n, p, data)?;
    let truth: Vec<u8> = (0..n)
        .map(|i| {
            let u: f64 = rng.random();
            u8::from(u < logistic(dot(x.row(i), &spec.beta_true)))
        })
        .collect();
    let observed = inject_misreports(&truth, spec.sens_true, spec.spec_true, rng);
    let z = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Ok(Population { x, z, truth, observed })
}

/// `π_i = min(1, c s_i)` with `c` found by bisection so that `Σ π_i = target`.
pub fn inclusion_probabilities(sizes: &[f64], target: f64) -> Result<Vec<f64>> {
    let n = sizes.len() as f64;
    if !(target > 0.0) || target > n {
        return Err(Error::validation(format!(
            "expected sample size {target} infeasible for a population of {n}"
        )));
    }
    if let Some(i) = sizes.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::validation(format!("size variable at {i} is not positive")));
    }
    let total = |c: f64| sizes.iter().map(|&s| (c * s).min(1.0)).sum::<f64>();
    let smin = sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, 1.0 / smin);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let t = total(mid);
        if fabs(t - target) <= 1e-9 * target {
            lo = mid;
            hi = mid;
            break;
        }
        if t < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok(sizes.iter().map(|&s| (c * s).min(1.0)).collect())
}

/// A Poisson sample drawn from a population.
#[derive(Debug, Clone, PartialEq)]
pub struct InformativeSample {
    /// Population row of every sampled unit.
    pub rows: Vec<usize>,
    pub inclusion: Vec<f64>,
    pub dataset: SurveyDataset,
    pub design: DesignMatrix,
    pub truth: Vec<u8>,
}

/// Poisson sampling with `s_i = exp{a (z_i - Ỹ_i)}` and weights `1/π_i`.
pub fn draw_informative_sample<R: Rng + ?Sized>(
    population: &Population,
    spec: &PopulationSpec,
    rng: &mut R,
) -> Result<InformativeSample> {
    let sizes: Vec<f64> = population
        .z
        .iter()
        .zip(&population.truth)
        .map(|(&z, &t)| exp(spec.informativeness * (z - f64::from(t))))
        .collect();
    let pi = inclusion_probabilities(&sizes, spec.expected_sample_size)?;
    let rows: Vec<usize> = (0..pi.len())
        .filter(|&i| {
            let u: f64 = rng.random();
            u < pi[i]
        })
        .collect();
    let inclusion: Vec<f64> = rows.iter().map(|&i| pi[i]).collect();
    let names = spec.coefficient_names();
    let mut dataset = SurveyDataset::binary(
        rows.iter().map(|&i| population.observed[i]).collect(),
        inclusion.iter().map(|&p| 1.0 / p).collect(),
    )?;
    let p = population.x.cols();
    let mut data = Vec::with_capacity(rows.len() * p);
    for &i in &rows {
        data.extend_from_slice(population.x.row(i));
    }
    let x = Matrix::from_row_major(rows.len(), p, data)?;
    for (j, name) in names.iter().enumerate() {
        dataset = dataset.with_column(name.clone(), Column::Real(x.column(j)))?;
    }
    Ok(InformativeSample {
        truth: rows.iter().map(|&i| population.truth[i]).collect(),
        rows,
        inclusion,
        dataset,
        design: DesignMatrix::new(x, names)?,
    })
}

/// Posterior means of one replicate under both models.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replicate: u64,
    pub realized_n: usize,
    pub data_seed: u64,
    pub mixture_seed: u64,
    pub naive_seed: u64,
    pub coefficients: Vec<String>,
    pub mixture_means: Vec<f64>,
    pub naive_means: Vec<f64>,
}

/// One line of the long-format replication table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub replicate: u64,
    pub model: &'static str,
    pub coefficient: String,
    pub posterior_mean: f64,
    pub realized_n: usize,
    pub seed: u64,
}

impl ReplicationResult {
    /// Mixture rows first, then naive rows, coefficients in order.
    pub fn records(&self) -> Vec<ReplicationRecord> {
        let mut out = Vec::new();
        for (model, means, seed) in [
            (MIXTURE, &self.mixture_means, self.mixture_seed),
            (NAIVE, &self.naive_means, self.naive_seed),
        ] {
            for (c, &m) in self.coefficients.iter().zip(means) {
                out.push(ReplicationRecord {
                    replicate: self.replicate,
                    model,
                    coefficient: c.clone(),
                    posterior_mean: m,
                    realized_n: self.realized_n,
                    seed,
                });
            }
        }
        out
    }
}

fn coefficient_means(draws: &PosteriorDraws, names: &[String]) -> Result<Vec<f64>> {
    names
        .iter()
        .map(|n| {
            let col = draws
                .column(n)
                .ok_or_else(|| Error::validation(format!("draws lack `{n}`")))?;
            Ok(col.iter().sum::<f64>() / col.len() as f64)
        })
        .collect()
}

/// Draws the fixed population of a study (used when `fix_population` is set).
pub fn study_population(spec: &PopulationSpec, master_seed: u64) -> Result<Population> {
    generate_population(spec, &mut stream(derive_seed(master_seed, u64::MAX, 0)))
}

/// Generates (or resamples) data for replicate `replicate` and fits both
/// models. Seeds derive from `(master_seed, replicate)` only.
pub fn run_replicate(
    spec: &PopulationSpec,
    cfg: &FitConfig,
    master_seed: u64,
    replicate: u64,
    fixed_population: Option<&Population>,
) -> Result<ReplicationResult> {
    let data_seed = derive_seed(master_seed, replicate, 0);
    let mut rng = stream(data_seed);
    let owned;
    let population = match fixed_population {
        Some(p) => p,
        None => {
            owned = generate_population(spec, &mut rng)?;
            &owned
        }
    };
    let sample = draw_informative_sample(population, spec, &mut rng)?;
    let weights = scale_weights(sample.dataset.raw_weight())?;
    let y = sample.dataset.binary_response()?;
    let names = spec.coefficient_names();
    let mixture_seed = derive_seed(master_seed, replicate, 1);
    let naive_seed = derive_seed(master_seed, replicate, 2);
    let mixture = fit_binary(
        &y,
        &sample.design,
        weights.values(),
        &FitConfig {
            seed: mixture_seed,
            ..cfg.clone()
        },
    )?;
    let naive = fit_naive(
        &y,
        &sample.design,
        weights.values(),
        &FitConfig {
            seed: naive_seed,
            ..cfg.clone()
        },
    )?;
    Ok(ReplicationResult {
        replicate,
        realized_n: y.len(),
        data_seed,
        mixture_seed,
        naive_seed,
        mixture_means: coefficient_means(&mixture, &names)?,
        naive_means: coefficient_means(&naive, &names)?,
        coefficients: names,
    })
}

/// Median and interquartile range of posterior means for one
/// (coefficient, model) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySummaryRow {
    pub coefficient: String,
    pub model: &'static str,
    pub truth: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub replicates: usize,
}

impl StudySummaryRow {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    pub fn bias(&self) -> f64 {
        self.median - self.truth
    }
}

/// Outcome of a replication study. Failed replicates are recorded and skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStudy {
    pub results: Vec<ReplicationResult>,
    pub failures: Vec<(u64, String)>,
    pub summary: Vec<StudySummaryRow>,
}

/// Per-(coefficient, model) median and IQR, coefficients in order, mixture first.
pub fn summarize_replications(spec: &PopulationSpec, results: &[ReplicationResult]) -> Vec<StudySummaryRow> {
    let names = spec.coefficient_names();
    let mut out = Vec::new();
    if results.is_empty() {
        return out;
    }
    for (j, name) in names.iter().enumerate() {
        for model in [MIXTURE, NAIVE] {
            let mut v: Vec<f64> = results
                .iter()
                .map(|r| if model == MIXTURE { r.mixture_means[j] } else { r.naive_means[j] })
                .collect();
            v.sort_by(f64::total_cmp);
            out.push(StudySummaryRow {
                coefficient: name.clone(),
                model,
                truth: spec.beta_true[j],
                median: quantile_sorted(&v, 0.5),
                q1: quantile_sorted(&v, 0.25),
                q3: quantile_sorted(&v, 0.75),
                replicates: v.len(),
            });
        }
    }
    out
}

/// Collects replicate outcomes (in any order) into a study sorted by replicate id.
pub fn collect_study(spec: &PopulationSpec, outcomes: Vec<(u64, Result<ReplicationResult>)>) -> ReplicationStudy {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in outcomes {
        match r {
            Ok(r) => results.push(r),
            Err(e) => failures.push((id, e.to_string())),
        }
    }
    results.sort_by_key(|r| r.replicate);
    failures.sort_by_key(|f| f.0);
    let summary = summarize_replications(spec, &results);
    ReplicationStudy {
        results,
        failures,
        summary,
    }
}

/// Runs every replicate sequentially.
pub fn run_replication_study(spec: &PopulationSpec, cfg: &FitConfig, master_seed: u64) -> Result<ReplicationStudy> {
    spec.validate()?;
    cfg.validate()?;
    let fixed = if spec.fix_population {
        Some(study_population(spec, master_seed)?)
    } else {
        None
    };
    let outcomes = (0..spec.replicates as u64)
        .map(|r| (r, run_replicate(spec, cfg, master_seed, r, fixed.as_ref())))
        .collect();
    Ok(collect_study(spec, outcomes))
}

/// Truth of a synthetic two-equation dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SippTruth {
    /// Outcome coefficients on `(Intercept)`, `age`, `female`.
    pub beta_controls: Vec<f64>,
    pub beta_c: f64,
    /// Citizenship coefficients on the projected `years_in_us`,
    /// `englishyes`, `income_ratio`.
    pub beta2: Vec<f64>,
    pub sens: f64,
    pub spec: f64,
    /// Expected `|S|`.
    pub sample_size: usize,
    /// Expected `|S_f|`.
    pub subset_size: usize,
    pub informativeness: f64,
}

impl Default for SippTruth {
    fn default() -> Self {
        SippTruth {
            beta_controls: vec![0.2, 0.5, 0.3],
            beta_c: 1.15,
            beta2: vec![1.5, 1.5, 1.0],
            sens: 0.999,
            spec: 0.932,
            sample_size: 8000,
            subset_size: 1500,
            informativeness: 0.1,
        }
    }
}

/// Synthetic survey with a misreported binary covariate and known truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SippLikeData {
    pub dataset: SurveyDataset,
    pub controls: Formula,
    pub citizenship_terms: Formula,
    pub data: TwoEquationData,
    pub latent_citizenship: Vec<u8>,
    pub truth: SippTruth,
}

pub const CITIZEN: &str = "citizen";
pub const FOREIGN_BORN: &str = "foreign_born";

/// Builds a population ten times the sample size, draws true citizenship
/// from the citizenship equation on covariates projected off
/// `[1, foreign-born]`, injects misreports, draws the outcome from the true
/// citizenship, and takes an informative Poisson sample.
pub fn generate_sipp_like_data<R: Rng + ?Sized>(truth: &SippTruth, rng: &mut R) -> Result<SippLikeData> {
    if truth.sample_size == 0 || truth.subset_size == 0 || truth.subset_size > truth.sample_size {
        return Err(Error::validation("need 0 < subset size <= sample size"));
    }
    if truth.beta_controls.len() != 3 || truth.beta2.len() != 3 {
        return Err(Error::validation("beta_controls and beta2 need 3 values each"));
    }
    let big_n = 10 * truth.sample_size;
    let fb_share = truth.subset_size as f64 / truth.sample_size as f64;
    let fb: Vec<bool> = (0..big_n).map(|_| rng.random::<f64>() < fb_share).collect();
    let normal = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
    let age: Vec<i64> = (0..big_n)
        .map(|_| (40.0 + 12.0 * normal(rng)).round().clamp(18.0, 85.0) as i64)
        .collect();
    let female: Vec<i64> = (0..big_n).map(|_| i64::from(rng.random::<f64>() < 0.5)).collect();
    // Right-skewed residence time, longer for the native born.
    let years: Vec<f64> = fb
        .iter()
        .map(|&f| {
            let e: f64 = Exp1.sample(rng);
            if f {
                e
            } else {
                2.0 + e
            }
        })
        .collect();
    let english: Vec<usize> = fb
        .iter()
        .map(|&f| usize::from(rng.random::<f64>() < if f { 0.6 } else { 0.95 }))
        .collect();
    let income: Vec<f64> = (0..big_n).map(|_| exp(0.5 * normal(rng))).collect();

    let x2_star = Matrix::from_columns(&[
        years.clone(),
        english.iter().map(|&e| e as f64).collect::<Vec<_>>(),
        income.clone(),
    ])?;
    let basis = crate::linalg::orthonormal_basis(&crate::data::subset_basis(&fb))?;
    let mut x2 = x2_star.clone();
    for j in 0..3 {
        let mut c = x2.column(j);
        crate::linalg::project_out(&basis, &mut c);
        x2.set_column(j, &c);
    }
    let latent: Vec<u8> = (0..big_n)
        .map(|i| u8::from(rng.random::<f64>() < logistic(dot(x2.row(i), &truth.beta2))))
        .collect();
    let observed = inject_misreports(&latent, truth.sens, truth.spec, rng);
    let age_std = |a: i64| (a as f64 - 40.0) / 12.0;
    let y: Vec<u8> = (0..big_n)
        .map(|i| {
            let b = &truth.beta_controls;
            let eta = b[0] + b[1] * age_std(age[i]) + b[2] * female[i] as f64 + truth.beta_c * f64::from(latent[i]);
            u8::from(rng.random::<f64>() < logistic(eta))
        })
        .collect();
    let sizes: Vec<f64> = (0..big_n)
        .map(|i| {
            let z: f64 = normal(rng);
            exp(truth.informativeness * (z - f64::from(latent[i])))
        })
        .collect();
    let pi = inclusion_probabilities(&sizes, truth.sample_size as f64)?;
    let rows: Vec<usize> = (0..big_n).filter(|&i| rng.random::<f64>() < pi[i]).collect();

    let pick_f = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let pick_i = |v: &[i64]| rows.iter().map(|&i| v[i]).collect::<Vec<i64>>();
    let levels = |a: &str, b: &str| vec![a.to_string(), b.to_string()];
    let dataset = SurveyDataset::binary(
        rows.iter().map(|&i| y[i]).collect(),
        rows.iter().map(|&i| 1.0 / pi[i]).collect(),
    )?
    .with_column("age_std", Column::Real(pick_i(&age).into_iter().map(age_std).collect()))?
    .with_column("female", Column::Integer(pick_i(&female)))?
    .with_column(
        CITIZEN,
        Column::Integer(rows.iter().map(|&i| i64::from(observed[i])).collect()),
    )?
    .with_column("years_in_us", Column::Real(pick_f(&years)))?
    .with_column(
        "english",
        Column::Categorical {
            levels: levels("no", "yes"),
            codes: rows.iter().map(|&i| english[i]).collect(),
        },
    )?
    .with_column("income_ratio", Column::Real(pick_f(&income)))?
    .with_column(
        FOREIGN_BORN,
        Column::Integer(rows.iter().map(|&i| i64::from(fb[i])).collect()),
    )?
    .with_subset(rows.iter().map(|&i| fb[i]).collect())?;
    let controls = Formula::new(["age_std", "female"]);
    let citizenship_terms = Formula::new(["years_in_us", "english", "income_ratio"]).without_intercept();
    let data = TwoEquationData::from_dataset(&dataset, &controls, CITIZEN, &citizenship_terms, false)?;
    Ok(SippLikeData {
        dataset,
        controls,
        citizenship_terms,
        data,
        latent_citizenship: rows.iter().map(|&i| latent[i]).collect(),
        truth: truth.clone(),
    })
}
