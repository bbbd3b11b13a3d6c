//! TOML run configuration with one section per subcommand. Relative paths
//! are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use misreport_core::multiclass::{MulticlassOptions, ReportingRateMatrix};
use misreport_core::sim::PopulationSpec;
use misreport_core::FitConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub fit: Option<FitSection>,
    pub simulate: Option<SimulateSection>,
    pub predict: Option<PredictSection>,
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Naive,
    BinaryMe,
    MulticlassMe,
    CovariateMe,
}

impl ModelChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelChoice::Naive => "naive",
            ModelChoice::BinaryMe => "binary-me",
            ModelChoice::MulticlassMe => "multiclass-me",
            ModelChoice::CovariateMe => "covariate-me",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Categorical,
    Integer,
    Real,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnType,
    /// Declared level order for categorical columns; the first is the
    /// reference. Defaults to the sorted distinct values.
    pub levels: Option<Vec<String>>,
}

/// Sampler settings shared by `fit` and `simulate`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub prior_variance: f64,
    pub alpha_e: f64,
    pub beta_e: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
    pub seed: u64,
    pub fix_rates: Option<(f64, f64)>,
    pub fix_beta: Option<Vec<f64>>,
    pub keep_latent_draws: bool,
    pub pg_truncation: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = FitConfig::default();
        SamplerSection {
            iterations: d.iterations,
            burn_in: d.burn_in,
            prior_variance: d.prior_variance,
            alpha_e: d.alpha_e,
            beta_e: d.beta_e,
            alpha_p: d.alpha_p,
            beta_p: d.beta_p,
            seed: d.seed,
            fix_rates: None,
            fix_beta: None,
            keep_latent_draws: false,
            pg_truncation: d.pg_truncation,
        }
    }
}

impl SamplerSection {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            prior_variance: self.prior_variance,
            alpha_e: self.alpha_e,
            beta_e: self.beta_e,
            alpha_p: self.alpha_p,
            beta_p: self.beta_p,
            seed: self.seed,
            fix_rates: self.fix_rates,
            fix_beta: self.fix_beta.clone(),
            keep_latent_draws: self.keep_latent_draws,
            pg_truncation: self.pg_truncation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FitSection {
    pub data: PathBuf,
    pub model: ModelChoice,
    pub response: String,
    /// Declared response categories; `["0", "1"]` for binary models.
    pub response_levels: Option<Vec<String>>,
    pub weight: String,
    /// Applied to every raw weight before scaling (e.g. to aggregate panels).
    #[serde(default = "one")]
    pub weight_multiplier: f64,
    #[serde(default)]
    pub covariates: Vec<ColumnSpec>,
    #[serde(default = "yes")]
    pub intercept: bool,
    /// covariate-me: 0/1 column flagging the outcome subset.
    pub subset: Option<String>,
    /// covariate-me: the misreported binary covariate.
    pub error_prone: Option<String>,
    /// covariate-me: terms of the error-prone covariate's own equation.
    #[serde(default)]
    pub error_prone_covariates: Vec<ColumnSpec>,
    /// covariate-me: rescale weights within the subset for the outcome equation.
    #[serde(default)]
    pub rescale_subset_weights: bool,
    /// covariate-me: omit the outcome factor from the latent update.
    #[serde(default)]
    pub strict_step7: bool,
    /// multiclass-me options.
    #[serde(default = "yes")]
    pub diagonal_dominance: bool,
    pub dirichlet_concentration: Option<f64>,
    /// multiclass-me: `fix_reporting[report][truth]`.
    pub fix_reporting: Option<Vec<Vec<f64>>>,
    #[serde(default = "one_chain")]
    pub chains: usize,
    #[serde(flatten)]
    pub sampler: SamplerSection,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    pub population_size: usize,
    pub beta_true: Vec<f64>,
    pub sens_true: f64,
    pub spec_true: f64,
    pub informativeness: f64,
    pub expected_sample_size: f64,
    pub replicates: usize,
    pub fix_population: bool,
    #[serde(flatten)]
    pub sampler: SamplerSection,
    pub out: Option<PathBuf>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let p = PopulationSpec::reduced();
        SimulateSection {
            population_size: p.size,
            beta_true: p.beta_true,
            sens_true: p.sens_true,
            spec_true: p.spec_true,
            informativeness: p.informativeness,
            expected_sample_size: p.expected_sample_size,
            replicates: p.replicates,
            fix_population: p.fix_population,
            sampler: SamplerSection {
                iterations: 4000,
                burn_in: 500,
                ..SamplerSection::default()
            },
            out: None,
        }
    }
}

impl SimulateSection {
    pub fn population_spec(&self) -> PopulationSpec {
        PopulationSpec {
            size: self.population_size,
            beta_true: self.beta_true.clone(),
            sens_true: self.sens_true,
            spec_true: self.spec_true,
            informativeness: self.informativeness,
            expected_sample_size: self.expected_sample_size,
            replicates: self.replicates,
            fix_population: self.fix_population,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    /// `draws.csv` written by a covariate-me fit.
    pub draws: PathBuf,
    /// Two-column CSV (`column,value`); defaults to `profile.csv` next to the draws.
    pub profile: Option<PathBuf>,
    /// Overrides individual profile entries.
    #[serde(default)]
    pub set: BTreeMap<String, f64>,
    /// Name of the citizenship coefficient.
    pub citizenship: String,
    pub out: Option<PathBuf>,
}

const SAMPLER_KEYS: &[&str] = &[
    "iterations",
    "burn_in",
    "prior_variance",
    "alpha_e",
    "beta_e",
    "alpha_p",
    "beta_p",
    "seed",
    "fix_rates",
    "fix_beta",
    "keep_latent_draws",
    "pg_truncation",
];

const FIT_KEYS: &[&str] = &[
    "data",
    "model",
    "response",
    "response_levels",
    "weight",
    "weight_multiplier",
    "covariates",
    "intercept",
    "subset",
    "error_prone",
    "error_prone_covariates",
    "rescale_subset_weights",
    "strict_step7",
    "diagonal_dominance",
    "dirichlet_concentration",
    "fix_reporting",
    "chains",
    "out",
];

const SIMULATE_KEYS: &[&str] = &[
    "population_size",
    "beta_true",
    "sens_true",
    "spec_true",
    "informativeness",
    "expected_sample_size",
    "replicates",
    "fix_population",
    "out",
];

/// Flattened sections cannot use serde's unknown-field rejection, so
/// misspelled keys are caught here.
fn check_keys(source: &str) -> CliResult<()> {
    let table: toml::Table = toml::from_str(source).map_err(|e| CliError::validation(e.to_string()))?;
    for (section, value) in &table {
        let allowed: Vec<&str> = match section.as_str() {
            "fit" => FIT_KEYS.iter().chain(SAMPLER_KEYS).copied().collect(),
            "simulate" => SIMULATE_KEYS.iter().chain(SAMPLER_KEYS).copied().collect(),
            _ => continue,
        };
        if let Some(t) = value.as_table() {
            if let Some(k) = t.keys().find(|k| !allowed.contains(&k.as_str())) {
                return Err(CliError::validation(format!("unknown key `{section}.{k}`")));
            }
        }
    }
    Ok(())
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn one_chain() -> usize {
    1
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&source).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            source: e,
        })?;
        check_keys(&source)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.source = source;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

impl FitSection {
    pub fn multiclass_options(&self) -> CliResult<MulticlassOptions> {
        let fix_reporting = match &self.fix_reporting {
            Some(rows) => Some(ReportingRateMatrix::from_rows(rows)?),
            None => None,
        };
        Ok(MulticlassOptions {
            concentration: self.dirichlet_concentration,
            diagonal_dominance: self.diagonal_dominance,
            fix_reporting,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.chains == 0 {
            return Err(CliError::validation("fit.chains must be at least 1"));
        }
        if !(self.weight_multiplier > 0.0 && self.weight_multiplier.is_finite()) {
            return Err(CliError::validation("fit.weight_multiplier must be positive"));
        }
        if self.model == ModelChoice::CovariateMe {
            if self.subset.is_none() {
                return Err(CliError::validation("fit.subset is required for covariate-me"));
            }
            if self.error_prone.is_none() {
                return Err(CliError::validation("fit.error_prone is required for covariate-me"));
            }
            if self.error_prone_covariates.is_empty() {
                return Err(CliError::validation(
                    "fit.error_prone_covariates is required for covariate-me",
                ));
            }
        }
        Ok(())
    }
}
