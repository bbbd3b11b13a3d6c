//! The `fit`, `simulate` and `predict` subcommands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use misreport_core::binary::{fit_binary, fit_naive};
use misreport_core::covariate::{
    fit_naive_covariate, gibbs_fit_covariate_me, predict_insurance_probability, CovariateOptions, TwoEquationData,
};
use misreport_core::data::{build_design_matrix, modal_profile, scale_weights, Formula, SurveyDataset};
use misreport_core::draws::{summarize_draws, PosteriorDraws};
use misreport_core::multiclass::fit_multiclass;
use misreport_core::rng::derive_seed;
use misreport_core::sim::{collect_study, run_replicate, study_population, ReplicationStudy};
use misreport_core::{Error as CoreError, FitConfig};

use crate::config::{FitSection, ModelChoice, RunConfig};
use crate::csvio::{self, fmt_f64, CsvOut};
use crate::error::{CliError, CliResult};
use crate::figures::{emit_figure_data, FigureInput, FigureKind};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub out: Option<PathBuf>,
    pub round: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut FitConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(i) = self.iterations {
            cfg.iterations = i;
        }
        if let Some(b) = self.burn_in {
            cfg.burn_in = b;
        }
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(s) = self.seed {
            parts.push(format!("--seed {s}"));
        }
        if let Some(i) = self.iterations {
            parts.push(format!("--iters {i}"));
        }
        if let Some(b) = self.burn_in {
            parts.push(format!("--burnin {b}"));
        }
        if let Some(r) = self.round {
            parts.push(format!("--round {r}"));
        }
        parts.join(" ")
    }
}

fn output_dir(cfg: &RunConfig, section_out: Option<&Path>, ov: &Overrides, sub: &str) -> CliResult<PathBuf> {
    let dir = match (&ov.out, section_out) {
        (Some(o), _) => o.clone(),
        (None, Some(p)) => cfg.resolve(p),
        (None, None) => cfg.base_dir.join("out").join(sub),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Copies the config into the output directory, noting any overrides.
fn copy_config(cfg: &RunConfig, dir: &Path, ov: &Overrides) -> CliResult<()> {
    let path = dir.join("config.toml");
    let mut text = String::new();
    let extra = ov.describe();
    if !extra.is_empty() {
        text.push_str(&format!("# command-line overrides: {extra}\n"));
    }
    text.push_str(&cfg.source);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn run_chains<F>(chains: usize, seed: u64, stream: u64, fit: F) -> CliResult<Vec<PosteriorDraws>>
where
    F: Fn(u64) -> misreport_core::Result<PosteriorDraws> + Sync,
{
    let out: Vec<misreport_core::Result<PosteriorDraws>> = (0..chains as u64)
        .into_par_iter()
        .map(|c| fit(derive_seed(seed, stream, c)))
        .collect();
    out.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

fn pooled(chains: &[PosteriorDraws]) -> CliResult<PosteriorDraws> {
    let mut all = chains[0].clone();
    for c in &chains[1..] {
        all.append(c)?;
    }
    Ok(all)
}

fn formula(fit: &FitSection) -> Formula {
    let f = Formula::new(fit.covariates.iter().map(|c| c.name.clone()));
    if fit.intercept {
        f
    } else {
        f.without_intercept()
    }
}

fn write_fit_outputs(dir: &Path, chains: &[PosteriorDraws], labels: &[String], round: Option<usize>) -> CliResult<()> {
    let all = pooled(chains)?;
    csvio::write_summary(&dir.join("summary.csv"), &summarize_draws(&all)?, round)?;
    csvio::write_draws(&dir.join("draws.csv"), chains)?;
    csvio::write_trace(&dir.join("trace.csv"), chains)?;
    csvio::write_diagnostics(&dir.join("diagnostics.csv"), chains)?;
    csvio::write_latent(&dir.join("latent.csv"), chains, labels)?;
    for w in chains.iter().flat_map(|c| c.warnings()) {
        eprintln!("warning: {w}");
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig, ov: &Overrides) -> CliResult<PathBuf> {
    let fit = cfg
        .fit
        .as_ref()
        .ok_or_else(|| CliError::validation("config has no [fit] section"))?;
    fit.validate()?;
    let mut fc = fit.sampler.fit_config();
    ov.apply(&mut fc);
    fc.validate()?;
    let dataset = csvio::load_dataset(fit, &cfg.resolve(&fit.data))?;
    let dir = output_dir(cfg, fit.out.as_deref(), ov, "fit")?;
    copy_config(cfg, &dir, ov)?;
    let seed = fc.seed;
    let with_seed = |s: u64| FitConfig {
        seed: s,
        ..fc.clone()
    };
    match fit.model {
        ModelChoice::Naive | ModelChoice::BinaryMe => {
            let design = build_design_matrix(&dataset, &formula(fit))?;
            let weights = scale_weights(dataset.raw_weight())?;
            let y = dataset.binary_response()?;
            let naive = fit.model == ModelChoice::Naive;
            let chains = run_chains(fit.chains, seed, 0, |s| {
                if naive {
                    fit_naive(&y, &design, weights.values(), &with_seed(s))
                } else {
                    fit_binary(&y, &design, weights.values(), &with_seed(s))
                }
            })?;
            write_fit_outputs(&dir, &chains, &[], ov.round)?;
        }
        ModelChoice::MulticlassMe => {
            let design = build_design_matrix(&dataset, &formula(fit))?;
            let weights = scale_weights(dataset.raw_weight())?;
            let opts = fit.multiclass_options()?;
            let levels = dataset.response_levels().to_vec();
            let chains = run_chains(fit.chains, seed, 0, |s| {
                fit_multiclass(dataset.response(), &levels, &design, weights.values(), &with_seed(s), &opts)
            })?;
            write_fit_outputs(&dir, &chains, &levels, ov.round)?;
        }
        ModelChoice::CovariateMe => fit_covariate(fit, &dataset, &fc, &dir, ov)?,
    }
    Ok(dir)
}

fn fit_covariate(fit: &FitSection, dataset: &SurveyDataset, fc: &FitConfig, dir: &Path, ov: &Overrides) -> CliResult<()> {
    let error_prone = fit.error_prone.as_deref().expect("validated");
    let controls = formula(fit);
    let x2_terms = Formula::new(fit.error_prone_covariates.iter().map(|c| c.name.clone())).without_intercept();
    let data = TwoEquationData::from_dataset(dataset, &controls, error_prone, &x2_terms, fit.rescale_subset_weights)?;
    let opts = CovariateOptions {
        strict_step7: fit.strict_step7,
        fix_beta2: None,
    };
    let with_seed = |s: u64| FitConfig {
        seed: s,
        ..fc.clone()
    };
    let chains = run_chains(fit.chains, fc.seed, 0, |s| gibbs_fit_covariate_me(&data, &with_seed(s), &opts))?;
    let naive_fc = FitConfig {
        fix_beta: None,
        ..fc.clone()
    };
    let naive = run_chains(fit.chains, fc.seed, 1, |s| {
        fit_naive_covariate(
            &data,
            &FitConfig {
                seed: s,
                ..naive_fc.clone()
            },
        )
    })?;
    write_fit_outputs(dir, &chains, &[], ov.round)?;
    let naive_all = pooled(&naive)?;
    let mixture_all = pooled(&chains)?;
    csvio::write_summary(&dir.join("summary_naive.csv"), &summarize_draws(&naive_all)?, ov.round)?;
    emit_figure_data(
        &dir.join("coefficient_density.csv"),
        FigureKind::CoefficientDensity,
        FigureInput::Draws {
            models: &[("naive", &naive_all), ("mixture", &mixture_all)],
            coefficient: error_prone,
        },
    )?;
    let subset = dataset.select_rows(&dataset.subset_indices())?;
    let profile = modal_profile(&subset, &controls)?;
    csvio::write_profile(&dir.join("profile.csv"), &profile)?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig, ov: &Overrides) -> CliResult<PathBuf> {
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::validation("config has no [simulate] section"))?;
    let spec = sim.population_spec();
    spec.validate()?;
    let mut fc = sim.sampler.fit_config();
    ov.apply(&mut fc);
    fc.validate()?;
    let dir = output_dir(cfg, sim.out.as_deref(), ov, "simulate")?;
    copy_config(cfg, &dir, ov)?;
    let master = fc.seed;
    let fixed = if spec.fix_population {
        Some(study_population(&spec, master)?)
    } else {
        None
    };
    let outcomes: Vec<_> = (0..spec.replicates as u64)
        .into_par_iter()
        .map(|r| (r, run_replicate(&spec, &fc, master, r, fixed.as_ref())))
        .collect();
    let study = collect_study(&spec, outcomes);
    write_study(&dir, &study, &spec.beta_true, ov.round)?;
    for (r, e) in &study.failures {
        eprintln!("warning: replicate {r} failed: {e}");
    }
    if study.results.is_empty() && !study.failures.is_empty() {
        return Err(CoreError::Numeric {
            context: "simulation".into(),
            iteration: 0,
            detail: "every replicate failed".into(),
        }
        .into());
    }
    Ok(dir)
}

fn write_study(dir: &Path, study: &ReplicationStudy, truth: &[f64], round: Option<usize>) -> CliResult<()> {
    let mut out = CsvOut::create(
        &dir.join("replications.csv"),
        &["replicate", "model", "coefficient", "posterior_mean", "realized_n", "seed"],
    )?;
    for r in &study.results {
        for rec in r.records() {
            out.record([
                rec.replicate.to_string(),
                rec.model.to_string(),
                rec.coefficient,
                fmt_f64(rec.posterior_mean),
                rec.realized_n.to_string(),
                rec.seed.to_string(),
            ])?;
        }
    }
    out.finish()?;
    emit_figure_data(
        &dir.join("boxplot.csv"),
        FigureKind::Boxplot,
        FigureInput::Replications {
            results: &study.results,
            truth,
        },
    )?;
    let mut out = CsvOut::create(
        &dir.join("simulation_summary.csv"),
        &["coefficient", "model", "truth", "median", "q1", "q3", "iqr", "bias", "replicates"],
    )?;
    for s in &study.summary {
        out.record([
            s.coefficient.clone(),
            s.model.to_string(),
            csvio::fmt_round(s.truth, round),
            csvio::fmt_round(s.median, round),
            csvio::fmt_round(s.q1, round),
            csvio::fmt_round(s.q3, round),
            csvio::fmt_round(s.iqr(), round),
            csvio::fmt_round(s.bias(), round),
            s.replicates.to_string(),
        ])?;
    }
    out.finish()?;
    let mut out = CsvOut::create(&dir.join("failures.csv"), &["replicate", "error"])?;
    for (r, e) in &study.failures {
        out.record([r.to_string(), e.clone()])?;
    }
    out.finish()
}

pub fn predict(cfg: &RunConfig, ov: &Overrides) -> CliResult<PathBuf> {
    let pred = cfg
        .predict
        .as_ref()
        .ok_or_else(|| CliError::validation("config has no [predict] section"))?;
    let draws_path = cfg.resolve(&pred.draws);
    let draws = csvio::read_draws(&draws_path)?;
    let profile_path = match &pred.profile {
        Some(p) => cfg.resolve(p),
        None => draws_path.with_file_name("profile.csv"),
    };
    let mut profile = csvio::read_profile(&profile_path)?;
    for (k, v) in &pred.set {
        profile.insert(k.clone(), *v);
    }
    let citizen = predict_insurance_probability(&draws, &profile, &pred.citizenship, 1)?;
    let noncitizen = predict_insurance_probability(&draws, &profile, &pred.citizenship, 0)?;
    let diff: Vec<f64> = citizen.iter().zip(&noncitizen).map(|(a, b)| a - b).collect();
    let dir = output_dir(cfg, pred.out.as_deref(), ov, "predict")?;
    copy_config(cfg, &dir, ov)?;
    for (name, p) in [("probability_citizen.csv", &citizen), ("probability_noncitizen.csv", &noncitizen)] {
        emit_figure_data(
            &dir.join(name),
            FigureKind::ProbabilityDensity,
            FigureInput::Probabilities {
                probability: p,
                difference: &diff,
            },
        )?;
    }
    let positive = diff.iter().filter(|&&d| d > 0.0).count();
    println!(
        "{positive} of {} draws have a higher probability at {} = 1",
        diff.len(),
        pred.citizenship
    );
    Ok(dir)
}
