//! Plot-ready CSV exports. Raw values only; smoothing is left to the
//! plotting tool.

use std::path::Path;
use std::str::FromStr;

use misreport_core::draws::PosteriorDraws;
use misreport_core::sim::ReplicationResult;

use crate::csvio::{fmt_f64, CsvOut};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// `model,draw`: posterior draws of one coefficient per model.
    CoefficientDensity,
    /// `coefficient,model,replicate,posterior_mean,truth`.
    Boxplot,
    /// `draw,probability,difference`.
    ProbabilityDensity,
}

impl FromStr for FigureKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coefficient-density" => Ok(FigureKind::CoefficientDensity),
            "boxplot" => Ok(FigureKind::Boxplot),
            "probability-density" => Ok(FigureKind::ProbabilityDensity),
            other => Err(CliError::validation(format!(
                "unknown figure kind `{other}` (expected coefficient-density, boxplot or probability-density)"
            ))),
        }
    }
}

/// Inputs accepted by [`emit_figure_data`].
pub enum FigureInput<'a> {
    /// `(model label, draws)` pairs and the coefficient to extract.
    Draws {
        models: &'a [(&'a str, &'a PosteriorDraws)],
        coefficient: &'a str,
    },
    Replications {
        results: &'a [ReplicationResult],
        truth: &'a [f64],
    },
    /// Per-draw probabilities and their difference from the comparison profile.
    Probabilities { probability: &'a [f64], difference: &'a [f64] },
}

pub fn emit_figure_data(path: &Path, kind: FigureKind, input: FigureInput<'_>) -> CliResult<()> {
    match (kind, input) {
        (FigureKind::CoefficientDensity, FigureInput::Draws { models, coefficient }) => {
            let mut out = CsvOut::create(path, &["model", "draw"])?;
            for (label, draws) in models {
                let col = draws.column(coefficient).ok_or_else(|| {
                    CliError::validation(format!("{label} draws have no coefficient `{coefficient}`"))
                })?;
                for v in col {
                    out.record([label.to_string(), fmt_f64(v)])?;
                }
            }
            out.finish()
        }
        (FigureKind::Boxplot, FigureInput::Replications { results, truth }) => {
            let mut out = CsvOut::create(path, &["coefficient", "model", "replicate", "posterior_mean", "truth"])?;
            let Some(first) = results.first() else {
                return out.finish();
            };
            for (j, name) in first.coefficients.iter().enumerate() {
                for model in [misreport_core::sim::MIXTURE, misreport_core::sim::NAIVE] {
                    for r in results {
                        let m = if model == misreport_core::sim::MIXTURE {
                            r.mixture_means[j]
                        } else {
                            r.naive_means[j]
                        };
                        out.record([
                            name.clone(),
                            model.to_string(),
                            r.replicate.to_string(),
                            fmt_f64(m),
                            fmt_f64(truth[j]),
                        ])?;
                    }
                }
            }
            out.finish()
        }
        (FigureKind::ProbabilityDensity, FigureInput::Probabilities { probability, difference }) => {
            let mut out = CsvOut::create(path, &["draw", "probability", "difference"])?;
            for (i, (p, d)) in probability.iter().zip(difference).enumerate() {
                out.record([(i + 1).to_string(), fmt_f64(*p), fmt_f64(*d)])?;
            }
            out.finish()
        }
        (kind, _) => Err(CliError::validation(format!("figure kind {kind:?} does not match its input"))),
    }
}
