//! Retained MCMC draws, posterior summaries and convergence diagnostics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::{Error, Result};

/// Settings that produced a set of draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub model: String,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
}

/// Post-burn-in draws stored row-major (one row per retained iteration).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    names: Vec<String>,
    values: Vec<f64>,
    latent_means: Vec<f64>,
    latent_width: usize,
    latent_draws: Option<Vec<Vec<u32>>>,
    provenance: Provenance,
    warnings: Vec<String>,
}

impl PosteriorDraws {
    pub fn new(names: Vec<String>, provenance: Provenance) -> Self {
        PosteriorDraws {
            names,
            values: Vec::new(),
            latent_means: Vec::new(),
            latent_width: 1,
            latent_draws: None,
            provenance,
            warnings: Vec::new(),
        }
    }

    /// Rebuilds draws from a row-major table, e.g. one read back from disk.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], provenance: Provenance) -> Result<Self> {
        let mut d = PosteriorDraws::new(names, provenance);
        for row in rows {
            d.push(row)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::validation(format!(
                "draw has {} values for {} parameters",
                row.len(),
                self.names.len()
            )));
        }
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn n_draws(&self) -> usize {
        if self.names.is_empty() {
            0
        } else {
            self.values.len() / self.names.len()
        }
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        let p = self.n_params();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_params().max(1))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column_at(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.index_of(name).map(|j| self.column_at(j))
    }

    /// Posterior mean of each latent indicator, `latent_width` values per unit
    /// (one for binary latents, K for latent classes).
    pub fn latent_means(&self) -> &[f64] {
        &self.latent_means
    }

    pub fn latent_width(&self) -> usize {
        self.latent_width
    }

    pub fn set_latent_means(&mut self, means: Vec<f64>, width: usize) {
        self.latent_means = means;
        self.latent_width = width.max(1);
    }

    pub fn latent_draws(&self) -> Option<&[Vec<u32>]> {
        self.latent_draws.as_deref()
    }

    pub fn set_latent_draws(&mut self, draws: Vec<Vec<u32>>) {
        self.latent_draws = Some(draws);
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// Appends the draws of another chain over the same parameters.
    pub fn append(&mut self, other: &PosteriorDraws) -> Result<()> {
        if other.names != self.names {
            return Err(Error::validation("cannot combine draws over different parameters"));
        }
        self.values.extend_from_slice(&other.values);
        Ok(())
    }
}

/// One line of a posterior summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummaryRow {
    pub coefficient: String,
    pub mean: f64,
    /// Posterior standard deviation.
    pub std_error: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Type-7 quantile of sorted data: linear interpolation between order
/// statistics at position `(n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = crate::math::floor(h) as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Mean and standard deviation with divisor `n - 1`.
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, sqrt(ss / (n - 1.0)))
}

pub fn summarize_values(name: &str, values: &[f64]) -> Result<PosteriorSummaryRow> {
    if values.len() < 2 {
        return Err(Error::validation(format!(
            "`{name}` has {} retained draws, at least 2 are needed",
            values.len()
        )));
    }
    let (mean, sd) = mean_sd(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(PosteriorSummaryRow {
        coefficient: name.into(),
        mean,
        std_error: sd,
        q025: quantile_sorted(&sorted, 0.025),
        q975: quantile_sorted(&sorted, 0.975),
    })
}

pub fn summarize_draws(draws: &PosteriorDraws) -> Result<Vec<PosteriorSummaryRow>> {
    if draws.n_draws() == 0 {
        return Err(Error::validation("no retained draws to summarize"));
    }
    draws
        .names()
        .iter()
        .enumerate()
        .map(|(j, name)| summarize_values(name, &draws.column_at(j)))
        .collect()
}

/// Monte-Carlo standard error of the mean by non-overlapping batch means
/// with `⌊√n⌋` batches.
pub fn batch_means_se(x: &[f64]) -> f64 {
    let n = x.len();
    let batches = (sqrt(n as f64) as usize).max(2);
    let size = n / batches;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let (_, sd) = mean_sd(&means);
    sd / sqrt(batches as f64)
}

/// Split potential scale reduction factor over one or more chains of equal
/// length. Each chain is halved, so a single chain is checked against itself.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    let mut pieces: Vec<&[f64]> = Vec::new();
    for c in chains {
        pieces.push(&c[..half]);
        pieces.push(&c[c.len() - half..]);
    }
    let m = pieces.len() as f64;
    let n = half as f64;
    let stats: Vec<(f64, f64)> = pieces
        .iter()
        .map(|p| {
            let (mu, sd) = mean_sd(p);
            (mu, sd * sd)
        })
        .collect();
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = n / (m - 1.0) * stats.iter().map(|s| (s.0 - grand) * (s.0 - grand)).sum::<f64>();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    sqrt(var_plus / w)
}
