//! CSV ingestion and emission. Numbers are written with 17 significant
//! digits so every file round-trips exactly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use misreport_core::data::{Column, SurveyDataset};
use misreport_core::draws::{PosteriorDraws, PosteriorSummaryRow, Provenance};

use crate::config::{ColumnSpec, ColumnType, FitSection, ModelChoice};
use crate::error::{CliError, CliResult};

pub const SUMMARY_HEADER: [&str; 5] = ["Coefficient", "Posterior Mean", "Standard Error", "2.5%", "97.5%"];

/// Full-precision text form of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_round(v: f64, digits: Option<usize>) -> String {
    match digits {
        Some(d) => format!("{v:.d$}"),
        None => fmt_f64(v),
    }
}

/// CSV writer that remembers its path for error messages.
pub struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<std::fs::File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> CliResult<Self> {
        let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = CsvOut {
            path: path.to_path_buf(),
            inner: csv::Writer::from_writer(file),
        };
        out.record(header)?;
        Ok(out)
    }

    pub fn record<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner
            .write_record(fields)
            .map_err(|e| CliError::io(&self.path, std::io::Error::other(e)))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Header plus string cells; empty cells are rejected with their line number.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::csv(path, e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (r, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| CliError::csv(path, e))?;
            // Line 1 is the header.
            let line = r + 2;
            let row: Vec<String> = rec.iter().map(|c| c.trim().to_string()).collect();
            if let Some(c) = row.iter().position(|c| c.is_empty()) {
                return Err(CliError::validation(format!(
                    "{}: line {line}: empty cell in column `{}` (missing values are not supported)",
                    path.display(),
                    headers[c]
                )));
            }
            rows.push(row);
        }
        Ok(Table { headers, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::validation(format!("data has no column `{name}`")))
    }

    fn cells(&self, name: &str) -> CliResult<Vec<&str>> {
        let j = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    fn parse<T: std::str::FromStr>(&self, name: &str, kind: &str) -> CliResult<Vec<T>> {
        self.cells(name)?
            .into_iter()
            .enumerate()
            .map(|(r, c)| {
                c.parse().map_err(|_| {
                    CliError::validation(format!("line {}: column `{name}` value `{c}` is not {kind}", r + 2))
                })
            })
            .collect()
    }

    pub fn reals(&self, name: &str) -> CliResult<Vec<f64>> {
        let v: Vec<f64> = self.parse(name, "a number")?;
        if let Some(r) = v.iter().position(|x| !x.is_finite()) {
            return Err(CliError::validation(format!(
                "line {}: column `{name}` value `{}` is not finite",
                r + 2,
                v[r]
            )));
        }
        Ok(v)
    }

    pub fn integers(&self, name: &str) -> CliResult<Vec<i64>> {
        self.parse(name, "an integer")
    }

    /// 0/1 or true/false.
    pub fn flags(&self, name: &str) -> CliResult<Vec<bool>> {
        self.cells(name)?
            .into_iter()
            .enumerate()
            .map(|(r, c)| match c {
                "1" | "true" | "TRUE" | "True" => Ok(true),
                "0" | "false" | "FALSE" | "False" => Ok(false),
                _ => Err(CliError::validation(format!(
                    "line {}: column `{name}` value `{c}` is not 0/1",
                    r + 2
                ))),
            })
            .collect()
    }

    pub fn column_of(&self, spec: &ColumnSpec) -> CliResult<Column> {
        Ok(match spec.kind {
            ColumnType::Integer => Column::Integer(self.integers(&spec.name)?),
            ColumnType::Real => Column::Real(self.reals(&spec.name)?),
            ColumnType::Categorical => {
                let cells = self.cells(&spec.name)?;
                let levels = spec.levels.clone().unwrap_or_else(|| sorted_distinct(&cells));
                Column::categorical(&cells, levels).map_err(|e| {
                    CliError::validation(format!("column `{}`: {e}", spec.name))
                })?
            }
        })
    }
}

fn sorted_distinct(cells: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
    v.sort();
    v.dedup();
    v
}

/// Builds the dataset of a `fit` section: response, scaled-ready raw
/// weights, every declared covariate, and the subset flag if any.
pub fn load_dataset(fit: &FitSection, path: &Path) -> CliResult<SurveyDataset> {
    let table = Table::read(path)?;
    let weights: Vec<f64> = table
        .reals(&fit.weight)?
        .into_iter()
        .map(|w| w * fit.weight_multiplier)
        .collect();
    let levels = match (&fit.response_levels, fit.model) {
        (Some(l), _) => l.clone(),
        (None, ModelChoice::MulticlassMe) => sorted_distinct(&table.cells(&fit.response)?),
        (None, _) => vec!["0".to_string(), "1".to_string()],
    };
    if fit.model != ModelChoice::MulticlassMe && levels.len() != 2 {
        return Err(CliError::validation(format!(
            "model {} needs a binary response, got {} levels",
            fit.model.as_str(),
            levels.len()
        )));
    }
    let response = table
        .cells(&fit.response)?
        .into_iter()
        .enumerate()
        .map(|(r, c)| {
            levels.iter().position(|l| l == c).map(|p| p as u32).ok_or_else(|| {
                CliError::validation(format!(
                    "line {}: response `{c}` is not one of {:?}",
                    r + 2,
                    levels
                ))
            })
        })
        .collect::<CliResult<Vec<u32>>>()?;
    let mut ds = SurveyDataset::new(response, levels, weights)?;
    let mut seen = Vec::new();
    let mut specs: Vec<&ColumnSpec> = fit.covariates.iter().chain(&fit.error_prone_covariates).collect();
    let error_prone_spec;
    if let Some(name) = &fit.error_prone {
        error_prone_spec = ColumnSpec {
            name: name.clone(),
            kind: ColumnType::Integer,
            levels: None,
        };
        specs.push(&error_prone_spec);
    }
    for spec in specs {
        if seen.contains(&spec.name) {
            continue;
        }
        seen.push(spec.name.clone());
        ds = ds.with_column(spec.name.clone(), table.column_of(spec)?)?;
    }
    if let Some(s) = &fit.subset {
        ds = ds.with_subset(table.flags(s)?)?;
    }
    Ok(ds)
}

pub fn write_summary(path: &Path, rows: &[PosteriorSummaryRow], round: Option<usize>) -> CliResult<()> {
    let mut out = CsvOut::create(path, &SUMMARY_HEADER)?;
    for r in rows {
        out.record([
            r.coefficient.clone(),
            fmt_round(r.mean, round),
            fmt_round(r.std_error, round),
            fmt_round(r.q025, round),
            fmt_round(r.q975, round),
        ])?;
    }
    out.finish()
}

pub fn read_summary(path: &Path) -> CliResult<Vec<PosteriorSummaryRow>> {
    let t = Table::read(path)?;
    if t.headers != SUMMARY_HEADER {
        return Err(CliError::validation(format!("{}: not a summary file", path.display())));
    }
    t.rows
        .iter()
        .map(|r| {
            let num = |i: usize| {
                r[i].parse::<f64>()
                    .map_err(|_| CliError::validation(format!("bad number `{}`", r[i])))
            };
            Ok(PosteriorSummaryRow {
                coefficient: r[0].clone(),
                mean: num(1)?,
                std_error: num(2)?,
                q025: num(3)?,
                q975: num(4)?,
            })
        })
        .collect()
}

/// One row per retained iteration: `chain,iteration,<parameters>`.
pub fn write_draws(path: &Path, chains: &[PosteriorDraws]) -> CliResult<()> {
    let names = chains[0].names();
    let mut header = vec!["chain", "iteration"];
    header.extend(names.iter().map(String::as_str));
    let mut out = CsvOut::create(path, &header)?;
    for (c, d) in chains.iter().enumerate() {
        let burn = d.provenance().burn_in;
        for (i, row) in d.rows().enumerate() {
            let mut rec = vec![c.to_string(), (burn + i + 1).to_string()];
            rec.extend(row.iter().map(|&v| fmt_f64(v)));
            out.record(rec)?;
        }
    }
    out.finish()
}

/// Reads draws back; chains are concatenated in file order.
pub fn read_draws(path: &Path) -> CliResult<PosteriorDraws> {
    let t = Table::read(path)?;
    let skip = usize::from(t.headers.first().map(String::as_str) == Some("chain"))
        + usize::from(t.headers.get(1).map(String::as_str) == Some("iteration"));
    let names = t.headers[skip..].to_vec();
    let rows = t
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row[skip..]
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| CliError::validation(format!("line {}: bad number `{c}`", r + 2)))
                })
                .collect::<CliResult<Vec<f64>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(PosteriorDraws::from_rows(
        names,
        &rows,
        Provenance {
            model: String::new(),
            seed: 0,
            iterations: rows.len(),
            burn_in: 0,
        },
    )?)
}

/// Long format `parameter,chain,iteration,value` for trace plots.
pub fn write_trace(path: &Path, chains: &[PosteriorDraws]) -> CliResult<()> {
    let mut out = CsvOut::create(path, &["parameter", "chain", "iteration", "value"])?;
    let names = chains[0].names();
    for (j, name) in names.iter().enumerate() {
        for (c, d) in chains.iter().enumerate() {
            let burn = d.provenance().burn_in;
            for (i, row) in d.rows().enumerate() {
                out.record([name.clone(), c.to_string(), (burn + i + 1).to_string(), fmt_f64(row[j])])?;
            }
        }
    }
    out.finish()
}

pub fn write_diagnostics(path: &Path, chains: &[PosteriorDraws]) -> CliResult<()> {
    use misreport_core::draws::{batch_means_se, split_rhat};
    let mut out = CsvOut::create(path, &["parameter", "split_rhat", "mc_se"])?;
    for (j, name) in chains[0].names().iter().enumerate() {
        let cols: Vec<Vec<f64>> = chains.iter().map(|d| d.column_at(j)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let pooled: Vec<f64> = cols.concat();
        out.record([name.clone(), fmt_f64(split_rhat(&refs)), fmt_f64(batch_means_se(&pooled))])?;
    }
    out.finish()
}

/// Posterior marginal means of the latent truth, averaged over chains.
pub fn write_latent(path: &Path, chains: &[PosteriorDraws], labels: &[String]) -> CliResult<()> {
    let width = chains[0].latent_width();
    let mut header = vec!["row".to_string()];
    if width == 1 {
        header.push("latent_mean".to_string());
    } else {
        header.extend(labels.iter().map(|l| format!("class_{l}")));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvOut::create(path, &header_refs)?;
    let n = chains[0].latent_means().len() / width;
    let m = chains.len() as f64;
    for i in 0..n {
        let mut rec = vec![(i + 1).to_string()];
        for k in 0..width {
            let v = chains.iter().map(|d| d.latent_means()[i * width + k]).sum::<f64>() / m;
            rec.push(fmt_f64(v));
        }
        out.record(rec)?;
    }
    out.finish()
}

pub fn write_profile(path: &Path, profile: &BTreeMap<String, f64>) -> CliResult<()> {
    let mut out = CsvOut::create(path, &["column", "value"])?;
    for (k, v) in profile {
        out.record([k.clone(), fmt_f64(*v)])?;
    }
    out.finish()
}

pub fn read_profile(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let t = Table::read(path)?;
    let (c, v) = (t.column("column")?, t.column("value")?);
    t.rows
        .iter()
        .map(|r| {
            let value = r[v]
                .parse::<f64>()
                .map_err(|_| CliError::validation(format!("profile value `{}` is not a number", r[v])))?;
            Ok((r[c].clone(), value))
        })
        .collect()
}
