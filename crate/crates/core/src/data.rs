//! Survey data: unit records, weight rescaling, design matrices and the
//! projection that orthogonalizes a design against subset membership.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// One covariate column.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// `codes[i]` indexes into `levels`; the first level is the reference.
    Categorical { levels: Vec<String>, codes: Vec<usize> },
    Integer(Vec<i64>),
    Real(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical { codes, .. } => codes.len(),
            Column::Integer(v) => v.len(),
            Column::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Encodes string values against a declared level order.
    pub fn categorical<S: AsRef<str>>(values: &[S], levels: Vec<String>) -> Result<Self> {
        let mut codes = Vec::with_capacity(values.len());
        for (row, v) in values.iter().enumerate() {
            let v = v.as_ref();
            let code = levels
                .iter()
                .position(|l| l == v)
                .ok_or_else(|| Error::schema(format!("row {row}: value `{v}` is not a declared level")))?;
            codes.push(code);
        }
        Ok(Column::Categorical { levels, codes })
    }

    fn numeric_value(&self, i: usize) -> Option<f64> {
        match self {
            Column::Integer(v) => Some(v[i] as f64),
            Column::Real(v) => Some(v[i]),
            Column::Categorical { .. } => None,
        }
    }

    /// Numeric view of a 0/1 column (integer, real or two-level categorical).
    pub fn as_binary(&self, name: &str) -> Result<Vec<u8>> {
        let bad = |i: usize| Error::validation(format!("column `{name}` row {i} is not binary"));
        match self {
            Column::Integer(v) => v
                .iter()
                .enumerate()
                .map(|(i, &x)| match x {
                    0 => Ok(0),
                    1 => Ok(1),
                    _ => Err(bad(i)),
                })
                .collect(),
            Column::Real(v) => v
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    if x == 0.0 {
                        Ok(0)
                    } else if x == 1.0 {
                        Ok(1)
                    } else {
                        Err(bad(i))
                    }
                })
                .collect(),
            Column::Categorical { levels, codes } => {
                if levels.len() != 2 {
                    return Err(Error::validation(format!(
                        "column `{name}` has {} levels, expected 2",
                        levels.len()
                    )));
                }
                Ok(codes.iter().map(|&c| c as u8).collect())
            }
        }
    }
}

/// Unit-level survey sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    response: Vec<u32>,
    response_levels: Vec<String>,
    columns: Vec<(String, Column)>,
    raw_weight: Vec<f64>,
    subset: Option<Vec<bool>>,
}

impl SurveyDataset {
    /// `response[i]` indexes into `response_levels`.
    pub fn new(response: Vec<u32>, response_levels: Vec<String>, raw_weight: Vec<f64>) -> Result<Self> {
        if response.len() != raw_weight.len() {
            return Err(Error::validation(format!(
                "{} responses but {} weights",
                response.len(),
                raw_weight.len()
            )));
        }
        if response_levels.is_empty() {
            return Err(Error::validation("response needs at least one declared category"));
        }
        if let Some(i) = response.iter().position(|&r| r as usize >= response_levels.len()) {
            return Err(Error::validation(format!(
                "row {i}: response code {} outside the {} declared categories",
                response[i],
                response_levels.len()
            )));
        }
        validate_weights(&raw_weight)?;
        Ok(SurveyDataset {
            response,
            response_levels,
            columns: Vec::new(),
            raw_weight,
            subset: None,
        })
    }

    /// Binary response coded 0/1.
    pub fn binary(response: Vec<u8>, raw_weight: Vec<f64>) -> Result<Self> {
        if let Some(i) = response.iter().position(|&r| r > 1) {
            return Err(Error::validation(format!("row {i}: response is not binary")));
        }
        SurveyDataset::new(
            response.into_iter().map(u32::from).collect(),
            vec!["0".to_string(), "1".to_string()],
            raw_weight,
        )
    }

    pub fn with_column(mut self, name: impl Into<String>, column: Column) -> Result<Self> {
        let name = name.into();
        if column.len() != self.n() {
            return Err(Error::validation(format!(
                "column `{name}` has {} rows, dataset has {}",
                column.len(),
                self.n()
            )));
        }
        if self.columns.iter().any(|(n, _)| *n == name) {
            return Err(Error::schema(format!("duplicate column `{name}`")));
        }
        self.columns.push((name, column));
        Ok(self)
    }

    pub fn with_subset(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.n() {
            return Err(Error::validation("subset flag length differs from sample size"));
        }
        self.subset = Some(flags);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn response(&self) -> &[u32] {
        &self.response
    }

    pub fn response_levels(&self) -> &[String] {
        &self.response_levels
    }

    /// Response as 0/1, failing unless it is binary.
    pub fn binary_response(&self) -> Result<Vec<u8>> {
        if self.response_levels.len() != 2 {
            return Err(Error::validation(format!(
                "binary model needs 2 response categories, found {}",
                self.response_levels.len()
            )));
        }
        Ok(self.response.iter().map(|&r| r as u8).collect())
    }

    pub fn raw_weight(&self) -> &[f64] {
        &self.raw_weight
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.columns.iter().map(|(n, c)| (n.as_str(), c))
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c)
            .ok_or_else(|| Error::schema(format!("unknown column `{name}`")))
    }

    pub fn subset(&self) -> Option<&[bool]> {
        self.subset.as_deref()
    }

    /// Dataset restricted to the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<SurveyDataset> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::validation(format!("row {r} out of range")));
        }
        let pick = |c: &Column| match c {
            Column::Categorical { levels, codes } => Column::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&i| codes[i]).collect(),
            },
            Column::Integer(v) => Column::Integer(rows.iter().map(|&i| v[i]).collect()),
            Column::Real(v) => Column::Real(rows.iter().map(|&i| v[i]).collect()),
        };
        Ok(SurveyDataset {
            response: rows.iter().map(|&i| self.response[i]).collect(),
            response_levels: self.response_levels.clone(),
            columns: self.columns.iter().map(|(n, c)| (n.clone(), pick(c))).collect(),
            raw_weight: rows.iter().map(|&i| self.raw_weight[i]).collect(),
            subset: self
                .subset
                .as_ref()
                .map(|f| rows.iter().map(|&i| f[i]).collect()),
        })
    }

    /// Row indices belonging to the analysis subset (all rows if none is declared).
    pub fn subset_indices(&self) -> Vec<usize> {
        match &self.subset {
            Some(f) => f.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect(),
            None => (0..self.n()).collect(),
        }
    }
}

fn validate_weights(raw: &[f64]) -> Result<()> {
    if let Some(i) = raw.iter().position(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::validation(format!(
            "weight at index {i} must be positive and finite, got {}",
            raw[i]
        )));
    }
    Ok(())
}

/// Which sample a set of scaled weights was normalized within.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScope {
    FullSample,
    Subset,
}

/// Survey weights rescaled to sum to the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledWeights {
    values: Vec<f64>,
    scope: WeightScope,
}

impl ScaledWeights {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scope(&self) -> WeightScope {
        self.scope
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values at the given rows, keeping their full-sample scaling.
    pub fn select(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.values[i]).collect()
    }
}

/// `w̃_i = w_i · n / Σ w`.
pub fn scale_weights(raw: &[f64]) -> Result<ScaledWeights> {
    scale_weights_within(raw, WeightScope::FullSample)
}

pub fn scale_weights_within(raw: &[f64], scope: WeightScope) -> Result<ScaledWeights> {
    validate_weights(raw)?;
    let total: f64 = raw.iter().sum();
    let factor = raw.len() as f64 / total;
    Ok(ScaledWeights {
        values: raw.iter().map(|&w| w * factor).collect(),
        scope,
    })
}

/// Ordered covariate list. Categorical terms expand to one indicator per
/// non-reference level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub terms: Vec<String>,
    pub intercept: bool,
}

impl Formula {
    pub fn new<S: Into<String>>(terms: impl IntoIterator<Item = S>) -> Self {
        Formula {
            terms: terms.into_iter().map(Into::into).collect(),
            intercept: true,
        }
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }
}

pub const INTERCEPT: &str = "(Intercept)";

/// Numeric design matrix with labelled columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: Matrix,
    column_names: Vec<String>,
    reference_levels: Vec<(String, String)>,
}

impl DesignMatrix {
    pub fn new(matrix: Matrix, column_names: Vec<String>) -> Result<Self> {
        if matrix.cols() != column_names.len() {
            return Err(Error::validation(format!(
                "{} column names for {} columns",
                column_names.len(),
                matrix.cols()
            )));
        }
        Ok(DesignMatrix {
            matrix,
            column_names,
            reference_levels: Vec::new(),
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// `(categorical column, dropped level)` pairs.
    pub fn reference_levels(&self) -> &[(String, String)] {
        &self.reference_levels
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let data: Vec<f64> = rows.iter().flat_map(|&i| self.matrix.row(i).iter().copied()).collect();
        DesignMatrix {
            matrix: Matrix::from_row_major(rows.len(), self.cols(), data).expect("row selection"),
            column_names: self.column_names.clone(),
            reference_levels: self.reference_levels.clone(),
        }
    }

    /// Appends a column, e.g. the latent covariate slot of an outcome design.
    pub fn with_column(&self, name: impl Into<String>, values: &[f64]) -> Result<DesignMatrix> {
        if values.len() != self.rows() {
            return Err(Error::validation("appended column has the wrong length"));
        }
        let cols = self.cols() + 1;
        let mut data = Vec::with_capacity(self.rows() * cols);
        for (i, &v) in values.iter().enumerate() {
            data.extend_from_slice(self.matrix.row(i));
            data.push(v);
        }
        let mut names = self.column_names.clone();
        names.push(name.into());
        Ok(DesignMatrix {
            matrix: Matrix::from_row_major(self.rows(), cols, data)?,
            column_names: names,
            reference_levels: self.reference_levels.clone(),
        })
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.matrix
    }

    /// Fails with the dependent columns when the smallest singular value is
    /// at most `1e-10` times the largest.
    pub fn check_rank(&self) -> Result<()> {
        if self.cols() == 0 {
            return Ok(());
        }
        if self.rows() < self.cols() {
            return Err(Error::RankDeficient {
                columns: self.column_names.clone(),
            });
        }
        let svd = linalg::svd(&self.matrix);
        let largest = svd.singular_values[0];
        let tol = 1e-10 * largest;
        let mut dependent = vec![false; self.cols()];
        let mut deficient = largest == 0.0;
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s <= tol {
                deficient = true;
                let v = svd.v.column(k);
                let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                for (j, x) in v.iter().enumerate() {
                    if x.abs() > 1e-6 * vmax {
                        dependent[j] = true;
                    }
                }
            }
        }
        if deficient {
            let columns = self
                .column_names
                .iter()
                .zip(&dependent)
                .filter(|(_, &d)| d || largest == 0.0)
                .map(|(n, _)| n.clone())
                .collect();
            return Err(Error::RankDeficient { columns });
        }
        Ok(())
    }
}

/// One-hot encodes the formula terms (first level dropped), intercept first,
/// and checks full column rank.
pub fn build_design_matrix(dataset: &SurveyDataset, formula: &Formula) -> Result<DesignMatrix> {
    let design = encode_design(dataset, formula)?;
    design.check_rank()?;
    Ok(design)
}

/// [`build_design_matrix`] without the rank check, for designs that are only
/// used after row selection.
pub fn encode_design(dataset: &SurveyDataset, formula: &Formula) -> Result<DesignMatrix> {
    let n = dataset.n();
    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut reference_levels = Vec::new();
    if formula.intercept {
        names.push(INTERCEPT.to_string());
        cols.push(vec![1.0; n]);
    }
    for term in &formula.terms {
        match dataset.column(term)? {
            Column::Categorical { levels, codes } => {
                let mut seen = vec![false; levels.len()];
                codes.iter().for_each(|&c| seen[c] = true);
                if let Some(missing) = seen.iter().position(|s| !s) {
                    return Err(Error::schema(format!(
                        "level `{}` of `{term}` is never observed",
                        levels[missing]
                    )));
                }
                reference_levels.push((term.clone(), levels[0].clone()));
                for (l, level) in levels.iter().enumerate().skip(1) {
                    names.push(format!("{term}{level}"));
                    cols.push(codes.iter().map(|&c| if c == l { 1.0 } else { 0.0 }).collect());
                }
            }
            col => {
                names.push(term.clone());
                cols.push((0..n).map(|i| col.numeric_value(i).expect("numeric column")).collect());
            }
        }
    }
    let matrix = if cols.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&cols)?
    };
    Ok(DesignMatrix {
        matrix,
        column_names: names,
        reference_levels,
    })
}

/// `[1, indicator]` basis used to orthogonalize against subset membership.
pub fn subset_basis(flags: &[bool]) -> Matrix {
    let ones = vec![1.0; flags.len()];
    let ind: Vec<f64> = flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    Matrix::from_columns(&[ones, ind]).expect("equal lengths")
}

/// `(I - F(FᵀF)⁻¹Fᵀ) X*`: removes from every column of `x_star` its
/// component in the column space of `f`.
pub fn orthogonalize_against(x_star: &DesignMatrix, f: &Matrix) -> Result<DesignMatrix> {
    if f.rows() != x_star.rows() {
        return Err(Error::validation(format!(
            "projection basis has {} rows, design has {}",
            f.rows(),
            x_star.rows()
        )));
    }
    let basis = linalg::orthonormal_basis(f)?;
    let mut out = x_star.clone();
    for j in 0..out.cols() {
        let mut c = out.matrix.column(j);
        linalg::project_out(&basis, &mut c);
        out.matrix_mut().set_column(j, &c);
    }
    Ok(out)
}

/// Profile of a design row with categoricals at their sample mode and
/// numeric columns at their mean, keyed by design column name.
pub fn modal_profile(dataset: &SurveyDataset, formula: &Formula) -> Result<BTreeMap<String, f64>> {
    let mut profile = BTreeMap::new();
    if formula.intercept {
        profile.insert(INTERCEPT.to_string(), 1.0);
    }
    let n = dataset.n().max(1) as f64;
    for term in &formula.terms {
        match dataset.column(term)? {
            Column::Categorical { levels, codes } => {
                let mut counts = vec![0usize; levels.len()];
                codes.iter().for_each(|&c| counts[c] += 1);
                let mode = (0..levels.len())
                    .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                for (l, level) in levels.iter().enumerate().skip(1) {
                    profile.insert(format!("{term}{level}"), if l == mode { 1.0 } else { 0.0 });
                }
            }
            col => {
                let mean = (0..dataset.n()).map(|i| col.numeric_value(i).unwrap()).sum::<f64>() / n;
                profile.insert(term.clone(), mean);
            }
        }
    }
    Ok(profile)
}
