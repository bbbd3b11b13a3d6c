#![allow(dead_code)]

pub mod oracles;

use misreport_core::data::DesignMatrix;
use misreport_core::linalg::Matrix;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Design with an intercept followed by the given columns, named `x1..`.
pub fn design_with_intercept(cols: &[Vec<f64>]) -> DesignMatrix {
    let n = cols[0].len();
    let mut all = vec![vec![1.0; n]];
    all.extend(cols.iter().cloned());
    let mut names = vec!["(Intercept)".to_string()];
    names.extend((1..=cols.len()).map(|j| format!("x{j}")));
    DesignMatrix::new(Matrix::from_columns(&all).unwrap(), names).unwrap()
}

pub fn rows_of(d: &DesignMatrix) -> Vec<Vec<f64>> {
    let m = d.matrix();
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}
