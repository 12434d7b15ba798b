//! Greedy Mahalanobis thinning of a feature table.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const RIDGE: f64 = 1e-8;

/// Inverse of the sample covariance of `rows`; a `1e-8·I` ridge is added when
/// the covariance is singular.
pub fn inverse_covariance(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 rows, got {}",
            rows.len()
        )));
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            context: "feature row",
            expected: d,
            actual: r.len(),
        });
    }
    let n = rows.len();
    let data = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = data.row_mean();
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    if let Some(chol) = cov.clone().cholesky() {
        return Ok(chol.inverse());
    }
    let ridged = cov + DMatrix::identity(d, d) * RIDGE;
    ridged
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Input("feature covariance is not invertible".into()))
}

pub fn mahalanobis(a: &[f64], b: &[f64], inv_cov: &DMatrix<f64>) -> f64 {
    let d = a.len();
    let mut acc = 0.0;
    for i in 0..d {
        let di = a[i] - b[i];
        for j in 0..d {
            acc += di * inv_cov[(i, j)] * (a[j] - b[j]);
        }
    }
    acc.max(0.0).sqrt()
}

/// Row indices kept by a single pass in row order: a row is dropped when it
/// lies within `tau` of any row already kept.
pub fn mahalanobis_reduce(rows: &[Vec<f64>], tau: f64) -> Result<Vec<usize>> {
    let inv = inverse_covariance(rows)?;
    mahalanobis_reduce_with_metric(rows, tau, &inv)
}

pub fn mahalanobis_reduce_with_metric(
    rows: &[Vec<f64>],
    tau: f64,
    inv_cov: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    if rows.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 rows, got {}",
            rows.len()
        )));
    }
    if !(tau >= 0.0) {
        return Err(Error::config(
            "surrogate.mahalanobis_tau",
            format!("must be >= 0, got {tau}"),
        ));
    }
    let d = inv_cov.nrows();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            context: "feature row",
            expected: d,
            actual: r.len(),
        });
    }
    let mut kept: Vec<usize> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if tau == 0.0
            || kept
                .iter()
                .all(|&k| mahalanobis(row, &rows[k], inv_cov) >= tau)
        {
            kept.push(i);
        }
    }
    Ok(kept)
}
