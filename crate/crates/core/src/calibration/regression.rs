//! Ordinary least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fitted straight line `y = slope·x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Coefficient of determination of `fitted` against `ys`. A constant series
/// fitted exactly has R² = 1.
pub fn r_squared(ys: &[f64], residuals: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

/// Unweighted OLS line through `(xs, ys)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<RegressionResult> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("regression data", "x and y lengths differ"));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData("a line needs at least 2 points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all x values are equal; the fit is singular".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    Ok(RegressionResult {
        slope,
        intercept,
        r_squared: r_squared(ys, &residuals),
        residuals,
    })
}

/// Least-squares slope of a line forced through the origin.
pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("no non-zero abscissa".into()));
    }
    Ok(xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sxx)
}

/// Solves the least-squares problem `min |A·β − y|` through the normal
/// equations. `rows` are the rows of A.
pub fn least_squares(rows: &[Vec<f64>], ys: &[f64]) -> Result<Vec<f64>> {
    let p = rows.first().map(Vec::len).unwrap_or(0);
    if rows.len() < p || p == 0 {
        return Err(Error::InsufficientData(format!("{} rows for {p} parameters", rows.len())));
    }
    let mut m = vec![vec![0.0; p + 1]; p];
    for (row, y) in rows.iter().zip(ys) {
        for i in 0..p {
            for j in 0..p {
                m[i][j] += row[i] * row[j];
            }
            m[i][p] += row[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("non-empty range");
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::InsufficientData("normal equations are singular".into()));
        }
        m.swap(col, pivot);
        for r in col + 1..p {
            let f = m[r][col] / m[col][col];
            for c in col..=p {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut beta = vec![0.0; p];
    for r in (0..p).rev() {
        let tail: f64 = (r + 1..p).map(|c| m[r][c] * beta[c]).sum();
        beta[r] = (m[r][p] - tail) / m[r][r];
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let xs = [3.0, 5.0, 10.0, 15.0];
        let ys: Vec<f64> = xs.iter().map(|x| 5e-3 * x + 0.0178).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 5e-3).abs() < 1e-15);
        assert!((f.intercept - 0.0178).abs() < 1e-15);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn singular_fits() {
        assert!(fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_line(&[1.0], &[1.0]).is_err());
        assert!(least_squares(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn multi_parameter_recovery() {
        let rows: Vec<Vec<f64>> = (-5..=5).map(|i| vec![1.0, (i.max(0)) as f64, (-i).max(0) as f64]).collect();
        let ys: Vec<f64> = rows.iter().map(|r| 2.0 + 3.0 * r[1] + 4.0 * r[2]).collect();
        let beta = least_squares(&rows, &ys).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-12);
        assert!((beta[1] - 3.0).abs() < 1e-12);
        assert!((beta[2] - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn recovers_noiseless_lines(m in -10.0f64..10.0, b in -10.0f64..10.0) {
            let xs: Vec<f64> = (0..7).map(|i| i as f64 * 1.5 + 0.3).collect();
            let ys: Vec<f64> = xs.iter().map(|x| m * x + b).collect();
            let f = fit_line(&xs, &ys).unwrap();
            prop_assert!((f.slope - m).abs() < 1e-12);
            prop_assert!((f.intercept - b).abs() < 1e-12);
        }
    }
}
