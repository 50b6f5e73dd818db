use nalgebra::{DMatrix, DVector};

use super::EvalError;

/// ‖φ_{t+1} − φ_t‖₂ for consecutive periods.
pub fn phi_stability(series: &[Vec<f64>]) -> Result<Vec<f64>, EvalError> {
    if series.len() < 2 {
        return Err(EvalError::TooShort {
            what: "parameter stability",
            need: 2,
            got: series.len(),
        });
    }
    let dim = series[0].len();
    if let Some(i) = series.iter().position(|p| p.len() != dim) {
        return Err(EvalError::Dimension {
            index: i,
            expected: dim,
            got: series[i].len(),
        });
    }
    Ok(series
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect())
}

/// Design matrix `[1, columns...]`.
pub fn with_intercept(columns: &[Vec<f64>]) -> Result<DMatrix<f64>, EvalError> {
    let n = columns.first().map_or(0, Vec::len);
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(EvalError::Length(c.len(), n));
    }
    Ok(DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub residual_variance: f64,
}

/// Least squares of `y` on `x` (which carries its own intercept column) with
/// homoskedastic standard errors.
pub fn ols(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit, EvalError> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(EvalError::Length(y.len(), n));
    }
    if n <= k {
        return Err(EvalError::TooShort {
            what: "regression",
            need: k + 1,
            got: n,
        });
    }
    let rank = x.rank(1e-10 * x.amax().max(1.0));
    if rank < k {
        return Err(EvalError::RankDeficient { rank, cols: k });
    }
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * x;
    let xty = x.transpose() * &yv;
    let beta = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => x
            .clone()
            .qr()
            .solve(&yv)
            .ok_or(EvalError::RankDeficient { rank, cols: k })?,
    };
    let xtx_inv = xtx.try_inverse().ok_or(EvalError::RankDeficient { rank, cols: k })?;
    let resid = &yv - x * &beta;
    let ssr = resid.norm_squared();
    let mean = yv.mean();
    let sst: f64 = yv.iter().map(|v| (v - mean) * (v - mean)).sum();
    let s2 = ssr / (n - k) as f64;
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    Ok(OlsFit {
        coef: beta.iter().copied().collect(),
        std_errors: (0..k).map(|j| (s2 * xtx_inv[(j, j)]).max(0.0).sqrt()).collect(),
        r2,
        adj_r2: 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k) as f64,
        residual_variance: s2,
    })
}
