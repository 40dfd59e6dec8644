//! Data and covariance types plus the Gaussian likelihood objective.
//!
//! The model is zero-mean multivariate Gaussian data `Y ∈ ℝ^{p×n}` with
//! covariance `Σ`. The sufficient statistic is `S = YYᵀ/n` and the negative
//! log-likelihood, up to constants, is `f(Σ) = log det Σ + Tr(Σ⁻¹S)`.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, ensure_symmetric, symmetrize, Cholesky};

/// Observations stored variables-by-samples (`p × n`).
///
/// The data are treated as zero-mean; centering is an explicit, separate step
/// (see [`DataMatrix::centered`]).
#[derive(Debug, Clone)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    /// Wrap a `p × n` matrix. Requires `p ≥ 2`, `n ≥ 2` and finite entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (p, n) = (values.nrows(), values.ncols());
        if p < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 variables, got {p}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        check_finite(&values, "data matrix")?;
        Ok(Self { values })
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Subtract each variable's sample mean.
    pub fn centered(&self) -> Self {
        let mut v = self.values.clone();
        let n = v.ncols() as f64;
        for mut row in v.rows_mut() {
            let mean = row.sum() / n;
            row.mapv_inplace(|x| x - mean);
        }
        Self { values: v }
    }
}

/// Sample covariance `S = YYᵀ/n` together with the sample count that formed it.
#[derive(Debug, Clone)]
pub struct SampleCov {
    pub s: Array2<f64>,
    pub n: usize,
}

impl SampleCov {
    /// Wrap an externally supplied covariance matrix.
    pub fn new(s: Array2<f64>, n: usize) -> Result<Self> {
        check_finite(&s, "sample covariance")?;
        ensure_symmetric(&s)?;
        if s.diag().iter().any(|&d| d < 0.0) {
            return Err(Error::InvalidInput(
                "sample covariance has a negative diagonal entry".into(),
            ));
        }
        let mut s = s;
        symmetrize(&mut s);
        Ok(Self { s, n })
    }

    pub fn p(&self) -> usize {
        self.s.nrows()
    }
}

/// `S = (1/n) Y Yᵀ`. No mean subtraction; the model assumes zero-mean data.
pub fn sample_covariance(y: &DataMatrix) -> SampleCov {
    let n = y.n();
    let mut s = y.values().dot(&y.values().t());
    s.mapv_inplace(|x| x / n as f64);
    symmetrize(&mut s);
    SampleCov { s, n }
}

/// A fitted covariance matrix with convergence metadata.
#[derive(Debug, Clone)]
pub struct CovEstimate {
    /// Symmetric positive definite estimate.
    pub sigma: Array2<f64>,
    /// Final value of `f(Σ) = log det Σ + Tr(Σ⁻¹S)`.
    pub objective: f64,
    /// Sweeps (BCD) or iterations (PD) performed.
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each sweep/iteration. For the PD solver this is
    /// the penalized objective at the running penalty level.
    pub objective_trace: Vec<f64>,
}

/// `f(Σ) = log det Σ + Tr(Σ⁻¹ S)`, evaluated through a Cholesky factor.
pub fn neg_log_likelihood(sigma: &Array2<f64>, s: &SampleCov) -> Result<f64> {
    if sigma.nrows() != s.p() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: sigma is {}x{}, S is {}x{}",
            sigma.nrows(),
            sigma.ncols(),
            s.p(),
            s.p()
        )));
    }
    let ch = Cholesky::new(sigma)?;
    Ok(ch.log_det() + ch.trace_solve(&s.s))
}

/// Gaussian log-likelihood
/// `ℒ(Σ) = −(pn/2)·log 2π − (n/2)·(log det Σ + Tr(Σ⁻¹S))`.
pub fn log_likelihood(sigma: &Array2<f64>, s: &SampleCov) -> Result<f64> {
    let p = s.p() as f64;
    let n = s.n as f64;
    let f = neg_log_likelihood(sigma, s)?;
    Ok(-0.5 * p * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * n * f)
}

/// Serializable summary of a [`CovEstimate`] for reports.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub nonzero_offdiag_pairs: usize,
}

impl CovEstimate {
    /// Number of non-zero upper-triangle off-diagonal entries.
    pub fn nonzero_offdiag_pairs(&self) -> usize {
        let p = self.sigma.nrows();
        let mut m = 0;
        for i in 0..p {
            for j in (i + 1)..p {
                if self.sigma[(i, j)] != 0.0 {
                    m += 1;
                }
            }
        }
        m
    }

    pub fn summary(&self) -> EstimateSummary {
        EstimateSummary {
            objective: self.objective,
            iterations: self.iterations,
            converged: self.converged,
            nonzero_offdiag_pairs: self.nonzero_offdiag_pairs(),
        }
    }
}
