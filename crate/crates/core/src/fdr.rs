//! Stage 1: covariance-graph screening by multiple hypothesis testing.
//!
//! Every off-diagonal entry of the covariance gets a Pearson coefficient and
//! a t-statistic; the step-up false discovery rate procedure (with the
//! harmonic-number correction that makes it valid under arbitrary dependence)
//! decides which edges enter the sparsity pattern.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::likelihood::SampleCov;
use crate::student::student_t_upper_quantile;

/// Symmetric binary edge pattern with a fixed unit diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    z: Array2<bool>,
}

impl SparsityPattern {
    /// All edges present.
    pub fn full(p: usize) -> Self {
        Self {
            z: Array2::from_elem((p, p), true),
        }
    }

    /// No edges: diagonal only.
    pub fn diagonal(p: usize) -> Self {
        let mut z = Array2::from_elem((p, p), false);
        for i in 0..p {
            z[(i, i)] = true;
        }
        Self { z }
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut pat = Self::diagonal(p);
        for &(i, j) in edges {
            if i >= p || j >= p || i == j {
                return Err(Error::InvalidInput(format!(
                    "edge ({i},{j}) out of range for p={p}"
                )));
            }
            pat.z[(i, j)] = true;
            pat.z[(j, i)] = true;
        }
        Ok(pat)
    }

    /// The element-wise sparsity indicator of a symmetric matrix: an edge
    /// wherever the entry is non-zero. The diagonal is always kept.
    pub fn from_indicator(m: &Array2<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput("indicator matrix must be square".into()));
        }
        let p = m.nrows();
        let mut pat = Self::diagonal(p);
        for i in 0..p {
            for j in (i + 1)..p {
                if m[(i, j)] != 0.0 || m[(j, i)] != 0.0 {
                    pat.z[(i, j)] = true;
                    pat.z[(j, i)] = true;
                }
            }
        }
        Ok(pat)
    }

    pub fn p(&self) -> usize {
        self.z.nrows()
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.z[(i, j)]
    }

    /// Upper-triangle edges `(i, j)` with `i < j`, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let p = self.p();
        let mut out = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if self.z[(i, j)] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Number of upper-triangle edges.
    pub fn edge_count(&self) -> usize {
        let p = self.p();
        let mut m = 0;
        for i in 0..p {
            for j in (i + 1)..p {
                if self.z[(i, j)] {
                    m += 1;
                }
            }
        }
        m
    }

    /// True when every edge of `self` is also an edge of `other`.
    pub fn is_subset_of(&self, other: &SparsityPattern) -> bool {
        self.p() == other.p()
            && self
                .z
                .iter()
                .zip(other.z.iter())
                .all(|(&a, &b)| !a || b)
    }

    /// Relabel variables: entry `(i, j)` moves to `(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let p = self.p();
        assert_eq!(perm.len(), p);
        let mut z = Array2::from_elem((p, p), false);
        for i in 0..p {
            for j in 0..p {
                z[(perm[i], perm[j])] = self.z[(i, j)];
            }
        }
        Self { z }
    }
}

/// Pearson coefficients and t-statistics for all `M = p(p−1)/2` pairs,
/// stored over the upper triangle in row-major flat order.
#[derive(Debug, Clone)]
pub struct TestField {
    rho: Vec<f64>,
    t_stat: Vec<f64>,
    p: usize,
    n: usize,
}

impl TestField {
    /// Flat index of the pair `(i, j)` with `i < j`.
    pub fn pair_to_flat(p: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < p);
        i * p - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Inverse of [`Self::pair_to_flat`].
    pub fn flat_to_pair(p: usize, m: usize) -> (usize, usize) {
        let mut i = 0;
        let mut offset = 0;
        loop {
            let row = p - i - 1;
            if m < offset + row {
                return (i, m - offset + i + 1);
            }
            offset += row;
            i += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn t_stats(&self) -> &[f64] {
        &self.t_stat
    }

    /// Pearson coefficients followed by t-statistics in one call.
    pub fn from_sample_cov(s: &SampleCov) -> Result<Self> {
        t_statistics(pearson_matrix(s)?, s.n)
    }
}

/// `ρ_ij = S_ij / √(S_ii S_jj)`, clamped to `[−1, 1]`.
///
/// The returned field has the t-statistics left empty; fill them with
/// [`t_statistics`].
pub fn pearson_matrix(s: &SampleCov) -> Result<TestField> {
    let p = s.p();
    for i in 0..p {
        if s.s[(i, i)] <= 0.0 {
            return Err(Error::DegenerateVariable { index: i });
        }
    }
    let m = p * (p - 1) / 2;
    let mut rho = Vec::with_capacity(m);
    for i in 0..p {
        for j in (i + 1)..p {
            let r = s.s[(i, j)] / (s.s[(i, i)] * s.s[(j, j)]).sqrt();
            rho.push(r.clamp(-1.0, 1.0));
        }
    }
    Ok(TestField {
        rho,
        t_stat: Vec::new(),
        p,
        n: s.n,
    })
}

/// `T_ij = ρ_ij √((n−2)/(1−ρ_ij²))`; `|ρ| = 1` maps to a sign-matched
/// infinity so the pair is always rejected.
pub fn t_statistics(field: TestField, n: usize) -> Result<TestField> {
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "t-statistics need n ≥ 3 samples, got {n}"
        )));
    }
    let dof = (n - 2) as f64;
    let t_stat = field
        .rho
        .iter()
        .map(|&r| {
            if r.abs() >= 1.0 - 1e-12 {
                f64::INFINITY.copysign(r)
            } else {
                r * (dof / (1.0 - r * r)).sqrt()
            }
        })
        .collect();
    Ok(TestField {
        rho: field.rho,
        t_stat,
        p: field.p,
        n,
    })
}

/// Configuration of the FDR screen.
#[derive(Debug, Clone, Copy)]
pub struct FdrConfig {
    /// Desired false discovery rate level, in `(0, 1)`.
    pub alpha: f64,
    /// Rank by `|T|` against two-sided quantiles (default). The one-sided
    /// mode ranks signed statistics against upper quantiles.
    pub two_sided: bool,
}

impl FdrConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!(
                "FDR level must lie in (0,1), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            two_sided: true,
        })
    }

    pub fn one_sided(mut self) -> Self {
        self.two_sided = false;
        self
    }
}

/// Step-up FDR screen over the test field.
///
/// Statistics are ranked descending; the m-th significance level is
/// `p_m = α·m/(M·η_M)` with `η_M` the M-th harmonic number, and the edge set
/// is the top `m_max = max{m : stat_[m] ≥ q_{p_m}}` pairs.
pub fn fdr_pattern(field: &TestField, cfg: &FdrConfig) -> Result<SparsityPattern> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "FDR level must lie in (0,1), got {}",
            cfg.alpha
        )));
    }
    if field.t_stat.len() != field.rho.len() {
        return Err(Error::InvalidInput(
            "test field is missing its t-statistics".into(),
        ));
    }
    let p = field.p;
    let m_total = field.len();
    let dof = (field.n - 2) as f64;
    let eta: f64 = (1..=m_total).map(|i| 1.0 / i as f64).sum();

    let stat = |m: usize| {
        if cfg.two_sided {
            field.t_stat[m].abs()
        } else {
            field.t_stat[m]
        }
    };
    let mut order: Vec<usize> = (0..m_total).collect();
    order.sort_by(|&a, &b| stat(b).total_cmp(&stat(a)).then(a.cmp(&b)));

    let mut m_max = 0;
    for rank in 1..=m_total {
        let p_m = cfg.alpha * rank as f64 / (m_total as f64 * eta);
        let tail = if cfg.two_sided { 0.5 * p_m } else { p_m };
        let q = student_t_upper_quantile(tail, dof)?;
        if stat(order[rank - 1]) >= q {
            m_max = rank;
        }
    }

    let mut pattern = SparsityPattern::diagonal(p);
    for &flat in order.iter().take(m_max) {
        let (i, j) = TestField::flat_to_pair(p, flat);
        pattern.z[(i, j)] = true;
        pattern.z[(j, i)] = true;
    }
    Ok(pattern)
}
