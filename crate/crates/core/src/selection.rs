//! EBIC scoring and selection of the FDR level.
//!
//! Screening at increasing α yields a hierarchy of sparsity patterns; only
//! the pattern-changing grid points need a fit. Each fitted pattern is
//! scored with the extended BIC and the α with the lowest score wins.

use serde::Serialize;

use crate::bcd::{bcd_fit, BcdConfig};
use crate::error::{Error, Result};
use crate::fdr::{fdr_pattern, FdrConfig, SparsityPattern, TestField};
use crate::likelihood::{log_likelihood, CovEstimate, SampleCov};
use crate::pd::{pd_fit, PdConfig, PdConstraint};

/// The default grid: 0.005 through 0.1 with a spacing of 0.005.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.005).collect()
}

/// Extended BIC with an explicit edge count `m`:
/// `EBIC = −2ℒ(Σ̂) + m·log(pn) + 2m·log(M + p)` with `M = p(p−1)/2`.
pub fn ebic_score_with_m(est: &CovEstimate, s: &SampleCov, m: usize) -> Result<f64> {
    let p = s.p() as f64;
    let n = s.n as f64;
    let big_m = p * (p - 1.0) / 2.0;
    let ll = log_likelihood(&est.sigma, s)?;
    Ok(-2.0 * ll + m as f64 * (p * n).ln() + 2.0 * m as f64 * (big_m + p).ln())
}

/// Extended BIC with `m` counted from the fitted matrix: the number of
/// non-zero upper-triangle off-diagonal entries of `Σ̂` (the solver may have
/// introduced zeros beyond the pattern's).
pub fn ebic_score(est: &CovEstimate, s: &SampleCov) -> Result<f64> {
    ebic_score_with_m(est, s, est.nonzero_offdiag_pairs())
}

/// One pattern-changing grid point.
#[derive(Debug, Clone)]
pub struct PathEntry {
    /// First α of the grid producing this pattern.
    pub alpha: f64,
    pub pattern: SparsityPattern,
    /// Upper-triangle edge count of the pattern.
    pub edge_count: usize,
}

/// The deduplicated hierarchy of patterns over an α grid.
#[derive(Debug, Clone)]
pub struct AlphaPath {
    /// The full grid that was screened.
    pub alphas: Vec<f64>,
    /// Only the grid points whose pattern differs from the previous one.
    pub distinct: Vec<PathEntry>,
}

/// Screen every grid point and keep the first α of each distinct pattern.
///
/// The step-up screen is monotone in α, so the retained patterns form a
/// nested hierarchy; a violation would mean a screening bug and is reported
/// as an internal error.
pub fn alpha_path(s: &SampleCov, grid: &[f64], two_sided: bool) -> Result<AlphaPath> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("alpha grid is empty".into()));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput(
                "alpha grid must be strictly ascending".into(),
            ));
        }
    }
    let field = TestField::from_sample_cov(s)?;
    let mut distinct: Vec<PathEntry> = Vec::new();
    for &alpha in grid {
        let mut cfg = FdrConfig::new(alpha)?;
        cfg.two_sided = two_sided;
        let pattern = fdr_pattern(&field, &cfg)?;
        match distinct.last() {
            Some(last) if last.pattern == pattern => {}
            Some(last) => {
                if !last.pattern.is_subset_of(&pattern) {
                    return Err(Error::Internal(format!(
                        "pattern hierarchy violated between α={} and α={alpha}",
                        last.alpha
                    )));
                }
                let edge_count = pattern.edge_count();
                distinct.push(PathEntry {
                    alpha,
                    pattern,
                    edge_count,
                });
            }
            None => {
                let edge_count = pattern.edge_count();
                distinct.push(PathEntry {
                    alpha,
                    pattern,
                    edge_count,
                });
            }
        }
    }
    Ok(AlphaPath {
        alphas: grid.to_vec(),
        distinct,
    })
}

/// Which solver fits each candidate pattern.
#[derive(Debug, Clone)]
pub enum FitMethod {
    Bcd(BcdConfig),
    Pd(PdConfig),
}

impl FitMethod {
    pub fn fit(&self, s: &SampleCov, z: &SparsityPattern) -> Result<CovEstimate> {
        match self {
            FitMethod::Bcd(cfg) => bcd_fit(s, z, cfg, None),
            FitMethod::Pd(cfg) => {
                pd_fit(s, &PdConstraint::Pattern(z.clone()), cfg, None).map(|f| f.estimate)
            }
        }
    }
}

/// Selection knobs beyond the solver configuration.
#[derive(Debug, Clone, Copy)]
pub struct SelectionOptions {
    /// Two-sided FDR screening (the default).
    pub two_sided: bool,
    /// Count the EBIC `m` from the pattern instead of the fitted matrix.
    pub count_m_from_pattern: bool,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            two_sided: true,
            count_m_from_pattern: false,
        }
    }
}

/// One fitted and scored pattern.
#[derive(Debug, Clone, Serialize)]
pub struct EbicEntry {
    pub alpha: f64,
    /// Edge count used in the penalty.
    pub m: usize,
    pub log_likelihood: f64,
    pub ebic: f64,
}

/// All fitted patterns with the index of the EBIC minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct EbicReport {
    pub entries: Vec<EbicEntry>,
    /// Index into `entries`; ties resolve to the smallest α.
    pub selected: usize,
    /// Patterns whose fit failed, with the reason.
    pub warnings: Vec<String>,
}

/// The winning α with its estimate and the full report.
#[derive(Debug, Clone)]
pub struct Selection {
    pub alpha: f64,
    pub pattern: SparsityPattern,
    pub estimate: CovEstimate,
    pub report: EbicReport,
}

/// Fit every distinct pattern along the α path, score with EBIC, and return
/// the minimizer. A pattern whose fit fails is skipped with a warning; all
/// patterns failing is an error.
pub fn select_alpha(
    s: &SampleCov,
    grid: &[f64],
    method: &FitMethod,
    opts: &SelectionOptions,
) -> Result<Selection> {
    let path = alpha_path(s, grid, opts.two_sided)?;
    let mut entries: Vec<EbicEntry> = Vec::new();
    let mut warnings = Vec::new();
    let mut best: Option<(usize, f64, CovEstimate, SparsityPattern)> = None;
    for entry in &path.distinct {
        let est = match method.fit(s, &entry.pattern) {
            Ok(est) => est,
            Err(e) => {
                warnings.push(format!("alpha {:.6}: {e}", entry.alpha));
                continue;
            }
        };
        let m = if opts.count_m_from_pattern {
            entry.edge_count
        } else {
            est.nonzero_offdiag_pairs()
        };
        let ll = log_likelihood(&est.sigma, s)?;
        let ebic = ebic_score_with_m(&est, s, m)?;
        let idx = entries.len();
        entries.push(EbicEntry {
            alpha: entry.alpha,
            m,
            log_likelihood: ll,
            ebic,
        });
        let better = match &best {
            None => true,
            Some((sel, _, _, _)) => ebic < entries[*sel].ebic,
        };
        if better {
            best = Some((idx, entry.alpha, est, entry.pattern.clone()));
        }
    }
    match best {
        Some((selected, alpha, estimate, pattern)) => Ok(Selection {
            alpha,
            pattern,
            estimate,
            report: EbicReport {
                entries,
                selected,
                warnings,
            },
        }),
        None => Err(Error::AllFitsFailed(warnings.join("; "))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::{sample_covariance, DataMatrix};
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_data_cov(p: usize, n: usize, rng: &mut ChaCha8Rng) -> SampleCov {
        let mut y = Array2::<f64>::zeros((p, n));
        y.mapv_inplace(|_| rng.random::<f64>() * 2.0 - 1.0);
        sample_covariance(&DataMatrix::new(y).unwrap())
    }

    fn identity_estimate(p: usize) -> CovEstimate {
        CovEstimate {
            sigma: Array2::eye(p),
            objective: 0.0,
            iterations: 0,
            converged: true,
            objective_trace: Vec::new(),
        }
    }

    #[test]
    fn ebic_identity_closed_form() {
        // Σ̂ = S = I, p = 2, n = 10, m = 0 → EBIC = 20·log(2π) + 20.
        let s = SampleCov::new(Array2::eye(2), 10).unwrap();
        let score = ebic_score(&identity_estimate(2), &s).unwrap();
        let expected = 20.0 * (2.0 * std::f64::consts::PI).ln() + 20.0;
        assert!((score - expected).abs() < 1e-10, "score={score}");
    }

    #[test]
    fn ebic_linear_in_m() {
        let s = SampleCov::new(Array2::eye(4) * 1.7, 12).unwrap();
        let est = identity_estimate(4);
        let at3 = ebic_score_with_m(&est, &s, 3).unwrap();
        let at5 = ebic_score_with_m(&est, &s, 5).unwrap();
        let (p, n) = (4.0_f64, 12.0_f64);
        let m_total = p * (p - 1.0) / 2.0;
        let expected = 2.0 * ((p * n).ln() + 2.0 * (m_total + p).ln());
        assert!((at5 - at3 - expected).abs() < 1e-10);
        assert!(at5 > at3);
    }

    #[test]
    fn ebic_matches_recomposition_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let s = random_data_cov(5, 30, &mut rng);
        let est = bcd_fit(
            &s,
            &SparsityPattern::from_edges(5, &[(0, 1), (2, 3)]).unwrap(),
            &BcdConfig::default(),
            None,
        )
        .unwrap();
        let score = ebic_score(&est, &s).unwrap();
        // Independent recomposition from parts.
        let m = est.nonzero_offdiag_pairs() as f64;
        let (p, n) = (5.0_f64, 30.0_f64);
        let ll = log_likelihood(&est.sigma, &s).unwrap();
        let oracle = -2.0 * ll + m * (p * n).ln() + 2.0 * m * (p * (p - 1.0) / 2.0 + p).ln();
        assert!((score - oracle).abs() < 1e-9);
    }

    #[test]
    fn path_collapses_on_null_data() {
        // Independent variables, plenty of samples: every small α yields the
        // diagonal pattern.
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        let s = random_data_cov(8, 4000, &mut rng);
        let path = alpha_path(&s, &default_alpha_grid(), true).unwrap();
        assert_eq!(path.distinct.len(), 1);
        assert_eq!(path.distinct[0].pattern, SparsityPattern::diagonal(8));
        assert_eq!(path.distinct[0].alpha, 0.005);
    }

    #[test]
    fn path_single_grid_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let s = random_data_cov(5, 20, &mut rng);
        let path = alpha_path(&s, &[0.05], true).unwrap();
        assert_eq!(path.distinct.len(), 1);
        assert_eq!(path.alphas, vec![0.05]);
    }

    #[test]
    fn path_rejects_bad_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(84);
        let s = random_data_cov(4, 16, &mut rng);
        assert!(alpha_path(&s, &[], true).is_err());
        assert!(alpha_path(&s, &[0.05, 0.05], true).is_err());
        assert!(alpha_path(&s, &[0.1, 0.05], true).is_err());
    }

    #[test]
    fn path_edge_counts_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(85);
        for _ in 0..5 {
            let s = random_data_cov(7, 25, &mut rng);
            let path = alpha_path(&s, &default_alpha_grid(), true).unwrap();
            for w in path.distinct.windows(2) {
                assert!(w[0].edge_count < w[1].edge_count);
                assert!(w[0].pattern.is_subset_of(&w[1].pattern));
            }
        }
    }

    #[test]
    fn select_single_pattern_trivially() {
        let mut rng = ChaCha8Rng::seed_from_u64(86);
        let s = random_data_cov(8, 4000, &mut rng);
        let sel = select_alpha(
            &s,
            &default_alpha_grid(),
            &FitMethod::Bcd(BcdConfig::default()),
            &SelectionOptions::default(),
        )
        .unwrap();
        assert_eq!(sel.report.entries.len(), 1);
        assert_eq!(sel.report.selected, 0);
        assert_eq!(sel.pattern, SparsityPattern::diagonal(8));
    }

    #[test]
    fn selection_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(87);
        let s = random_data_cov(6, 30, &mut rng);
        let run = || {
            select_alpha(
                &s,
                &default_alpha_grid(),
                &FitMethod::Bcd(BcdConfig::default()),
                &SelectionOptions::default(),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.estimate.sigma, b.estimate.sigma);
    }

    #[test]
    fn selected_entry_attains_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        // Correlated data so the path has several patterns.
        let (p, n) = (6, 40);
        let mut y = Array2::<f64>::zeros((p, n));
        y.mapv_inplace(|_| rng.random::<f64>() * 2.0 - 1.0);
        for k in 0..n {
            let v = y[(0, k)];
            y[(1, k)] = 0.7 * v + 0.3 * y[(1, k)];
            y[(2, k)] = 0.4 * v + 0.6 * y[(2, k)];
        }
        let s = sample_covariance(&DataMatrix::new(y).unwrap());
        let sel = select_alpha(
            &s,
            &default_alpha_grid(),
            &FitMethod::Bcd(BcdConfig::default()),
            &SelectionOptions::default(),
        )
        .unwrap();
        let min = sel
            .report
            .entries
            .iter()
            .map(|e| e.ebic)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(sel.report.entries[sel.report.selected].ebic, min);
        // Ties (if any) resolve to the smallest α: no earlier entry may
        // attain the minimum.
        for e in &sel.report.entries[..sel.report.selected] {
            assert!(e.ebic > min);
        }
    }
}
