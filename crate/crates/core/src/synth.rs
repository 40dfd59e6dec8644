//! Ground-truth generation, Gaussian sampling, and evaluation metrics.
//!
//! The experiment protocol mirrors the solvers' intended use: draw a sparse
//! SPD truth with a target sparsity and condition number, sample Gaussian
//! data from it, fit each estimator, and score NRMSE against the truth and
//! MCC against the true edge set.

use std::time::Instant;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bcd::{bcd_fit, BcdConfig};
use crate::error::{Error, Result};
use crate::fdr::SparsityPattern;
use crate::likelihood::{neg_log_likelihood, sample_covariance, DataMatrix, SampleCov};
use crate::linalg::{frob_norm, sym_eigendecomposition, Cholesky};
use crate::pd::{pd_fit, PdConfig, PdConstraint};
use crate::selection::{select_alpha, FitMethod, SelectionOptions};

/// Identity of the random stream: the ChaCha8 keystream mapped to `f64`
/// uniforms (53-bit), with each normal draw consuming two uniforms through
/// the Box-Muller cosine branch. Recorded in experiment metadata so fixtures
/// stay reproducible across implementations.
pub const GENERATOR_ID: &str = "chacha8+box-muller";

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Recipe for a synthetic sparse SPD truth.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruthSpec {
    pub p: usize,
    /// Target fraction of zero off-diagonal entries, in `[0, 1)`.
    pub sparsity: f64,
    /// Target condition number, must exceed 1.
    pub cond: f64,
    pub seed: u64,
}

/// Generate a sparse symmetric positive definite matrix.
///
/// Off-diagonal support is drawn uniformly without replacement, values are
/// uniform in `[−1, 1]`, and the diagonal is the constant shift that places
/// the extreme eigenvalues exactly at the target condition number. In the
/// fully sparse limit the result is a diagonal matrix whose entries span
/// `[1, cond]`.
pub fn gen_sparse_spd(spec: &TruthSpec) -> Result<Array2<f64>> {
    if spec.p < 2 {
        return Err(Error::InvalidInput("need at least 2 variables".into()));
    }
    if !(0.0..1.0).contains(&spec.sparsity) {
        return Err(Error::InvalidInput(format!(
            "sparsity must lie in [0,1), got {}",
            spec.sparsity
        )));
    }
    if !(spec.cond > 1.0) {
        return Err(Error::InvalidInput(format!(
            "condition number must exceed 1, got {}",
            spec.cond
        )));
    }
    let p = spec.p;
    let m_total = p * (p - 1) / 2;
    let k = ((1.0 - spec.sparsity) * m_total as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    if k == 0 {
        let mut sigma = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            sigma[(i, i)] = 1.0 + (spec.cond - 1.0) * rng.random::<f64>();
        }
        // Pin the extremes so the condition number is exact.
        sigma[(0, 0)] = spec.cond;
        sigma[(1, 1)] = 1.0;
        return Ok(sigma);
    }

    // Partial Fisher-Yates draw of k pair positions without replacement.
    let mut positions: Vec<usize> = (0..m_total).collect();
    for i in 0..k {
        let j = i + rng.random_range(0..m_total - i);
        positions.swap(i, j);
    }
    let mut sigma = Array2::<f64>::zeros((p, p));
    for &flat in positions.iter().take(k) {
        let (i, j) = crate::fdr::TestField::flat_to_pair(p, flat);
        let v = rng.random::<f64>() * 2.0 - 1.0;
        sigma[(i, j)] = v;
        sigma[(j, i)] = v;
    }

    let (eigs, _) = sym_eigendecomposition(&sigma)?;
    let (top, bottom) = (eigs[0], eigs[p - 1]);
    // Zero trace with non-zero entries forces top > 0 > bottom.
    let shift = (top - spec.cond * bottom) / (spec.cond - 1.0);
    for i in 0..p {
        sigma[(i, i)] = shift;
    }

    if Cholesky::new(&sigma).is_err() {
        return Err(Error::Internal(
            "generated truth failed the positive definiteness check".into(),
        ));
    }
    let achieved_cond = (top + shift) / (bottom + shift);
    if achieved_cond > 2.0 * spec.cond || achieved_cond < 0.5 * spec.cond {
        return Err(Error::Internal(format!(
            "achieved condition number {achieved_cond:.3} strays from target {}",
            spec.cond
        )));
    }
    Ok(sigma)
}

/// Draw `n` zero-mean Gaussian samples with covariance `sigma_true`:
/// `yᵢ = L·ηᵢ` with `L` the Cholesky factor and `η` standard normal from
/// the seeded stream documented at [`GENERATOR_ID`].
pub fn sample_gaussian(sigma_true: &Array2<f64>, n: usize, seed: u64) -> Result<DataMatrix> {
    let ch = Cholesky::new(sigma_true)
        .map_err(|_| Error::NotPositiveDefinite("true covariance must be SPD".into()))?;
    let p = ch.dim();
    let l = ch.lower();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eta = Array2::<f64>::zeros((p, n));
    for k in 0..n {
        for j in 0..p {
            eta[(j, k)] = standard_normal(&mut rng);
        }
    }
    DataMatrix::new(l.dot(&eta))
}

/// `‖Σ_true − Σ̂‖_F / ‖Σ_true‖_F`.
pub fn nrmse(sigma_true: &Array2<f64>, sigma_hat: &Array2<f64>) -> Result<f64> {
    if sigma_true.dim() != sigma_hat.dim() {
        return Err(Error::InvalidInput("matrix dimensions differ".into()));
    }
    let denom = frob_norm(sigma_true);
    if denom == 0.0 {
        return Err(Error::InvalidInput("true covariance has zero norm".into()));
    }
    Ok(frob_norm(&(sigma_true - sigma_hat)) / denom)
}

/// Edge/no-edge decision counts over the off-diagonal pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    /// True edge detected.
    pub tp: usize,
    /// True zero detected.
    pub tn: usize,
    /// False alarm: zero declared an edge.
    pub fp: usize,
    /// Miss: edge declared a zero.
    pub fn_: usize,
}

/// Confusion counts and the Matthews correlation coefficient of a recovered
/// pattern against the truth. A zero factor in the MCC denominator yields 0.
pub fn confusion_and_mcc(
    z_true: &SparsityPattern,
    z_hat: &SparsityPattern,
) -> Result<(ConfusionCounts, f64)> {
    if z_true.p() != z_hat.p() {
        return Err(Error::InvalidInput("pattern dimensions differ".into()));
    }
    let p = z_true.p();
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..p {
        for j in (i + 1)..p {
            match (z_true.allows(i, j), z_hat.allows(i, j)) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
            }
        }
    }
    let counts = ConfusionCounts { tp, tn, fp, fn_ };
    let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
    let den = ((tp + fp) as f64 * (tp + fn_) as f64 * (tn + fp) as f64 * (tn + fn_) as f64)
        .sqrt();
    let mcc = if den == 0.0 { 0.0 } else { num / den };
    Ok((counts, mcc))
}

/// The estimators the experiment runner knows how to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// The raw sample covariance matrix.
    Scm,
    /// FDR screen, EBIC-selected α, block coordinate descent fit.
    BcdFdrEbic,
    /// Block coordinate descent under the true sparsity pattern.
    BcdOracle,
    /// FDR screen, EBIC-selected α, proximal distance fit.
    PdFdrEbic,
    /// Proximal distance under the true sparsity pattern.
    PdOracle,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Scm => "scm",
            Estimator::BcdFdrEbic => "bcd",
            Estimator::BcdOracle => "bcd-oracle",
            Estimator::PdFdrEbic => "pd",
            Estimator::PdOracle => "pd-oracle",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "scm" => Ok(Estimator::Scm),
            "bcd" => Ok(Estimator::BcdFdrEbic),
            "bcd-oracle" => Ok(Estimator::BcdOracle),
            "pd" => Ok(Estimator::PdFdrEbic),
            "pd-oracle" => Ok(Estimator::PdOracle),
            other => Err(Error::InvalidInput(format!(
                "unknown estimator '{other}' (expected scm, bcd, bcd-oracle, pd, pd-oracle)"
            ))),
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub p: usize,
    pub sparsity: f64,
    pub cond: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// α grid for the FDR+EBIC estimators.
    pub grid: Vec<f64>,
    pub bcd: BcdConfig,
    pub pd: PdConfig,
    /// Worker threads for independent trials; 1 = sequential.
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn new(p: usize, sparsity: f64, cond: f64, n: usize, trials: usize, seed: u64) -> Self {
        Self {
            p,
            sparsity,
            cond,
            n,
            trials,
            seed,
            estimators: vec![Estimator::Scm, Estimator::BcdFdrEbic, Estimator::BcdOracle],
            grid: crate::selection::default_alpha_grid(),
            bcd: BcdConfig::default(),
            pd: PdConfig::default(),
            jobs: 1,
        }
    }
}

/// One estimator's outcome on one trial. Failed fits carry the error text
/// and no metrics.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub estimator: &'static str,
    pub nrmse: Option<f64>,
    pub mcc: Option<f64>,
    pub objective: Option<f64>,
    pub converged: Option<bool>,
    /// Selected FDR level, for the screen-based estimators.
    pub alpha: Option<f64>,
    /// Non-zero upper-triangle off-diagonal pairs of the estimate.
    pub edges: Option<usize>,
    /// Wall-clock fit time. Excluded from the CSV export to keep it
    /// byte-reproducible; means appear in the JSON summary.
    pub runtime_s: f64,
    pub error: Option<String>,
}

/// Per-estimator mean ± standard error over the successful trials.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorSummary {
    pub estimator: &'static str,
    pub trials_ok: usize,
    pub failures: usize,
    pub nrmse_mean: f64,
    pub nrmse_stderr: f64,
    pub mcc_mean: f64,
    pub mcc_stderr: f64,
    pub objective_mean: f64,
    pub runtime_mean_s: f64,
}

/// Trial-level records plus per-estimator summaries.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub generator: &'static str,
    pub seed: u64,
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<EstimatorSummary>,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn fit_one(
    est: Estimator,
    s: &SampleCov,
    sigma_true: &Array2<f64>,
    z_true: &SparsityPattern,
    cfg: &ExperimentConfig,
) -> Result<(Array2<f64>, Option<f64>, Option<bool>, Option<f64>)> {
    match est {
        Estimator::Scm => {
            let objective = neg_log_likelihood(&s.s, s).ok();
            Ok((s.s.clone(), objective, None, None))
        }
        Estimator::BcdFdrEbic => {
            let sel = select_alpha(
                s,
                &cfg.grid,
                &FitMethod::Bcd(cfg.bcd),
                &SelectionOptions::default(),
            )?;
            Ok((
                sel.estimate.sigma.clone(),
                Some(sel.estimate.objective),
                Some(sel.estimate.converged),
                Some(sel.alpha),
            ))
        }
        Estimator::BcdOracle => {
            let fit = bcd_fit(s, z_true, &cfg.bcd, None)?;
            Ok((fit.sigma.clone(), Some(fit.objective), Some(fit.converged), None))
        }
        Estimator::PdFdrEbic => {
            let sel = select_alpha(
                s,
                &cfg.grid,
                &FitMethod::Pd(cfg.pd),
                &SelectionOptions::default(),
            )?;
            Ok((
                sel.estimate.sigma.clone(),
                Some(sel.estimate.objective),
                Some(sel.estimate.converged),
                Some(sel.alpha),
            ))
        }
        Estimator::PdOracle => {
            let fit = pd_fit(s, &PdConstraint::Pattern(z_true.clone()), &cfg.pd, None)?;
            Ok((
                fit.estimate.sigma.clone(),
                Some(fit.estimate.objective),
                Some(fit.estimate.converged),
                None,
            ))
        }
        _ => unreachable!(),
    }
    // sigma_true only participates through z_true; kept in the signature so
    // estimators that need the dense truth can be added without churn.
    .map(|out| {
        let _ = sigma_true;
        out
    })
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<TrialRecord>> {
    let truth_seed = cfg.seed.wrapping_add(trial as u64);
    let data_seed = truth_seed ^ 0x9E37_79B9_7F4A_7C15;
    let sigma_true = gen_sparse_spd(&TruthSpec {
        p: cfg.p,
        sparsity: cfg.sparsity,
        cond: cfg.cond,
        seed: truth_seed,
    })?;
    let y = sample_gaussian(&sigma_true, cfg.n, data_seed)?;
    let s = sample_covariance(&y);
    let z_true = SparsityPattern::from_indicator(&sigma_true)?;

    let mut records = Vec::with_capacity(cfg.estimators.len());
    for &est in &cfg.estimators {
        let started = Instant::now();
        let outcome = fit_one(est, &s, &sigma_true, &z_true, cfg);
        let runtime_s = started.elapsed().as_secs_f64();
        let record = match outcome {
            Ok((sigma_hat, objective, converged, alpha)) => {
                let z_hat = SparsityPattern::from_indicator(&sigma_hat)?;
                let (_, mcc) = confusion_and_mcc(&z_true, &z_hat)?;
                let edges = z_hat.edge_count();
                TrialRecord {
                    trial,
                    estimator: est.name(),
                    nrmse: Some(nrmse(&sigma_true, &sigma_hat)?),
                    mcc: Some(mcc),
                    objective,
                    converged,
                    alpha,
                    edges: Some(edges),
                    runtime_s,
                    error: None,
                }
            }
            Err(e) => TrialRecord {
                trial,
                estimator: est.name(),
                nrmse: None,
                mcc: None,
                objective: None,
                converged: None,
                alpha: None,
                edges: None,
                runtime_s,
                error: Some(e.to_string()),
            },
        };
        records.push(record);
    }
    Ok(records)
}

/// Run the trial matrix: per trial, generate a truth, sample data, fit each
/// estimator, and record NRMSE/MCC/objective/runtime.
///
/// Seeds derive per trial (`seed + trial` for the truth, xor-scrambled for
/// the data), so results are identical regardless of `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    if cfg.estimators.is_empty() {
        return Err(Error::InvalidInput("need at least one estimator".into()));
    }
    if cfg.jobs == 0 {
        return Err(Error::InvalidInput("jobs must be at least 1".into()));
    }

    let per_trial: Vec<Result<Vec<TrialRecord>>> = if cfg.jobs == 1 {
        (0..cfg.trials).map(|t| run_trial(cfg, t)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, t))
                .collect()
        })
    };

    let mut records = Vec::with_capacity(cfg.trials * cfg.estimators.len());
    for r in per_trial {
        records.extend(r?);
    }

    let mut summaries = Vec::new();
    for &est in &cfg.estimators {
        let ok: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.estimator == est.name() && r.error.is_none())
            .collect();
        let failures = cfg.trials - ok.len();
        let nrmses: Vec<f64> = ok.iter().filter_map(|r| r.nrmse).collect();
        let mccs: Vec<f64> = ok.iter().filter_map(|r| r.mcc).collect();
        let objectives: Vec<f64> = ok.iter().filter_map(|r| r.objective).collect();
        let runtimes: Vec<f64> = ok.iter().map(|r| r.runtime_s).collect();
        let (nrmse_mean, nrmse_stderr) = mean_stderr(&nrmses);
        let (mcc_mean, mcc_stderr) = mean_stderr(&mccs);
        let (objective_mean, _) = mean_stderr(&objectives);
        let (runtime_mean_s, _) = mean_stderr(&runtimes);
        summaries.push(EstimatorSummary {
            estimator: est.name(),
            trials_ok: ok.len(),
            failures,
            nrmse_mean,
            nrmse_stderr,
            mcc_mean,
            mcc_stderr,
            objective_mean,
            runtime_mean_s,
        });
    }

    Ok(ExperimentResult {
        generator: GENERATOR_ID,
        seed: cfg.seed,
        records,
        summaries,
    })
}
