//! Stage 2, method 1: block coordinate descent for the pattern-constrained
//! MLE.
//!
//! The solver cycles over all 2×2 principal blocks of `Σ`. With the rest of
//! the matrix fixed, the block problem reduces to
//! `min Tr(Θ Σ̄⁻¹) + log|Σ̄|` over the Schur complement `Σ̄ = Σ_AA − Ψ`. A
//! free block (edge allowed) has the closed-form minimizer `Σ_AA = Θ + Ψ`; a
//! constrained block (edge forbidden) pins `Σ̄₁₂ = −Ψ₁₂` and solves a cubic
//! for the diagonal. Each exact block solve keeps the full matrix positive
//! definite and never increases the objective.

use ndarray::Array2;

use crate::cubic::cubic_positive_roots;
use crate::error::{Error, Result};
use crate::fdr::SparsityPattern;
use crate::likelihood::{neg_log_likelihood, CovEstimate, SampleCov};
use crate::linalg::{frob_norm, Cholesky};

/// Symmetric 2×2 block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn zero() -> Self {
        Sym2 {
            xx: 0.0,
            xy: 0.0,
            yy: 0.0,
        }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn is_spd(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    pub fn add(&self, other: &Sym2) -> Sym2 {
        Sym2 {
            xx: self.xx + other.xx,
            xy: self.xy + other.xy,
            yy: self.yy + other.yy,
        }
    }
}

/// The per-block quantities `Φ = Σ_BB⁻¹ Σ_BA`, `Ψ = Σ_AB Φ` and
/// `Θ = S_AA − S_AB Φ − Φᵀ S_BA + Φᵀ S_BB Φ`, computed after moving the pair
/// `(u, v)` to the leading block.
#[derive(Debug, Clone)]
pub struct BlockQuantities {
    pub phi: Array2<f64>,
    pub psi: Sym2,
    pub theta: Sym2,
}

/// Compute the block quantities for the pair `(u, v)` of the current iterate.
///
/// `Σ_BB` is factored fresh each call (no incremental inverse maintenance);
/// a failed factorization means a positive definiteness invariant broke
/// upstream and is reported as an internal error. For `p = 2` the B-block is
/// empty and the convention is `Φ = 0`, `Ψ = 0`, `Θ = S`.
pub fn block_quantities(
    sigma: &Array2<f64>,
    s: &SampleCov,
    u: usize,
    v: usize,
) -> Result<BlockQuantities> {
    let p = sigma.nrows();
    if u >= v || v >= p {
        return Err(Error::InvalidInput(format!(
            "block indices must satisfy u < v < p, got ({u},{v}) with p={p}"
        )));
    }
    if s.p() != p {
        return Err(Error::InvalidInput("sigma and S dimensions differ".into()));
    }
    if p == 2 {
        return Ok(BlockQuantities {
            phi: Array2::zeros((0, 2)),
            psi: Sym2::zero(),
            theta: Sym2 {
                xx: s.s[(0, 0)],
                xy: s.s[(0, 1)],
                yy: s.s[(1, 1)],
            },
        });
    }

    let b_idx: Vec<usize> = (0..p).filter(|&k| k != u && k != v).collect();
    let q = p - 2;
    let mut sigma_bb = Array2::<f64>::zeros((q, q));
    let mut sigma_ba = Array2::<f64>::zeros((q, 2));
    let mut s_bb = Array2::<f64>::zeros((q, q));
    let mut s_ba = Array2::<f64>::zeros((q, 2));
    for (r, &i) in b_idx.iter().enumerate() {
        for (c, &j) in b_idx.iter().enumerate() {
            sigma_bb[(r, c)] = sigma[(i, j)];
            s_bb[(r, c)] = s.s[(i, j)];
        }
        sigma_ba[(r, 0)] = sigma[(i, u)];
        sigma_ba[(r, 1)] = sigma[(i, v)];
        s_ba[(r, 0)] = s.s[(i, u)];
        s_ba[(r, 1)] = s.s[(i, v)];
    }

    let ch = Cholesky::new(&sigma_bb).map_err(|e| {
        Error::Internal(format!(
            "Σ_BB lost positive definiteness at block ({u},{v}): {e}"
        ))
    })?;
    let phi = ch.solve_mat(&sigma_ba);

    let psi_mat = sigma_ba.t().dot(&phi);
    let psi = Sym2 {
        xx: psi_mat[(0, 0)],
        xy: 0.5 * (psi_mat[(0, 1)] + psi_mat[(1, 0)]),
        yy: psi_mat[(1, 1)],
    };

    let t1 = s_ba.t().dot(&phi); // S_AB Φ
    let t3 = phi.t().dot(&s_bb.dot(&phi)); // Φᵀ S_BB Φ
    let theta = Sym2 {
        xx: s.s[(u, u)] - 2.0 * t1[(0, 0)] + t3[(0, 0)],
        xy: s.s[(u, v)] - t1[(0, 1)] - t1[(1, 0)] + 0.5 * (t3[(0, 1)] + t3[(1, 0)]),
        yy: s.s[(v, v)] - 2.0 * t1[(1, 1)] + t3[(1, 1)],
    };

    Ok(BlockQuantities { phi, psi, theta })
}

/// Unconstrained block minimizer `Σ_AA = Θ + Ψ`.
pub fn free_block_update(q: &BlockQuantities) -> Sym2 {
    q.theta.add(&q.psi)
}

/// Reduced block objective for the pinned off-diagonal `Σ̄₁₂ = −Ψ₁₂`:
/// `(Θ₁₁ Σ̄₂₂ + 2Θ₁₂Ψ₁₂ + Θ₂₂ Σ̄₁₁)/det(Σ̄) + log det(Σ̄)`.
fn constrained_objective(theta: &Sym2, psi12: f64, s11: f64, s22: f64) -> f64 {
    let det = s11 * s22 - psi12 * psi12;
    (theta.xx * s22 + 2.0 * theta.xy * psi12 + theta.yy * s11) / det + det.ln()
}

/// Constrained block minimizer for a forbidden edge.
///
/// Pins `Σ̄₁₂ = −Ψ₁₂`, solves the stationarity cubic
/// `Θ₂₂λ³ − Θ₂₂Θ₁₁λ² − Θ₁₁(Ψ₁₂² + 2Θ₁₂Ψ₁₂)λ − Ψ₁₂²Θ₁₁² = 0` for
/// `λ = Σ̄₁₁`, takes `Σ̄₂₂ = (Θ₂₂/Θ₁₁)λ`, keeps the objective-minimizing
/// positive definite root (ties toward the largest root), and returns
/// `Σ̄ + Ψ` — a diagonal block whose off-diagonal is an exact zero.
pub fn constrained_block_update(q: &BlockQuantities) -> Result<Sym2> {
    let th = q.theta;
    let psi12 = q.psi.xy;
    if !(th.xx > 0.0) || !(th.yy > 1e-14 * th.xx) {
        return Err(Error::Internal(format!(
            "degenerate Θ block (Θ₁₁={:.3e}, Θ₂₂={:.3e})",
            th.xx, th.yy
        )));
    }
    let c3 = th.yy;
    let c2 = -th.yy * th.xx;
    let c1 = -th.xx * (psi12 * psi12 + 2.0 * th.xy * psi12);
    let c0 = -psi12 * psi12 * th.xx * th.xx;
    let ratio = th.yy / th.xx;

    let mut best: Option<(f64, f64)> = None; // (objective, λ)
    for lambda in cubic_positive_roots(c3, c2, c1, c0) {
        let s11 = lambda;
        let s22 = ratio * lambda;
        if s11 * s22 - psi12 * psi12 <= 0.0 {
            continue;
        }
        let obj = constrained_objective(&th, psi12, s11, s22);
        let take = match best {
            None => true,
            // Roots arrive ascending, so on a tie the larger root wins.
            Some((best_obj, _)) => obj <= best_obj + 1e-12,
        };
        if take {
            best = Some((obj, lambda));
        }
    }
    let (_, lambda) = best.ok_or_else(|| {
        Error::Internal("constrained block update found no positive definite root".into())
    })?;
    Ok(Sym2 {
        xx: lambda + q.psi.xx,
        xy: 0.0,
        yy: ratio * lambda + q.psi.yy,
    })
}

/// Block coordinate descent configuration.
#[derive(Debug, Clone, Copy)]
pub struct BcdConfig {
    /// Relative Frobenius change between consecutive sweeps that stops the
    /// iteration.
    pub epsilon: f64,
    /// Hard cap on full sweeps; exceeding it returns the current iterate
    /// flagged `converged = false`.
    pub max_sweeps: usize,
    /// Seed for [`random_init`].
    pub seed: u64,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-7,
            max_sweeps: 500,
            seed: 0,
        }
    }
}

fn spd_repair(mut sigma: Array2<f64>, s: &SampleCov) -> Result<Array2<f64>> {
    if Cholesky::new(&sigma).is_ok() {
        return Ok(sigma);
    }
    let p = s.p();
    let trace: f64 = s.s.diag().sum();
    if !(trace > 0.0) {
        return Err(Error::NotPositiveDefinite(
            "sample covariance has a non-positive trace; cannot build an initial iterate".into(),
        ));
    }
    let mut tau = 1e-8 * trace / p as f64;
    for _ in 0..200 {
        for i in 0..p {
            sigma[(i, i)] += tau;
        }
        if Cholesky::new(&sigma).is_ok() {
            return Ok(sigma);
        }
        tau *= 2.0;
    }
    Err(Error::NotPositiveDefinite(
        "initial iterate could not be repaired to positive definiteness".into(),
    ))
}

/// Deterministic default start: `diag(S)` plus pattern-masked shrunken
/// off-diagonals `0.1·S_ij·Z_ij`, diagonally shifted until positive definite.
pub fn default_init(s: &SampleCov, z: &SparsityPattern) -> Result<Array2<f64>> {
    let p = s.p();
    let mut sigma = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        sigma[(i, i)] = s.s[(i, i)];
    }
    for i in 0..p {
        for j in (i + 1)..p {
            if z.allows(i, j) {
                let v = 0.1 * s.s[(i, j)];
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }
    }
    spd_repair(sigma, s)
}

/// Seeded random positive definite start satisfying the sparsity constraint.
pub fn random_init(s: &SampleCov, z: &SparsityPattern, seed: u64) -> Result<Array2<f64>> {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let p = s.p();
    let mut sigma = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        sigma[(i, i)] = s.s[(i, i)].max(1e-12);
    }
    for i in 0..p {
        for j in (i + 1)..p {
            if z.allows(i, j) {
                let scale = (sigma[(i, i)] * sigma[(j, j)]).sqrt();
                let v = (rng.random::<f64>() * 0.2 - 0.1) * scale;
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }
    }
    spd_repair(sigma, s)
}

fn check_start(sigma0: &Array2<f64>, z: &SparsityPattern, p: usize) -> Result<()> {
    if sigma0.nrows() != p || sigma0.ncols() != p {
        return Err(Error::InvalidInput(
            "initial iterate has the wrong dimensions".into(),
        ));
    }
    Cholesky::new(sigma0)
        .map_err(|_| Error::InvalidInput("initial iterate is not positive definite".into()))?;
    for i in 0..p {
        for j in (i + 1)..p {
            if sigma0[(i, j)] != 0.0 && !z.allows(i, j) {
                return Err(Error::InvalidInput(format!(
                    "initial iterate violates the sparsity pattern at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Pattern-constrained MLE by cyclic block coordinate descent.
///
/// Sweeps the pairs `(u, v)` for `u = 1..p−1`, `v = u+1..p`, applying the
/// free or constrained block update as dictated by `Z`, and stops when the
/// relative Frobenius change of a full sweep drops below `cfg.epsilon`.
/// Entries with `Z_ij = 0` are exact zeros in the result.
pub fn bcd_fit(
    s: &SampleCov,
    z: &SparsityPattern,
    cfg: &BcdConfig,
    sigma0: Option<&Array2<f64>>,
) -> Result<CovEstimate> {
    let p = s.p();
    if p < 2 {
        return Err(Error::InvalidInput("need at least 2 variables".into()));
    }
    if z.p() != p {
        return Err(Error::InvalidInput(
            "pattern and covariance dimensions differ".into(),
        ));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let mut sigma = match sigma0 {
        Some(start) => {
            check_start(start, z, p)?;
            start.clone()
        }
        None => default_init(s, z)?,
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        let sigma_prev = sigma.clone();
        for u in 0..p - 1 {
            for v in (u + 1)..p {
                let q = block_quantities(&sigma, s, u, v)?;
                let block = if z.allows(u, v) {
                    free_block_update(&q)
                } else {
                    constrained_block_update(&q)?
                };
                sigma[(u, u)] = block.xx;
                sigma[(v, v)] = block.yy;
                sigma[(u, v)] = block.xy;
                sigma[(v, u)] = block.xy;
            }
        }
        sweeps += 1;
        trace.push(neg_log_likelihood(&sigma, s)?);
        let diff = frob_norm(&(&sigma - &sigma_prev));
        if diff < cfg.epsilon * frob_norm(&sigma_prev) {
            converged = true;
            break;
        }
    }

    let objective = match trace.last() {
        Some(&obj) => obj,
        None => neg_log_likelihood(&sigma, s)?,
    };
    Ok(CovEstimate {
        sigma,
        objective,
        iterations: sweeps,
        converged,
        objective_trace: trace,
    })
}

fn count_offdiag_nonzeros(sigma: &Array2<f64>) -> usize {
    let p = sigma.nrows();
    let mut count = 0;
    for i in 0..p {
        for j in 0..p {
            if i != j && sigma[(i, j)] != 0.0 {
                count += 1;
            }
        }
    }
    count
}

/// ℓ₀-penalized block update: evaluates both the constrained (zero
/// off-diagonal) and free candidates and keeps the one with the lower value
/// of `f(Σ) + λ·‖Σ‖₀`, where `‖Σ‖₀` counts non-zero off-diagonal elements.
///
/// `sigma` is the current full iterate and `(u, v)` locates the block so the
/// penalized objective can be evaluated on the whole matrix.
pub fn l0_block_update(
    q: &BlockQuantities,
    lambda: f64,
    s: &SampleCov,
    sigma: &Array2<f64>,
    u: usize,
    v: usize,
) -> Result<Sym2> {
    if lambda < 0.0 {
        return Err(Error::InvalidInput("ℓ₀ penalty must be non-negative".into()));
    }
    let free = free_block_update(q);
    let constrained = constrained_block_update(q)?;
    let penalized = |block: &Sym2| -> Result<f64> {
        let mut cand = sigma.clone();
        cand[(u, u)] = block.xx;
        cand[(v, v)] = block.yy;
        cand[(u, v)] = block.xy;
        cand[(v, u)] = block.xy;
        let f = neg_log_likelihood(&cand, s)?;
        Ok(f + lambda * count_offdiag_nonzeros(&cand) as f64)
    };
    let free_obj = penalized(&free)?;
    let cons_obj = penalized(&constrained)?;
    Ok(if free_obj <= cons_obj { free } else { constrained })
}

/// ℓ₀-penalized covariance fit: the same cyclic sweep as [`bcd_fit`] with
/// every block decided by [`l0_block_update`]. Needs no sparsity pattern.
///
/// The objective trace holds the penalized objective per sweep; the returned
/// `objective` is the unpenalized `f(Σ̂)`.
pub fn bcd_fit_l0(
    s: &SampleCov,
    lambda: f64,
    cfg: &BcdConfig,
    sigma0: Option<&Array2<f64>>,
) -> Result<CovEstimate> {
    let p = s.p();
    if p < 2 {
        return Err(Error::InvalidInput("need at least 2 variables".into()));
    }
    let mut sigma = match sigma0 {
        Some(start) => {
            Cholesky::new(start).map_err(|_| {
                Error::InvalidInput("initial iterate is not positive definite".into())
            })?;
            start.clone()
        }
        None => {
            let mut d = Array2::<f64>::zeros((p, p));
            for i in 0..p {
                d[(i, i)] = s.s[(i, i)];
            }
            spd_repair(d, s)?
        }
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        let sigma_prev = sigma.clone();
        for u in 0..p - 1 {
            for v in (u + 1)..p {
                let q = block_quantities(&sigma, s, u, v)?;
                let block = l0_block_update(&q, lambda, s, &sigma, u, v)?;
                sigma[(u, u)] = block.xx;
                sigma[(v, v)] = block.yy;
                sigma[(u, v)] = block.xy;
                sigma[(v, u)] = block.xy;
            }
        }
        sweeps += 1;
        let f = neg_log_likelihood(&sigma, s)?;
        trace.push(f + lambda * count_offdiag_nonzeros(&sigma) as f64);
        let diff = frob_norm(&(&sigma - &sigma_prev));
        if diff < cfg.epsilon * frob_norm(&sigma_prev) {
            converged = true;
            break;
        }
    }

    let objective = neg_log_likelihood(&sigma, s)?;
    Ok(CovEstimate {
        sigma,
        objective,
        iterations: sweeps,
        converged,
        objective_trace: trace,
    })
}
