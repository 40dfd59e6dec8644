//! Dense symmetric linear algebra: Cholesky factorization, cyclic Jacobi
//! eigendecomposition, and the small helpers the solvers share.
//!
//! Everything here is self-contained scalar code. The matrices this crate
//! handles are dense and small (p up to a few hundred), where a tight
//! Cholesky and a cyclic Jacobi sweep are accurate and fast enough that an
//! external LAPACK binding would buy nothing.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
pub const SYM_REL_TOL: f64 = 1e-12;

/// Off-diagonal Frobenius target for Jacobi convergence, relative to `‖A‖_F`.
const JACOBI_REL_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 64;

pub fn frob_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn check_finite(a: &Array2<f64>, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Largest `|a_ij − a_ji|` scaled by the largest entry magnitude.
pub fn relative_asymmetry(a: &Array2<f64>) -> f64 {
    let p = a.nrows();
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in (i + 1)..p {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn ensure_symmetric(a: &Array2<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asym = relative_asymmetry(a);
    if asym > SYM_REL_TOL {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tol: SYM_REL_TOL,
        });
    }
    Ok(())
}

/// Replace `a` with `(a + aᵀ)/2`, writing both mirror entries together so the
/// result is symmetric to the last bit.
pub fn symmetrize(a: &mut Array2<f64>) {
    let p = a.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Cholesky factorization `A = LLᵀ` of a symmetric positive definite matrix.
///
/// Positive definiteness is defined operationally: the factorization succeeds
/// with strictly positive finite pivots. `L` is stored row-major so the inner
/// update loops run over contiguous slices.
pub struct Cholesky {
    l: Vec<f64>,
    p: usize,
}

impl Cholesky {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let p = a.nrows();
        if p != a.ncols() {
            return Err(Error::InvalidInput(format!(
                "cannot factor a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        check_finite(a, "Cholesky input")?;
        let mut l = vec![0.0_f64; p * p];
        for i in 0..p {
            for j in 0..=i {
                let (head, tail) = l.split_at_mut(i * p);
                let row_i = &mut tail[..p];
                let (dot, pivot): (f64, f64) = if i == j {
                    let d = row_i[..j].iter().map(|x| x * x).sum();
                    (d, 0.0)
                } else {
                    let row_j = &head[j * p..j * p + j + 1];
                    let d = row_i[..j]
                        .iter()
                        .zip(row_j.iter())
                        .map(|(x, y)| x * y)
                        .sum();
                    (d, row_j[j])
                };
                if i == j {
                    let d = a[(i, i)] - dot;
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(Error::NotPositiveDefinite(format!(
                            "pivot {d:.6e} at index {i}"
                        )));
                    }
                    row_i[i] = d.sqrt();
                } else {
                    row_i[j] = (a[(i, j)] - dot) / pivot;
                }
            }
        }
        Ok(Self { l, p })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.p).map(|i| self.l[i * self.p + i].ln()).sum::<f64>() * 2.0
    }

    /// Solve `A x = b` by forward then backward substitution.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let p = self.p;
        assert_eq!(b.len(), p, "right-hand side length mismatch");
        let mut x = b.to_vec();
        // L y = b
        for i in 0..p {
            let row = &self.l[i * p..i * p + i];
            let dot: f64 = row.iter().zip(x[..i].iter()).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - dot) / self.l[i * p + i];
        }
        // Lᵀ x = y
        for i in (0..p).rev() {
            let mut acc = x[i];
            for k in (i + 1)..p {
                acc -= self.l[k * p + i] * x[k];
            }
            x[i] = acc / self.l[i * p + i];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &Array2<f64>) -> Array2<f64> {
        let p = self.p;
        assert_eq!(b.nrows(), p, "right-hand side row count mismatch");
        let mut out = Array2::<f64>::zeros((p, b.ncols()));
        let mut col = vec![0.0_f64; p];
        for j in 0..b.ncols() {
            for i in 0..p {
                col[i] = b[(i, j)];
            }
            let x = self.solve_vec(&col);
            for i in 0..p {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    /// `A⁻¹`, symmetrized.
    pub fn inverse(&self) -> Array2<f64> {
        let p = self.p;
        let mut inv = self.solve_mat(&Array2::eye(p));
        symmetrize(&mut inv);
        inv
    }

    /// `Tr(A⁻¹ S)` without forming the inverse.
    pub fn trace_solve(&self, s: &Array2<f64>) -> f64 {
        let p = self.p;
        assert_eq!(s.nrows(), p, "trace operand dimension mismatch");
        let mut col = vec![0.0_f64; p];
        let mut tr = 0.0;
        for j in 0..p {
            for i in 0..p {
                col[i] = s[(i, j)];
            }
            tr += self.solve_vec(&col)[j];
        }
        tr
    }

    /// The lower-triangular factor as a dense matrix.
    pub fn lower(&self) -> Array2<f64> {
        let p = self.p;
        let mut out = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            for j in 0..=i {
                out[(i, j)] = self.l[i * p + j];
            }
        }
        out
    }
}

/// True when the Cholesky factorization succeeds.
pub fn is_spd(a: &Array2<f64>) -> bool {
    Cholesky::new(a).is_ok()
}

/// Eigendecomposition `A = V E Vᵀ` of a symmetric matrix via cyclic Jacobi.
///
/// Eigenvalues are returned in descending order with the matching eigenvectors
/// as the columns of `V`. Sweeps continue until the off-diagonal Frobenius
/// norm drops below `1e-12 · ‖A‖_F`.
pub fn sym_eigendecomposition(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    check_finite(a, "eigendecomposition input")?;
    ensure_symmetric(a)?;
    let p = a.nrows();
    // Work on an exactly symmetric copy.
    let mut m = vec![0.0_f64; p * p];
    for i in 0..p {
        for j in 0..p {
            m[i * p + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = JACOBI_REL_TOL * norm;
    let mut v = vec![0.0_f64; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }

    if p > 1 {
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = {
                let mut acc = 0.0;
                for i in 0..p {
                    for j in (i + 1)..p {
                        let x = m[i * p + j];
                        acc += 2.0 * x * x;
                    }
                }
                acc.sqrt()
            };
            if off <= tol {
                converged = true;
                break;
            }
            for r in 0..(p - 1) {
                for c in (r + 1)..p {
                    let apq = m[r * p + c];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m[r * p + r];
                    let aqq = m[c * p + c];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta.abs() > 1e100 {
                        1.0 / (2.0 * theta)
                    } else {
                        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let cos = 1.0 / (t * t + 1.0).sqrt();
                    let sin = t * cos;
                    // Rotate rows/columns r and c of m.
                    for k in 0..p {
                        if k == r || k == c {
                            continue;
                        }
                        let akp = m[k * p + r];
                        let akq = m[k * p + c];
                        let nkp = cos * akp - sin * akq;
                        let nkq = sin * akp + cos * akq;
                        m[k * p + r] = nkp;
                        m[r * p + k] = nkp;
                        m[k * p + c] = nkq;
                        m[c * p + k] = nkq;
                    }
                    m[r * p + r] = app - t * apq;
                    m[c * p + c] = aqq + t * apq;
                    m[r * p + c] = 0.0;
                    m[c * p + r] = 0.0;
                    // Accumulate the rotation into v (columns r, c).
                    for k in 0..p {
                        let vkp = v[k * p + r];
                        let vkq = v[k * p + c];
                        v[k * p + r] = cos * vkp - sin * vkq;
                        v[k * p + c] = sin * vkp + cos * vkq;
                    }
                }
            }
        }
        if !converged {
            // Final check after the last sweep.
            let off: f64 = {
                let mut acc = 0.0;
                for i in 0..p {
                    for j in (i + 1)..p {
                        let x = m[i * p + j];
                        acc += 2.0 * x * x;
                    }
                }
                acc.sqrt()
            };
            if off > tol {
                return Err(Error::Internal(format!(
                    "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps \
                     (off-diagonal {off:.3e} vs target {tol:.3e})"
                )));
            }
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| m[j * p + j].total_cmp(&m[i * p + i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[i * p + i]).collect();
    let mut vectors = Array2::<f64>::zeros((p, p));
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..p {
            vectors[(k, new_col)] = v[k * p + old_col];
        }
    }
    Ok((eigenvalues, vectors))
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
///
/// Uses the full Jacobi decomposition up to p = 200 and power iteration with
/// a small safety inflation beyond that.
pub fn largest_eigenvalue(a: &Array2<f64>) -> Result<f64> {
    let p = a.nrows();
    if p <= 200 {
        let (eigs, _) = sym_eigendecomposition(a)?;
        return Ok(eigs[0]);
    }
    check_finite(a, "largest_eigenvalue input")?;
    let mut x: Vec<f64> = (0..p).map(|i| 1.0 + (i as f64) * 1e-6).collect();
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= nrm);
    let mut lambda = 0.0_f64;
    for _ in 0..5000 {
        let mut y = vec![0.0_f64; p];
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                acc += a[(i, j)] * x[j];
            }
            y[i] = acc;
        }
        let next: f64 = x.iter().zip(y.iter()).map(|(u, v)| u * v).sum();
        let ynrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ynrm == 0.0 {
            return Ok(0.0);
        }
        y.iter_mut().for_each(|v| *v /= ynrm);
        x = y;
        if (next - lambda).abs() <= 1e-13 * next.abs().max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // Power iteration approaches the top eigenvalue from below; pad so the
    // result still dominates every Rayleigh quotient.
    Ok(lambda * (1.0 + 1e-9))
}
