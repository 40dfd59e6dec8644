//! Student's t distribution: density, survival function and upper quantile.
//!
//! The survival function is evaluated through the regularized incomplete beta
//! function (Lentz continued fraction); the quantile inverts it with
//! safeguarded Newton inside a bisection bracket.

use crate::error::{Error, Result};

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π/sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cont_frac(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cont_frac(a, b, x) / a
    } else {
        1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b
    }
}

/// Density of Student's t with `dof` degrees of freedom.
pub fn t_pdf(t: f64, dof: f64) -> f64 {
    let ln_c = ln_gamma(0.5 * (dof + 1.0))
        - ln_gamma(0.5 * dof)
        - 0.5 * (dof * std::f64::consts::PI).ln();
    (ln_c - 0.5 * (dof + 1.0) * (1.0 + t * t / dof).ln()).exp()
}

/// Survival function `P(T ≥ t)`.
pub fn t_sf(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let x = dof / (dof + t * t);
    let half_tail = 0.5 * reg_inc_beta(0.5 * dof, 0.5, x);
    if t >= 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

/// Cumulative distribution `P(T ≤ t)`.
pub fn t_cdf(t: f64, dof: f64) -> f64 {
    1.0 - t_sf(t, dof)
}

/// Upper quantile: the `q` with `P(T ≥ q) = prob` under Student-t(`dof`).
///
/// Absolute accuracy is better than 1e-10 over the ranges used by the FDR
/// screen (the solver runs Newton to machine precision inside a bisection
/// bracket).
pub fn student_t_upper_quantile(prob: f64, dof: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidInput(format!(
            "tail probability must lie in (0,1), got {prob}"
        )));
    }
    if !(dof >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "degrees of freedom must be at least 1, got {dof}"
        )));
    }
    if prob == 0.5 {
        return Ok(0.0);
    }
    if prob > 0.5 {
        return Ok(-student_t_upper_quantile(1.0 - prob, dof)?);
    }

    // Bracket the root of SF(q) − prob on [lo, hi] with SF(lo) ≥ prob ≥ SF(hi).
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while t_sf(hi, dof) > prob {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Internal("t quantile bracket overflow".into()));
        }
    }
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if t_sf(mid, dof) > prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Safeguarded Newton: SF'(q) = −pdf(q).
    let mut q = 0.5 * (lo + hi);
    for _ in 0..60 {
        let f = t_sf(q, dof) - prob;
        if f > 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        let d = t_pdf(q, dof);
        let mut next = if d > 0.0 { q + f / d } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - q).abs() <= 1e-13 * q.abs().max(1.0) {
            q = next;
            break;
        }
        q = next;
    }
    Ok(q)
}
