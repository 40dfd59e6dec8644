//! Real roots of cubic polynomials.
//!
//! Closed-form (Cardano / trigonometric) roots polished by a few Newton
//! steps. Both solvers reduce their block updates to a cubic: the
//! constrained 2×2 update and the per-eigenvalue update of the proximal
//! distance step.

/// All real roots of `c3·λ³ + c2·λ² + c1·λ + c0`, ascending, deduplicated.
pub fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    assert!(c3 != 0.0, "leading coefficient must be non-zero");
    // Monic form λ³ + aλ² + bλ + c.
    let a = c2 / c3;
    let b = c1 / c3;
    let c = c0 / c3;
    // Depressed form t³ + pt + q with λ = t − a/3.
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = 0.25 * q * q + p * p * p / 27.0;

    let mut roots: Vec<f64> = Vec::with_capacity(3);
    if disc > 0.0 {
        // One real root; avoid cancellation in the Cardano branch.
        let s = disc.sqrt();
        let u = if q <= 0.0 {
            (-0.5 * q + s).cbrt()
        } else {
            -(0.5 * q + s).cbrt()
        };
        let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
        roots.push(u + v + shift);
    } else if p == 0.0 {
        // p = 0 and disc ≤ 0 force q = 0: triple root.
        roots.push(shift);
    } else {
        // Three real roots (possibly repeated).
        let m = 2.0 * (-p / 3.0).sqrt();
        let cos_phi = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = cos_phi.acos();
        for k in 0..3 {
            let t = m * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
            roots.push(t + shift);
        }
    }

    // Newton polish on the monic cubic.
    for r in roots.iter_mut() {
        for _ in 0..6 {
            let f = ((*r + a) * *r + b) * *r + c;
            let df = (3.0 * *r + 2.0 * a) * *r + b;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            *r -= step;
            if step.abs() <= 1e-15 * r.abs().max(1.0) {
                break;
            }
        }
    }

    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * x.abs().max(1.0));
    roots
}

/// The strictly positive real roots, ascending.
pub fn cubic_positive_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    cubic_real_roots(c3, c2, c1, c0)
        .into_iter()
        .filter(|&r| r > 0.0)
        .collect()
}
