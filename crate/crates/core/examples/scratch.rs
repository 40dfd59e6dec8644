use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sparsecov::likelihood::{sample_covariance, DataMatrix};
use sparsecov::linalg::frob_norm;
use sparsecov::pd::{pd_fit, PdConfig, PdConstraint};
use sparsecov::SparsityPattern;

fn main() {
    for seed in [1u64, 7, 13, 42, 99] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, n) = (20, 100);
        let mut y = Array2::<f64>::zeros((p, n));
        y.mapv_inplace(|_| rng.random::<f64>() * 2.0 - 1.0);
        let s = sample_covariance(&DataMatrix::new(y).unwrap());
        let mut diag = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            diag[(i, i)] = s.s[(i, i)];
        }
        for (zeta, spl) in [(1.005f64, 3usize), (1.005, 5)] {
            let cfg = PdConfig { zeta, steps_per_level: spl, epsilon: 1e-8, max_iters: 60000, rho_fixed: None };
            let fit = pd_fit(&s, &PdConstraint::Pattern(SparsityPattern::diagonal(p)), &cfg, None).unwrap();
            let err = frob_norm(&(&fit.estimate.sigma - &diag)) / frob_norm(&diag);
            println!("seed={seed} zeta={zeta} spl={spl} iters={} err={err:.3e}", fit.estimate.iterations);
        }
    }
}
