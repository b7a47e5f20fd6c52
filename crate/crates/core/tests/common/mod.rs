#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_policy::expert::QuadraticCost;
use robust_policy::state_space::LinearSystem;
use robust_policy::Matrix64;

pub fn to_na(m: &Matrix64) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix64 {
    Matrix64::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix64 {
    Matrix64::from_fn(rows, cols, |_, _| {
        // Box-Muller keeps the oracle independent of the crate's samplers
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        scale * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

/// Random LQ instance with `n ≤ 4`, `m ≤ 2`, `Q, R ≻ 0` and a small cross term.
pub fn random_instance(seed: u64, gamma: f64) -> (LinearSystem<f64>, QuadraticCost<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=2);
    let a = gaussian(&mut rng, n, n, 0.6);
    let b = gaussian(&mut rng, n, m, 1.0);
    let lq = gaussian(&mut rng, n, n, 1.0);
    let lr = gaussian(&mut rng, m, m, 1.0);
    let q = &(&lq * &lq.transpose()) + &Matrix64::identity(n).scale(0.5);
    let r = &(&lr * &lr.transpose()) + &Matrix64::identity(m).scale(0.5);
    let w = gaussian(&mut rng, n, m, 0.1);
    let sys = LinearSystem::new(a, b).unwrap();
    let cost = QuadraticCost::new(q, Some(w), r, gamma).unwrap();
    (sys, cost)
}

pub fn benchmark(gamma: f64) -> (LinearSystem<f64>, QuadraticCost<f64>) {
    (
        LinearSystem::vehicle(1.0),
        QuadraticCost::diagonal(&[1.0, 0.01, 1.0, 0.01], 0.01, 2, gamma).unwrap(),
    )
}

/// Plain discounted value iteration, `steps` sweeps from `P = 0`.
pub fn lqr_value_iteration(sys: &LinearSystem<f64>, cost: &QuadraticCost<f64>, steps: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (a, b) = (to_na(sys.a()), to_na(sys.b()));
    let (q, w, r) = (to_na(cost.q()), to_na(cost.w()), to_na(cost.r()));
    let g = cost.gamma();
    let mut p = DMatrix::zeros(a.nrows(), a.nrows());
    let mut k = DMatrix::zeros(b.ncols(), a.nrows());
    for _ in 0..steps {
        let lhs = &r + g * b.transpose() * &p * &b;
        let rhs = g * b.transpose() * &p * &a + w.transpose();
        k = lhs.lu().solve(&rhs).expect("R + γBᵀPB is invertible");
        let acl = &a - &b * &k;
        let ck = &q - &w * &k - k.transpose() * w.transpose() + k.transpose() * &r * &k;
        p = ck + g * acl.transpose() * &p * &acl;
        p = (&p + p.transpose()) * 0.5;
    }
    (k, p)
}

/// `vec(P) = (I - γ Aclᵀ ⊗ Aclᵀ)⁻¹ vec(C)`.
pub fn lyapunov_kron(acl: &DMatrix<f64>, c: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let n = acl.nrows();
    let at = acl.transpose();
    let lhs = DMatrix::identity(n * n, n * n) - at.kronecker(&at) * gamma;
    let rhs = DMatrix::from_column_slice(n * n, 1, c.as_slice());
    let sol = lhs.lu().solve(&rhs).expect("nonsingular Kronecker system");
    DMatrix::from_column_slice(n, n, sol.as_slice())
}

pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}
