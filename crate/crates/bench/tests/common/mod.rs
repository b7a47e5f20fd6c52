#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_policy::expert::QuadraticCost;
use robust_policy::state_space::LinearSystem;
use robust_policy::Matrix64;
use robust_policy_bench::{load_config, ExperimentConfig};

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn benchmark_config_path() -> PathBuf {
    workspace_root().join("configs/benchmark.json")
}

/// The shipped benchmark config, redirected to `out`.
pub fn benchmark_config(out: &Path) -> ExperimentConfig {
    let mut cfg = load_config(&benchmark_config_path()).expect("shipped config parses");
    cfg.output_dir = out.to_path_buf();
    cfg
}

pub fn write_config(dir: &Path, name: &str, value: &serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

pub fn benchmark_json() -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(benchmark_config_path()).unwrap()).unwrap()
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-policy"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn to_na(m: &Matrix64) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix64 {
    Matrix64::from_fn(rows, cols, |_, _| {
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        scale * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

/// Random LQ instance with `n ≤ 4`, `m ≤ 2`, `Q, R ≻ 0` and a small cross term.
pub fn random_instance(seed: u64, a_scale: f64, gamma: f64) -> (LinearSystem<f64>, QuadraticCost<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4);
    let m = rng.random_range(1..=2);
    let a = gaussian(&mut rng, n, n, a_scale);
    let b = gaussian(&mut rng, n, m, 1.0);
    let lq = gaussian(&mut rng, n, n, 1.0);
    let lr = gaussian(&mut rng, m, m, 1.0);
    let q = &(&lq * &lq.transpose()) + &Matrix64::identity(n).scale(0.5);
    let r = &(&lr * &lr.transpose()) + &Matrix64::identity(m).scale(0.5);
    let w = gaussian(&mut rng, n, m, 0.1);
    (
        LinearSystem::new(a, b).unwrap(),
        QuadraticCost::new(q, Some(w), r, gamma).unwrap(),
    )
}

/// Controllability matrix rank test, `[B, AB, …, Aⁿ⁻¹B]`.
pub fn controllable(sys: &LinearSystem<f64>) -> bool {
    let a = to_na(sys.a());
    let b = to_na(sys.b());
    let n = a.nrows();
    let mut blocks = Vec::with_capacity(n);
    let mut cur = b.clone();
    for _ in 0..n {
        blocks.push(cur.clone());
        cur = &a * cur;
    }
    let c = DMatrix::from_fn(n, n * b.ncols(), |i, j| blocks[j / b.ncols()][(i, j % b.ncols())]);
    c.rank(1e-8) == n
}

/// Plain discounted value iteration, `steps` sweeps from `P = 0`.
pub fn lqr_value_iteration(sys: &LinearSystem<f64>, cost: &QuadraticCost<f64>, steps: usize) -> DMatrix<f64> {
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
    k
}

/// Parses a CSV produced by the tool into header and rows of cells.
pub fn read_csv(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::ReaderBuilder::new().from_reader(bytes);
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}
