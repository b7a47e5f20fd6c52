//! Discrete-time plants, linear feedback, perturbed closed-loop rollouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, norm, scale_vec, sub_vec, Matrix};
use crate::scalar::Scalar;

pub use crate::linalg::spectral_norm;

/// A discrete-time plant `x_{t+1} = f(x_t, u_t)`.
pub trait Dynamics<T: Scalar> {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn step(&self, x: &[T], u: &[T]) -> Result<Vec<T>>;
}

/// Linear plant `f(x, u) = A x + B u`, which fixes the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem<T> {
    a: Matrix<T>,
    b: Matrix<T>,
}

impl<T: Scalar> LinearSystem<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument(format!(
                "A must be square, got {:?}",
                a.shape()
            )));
        }
        if b.rows() != a.rows() || b.cols() == 0 || a.rows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "B must be {}xm with m >= 1, got {:?}",
                a.rows(),
                b.shape()
            )));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument("system matrices must be finite".into()));
        }
        Ok(Self { a, b })
    }

    /// The planar vehicle: two decoupled double integrators sampled every
    /// `ts`, state `(p_x, v_x, p_y, v_y)`, input `(a_x, a_y)`.
    pub fn vehicle(ts: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        let a = Matrix::from_row_slice(
            4,
            4,
            &[o, ts, z, z, z, o, z, z, z, z, o, ts, z, z, z, o],
        )
        .expect("4x4");
        let b = Matrix::from_row_slice(4, 2, &[z, z, ts, z, z, z, z, ts]).expect("4x2");
        Self { a, b }
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    /// `A x + B u`.
    pub fn step(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n() || u.len() != self.m() {
            return Err(Error::InvalidArgument(format!(
                "step expects x in R^{} and u in R^{}, got {} and {}",
                self.n(),
                self.m(),
                x.len(),
                u.len()
            )));
        }
        let ax = self.a.mul_vec(x);
        let bu = self.b.mul_vec(u);
        Ok(linalg::add_vec(&ax, &bu))
    }
}

impl<T: Scalar> Dynamics<T> for LinearSystem<T> {
    fn state_dim(&self) -> usize {
        self.n()
    }

    fn input_dim(&self) -> usize {
        self.m()
    }

    fn step(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        LinearSystem::step(self, x, u)
    }
}

/// Linear state feedback `u = -K x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPolicy<T> {
    gain: Matrix<T>,
}

impl<T: Scalar> LinearPolicy<T> {
    pub fn new(gain: Matrix<T>) -> Result<Self> {
        if !gain.is_finite() {
            return Err(Error::InvalidArgument("policy gain must be finite".into()));
        }
        Ok(Self { gain })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            gain: Matrix::zeros(m, n),
        }
    }

    pub fn gain(&self) -> &Matrix<T> {
        &self.gain
    }

    pub fn into_gain(self) -> Matrix<T> {
        self.gain
    }

    /// Checks that the gain is `m x n` for the given plant.
    pub fn check_dims(&self, sys: &LinearSystem<T>) -> Result<()> {
        if self.gain.shape() != (sys.m(), sys.n()) {
            return Err(Error::InvalidArgument(format!(
                "gain is {:?}, plant expects {}x{}",
                self.gain.shape(),
                sys.m(),
                sys.n()
            )));
        }
        Ok(())
    }

    /// `-K y` for a (possibly perturbed) measurement `y`.
    pub fn action(&self, y: &[T]) -> Vec<T> {
        self.gain.mul_vec(y).into_iter().map(|v| -v).collect()
    }

    /// Lipschitz constant of `x ↦ -Kx`, i.e. `σ_max(K)`.
    pub fn lipschitz(&self) -> T {
        spectral_norm(&self.gain)
    }
}

/// `A - B K`.
pub fn closed_loop_matrix<T: Scalar>(sys: &LinearSystem<T>, pol: &LinearPolicy<T>) -> Result<Matrix<T>> {
    pol.check_dims(sys)?;
    Ok(sys.a() - &(sys.b() * pol.gain()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationMode {
    None,
    /// Independent uniform directions on the ζ-sphere.
    RandomSphere,
    /// One-step look-ahead maximizer of `x_{t+1}ᵀ P x_{t+1}` on the ζ-sphere.
    GreedyAdversarial { restarts: usize },
}

impl PerturbationMode {
    pub const DEFAULT_RESTARTS: usize = 8;

    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::RandomSphere => "random_sphere",
            Self::GreedyAdversarial { .. } => "greedy_adversarial",
        }
    }
}

/// Bounded measurement corruption `y_t = x_t + δ_t`, `‖δ_t‖ ≤ ζ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationModel<T> {
    pub zeta: T,
    pub mode: PerturbationMode,
    pub seed: u64,
}

impl<T: Scalar> PerturbationModel<T> {
    pub fn new(zeta: T, mode: PerturbationMode, seed: u64) -> Result<Self> {
        if !(zeta >= T::zero()) || !zeta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "perturbation bound must be finite and >= 0, got {zeta}"
            )));
        }
        if let PerturbationMode::GreedyAdversarial { restarts: 0 } = mode {
            return Err(Error::Configuration("greedy adversary needs restarts >= 1".into()));
        }
        Ok(Self { zeta, mode, seed })
    }

    pub fn none() -> Self {
        Self {
            zeta: T::zero(),
            mode: PerturbationMode::None,
            seed: 0,
        }
    }

    /// Same model with a different stream seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<Vec<T>>,
    pub inputs: Vec<Vec<T>>,
    pub perturbations: Vec<Vec<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn initial_state(&self) -> &[T] {
        &self.states[0]
    }

    pub fn final_state(&self) -> &[T] {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Largest relative violation of `x_{t+1} = A x_t + B u_t`.
    pub fn dynamics_residual(&self, sys: &LinearSystem<T>) -> T {
        let mut worst = T::zero();
        for t in 0..self.inputs.len() {
            let pred = match sys.step(&self.states[t], &self.inputs[t]) {
                Ok(p) => p,
                Err(_) => return T::infinity(),
            };
            let err = norm(&sub_vec(&pred, &self.states[t + 1]));
            let scale = norm(&pred).max(T::one());
            worst = worst.max(err / scale);
        }
        worst
    }
}

pub(crate) fn sample_sphere<T: Scalar>(rng: &mut ChaCha8Rng, dim: usize, radius: T) -> Vec<T> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let ng = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ng > 1e-12 {
            return g.into_iter().map(|v| T::lit(v / ng) * radius).collect();
        }
    }
}

pub(crate) fn sample_standard_normal<T: Scalar>(rng: &mut ChaCha8Rng, dim: usize) -> Vec<T> {
    (0..dim)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Look-ahead objective `x_{t+1}ᵀ P x_{t+1}` when the controller sees `x + δ`.
pub fn lookahead_objective<T: Scalar>(
    sys: &LinearSystem<T>,
    pol: &LinearPolicy<T>,
    x: &[T],
    delta: &[T],
    p: &Matrix<T>,
) -> Result<T> {
    let y = linalg::add_vec(x, delta);
    let next = sys.step(x, &pol.action(&y))?;
    Ok(p.quad_form(&next))
}

const GREEDY_ASCENT_ITERS: usize = 64;

/// One-step look-ahead adversary for a fixed plant, policy and value matrix.
///
/// Maximizes [`lookahead_objective`] over `‖δ‖ ≤ ζ`. The objective is a
/// convex quadratic in δ, so its maximum sits on the sphere. Each restart
/// runs projected gradient ascent on the sphere; the first restart starts
/// from the gradient direction at δ = 0, the rest from random points.
#[derive(Clone, Debug)]
pub struct GreedyAdversary<T> {
    acl: Matrix<T>,
    bk: Matrix<T>,
    p: Matrix<T>,
    step: T,
}

impl<T: Scalar> GreedyAdversary<T> {
    pub fn new(sys: &LinearSystem<T>, pol: &LinearPolicy<T>, p: &Matrix<T>) -> Result<Self> {
        let acl = closed_loop_matrix(sys, pol)?;
        let bk = sys.b() * pol.gain();
        let p = p.symmetrize();
        // Hessian of φ is 2 (BK)ᵀ P (BK)
        let h = &(&bk.transpose() * &p) * &bk;
        let curvature = T::lit(2.0) * linalg::symmetric_eigen(&h.symmetrize()).max().abs();
        let step = if curvature > T::zero() {
            T::lit(4.0) / curvature
        } else {
            T::one()
        };
        Ok(Self { acl, bk, p, step })
    }

    /// `φ(δ) = (c - Mδ)ᵀ P (c - Mδ)` with `c = (A - BK)x`, `M = BK`.
    fn objective(&self, base: &[T], d: &[T]) -> T {
        self.p.quad_form(&sub_vec(base, &self.bk.mul_vec(d)))
    }

    fn gradient(&self, base: &[T], d: &[T]) -> Vec<T> {
        let r = sub_vec(base, &self.bk.mul_vec(d));
        scale_vec(&self.bk.tr_mul_vec(&self.p.mul_vec(&r)), -T::lit(2.0))
    }

    pub fn perturbation(&self, x: &[T], zeta: T, restarts: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
        let n = x.len();
        if zeta == T::zero() {
            return vec![T::zero(); n];
        }
        let base = self.acl.mul_vec(x);
        let project = |d: Vec<T>| -> Option<Vec<T>> {
            let nd = norm(&d);
            (nd > T::zero()).then(|| scale_vec(&d, zeta / nd))
        };

        let mut best = vec![T::zero(); n];
        let mut best_val = self.objective(&base, &best);
        for restart in 0..restarts {
            let start = if restart == 0 {
                project(self.gradient(&base, &vec![T::zero(); n]))
            } else {
                None
            };
            let mut d = start.unwrap_or_else(|| sample_sphere(rng, n, zeta));
            let mut val = self.objective(&base, &d);
            for _ in 0..GREEDY_ASCENT_ITERS {
                let g = self.gradient(&base, &d);
                let Some(cand) = project(linalg::add_vec(&d, &scale_vec(&g, self.step))) else {
                    break;
                };
                let cval = self.objective(&base, &cand);
                if !(cval > val) {
                    break;
                }
                let gain = cval - val;
                d = cand;
                val = cval;
                if gain <= T::epsilon() * val.abs().max(T::one()) {
                    break;
                }
            }
            if val > best_val {
                best_val = val;
                best = d;
            }
        }
        best
    }
}

/// Single-state convenience wrapper around [`GreedyAdversary`].
pub fn greedy_perturbation<T: Scalar>(
    sys: &LinearSystem<T>,
    pol: &LinearPolicy<T>,
    x: &[T],
    p: &Matrix<T>,
    zeta: T,
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<T>> {
    Ok(GreedyAdversary::new(sys, pol, p)?.perturbation(x, zeta, restarts, rng))
}

/// Simulates `x_{t+1} = A x_t + B u_t` with `u_t = -K (x_t + δ_t)`.
///
/// `value_hint` is the quadratic value matrix the greedy adversary looks
/// ahead with; it is required in greedy mode and ignored otherwise.
pub fn rollout<T: Scalar>(
    sys: &LinearSystem<T>,
    pol: &LinearPolicy<T>,
    x0: &[T],
    horizon: usize,
    pert: &PerturbationModel<T>,
    value_hint: Option<&Matrix<T>>,
) -> Result<Trajectory<T>> {
    pol.check_dims(sys)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("rollout horizon must be >= 1".into()));
    }
    if x0.len() != sys.n() {
        return Err(Error::InvalidArgument(format!(
            "initial state has dimension {}, expected {}",
            x0.len(),
            sys.n()
        )));
    }
    let adversary = match (pert.mode, value_hint) {
        (PerturbationMode::GreedyAdversarial { .. }, None) => {
            return Err(Error::Configuration(
                "greedy_adversarial perturbations need a value matrix hint".into(),
            ))
        }
        (PerturbationMode::GreedyAdversarial { .. }, Some(p)) => {
            if p.shape() != (sys.n(), sys.n()) {
                return Err(Error::Configuration(format!(
                    "value hint is {:?}, expected {}x{}",
                    p.shape(),
                    sys.n(),
                    sys.n()
                )));
            }
            Some(GreedyAdversary::new(sys, pol, p)?)
        }
        _ => None,
    };

    let n = sys.n();
    let mut rng = ChaCha8Rng::seed_from_u64(pert.seed);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut perturbations = Vec::with_capacity(horizon);
    let mut x = x0.to_vec();
    for _ in 0..horizon {
        let delta = match pert.mode {
            PerturbationMode::None => vec![T::zero(); n],
            PerturbationMode::RandomSphere => {
                if pert.zeta == T::zero() {
                    vec![T::zero(); n]
                } else {
                    sample_sphere(&mut rng, n, pert.zeta)
                }
            }
            PerturbationMode::GreedyAdversarial { restarts } => adversary
                .as_ref()
                .expect("checked above")
                .perturbation(&x, pert.zeta, restarts, &mut rng),
        };
        let u = pol.action(&linalg::add_vec(&x, &delta));
        let next = sys.step(&x, &u)?;
        states.push(std::mem::replace(&mut x, next));
        inputs.push(u);
        perturbations.push(delta);
    }
    states.push(x);
    Ok(Trajectory {
        states,
        inputs,
        perturbations,
    })
}

/// Stage cost helper used by the rollout evaluators.
pub(crate) fn discounted_sum<T: Scalar>(costs: &[T], gamma: T) -> T {
    let mut weight = T::one();
    let mut total = T::zero();
    for &c in costs {
        total = total + weight * c;
        weight = weight * gamma;
    }
    total
}
