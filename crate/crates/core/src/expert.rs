//! Optimal experts for linear-quadratic tasks and demonstration datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, norm, solve, symmetric_eigen, Matrix};
use crate::scalar::Scalar;
use crate::state_space::{
    closed_loop_matrix, rollout, sample_sphere, sample_standard_normal, LinearPolicy,
    LinearSystem, PerturbationModel, Trajectory,
};

/// Stage cost `c(x, u) = xᵀQx + 2xᵀWu + uᵀRu` with discount `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCost<T> {
    q: Matrix<T>,
    w: Matrix<T>,
    r: Matrix<T>,
    gamma: T,
}

impl<T: Scalar> QuadraticCost<T> {
    pub fn new(q: Matrix<T>, w: Option<Matrix<T>>, r: Matrix<T>, gamma: T) -> Result<Self> {
        let n = q.rows();
        let m = r.rows();
        if !q.is_square() || !r.is_square() || n == 0 || m == 0 {
            return Err(Error::InvalidArgument("Q and R must be non-empty and square".into()));
        }
        let w = w.unwrap_or_else(|| Matrix::zeros(n, m));
        if w.shape() != (n, m) {
            return Err(Error::InvalidArgument(format!(
                "W must be {n}x{m}, got {:?}",
                w.shape()
            )));
        }
        if !(q.is_finite() && w.is_finite() && r.is_finite()) {
            return Err(Error::InvalidArgument("cost matrices must be finite".into()));
        }
        let sym_tol = |m: &Matrix<T>| T::lit(1e-12) * m.max_abs().max(T::one());
        if q.asymmetry() > sym_tol(&q) || r.asymmetry() > sym_tol(&r) {
            return Err(Error::InvalidArgument("Q and R must be symmetric".into()));
        }
        if symmetric_eigen(&q).min() < -T::lit(1e-10) {
            return Err(Error::InvalidArgument("Q must be positive semidefinite".into()));
        }
        if symmetric_eigen(&r).min() <= T::zero() {
            return Err(Error::InvalidArgument("R must be positive definite".into()));
        }
        if !(gamma > T::zero() && gamma < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie in (0, 1), got {gamma}"
            )));
        }
        Ok(Self {
            q: q.symmetrize(),
            w,
            r: r.symmetrize(),
            gamma,
        })
    }

    /// Diagonal `Q`, scaled-identity `R`, no cross term.
    pub fn diagonal(q_diag: &[T], r_scale: T, m: usize, gamma: T) -> Result<Self> {
        Self::new(
            Matrix::diag(q_diag),
            None,
            Matrix::identity(m).scale(r_scale),
            gamma,
        )
    }

    pub fn q(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn w(&self) -> &Matrix<T> {
        &self.w
    }

    pub fn r(&self) -> &Matrix<T> {
        &self.r
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.q.rows()
    }

    pub fn m(&self) -> usize {
        self.r.rows()
    }

    /// Same weights under another discount.
    pub fn with_gamma(&self, gamma: T) -> Result<Self> {
        Self::new(self.q.clone(), Some(self.w.clone()), self.r.clone(), gamma)
    }

    pub fn stage_cost(&self, x: &[T], u: &[T]) -> T {
        let cross = linalg::dot(x, &self.w.mul_vec(u));
        self.q.quad_form(x) + T::lit(2.0) * cross + self.r.quad_form(u)
    }

    /// `C_K = Q - WK - KᵀWᵀ + KᵀRK`, the stage cost along `u = -Kx`.
    pub fn composed_matrix(&self, gain: &Matrix<T>) -> Matrix<T> {
        let wk = &self.w * gain;
        let krk = &(&gain.transpose() * &self.r) * gain;
        (&(&(&self.q - &wk) - &wk.transpose()) + &krk).symmetrize()
    }

    /// `H = 2 [[Q, W], [Wᵀ, R]]`.
    pub fn hessian(&self) -> Matrix<T> {
        let n = self.n();
        let m = self.m();
        let two = T::lit(2.0);
        Matrix::from_fn(n + m, n + m, |i, j| {
            two * match (i < n, j < n) {
                (true, true) => self.q[(i, j)],
                (true, false) => self.w[(i, j - n)],
                (false, true) => self.w[(j, i - n)],
                (false, false) => self.r[(i - n, j - n)],
            }
        })
    }

    fn check_system(&self, sys: &LinearSystem<T>) -> Result<()> {
        if self.n() != sys.n() || self.m() != sys.m() {
            return Err(Error::InvalidArgument(format!(
                "cost is for n={}, m={} but plant has n={}, m={}",
                self.n(),
                self.m(),
                sys.n(),
                sys.m()
            )));
        }
        Ok(())
    }
}

/// Strong convexity and smoothness moduli of the stage cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostConstants<T> {
    pub mu: T,
    pub lambda: T,
}

/// Extreme eigenvalues of the cost Hessian `H`.
pub fn cost_constants<T: Scalar>(cost: &QuadraticCost<T>) -> Result<CostConstants<T>> {
    let eig = symmetric_eigen(&cost.hessian());
    let mu = eig.min();
    if mu <= T::zero() {
        return Err(Error::AssumptionViolation(format!(
            "stage cost is not strongly convex: smallest Hessian eigenvalue {mu}"
        )));
    }
    Ok(CostConstants {
        mu,
        lambda: eig.max(),
    })
}

/// Optimal gain and value matrix, `V*(x) = xᵀPx`.
#[derive(Clone, Debug, PartialEq)]
pub struct LqrSolution<T> {
    pub policy: LinearPolicy<T>,
    pub value: Matrix<T>,
    pub iterations: usize,
}

const RICCATI_MAX_ITERS: usize = 100_000;

/// Discounted infinite-horizon LQR by value iteration on the Riccati map.
///
/// The discount is folded into the plant, `(√γA, √γB)`, and the undiscounted
/// recursion is iterated from `P = 0` until successive iterates agree to
/// `1e-12` (max-abs, relative once entries exceed one).
pub fn solve_discounted_lqr<T: Scalar>(
    sys: &LinearSystem<T>,
    cost: &QuadraticCost<T>,
) -> Result<LqrSolution<T>> {
    cost.check_system(sys)?;
    let sg = cost.gamma().sqrt();
    let a = sys.a().scale(sg);
    let b = sys.b().scale(sg);
    let at = a.transpose();
    let bt = b.transpose();
    let q = cost.q();
    let w = cost.w();
    let r = cost.r();
    let tol = T::fixed_point_tol();

    let gain_for = |p: &Matrix<T>| -> Result<Matrix<T>> {
        let s = r + &(&(&bt * p) * &b);
        let rhs = &(&(&bt * p) * &a) + &w.transpose();
        solve(&s, &rhs).map_err(|_| {
            Error::IllPosedCost("R + γBᵀPB is singular".into())
        })
    };

    let mut p = Matrix::zeros(sys.n(), sys.n());
    for iter in 1..=RICCATI_MAX_ITERS {
        let k = gain_for(&p)?;
        let cross = &(&at * &p) * &b + w;
        let next = (&(q + &(&(&at * &p) * &a)) - &(&cross * &k)).symmetrize();
        if !next.is_finite() {
            return Err(Error::NonStabilizable { iterations: iter });
        }
        let diff = (&next - &p).max_abs();
        p = next;
        if diff < tol * p.max_abs().max(T::one()) {
            let gain = gain_for(&p)?;
            return Ok(LqrSolution {
                policy: LinearPolicy::new(gain)?,
                value: p,
                iterations: iter,
            });
        }
    }
    Err(Error::NonStabilizable {
        iterations: RICCATI_MAX_ITERS,
    })
}

/// Residual of the discounted Riccati equation at `p`, max-abs.
pub fn riccati_residual<T: Scalar>(
    sys: &LinearSystem<T>,
    cost: &QuadraticCost<T>,
    p: &Matrix<T>,
) -> Result<T> {
    let g = cost.gamma();
    let a = sys.a();
    let b = sys.b();
    let at_p = &a.transpose() * p;
    let bt_p = &b.transpose() * p;
    let s = cost.r() + &(&bt_p * b).scale(g);
    let cross = &(&at_p * b).scale(g) + cost.w();
    let rhs = &(&bt_p * a).scale(g) + &cost.w().transpose();
    let k = solve(&s, &rhs)?;
    let fixed = &(cost.q() + &(&at_p * a).scale(g)) - &(&cross * &k);
    Ok((p - &fixed).max_abs())
}

/// How demonstration initial states are drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSampler<T> {
    /// Uniform on the Euclidean ball of the given radius.
    UniformBall { radius: T },
    /// Zero-mean Gaussian with covariance `P₀`.
    Gaussian { covariance: Matrix<T> },
    /// Cycles through the listed states.
    Fixed { states: Vec<Vec<T>> },
}

impl<T: Scalar> InitSampler<T> {
    /// Radius of the region the demonstrations are taken to cover:
    /// the ball radius, `3·√λ_max(P₀)` for Gaussian draws, or the largest
    /// listed norm.
    pub fn region_radius(&self) -> T {
        match self {
            Self::UniformBall { radius } => *radius,
            Self::Gaussian { covariance } => {
                T::lit(3.0) * symmetric_eigen(covariance).max().max(T::zero()).sqrt()
            }
            Self::Fixed { states } => states.iter().map(|s| norm(s)).fold(T::zero(), T::max),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::UniformBall { .. } => "uniform_ball",
            Self::Gaussian { .. } => "gaussian",
            Self::Fixed { .. } => "fixed",
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::UniformBall { radius } => {
                if !(*radius > T::zero()) || !radius.is_finite() {
                    return Err(Error::InvalidArgument("ball radius must be > 0".into()));
                }
            }
            Self::Gaussian { covariance } => {
                if covariance.shape() != (n, n) {
                    return Err(Error::InvalidArgument(format!(
                        "covariance must be {n}x{n}"
                    )));
                }
                cholesky(covariance)?;
            }
            Self::Fixed { states } => {
                if states.is_empty() || states.iter().any(|s| s.len() != n) {
                    return Err(Error::InvalidArgument(format!(
                        "fixed initial states must be non-empty and in R^{n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `N` expert trajectories of common horizon `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoSet<T> {
    pub trajectories: Vec<Trajectory<T>>,
    pub radius_r: T,
    pub sampler: InitSampler<T>,
    pub seed: u64,
}

impl<T: Scalar> DemoSet<T> {
    /// Assembles a dataset from existing trajectories, checking shapes.
    pub fn from_trajectories(
        trajectories: Vec<Trajectory<T>>,
        radius_r: T,
        sampler: InitSampler<T>,
        seed: u64,
    ) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::InvalidArgument("a demo set needs at least one trajectory".into()))?;
        let (n, m, t) = (
            first.states[0].len(),
            first.inputs.first().map_or(0, Vec::len),
            first.horizon(),
        );
        if t == 0 || n == 0 || m == 0 {
            return Err(Error::InvalidArgument("demonstrations must be non-empty".into()));
        }
        for tr in &trajectories {
            let ok = tr.horizon() == t
                && tr.states.len() == t + 1
                && tr.perturbations.len() == t
                && tr.states.iter().all(|s| s.len() == n)
                && tr.inputs.iter().all(|u| u.len() == m);
            if !ok {
                return Err(Error::InvalidArgument(
                    "all demonstrations must share n, m and horizon".into(),
                ));
            }
        }
        if !(radius_r > T::zero()) {
            return Err(Error::InvalidArgument("demo region radius must be > 0".into()));
        }
        Ok(Self {
            trajectories,
            radius_r,
            sampler,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories[0].horizon()
    }

    pub fn n(&self) -> usize {
        self.trajectories[0].states[0].len()
    }

    pub fn m(&self) -> usize {
        self.trajectories[0].inputs[0].len()
    }

    /// Number of `(x_t, u_t)` pairs.
    pub fn num_pairs(&self) -> usize {
        self.len() * self.horizon()
    }

    /// Stacked data matrices `X` (n × NT) and `U` (m × NT); the terminal
    /// state of each trajectory has no input and is left out.
    pub fn stacked(&self) -> (Matrix<T>, Matrix<T>) {
        let (n, m, total) = (self.n(), self.m(), self.num_pairs());
        let mut x = Matrix::zeros(n, total);
        let mut u = Matrix::zeros(m, total);
        let pairs = self
            .trajectories
            .iter()
            .flat_map(|tr| tr.states.iter().zip(&tr.inputs));
        for (col, (xs, us)) in pairs.enumerate() {
            for (i, &v) in xs.iter().enumerate() {
                x[(i, col)] = v;
            }
            for (i, &v) in us.iter().enumerate() {
                u[(i, col)] = v;
            }
        }
        (x, u)
    }
}

fn draw_initial<T: Scalar>(
    sampler: &InitSampler<T>,
    chol: Option<&Matrix<T>>,
    n: usize,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<T> {
    match sampler {
        InitSampler::UniformBall { radius } => {
            let u: f64 = rng.random();
            let scale = *radius * T::lit(u.powf(1.0 / n as f64));
            sample_sphere(rng, n, scale)
        }
        InitSampler::Gaussian { .. } => {
            let z = sample_standard_normal(rng, n);
            chol.expect("factor computed for gaussian sampler").mul_vec(&z)
        }
        InitSampler::Fixed { states } => states[index % states.len()].clone(),
    }
}

/// Rolls out `expert` from `N` sampled initial states without perturbation.
pub fn generate_demos<T: Scalar>(
    sys: &LinearSystem<T>,
    expert: &LinearPolicy<T>,
    num_demos: usize,
    horizon: usize,
    sampler: InitSampler<T>,
    seed: u64,
) -> Result<DemoSet<T>> {
    if num_demos == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("N and T must both be >= 1".into()));
    }
    let acl = closed_loop_matrix(sys, expert)?;
    let rho = linalg::spectral_radius(&acl);
    if rho >= T::one() {
        return Err(Error::Unstable {
            spectral_radius: rho.as_f64(),
        });
    }
    sampler.validate(sys.n())?;
    let chol = match &sampler {
        InitSampler::Gaussian { covariance } => Some(cholesky(covariance)?),
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nominal = PerturbationModel::none();
    let trajectories = (0..num_demos)
        .map(|i| {
            let x0 = draw_initial(&sampler, chol.as_ref(), sys.n(), i, &mut rng);
            rollout(sys, expert, &x0, horizon, &nominal, None)
        })
        .collect::<Result<Vec<_>>>()?;

    let radius_r = sampler.region_radius();
    let radius_r = if radius_r > T::zero() { radius_r } else { T::one() };
    Ok(DemoSet {
        trajectories,
        radius_r,
        sampler,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benchmark_cost() -> QuadraticCost<f64> {
        QuadraticCost::diagonal(&[1.0, 0.01, 1.0, 0.01], 0.01, 2, 0.1).unwrap()
    }

    #[test]
    fn cost_constants_identity_and_benchmark() {
        let c = QuadraticCost::new(Matrix::identity(2), None, Matrix::identity(1), 0.5).unwrap();
        let k = cost_constants(&c).unwrap();
        assert!((k.mu - 2.0_f64).abs() < 1e-14 && (k.lambda - 2.0_f64).abs() < 1e-14);

        let k = cost_constants(&benchmark_cost()).unwrap();
        assert!((k.mu - 0.02).abs() < 1e-14);
        assert!((k.lambda - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cost_constants_rejects_flat_direction() {
        let c = QuadraticCost::new(Matrix::diag(&[1.0, 0.0]), None, Matrix::identity(1), 0.5).unwrap();
        assert!(matches!(cost_constants(&c), Err(Error::AssumptionViolation(_))));
    }

    #[test]
    fn cost_validation() {
        let bad_gamma = QuadraticCost::new(Matrix::<f64>::identity(1), None, Matrix::identity(1), 1.0);
        assert!(bad_gamma.is_err());
        let bad_r = QuadraticCost::new(Matrix::<f64>::identity(1), None, Matrix::zeros(1, 1), 0.5);
        assert!(bad_r.is_err());
        let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(QuadraticCost::new(asym, None, Matrix::identity(1), 0.5).is_err());
    }

    #[test]
    fn composed_matrix_matches_stage_cost() {
        let w = Matrix::from_rows(&[vec![0.1], vec![-0.2]]).unwrap();
        let cost = QuadraticCost::new(Matrix::diag(&[2.0, 1.0]), Some(w), Matrix::diag(&[1.5]), 0.7).unwrap();
        let k = Matrix::from_rows(&[vec![0.3, -0.4]]).unwrap();
        let pol = LinearPolicy::new(k.clone()).unwrap();
        let x = [0.7_f64, -1.1];
        let direct = cost.stage_cost(&x, &pol.action(&x));
        let via = cost.composed_matrix(&k).quad_form(&x);
        assert!((direct - via).abs() < 1e-14);
    }

    #[test]
    fn benchmark_gain_norm_near_threshold() {
        let sol = solve_discounted_lqr(&LinearSystem::vehicle(1.0), &benchmark_cost()).unwrap();
        let s = sol.policy.lipschitz();
        assert!((s - 1.13).abs() <= 0.05, "sigma_max(K*) = {s}");
    }

    #[test]
    fn riccati_fixed_point_residual() {
        let sys = LinearSystem::vehicle(1.0);
        let cost = benchmark_cost();
        let sol = solve_discounted_lqr(&sys, &cost).unwrap();
        assert!(riccati_residual(&sys, &cost, &sol.value).unwrap() < 1e-10);
    }

    #[test]
    fn cheap_control_limit_approaches_q() {
        let sys = LinearSystem::new(
            Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.2]]).unwrap(),
            Matrix::identity(2),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let cost = QuadraticCost::new(Matrix::identity(2), None, Matrix::identity(2).scale(eps), 0.9).unwrap();
            let sol = solve_discounted_lqr(&sys, &cost).unwrap();
            let gap = (&sol.value - &Matrix::identity(2)).max_abs();
            assert!(gap < prev, "gap {gap} not shrinking");
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn non_stabilizable_reports_error() {
        // unstable, uncontrollable mode with weight: cost grows without bound
        let sys = LinearSystem::new(Matrix::diag(&[2.0]), Matrix::zeros(1, 1)).unwrap();
        let cost = QuadraticCost::new(Matrix::identity(1), None, Matrix::identity(1), 0.9).unwrap();
        assert!(matches!(
            solve_discounted_lqr(&sys, &cost),
            Err(Error::NonStabilizable { .. })
        ));
    }

    #[test]
    fn single_fixed_demo() {
        let sys = LinearSystem::vehicle(1.0);
        let sol = solve_discounted_lqr(&sys, &benchmark_cost()).unwrap();
        let e1 = vec![1.0, 0.0, 0.0, 0.0];
        let demos = generate_demos(
            &sys,
            &sol.policy,
            1,
            1,
            InitSampler::Fixed { states: vec![e1.clone()] },
            0,
        )
        .unwrap();
        let tr = &demos.trajectories[0];
        let acl = closed_loop_matrix(&sys, &sol.policy).unwrap();
        assert_eq!(tr.states[0], e1);
        assert_eq!(tr.states.len(), 2);
        let expected = acl.mul_vec(&e1);
        for (a, b) in expected.iter().zip(&tr.states[1]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(tr.inputs[0], sol.policy.action(&e1));
    }

    #[test]
    fn uniform_ball_respects_radius() {
        let sys = LinearSystem::vehicle(1.0);
        let sol = solve_discounted_lqr(&sys, &benchmark_cost()).unwrap();
        let demos = generate_demos(&sys, &sol.policy, 100, 2, InitSampler::UniformBall { radius: 2.5 }, 3).unwrap();
        assert!(demos
            .trajectories
            .iter()
            .all(|t| norm(t.initial_state()) <= 2.5 + 1e-12));
        assert_eq!(demos.radius_r, 2.5);
    }

    #[test]
    fn gaussian_benchmark_demos_decay() {
        let sys = LinearSystem::vehicle(1.0);
        let sol = solve_discounted_lqr(&sys, &benchmark_cost()).unwrap();
        let demos = generate_demos(
            &sys,
            &sol.policy,
            50,
            30,
            InitSampler::Gaussian { covariance: Matrix::identity(4) },
            11,
        )
        .unwrap();
        for t in &demos.trajectories {
            assert!(norm(t.final_state()) < norm(t.initial_state()));
            for (x, u) in t.states.iter().zip(&t.inputs) {
                assert_eq!(*u, sol.policy.action(x));
            }
        }
        assert!((demos.radius_r - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_expert_refused() {
        let sys = LinearSystem::vehicle(1.0);
        let bad = LinearPolicy::zero(4, 2);
        assert!(matches!(
            generate_demos(&sys, &bad, 1, 5, InitSampler::UniformBall { radius: 1.0 }, 0),
            Err(Error::Unstable { .. })
        ));
    }
}
