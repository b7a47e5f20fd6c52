//! Value functions, nominal regret and robustness regret.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expert::QuadraticCost;
use crate::linalg::{norm, scale_vec, spectral_radius, stein_fixed_point, symmetric_eigen, Matrix};
use crate::scalar::Scalar;
use crate::state_space::{
    closed_loop_matrix, discounted_sum, rollout, sample_sphere, LinearPolicy, LinearSystem,
    PerturbationMode, PerturbationModel,
};

/// `V^π(x) = xᵀPx` for a linear policy on a linear-quadratic task.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueMatrix<T> {
    pub p: Matrix<T>,
    pub gamma: T,
    pub policy_gain: Matrix<T>,
}

impl<T: Scalar> ValueMatrix<T> {
    pub fn value(&self, x: &[T]) -> T {
        self.p.quad_form(x)
    }

    /// `‖P - (C_K + γ A_clᵀ P A_cl)‖_max`.
    pub fn lyapunov_residual(&self, sys: &LinearSystem<T>, cost: &QuadraticCost<T>) -> Result<T> {
        let pol = LinearPolicy::new(self.policy_gain.clone())?;
        let acl = closed_loop_matrix(sys, &pol)?;
        let rhs = &cost.composed_matrix(&self.policy_gain)
            + &(&(&acl.transpose() * &self.p) * &acl).scale(self.gamma);
        Ok((&self.p - &rhs).max_abs())
    }
}

const STEIN_MAX_DOUBLINGS: usize = 64;

/// Solves `P = C_K + γ (A - BK)ᵀ P (A - BK)`.
pub fn policy_value_matrix<T: Scalar>(
    sys: &LinearSystem<T>,
    cost: &QuadraticCost<T>,
    pol: &LinearPolicy<T>,
) -> Result<ValueMatrix<T>> {
    if cost.n() != sys.n() || cost.m() != sys.m() {
        return Err(Error::InvalidArgument("cost and plant dimensions differ".into()));
    }
    let acl = closed_loop_matrix(sys, pol)?;
    let scaled = acl.scale(cost.gamma().sqrt());
    let rho = spectral_radius(&scaled);
    if rho >= T::one() {
        return Err(Error::DivergentValue {
            spectral_radius: rho.as_f64(),
        });
    }
    let c = cost.composed_matrix(pol.gain());
    let p = stein_fixed_point(&scaled, &c, T::fixed_point_tol(), STEIN_MAX_DOUBLINGS)?;
    Ok(ValueMatrix {
        p,
        gamma: cost.gamma(),
        policy_gain: pol.gain().clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum EstimateMethod<T> {
    ClosedForm,
    /// Max over sampled initial states of truncated perturbed rollouts.
    /// The value is a lower estimate of the supremum.
    Rollout {
        num_samples: usize,
        horizon: usize,
        seed: u64,
        truncation_bound: T,
        mode: PerturbationMode,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegretEstimate<T> {
    pub value: T,
    pub method: EstimateMethod<T>,
}

/// `R = r² · max(0, λ_max(P̂ - P*))`, the exact sup of `V^π̂ - V*` on `B_r(0)`.
pub fn nominal_regret<T: Scalar>(
    p_hat: &ValueMatrix<T>,
    p_star: &ValueMatrix<T>,
    r: T,
) -> Result<RegretEstimate<T>> {
    if p_hat.p.shape() != p_star.p.shape() {
        return Err(Error::InvalidComparison("value matrices differ in size".into()));
    }
    if p_hat.gamma != p_star.gamma {
        return Err(Error::InvalidComparison(format!(
            "discounts differ: {} vs {}",
            p_hat.gamma, p_star.gamma
        )));
    }
    let gap = symmetric_eigen(&(&p_hat.p - &p_star.p)).max();
    Ok(RegretEstimate {
        value: r * r * gap.max(T::zero()),
        method: EstimateMethod::ClosedForm,
    })
}

/// Smallest horizon with `γ^T ≤ 1e-12`.
pub fn default_horizon<T: Scalar>(gamma: T) -> usize {
    // slack absorbs rounding in the repeated product, e.g. 0.1^12
    let target = T::lit(1e-12 * (1.0 + 1e-9));
    let mut weight = T::one();
    let mut t = 0;
    while weight > target && t < 100_000 {
        weight = weight * gamma;
        t += 1;
    }
    t.max(1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutValue<T> {
    pub value: T,
    /// `γ^T · c_max / (1 - γ)` with `c_max` the largest stage cost in the last
    /// quarter of the horizon. A heuristic cap on the neglected tail.
    pub truncation_bound: T,
}

const DIVERGENCE_NORM: f64 = 1e9;

/// Truncated discounted cost `Σ_{t<T} γᵗ c(x_t, u_t)` along a rollout.
pub fn rollout_value<T: Scalar>(
    sys: &LinearSystem<T>,
    cost: &QuadraticCost<T>,
    pol: &LinearPolicy<T>,
    x0: &[T],
    pert: &PerturbationModel<T>,
    horizon: usize,
    value_hint: Option<&Matrix<T>>,
) -> Result<RolloutValue<T>> {
    let traj = rollout(sys, pol, x0, horizon, pert, value_hint)?;
    let limit = T::lit(DIVERGENCE_NORM);
    for (step, x) in traj.states.iter().enumerate() {
        let nx = norm(x);
        if !(nx <= limit) {
            return Err(Error::Divergence {
                step,
                norm: nx.as_f64(),
            });
        }
    }
    let costs: Vec<T> = traj
        .states
        .iter()
        .zip(&traj.inputs)
        .map(|(x, u)| cost.stage_cost(x, u))
        .collect();
    let gamma = cost.gamma();
    let tail_start = (3 * horizon) / 4;
    let c_max = costs[tail_start.min(horizon - 1)..]
        .iter()
        .fold(T::zero(), |m, &c| m.max(c));
    let gamma_t = gamma.powi(horizon as i32);
    Ok(RolloutValue {
        value: discounted_sum(&costs, gamma),
        truncation_bound: gamma_t * c_max / (T::one() - gamma),
    })
}

/// Estimates `S(π̂) = sup_{x ∈ B_r(0)} V^{π̂_δ}(x) - V^{π̂}(x)`.
///
/// Initial states: the top eigenvector of `P̂` scaled to radius `r`, then
/// `num_x0` points drawn on the `r`-sphere from `seed`. The perturbation
/// stream of the `i`-th start uses `pert.seed + i`. The greedy adversary
/// looks ahead with `P̂`. The origin lies in the ball and contributes a
/// nonnegative gap, so the estimate is floored at zero.
#[allow(clippy::too_many_arguments)]
pub fn robust_regret<T: Scalar>(
    sys: &LinearSystem<T>,
    cost: &QuadraticCost<T>,
    k_hat: &LinearPolicy<T>,
    r: T,
    pert: &PerturbationModel<T>,
    num_x0: usize,
    horizon: usize,
    seed: u64,
) -> Result<RegretEstimate<T>> {
    if num_x0 == 0 {
        return Err(Error::InvalidArgument("num_x0 must be >= 1".into()));
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidArgument("radius must be > 0".into()));
    }
    let vm = policy_value_matrix(sys, cost, k_hat)?;
    let eig = symmetric_eigen(&vm.p);
    let mut starts = vec![scale_vec(&eig.top_vector(), r)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    starts.extend((0..num_x0).map(|_| sample_sphere(&mut rng, sys.n(), r)));

    let mut best = T::zero();
    let mut worst_tail = T::zero();
    for (i, x0) in starts.iter().enumerate() {
        let stream = pert.with_seed(pert.seed.wrapping_add(i as u64));
        let rv = rollout_value(sys, cost, k_hat, x0, &stream, horizon, Some(&vm.p))?;
        best = best.max(rv.value - vm.value(x0));
        worst_tail = worst_tail.max(rv.truncation_bound);
    }
    Ok(RegretEstimate {
        value: best,
        method: EstimateMethod::Rollout {
            num_samples: starts.len(),
            horizon,
            seed,
            truncation_bound: worst_tail,
            mode: pert.mode,
        },
    })
}
