//! Lipschitz constants, regret and robustness bounds, and the stability
//! certificates that make them meaningful in closed loop.
//!
//! Every bound is reported together with the named hypotheses it rests on.
//! A bound whose hypotheses fail is [`Bound::NotCertified`], never a number.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::policy_value_matrix;
use crate::expert::{cost_constants, QuadraticCost};
use crate::linalg::{norm, spectral_norm, spectral_radius, stein_fixed_point, sub_vec, symmetric_eigen, Matrix};
use crate::policy_learning::learning_error;
use crate::scalar::Scalar;
use crate::state_space::{
    closed_loop_matrix, rollout, sample_sphere, LinearPolicy, LinearSystem, PerturbationMode,
    PerturbationModel, Trajectory,
};

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzConstants<T> {
    /// `σ_max(A)`
    pub l_f_x: T,
    /// `σ_max(B)`
    pub l_f_u: T,
    /// `sup ‖∇_u c‖` over `‖x‖ ≤ r`, `‖u‖ ≤ input_cap`
    pub l_c_u: T,
    /// Lipschitz constant of `x ↦ c(x, -Kx)` on `B_r(0)`
    pub l_c_pi: T,
    /// `σ_max(A - BK)`
    pub l_f_pi: T,
    /// `σ_max(K)`
    pub l_pi: T,
    pub domain_r: T,
    pub input_cap: T,
    sigma_r: T,
    sigma_w: T,
}

impl<T: Scalar> LipschitzConstants<T> {
    /// Recomputes `l_c_u` for a larger input set.
    pub fn with_input_cap(&self, input_cap: T) -> Self {
        let two = T::lit(2.0);
        Self {
            input_cap,
            l_c_u: two * (self.sigma_r * input_cap + self.sigma_w * self.domain_r),
            ..self.clone()
        }
    }
}

/// Spectral-norm Lipschitz constants of plant, policy and quadratic cost on
/// the reachable box `‖x‖ ≤ r`, `‖u‖ ≤ σ_max(K)(r + ζ)`.
pub fn lipschitz_constants<T: Scalar>(
    sys: &LinearSystem<T>,
    cost: &QuadraticCost<T>,
    pol: &LinearPolicy<T>,
    r: T,
    zeta: T,
) -> Result<LipschitzConstants<T>> {
    if !(r > T::zero()) || !(zeta >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "need r > 0 and zeta >= 0, got r={r}, zeta={zeta}"
        )));
    }
    let acl = closed_loop_matrix(sys, pol)?;
    let l_pi = pol.lipschitz();
    let input_cap = l_pi * (r + zeta);
    let sigma_r = spectral_norm(cost.r());
    let sigma_w = spectral_norm(cost.w());
    let two = T::lit(2.0);
    Ok(LipschitzConstants {
        l_f_x: spectral_norm(sys.a()),
        l_f_u: spectral_norm(sys.b()),
        l_c_u: two * (sigma_r * input_cap + sigma_w * r),
        l_c_pi: two * spectral_norm(&cost.composed_matrix(pol.gain())) * r,
        l_f_pi: spectral_norm(&acl),
        l_pi,
        domain_r: r,
        input_cap,
        sigma_r,
        sigma_w,
    })
}

/// `ℓ_V = ℓ_{c_π} / (1 - γ ℓ_{f_π})`, valid when `γ ℓ_{f_π} < 1`.
pub fn value_lipschitz<T: Scalar>(constants: &LipschitzConstants<T>, gamma: T) -> Result<T> {
    let product = gamma * constants.l_f_pi;
    if !(product < T::one()) {
        return Err(Error::LemmaInapplicable {
            product: product.as_f64(),
        });
    }
    Ok(constants.l_c_pi / (T::one() - product))
}

fn check_discount<T: Scalar>(gamma: T) -> Result<()> {
    if gamma > T::zero() && gamma < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("discount must lie in (0, 1), got {gamma}")))
    }
}

/// Regret bound `((ℓ_c^u + γ ℓ_{V*} ℓ_f^u) / (1 - γ)) · ε`.
pub fn regret_bound<T: Scalar>(
    constants: &LipschitzConstants<T>,
    l_v_star: T,
    gamma: T,
    eps: T,
) -> Result<T> {
    check_discount(gamma)?;
    Ok((constants.l_c_u + gamma * l_v_star * constants.l_f_u) / (T::one() - gamma) * eps)
}

/// Robustness bound `((ℓ_c^u + γ ℓ_{V^π̂} ℓ_f^u) / (1 - γ)) · ℓ_π̂ · ζ`.
pub fn robustness_bound<T: Scalar>(
    constants: &LipschitzConstants<T>,
    l_v_hat: T,
    gamma: T,
    zeta: T,
) -> Result<T> {
    check_discount(gamma)?;
    Ok((constants.l_c_u + gamma * l_v_hat * constants.l_f_u) / (T::one() - gamma)
        * constants.l_pi
        * zeta)
}

/// Constants of the exponential envelope `‖f^t(x)‖ ≤ m e^{-kt} ‖x‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityConstants<T> {
    pub mu: T,
    pub lambda: T,
    pub kappa0_bar: T,
    pub theta0: T,
    pub gamma0: T,
    pub gamma: T,
    /// `1/√(1-γ)`
    pub m_stmt: T,
    /// `1/√(1-γ₀)`
    pub m_proof: T,
    /// `-½ ln(2 - γ/γ₀)`; absent when the logarithm's argument is not positive.
    pub k: Option<T>,
    pub applicable: bool,
}

impl<T: Scalar> StabilityConstants<T> {
    /// Named hypotheses of the envelope and whether each holds.
    pub fn preconditions(&self) -> Vec<Precondition> {
        let rate = self.k;
        vec![
            Precondition::new("gamma_in_(gamma0,1)", self.gamma > self.gamma0 && self.gamma < T::one()),
            Precondition::new("envelope_rate_defined", rate.is_some()),
            Precondition::new(
                "m_exp_neg_k_below_one",
                rate.is_some_and(|k| self.m_proof * (-k).exp() < T::one()),
            ),
        ]
    }

    pub fn failed_precondition(&self) -> Option<&'static str> {
        self.preconditions().into_iter().find(|p| !p.holds).map(|p| p.name)
    }

    /// `m e^{-kt}` with `m = m_proof`.
    pub fn envelope(&self, t: usize) -> Option<T> {
        self.k
            .map(|k| self.m_proof * (-k * T::from_usize(t).expect("step fits")).exp())
    }
}

/// Computes `μ, λ, κ̄₀, θ₀, γ₀, m, k` for a stabilizing reference gain `k0`.
pub fn stability_constants<T: Scalar>(
    sys: &LinearSystem<T>,
    cost: &QuadraticCost<T>,
    k0: &LinearPolicy<T>,
    gamma: T,
) -> Result<StabilityConstants<T>> {
    check_discount(gamma)?;
    let cc = cost_constants(cost)?;
    let a0 = closed_loop_matrix(sys, k0)?;
    let rho = spectral_radius(&a0);
    if rho >= T::one() {
        return Err(Error::Unstable {
            spectral_radius: rho.as_f64(),
        });
    }
    let x = stein_fixed_point(&a0, &Matrix::identity(sys.n()), T::fixed_point_tol(), 64)?;
    let theta0 = symmetric_eigen(&x).max();
    let kappa0_bar = k0.lipschitz();
    let gamma0 = T::one() - cc.mu / (cc.lambda * (kappa0_bar + T::one()) * theta0);
    let arg = T::lit(2.0) - gamma / gamma0;
    let k = (arg > T::zero() && gamma0 > T::zero()).then(|| -T::lit(0.5) * arg.ln());
    let m_proof = T::one() / (T::one() - gamma0).sqrt();
    let mut sc = StabilityConstants {
        mu: cc.mu,
        lambda: cc.lambda,
        kappa0_bar,
        theta0,
        gamma0,
        gamma,
        m_stmt: T::one() / (T::one() - gamma).sqrt(),
        m_proof,
        k,
        applicable: false,
    };
    sc.applicable = sc.failed_precondition().is_none();
    Ok(sc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport<T> {
    /// `m e^{-kt}‖x₀‖ - ‖x_t‖` for each state of the trajectory.
    pub slacks: Vec<T>,
    pub min_slack: T,
    pub pass: bool,
}

/// Checks a nominal expert trajectory against the exponential envelope.
pub fn envelope_check<T: Scalar>(
    traj: &Trajectory<T>,
    sc: &StabilityConstants<T>,
) -> Result<EnvelopeReport<T>> {
    if let Some(name) = sc.failed_precondition() {
        return Err(Error::Inapplicable(format!(
            "exponential envelope hypothesis `{name}` fails (gamma={}, gamma0={})",
            sc.gamma, sc.gamma0
        )));
    }
    let x0 = norm(traj.initial_state());
    let slacks: Vec<T> = traj
        .states
        .iter()
        .enumerate()
        .map(|(t, x)| sc.envelope(t).expect("rate checked") * x0 - norm(x))
        .collect();
    let min_slack = slacks.iter().copied().fold(T::infinity(), T::min);
    Ok(EnvelopeReport {
        pass: min_slack >= -T::lit(1e-9),
        slacks,
        min_slack,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Precondition {
    pub name: &'static str,
    pub holds: bool,
}

impl Precondition {
    pub fn new(name: &'static str, holds: bool) -> Self {
        Self { name, holds }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Bound<T> {
    Certified(T),
    NotCertified { reason: String },
}

impl<T: Scalar> Bound<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Self::Certified(v) => Some(*v),
            Self::NotCertified { .. } => None,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, Self::Certified(_))
    }
}

/// `t ↦ ℓ_f^u · (Σ_{τ<t} ℓ^τ) · (ℓ_π ζ + ε)`, i.e. the geometric form
/// `(1-ℓᵗ)/(1-ℓ)` without the removable singularity at `ℓ = 1`.
pub fn tube_radius<T: Scalar>(l_f_u: T, l_f_pi_star: T, l_pi: T, zeta: T, eps: T, horizon: usize) -> Vec<T> {
    let drive = l_f_u * (l_pi * zeta + eps);
    let mut out = Vec::with_capacity(horizon + 1);
    let mut partial = T::zero();
    let mut power = T::one();
    for _ in 0..=horizon {
        out.push(drive * partial);
        partial = partial + power;
        power = power * l_f_pi_star;
    }
    out
}

/// Safe initial radius `r' = r - ℓ_f^u (ℓ_π ζ + ε) / (1 - ℓ)`, when `ℓ < 1`.
pub fn safe_radius<T: Scalar>(r: T, l_f_u: T, l_f_pi_star: T, l_pi: T, zeta: T, eps: T) -> Option<T> {
    (l_f_pi_star < T::one()).then(|| r - l_f_u * (l_pi * zeta + eps) / (T::one() - l_f_pi_star))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TubeConfig<T> {
    pub r: T,
    pub zeta: T,
    pub eps: T,
    pub pert: PerturbationModel<T>,
    pub num_trials: usize,
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TubeReport<T> {
    pub certified: Bound<T>,
    pub l_f_pi_star: T,
    pub r_prime: Option<T>,
    pub tube: Vec<T>,
    pub trials: usize,
    /// Largest of `‖x̂_δ - x*‖ - tube(t)` and `‖x̂_δ‖ - r` over all trials.
    pub max_violation: T,
    pub left_ball: bool,
    pub pass: bool,
}

/// Simulates paired trajectories (perturbed learned policy, nominal expert)
/// from `B_{r'}(0)` and checks them against the robust stability tube.
pub fn tube_check<T: Scalar>(
    sys: &LinearSystem<T>,
    cost: &QuadraticCost<T>,
    k_star: &LinearPolicy<T>,
    k_hat: &LinearPolicy<T>,
    cfg: &TubeConfig<T>,
) -> Result<TubeReport<T>> {
    let consts = lipschitz_constants(sys, cost, k_hat, cfg.r, cfg.zeta)?;
    let l_star = spectral_norm(&closed_loop_matrix(sys, k_star)?);
    let tube = tube_radius(consts.l_f_u, l_star, consts.l_pi, cfg.zeta, cfg.eps, cfg.horizon);
    let r_prime = safe_radius(cfg.r, consts.l_f_u, l_star, consts.l_pi, cfg.zeta, cfg.eps);
    let refuse = |reason: String| TubeReport {
        certified: Bound::NotCertified { reason },
        l_f_pi_star: l_star,
        r_prime,
        tube: tube.clone(),
        trials: 0,
        max_violation: T::nan(),
        left_ball: false,
        pass: false,
    };
    let Some(rp) = r_prime else {
        return Ok(refuse(format!(
            "expert closed loop is not contractive: sigma_max(A - BK*) = {l_star} >= 1"
        )));
    };
    if !(rp > T::zero()) {
        return Ok(refuse(format!("safe initial radius r' = {rp} is not positive")));
    }

    let hint = match cfg.pert.mode {
        PerturbationMode::GreedyAdversarial { .. } => Some(policy_value_matrix(sys, cost, k_hat)?.p),
        _ => None,
    };
    let nominal = PerturbationModel::none();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut max_violation = T::neg_infinity();
    let mut left_ball = false;
    for i in 0..cfg.num_trials {
        let u: f64 = rng.random();
        let radius = rp * T::lit(u.powf(1.0 / sys.n() as f64));
        let x0 = sample_sphere(&mut rng, sys.n(), radius);
        let stream = cfg.pert.with_seed(cfg.pert.seed.wrapping_add(i as u64));
        let learned = rollout(sys, k_hat, &x0, cfg.horizon, &stream, hint.as_ref())?;
        let expert = rollout(sys, k_star, &x0, cfg.horizon, &nominal, None)?;
        for (t, (xh, xs)) in learned.states.iter().zip(&expert.states).enumerate() {
            let gap = norm(&sub_vec(xh, xs)) - tube[t];
            let excess = norm(xh) - cfg.r;
            left_ball |= excess > T::lit(1e-9);
            max_violation = max_violation.max(gap).max(excess);
        }
    }
    Ok(TubeReport {
        certified: Bound::Certified(rp),
        l_f_pi_star: l_star,
        r_prime,
        tube,
        trials: cfg.num_trials,
        max_violation,
        left_ball,
        pass: max_violation <= T::lit(1e-9),
    })
}

/// Inputs for a full certificate of one learned policy.
#[derive(Clone, Debug)]
pub struct CertifyInput<'a, T> {
    pub sys: &'a LinearSystem<T>,
    pub cost: &'a QuadraticCost<T>,
    pub k_star: &'a LinearPolicy<T>,
    pub k_hat: &'a LinearPolicy<T>,
    pub alpha: T,
    pub zeta: T,
    pub r: T,
    /// Reference stabilizing gain for the envelope; defaults to `k_star`.
    pub k0: Option<&'a LinearPolicy<T>>,
    /// Number of tube radii to tabulate.
    pub tube_horizon: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport<T> {
    pub constants: LipschitzConstants<T>,
    pub expert_constants: LipschitzConstants<T>,
    /// `None` when the reference gain does not stabilize the plant.
    pub stability: Option<StabilityConstants<T>>,
    pub l_v_star: Option<T>,
    pub l_v_hat: Option<T>,
    pub eps: T,
    pub alpha: T,
    pub zeta: T,
    pub regret_bound: Bound<T>,
    pub robustness_bound: Bound<T>,
    pub envelope: Bound<T>,
    pub tube: Bound<T>,
    pub tube_radius: Vec<T>,
    pub r_prime: Option<T>,
    pub preconditions: Vec<Precondition>,
}

impl<T: Scalar> CertificateReport<T> {
    /// True when every bound in the report is certified.
    pub fn all_certified(&self) -> bool {
        self.regret_bound.is_certified()
            && self.robustness_bound.is_certified()
            && self.envelope.is_certified()
            && self.tube.is_certified()
    }
}

fn bound_or<T: Scalar>(ok: bool, value: impl FnOnce() -> Result<T>, reason: &str) -> Result<Bound<T>> {
    if ok {
        Ok(Bound::Certified(value()?))
    } else {
        Ok(Bound::NotCertified {
            reason: reason.to_string(),
        })
    }
}

/// Assembles every constant and bound for `(K̂, α, ζ)`.
///
/// `ℓ_c^u` is evaluated on inputs up to `max(σ(K̂), σ(K*))·(r + ζ)` since
/// both policies' actions enter the regret argument.
pub fn certify<T: Scalar>(input: &CertifyInput<'_, T>) -> Result<CertificateReport<T>> {
    let CertifyInput {
        sys,
        cost,
        k_star,
        k_hat,
        alpha,
        zeta,
        r,
        k0,
        tube_horizon,
    } = *input;
    let gamma = cost.gamma();
    let hat = lipschitz_constants(sys, cost, k_hat, r, zeta)?;
    let star = lipschitz_constants(sys, cost, k_star, r, zeta)?;
    let cap = hat.input_cap.max(star.input_cap);
    let hat = hat.with_input_cap(cap);
    let star = star.with_input_cap(cap);

    let l_v_star = value_lipschitz(&star, gamma).ok();
    let l_v_hat = value_lipschitz(&hat, gamma).ok();
    let eps = learning_error(k_hat, k_star, r)?;
    let (stability, unstable) = match stability_constants(sys, cost, k0.unwrap_or(k_star), gamma) {
        Ok(sc) => (Some(sc), None),
        Err(Error::Unstable { spectral_radius }) => (None, Some(spectral_radius)),
        Err(e) => return Err(e),
    };

    let gamma_ok = gamma > T::zero() && gamma < T::one();
    let contractive = star.l_f_pi < T::one();
    let r_prime = safe_radius(r, hat.l_f_u, star.l_f_pi, hat.l_pi, zeta, eps);
    let r_prime_ok = r_prime.is_some_and(|rp| rp > T::zero());

    let mut preconditions = vec![
        Precondition::new("gamma_in_(0,1)", gamma_ok),
        Precondition::new("lemma_expert_gamma_l_f_pi_below_one", l_v_star.is_some()),
        Precondition::new("lemma_learned_gamma_l_f_pi_below_one", l_v_hat.is_some()),
        Precondition::new("expert_contractive_l_f_pi_star_below_one", contractive),
        Precondition::new("safe_radius_positive", r_prime_ok),
    ];
    preconditions.push(Precondition::new("reference_gain_stable", stability.is_some()));
    if let Some(sc) = &stability {
        preconditions.extend(sc.preconditions());
    }

    let regret = bound_or(
        gamma_ok && l_v_star.is_some(),
        || regret_bound(&star, l_v_star.expect("checked"), gamma, eps),
        "value-Lipschitz lemma fails for the expert (gamma * l_f_pi* >= 1)",
    )?;
    let robust = bound_or(
        gamma_ok && l_v_hat.is_some(),
        || robustness_bound(&hat, l_v_hat.expect("checked"), gamma, zeta),
        "value-Lipschitz lemma fails for the learned policy (gamma * l_f_pi_hat >= 1)",
    )?;
    let envelope = match (&stability, unstable) {
        (Some(sc), _) => match sc.failed_precondition() {
            None => Bound::Certified(sc.m_proof),
            Some(name) => Bound::NotCertified {
                reason: format!("exponential envelope hypothesis `{name}` fails"),
            },
        },
        (None, rho) => Bound::NotCertified {
            reason: format!(
                "reference gain does not stabilize the plant (spectral radius {})",
                rho.unwrap_or(f64::NAN)
            ),
        },
    };
    let tube = match (contractive, r_prime) {
        (true, Some(rp)) if rp > T::zero() => Bound::Certified(rp),
        (false, _) => Bound::NotCertified {
            reason: format!("expert closed loop not contractive: sigma_max(A - BK*) = {}", star.l_f_pi),
        },
        (_, rp) => Bound::NotCertified {
            reason: format!(
                "safe initial radius r' = {} is not positive",
                rp.map_or(T::nan(), |v| v)
            ),
        },
    };

    Ok(CertificateReport {
        tube_radius: tube_radius(hat.l_f_u, star.l_f_pi, hat.l_pi, zeta, eps, tube_horizon),
        constants: hat,
        expert_constants: star,
        stability,
        l_v_star,
        l_v_hat,
        eps,
        alpha,
        zeta,
        regret_bound: regret,
        robustness_bound: robust,
        envelope,
        tube,
        r_prime,
        preconditions,
    })
}
