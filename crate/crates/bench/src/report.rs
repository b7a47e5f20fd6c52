//! Serializable views of library results. Field order is the JSON key order.

use robust_policy::certificates::{Bound, CertificateReport, LipschitzConstants, StabilityConstants};
use robust_policy::expert::LqrSolution;
use robust_policy::linalg::spectral_radius;
use robust_policy::policy_learning::FitResult;
use robust_policy::state_space::{closed_loop_matrix, LinearSystem};
use serde::Serialize;

pub const TOOL: &str = "robust-policy";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct BoundJson {
    pub certified: bool,
    pub value: Option<f64>,
    pub reason: Option<String>,
}

impl From<&Bound<f64>> for BoundJson {
    fn from(b: &Bound<f64>) -> Self {
        match b {
            Bound::Certified(v) => Self {
                certified: true,
                value: Some(*v),
                reason: None,
            },
            Bound::NotCertified { reason } => Self {
                certified: false,
                value: None,
                reason: Some(reason.clone()),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzJson {
    pub l_f_x: f64,
    pub l_f_u: f64,
    pub l_c_u: f64,
    pub l_c_pi: f64,
    pub l_f_pi: f64,
    pub l_pi: f64,
    pub domain_r: f64,
    pub input_cap: f64,
}

impl From<&LipschitzConstants<f64>> for LipschitzJson {
    fn from(c: &LipschitzConstants<f64>) -> Self {
        Self {
            l_f_x: c.l_f_x,
            l_f_u: c.l_f_u,
            l_c_u: c.l_c_u,
            l_c_pi: c.l_c_pi,
            l_f_pi: c.l_f_pi,
            l_pi: c.l_pi,
            domain_r: c.domain_r,
            input_cap: c.input_cap,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityJson {
    pub mu: f64,
    pub lambda: f64,
    pub kappa0_bar: f64,
    pub theta0: f64,
    pub gamma0: f64,
    pub gamma: f64,
    pub m_stmt: f64,
    pub m_proof: f64,
    pub k: Option<f64>,
    pub applicable: bool,
}

impl From<&StabilityConstants<f64>> for StabilityJson {
    fn from(s: &StabilityConstants<f64>) -> Self {
        Self {
            mu: s.mu,
            lambda: s.lambda,
            kappa0_bar: s.kappa0_bar,
            theta0: s.theta0,
            gamma0: s.gamma0,
            gamma: s.gamma,
            m_stmt: s.m_stmt,
            m_proof: s.m_proof,
            k: s.k,
            applicable: s.applicable,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PreconditionJson {
    pub name: &'static str,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateJson {
    pub alpha: f64,
    pub zeta: f64,
    pub eps: f64,
    pub constants: LipschitzJson,
    pub expert_constants: LipschitzJson,
    pub stability: Option<StabilityJson>,
    pub l_v_star: Option<f64>,
    pub l_v_hat: Option<f64>,
    pub regret_bound: BoundJson,
    pub robustness_bound: BoundJson,
    pub envelope: BoundJson,
    pub tube: BoundJson,
    pub r_prime: Option<f64>,
    pub tube_radius: Vec<f64>,
    pub preconditions: Vec<PreconditionJson>,
}

impl From<&CertificateReport<f64>> for CertificateJson {
    fn from(c: &CertificateReport<f64>) -> Self {
        Self {
            alpha: c.alpha,
            zeta: c.zeta,
            eps: c.eps,
            constants: (&c.constants).into(),
            expert_constants: (&c.expert_constants).into(),
            stability: c.stability.as_ref().map(StabilityJson::from),
            l_v_star: c.l_v_star,
            l_v_hat: c.l_v_hat,
            regret_bound: (&c.regret_bound).into(),
            robustness_bound: (&c.robustness_bound).into(),
            envelope: (&c.envelope).into(),
            tube: (&c.tube).into(),
            r_prime: c.r_prime,
            tube_radius: c.tube_radius.clone(),
            preconditions: c
                .preconditions
                .iter()
                .map(|p| PreconditionJson {
                    name: p.name,
                    holds: p.holds,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitJson {
    pub alpha: f64,
    pub gain: Vec<Vec<f64>>,
    pub lip_k_hat: f64,
    pub loss: f64,
    pub active: bool,
    pub iters: usize,
    pub converged: bool,
}

impl FitJson {
    pub fn new(alpha: f64, fit: &FitResult<f64>) -> Self {
        Self {
            alpha,
            gain: fit.policy.gain().to_rows(),
            lip_k_hat: fit.policy.lipschitz(),
            loss: fit.loss,
            active: fit.active,
            iters: fit.iters,
            converged: fit.converged,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpertJson {
    pub gain: Vec<Vec<f64>>,
    pub lipschitz: f64,
    pub closed_loop_spectral_radius: f64,
    pub riccati_iterations: usize,
    pub value_matrix: Vec<Vec<f64>>,
}

impl ExpertJson {
    pub fn new(sys: &LinearSystem<f64>, sol: &LqrSolution<f64>) -> Self {
        let acl = closed_loop_matrix(sys, &sol.policy).expect("expert matches plant");
        Self {
            gain: sol.policy.gain().to_rows(),
            lipschitz: sol.policy.lipschitz(),
            closed_loop_spectral_radius: spectral_radius(&acl),
            riccati_iterations: sol.iterations,
            value_matrix: sol.value.to_rows(),
        }
    }
}

