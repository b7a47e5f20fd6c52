//! Lipschitz-constrained behavioural cloning over linear feedback.
//!
//! The loss is the mean squared error `(1/NT) Σ ‖u_t + K x_t‖²` over every
//! demonstrated pair, and the Lipschitz budget `lip(π) = σ_max(K) ≤ α` is
//! enforced exactly by projecting onto the spectral-norm ball.

use crate::error::{Error, Result};
use crate::expert::DemoSet;
use crate::linalg::{lstsq, spectral_norm, symmetric_eigen, Matrix};
use crate::scalar::Scalar;
use crate::state_space::LinearPolicy;

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig<T> {
    pub alpha: T,
    pub max_iters: usize,
    pub grad_tol: T,
}

impl<T: Scalar> FitConfig<T> {
    pub fn new(alpha: T) -> Self {
        Self {
            alpha,
            max_iters: 20_000,
            grad_tol: T::fixed_point_tol(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha >= T::zero()) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz budget must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.grad_tol > T::zero()) || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "grad_tol must be > 0 and max_iters >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult<T> {
    pub policy: LinearPolicy<T>,
    /// Mean squared error over all pairs.
    pub loss: T,
    /// Whether the Lipschitz constraint binds at the returned gain.
    pub active: bool,
    pub iters: usize,
    pub converged: bool,
    /// Learning error `r·σ_max(K̂ - K*)`, once the expert is known.
    pub eps_bound: Option<T>,
    /// Loss after each accepted iterate, starting with the initial point.
    pub loss_history: Vec<T>,
}

/// Sufficient statistics of the squared loss: `G = XXᵀ/M`, `C = UXᵀ/M`,
/// `s = tr(UUᵀ)/M`. Loss and gradient never revisit the raw data.
struct LossModel<T> {
    gram: Matrix<T>,
    cross: Matrix<T>,
    u_energy: T,
}

impl<T: Scalar> LossModel<T> {
    fn new(demos: &DemoSet<T>) -> Self {
        let (x, u) = demos.stacked();
        let inv_m = T::one() / T::from_usize(x.cols()).expect("pair count fits");
        let gram = (&x * &x.transpose()).scale(inv_m).symmetrize();
        let cross = (&u * &x.transpose()).scale(inv_m);
        let u_energy = u.as_slice().iter().fold(T::zero(), |s, &v| s + v * v) * inv_m;
        Self {
            gram,
            cross,
            u_energy,
        }
    }

    /// `(1/M) Σ ‖u + Kx‖² = tr(K G Kᵀ) + 2 tr(K Cᵀ) + s`.
    fn loss(&self, k: &Matrix<T>) -> T {
        let kg = k * &self.gram;
        let quad = kg
            .as_slice()
            .iter()
            .zip(k.as_slice())
            .fold(T::zero(), |s, (&a, &b)| s + a * b);
        let lin = self
            .cross
            .as_slice()
            .iter()
            .zip(k.as_slice())
            .fold(T::zero(), |s, (&a, &b)| s + a * b);
        (quad + T::lit(2.0) * lin + self.u_energy).max(T::zero())
    }

    /// `∇ loss = 2 (K G + C)`.
    fn gradient(&self, k: &Matrix<T>) -> Matrix<T> {
        (&(k * &self.gram) + &self.cross).scale(T::lit(2.0))
    }

    /// Lipschitz constant of the gradient, `2 λ_max(G)`.
    fn smoothness(&self) -> T {
        T::lit(2.0) * symmetric_eigen(&self.gram).max()
    }
}

/// Mean squared imitation loss of a gain on a dataset.
pub fn imitation_loss<T: Scalar>(demos: &DemoSet<T>, k: &Matrix<T>) -> T {
    LossModel::new(demos).loss(k)
}

/// Unconstrained least-squares gain `argmin Σ ‖u_t + K x_t‖²`.
pub fn fit_unconstrained<T: Scalar>(demos: &DemoSet<T>) -> Result<LinearPolicy<T>> {
    let (x, u) = demos.stacked();
    // Xᵀ Kᵀ ≈ -Uᵀ
    let kt = lstsq(&x.transpose(), &u.transpose().scale(-T::one()))?;
    LinearPolicy::new(kt.transpose())
}

/// Frobenius-nearest matrix with `σ_max ≤ α`: singular values above `α`
/// are clipped to `α`, everything else is left untouched.
pub fn project_spectral<T: Scalar>(k: &Matrix<T>, alpha: T) -> Matrix<T> {
    let alpha = alpha.max(T::zero());
    if spectral_norm(k) <= alpha {
        return k.clone();
    }
    // K V = U Σ, so K V diag(min(1, α/σ)) Vᵀ = U min(Σ, α) Vᵀ.
    let eig = symmetric_eigen(&(&k.transpose() * k));
    let v = &eig.vectors;
    let shrink: Vec<T> = eig
        .values
        .iter()
        .map(|&s2| {
            let s = s2.max(T::zero()).sqrt();
            if s > alpha {
                alpha / s
            } else {
                T::one()
            }
        })
        .collect();
    let scaled_v = Matrix::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] * shrink[j]);
    let out = &(k * &scaled_v) * &v.transpose();
    // the rescaling is exact up to rounding; trim any excess it leaves behind
    let s = spectral_norm(&out);
    if s > alpha && s > T::zero() {
        out.scale(alpha / s)
    } else {
        out
    }
}

/// Solves the constrained problem `min loss(K)` s.t. `σ_max(K) ≤ α` by
/// projected gradient descent with step `1/L`.
///
/// The iteration starts from the projected least-squares gain, so the result
/// is never worse than that baseline, and it returns the best iterate with
/// `converged = false` if the iteration cap is hit.
pub fn fit_lipschitz_constrained<T: Scalar>(
    demos: &DemoSet<T>,
    cfg: &FitConfig<T>,
) -> Result<FitResult<T>> {
    cfg.validate()?;
    let ls = fit_unconstrained(demos)?;
    let model = LossModel::new(demos);
    let alpha = cfg.alpha;
    let active_tol = T::lit(1e-6);

    if ls.lipschitz() <= alpha {
        let loss = model.loss(ls.gain());
        let active = ls.lipschitz() >= alpha - active_tol;
        return Ok(FitResult {
            policy: ls,
            loss,
            active,
            iters: 0,
            converged: true,
            eps_bound: None,
            loss_history: vec![loss],
        });
    }

    let lip = model.smoothness();
    let step = T::one() / lip;
    let mut k = project_spectral(ls.gain(), alpha);
    let mut loss = model.loss(&k);
    let mut history = vec![loss];
    let mut converged = false;
    let mut iters = 0;
    while iters < cfg.max_iters {
        iters += 1;
        let g = model.gradient(&k);
        let next = project_spectral(&(&k - &g.scale(step)), alpha);
        // gradient mapping norm: L ‖K - P(K - ∇/L)‖
        let mapping = (&k - &next).frobenius_norm() * lip;
        let next_loss = model.loss(&next);
        if next_loss <= loss {
            k = next;
            loss = next_loss;
            history.push(loss);
        }
        if mapping < cfg.grad_tol {
            converged = true;
            break;
        }
        if next_loss > loss {
            // rounding floor reached: the step no longer decreases the loss
            converged = mapping < cfg.grad_tol.sqrt();
            break;
        }
    }

    let active = spectral_norm(&k) >= alpha - active_tol;
    Ok(FitResult {
        policy: LinearPolicy::new(k)?,
        loss,
        active,
        iters,
        converged,
        eps_bound: None,
        loss_history: history,
    })
}

/// `ε = r·σ_max(K̂ - K*)`: the exact sup over `B_r(0)` of `‖π̂(x) - π*(x)‖`
/// for linear policies.
pub fn learning_error<T: Scalar>(
    k_hat: &LinearPolicy<T>,
    k_star: &LinearPolicy<T>,
    r: T,
) -> Result<T> {
    if k_hat.gain().shape() != k_star.gain().shape() {
        return Err(Error::InvalidArgument(format!(
            "gain shapes differ: {:?} vs {:?}",
            k_hat.gain().shape(),
            k_star.gain().shape()
        )));
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidArgument("radius must be > 0".into()));
    }
    Ok(r * spectral_norm(&(k_hat.gain() - k_star.gain())))
}

impl<T: Scalar> FitResult<T> {
    /// Fills `eps_bound` against the expert gain on `B_r(0)`.
    pub fn with_learning_error(mut self, k_star: &LinearPolicy<T>, r: T) -> Result<Self> {
        self.eps_bound = Some(learning_error(&self.policy, k_star, r)?);
        Ok(self)
    }
}
