//! Experiment configuration: JSON schema, validation and resolution into
//! library objects.

use std::path::{Path, PathBuf};

use robust_policy::evaluation::default_horizon;
use robust_policy::expert::{InitSampler, QuadraticCost};
use robust_policy::linalg::symmetric_eigen;
use robust_policy::state_space::{LinearPolicy, LinearSystem, PerturbationMode};
use robust_policy::Matrix64;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, BenchError, ModuleContext, Result};

pub const BENCHMARK_PRESET: &str = "benchmark_vehicle";
const BENCHMARK_Q_DIAG: [f64; 4] = [1.0, 0.01, 1.0, 0.01];
const BENCHMARK_R_SCALE: f64 = 0.01;
const BENCHMARK_GAMMA: f64 = 0.1;

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub cost: CostSpec,
    pub demos: DemoSpec,
    pub fit: FitSpec,
    pub eval: EvalSpec,
    #[serde(default)]
    pub certify: CertifySpec,
    #[serde(default)]
    pub track: TrackSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Either a named preset or explicit `a`, `b` matrices.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub preset: Option<String>,
    pub sampling_time: Option<f64>,
    pub a: Option<Rows>,
    pub b: Option<Rows>,
}

/// Missing entries fall back to the benchmark defaults for the preset and
/// to identity weights otherwise. `q` and `q_diag` are exclusive, as are
/// `r` and `r_scale`.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub q: Option<Rows>,
    pub q_diag: Option<Vec<f64>>,
    pub w: Option<Rows>,
    pub r: Option<Rows>,
    pub r_scale: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DemoSpec {
    #[serde(default = "default_num_demos")]
    pub num_demos: usize,
    #[serde(default = "default_demo_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub sampler: SamplerSpec,
    pub seed: Option<u64>,
    /// Directory holding a `manifest.json` written by `demo-gen`. When it is
    /// absent or does not exist the demos are generated in memory.
    pub path: Option<PathBuf>,
}

fn default_num_demos() -> usize {
    50
}

fn default_demo_horizon() -> usize {
    30
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    /// `N(0, P₀)`; `P₀ = I` when omitted.
    Gaussian { p0: Option<Rows> },
    UniformBall { radius: f64 },
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self::Gaussian { p0: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub alpha_grid: AlphaGrid,
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AlphaGrid {
    List(Vec<f64>),
    Range(AlphaRange),
}

/// `start, start + step, …` up to and including `stop`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AlphaRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AlphaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Self::List(v) => Ok(v.clone()),
            Self::Range(AlphaRange { start, stop, step }) => {
                if !(*step > 0.0) || !(stop >= start) {
                    return Err(BenchError::Config(
                        "fit.alpha_grid range needs step > 0 and stop >= start".into(),
                    ));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // rounding to 12 decimals keeps 0.1 + 2·0.1 printing as 0.3
                Ok((0..count)
                    .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                    .collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    None,
    RandomSphere,
    GreedyAdversarial,
    /// Larger of the random-sphere and greedy estimates.
    #[default]
    Max,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    pub zeta: f64,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_num_x0")]
    pub num_x0: usize,
    /// Rollout horizon; defaults to the smallest `T` with `γ^T ≤ 1e-12`.
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    /// Regret ball radius `r`; defaults to `√λ_max(P₀)` (Gaussian demos) or
    /// the ball radius (uniform demos).
    pub radius: Option<f64>,
}

fn default_restarts() -> usize {
    PerturbationMode::DEFAULT_RESTARTS
}

fn default_num_x0() -> usize {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    /// Reference stabilizing gain for the exponential envelope; the expert by default.
    pub k0: Option<Rows>,
    #[serde(default = "default_tube_horizon")]
    pub tube_horizon: usize,
    #[serde(default = "default_tube_trials")]
    pub tube_trials: usize,
    /// Certificates whose status decides the exit code of `certify`.
    #[serde(default = "all_certificates")]
    pub require: Vec<CertificateKind>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Regret,
    Robustness,
    Envelope,
    Tube,
}

fn default_tube_horizon() -> usize {
    30
}

fn default_tube_trials() -> usize {
    100
}

fn all_certificates() -> Vec<CertificateKind> {
    vec![
        CertificateKind::Regret,
        CertificateKind::Robustness,
        CertificateKind::Envelope,
        CertificateKind::Tube,
    ]
}

impl Default for CertifySpec {
    fn default() -> Self {
        Self {
            k0: None,
            tube_horizon: default_tube_horizon(),
            tube_trials: default_tube_trials(),
            require: all_certificates(),
        }
    }
}

/// Rectangular waypoint reference traversed at constant speed, starting at
/// the origin and running counter-clockwise.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Number of steps; one lap when omitted.
    pub steps: Option<usize>,
    #[serde(default = "default_initial_error")]
    pub initial_error: Vec<f64>,
    /// Perturbation applied to the learned policy in the perturbed run.
    #[serde(default)]
    pub mode: TrackMode,
    /// Perturbed rollouts averaged into `mean_error_perturbed`; the CSV shows the first.
    #[serde(default = "default_track_trials")]
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrackMode {
    None,
    #[default]
    RandomSphere,
    GreedyAdversarial,
}

fn default_track_trials() -> usize {
    32
}

fn default_width() -> f64 {
    20.0
}

fn default_height() -> f64 {
    10.0
}

fn default_speed() -> f64 {
    1.0
}

fn default_initial_error() -> Vec<f64> {
    vec![1.0, 0.0, 1.0, 0.0]
}

impl Default for TrackSpec {
    fn default() -> Self {
        Self {
            width: default_width(),
            height: default_height(),
            speed: default_speed(),
            steps: None,
            initial_error: default_initial_error(),
            mode: TrackMode::default(),
            trials: default_track_trials(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub zeta: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// `--alpha` replaces the grid, `--seed` sets both the demo and the
    /// evaluation seed.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(a) = o.alpha {
            self.fit.alpha_grid = AlphaGrid::List(vec![a]);
        }
        if let Some(z) = o.zeta {
            self.eval.zeta = z;
        }
        if let Some(s) = o.seed {
            self.demos.seed = Some(s);
            self.eval.seed = Some(s);
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.demos.seed.is_none() {
            return bad("demos.seed is required (no implicit entropy)".into());
        }
        if self.eval.seed.is_none() {
            return bad("eval.seed is required (no implicit entropy)".into());
        }
        let grid = self.fit.alpha_grid.values()?;
        if grid.is_empty() {
            return bad("fit.alpha_grid must not be empty".into());
        }
        if grid.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return bad("fit.alpha_grid entries must be finite and >= 0".into());
        }
        if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
            return bad(format!(
                "fit.alpha_grid must be strictly increasing ({} then {})",
                grid[i],
                grid[i + 1]
            ));
        }
        if !(self.eval.zeta >= 0.0) || !self.eval.zeta.is_finite() {
            return bad("eval.zeta must be finite and >= 0".into());
        }
        if self.eval.num_x0 == 0 || self.eval.restarts == 0 {
            return bad("eval.num_x0 and eval.restarts must be >= 1".into());
        }
        if self.eval.horizon == Some(0) {
            return bad("eval.horizon must be >= 1".into());
        }
        if let Some(r) = self.eval.radius {
            if !(r > 0.0) || !r.is_finite() {
                return bad("eval.radius must be > 0".into());
            }
        }
        if self.demos.num_demos == 0 || self.demos.horizon == 0 {
            return bad("demos.num_demos and demos.horizon must be >= 1".into());
        }
        if self.track.trials == 0 {
            return bad("track.trials must be >= 1".into());
        }
        if !(self.track.speed > 0.0) || self.track.width < 0.0 || self.track.height < 0.0 {
            return bad("track needs speed > 0 and non-negative width and height".into());
        }
        Ok(())
    }
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| BenchError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn matrix(name: &str, rows: &Rows) -> Result<Matrix64> {
    Matrix64::from_rows(rows).map_err(|e| BenchError::Config(format!("{name}: {e}")))
}

/// Library objects built from a validated config.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub sys: LinearSystem<f64>,
    pub cost: QuadraticCost<f64>,
    pub sampler: InitSampler<f64>,
    pub grid: Vec<f64>,
    pub radius: f64,
    pub eval_horizon: usize,
    pub demo_seed: u64,
    pub eval_seed: u64,
    pub k0: Option<LinearPolicy<f64>>,
}

impl Experiment {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let sys = resolve_system(&cfg.system)?;
        let preset = cfg.system.preset.is_some();
        let cost = resolve_cost(&cfg.cost, sys.n(), sys.m(), preset)?;
        let sampler = match &cfg.demos.sampler {
            SamplerSpec::Gaussian { p0 } => InitSampler::Gaussian {
                covariance: match p0 {
                    Some(rows) => matrix("demos.sampler.p0", rows)?,
                    None => Matrix64::identity(sys.n()),
                },
            },
            SamplerSpec::UniformBall { radius } => InitSampler::UniformBall { radius: *radius },
        };
        let radius = match (cfg.eval.radius, &sampler) {
            (Some(r), _) => r,
            (None, InitSampler::Gaussian { covariance }) => {
                symmetric_eigen(covariance).max().max(0.0).sqrt()
            }
            (None, s) => s.region_radius(),
        };
        if !(radius > 0.0) {
            return Err(BenchError::Config("regret radius resolved to a non-positive value".into()));
        }
        let k0 = match &cfg.certify.k0 {
            Some(rows) => Some(LinearPolicy::new(matrix("certify.k0", rows)?).module("state_space")?),
            None => None,
        };
        Ok(Self {
            eval_horizon: cfg.eval.horizon.unwrap_or_else(|| default_horizon(cost.gamma())),
            sys,
            cost,
            sampler,
            grid: cfg.fit.alpha_grid.values()?,
            radius,
            demo_seed: cfg.demos.seed.expect("validated"),
            eval_seed: cfg.eval.seed.expect("validated"),
            k0,
        })
    }

    /// Perturbation modes whose estimates are maxed into `S`.
    pub fn modes(cfg: &EvalSpec) -> Vec<PerturbationMode> {
        let greedy = PerturbationMode::GreedyAdversarial { restarts: cfg.restarts };
        match cfg.mode {
            ModeSpec::None => vec![PerturbationMode::None],
            ModeSpec::RandomSphere => vec![PerturbationMode::RandomSphere],
            ModeSpec::GreedyAdversarial => vec![greedy],
            ModeSpec::Max => vec![PerturbationMode::RandomSphere, greedy],
        }
    }
}

fn resolve_system(spec: &SystemSpec) -> Result<LinearSystem<f64>> {
    match (&spec.preset, &spec.a, &spec.b) {
        (Some(p), None, None) if p == BENCHMARK_PRESET => {
            let ts = spec.sampling_time.unwrap_or(1.0);
            if !(ts > 0.0) || !ts.is_finite() {
                return Err(BenchError::Config("system.sampling_time must be > 0".into()));
            }
            Ok(LinearSystem::vehicle(ts))
        }
        (Some(p), None, None) => Err(BenchError::Config(format!(
            "unknown system.preset {p:?} (known: {BENCHMARK_PRESET:?})"
        ))),
        (None, Some(a), Some(b)) => {
            if spec.sampling_time.is_some() {
                return Err(BenchError::Config(
                    "system.sampling_time only applies to a preset".into(),
                ));
            }
            LinearSystem::new(matrix("system.a", a)?, matrix("system.b", b)?).module("state_space")
        }
        _ => Err(BenchError::Config(
            "system needs either `preset` or both `a` and `b`".into(),
        )),
    }
}

fn resolve_cost(spec: &CostSpec, n: usize, m: usize, preset: bool) -> Result<QuadraticCost<f64>> {
    let q = match (&spec.q, &spec.q_diag) {
        (Some(_), Some(_)) => return Err(BenchError::Config("cost.q and cost.q_diag are exclusive".into())),
        (Some(rows), None) => matrix("cost.q", rows)?,
        (None, Some(d)) => Matrix64::diag(d),
        (None, None) if preset => Matrix64::diag(&BENCHMARK_Q_DIAG),
        (None, None) => Matrix64::identity(n),
    };
    let r = match (&spec.r, spec.r_scale) {
        (Some(_), Some(_)) => return Err(BenchError::Config("cost.r and cost.r_scale are exclusive".into())),
        (Some(rows), None) => matrix("cost.r", rows)?,
        (None, Some(s)) => Matrix64::identity(m).scale(s),
        (None, None) if preset => Matrix64::identity(m).scale(BENCHMARK_R_SCALE),
        (None, None) => Matrix64::identity(m),
    };
    let w = spec.w.as_ref().map(|rows| matrix("cost.w", rows)).transpose()?;
    let gamma = match spec.gamma {
        Some(g) => g,
        None if preset => BENCHMARK_GAMMA,
        None => return Err(BenchError::Config("cost.gamma is required for explicit systems".into())),
    };
    QuadraticCost::new(q, w, r, gamma).module("expert")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "system": {"preset": "benchmark_vehicle", "sampling_time": 1.0},
            "demos": {"seed": 7},
            "fit": {"alpha_grid": [0.3, 2.0]},
            "eval": {"zeta": 1.25, "seed": 11}
        })
    }

    fn parse(v: serde_json::Value) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig::from_json(&v.to_string()).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn preset_expands_to_vehicle() {
        let mut v = base();
        v["system"]["sampling_time"] = 0.5.into();
        let ex = Experiment::resolve(&parse(v).unwrap()).unwrap();
        let a = ex.sys.a();
        assert_eq!((a[(0, 0)], a[(0, 1)], a[(2, 3)], a[(1, 1)]), (1.0, 0.5, 0.5, 1.0));
        assert_eq!(ex.cost.gamma(), 0.1);
        assert_eq!(ex.cost.r()[(1, 1)], 0.01);
        assert_eq!(ex.radius, 1.0);
        assert_eq!(ex.eval_horizon, 12);
    }

    #[test]
    fn missing_seed_is_a_validation_error() {
        let mut v = base();
        v["demos"] = serde_json::json!({});
        let err = parse(v).unwrap_err().to_string();
        assert!(err.contains("demos.seed"), "{err}");
    }

    #[test]
    fn repeated_alpha_rejected() {
        let mut v = base();
        v["fit"]["alpha_grid"] = serde_json::json!([0.3, 0.3]);
        assert!(parse(v).unwrap_err().to_string().contains("strictly increasing"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = base();
        v["eval"]["zetta"] = 1.0.into();
        assert!(parse(v).is_err());
        let mut v = base();
        v["demos"]["sampler"] = serde_json::json!({"kind": "gaussian", "p1": [[1.0]]});
        assert!(parse(v).is_err());
    }

    #[test]
    fn range_grid_is_clean() {
        let g = AlphaGrid::Range(AlphaRange { start: 0.1, stop: 2.0, step: 0.1 }).values().unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g[2], 0.3);
        assert_eq!(*g.last().unwrap(), 2.0);
    }
}
