//! `demo-gen`, `fit`, `certify` and `track`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_policy::certificates::{envelope_check, tube_check, Bound, StabilityConstants, TubeConfig};
use robust_policy::evaluation::{nominal_regret, policy_value_matrix};
use robust_policy::linalg::norm;
use robust_policy::state_space::{rollout, LinearPolicy, PerturbationMode, PerturbationModel, Trajectory};
use serde::Serialize;

use crate::config::{CertificateKind, ExperimentConfig, ModeSpec, TrackMode, BENCHMARK_PRESET};
use crate::demos::{demo_dir, write_demos, Manifest};
use crate::error::{BenchError, ModuleContext, Result};
use crate::output::{csv_writer, finish_csv, fmt_f64, to_json_bytes, write_atomic};
use crate::report::{CertificateJson, ExpertJson, FitJson, TOOL, VERSION};
use crate::sweep::{certificate, robust_estimate, Context, ResolvedJson, RobustJson};

/// Generates the configured demos and writes them to `demos.path`
/// (default `<output_dir>/demos`).
pub fn cmd_demo_gen(cfg: &ExperimentConfig) -> Result<Manifest> {
    let ctx = Context::build(&ExperimentConfig {
        demos: crate::config::DemoSpec {
            path: None,
            ..cfg.demos.clone()
        },
        ..cfg.clone()
    })?;
    write_demos(&demo_dir(cfg), &ctx.demos, &ctx.expert.policy)
}

fn single_alpha(ctx: &Context) -> Result<f64> {
    match ctx.ex.grid.as_slice() {
        [a] => Ok(*a),
        _ => Err(BenchError::Config(
            "this command evaluates one policy: pass --alpha or give a one-element alpha_grid".into(),
        )),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a ExperimentConfig,
    pub fit: FitJson,
    pub eps: f64,
    pub expert: ExpertJson,
}

/// Fits one policy and writes `fit.json`.
pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let ctx = Context::build(cfg)?;
    let alpha = single_alpha(&ctx)?;
    let fit = ctx.fit(alpha)?;
    let report = FitReport {
        tool: TOOL,
        version: VERSION,
        command: "fit",
        config: cfg,
        eps: fit.eps_bound.expect("learning error attached"),
        fit: FitJson::new(alpha, &fit),
        expert: ExpertJson::new(&ctx.ex.sys, &ctx.expert),
    };
    let bytes = to_json_bytes(&report);
    write_atomic(&cfg.output_dir.join("fit.json"), &bytes)?;
    Ok(bytes)
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationJson {
    pub trials: usize,
    pub horizon: usize,
    pub pass: bool,
    /// Largest signed violation of the checked inequality (≤ 0 passes).
    pub max_violation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifyReport<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a ExperimentConfig,
    pub resolved: ResolvedJson,
    pub expert: ExpertJson,
    pub fit: FitJson,
    pub regret: f64,
    pub robust_regret: RobustJson,
    pub certificate: CertificateJson,
    pub tube_simulation: Option<SimulationJson>,
    pub envelope_simulation: Option<SimulationJson>,
    pub requested: Vec<CertificateKind>,
    pub all_requested_certified: bool,
}

pub struct CertifyOutcome {
    pub report: Vec<u8>,
    pub certified: bool,
}

fn adversary_mode(ctx: &Context) -> PerturbationMode {
    match ctx.cfg.eval.mode {
        ModeSpec::None => PerturbationMode::None,
        ModeSpec::RandomSphere => PerturbationMode::RandomSphere,
        ModeSpec::GreedyAdversarial | ModeSpec::Max => PerturbationMode::GreedyAdversarial {
            restarts: ctx.cfg.eval.restarts,
        },
    }
}

fn envelope_simulation(ctx: &Context, sc: Option<&StabilityConstants<f64>>) -> Result<Option<SimulationJson>> {
    let ex = &ctx.ex;
    let Some(sc) = sc.filter(|sc| sc.applicable) else {
        return Ok(None);
    };
    let trials = ctx.cfg.certify.tube_trials;
    let horizon = ctx.cfg.certify.tube_horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(ex.eval_seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let x0: Vec<f64> = (0..ex.sys.n()).map(|_| rng.random_range(-1.0..1.0) * ex.radius).collect();
        let tr = rollout(&ex.sys, &ctx.expert.policy, &x0, horizon, &PerturbationModel::none(), None)
            .module("state_space")?;
        let rep = envelope_check(&tr, sc).module("certificates")?;
        worst = worst.max(-rep.min_slack);
    }
    Ok(Some(SimulationJson {
        trials,
        horizon,
        pass: worst <= 1e-9,
        max_violation: worst,
    }))
}

/// Certifies one policy. `certified` is true iff every requested
/// certificate holds and its simulation check (when it has one) passes.
pub fn cmd_certify(cfg: &ExperimentConfig) -> Result<CertifyOutcome> {
    let ctx = Context::build(cfg)?;
    let ex = &ctx.ex;
    let alpha = single_alpha(&ctx)?;
    let fit = ctx.fit(alpha)?;
    let p_hat = policy_value_matrix(&ex.sys, &ex.cost, &fit.policy).module("evaluation")?;
    let regret = nominal_regret(&p_hat, &ctx.p_star, ex.radius).module("evaluation")?.value;
    let robust = robust_estimate(&ctx, &fit)?;
    let cert = certificate(&ctx, alpha, &fit)?;

    let tube_simulation = if cert.tube.is_certified() {
        let pert = PerturbationModel::new(ctx.zeta(), adversary_mode(&ctx), ex.eval_seed).module("state_space")?;
        let rep = tube_check(
            &ex.sys,
            &ex.cost,
            &ctx.expert.policy,
            &fit.policy,
            &TubeConfig {
                r: ex.radius,
                zeta: ctx.zeta(),
                eps: cert.eps,
                pert,
                num_trials: cfg.certify.tube_trials,
                horizon: cfg.certify.tube_horizon,
                seed: ex.eval_seed,
            },
        )
        .module("certificates")?;
        Some(SimulationJson {
            trials: rep.trials,
            horizon: cfg.certify.tube_horizon,
            pass: rep.pass,
            max_violation: rep.max_violation,
        })
    } else {
        None
    };
    let envelope_simulation = envelope_simulation(&ctx, cert.stability.as_ref())?;

    let holds = |b: &Bound<f64>, sim: &Option<SimulationJson>| {
        b.is_certified() && sim.as_ref().is_none_or(|s| s.pass)
    };
    let certified = cfg.certify.require.iter().all(|k| match k {
        CertificateKind::Regret => cert.regret_bound.is_certified(),
        CertificateKind::Robustness => cert.robustness_bound.is_certified(),
        CertificateKind::Envelope => holds(&cert.envelope, &envelope_simulation),
        CertificateKind::Tube => holds(&cert.tube, &tube_simulation),
    });
    let report = CertifyReport {
        tool: TOOL,
        version: VERSION,
        command: "certify",
        config: cfg,
        resolved: ResolvedJson::new(&ctx),
        expert: ExpertJson::new(&ex.sys, &ctx.expert),
        fit: FitJson::new(alpha, &fit),
        regret,
        robust_regret: robust,
        certificate: (&cert).into(),
        tube_simulation,
        envelope_simulation,
        requested: cfg.certify.require.clone(),
        all_requested_certified: certified,
    };
    let bytes = to_json_bytes(&report);
    write_atomic(&cfg.output_dir.join("certificate.json"), &bytes)?;
    Ok(CertifyOutcome {
        report: bytes,
        certified,
    })
}

/// Reference states `ξ_t = (p_x, v_x, p_y, v_y)` and feedforward inputs `v_t`
/// along a rectangle of the given size, consistent with `ξ_{t+1} = Aξ_t + Bv_t`.
pub fn rectangle_reference(
    width: f64,
    height: f64,
    speed: f64,
    ts: f64,
    steps: usize,
) -> (Vec<[f64; 4]>, Vec<[f64; 2]>) {
    let perimeter = 2.0 * (width + height);
    let corners = [(0.0, 0.0), (width, 0.0), (width, height), (0.0, height), (0.0, 0.0)];
    let position = |t: usize| -> (f64, f64) {
        if perimeter == 0.0 {
            return (0.0, 0.0);
        }
        let mut s = (speed * ts * t as f64) % perimeter;
        for w in corners.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let len = (x1 - x0).abs() + (y1 - y0).abs();
            if s <= len && len > 0.0 {
                let f = s / len;
                return (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            }
            s -= len;
        }
        (0.0, 0.0)
    };
    let pos: Vec<(f64, f64)> = (0..steps + 3).map(position).collect();
    let vel: Vec<(f64, f64)> = pos
        .windows(2)
        .map(|w| ((w[1].0 - w[0].0) / ts, (w[1].1 - w[0].1) / ts))
        .collect();
    let xi = (0..=steps)
        .map(|t| [pos[t].0, vel[t].0, pos[t].1, vel[t].1])
        .collect();
    let v = (0..steps)
        .map(|t| [(vel[t + 1].0 - vel[t].0) / ts, (vel[t + 1].1 - vel[t].1) / ts])
        .collect();
    (xi, v)
}

#[derive(Clone, Debug, Serialize)]
pub struct TrackSummary {
    pub tool: &'static str,
    pub version: &'static str,
    pub alpha: f64,
    pub zeta: f64,
    pub mode: &'static str,
    pub steps: usize,
    pub trials: usize,
    pub mean_error_expert: f64,
    pub mean_error_learned: f64,
    pub mean_error_perturbed: f64,
    pub max_gap_learned_vs_expert: f64,
}

pub struct TrackOutput {
    pub csv: Vec<u8>,
    pub summary: TrackSummary,
}

fn mean_position_error(tr: &Trajectory<f64>) -> f64 {
    let total: f64 = tr.states.iter().map(|e| e[0].hypot(e[2])).sum();
    total / tr.states.len() as f64
}

/// Tracks the rectangle with the expert, the nominal learned policy and the
/// perturbed learned policy, writing `track.csv` and `track_summary.json`.
pub fn cmd_track(cfg: &ExperimentConfig) -> Result<TrackOutput> {
    if cfg.system.preset.as_deref() != Some(BENCHMARK_PRESET) {
        return Err(BenchError::Config(format!(
            "track needs the {BENCHMARK_PRESET:?} preset (positions are states 0 and 2)"
        )));
    }
    let ctx = Context::build(cfg)?;
    let ex = &ctx.ex;
    let spec = &cfg.track;
    if spec.initial_error.len() != ex.sys.n() {
        return Err(BenchError::Config(format!(
            "track.initial_error must have {} entries",
            ex.sys.n()
        )));
    }
    let alpha = single_alpha(&ctx)?;
    let fit = ctx.fit(alpha)?;
    let ts = cfg.system.sampling_time.unwrap_or(1.0);
    let perimeter = 2.0 * (spec.width + spec.height);
    let steps = spec
        .steps
        .unwrap_or_else(|| ((perimeter / (spec.speed * ts)).ceil() as usize).max(30));
    let (xi, _) = rectangle_reference(spec.width, spec.height, spec.speed, ts, steps);

    let mode = match spec.mode {
        TrackMode::None => PerturbationMode::None,
        TrackMode::RandomSphere => PerturbationMode::RandomSphere,
        TrackMode::GreedyAdversarial => PerturbationMode::GreedyAdversarial {
            restarts: cfg.eval.restarts,
        },
    };
    let hint = match mode {
        PerturbationMode::GreedyAdversarial { .. } => {
            Some(policy_value_matrix(&ex.sys, &ex.cost, &fit.policy).module("evaluation")?.p)
        }
        _ => None,
    };
    let e0 = &spec.initial_error;
    let run = |pol: &LinearPolicy<f64>, p: &PerturbationModel<f64>, h: Option<&robust_policy::Matrix64>| {
        rollout(&ex.sys, pol, e0, steps, p, h).module("state_space")
    };
    let nominal = PerturbationModel::none();
    let expert = run(&ctx.expert.policy, &nominal, None)?;
    let learned = run(&fit.policy, &nominal, None)?;
    let perturbed_runs = (0..spec.trials as u64)
        .map(|i| {
            let pert = PerturbationModel::new(ctx.zeta(), mode, ex.eval_seed.wrapping_add(i)).module("state_space")?;
            run(&fit.policy, &pert, hint.as_ref())
        })
        .collect::<Result<Vec<_>>>()?;
    let perturbed = &perturbed_runs[0];
    let mean_error_perturbed =
        perturbed_runs.iter().map(mean_position_error).sum::<f64>() / perturbed_runs.len() as f64;

    let mut w = csv_writer();
    w.write_record([
        "t", "ref_x", "ref_y", "expert_x", "expert_y", "learned_x", "learned_y", "perturbed_x", "perturbed_y",
    ])
    .expect("in-memory");
    let mut max_gap: f64 = 0.0;
    for (t, r) in xi.iter().enumerate() {
        let pos = |tr: &Trajectory<f64>| (tr.states[t][0] + r[0], tr.states[t][2] + r[2]);
        let (ex_, ey) = pos(&expert);
        let (lx, ly) = pos(&learned);
        let (px, py) = pos(perturbed);
        max_gap = max_gap.max(norm(&[lx - ex_, ly - ey]));
        let rec: Vec<String> = std::iter::once(t.to_string())
            .chain([r[0], r[2], ex_, ey, lx, ly, px, py].into_iter().map(fmt_f64))
            .collect();
        w.write_record(&rec).expect("in-memory");
    }
    let csv = finish_csv(w);
    let summary = TrackSummary {
        tool: TOOL,
        version: VERSION,
        alpha,
        zeta: ctx.zeta(),
        mode: mode.label(),
        steps,
        trials: spec.trials,
        mean_error_expert: mean_position_error(&expert),
        mean_error_learned: mean_position_error(&learned),
        mean_error_perturbed,
        max_gap_learned_vs_expert: max_gap,
    };
    write_atomic(&cfg.output_dir.join("track.csv"), &csv)?;
    write_atomic(&cfg.output_dir.join("track_summary.json"), &to_json_bytes(&summary))?;
    Ok(TrackOutput { csv, summary })
}
