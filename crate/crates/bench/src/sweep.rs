//! α-sweep: fit, evaluate and certify one learned policy per grid point.

use rayon::prelude::*;
use robust_policy::certificates::{certify, CertificateReport, CertifyInput};
use robust_policy::evaluation::{nominal_regret, policy_value_matrix, robust_regret, EstimateMethod, ValueMatrix};
use robust_policy::expert::{solve_discounted_lqr, DemoSet, LqrSolution};
use robust_policy::policy_learning::{fit_lipschitz_constrained, FitConfig, FitResult};
use robust_policy::state_space::{PerturbationMode, PerturbationModel};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::demos::obtain_demos;
use crate::error::{ModuleContext, Result};
use crate::output::{csv_writer, finish_csv, fmt_f64, to_json_bytes, write_atomic};
use crate::report::{CertificateJson, ExpertJson, FitJson, TOOL, VERSION};

pub const SWEEP_HEADER: [&str; 9] = [
    "alpha", "loss", "eps", "lip_k_hat", "R", "S", "R_bound", "S_bound", "certified",
];
pub const NOT_CERTIFIED: &str = "not certified";

/// Everything a row needs, shared read-only across workers.
pub struct Context {
    pub ex: Experiment,
    pub cfg: ExperimentConfig,
    pub expert: LqrSolution<f64>,
    pub p_star: ValueMatrix<f64>,
    pub demos: DemoSet<f64>,
    pub modes: Vec<PerturbationMode>,
}

impl Context {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let ex = Experiment::resolve(cfg)?;
        let expert = solve_discounted_lqr(&ex.sys, &ex.cost).module("expert")?;
        let p_star = policy_value_matrix(&ex.sys, &ex.cost, &expert.policy).module("evaluation")?;
        let demos = obtain_demos(cfg, &ex, &expert.policy)?;
        Ok(Self {
            modes: Experiment::modes(&cfg.eval),
            ex,
            cfg: cfg.clone(),
            expert,
            p_star,
            demos,
        })
    }

    pub fn fit(&self, alpha: f64) -> Result<FitResult<f64>> {
        let mut fc = FitConfig::new(alpha);
        if let Some(it) = self.cfg.fit.max_iters {
            fc.max_iters = it;
        }
        if let Some(tol) = self.cfg.fit.grad_tol {
            fc.grad_tol = tol;
        }
        fit_lipschitz_constrained(&self.demos, &fc)
            .and_then(|f| f.with_learning_error(&self.expert.policy, self.ex.radius))
            .module("policy_learning")
    }

    pub fn zeta(&self) -> f64 {
        self.cfg.eval.zeta
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeEstimate {
    pub mode: &'static str,
    pub value: f64,
    pub truncation_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustJson {
    /// Max over the modes; a sampled lower estimate of the supremum.
    pub value: f64,
    pub num_samples: usize,
    pub horizon: usize,
    pub seed: u64,
    pub by_mode: Vec<ModeEstimate>,
}

/// Results for one grid point.
#[derive(Clone, Debug)]
pub struct RowData {
    pub fit: FitResult<f64>,
    pub eps: f64,
    pub regret: f64,
    pub robust: RobustJson,
    pub cert: CertificateReport<f64>,
}

impl RowData {
    pub fn certified(&self) -> bool {
        self.cert.regret_bound.is_certified() && self.cert.robustness_bound.is_certified()
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub alpha: f64,
    pub outcome: std::result::Result<RowData, String>,
}

pub fn robust_estimate(ctx: &Context, fit: &FitResult<f64>) -> Result<RobustJson> {
    let ex = &ctx.ex;
    let mut by_mode = Vec::with_capacity(ctx.modes.len());
    let mut samples = 0;
    for &mode in &ctx.modes {
        let pert = PerturbationModel::new(ctx.zeta(), mode, ex.eval_seed).module("state_space")?;
        let est = robust_regret(
            &ex.sys,
            &ex.cost,
            &fit.policy,
            ex.radius,
            &pert,
            ctx.cfg.eval.num_x0,
            ex.eval_horizon,
            ex.eval_seed,
        )
        .module("evaluation")?;
        let truncation_bound = match est.method {
            EstimateMethod::Rollout {
                truncation_bound,
                num_samples,
                ..
            } => {
                samples = num_samples;
                truncation_bound
            }
            EstimateMethod::ClosedForm => 0.0,
        };
        by_mode.push(ModeEstimate {
            mode: mode.label(),
            value: est.value,
            truncation_bound,
        });
    }
    Ok(RobustJson {
        value: by_mode.iter().map(|m| m.value).fold(0.0, f64::max),
        num_samples: samples,
        horizon: ex.eval_horizon,
        seed: ex.eval_seed,
        by_mode,
    })
}

pub fn certificate(ctx: &Context, alpha: f64, fit: &FitResult<f64>) -> Result<CertificateReport<f64>> {
    certify(&CertifyInput {
        sys: &ctx.ex.sys,
        cost: &ctx.ex.cost,
        k_star: &ctx.expert.policy,
        k_hat: &fit.policy,
        alpha,
        zeta: ctx.zeta(),
        r: ctx.ex.radius,
        k0: ctx.ex.k0.as_ref(),
        tube_horizon: ctx.cfg.certify.tube_horizon,
    })
    .module("certificates")
}

pub fn compute_row(ctx: &Context, alpha: f64) -> Result<RowData> {
    let ex = &ctx.ex;
    let fit = ctx.fit(alpha)?;
    let eps = fit.eps_bound.expect("learning error attached");
    let p_hat = policy_value_matrix(&ex.sys, &ex.cost, &fit.policy).module("evaluation")?;
    let regret = nominal_regret(&p_hat, &ctx.p_star, ex.radius).module("evaluation")?.value;
    let robust = robust_estimate(ctx, &fit)?;
    let cert = certificate(ctx, alpha, &fit)?;
    Ok(RowData {
        fit,
        eps,
        regret,
        robust,
        cert,
    })
}

/// Evaluates every grid point; rows come back in grid order either way.
pub fn run_rows(ctx: &Context, parallel: bool) -> Vec<SweepRow> {
    let row = |&alpha: &f64| SweepRow {
        alpha,
        outcome: compute_row(ctx, alpha).map_err(|e| e.to_string()),
    };
    if parallel {
        ctx.ex.grid.par_iter().map(row).collect()
    } else {
        ctx.ex.grid.iter().map(row).collect()
    }
}

fn bound_cell(v: Option<f64>) -> String {
    v.map_or_else(|| NOT_CERTIFIED.to_string(), fmt_f64)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(SWEEP_HEADER).expect("in-memory");
    for row in rows {
        let rec = match &row.outcome {
            Ok(d) => vec![
                fmt_f64(row.alpha),
                fmt_f64(d.fit.loss),
                fmt_f64(d.eps),
                fmt_f64(d.fit.policy.lipschitz()),
                fmt_f64(d.regret),
                fmt_f64(d.robust.value),
                bound_cell(d.cert.regret_bound.value()),
                bound_cell(d.cert.robustness_bound.value()),
                d.certified().to_string(),
            ],
            Err(e) => {
                let mut rec = vec![fmt_f64(row.alpha)];
                rec.extend(std::iter::repeat_n(String::new(), 7));
                rec.push(format!("error: {e}"));
                rec
            }
        };
        w.write_record(&rec).expect("in-memory");
    }
    finish_csv(w)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedJson {
    pub radius: f64,
    pub eval_horizon: usize,
    pub alpha_grid: Vec<f64>,
    pub num_demos: usize,
    pub demo_horizon: usize,
    pub modes: Vec<&'static str>,
}

impl ResolvedJson {
    pub fn new(ctx: &Context) -> Self {
        Self {
            radius: ctx.ex.radius,
            eval_horizon: ctx.ex.eval_horizon,
            alpha_grid: ctx.ex.grid.clone(),
            num_demos: ctx.demos.len(),
            demo_horizon: ctx.demos.horizon(),
            modes: ctx.modes.iter().map(|m| m.label()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RowJson {
    pub alpha: f64,
    pub status: &'static str,
    pub error: Option<String>,
    pub fit: Option<FitJson>,
    pub eps: Option<f64>,
    pub regret: Option<f64>,
    pub robust_regret: Option<RobustJson>,
    pub certified: Option<bool>,
    pub certificate: Option<CertificateJson>,
}

impl From<&SweepRow> for RowJson {
    fn from(row: &SweepRow) -> Self {
        match &row.outcome {
            Ok(d) => Self {
                alpha: row.alpha,
                status: "ok",
                error: None,
                fit: Some(FitJson::new(row.alpha, &d.fit)),
                eps: Some(d.eps),
                regret: Some(d.regret),
                robust_regret: Some(d.robust.clone()),
                certified: Some(d.certified()),
                certificate: Some((&d.cert).into()),
            },
            Err(e) => Self {
                alpha: row.alpha,
                status: "error",
                error: Some(e.clone()),
                fit: None,
                eps: None,
                regret: None,
                robust_regret: None,
                certified: None,
                certificate: None,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a ExperimentConfig,
    pub resolved: ResolvedJson,
    pub expert: ExpertJson,
    pub rows: Vec<RowJson>,
}

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub csv: Vec<u8>,
    pub report: Vec<u8>,
}

/// Runs the sweep and renders both artifacts without touching the disk.
pub fn run_sweep(cfg: &ExperimentConfig, parallel: bool) -> Result<SweepOutput> {
    let ctx = Context::build(cfg)?;
    let rows = run_rows(&ctx, parallel);
    let report = SweepReport {
        tool: TOOL,
        version: VERSION,
        command: "sweep",
        config: cfg,
        resolved: ResolvedJson::new(&ctx),
        expert: ExpertJson::new(&ctx.ex.sys, &ctx.expert),
        rows: rows.iter().map(RowJson::from).collect(),
    };
    Ok(SweepOutput {
        csv: sweep_csv(&rows),
        report: to_json_bytes(&report),
        rows,
    })
}

/// Runs the sweep and writes `sweep.csv` and `report.json` into the output directory.
pub fn cmd_sweep(cfg: &ExperimentConfig, parallel: bool) -> Result<SweepOutput> {
    let out = run_sweep(cfg, parallel)?;
    write_atomic(&cfg.output_dir.join("sweep.csv"), &out.csv)?;
    write_atomic(&cfg.output_dir.join("report.json"), &out.report)?;
    Ok(out)
}
