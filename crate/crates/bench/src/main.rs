// `!(x > 0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robust_policy_bench::commands::{cmd_certify, cmd_demo_gen, cmd_fit, cmd_track};
use robust_policy_bench::sweep::cmd_sweep;
use robust_policy_bench::{load_config, Overrides, Result};

#[derive(Parser)]
#[command(name = "robust-policy", version, about = "Lipschitz-constrained imitation of LQR experts, with regret and robustness certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate expert demonstrations and write them as CSV plus a manifest.
    DemoGen(Common),
    /// Fit one Lipschitz-constrained policy.
    Fit(Common),
    /// Fit, evaluate and certify a policy for every α in the grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Evaluate the grid on the calling thread only.
        #[arg(long)]
        serial: bool,
    },
    /// Track the rectangular reference with expert and learned policies.
    Track(Common),
    /// Certify one policy; exits 0 if certified, 2 if not, 1 on error.
    Certify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<robust_policy_bench::ExperimentConfig> {
        let mut cfg = load_config(&self.config)?;
        cfg.apply(&Overrides {
            alpha: self.alpha,
            zeta: self.zeta,
            seed: self.seed,
            out: self.out.clone(),
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::DemoGen(c) => {
            let cfg = c.load()?;
            let m = cmd_demo_gen(&cfg)?;
            println!("wrote {} demos (T={}) to {}", m.num_demos, m.horizon, robust_policy_bench::demos::demo_dir(&cfg).display());
        }
        Command::Fit(c) => {
            let cfg = c.load()?;
            cmd_fit(&cfg)?;
            println!("wrote {}", cfg.output_dir.join("fit.json").display());
        }
        Command::Sweep { common, serial } => {
            let cfg = common.load()?;
            let out = cmd_sweep(&cfg, !serial)?;
            let failed = out.rows.iter().filter(|r| r.outcome.is_err()).count();
            println!(
                "wrote {} rows ({failed} failed) to {}",
                out.rows.len(),
                cfg.output_dir.join("sweep.csv").display()
            );
        }
        Command::Track(c) => {
            let cfg = c.load()?;
            let out = cmd_track(&cfg)?;
            let s = &out.summary;
            println!(
                "mean position error: expert {:.4}, learned {:.4}, perturbed {:.4}",
                s.mean_error_expert, s.mean_error_learned, s.mean_error_perturbed
            );
        }
        Command::Certify(c) => {
            let cfg = c.load()?;
            let out = cmd_certify(&cfg)?;
            println!(
                "{}: {}",
                cfg.output_dir.join("certificate.json").display(),
                if out.certified { "certified" } else { "not certified" }
            );
            return Ok(if out.certified { 0 } else { 2 });
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
