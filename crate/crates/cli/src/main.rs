//! `elastreg`: register, simulate, evaluate, rigid-align, sweep and inspect.
//!
//! Exit codes: 0 success, 1 usage, 2 input, 3 numerical.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod cmd;
mod config;
mod error;

use config::RunConfig;
use error::{CmdResult, Failure};

#[derive(Debug, Parser)]
#[command(
    name = "elastreg",
    version,
    about = "Nonrigid organ registration with a soft-spring stabilized elastic model"
)]
struct Cli {
    /// TOML or JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the optimizer trace to stderr.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Register a volume mesh to a point cloud.
    Register(cmd::register::RegisterArgs),
    /// Generate synthetic cases with known ground truth.
    Simulate(cmd::simulate::SimulateArgs),
    /// Score a registration against ground truth or fiducials.
    Evaluate(cmd::evaluate::EvaluateArgs),
    /// Rigidly align two point sets with ICP.
    Icp(cmd::icp::IcpArgs),
    /// One-at-a-time parameter sweep over synthetic cases.
    Sweep(cmd::sweep::SweepArgs),
    /// Describe meshes, clouds and case directories.
    Info(cmd::info::InfoArgs),
}

/// Settings shared by every command after merging file and flags.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub config: RunConfig,
    pub trace: bool,
    pub seed: u64,
}

/// Registration parameter overrides shared by `register` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct RegistrationFlags {
    /// Soft-spring constant.
    #[arg(long)]
    kss: Option<f64>,
    /// Poisson ratio.
    #[arg(long)]
    nu: Option<f64>,
    /// Young's modulus.
    #[arg(long)]
    youngs: Option<f64>,
    /// Iteration count.
    #[arg(long)]
    iters: Option<usize>,
    /// Use this fixed step instead of the optimal one.
    #[arg(long, value_name = "ALPHA")]
    fixed_step: Option<f64>,
    /// Plain gradient descent without Nesterov momentum.
    #[arg(long)]
    no_momentum: bool,
}

impl RegistrationFlags {
    pub fn apply(
        &self,
        mut cfg: elastic_register::registration::RegistrationConfig,
    ) -> elastic_register::registration::RegistrationConfig {
        use elastic_register::registration::{Momentum, StepMode};
        if let Some(v) = self.kss {
            cfg.k_ss = v;
        }
        if let Some(v) = self.nu {
            cfg.poisson_ratio = v;
        }
        if let Some(v) = self.youngs {
            cfg.youngs_modulus = v;
        }
        if let Some(v) = self.iters {
            cfg.max_iters = v;
        }
        if let Some(a) = self.fixed_step {
            cfg.step = StepMode::Fixed(a);
        }
        if self.no_momentum {
            cfg.momentum = Momentum::None;
        }
        cfg
    }
}

fn context(cli: &Cli) -> CmdResult<Ctx> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = Some(s);
        config.registration.rng_seed = s;
    }
    if let Some(t) = cli.threads {
        config.threads = Some(t);
    }
    if let Some(t) = config.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    Ok(Ctx {
        trace: cli.trace || config.trace,
        seed: config.seed.unwrap_or(0),
        config,
    })
}

fn run(cli: Cli) -> CmdResult {
    let ctx = context(&cli)?;
    match &cli.command {
        Command::Register(a) => cmd::register::run(&ctx, a),
        Command::Simulate(a) => cmd::simulate::run(&ctx, a),
        Command::Evaluate(a) => cmd::evaluate::run(&ctx, a),
        Command::Icp(a) => cmd::icp::run(&ctx, a),
        Command::Sweep(a) => cmd::sweep::run(&ctx, a),
        Command::Info(a) => cmd::info::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("elastreg: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
