use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uavmec::baselines::PolicyKind;
use uavmec::env::Scenario;
use uavmec::experiment::{self, ExperimentConfig};

#[derive(Parser)]
#[command(version, about = "Multi-UAV edge computing simulator and trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides train.workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; defaults to `<out_dir>/<run_tag>` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Random,
    Greedy,
    Checkpoint,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Random => PolicyKind::Random,
            PolicyArg::Greedy => PolicyKind::Greedy,
            PolicyArg::Checkpoint => PolicyKind::Checkpoint,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train, checkpoint and evaluate.
    Train {
        #[command(flatten)]
        common: Common,
        /// Overrides train.episodes.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a frozen policy and export traces.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "checkpoint")]
        policy: PolicyArg,
        /// Directory holding the per-agent `.umnn` files of a checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Fixed SD positions and tasks (TOML); overrides `scenario` in the config.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Overrides eval.episodes.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Brute-force single-step oracle with parity and invariance checks.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Fixed SD positions and tasks (TOML); overrides `scenario` in the config.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Parse and validate a config, printing the resolved form.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(common: &Common) -> uavmec::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.train.workers = w;
    }
    if let Some(out) = &common.out {
        // --out names the run directory itself
        cfg.out_dir = out.parent().map(PathBuf::from).unwrap_or_default();
        cfg.run_tag = out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| cfg.run_tag.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> uavmec::Result<()> {
    match cli.command {
        Command::Train { common, episodes } => {
            let mut cfg = load(&common)?;
            if let Some(e) = episodes {
                cfg.train.episodes = e;
            }
            let run = experiment::run_train(&cfg)?;
            println!("run directory: {}", run.dir.display());
            println!("{}", serde_json::to_string_pretty(&run.summary)?);
        }
        Command::Eval {
            common,
            policy,
            checkpoint,
            scenario,
            episodes,
        } => {
            let cfg = load(&common)?;
            let env = cfg.env_config();
            let kind = PolicyKind::from(policy);
            let controller = experiment::controller_for(kind, checkpoint.as_deref(), &env, cfg.eval.mode)?;
            let scenario = scenario.map(Scenario::load).transpose()?;
            let out = common.out.clone().unwrap_or_else(|| cfg.run_dir().join(format!("eval_{kind}")));
            let report = experiment::run_eval(
                &cfg,
                &controller,
                scenario,
                episodes.unwrap_or(cfg.eval.episodes),
                &out,
            )?;
            println!("{}", serde_json::to_string_pretty(&report.summary)?);
        }
        Command::OracleCheck { common, scenario } => {
            let cfg = load(&common)?;
            let scenario = scenario.map(Scenario::load).transpose()?;
            let report = experiment::run_oracle_check(&cfg, scenario)?;
            let out = common.out.clone().unwrap_or_else(|| cfg.run_dir());
            experiment::write_oracle_report(&report, &out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed {
                return Err(uavmec::Error::Config("oracle check failed".into()));
            }
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            print!("{}", cfg.resolved_toml()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
