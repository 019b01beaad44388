//! Experiment front door: one TOML file describes a run; the functions
//! here validate it, execute it and persist everything into a
//! self-describing run directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    brute_force_step_oracle, evaluate, oracle_reward, Controller, EvalReport, EvalSummary, OracleGrid,
    PolicyKind,
};
use crate::channel::ChannelParams;
use crate::compute::ComputeParams;
use crate::env::{Action, Env, EnvConfig, RewardUnits, RewardWeights, Scenario};
use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::trainer::metrics::{MetricsLog, LOG_VERSION};
use crate::trainer::{ActMode, Policy, TrainConfig, Trainer};
use crate::world::WorldConfig;

/// Observation and reward shaping knobs that sit on top of the world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub observed_sds: usize,
    pub weights: RewardWeights,
    pub units: RewardUnits,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout_seed: Option<u64>,
}

impl Default for EnvSection {
    fn default() -> Self {
        let e = EnvConfig::default();
        Self {
            observed_sds: e.observed_sds,
            weights: e.weights,
            units: e.units,
            layout_seed: e.layout_seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Act on the Gaussian and Dirichlet means.
    #[default]
    Mean,
    /// Sample from the frozen stochastic policy.
    Sample,
}

impl From<EvalMode> for ActMode {
    fn from(m: EvalMode) -> Self {
        match m {
            EvalMode::Sample => ActMode::Sample,
            EvalMode::Mean => ActMode::Mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
    pub mode: EvalMode,
    /// Evaluation episodes draw from a seed stream disjoint from training.
    pub seed_offset: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            episodes: 100,
            mode: EvalMode::Mean,
            seed_offset: 1_000_003,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_run_tag")]
    pub run_tag: String,
    /// Optional fixed SD layout / task schedule, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub compute: ComputeParams,
    #[serde(default)]
    pub env: EnvSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub oracle: OracleGrid,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_run_tag() -> String {
    "run".into()
}

impl ExperimentConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            out_dir: default_out_dir(),
            run_tag: default_run_tag(),
            scenario: None,
            world: WorldConfig::default(),
            channel: ChannelParams::default(),
            compute: ComputeParams::default(),
            env: EnvSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            oracle: OracleGrid::default(),
        }
    }

    /// Parses and validates; relative scenario paths are resolved against
    /// `base` (normally the config file's directory).
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        if let (Some(base), Some(s)) = (base, cfg.scenario.as_mut()) {
            if s.is_relative() {
                *s = base.join(&*s);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent()).map_err(|e| match e {
            Error::Toml(t) => Error::Config(format!("{}: {t}", path.display())),
            other => other,
        })
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            world: self.world.clone(),
            channel: self.channel.clone(),
            compute: self.compute.clone(),
            observed_sds: self.env.observed_sds,
            weights: self.env.weights.clone(),
            units: self.env.units.clone(),
            layout_seed: self.env.layout_seed,
        }
    }

    pub fn load_scenario(&self) -> Result<Option<Scenario>> {
        self.scenario.as_ref().map(Scenario::load).transpose()
    }

    pub fn validate(&self) -> Result<()> {
        let env = self.env_config();
        env.validate()?;
        self.train.validate()?;
        self.oracle.validate()?;
        if self.eval.episodes == 0 {
            return Err(Error::Config("eval.episodes must be at least 1".into()));
        }
        if self.run_tag.is_empty() || self.run_tag.contains(['/', '\\']) {
            return Err(Error::Config("run_tag must be a nonempty plain name".into()));
        }
        if let Some(s) = self.load_scenario()? {
            s.validate(&env)?;
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(&self.run_tag)
    }

    /// Every field written out, defaults included.
    pub fn resolved_toml(&self) -> Result<String> {
        let body = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        let layout = if self.env.layout_seed.is_none() {
            "# env.layout_seed unset: every episode draws a fresh SD layout\n"
        } else {
            ""
        };
        Ok(format!(
            "# resolved by uavmec {} (metrics log v{}, checkpoint v{})\n{layout}{body}",
            env!("CARGO_PKG_VERSION"),
            LOG_VERSION,
            checkpoint::VERSION
        ))
    }
}

/// Identifies the code and formats that produced a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub crate_version: String,
    pub seed: u64,
    pub workers: usize,
    pub metrics_log_version: u32,
    pub checkpoint_version: u32,
    pub episodes: usize,
    pub updates: usize,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// What `run_train` leaves behind.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub dir: PathBuf,
    pub policy: Policy,
    pub summary: EvalSummary,
}

/// Trains, checkpoints and evaluates the final policy.
///
/// Layout of the run directory:
/// `config.resolved.toml`, `manifest.json`, `metrics.csv`,
/// `checkpoints/update_NNNN/`, `checkpoints/final/`, `eval_summary.json`.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainRun> {
    cfg.validate()?;
    let dir = cfg.run_dir();
    create_dir(&dir)?;
    let resolved = dir.join("config.resolved.toml");
    fs::write(&resolved, cfg.resolved_toml()?).map_err(|e| Error::io(&resolved, e))?;

    let env = Arc::new(cfg.env_config());
    let scenario = cfg.load_scenario()?.map(Arc::new);
    let mut trainer = Trainer::new(cfg.train.clone(), env.clone(), scenario.clone(), cfg.seed)?;
    let mut log = MetricsLog::create(dir.join("metrics.csv"), env.num_agents())?;
    let ckpt_root = dir.join("checkpoints");
    let every = cfg.train.checkpoint_every_updates;
    trainer.run(|t, rows| {
        log.append(rows)?;
        if every > 0 && t.updates_done() % every == 0 {
            t.policy().save(ckpt_root.join(format!("update_{:04}", t.updates_done())))?;
        }
        Ok(())
    })?;
    log.finish()?;
    let policy = trainer.policy().clone();
    policy.save(ckpt_root.join("final"))?;

    let report = evaluate(
        &Controller::Learned(Arc::new(policy.clone()), cfg.eval.mode.into()),
        &env,
        scenario.as_ref(),
        0..cfg.eval.episodes,
        cfg.seed.wrapping_add(cfg.eval.seed_offset),
    )?;
    write_json(&dir.join("eval_summary.json"), &report.summary)?;
    write_json(
        &dir.join("manifest.json"),
        &RunManifest {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            workers: cfg.train.workers,
            metrics_log_version: LOG_VERSION,
            checkpoint_version: checkpoint::VERSION,
            episodes: trainer.episodes_done(),
            updates: trainer.updates_done(),
        },
    )?;
    Ok(TrainRun {
        dir,
        policy,
        summary: report.summary,
    })
}

/// Builds the controller named by `kind`, loading networks from
/// `checkpoint` when needed and checking them against the config.
pub fn controller_for(
    kind: PolicyKind,
    checkpoint: Option<&Path>,
    env: &EnvConfig,
    mode: EvalMode,
) -> Result<Controller> {
    Ok(match kind {
        PolicyKind::Random => Controller::Random,
        PolicyKind::Greedy => Controller::Greedy,
        PolicyKind::Checkpoint => {
            let dir = checkpoint
                .ok_or_else(|| Error::Config("--policy checkpoint needs --checkpoint <dir>".into()))?;
            let policy = Policy::load(dir, env.num_agents())?;
            policy.check_dims(env)?;
            Controller::Learned(Arc::new(policy), mode.into())
        }
    })
}

/// Frozen-policy evaluation. Writes `summary.json`, `episodes.jsonl` and
/// `traces.jsonl` into `out`.
pub fn run_eval(
    cfg: &ExperimentConfig,
    controller: &Controller,
    scenario: Option<Scenario>,
    episodes: usize,
    out: &Path,
) -> Result<EvalReport> {
    let env = Arc::new(cfg.env_config());
    let scenario = match scenario {
        Some(s) => Some(s),
        None => cfg.load_scenario()?,
    };
    if let Some(s) = &scenario {
        s.validate(&env)?;
    }
    let scenario = scenario.map(Arc::new);
    let report = evaluate(
        controller,
        &env,
        scenario.as_ref(),
        0..episodes,
        cfg.seed.wrapping_add(cfg.eval.seed_offset),
    )?;
    create_dir(out)?;
    write_json(&out.join("summary.json"), &report.summary)?;
    write_jsonl(&out.join("episodes.jsonl"), &report.episodes)?;
    write_jsonl(&out.join("traces.jsonl"), &report.traces)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceCheck {
    pub scale: f64,
    pub argmax_unchanged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub agent: usize,
    pub best: Action,
    pub reward: f64,
    pub evaluated: usize,
    /// Enumerated actions whose oracle reward differed (bitwise) from a
    /// fresh environment stepped with the same joint action.
    pub parity_mismatches: usize,
    pub invariance: Vec<InvarianceCheck>,
    pub passed: bool,
}

/// Weight-vector scalings checked for argmax invariance.
pub const INVARIANCE_SCALES: [f64; 5] = [0.25, 2.0, 8.0, 3.0, 0.1];

/// Runs the brute-force oracle for agent 0, cross-checks every enumerated
/// action against an independently constructed environment, and checks that
/// the argmax survives positive rescaling of the reward weights.
pub fn run_oracle_check(cfg: &ExperimentConfig, scenario: Option<Scenario>) -> Result<OracleReport> {
    let env_cfg = Arc::new(cfg.env_config());
    let scenario = match scenario {
        Some(s) => Some(s),
        None => cfg.load_scenario()?,
    }
    .map(Arc::new);
    let fresh = |c: &Arc<EnvConfig>| -> Result<Env> {
        let mut e = Env::new(c.clone(), scenario.clone())?;
        e.reset(cfg.seed);
        Ok(e)
    };
    let env = fresh(&env_cfg)?;
    let slots = env_cfg.alloc_dim();
    let others = vec![Action::hover_uniform(slots); env_cfg.num_agents()];
    let grid = &cfg.oracle;
    let res = brute_force_step_oracle(&env, 0, grid, &others)?;

    let mut parity_mismatches = 0;
    let mut joint = others.clone();
    for cand in grid.actions(&env_cfg) {
        joint[0] = cand;
        let via_oracle = oracle_reward(&env, &joint, 0)?;
        let mut independent = fresh(&env_cfg)?;
        let direct = independent.step(&joint)?.rewards[0].extrinsic;
        if via_oracle.to_bits() != direct.to_bits() {
            parity_mismatches += 1;
        }
    }

    let mut invariance = Vec::new();
    for scale in INVARIANCE_SCALES {
        let mut scaled = (*env_cfg).clone();
        scaled.weights = scaled.weights.scaled(scale);
        let r = brute_force_step_oracle(&fresh(&Arc::new(scaled))?, 0, grid, &others)?;
        invariance.push(InvarianceCheck {
            scale,
            argmax_unchanged: r.best == res.best,
        });
    }
    let passed = parity_mismatches == 0 && invariance.iter().all(|c| c.argmax_unchanged);
    Ok(OracleReport {
        agent: 0,
        best: res.best,
        reward: res.reward,
        evaluated: res.evaluated,
        parity_mismatches,
        invariance,
        passed,
    })
}

pub fn write_oracle_report(report: &OracleReport, out: &Path) -> Result<()> {
    create_dir(out)?;
    write_json(&out.join("oracle_report.json"), report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_required() {
        let err = ExperimentConfig::from_toml("run_tag = \"x\"", None).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml("seed = 1\n[world]\naltitude = 100.0\n", None).unwrap_err();
        assert!(err.to_string().contains("altitude"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::with_seed(42);
        let text = cfg.resolved_toml().unwrap();
        for needle in [
            "altitude_m = 120.0",
            "max_flight_distance_m = 150.0",
            "max_compute_hz = 20000000000.0",
            "transmit_power_w = 0.1",
        ] {
            assert!(text.contains(needle), "missing {needle}");
        }
        let back = ExperimentConfig::from_toml(&text, None).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml("seed = 1\n[train]\nclip = 1.5\n", None).is_err());
        assert!(ExperimentConfig::from_toml("seed = 1\nrun_tag = \"a/b\"\n", None).is_err());
    }
}
