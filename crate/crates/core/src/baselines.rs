//! Non-learned reference policies, frozen-policy evaluation and a
//! brute-force single-step oracle.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::compute::EpisodeMetrics;
use crate::env::{decode_action, Action, Env, EnvConfig, Observation, Scenario, TraceRecord};
use crate::error::{Error, Result};
use crate::nn::dist::dirichlet_sample;
use crate::trainer::rollout::episode_rng;
use crate::trainer::{ActMode, EpisodeRecord, Policy};
use crate::world::{self, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    Greedy,
    Checkpoint,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Random => "random",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Checkpoint => "checkpoint",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PolicyKind::Random),
            "greedy" => Ok(PolicyKind::Greedy),
            "checkpoint" => Ok(PolicyKind::Checkpoint),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected random, greedy or checkpoint)"
            ))),
        }
    }
}

/// θ ~ U[0, 2π), d ~ U[0, d_max], allocation ~ Dir(1, …, 1).
pub fn random_policy<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> Action {
    let theta = Uniform::new(0.0, TAU).expect("valid range").sample(rng);
    let distance_m = Uniform::new_inclusive(0.0, cfg.world.max_flight_distance_m)
        .expect("valid range")
        .sample(rng);
    let alloc = dirichlet_sample(&vec![1.0; cfg.alloc_dim()], rng);
    Action {
        theta,
        distance_m,
        alloc,
    }
}

/// Heads for the centroid of the least-served SDs in the UAV's own
/// sub-region and splits compute equally over whoever it will then serve.
///
/// Candidates are ranked by offload count, then distance, then index; the
/// first `observed_sds` of them form the target set.
pub fn greedy_policy(env: &Env, n: usize) -> Action {
    let cfg = env.config();
    let w = &cfg.world;
    let s = env.state();
    let me = s.uav_xy[n];
    let mut cand: Vec<(u32, f64, usize)> = env
        .region_sds(n)
        .iter()
        .map(|&m| (s.offloads[m], me.distance(&s.sd_xy[m]), m))
        .collect();
    cand.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    cand.truncate(cfg.observed_sds);

    let (theta, distance_m) = if cand.is_empty() {
        (0.0, 0.0)
    } else {
        let k = cand.len() as f64;
        let c = Point::new(
            cand.iter().map(|&(_, _, m)| s.sd_xy[m].x).sum::<f64>() / k,
            cand.iter().map(|&(_, _, m)| s.sd_xy[m].y).sum::<f64>() / k,
        );
        let gap = me.distance(&c);
        if gap == 0.0 {
            (0.0, 0.0)
        } else {
            (me.bearing_to(&c), gap.min(w.max_flight_distance_m))
        }
    };

    let dest = world::advance_uav(me, theta, distance_m, w.max_flight_distance_m, env.region(n))
        .unwrap_or(me);
    let served = world::associate(
        dest,
        env.region_sds(n).iter().copied(),
        &s.sd_xy,
        w.coverage_radius_m,
        w.max_served,
    )
    .len();
    let slots = cfg.alloc_dim();
    let alloc = if served == 0 {
        vec![1.0 / slots as f64; slots]
    } else {
        (0..slots)
            .map(|i| if i < served { 1.0 / served as f64 } else { 0.0 })
            .collect()
    };
    Action {
        theta,
        distance_m,
        alloc,
    }
}

/// Something that picks a joint action for every UAV.
#[derive(Clone, Debug)]
pub enum Controller {
    Random,
    Greedy,
    /// Frozen networks, either sampling or taking the distribution means.
    Learned(Arc<Policy>, ActMode),
}

impl Controller {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Controller::Random => PolicyKind::Random,
            Controller::Greedy => PolicyKind::Greedy,
            Controller::Learned(..) => PolicyKind::Checkpoint,
        }
    }

    pub fn actions<R: Rng + ?Sized>(&self, env: &Env, obs: &[Observation], rng: &mut R) -> Result<Vec<Action>> {
        let cfg = env.config();
        match self {
            Controller::Random => Ok((0..cfg.num_agents()).map(|_| random_policy(cfg, rng)).collect()),
            Controller::Greedy => Ok((0..cfg.num_agents()).map(|n| greedy_policy(env, n)).collect()),
            Controller::Learned(p, mode) => p
                .agents
                .iter()
                .zip(obs)
                .map(|(nets, o)| {
                    let d = nets.act(&o.features, *mode, rng)?;
                    decode_action(d.flight_raw, &d.alloc, cfg)
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub policy: String,
    pub episodes: usize,
    pub mean_return: f64,
    pub mean_fairness: f64,
    pub mean_delay_s: f64,
    pub mean_energy_j: f64,
    pub mean_offloads: f64,
    /// Coefficient of variation of per-SD offload counts, averaged over
    /// episodes.
    pub mean_offload_cv: f64,
    /// Fraction of recorded UAV positions inside their own sub-region.
    pub in_region_fraction: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeRecord>,
    pub traces: Vec<TraceRecord>,
    pub summary: EvalSummary,
}

/// Population coefficient of variation; zero for an all-zero sample.
pub fn coefficient_of_variation(xs: &[u32]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Runs `controller` on the episodes in `episodes`. Episode `e` uses the
/// same environment randomness for every controller, so reports from
/// different controllers are paired.
pub fn evaluate(
    controller: &Controller,
    env_cfg: &Arc<EnvConfig>,
    scenario: Option<&Arc<Scenario>>,
    episodes: Range<usize>,
    seed: u64,
) -> Result<EvalReport> {
    let mut env = Env::new(env_cfg.clone(), scenario.cloned())?;
    let n_agents = env_cfg.num_agents();
    let mut report = EvalReport::default();
    let mut inside = 0usize;
    for e in episodes {
        let mut rng = episode_rng(seed, e);
        let mut obs = env.reset(rng.next_u64());
        let mut returns = vec![0.0; n_agents];
        let mut metrics = EpisodeMetrics::default();
        let mut slot = 1;
        loop {
            let actions = controller.actions(&env, &obs, &mut rng)?;
            let out = env.step(&actions)?;
            metrics.add(&out.metrics);
            for (n, r) in out.rewards.iter().enumerate() {
                returns[n] += r.extrinsic;
            }
            for (n, a) in out.agents.iter().enumerate() {
                if env.region(n).contains(&a.position) {
                    inside += 1;
                }
            }
            report.traces.extend(TraceRecord::from_step(e, slot, &actions, &out));
            obs = out.observations;
            slot += 1;
            if out.done {
                break;
            }
        }
        report.episodes.push(EpisodeRecord {
            episode: e,
            returns,
            metrics,
            offloads: env.state().offloads.clone(),
        });
    }
    report.summary = summarize(controller.kind(), &report.episodes, inside, report.traces.len());
    Ok(report)
}

fn summarize(kind: PolicyKind, eps: &[EpisodeRecord], inside: usize, positions: usize) -> EvalSummary {
    let n = eps.len().max(1) as f64;
    let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| eps.iter().map(f).sum::<f64>() / n;
    EvalSummary {
        policy: kind.to_string(),
        episodes: eps.len(),
        mean_return: mean(&|e| e.mean_return()),
        mean_fairness: mean(&|e| e.metrics.fairness_total),
        mean_delay_s: mean(&|e| e.metrics.delay_total_s),
        mean_energy_j: mean(&|e| e.metrics.energy_total_j),
        mean_offloads: mean(&|e| e.metrics.offload_total as f64),
        mean_offload_cv: mean(&|e| coefficient_of_variation(&e.offloads)),
        in_region_fraction: if positions == 0 { 1.0 } else { inside as f64 / positions as f64 },
    }
}

/// Enumeration lattice for [`brute_force_step_oracle`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleGrid {
    pub theta_points: usize,
    pub distance_points: usize,
    /// Allocation lattice `{k/q : Σk = q}`.
    pub simplex_denominator: usize,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            theta_points: 32,
            distance_points: 16,
            simplex_denominator: 4,
        }
    }
}

/// Refuse enumerations larger than this many env evaluations.
pub const ORACLE_MAX_EVALUATIONS: usize = 2_000_000;
/// Refuse sub-regions holding more SDs than this.
pub const ORACLE_MAX_REGION_SDS: usize = 10;

/// All compositions of `q` into `k` non-negative parts, scaled by `1/q`.
pub fn simplex_lattice(k: usize, q: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in (0..=left).rev() {
            cur.push(v);
            rec(k, left - v, cur, out);
            cur.pop();
        }
    }
    if k == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    rec(k, q, &mut Vec::with_capacity(k), &mut out);
    out.into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / q as f64).collect())
        .collect()
}

impl OracleGrid {
    pub fn validate(&self) -> Result<()> {
        if self.theta_points < 2 || self.distance_points < 2 || self.simplex_denominator < 1 {
            return Err(Error::Config(format!(
                "oracle grid too coarse: need at least 2 points per axis, got {} headings and {} distances",
                self.theta_points, self.distance_points
            )));
        }
        Ok(())
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.theta_points).map(|i| TAU * i as f64 / self.theta_points as f64).collect()
    }

    pub fn distances(&self, d_max: f64) -> Vec<f64> {
        (0..self.distance_points)
            .map(|j| d_max * j as f64 / (self.distance_points - 1) as f64)
            .collect()
    }

    pub fn actions(&self, cfg: &EnvConfig) -> Vec<Action> {
        let lattice = simplex_lattice(cfg.alloc_dim(), self.simplex_denominator);
        let mut out = Vec::new();
        for &theta in &self.thetas() {
            for &distance_m in &self.distances(cfg.world.max_flight_distance_m) {
                for alloc in &lattice {
                    out.push(Action {
                        theta,
                        distance_m,
                        alloc: alloc.clone(),
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub agent: usize,
    pub best: Action,
    /// Agent `agent`'s extrinsic reward for `best`.
    pub reward: f64,
    pub evaluated: usize,
}

/// Exhaustive single-step search over agent `n`'s action while every other
/// UAV takes `others[k]`. Each candidate is scored by stepping a clone of
/// `env`, so the reward is the environment's own. Earlier lattice points win
/// ties.
pub fn brute_force_step_oracle(
    env: &Env,
    n: usize,
    grid: &OracleGrid,
    others: &[Action],
) -> Result<OracleResult> {
    grid.validate()?;
    let cfg = env.config();
    if n >= cfg.num_agents() || others.len() != cfg.num_agents() {
        return Err(Error::ActionCount {
            expected: cfg.num_agents(),
            got: others.len(),
        });
    }
    let region_sds = env.region_sds(n).len();
    if region_sds > ORACLE_MAX_REGION_SDS {
        return Err(Error::Scenario(format!(
            "sub-region {n} holds {region_sds} SDs; the oracle is capped at {ORACLE_MAX_REGION_SDS}"
        )));
    }
    let lattice = simplex_lattice(cfg.alloc_dim(), grid.simplex_denominator).len();
    let total = grid.theta_points * grid.distance_points * lattice;
    if total > ORACLE_MAX_EVALUATIONS {
        return Err(Error::Scenario(format!(
            "oracle would evaluate {total} actions; the cap is {ORACLE_MAX_EVALUATIONS}"
        )));
    }
    let mut joint = others.to_vec();
    let mut best: Option<(Action, f64)> = None;
    let mut evaluated = 0;
    for cand in grid.actions(cfg) {
        joint[n] = cand;
        let r = oracle_reward(env, &joint, n)?;
        evaluated += 1;
        if best.as_ref().is_none_or(|(_, b)| r > *b) {
            best = Some((joint[n].clone(), r));
        }
    }
    let (best, reward) = best.expect("lattice is nonempty");
    Ok(OracleResult {
        agent: n,
        best,
        reward,
        evaluated,
    })
}

/// Agent `n`'s reward for `joint` from a stepped clone of `env`.
pub fn oracle_reward(env: &Env, joint: &[Action], n: usize) -> Result<f64> {
    let mut probe = env.clone();
    Ok(probe.step(joint)?.rewards[n].extrinsic)
}
