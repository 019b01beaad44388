//! The per-slot Markov game played by the UAV fleet.
//!
//! One [`Env`] owns one [`WorldState`] and its random stream. A slot runs in
//! a fixed order: move every UAV, associate served SDs, dispatch compute,
//! evaluate delays and deadlines, bump offload counters, score each agent,
//! draw fresh tasks, advance the clock.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams};
use crate::compute::{self, ComputeParams, SlotMetrics};
use crate::error::{Error, Result};
use crate::world::{self, Point, Region, TaskSpec, WorldConfig, WorldState};

/// ω₁…ω₆ of the extrinsic reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub offload: f64,
    pub served: f64,
    pub resource: f64,
    pub movement: f64,
    pub computation: f64,
    pub separation: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            offload: 100.0,
            served: 5.0,
            resource: 20.0,
            movement: 20.0,
            computation: 10.0,
            separation: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            offload: self.offload * c,
            served: self.served * c,
            resource: self.resource * c,
            movement: self.movement * c,
            computation: self.computation * c,
            separation: self.separation * c,
        }
    }

    pub fn zero() -> Self {
        Self::default().scaled(0.0)
    }
}

/// Physical unit each reward component is measured in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardUnits {
    pub resource_unit_hz: f64,
    pub movement_unit_j: f64,
    pub computation_unit_j: f64,
    pub separation_unit_m: f64,
}

impl Default for RewardUnits {
    fn default() -> Self {
        Self {
            resource_unit_hz: 1.0e9,
            movement_unit_j: 1.0,
            computation_unit_j: 1.0,
            separation_unit_m: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub world: WorldConfig,
    pub channel: ChannelParams,
    pub compute: ComputeParams,
    /// Number of SD slots in each observation.
    pub observed_sds: usize,
    pub weights: RewardWeights,
    pub units: RewardUnits,
    /// When set, SD positions come from this seed and stay fixed across
    /// episodes; otherwise every reset draws a fresh layout.
    pub layout_seed: Option<u64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            channel: ChannelParams::default(),
            compute: ComputeParams::default(),
            observed_sds: 10,
            weights: RewardWeights::default(),
            units: RewardUnits::default(),
            layout_seed: None,
        }
    }
}

pub const OWN_FEATURES: usize = 3;
pub const SD_FEATURES: usize = 5;
pub const PEER_FEATURES: usize = 3;

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.channel.validate()?;
        self.compute.validate()?;
        if self.observed_sds == 0 {
            return Err(Error::Config("env.observed_sds must be >= 1".into()));
        }
        let w = &self.weights;
        for (name, v) in [
            ("offload", w.offload),
            ("served", w.served),
            ("resource", w.resource),
            ("movement", w.movement),
            ("computation", w.computation),
            ("separation", w.separation),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("env.weights.{name} must be finite")));
            }
        }
        let u = &self.units;
        for (name, v) in [
            ("resource_unit_hz", u.resource_unit_hz),
            ("movement_unit_j", u.movement_unit_j),
            ("computation_unit_j", u.computation_unit_j),
            ("separation_unit_m", u.separation_unit_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("env.units.{name} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        OWN_FEATURES + self.observed_sds * SD_FEATURES + self.world.peer_uavs * PEER_FEATURES
    }

    pub fn num_agents(&self) -> usize {
        self.world.num_uavs
    }

    pub fn alloc_dim(&self) -> usize {
        self.world.max_served
    }

    /// Per-feature divisors mapping raw observation entries to O(1).
    pub fn feature_scales(&self) -> Vec<f64> {
        let w = &self.world;
        let mut s = vec![w.area_side_m, w.area_side_m, w.altitude_m];
        for _ in 0..self.observed_sds {
            s.extend([1.0, TAU, w.area_side_m, w.slots as f64, self.compute.max_compute_hz]);
        }
        for _ in 0..w.peer_uavs {
            s.extend([1.0, TAU, w.area_side_m]);
        }
        s
    }
}

/// Fixed-width per-agent observation.
///
/// Layout: own `(x, y, z)`; then `observed_sds` slots of
/// `(valid, bearing, distance, offloads, min_compute_hz)`; then `peer_uavs`
/// slots of `(valid, bearing, distance)`. Missing entities are all-zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub raw: Vec<f64>,
    /// `raw` divided by [`EnvConfig::feature_scales`]; what networks consume.
    pub features: Vec<f64>,
}

/// A decoded, physically meaningful action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub theta: f64,
    pub distance_m: f64,
    /// Fraction of the compute budget for the i-th nearest served SD.
    pub alloc: Vec<f64>,
}

impl Action {
    pub fn hover_uniform(slots: usize) -> Self {
        Self {
            theta: 0.0,
            distance_m: 0.0,
            alloc: vec![1.0 / slots as f64; slots],
        }
    }
}

/// Maps a raw Gaussian flight sample and a simplex allocation to an action.
///
/// The flight pair is squashed with `tanh` and stretched to
/// `[0, 2π] × [0, d_max]`.
pub fn decode_action(flight_raw: [f64; 2], alloc: &[f64], cfg: &EnvConfig) -> Result<Action> {
    if !flight_raw.iter().chain(alloc).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("raw policy output".into()));
    }
    if alloc.len() != cfg.alloc_dim() {
        return Err(Error::Shape(format!(
            "allocation has {} entries, expected {}",
            alloc.len(),
            cfg.alloc_dim()
        )));
    }
    let theta = (PI * (1.0 + flight_raw[0].tanh())).clamp(0.0, TAU);
    let d_max = cfg.world.max_flight_distance_m;
    let distance_m = (0.5 * d_max * (1.0 + flight_raw[1].tanh())).clamp(0.0, d_max);
    Ok(Action {
        theta,
        distance_m,
        alloc: alloc.to_vec(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub offload: f64,
    pub served: f64,
    pub resource: f64,
    pub movement: f64,
    pub computation: f64,
    pub separation: f64,
    pub extrinsic: f64,
}

impl RewardBreakdown {
    pub fn combine(&self, w: &RewardWeights) -> f64 {
        w.offload * self.offload + w.served * self.served + w.resource * self.resource
            - w.movement * self.movement
            - w.computation * self.computation
            + w.separation * self.separation
    }
}

/// Optional fixed inputs for reproducible episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub sd_positions_m: Vec<[f64; 2]>,
    /// One entry per slot; each holds `[size_bits, cycles_per_bit, deadline_s]`
    /// for every SD.
    #[serde(default)]
    pub task_schedule: Vec<Vec<[f64; 3]>>,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Scenario = toml::from_str(&text)?;
        Ok(s)
    }

    pub fn validate(&self, cfg: &EnvConfig) -> Result<()> {
        if self.sd_positions_m.len() != cfg.world.num_sds {
            return Err(Error::Scenario(format!(
                "{} SD positions but world.num_sds = {}",
                self.sd_positions_m.len(),
                cfg.world.num_sds
            )));
        }
        let area = cfg.world.area();
        for (m, &[x, y]) in self.sd_positions_m.iter().enumerate() {
            if !area.contains(&Point::new(x, y)) {
                return Err(Error::Scenario(format!("SD {m} at ({x}, {y}) is outside the area")));
            }
        }
        if !self.task_schedule.is_empty() {
            if self.task_schedule.len() < cfg.world.slots {
                return Err(Error::Scenario(format!(
                    "task schedule covers {} slots, episode has {}",
                    self.task_schedule.len(),
                    cfg.world.slots
                )));
            }
            for (t, slot) in self.task_schedule.iter().enumerate() {
                if slot.len() != cfg.world.num_sds {
                    return Err(Error::Scenario(format!(
                        "task schedule slot {} lists {} tasks, expected {}",
                        t + 1,
                        slot.len(),
                        cfg.world.num_sds
                    )));
                }
                if slot.iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Scenario(format!(
                        "task schedule slot {} has a non-positive entry",
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }

    fn tasks_at(&self, slot: usize) -> Option<Vec<TaskSpec>> {
        self.task_schedule.get(slot - 1).map(|row| {
            row.iter()
                .map(|&[d, c, dl]| TaskSpec {
                    size_bits: d,
                    intensity_cycles_per_bit: c,
                    deadline_s: dl,
                })
                .collect()
        })
    }
}

/// Per-agent outcome of one slot, before any state mutation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSlot {
    pub position: Point,
    pub moved_m: f64,
    pub served: Vec<usize>,
    pub alloc_hz: Vec<f64>,
    pub snr: Vec<f64>,
    /// `None` when the task was unservable (zero compute or zero rate).
    pub delay_s: Vec<Option<f64>>,
    pub completed: Vec<bool>,
    pub comp_energy_j: Vec<f64>,
    pub move_energy_j: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    pub rewards: Vec<RewardBreakdown>,
    pub metrics: SlotMetrics,
    pub agents: Vec<AgentSlot>,
    pub done: bool,
}

/// Constraint families of the joint trajectory / allocation problem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub position_x: bool,
    pub position_y: bool,
    pub heading: bool,
    pub distance: bool,
    pub per_sd_compute: bool,
    pub total_compute: bool,
    pub deadline: bool,
    pub violations: Vec<String>,
}

impl ConstraintReport {
    /// Everything except the deadline family, which is an outcome rather
    /// than an action property.
    pub fn action_feasible(&self) -> bool {
        self.position_x
            && self.position_y
            && self.heading
            && self.distance
            && self.per_sd_compute
            && self.total_compute
    }
}

/// One line of an exported trajectory trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub episode: usize,
    pub slot: usize,
    pub agent: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub theta: f64,
    pub distance_m: f64,
    pub alloc: Vec<f64>,
    pub reward: RewardBreakdown,
    pub served: Vec<usize>,
}

impl TraceRecord {
    pub fn from_step(episode: usize, slot: usize, actions: &[Action], out: &StepOutcome) -> Vec<Self> {
        out.agents
            .iter()
            .enumerate()
            .map(|(n, a)| TraceRecord {
                episode,
                slot,
                agent: n,
                x_m: a.position.x,
                y_m: a.position.y,
                theta: actions[n].theta,
                distance_m: actions[n].distance_m,
                alloc: actions[n].alloc.clone(),
                reward: out.rewards[n],
                served: a.served.clone(),
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Env {
    cfg: Arc<EnvConfig>,
    scenario: Option<Arc<Scenario>>,
    state: WorldState,
    regions: Vec<Region>,
    region_sds: Vec<Vec<usize>>,
    scales: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Env {
    pub fn new(cfg: Arc<EnvConfig>, scenario: Option<Arc<Scenario>>) -> Result<Self> {
        cfg.validate()?;
        if let Some(s) = &scenario {
            s.validate(&cfg)?;
        }
        let regions = (0..cfg.world.num_uavs).map(|n| cfg.world.sub_region(n)).collect();
        let scales = cfg.feature_scales();
        let mut env = Self {
            cfg,
            scenario,
            state: WorldState {
                uav_xy: Vec::new(),
                sd_xy: Vec::new(),
                sd_owner: Vec::new(),
                tasks: Vec::new(),
                offloads: Vec::new(),
                t: 1,
            },
            regions,
            region_sds: Vec::new(),
            scales,
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        env.reset(0);
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn region(&self, n: usize) -> &Region {
        &self.regions[n]
    }

    pub fn region_sds(&self, n: usize) -> &[usize] {
        &self.region_sds[n]
    }

    pub fn done(&self) -> bool {
        self.state.t > self.cfg.world.slots
    }

    /// Starts a new episode. The episode's randomness is a pure function of
    /// `seed` (and `layout_seed` when set).
    pub fn reset(&mut self, seed: u64) -> Vec<Observation> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let w = &self.cfg.world;
        let sd_xy: Vec<Point> = match (&self.scenario, self.cfg.layout_seed) {
            (Some(s), _) => s.sd_positions_m.iter().map(|&[x, y]| Point::new(x, y)).collect(),
            (None, Some(layout)) => random_layout(&mut ChaCha8Rng::seed_from_u64(layout), w),
            (None, None) => random_layout(&mut self.rng, w),
        };
        let sd_owner: Vec<usize> = sd_xy.iter().map(|p| w.owner_of(p)).collect();
        self.region_sds = (0..w.num_uavs)
            .map(|n| (0..sd_xy.len()).filter(|&m| sd_owner[m] == n).collect())
            .collect();
        self.state = WorldState {
            uav_xy: self.regions.iter().map(Region::center).collect(),
            offloads: vec![0; sd_xy.len()],
            tasks: Vec::new(),
            sd_xy,
            sd_owner,
            t: 1,
        };
        self.state.tasks = self.draw_tasks(1);
        self.observe_all()
    }

    fn draw_tasks(&mut self, slot: usize) -> Vec<TaskSpec> {
        if let Some(tasks) = self.scenario.as_ref().and_then(|s| s.tasks_at(slot)) {
            return tasks;
        }
        // ranges were validated with the config
        world::generate_tasks(&mut self.rng, self.state.sd_xy.len(), &self.cfg.world.tasks)
            .expect("validated task ranges")
    }

    pub fn observe_all(&self) -> Vec<Observation> {
        (0..self.cfg.world.num_uavs).map(|n| self.build_observation(n)).collect()
    }

    pub fn build_observation(&self, n: usize) -> Observation {
        let s = &self.state;
        let w = &self.cfg.world;
        let me = s.uav_xy[n];
        let mut raw = Vec::with_capacity(self.scales.len());
        raw.extend([me.x, me.y, w.altitude_m]);

        let mut sds: Vec<(f64, usize)> = self.region_sds[n]
            .iter()
            .map(|&m| (me.distance(&s.sd_xy[m]), m))
            .collect();
        sds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for k in 0..self.cfg.observed_sds {
            match sds.get(k) {
                Some(&(d, m)) => raw.extend([
                    1.0,
                    me.bearing_to(&s.sd_xy[m]),
                    d,
                    s.offloads[m] as f64,
                    s.tasks[m].min_compute_hz(),
                ]),
                None => raw.extend([0.0; SD_FEATURES]),
            }
        }

        let mut peers: Vec<(f64, usize)> = (0..w.num_uavs)
            .filter(|&k| k != n)
            .map(|k| (me.distance(&s.uav_xy[k]), k))
            .collect();
        peers.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for k in 0..w.peer_uavs {
            match peers.get(k) {
                Some(&(d, j)) => raw.extend([1.0, me.bearing_to(&s.uav_xy[j]), d]),
                None => raw.extend([0.0; PEER_FEATURES]),
            }
        }

        let features = raw.iter().zip(&self.scales).map(|(v, s)| v / s).collect();
        Observation { raw, features }
    }

    fn check_actions(&self, actions: &[Action]) -> Result<()> {
        if actions.len() != self.cfg.world.num_uavs {
            return Err(Error::ActionCount {
                expected: self.cfg.world.num_uavs,
                got: actions.len(),
            });
        }
        for a in actions {
            if a.alloc.len() != self.cfg.alloc_dim() {
                return Err(Error::Shape(format!(
                    "allocation has {} entries, expected {}",
                    a.alloc.len(),
                    self.cfg.alloc_dim()
                )));
            }
            if !(a.theta.is_finite() && a.alloc.iter().all(|f| f.is_finite() && *f >= 0.0)) {
                return Err(Error::InvalidAction(format!("{a:?}")));
            }
        }
        Ok(())
    }

    /// Evaluates a slot without mutating the environment.
    pub fn plan(&self, actions: &[Action]) -> Result<Vec<AgentSlot>> {
        self.check_actions(actions)?;
        let w = &self.cfg.world;
        let ch = &self.cfg.channel;
        let cp = &self.cfg.compute;
        let s = &self.state;
        let mut out = Vec::with_capacity(actions.len());
        for (n, a) in actions.iter().enumerate() {
            let from = s.uav_xy[n];
            let position = world::advance_uav(
                from,
                a.theta,
                a.distance_m,
                w.max_flight_distance_m,
                &self.regions[n],
            )?;
            let moved_m = from.distance(&position);
            let speed = moved_m / w.slot_duration_s;
            let move_energy_j = world::propulsion_power(speed, &w.rotor) * w.slot_duration_s;

            let served = world::associate(
                position,
                self.region_sds[n].iter().copied(),
                &s.sd_xy,
                w.coverage_radius_m,
                w.max_served,
            );
            let k = served.len();
            let mut slot = AgentSlot {
                position,
                moved_m,
                served,
                alloc_hz: Vec::with_capacity(k),
                snr: Vec::with_capacity(k),
                delay_s: Vec::with_capacity(k),
                completed: Vec::with_capacity(k),
                comp_energy_j: Vec::with_capacity(k),
                move_energy_j,
            };
            for (i, &m) in slot.served.iter().enumerate() {
                let task = &s.tasks[m];
                let f = a.alloc[i] * cp.max_compute_hz;
                let gain = channel::channel_gain(position.distance(&s.sd_xy[m]), w.altitude_m, ch);
                let rate = channel::transmission_rate(gain, ch);
                let delay = compute::offload_delay(task, rate, f);
                slot.alloc_hz.push(f);
                slot.snr.push(channel::snr(gain, ch));
                slot.completed.push(delay.is_some_and(|d| d <= task.deadline_s));
                slot.delay_s.push(delay);
                slot.comp_energy_j.push(if delay.is_some() {
                    compute::computation_energy(task, f, cp.cpu_capacitance)
                } else {
                    0.0
                });
            }
            out.push(slot);
        }
        Ok(out)
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        if self.done() {
            return Err(Error::EpisodeFinished(self.state.t));
        }
        let agents = self.plan(actions)?;
        let w = &self.cfg.world;
        let cp = &self.cfg.compute;
        let units = &self.cfg.units;

        for (n, a) in agents.iter().enumerate() {
            self.state.uav_xy[n] = a.position;
            for (i, &m) in a.served.iter().enumerate() {
                if a.completed[i] {
                    self.state.offloads[m] += 1;
                }
            }
        }

        let mut metrics = SlotMetrics::default();
        let mut rewards = Vec::with_capacity(agents.len());
        for (n, a) in agents.iter().enumerate() {
            let mut r = RewardBreakdown {
                served: a.served.len() as f64,
                movement: a.move_energy_j / units.movement_unit_j,
                ..RewardBreakdown::default()
            };
            let mut comp_energy = 0.0;
            for (i, &m) in a.served.iter().enumerate() {
                let fairness =
                    compute::fairness_index(self.state.offloads[m], cp.fairness_scale, w.slots);
                r.offload += fairness * a.snr[i].ln_1p() / std::f64::consts::LN_2;
                comp_energy += a.comp_energy_j[i];
                if let Some(d) = a.delay_s[i] {
                    metrics.delay_s += d;
                }
                if a.completed[i] {
                    r.resource += a.alloc_hz[i];
                    metrics.fairness += fairness;
                    metrics.offloads += 1;
                }
            }
            r.resource /= units.resource_unit_hz;
            r.computation = comp_energy / units.computation_unit_j;
            r.separation = (0..agents.len())
                .filter(|&k| k != n)
                .map(|k| a.position.distance(&agents[k].position))
                .sum::<f64>()
                / units.separation_unit_m;
            r.extrinsic = r.combine(&self.cfg.weights);
            metrics.energy_j += a.move_energy_j + comp_energy;
            rewards.push(r);
        }

        self.state.t += 1;
        let done = self.done();
        if !done {
            self.state.tasks = self.draw_tasks(self.state.t);
        }
        Ok(StepOutcome {
            observations: self.observe_all(),
            rewards,
            metrics,
            agents,
            done,
        })
    }

    /// Audits a joint action against every constraint family. Runtime
    /// enforcement happens by construction; this is for tests and oracles.
    pub fn check_constraints(&self, actions: &[Action]) -> ConstraintReport {
        let mut rep = ConstraintReport {
            position_x: true,
            position_y: true,
            heading: true,
            distance: true,
            per_sd_compute: true,
            total_compute: true,
            deadline: true,
            violations: Vec::new(),
        };
        let w = &self.cfg.world;
        let tol = 1e-9;
        for (n, a) in actions.iter().enumerate() {
            if !(0.0..=TAU).contains(&a.theta) {
                rep.heading = false;
                rep.violations.push(format!("agent {n}: heading {}", a.theta));
            }
            if !(0.0..=w.max_flight_distance_m).contains(&a.distance_m) {
                rep.distance = false;
                rep.violations.push(format!("agent {n}: distance {}", a.distance_m));
            }
            if a.alloc.iter().any(|f| !(0.0..=1.0).contains(f)) {
                rep.per_sd_compute = false;
                rep.violations.push(format!("agent {n}: allocation entry outside [0, f_max]"));
            }
            if a.alloc.iter().sum::<f64>() > 1.0 + tol {
                rep.total_compute = false;
                rep.violations.push(format!("agent {n}: allocation exceeds f_max"));
            }
        }
        match self.plan(actions) {
            Ok(agents) => {
                for (n, a) in agents.iter().enumerate() {
                    let p = a.position;
                    if !(0.0..=w.area_side_m).contains(&p.x) {
                        rep.position_x = false;
                        rep.violations.push(format!("agent {n}: x = {}", p.x));
                    }
                    if !(0.0..=w.area_side_m).contains(&p.y) {
                        rep.position_y = false;
                        rep.violations.push(format!("agent {n}: y = {}", p.y));
                    }
                    if !self.regions[n].contains(&p) {
                        rep.violations.push(format!("agent {n}: left its sub-region"));
                        rep.position_x = false;
                    }
                    for (i, &m) in a.served.iter().enumerate() {
                        if !a.completed[i] {
                            rep.deadline = false;
                            rep.violations.push(format!("agent {n}: SD {m} misses its deadline"));
                        }
                    }
                }
            }
            Err(e) => {
                rep.distance = false;
                rep.violations.push(e.to_string());
            }
        }
        rep
    }

    /// Replaces the dynamic state; for oracles and hand-built fixtures.
    pub fn set_state(&mut self, state: WorldState) -> Result<()> {
        let w = &self.cfg.world;
        if state.uav_xy.len() != w.num_uavs
            || state.sd_xy.len() != state.tasks.len()
            || state.sd_xy.len() != state.offloads.len()
        {
            return Err(Error::Shape("world state dimensions disagree with config".into()));
        }
        for (n, p) in state.uav_xy.iter().enumerate() {
            if !self.regions[n].contains(p) {
                return Err(Error::Config(format!("UAV {n} starts outside its sub-region")));
            }
        }
        let sd_owner: Vec<usize> = state.sd_xy.iter().map(|p| w.owner_of(p)).collect();
        self.region_sds = (0..w.num_uavs)
            .map(|n| (0..state.sd_xy.len()).filter(|&m| sd_owner[m] == n).collect())
            .collect();
        self.state = WorldState { sd_owner, ..state };
        Ok(())
    }
}

fn random_layout<R: Rng>(rng: &mut R, w: &WorldConfig) -> Vec<Point> {
    (0..w.num_sds)
        .map(|_| {
            Point::new(
                rng.random::<f64>() * w.area_side_m,
                rng.random::<f64>() * w.area_side_m,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn default_env() -> Env {
        Env::new(Arc::new(EnvConfig::default()), None).unwrap()
    }

    fn single_uav_config() -> EnvConfig {
        EnvConfig {
            world: WorldConfig {
                num_uavs: 1,
                num_sds: 2,
                grid_rows: 1,
                grid_cols: 1,
                peer_uavs: 0,
                area_side_m: 500.0,
                max_served: 3,
                ..WorldConfig::default()
            },
            ..EnvConfig::default()
        }
    }

    #[test]
    fn reset_is_deterministic_and_centered() {
        let mut env = default_env();
        let a = env.reset(42);
        let sa = env.state().clone();
        let b = env.reset(42);
        assert_eq!(a, b);
        assert_eq!(&sa, env.state());
        assert_eq!(
            sa.uav_xy,
            vec![
                Point::new(250.0, 250.0),
                Point::new(750.0, 250.0),
                Point::new(250.0, 750.0),
                Point::new(750.0, 750.0)
            ]
        );
        assert!(sa.sd_xy.iter().all(|p| Region::square(1000.0).contains(p)));
        assert_eq!(sa.sd_xy.len(), 100);
        assert!(sa.offloads.iter().all(|&b| b == 0));
        assert_eq!(sa.t, 1);
    }

    #[test]
    fn observation_geometry_and_padding() {
        let mut env = Env::new(Arc::new(single_uav_config()), None).unwrap();
        let mut st = env.state().clone();
        st.uav_xy = vec![Point::new(250.0, 250.0)];
        st.sd_xy = vec![Point::new(250.0, 350.0), Point::new(400.0, 250.0)];
        st.tasks = vec![
            TaskSpec {
                size_bits: 1e6,
                intensity_cycles_per_bit: 1000.0,
                deadline_s: 2.0,
            };
            2
        ];
        st.offloads = vec![3, 0];
        env.set_state(st).unwrap();
        let o = env.build_observation(0);
        assert_eq!(o.raw.len(), env.config().obs_dim());
        assert_eq!(&o.raw[..3], &[250.0, 250.0, 120.0]);
        // nearest SD first: (250,350) at distance 100, bearing π/2
        assert_eq!(o.raw[3], 1.0);
        assert!((o.raw[4] - FRAC_PI_2).abs() < 1e-15);
        assert!((o.raw[5] - 100.0).abs() < 1e-12);
        assert_eq!(o.raw[6], 3.0);
        assert_eq!(o.raw[7], 5e8);
        // third slot onwards is padding
        assert!(o.raw[13..3 + 10 * SD_FEATURES].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decode_midpoint_and_uniform() {
        let cfg = EnvConfig::default();
        let a = decode_action([0.0, 0.0], &[0.2; 5], &cfg).unwrap();
        assert_eq!(a.theta, PI);
        assert_eq!(a.distance_m, 75.0);
        assert!(decode_action([f64::NAN, 0.0], &[0.2; 5], &cfg).is_err());
        assert!(decode_action([0.0, 0.0], &[0.25; 4], &cfg).is_err());
        let a = decode_action([1e6, -1e6], &[0.2; 5], &cfg).unwrap();
        assert!(a.theta <= TAU && a.distance_m >= 0.0);
    }

    #[test]
    fn idle_uav_reward() {
        // one UAV far from both SDs, hovering
        let cfg = EnvConfig {
            world: WorldConfig {
                coverage_radius_m: 10.0,
                ..single_uav_config().world
            },
            ..single_uav_config()
        };
        let mut env = Env::new(Arc::new(cfg.clone()), None).unwrap();
        let mut st = env.state().clone();
        st.sd_xy = vec![Point::new(10.0, 10.0), Point::new(490.0, 490.0)];
        env.set_state(st).unwrap();
        let out = env.step(&[Action::hover_uniform(3)]).unwrap();
        let p0 = world::propulsion_power(0.0, &cfg.world.rotor);
        let expected = -cfg.weights.movement * p0 * cfg.world.slot_duration_s;
        assert_eq!(out.rewards[0].served, 0.0);
        assert!((out.rewards[0].extrinsic - expected).abs() < 1e-9);
    }

    #[test]
    fn idle_uav_with_peers() {
        let cfg = EnvConfig {
            world: WorldConfig {
                coverage_radius_m: 1.0,
                num_sds: 4,
                ..WorldConfig::default()
            },
            layout_seed: Some(5),
            ..EnvConfig::default()
        };
        let mut env = Env::new(Arc::new(cfg.clone()), None).unwrap();
        env.reset(1);
        let hover = vec![Action::hover_uniform(5); 4];
        let out = env.step(&hover).unwrap();
        let p0 = world::propulsion_power(0.0, &cfg.world.rotor);
        let u2u = 500.0 + 500.0 + 500.0 * 2f64.sqrt();
        for r in &out.rewards {
            let expected = -20.0 * p0 * 5.0 + u2u;
            assert!((r.extrinsic - expected).abs() < 1e-9);
            assert_eq!(r.extrinsic, r.combine(&cfg.weights));
        }
    }

    #[test]
    fn episode_lifecycle() {
        let mut env = default_env();
        env.reset(3);
        let hover = vec![Action::hover_uniform(5); 4];
        for t in 1..=30 {
            let out = env.step(&hover).unwrap();
            assert_eq!(out.done, t == 30);
        }
        assert!(matches!(env.step(&hover), Err(Error::EpisodeFinished(31))));
        env.reset(3);
        assert!(matches!(
            env.step(&hover[..3]),
            Err(Error::ActionCount { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn offload_counts_match_metrics() {
        let mut env = default_env();
        env.reset(9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut total = 0;
        while !env.done() {
            let actions: Vec<Action> = (0..4)
                .map(|_| Action {
                    theta: rng.random::<f64>() * TAU,
                    distance_m: rng.random::<f64>() * 150.0,
                    alloc: vec![0.2; 5],
                })
                .collect();
            let out = env.step(&actions).unwrap();
            total += out.metrics.offloads;
            for (n, a) in out.agents.iter().enumerate() {
                assert!(env.region(n).contains(&a.position));
                assert!(a.served.iter().all(|&m| env.state().sd_owner[m] == n));
                assert!(out.rewards[n].served <= 5.0);
                assert!(out.rewards[n].resource <= 20.0 + 1e-9);
            }
            for o in &out.observations {
                assert!(o.features.iter().all(|v| v.is_finite()));
            }
        }
        assert_eq!(env.state().offloads.iter().sum::<u32>(), total);
    }

    #[test]
    fn starved_task_violates_deadline() {
        let mut env = Env::new(Arc::new(single_uav_config()), None).unwrap();
        let mut st = env.state().clone();
        st.uav_xy = vec![Point::new(250.0, 250.0)];
        st.sd_xy = vec![Point::new(260.0, 250.0), Point::new(240.0, 250.0)];
        let task = TaskSpec {
            size_bits: 4e6,
            intensity_cycles_per_bit: 1000.0,
            deadline_s: 1.0,
        };
        st.tasks = vec![task; 2];
        env.set_state(st).unwrap();
        // 4e9 cycles in 1 s needs 4 GHz; the second SD only gets 2 GHz
        let action = Action {
            theta: 0.0,
            distance_m: 0.0,
            alloc: vec![0.9, 0.1, 0.0],
        };
        let rep = env.check_constraints(std::slice::from_ref(&action));
        assert!(rep.action_feasible());
        assert!(!rep.deadline);
        let plan = env.plan(std::slice::from_ref(&action)).unwrap();
        assert_eq!(plan[0].completed, vec![true, false]);
        assert!(0.1 * 20e9 < task.min_compute_hz());
    }
}
