//! Offloading delay, on-board computation energy, the per-SD fairness
//! indicator and per-slot / per-episode objective accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::TaskSpec;

/// On-board MEC server parameters shared by every UAV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeParams {
    pub max_compute_hz: f64,
    pub cpu_capacitance: f64,
    pub fairness_scale: f64,
}

impl Default for ComputeParams {
    fn default() -> Self {
        Self {
            max_compute_hz: 20.0e9,
            cpu_capacitance: 1.0e-28,
            fairness_scale: 1.0,
        }
    }
}

impl ComputeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_compute_hz.is_finite() && self.max_compute_hz > 0.0) {
            return Err(Error::Config(format!(
                "compute.max_compute_hz must be > 0, got {}",
                self.max_compute_hz
            )));
        }
        if !(self.cpu_capacitance.is_finite() && self.cpu_capacitance >= 0.0) {
            return Err(Error::Config("compute.cpu_capacitance must be >= 0".into()));
        }
        // keeps every fairness index inside [0, 1]
        if !(0.0..=1.0).contains(&self.fairness_scale) {
            return Err(Error::Config(format!(
                "compute.fairness_scale must lie in [0, 1], got {}",
                self.fairness_scale
            )));
        }
        Ok(())
    }
}

/// Upload plus on-board processing time. `None` when either the link rate
/// or the allocated compute is zero (the task cannot be served).
pub fn offload_delay(task: &TaskSpec, rate_bps: f64, alloc_hz: f64) -> Option<f64> {
    if !(rate_bps > 0.0 && alloc_hz > 0.0) {
        return None;
    }
    Some(task.size_bits / rate_bps + task.cycles() / alloc_hz)
}

pub fn computation_energy(task: &TaskSpec, alloc_hz: f64, capacitance: f64) -> f64 {
    capacitance * alloc_hz * alloc_hz * task.cycles()
}

/// `1 - λ b / T`: devalues SDs that were already served often.
pub fn fairness_index(offloads: u32, fairness_scale: f64, slots: usize) -> f64 {
    1.0 - fairness_scale * offloads as f64 / slots as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    /// Fairness indices summed over tasks completed this slot.
    pub fairness: f64,
    pub delay_s: f64,
    pub energy_j: f64,
    pub offloads: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub fairness_total: f64,
    pub delay_total_s: f64,
    pub energy_total_j: f64,
    pub offload_total: u32,
}

impl EpisodeMetrics {
    pub fn add(&mut self, slot: &SlotMetrics) {
        self.fairness_total += slot.fairness;
        self.delay_total_s += slot.delay_s;
        self.energy_total_j += slot.energy_j;
        self.offload_total += slot.offloads;
    }
}

pub fn accumulate_objectives<'a>(
    per_slot: impl IntoIterator<Item = &'a SlotMetrics>,
) -> EpisodeMetrics {
    per_slot.into_iter().fold(EpisodeMetrics::default(), |mut acc, s| {
        acc.add(s);
        acc
    })
}
