//! Physical entities: the service area and its sub-region partition, UAV
//! kinematics, rotary-wing propulsion power, task generation and UAV–SD
//! association.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizontal position in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing from `self` to `other`, in `[0, 2π)`.
    pub fn bearing_to(&self, other: &Point) -> f64 {
        let a = (other.y - self.y).atan2(other.x - self.x);
        let a = if a < 0.0 { a + std::f64::consts::TAU } else { a };
        // -0.0 and values that round up to TAU both fold back to 0
        if a >= std::f64::consts::TAU {
            0.0
        } else {
            a.abs()
        }
    }
}

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point,
    pub max: Point,
}

impl Region {
    pub fn square(side: f64) -> Self {
        Self {
            min: Point::new(0.0, 0.0),
            max: Point::new(side, side),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            Point::new(self.min.x, self.max.y),
            self.max,
        ]
    }
}

/// Uniform sampling ranges for the three task attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskRanges {
    pub size_bits: [f64; 2],
    pub intensity_cycles_per_bit: [f64; 2],
    pub deadline_s: [f64; 2],
}

impl Default for TaskRanges {
    fn default() -> Self {
        Self {
            size_bits: [1.0e6, 5.0e6],
            intensity_cycles_per_bit: [500.0, 1500.0],
            deadline_s: [1.0, 5.0],
        }
    }
}

impl TaskRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [
            ("size_bits", self.size_bits),
            ("intensity_cycles_per_bit", self.intensity_cycles_per_bit),
            ("deadline_s", self.deadline_s),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 {
                return Err(Error::Config(format!(
                    "task range {name} must be finite and positive, got [{lo}, {hi}]"
                )));
            }
            if lo > hi {
                return Err(Error::Config(format!(
                    "task range {name} is inverted: [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// One computation task: size, intensity, deadline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub size_bits: f64,
    pub intensity_cycles_per_bit: f64,
    pub deadline_s: f64,
}

impl TaskSpec {
    pub fn cycles(&self) -> f64 {
        self.size_bits * self.intensity_cycles_per_bit
    }

    /// Compute rate needed to finish within the deadline, ignoring upload.
    pub fn min_compute_hz(&self) -> f64 {
        self.cycles() / self.deadline_s
    }
}

/// Rotary-wing propulsion constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotorParams {
    pub blade_profile_power_w: f64,
    pub induced_power_w: f64,
    pub tip_speed_mps: f64,
    pub induced_velocity_mps: f64,
    pub fuselage_drag_ratio: f64,
    pub air_density_kg_per_m3: f64,
    pub rotor_solidity: f64,
    pub rotor_disc_area_m2: f64,
}

impl Default for RotorParams {
    fn default() -> Self {
        Self {
            blade_profile_power_w: 79.8563,
            induced_power_w: 88.6279,
            tip_speed_mps: 120.0,
            induced_velocity_mps: 4.03,
            fuselage_drag_ratio: 0.6,
            air_density_kg_per_m3: 1.225,
            rotor_solidity: 0.05,
            rotor_disc_area_m2: 0.503,
        }
    }
}

impl RotorParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("blade_profile_power_w", self.blade_profile_power_w),
            ("induced_power_w", self.induced_power_w),
            ("tip_speed_mps", self.tip_speed_mps),
            ("induced_velocity_mps", self.induced_velocity_mps),
            ("fuselage_drag_ratio", self.fuselage_drag_ratio),
            ("air_density_kg_per_m3", self.air_density_kg_per_m3),
            ("rotor_solidity", self.rotor_solidity),
            ("rotor_disc_area_m2", self.rotor_disc_area_m2),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("rotor.{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Static description of the service area, the fleet and its hardware.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub area_side_m: f64,
    pub altitude_m: f64,
    pub num_uavs: usize,
    pub num_sds: usize,
    pub slots: usize,
    pub slot_duration_s: f64,
    pub max_flight_distance_m: f64,
    pub max_speed_mps: f64,
    pub coverage_radius_m: f64,
    pub max_served: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub peer_uavs: usize,
    pub rotor: RotorParams,
    pub tasks: TaskRanges,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            area_side_m: 1000.0,
            altitude_m: 120.0,
            num_uavs: 4,
            num_sds: 100,
            slots: 30,
            slot_duration_s: 5.0,
            max_flight_distance_m: 150.0,
            max_speed_mps: 30.0,
            coverage_radius_m: 250.0,
            max_served: 5,
            grid_rows: 2,
            grid_cols: 2,
            peer_uavs: 3,
            rotor: RotorParams::default(),
            tasks: TaskRanges::default(),
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_side_m", self.area_side_m),
            ("altitude_m", self.altitude_m),
            ("slot_duration_s", self.slot_duration_s),
            ("max_flight_distance_m", self.max_flight_distance_m),
            ("max_speed_mps", self.max_speed_mps),
            ("coverage_radius_m", self.coverage_radius_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("world.{name} must be > 0, got {v}")));
            }
        }
        if self.num_uavs == 0 || self.num_sds == 0 || self.slots == 0 || self.max_served == 0 {
            return Err(Error::Config(
                "world.num_uavs, num_sds, slots and max_served must be >= 1".into(),
            ));
        }
        if self.max_flight_distance_m > self.max_speed_mps * self.slot_duration_s * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "world.max_flight_distance_m = {} exceeds max_speed_mps * slot_duration_s = {}",
                self.max_flight_distance_m,
                self.max_speed_mps * self.slot_duration_s
            )));
        }
        if self.grid_rows * self.grid_cols != self.num_uavs {
            return Err(Error::Config(format!(
                "world.grid_rows * grid_cols = {} must equal num_uavs = {}",
                self.grid_rows * self.grid_cols,
                self.num_uavs
            )));
        }
        if self.peer_uavs >= self.num_uavs {
            return Err(Error::Config(format!(
                "world.peer_uavs = {} must be <= num_uavs - 1",
                self.peer_uavs
            )));
        }
        self.rotor.validate()?;
        self.tasks.validate()
    }

    pub fn area(&self) -> Region {
        Region::square(self.area_side_m)
    }

    /// Cell `n` of the grid partition; columns vary fastest.
    pub fn sub_region(&self, n: usize) -> Region {
        let w = self.area_side_m / self.grid_cols as f64;
        let h = self.area_side_m / self.grid_rows as f64;
        let (row, col) = (n / self.grid_cols, n % self.grid_cols);
        Region {
            min: Point::new(col as f64 * w, row as f64 * h),
            max: Point::new((col + 1) as f64 * w, (row + 1) as f64 * h),
        }
    }

    /// Index of the sub-region owning a ground point.
    pub fn owner_of(&self, p: &Point) -> usize {
        let w = self.area_side_m / self.grid_cols as f64;
        let h = self.area_side_m / self.grid_rows as f64;
        let col = ((p.x / w).floor().max(0.0) as usize).min(self.grid_cols - 1);
        let row = ((p.y / h).floor().max(0.0) as usize).min(self.grid_rows - 1);
        row * self.grid_cols + col
    }
}

/// Mutable per-episode world state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub uav_xy: Vec<Point>,
    pub sd_xy: Vec<Point>,
    /// Owning sub-region of each SD, fixed at reset.
    pub sd_owner: Vec<usize>,
    pub tasks: Vec<TaskSpec>,
    /// Cumulative completed offloads per SD.
    pub offloads: Vec<u32>,
    /// Current slot, 1-based; `slots + 1` once the episode is over.
    pub t: usize,
}

impl WorldState {
    pub fn sds_in_region(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.sd_owner
            .iter()
            .enumerate()
            .filter(move |(_, &o)| o == n)
            .map(|(m, _)| m)
    }
}

/// Moves a UAV by `distance` along `theta` and clips the result into `region`.
pub fn advance_uav(
    pos: Point,
    theta: f64,
    distance: f64,
    max_distance: f64,
    region: &Region,
) -> Result<Point> {
    if !(distance >= 0.0 && distance <= max_distance) {
        return Err(Error::InvalidAction(format!(
            "flight distance {distance} outside [0, {max_distance}]"
        )));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidAction(format!("heading {theta} is not finite")));
    }
    let next = Point::new(
        pos.x + distance * theta.cos(),
        pos.y + distance * theta.sin(),
    );
    Ok(region.clamp(next))
}

/// Rotary-wing propulsion power (W) at horizontal speed `v` (m/s).
pub fn propulsion_power(v: f64, rotor: &RotorParams) -> f64 {
    let v2 = v * v;
    let v0_2 = rotor.induced_velocity_mps * rotor.induced_velocity_mps;
    let blade = rotor.blade_profile_power_w
        * (1.0 + 3.0 * v2 / (rotor.tip_speed_mps * rotor.tip_speed_mps));
    let induced_factor = ((1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)).sqrt() - v2 / (2.0 * v0_2))
        .max(0.0)
        .sqrt();
    let parasite = 0.5
        * rotor.fuselage_drag_ratio
        * rotor.air_density_kg_per_m3
        * rotor.rotor_solidity
        * rotor.rotor_disc_area_m2
        * v2
        * v;
    blade + rotor.induced_power_w * induced_factor + parasite
}

/// Draws `count` independent tasks, each attribute uniform on its range.
pub fn generate_tasks<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    ranges: &TaskRanges,
) -> Result<Vec<TaskSpec>> {
    ranges.validate()?;
    let mut draw = |[lo, hi]: [f64; 2]| lo + (hi - lo) * rng.random::<f64>();
    Ok((0..count)
        .map(|_| TaskSpec {
            size_bits: draw(ranges.size_bits),
            intensity_cycles_per_bit: draw(ranges.intensity_cycles_per_bit),
            deadline_s: draw(ranges.deadline_s),
        })
        .collect())
}

/// The at most `max_served` candidates within `coverage_radius` of the UAV,
/// nearest first, ties by lower index.
pub fn associate(
    uav: Point,
    candidates: impl IntoIterator<Item = usize>,
    sd_xy: &[Point],
    coverage_radius: f64,
    max_served: usize,
) -> Vec<usize> {
    let mut in_range: Vec<(f64, usize)> = candidates
        .into_iter()
        .map(|m| (uav.distance(&sd_xy[m]), m))
        .filter(|(d, _)| *d <= coverage_radius)
        .collect();
    in_range.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    in_range.truncate(max_served);
    in_range.into_iter().map(|(_, m)| m).collect()
}
