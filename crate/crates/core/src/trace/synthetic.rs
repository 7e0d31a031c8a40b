//! Synthetic highway-segment traces.
//!
//! Vehicles are dropped uniformly on a straight multi-lane road and drive at a
//! constant per-vehicle speed. At either end of the segment a vehicle turns
//! around in its own lane, so the density on the segment stays constant for
//! the whole run.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MobilityTrace;
use crate::error::TraceError;
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub num_vehicles: usize,
    pub road_length_m: f64,
    pub num_lanes: usize,
    pub lane_spacing_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub duration_s: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            num_vehicles: 300,
            road_length_m: 1000.0,
            num_lanes: 4,
            lane_spacing_m: 4.0,
            speed_min_mps: 10.0,
            speed_max_mps: 30.0,
            duration_s: 60.0,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), TraceError> {
        if !(self.road_length_m.is_finite() && self.road_length_m > 0.0) {
            return Err(TraceError::Degenerate(format!("road length {} m", self.road_length_m)));
        }
        if self.num_lanes == 0 {
            return Err(TraceError::Degenerate("no lanes".into()));
        }
        if self.num_vehicles == 0 {
            return Err(TraceError::InvalidParams("num_vehicles must be at least 1".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(TraceError::InvalidParams(format!("duration {} s", self.duration_s)));
        }
        if !(self.speed_min_mps >= 0.0 && self.speed_min_mps <= self.speed_max_mps && self.speed_max_mps.is_finite()) {
            return Err(TraceError::InvalidParams(format!(
                "speed range [{}, {}] m/s",
                self.speed_min_mps, self.speed_max_mps
            )));
        }
        if !(self.lane_spacing_m.is_finite() && self.lane_spacing_m >= 0.0) {
            return Err(TraceError::InvalidParams(format!("lane spacing {} m", self.lane_spacing_m)));
        }
        Ok(())
    }
}

/// Folds an unbounded coordinate back onto `[0, len]` as if bouncing between
/// the two ends.
fn reflect(s: f64, len: f64) -> f64 {
    let period = 2.0 * len;
    let r = s.rem_euclid(period);
    if r <= len {
        r
    } else {
        period - r
    }
}

pub fn generate_synthetic(params: &SyntheticParams, rng: &mut StreamRng) -> Result<MobilityTrace, TraceError> {
    params.validate()?;
    let width = params.num_vehicles.saturating_sub(1).to_string().len();
    let vehicles: Vec<_> = (0..params.num_vehicles)
        .map(|i| {
            let x0 = rng.random_range(0.0..=params.road_length_m);
            let lane = rng.random_range(0..params.num_lanes);
            let speed = if params.speed_max_mps > params.speed_min_mps {
                rng.random_range(params.speed_min_mps..=params.speed_max_mps)
            } else {
                params.speed_min_mps
            };
            // even lanes run towards +x, odd lanes towards -x
            let velocity = if lane % 2 == 0 { speed } else { -speed };
            (format!("v{i:0width$}"), x0, lane as f64 * params.lane_spacing_m, velocity)
        })
        .collect();
    let steps = params.duration_s.floor() as u64;
    let mut rows = Vec::with_capacity(vehicles.len() * (steps as usize + 1));
    for step in 0..=steps {
        let t = step as f64;
        for (id, x0, y, v) in &vehicles {
            rows.push((t, id.as_str(), reflect(x0 + v * t, params.road_length_m), *y));
        }
    }
    MobilityTrace::from_rows(rows)
}
