//! Per-vehicle mode-4 scheduler.
//!
//! A vehicle keeps one primary subchannel (sub-band 1) for `N_w` windows.
//! When the counter expires it ranks the primary subchannels by the power it
//! sensed during the last window and picks uniformly among the `K` quietest.
//! Auxiliary sub-bands carry blind replicas at uniformly drawn subframes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ibe_weight, ChannelConfig, LinkTable};
use crate::error::ConfigError;
use crate::grid::{GridConfig, SubchannelId};
use crate::plan::WindowPlan;
use crate::rng::StreamRng;

/// Power sensed on each primary subchannel during one window, in mW.
/// `None` marks subframes where the vehicle itself transmitted.
#[derive(Debug, Clone, PartialEq)]
pub struct SensedPowerVector(Vec<Option<f64>>);

impl SensedPowerVector {
    pub fn new(values: Vec<Option<f64>>) -> Self {
        Self(values)
    }

    pub fn from_powers(powers: &[f64]) -> Self {
        Self(powers.iter().copied().map(Some).collect())
    }

    /// Power at subframe `k` (1-indexed); `None` when unsensable.
    pub fn get(&self, subframe: u16) -> Option<f64> {
        self.0[subframe as usize - 1]
    }

    pub fn is_unsensable(&self, subframe: u16) -> bool {
        self.get(subframe).is_none()
    }

    pub fn unsensable_count(&self) -> usize {
        self.0.iter().filter(|v| v.is_none()).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v.map(|p| p * factor)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxPolicy {
    /// Replica subframes are redrawn every window.
    #[default]
    PerWindow,
    /// Replica subframes are redrawn only on primary reselection.
    PerPeriod,
}

fn default_durations() -> Vec<f64> {
    (5..=15).map(|d| d as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    /// Size `K` of the lowest-power candidate pool.
    pub selectivity_k: usize,
    /// Allowed SPS periods in seconds.
    #[serde(default = "default_durations")]
    pub sps_duration_choices_s: Vec<f64>,
    #[serde(default)]
    pub aux_policy: AuxPolicy,
}

impl SchedulerConfig {
    pub fn new(selectivity_k: usize) -> Self {
        Self { selectivity_k, sps_duration_choices_s: default_durations(), aux_policy: AuxPolicy::default() }
    }

    pub fn validate(&self, grid: &GridConfig) -> Result<(), ConfigError> {
        if self.selectivity_k == 0 || self.selectivity_k > grid.subchannels_per_band {
            return Err(ConfigError::invalid(
                "scheduler.selectivity_k",
                format!("must lie in 1..={}, got {}", grid.subchannels_per_band, self.selectivity_k),
            ));
        }
        if self.sps_duration_choices_s.is_empty() {
            return Err(ConfigError::invalid("scheduler.sps_duration_choices_s", "must not be empty"));
        }
        for &s in &self.sps_duration_choices_s {
            let windows = s * 1000.0 / grid.window_ms as f64;
            if !(windows.is_finite() && windows >= 1.0 - 1e-9 && (windows - windows.round()).abs() < 1e-6) {
                return Err(ConfigError::invalid(
                    "scheduler.sps_duration_choices_s",
                    format!("{s} s is not a positive multiple of the {} ms window", grid.window_ms),
                ));
            }
        }
        Ok(())
    }

    /// Duration choices converted to whole windows.
    pub fn duration_windows(&self, grid: &GridConfig) -> Vec<u32> {
        self.sps_duration_choices_s
            .iter()
            .map(|s| (s * 1000.0 / grid.window_ms as f64).round() as u32)
            .collect()
    }

    pub fn max_duration_windows(&self, grid: &GridConfig) -> u32 {
        self.duration_windows(grid).into_iter().max().unwrap_or(1)
    }
}

/// Reservation state of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct SpsState {
    pub primary: SubchannelId,
    /// Replica subframe for sub-bands `2..=F`, in band order.
    pub aux_subframes: Vec<u16>,
    pub windows_remaining: u32,
    pub sps_duration_windows: u32,
}

impl SpsState {
    /// Every subchannel the vehicle uses in the current window.
    pub fn occupied(&self) -> Vec<SubchannelId> {
        std::iter::once(self.primary)
            .chain(self.aux_subframes.iter().enumerate().map(|(n, &k)| SubchannelId { sub_band: n as u16 + 2, subframe: k }))
            .collect()
    }
}

/// Independent random streams owned by one vehicle.
#[derive(Debug, Clone)]
pub struct VehicleRngs {
    pub scheduler: StreamRng,
    pub replicas: StreamRng,
}

/// Sensing per the power-sensing rule: for each primary subframe where
/// vehicle `slot` is silent, sum `I_{1,p} P g` over every other vehicle's
/// transmissions in that subframe.
pub fn sense_powers(slot: usize, plan: &WindowPlan, links: &LinkTable, cfg: &ChannelConfig) -> SensedPowerVector {
    let p_tx = cfg.tx_power_mw();
    let values = (1..=plan.num_subframes() as u16)
        .map(|k| {
            if plan.transmits_in(slot, k) {
                return None;
            }
            let power = plan
                .concurrent(k)
                .iter()
                .filter(|&&(j, _)| j != slot)
                .map(|&(j, p)| ibe_weight(1, p, cfg) * p_tx * links.gain(slot, j))
                .sum();
            Some(power)
        })
        .collect();
    SensedPowerVector(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("every primary subchannel is unsensable")]
pub struct NoCandidates;

/// Chosen primary subchannel together with the power sensed on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub subchannel: SubchannelId,
    pub sensed_power: f64,
}

/// Ascending-power ranking of the sensable subframes; ties keep subframe order.
pub fn rank(sensed: &SensedPowerVector) -> Vec<(u16, f64)> {
    let mut ranked: Vec<(u16, f64)> = sensed
        .0
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|p| (i as u16 + 1, p)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked
}

pub fn rank_and_select(sensed: &SensedPowerVector, k: usize, rng: &mut StreamRng) -> Result<Selection, NoCandidates> {
    let ranked = rank(sensed);
    if ranked.is_empty() {
        return Err(NoCandidates);
    }
    let pool = k.clamp(1, ranked.len());
    let (subframe, sensed_power) = ranked[rng.random_range(0..pool)];
    Ok(Selection { subchannel: SubchannelId::primary(subframe), sensed_power })
}

pub fn draw_sps_duration(cfg: &SchedulerConfig, grid: &GridConfig, rng: &mut StreamRng) -> u32 {
    let choices = cfg.duration_windows(grid);
    choices[rng.random_range(0..choices.len())]
}

pub fn draw_aux_subframes(num_sub_bands: usize, grid: &GridConfig, rng: &mut StreamRng) -> Vec<u16> {
    (1..num_sub_bands).map(|_| rng.random_range(1..=grid.subchannels_per_band as u16)).collect()
}

/// Bootstrap state: uniform primary, uniform counter offset in `1..=N_w`.
pub fn initial_state(num_sub_bands: usize, cfg: &SchedulerConfig, grid: &GridConfig, rngs: &mut VehicleRngs) -> SpsState {
    let primary = SubchannelId::primary(rngs.scheduler.random_range(1..=grid.subchannels_per_band as u16));
    let duration = draw_sps_duration(cfg, grid, &mut rngs.scheduler);
    let windows_remaining = rngs.scheduler.random_range(1..=duration);
    let aux_subframes = draw_aux_subframes(num_sub_bands, grid, &mut rngs.replicas);
    SpsState { primary, aux_subframes, windows_remaining, sps_duration_windows: duration }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Set when the counter expired and a new primary was chosen.
    pub selection: Option<Selection>,
}

impl StepOutcome {
    pub fn did_reselect(&self) -> bool {
        self.selection.is_some()
    }
}

/// Advances one window. `sense` is only invoked when the counter expires and
/// must describe the window that has just elapsed.
pub fn step_window<S>(
    state: &SpsState,
    sense: S,
    cfg: &SchedulerConfig,
    grid: &GridConfig,
    rngs: &mut VehicleRngs,
) -> Result<(SpsState, StepOutcome), NoCandidates>
where
    S: FnOnce() -> SensedPowerVector,
{
    let mut next = state.clone();
    let mut outcome = StepOutcome { selection: None };
    next.windows_remaining = state.windows_remaining.saturating_sub(1);
    if next.windows_remaining == 0 {
        let sensed = sense();
        let selection = rank_and_select(&sensed, cfg.selectivity_k, &mut rngs.scheduler)?;
        next.primary = selection.subchannel;
        next.sps_duration_windows = draw_sps_duration(cfg, grid, &mut rngs.scheduler);
        next.windows_remaining = next.sps_duration_windows;
        outcome.selection = Some(selection);
    }
    if cfg.aux_policy == AuxPolicy::PerWindow || outcome.did_reselect() {
        next.aux_subframes = draw_aux_subframes(state.aux_subframes.len() + 1, grid, &mut rngs.replicas);
    }
    Ok((next, outcome))
}
