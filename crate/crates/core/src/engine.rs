//! Window-by-window simulation driver.
//!
//! Per window: snapshot positions, update shadowing, assemble the
//! transmission plan from every vehicle's reservation, evaluate all links,
//! accumulate metrics, then step each vehicle's scheduler. All randomness
//! comes from seed-derived streams split by purpose and vehicle, so the
//! channel realization does not depend on `K` or `F` and results do not
//! depend on thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelConfig, LinkTable, ShadowField};
use crate::error::{ConfigError, SimError};
use crate::grid::{GridConfig, WindowIndex};
use crate::metrics::{BinLosses, BinPrr, MetricsConfig, PowerCdfAccumulator, PrrAccumulator};
use crate::plan::WindowPlan;
use crate::reception::{evaluate_window, DecodeThresholds};
use crate::rng::{counter_stream, vehicle_stream, Purpose};
use crate::sps::{initial_state, sense_powers, step_window, SchedulerConfig, SpsState, VehicleRngs};
use crate::trace::{FleetSnapshot, MobilityTrace, VehicleIdx};

/// Everything the engine needs besides the trace and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub channel: ChannelConfig,
    pub scheduler: SchedulerConfig,
    pub reception: DecodeThresholds,
    pub metrics: MetricsConfig,
    /// Windows excluded from metrics; defaults to the longest SPS period.
    pub warmup_windows: Option<u64>,
}

impl SimConfig {
    pub fn new(selectivity_k: usize, num_sub_bands: usize) -> Self {
        Self {
            grid: GridConfig::default().with_sub_bands(num_sub_bands),
            channel: ChannelConfig::default(),
            scheduler: SchedulerConfig::new(selectivity_k),
            reception: DecodeThresholds::default(),
            metrics: MetricsConfig::default(),
            warmup_windows: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid.validate()?;
        self.channel.validate(self.grid.num_sub_bands)?;
        self.scheduler.validate(&self.grid)?;
        self.reception.validate()?;
        self.metrics.validate()?;
        Ok(())
    }

    pub fn warmup(&self) -> u64 {
        self.warmup_windows.unwrap_or_else(|| self.scheduler.max_duration_windows(&self.grid) as u64)
    }

    /// SHA-256 over the canonical JSON form of the config.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config_digest: String,
    pub selectivity_k: usize,
    pub num_sub_bands: usize,
    pub windows_simulated: u64,
    pub warmup_windows: u64,
    pub measured_windows: u64,
    pub mean_fleet_size: f64,
    pub reception_records: u64,
    pub reselections: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub prr: Vec<BinPrr>,
    pub losses: Vec<Option<BinLosses>>,
    pub counters: PrrAccumulator,
    pub power_cdf: PowerCdfAccumulator,
    pub meta: RunMetadata,
}

struct VehicleSlot {
    state: SpsState,
    rngs: VehicleRngs,
}

fn bootstrap(name: &str, seed: u64, cfg: &SimConfig) -> VehicleSlot {
    let mut rngs = VehicleRngs {
        scheduler: vehicle_stream(seed, Purpose::Scheduler, name),
        replicas: vehicle_stream(seed, Purpose::Replicas, name),
    };
    let state = initial_state(cfg.grid.num_sub_bands, &cfg.scheduler, &cfg.grid, &mut rngs);
    VehicleSlot { state, rngs }
}

/// Initial reservations for every vehicle present in window 0, in vehicle
/// index order.
pub fn init_fleet(trace: &MobilityTrace, cfg: &SimConfig, seed: u64) -> Result<Vec<(VehicleIdx, SpsState)>, SimError> {
    let snap = trace.snapshot_at(WindowIndex(0), &cfg.grid)?;
    Ok(snap
        .positions
        .iter()
        .map(|&(v, _)| (v, bootstrap(trace.vehicle_name(v), seed, cfg).state))
        .collect())
}

pub fn run(cfg: &SimConfig, trace: &MobilityTrace, seed: u64) -> Result<SimulationResult, SimError> {
    Ok(run_paired(std::slice::from_ref(cfg), trace, seed)?.pop().expect("one result per config"))
}

/// Per-config state carried across windows.
struct Lane<'a> {
    cfg: &'a SimConfig,
    warmup: u64,
    slots: Vec<Option<VehicleSlot>>,
    prr: PrrAccumulator,
    cdf: PowerCdfAccumulator,
    measured: u64,
    records: u64,
    reselections: u64,
}

impl<'a> Lane<'a> {
    fn new(cfg: &'a SimConfig, num_vehicles: usize) -> Self {
        Self {
            cfg,
            warmup: cfg.warmup(),
            slots: (0..num_vehicles).map(|_| None).collect(),
            prr: PrrAccumulator::new(&cfg.metrics),
            cdf: PowerCdfAccumulator::new(),
            measured: 0,
            records: 0,
            reselections: 0,
        }
    }

    fn window(
        &mut self,
        n: u64,
        snapshot: &FleetSnapshot,
        links: &LinkTable,
        trace: &MobilityTrace,
        seed: u64,
    ) -> Result<(), SimError> {
        let cfg = self.cfg;
        // churn: departed vehicles drop their reservation, newcomers bootstrap
        let mut present = vec![false; self.slots.len()];
        for &(v, _) in &snapshot.positions {
            present[v as usize] = true;
            if self.slots[v as usize].is_none() {
                self.slots[v as usize] = Some(bootstrap(trace.vehicle_name(v), seed, cfg));
            }
        }
        for (v, slot) in self.slots.iter_mut().enumerate() {
            if !present[v] {
                *slot = None;
            }
        }

        let mut active: Vec<&mut VehicleSlot> = self.slots.iter_mut().filter_map(Option::as_mut).collect();
        let plan = WindowPlan::new(
            snapshot.window,
            &cfg.grid,
            snapshot
                .positions
                .iter()
                .zip(active.iter())
                .map(|(&(v, _), slot)| (v, slot.state.occupied()))
                .collect(),
        );

        let measuring = n >= self.warmup;
        if measuring {
            let records = evaluate_window(&plan, links, &cfg.channel, &cfg.reception, cfg.metrics.awareness_limit_m());
            self.records += records.len() as u64;
            self.prr.accumulate(&records);
            self.measured += 1;
        }

        let selections: Vec<Option<f64>> = active
            .par_iter_mut()
            .enumerate()
            .map(|(slot_idx, slot)| {
                let (next, outcome) = step_window(
                    &slot.state,
                    || sense_powers(slot_idx, &plan, links, &cfg.channel),
                    &cfg.scheduler,
                    &cfg.grid,
                    &mut slot.rngs,
                )
                .map_err(|_| slot_idx)?;
                slot.state = next;
                Ok(outcome.selection.map(|s| s.sensed_power))
            })
            .collect::<Result<_, usize>>()
            .map_err(|slot_idx| SimError::NoCandidates {
                vehicle: trace.vehicle_name(plan.vehicle(slot_idx)).to_string(),
            })?;
        for p in selections.into_iter().flatten() {
            self.reselections += 1;
            if measuring {
                self.cdf.push(p);
            }
        }
        Ok(())
    }
}

/// Runs several configs over one shared channel realization. The configs may
/// differ in scheduler, sub-band count, reception and metrics settings but
/// must agree on the channel model and window timing. Each result equals what
/// [`run`] returns for that config alone.
pub fn run_paired(cfgs: &[SimConfig], trace: &MobilityTrace, seed: u64) -> Result<Vec<SimulationResult>, SimError> {
    let Some(first) = cfgs.first() else {
        return Ok(Vec::new());
    };
    for cfg in cfgs {
        cfg.validate()?;
        if cfg.channel != first.channel {
            return Err(ConfigError::invalid("channel", "paired runs must share the channel model").into());
        }
        if cfg.grid.window_ms != first.grid.window_ms {
            return Err(ConfigError::invalid("grid.window_ms", "paired runs must share the window length").into());
        }
    }
    let num_windows = trace.num_windows(&first.grid);
    if num_windows < 2 {
        return Err(ConfigError::invalid(
            "trace",
            format!("trace spans {} s, shorter than two windows", trace.duration()),
        )
        .into());
    }

    let mut lanes: Vec<Lane> = cfgs.iter().map(|c| Lane::new(c, trace.num_vehicles())).collect();
    let mut shadow = ShadowField::new();
    let mut fleet_total = 0u64;

    for n in 0..num_windows {
        let snapshot = trace.snapshot_at(WindowIndex(n), &first.grid)?;
        fleet_total += snapshot.len() as u64;
        shadow.update_snapshot(&snapshot, &mut counter_stream(seed, Purpose::Shadowing, n), &first.channel);
        let links = LinkTable::build(&snapshot, &shadow, &first.channel);
        lanes
            .par_iter_mut()
            .map(|lane| lane.window(n, &snapshot, &links, trace, seed))
            .collect::<Result<Vec<()>, SimError>>()?;
    }

    Ok(lanes
        .into_iter()
        .map(|lane| SimulationResult {
            prr: lane.prr.prr_values(),
            losses: lane.prr.loss_breakdown(),
            meta: RunMetadata {
                seed,
                config_digest: lane.cfg.digest(),
                selectivity_k: lane.cfg.scheduler.selectivity_k,
                num_sub_bands: lane.cfg.grid.num_sub_bands,
                windows_simulated: num_windows,
                warmup_windows: lane.warmup,
                measured_windows: lane.measured,
                mean_fleet_size: fleet_total as f64 / num_windows as f64,
                reception_records: lane.records,
                reselections: lane.reselections,
            },
            counters: lane.prr,
            power_cdf: lane.cdf,
        })
        .collect())
}
