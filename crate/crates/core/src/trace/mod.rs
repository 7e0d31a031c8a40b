//! Vehicle mobility traces.
//!
//! A trace is a header-less CSV of `time_s,vehicle_id,x_m,y_m` rows. Positions
//! between samples are reconstructed by linear interpolation and sampled once
//! per scheduling window.

mod fcd;
mod synthetic;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::TraceError;
use crate::grid::{GridConfig, WindowIndex};

pub use fcd::{fcd_to_csv, load_fcd};
pub use synthetic::{generate_synthetic, SyntheticParams};

/// Slack for comparing window start times against sample times.
const TIME_EPS: f64 = 1e-9;

/// Dense index of a vehicle inside one [`MobilityTrace`].
pub type VehicleIdx = u32;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Position) -> Position {
        Position::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub vehicle: VehicleIdx,
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTrace {
    /// All samples ordered by time; ties keep input order.
    samples: Vec<Sample>,
    vehicle_ids: Vec<String>,
    /// Per-vehicle `(time, position)` tracks, strictly increasing in time.
    tracks: Vec<Vec<(f64, Position)>>,
    start: f64,
    end: f64,
}

impl MobilityTrace {
    /// Builds a trace from `(time, id, x, y)` rows. `line` numbers in errors
    /// refer to positions in `rows` (1-based).
    pub fn from_rows<I, S>(rows: I) -> Result<Self, TraceError>
    where
        I: IntoIterator<Item = (f64, S, f64, f64)>,
        S: AsRef<str>,
    {
        let mut index: HashMap<String, VehicleIdx> = HashMap::new();
        let mut vehicle_ids = Vec::new();
        let mut tracks: Vec<Vec<(f64, Position)>> = Vec::new();
        let mut samples = Vec::new();
        for (n, (time, id, x, y)) in rows.into_iter().enumerate() {
            let line = n + 1;
            let id = id.as_ref();
            if !(time.is_finite() && x.is_finite() && y.is_finite()) {
                return Err(TraceError::Malformed { line, message: "non-finite value".into() });
            }
            if id.is_empty() {
                return Err(TraceError::Malformed { line, message: "empty vehicle id".into() });
            }
            let v = *index.entry(id.to_string()).or_insert_with(|| {
                vehicle_ids.push(id.to_string());
                tracks.push(Vec::new());
                (vehicle_ids.len() - 1) as VehicleIdx
            });
            let track = &mut tracks[v as usize];
            if let Some(&(previous, _)) = track.last() {
                if time <= previous {
                    return Err(TraceError::NonMonotone { line, vehicle: id.to_string(), time, previous });
                }
            }
            let pos = Position::new(x, y);
            track.push((time, pos));
            samples.push(Sample { time, vehicle: v, pos });
        }
        if samples.is_empty() {
            return Err(TraceError::Empty);
        }
        // Canonical indices: ascending vehicle id.
        let mut order: Vec<usize> = (0..vehicle_ids.len()).collect();
        order.sort_by(|&a, &b| vehicle_ids[a].cmp(&vehicle_ids[b]));
        let mut remap = vec![0 as VehicleIdx; order.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new as VehicleIdx;
        }
        let vehicle_ids: Vec<String> = order.iter().map(|&old| vehicle_ids[old].clone()).collect();
        let mut slots: Vec<Option<Vec<(f64, Position)>>> = tracks.into_iter().map(Some).collect();
        let tracks: Vec<_> = order.iter().map(|&old| slots[old].take().unwrap_or_default()).collect();
        for s in &mut samples {
            s.vehicle = remap[s.vehicle as usize];
        }
        samples.sort_by(|a, b| a.time.total_cmp(&b.time));
        let start = samples.first().map(|s| s.time).unwrap_or_default();
        let end = samples.last().map(|s| s.time).unwrap_or_default();
        Ok(Self { samples, vehicle_ids, tracks, start, end })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn vehicle_ids(&self) -> &[String] {
        &self.vehicle_ids
    }

    pub fn vehicle_name(&self, v: VehicleIdx) -> &str {
        &self.vehicle_ids[v as usize]
    }

    pub fn num_vehicles(&self) -> usize {
        self.vehicle_ids.len()
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Number of whole windows whose start time lies inside the trace.
    pub fn num_windows(&self, cfg: &GridConfig) -> u64 {
        (self.duration() / cfg.window_seconds() + TIME_EPS).floor() as u64 + 1
    }

    pub fn window_start_time(&self, window: WindowIndex, cfg: &GridConfig) -> f64 {
        self.start + window.0 as f64 * cfg.window_seconds()
    }

    /// Interpolated position of one vehicle, or `None` outside its lifetime.
    pub fn position_at(&self, v: VehicleIdx, t: f64) -> Option<Position> {
        let track = self.tracks.get(v as usize)?;
        let (first, last) = (track.first()?, track.last()?);
        if t < first.0 - TIME_EPS || t > last.0 + TIME_EPS {
            return None;
        }
        let i = track.partition_point(|&(ts, _)| ts <= t);
        if i == 0 {
            return Some(first.1);
        }
        if i == track.len() {
            return Some(last.1);
        }
        let (t0, p0) = track[i - 1];
        let (t1, p1) = track[i];
        if (t - t0).abs() <= TIME_EPS {
            return Some(p0);
        }
        let w = (t - t0) / (t1 - t0);
        Some(Position::new(p0.x + w * (p1.x - p0.x), p0.y + w * (p1.y - p0.y)))
    }

    /// Positions held for the whole of `window`.
    pub fn snapshot_at(&self, window: WindowIndex, cfg: &GridConfig) -> Result<FleetSnapshot, TraceError> {
        let t = self.window_start_time(window, cfg);
        if t > self.end + TIME_EPS {
            return Err(TraceError::OutOfRange { time: t, start: self.start, end: self.end });
        }
        let positions = (0..self.num_vehicles() as VehicleIdx)
            .filter_map(|v| self.position_at(v, t).map(|p| (v, p)))
            .collect();
        Ok(FleetSnapshot { window, time: t, positions })
    }

    /// Serializes back into the CSV format accepted by [`load_trace`].
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{},{}", s.time, self.vehicle_name(s.vehicle), s.pos.x, s.pos.y);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSnapshot {
    pub window: WindowIndex,
    pub time: f64,
    /// Present vehicles in ascending index order.
    pub positions: Vec<(VehicleIdx, Position)>,
}

impl FleetSnapshot {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn get(&self, v: VehicleIdx) -> Option<Position> {
        self.positions.binary_search_by_key(&v, |&(id, _)| id).ok().map(|i| self.positions[i].1)
    }
}

/// Parses the trace CSV format.
pub fn load_trace<R: BufRead>(source: R) -> Result<MobilityTrace, TraceError> {
    let mut rows = Vec::new();
    let mut line_numbers = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows.push(parse_row(line, line_no)?);
        line_numbers.push(line_no);
    }
    // Re-map row positions onto file lines so errors name the real line.
    MobilityTrace::from_rows(rows).map_err(|e| match e {
        TraceError::Malformed { line, message } => TraceError::Malformed { line: line_numbers[line - 1], message },
        TraceError::NonMonotone { line, vehicle, time, previous } => {
            TraceError::NonMonotone { line: line_numbers[line - 1], vehicle, time, previous }
        }
        other => other,
    })
}

pub fn load_trace_str(text: &str) -> Result<MobilityTrace, TraceError> {
    load_trace(text.as_bytes())
}

fn parse_row(line: &str, line_no: usize) -> Result<(f64, String, f64, f64), TraceError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(TraceError::Malformed {
            line: line_no,
            message: format!("expected 4 fields, found {}", fields.len()),
        });
    }
    let num = |name: &str, s: &str| -> Result<f64, TraceError> {
        s.parse::<f64>().map_err(|_| TraceError::Malformed { line: line_no, message: format!("bad {name} {s:?}") })
    };
    let time = num("time", fields[0])?;
    let x = num("x", fields[2])?;
    let y = num("y", fields[3])?;
    Ok((time, fields[1].to_string(), x, y))
}
