//! Distance-binned PRR counters, loss attribution and received-power CDFs.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::reception::{Outcome, ReceptionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinMode {
    /// A record counts in every bin `D_x` with `distance <= D_x`.
    #[default]
    Cumulative,
    /// A record counts only in the first bin whose edge covers it.
    Annulus,
}

fn default_bins() -> Vec<f64> {
    (1..=6).map(|i| 50.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default = "default_bins")]
    pub bins_m: Vec<f64>,
    #[serde(default)]
    pub bin_mode: BinMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { bins_m: default_bins(), bin_mode: BinMode::default() }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.bins_m.is_empty() {
            return Err(ConfigError::invalid("metrics.bins_m", "must not be empty"));
        }
        if self.bins_m.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(ConfigError::invalid("metrics.bins_m", "distances must be positive"));
        }
        if self.bins_m.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::invalid("metrics.bins_m", "must be strictly ascending"));
        }
        Ok(())
    }

    pub fn awareness_limit_m(&self) -> f64 {
        self.bins_m.last().copied().unwrap_or(0.0)
    }
}

/// Loss causes in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossCause {
    Interference,
    Propagation,
    HalfDuplex,
}

impl LossCause {
    fn slot(self) -> usize {
        match self {
            LossCause::Interference => 0,
            LossCause::Propagation => 1,
            LossCause::HalfDuplex => 2,
        }
    }

    fn of(outcome: Outcome) -> Option<LossCause> {
        match outcome {
            Outcome::Decoded => None,
            Outcome::LostInterference => Some(LossCause::Interference),
            Outcome::LostPropagation => Some(LossCause::Propagation),
            Outcome::LostHalfDuplex => Some(LossCause::HalfDuplex),
        }
    }
}

/// Cause for a message whose copies all failed: half-duplex only if every
/// copy was half-duplex, propagation if no copy failed by interference, else
/// interference.
pub fn attribute_failure(outcomes: &[Outcome]) -> Option<LossCause> {
    if outcomes.contains(&Outcome::Decoded) || outcomes.is_empty() {
        return None;
    }
    if outcomes.contains(&Outcome::LostInterference) {
        Some(LossCause::Interference)
    } else if outcomes.contains(&Outcome::LostPropagation) {
        Some(LossCause::Propagation)
    } else {
        Some(LossCause::HalfDuplex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BinCounters {
    pub raw_attempts: u64,
    pub raw_successes: u64,
    /// Per-copy losses indexed interference, propagation, half-duplex.
    pub raw_losses: [u64; 3],
    pub service_messages: u64,
    pub service_successes: u64,
    /// Per-message losses, same indexing as `raw_losses`.
    pub service_losses: [u64; 3],
}

impl BinCounters {
    fn merge(&mut self, o: &BinCounters) {
        self.raw_attempts += o.raw_attempts;
        self.raw_successes += o.raw_successes;
        self.service_messages += o.service_messages;
        self.service_successes += o.service_successes;
        for c in 0..3 {
            self.raw_losses[c] += o.raw_losses[c];
            self.service_losses[c] += o.service_losses[c];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrrAccumulator {
    bins: Vec<f64>,
    mode: BinMode,
    counters: Vec<BinCounters>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinPrr {
    pub d_x: f64,
    pub prr_raw: Option<f64>,
    pub prr_service: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinLosses {
    pub d_x: f64,
    pub interference: f64,
    pub propagation: f64,
    pub half_duplex: f64,
}

impl BinLosses {
    pub fn total(&self) -> f64 {
        self.interference + self.propagation + self.half_duplex
    }
}

impl PrrAccumulator {
    pub fn new(cfg: &MetricsConfig) -> Self {
        Self { bins: cfg.bins_m.clone(), mode: cfg.bin_mode, counters: vec![BinCounters::default(); cfg.bins_m.len()] }
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn counters(&self) -> &[BinCounters] {
        &self.counters
    }

    fn bin_range(&self, distance: f64) -> std::ops::Range<usize> {
        let first = self.bins.partition_point(|&d| d < distance);
        match self.mode {
            BinMode::Cumulative => first..self.bins.len(),
            BinMode::Annulus => first..(first + 1).min(self.bins.len()),
        }
    }

    /// Adds records; copies of one message are grouped by `(window, tx, rx)`
    /// wherever they appear in `records`.
    pub fn accumulate(&mut self, records: &[ReceptionRecord]) {
        let key = |r: &ReceptionRecord| (r.window, r.tx, r.rx);
        let sorted = records.windows(2).all(|w| key(&w[0]) <= key(&w[1]));
        let order: Vec<usize> = if sorted {
            (0..records.len()).collect()
        } else {
            let mut o: Vec<usize> = (0..records.len()).collect();
            o.sort_by_key(|&i| key(&records[i]));
            o
        };
        let mut outcomes = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let head = &records[order[start]];
            let mut end = start + 1;
            while end < order.len() && key(&records[order[end]]) == key(head) {
                end += 1;
            }
            outcomes.clear();
            outcomes.extend(order[start..end].iter().map(|&i| records[i].outcome));
            let group_failure = attribute_failure(&outcomes);
            let decoded = outcomes.iter().filter(|&&o| o == Outcome::Decoded).count() as u64;
            let mut raw_losses = [0u64; 3];
            for &o in &outcomes {
                if let Some(c) = LossCause::of(o) {
                    raw_losses[c.slot()] += 1;
                }
            }
            for b in self.bin_range(head.distance_m) {
                let c = &mut self.counters[b];
                c.raw_attempts += outcomes.len() as u64;
                c.raw_successes += decoded;
                for (total, n) in c.raw_losses.iter_mut().zip(raw_losses) {
                    *total += n;
                }
                c.service_messages += 1;
                match group_failure {
                    None => c.service_successes += 1,
                    Some(cause) => c.service_losses[cause.slot()] += 1,
                }
            }
            start = end;
        }
    }

    /// Combines two accumulators over the same bins.
    pub fn merge(&mut self, other: &PrrAccumulator) {
        assert_eq!(self.bins, other.bins, "merging accumulators with different bins");
        for (a, b) in self.counters.iter_mut().zip(&other.counters) {
            a.merge(b);
        }
    }

    pub fn prr_values(&self) -> Vec<BinPrr> {
        self.bins
            .iter()
            .zip(&self.counters)
            .map(|(&d_x, c)| BinPrr {
                d_x,
                prr_raw: (c.raw_attempts > 0).then(|| c.raw_successes as f64 / c.raw_attempts as f64),
                prr_service: (c.service_messages > 0).then(|| c.service_successes as f64 / c.service_messages as f64),
            })
            .collect()
    }

    /// Loss fractions of service messages; `None` for empty bins.
    pub fn loss_breakdown(&self) -> Vec<Option<BinLosses>> {
        self.bins
            .iter()
            .zip(&self.counters)
            .map(|(&d_x, c)| {
                (c.service_messages > 0).then(|| {
                    let n = c.service_messages as f64;
                    BinLosses {
                        d_x,
                        interference: c.service_losses[0] as f64 / n,
                        propagation: c.service_losses[1] as f64 / n,
                        half_duplex: c.service_losses[2] as f64 / n,
                    }
                })
            })
            .collect()
    }
}

/// Sensed power on selected primary subchannels, in mW.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerCdfAccumulator {
    samples: Vec<f64>,
}

impl PowerCdfAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, power_mw: f64) {
        debug_assert!(power_mw.is_finite() && power_mw >= 0.0);
        self.samples.push(power_mw);
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, it: I) {
        for p in it {
            self.push(p);
        }
    }

    pub fn merge(&mut self, other: &PowerCdfAccumulator) {
        self.samples.extend_from_slice(&other.samples);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        s
    }

    /// Empirical CDF as `(value, P(X <= value))`, one point per distinct value.
    pub fn power_cdf(&self) -> Vec<(f64, f64)> {
        let s = self.sorted();
        let n = s.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in s.iter().enumerate() {
            let p = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = p,
                _ => out.push((x, p)),
            }
        }
        out
    }

    /// Lower empirical quantile: smallest sample `x` with `F(x) >= q`.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let s = self.sorted();
        if s.is_empty() {
            return None;
        }
        let idx = ((q.clamp(0.0, 1.0) * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1;
        Some(s[idx])
    }
}
