//! Link gains: pathloss, correlated shadowing, antenna gains and in-band
//! emission weights.


use rand_distr::{Distribution, StandardNormal};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::rng::StreamRng;
use crate::trace::{FleetSnapshot, Position, VehicleIdx};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// WINNER+ B1 (urban micro-cell) LOS model constants.
///
/// Below the breakpoint `d_bp = 4 h'_tx h'_rx f_c / c` the loss is
/// `near_slope log10(d) + near_intercept + near_freq_coef log10(f_c / 5 GHz)`;
/// beyond it `far_slope log10(d) + far_intercept + height_coef (log10 h'_tx +
/// log10 h'_rx) + far_freq_coef log10(f_c / 5 GHz)`, where `h' = h - height_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WinnerB1Params {
    pub tx_height_m: f64,
    pub rx_height_m: f64,
    pub height_offset_m: f64,
    pub near_slope: f64,
    pub near_intercept: f64,
    pub near_freq_coef: f64,
    pub far_slope: f64,
    pub far_intercept: f64,
    pub height_coef: f64,
    pub far_freq_coef: f64,
}

impl Default for WinnerB1Params {
    fn default() -> Self {
        Self {
            tx_height_m: 1.5,
            rx_height_m: 1.5,
            height_offset_m: 1.0,
            near_slope: 22.7,
            near_intercept: 41.0,
            near_freq_coef: 20.0,
            far_slope: 40.0,
            far_intercept: 9.45,
            height_coef: -17.3,
            far_freq_coef: 2.7,
        }
    }
}

impl WinnerB1Params {
    fn effective_heights(&self) -> (f64, f64) {
        (self.tx_height_m - self.height_offset_m, self.rx_height_m - self.height_offset_m)
    }

    pub fn breakpoint_m(&self, carrier_freq_ghz: f64) -> f64 {
        let (ht, hr) = self.effective_heights();
        4.0 * ht * hr * carrier_freq_ghz * 1e9 / SPEED_OF_LIGHT
    }

    fn near(&self, d: f64, fc: f64) -> f64 {
        self.near_slope * d.log10() + self.near_intercept + self.near_freq_coef * (fc / 5.0).log10()
    }

    fn far(&self, d: f64, fc: f64) -> f64 {
        let (ht, hr) = self.effective_heights();
        self.far_slope * d.log10()
            + self.far_intercept
            + self.height_coef * (ht.log10() + hr.log10())
            + self.far_freq_coef * (fc / 5.0).log10()
    }

    /// Loss in dB. The far branch is clamped from below by the near branch's
    /// value at the breakpoint so that the curve never steps down there.
    pub fn pathloss_db(&self, d: f64, carrier_freq_ghz: f64) -> f64 {
        let bp = self.breakpoint_m(carrier_freq_ghz);
        if d < bp {
            self.near(d, carrier_freq_ghz)
        } else {
            self.far(d, carrier_freq_ghz).max(self.near(bp, carrier_freq_ghz))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub tx_power_dbm: f64,
    pub antenna_gain_db: f64,
    pub shadow_sigma_db: f64,
    pub shadow_corr_dist_m: f64,
    pub carrier_freq_ghz: f64,
    /// Linear leakage weights indexed by sub-band separation; element 0 is the
    /// co-channel weight.
    pub ibe_vector: Vec<f64>,
    pub noise_power_dbm: f64,
    pub sensitivity_dbm: f64,
    pub min_distance_m: f64,
    pub winner_b1: WinnerB1Params,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 23.0,
            antenna_gain_db: 3.0,
            shadow_sigma_db: 7.0,
            shadow_corr_dist_m: 10.0,
            carrier_freq_ghz: 5.9,
            ibe_vector: vec![1.0, 1e-3, 1e-4],
            noise_power_dbm: -103.4,
            sensitivity_dbm: -103.4,
            min_distance_m: 1.0,
            winner_b1: WinnerB1Params::default(),
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self, num_sub_bands: usize) -> Result<(), ConfigError> {
        let finite = [
            ("channel.tx_power_dbm", self.tx_power_dbm),
            ("channel.antenna_gain_db", self.antenna_gain_db),
            ("channel.noise_power_dbm", self.noise_power_dbm),
            ("channel.sensitivity_dbm", self.sensitivity_dbm),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(ConfigError::invalid(key, "must be finite"));
            }
        }
        if !(self.shadow_sigma_db.is_finite() && self.shadow_sigma_db >= 0.0) {
            return Err(ConfigError::invalid("channel.shadow_sigma_db", "must be >= 0"));
        }
        if !(self.shadow_corr_dist_m.is_finite() && self.shadow_corr_dist_m > 0.0) {
            return Err(ConfigError::invalid("channel.shadow_corr_dist_m", "must be > 0"));
        }
        if !(self.carrier_freq_ghz.is_finite() && self.carrier_freq_ghz > 0.0) {
            return Err(ConfigError::invalid("channel.carrier_freq_ghz", "must be > 0"));
        }
        if !(self.min_distance_m.is_finite() && self.min_distance_m > 0.0) {
            return Err(ConfigError::invalid("channel.min_distance_m", "must be > 0"));
        }
        if self.ibe_vector.first() != Some(&1.0) {
            return Err(ConfigError::invalid("channel.ibe_vector", "first (co-channel) weight must be 1"));
        }
        if self.ibe_vector.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return Err(ConfigError::invalid("channel.ibe_vector", "weights must lie in (0, 1]"));
        }
        if num_sub_bands > self.ibe_vector.len() {
            return Err(ConfigError::invalid(
                "channel.ibe_vector",
                format!("{} sub-bands need at least {} weights, got {}", num_sub_bands, num_sub_bands, self.ibe_vector.len()),
            ));
        }
        let (ht, hr) = self.winner_b1.effective_heights();
        if !(ht > 0.0 && hr > 0.0) {
            return Err(ConfigError::invalid("channel.winner_b1", "effective antenna heights must be > 0"));
        }
        Ok(())
    }

    pub fn tx_power_mw(&self) -> f64 {
        db_to_linear(self.tx_power_dbm)
    }

    pub fn noise_mw(&self) -> f64 {
        db_to_linear(self.noise_power_dbm)
    }
}

pub fn free_space_pathloss_db(distance_m: f64, carrier_freq_ghz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance_m * carrier_freq_ghz * 1e9 / SPEED_OF_LIGHT).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("distance {0} m is not positive")]
pub struct NonPositiveDistance(pub f64);

/// `max(free-space, WINNER+ B1)` after flooring the distance.
pub fn pathloss_db(distance_m: f64, cfg: &ChannelConfig) -> Result<f64, NonPositiveDistance> {
    let d = distance_m.max(cfg.min_distance_m);
    if d <= 0.0 || !d.is_finite() {
        return Err(NonPositiveDistance(distance_m));
    }
    let fs = free_space_pathloss_db(d, cfg.carrier_freq_ghz);
    let b1 = cfg.winner_b1.pathloss_db(d, cfg.carrier_freq_ghz);
    Ok(fs.max(b1))
}

/// Leakage weight from sub-band `p` onto sub-band `f` (1-indexed).
pub fn ibe_weight(f: u16, p: u16, cfg: &ChannelConfig) -> f64 {
    cfg.ibe_vector[f.abs_diff(p) as usize]
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ShadowEntry {
    value_db: f64,
    anchor: Position,
}

/// Spatially correlated log-normal shadowing per unordered vehicle pair.
#[derive(Debug, Clone, Default)]
pub struct ShadowField {
    entries: FxHashMap<(VehicleIdx, VehicleIdx), ShadowEntry>,
}

fn pair_key(i: VehicleIdx, j: VehicleIdx) -> (VehicleIdx, VehicleIdx) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

impl ShadowField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, i: VehicleIdx, j: VehicleIdx) -> Option<f64> {
        self.entries.get(&pair_key(i, j)).map(|e| e.value_db)
    }

    /// Sets a pair's value directly; used to pin fixtures.
    pub fn set(&mut self, i: VehicleIdx, j: VehicleIdx, value_db: f64, anchor: Position) {
        self.entries.insert(pair_key(i, j), ShadowEntry { value_db, anchor });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Gudmundson update: `new = rho old + sqrt(1 - rho^2) N(0, sigma^2)` with
    /// `rho = exp(-dd / corr_dist)`, `dd` being how far the pair midpoint moved
    /// since the previous draw. The first draw for a pair is fresh.
    pub fn update(
        &mut self,
        i: VehicleIdx,
        j: VehicleIdx,
        pi: Position,
        pj: Position,
        rng: &mut StreamRng,
        cfg: &ChannelConfig,
    ) -> f64 {
        let mid = pi.midpoint(&pj);
        let z: f64 = StandardNormal.sample(rng);
        let fresh = cfg.shadow_sigma_db * z;
        let entry = self
            .entries
            .entry(pair_key(i, j))
            .and_modify(|e| {
                let rho = (-e.anchor.distance(&mid) / cfg.shadow_corr_dist_m).exp();
                e.value_db = rho * e.value_db + (1.0 - rho * rho).sqrt() * fresh;
                e.anchor = mid;
            })
            .or_insert(ShadowEntry { value_db: fresh, anchor: mid });
        entry.value_db
    }

    /// Updates every pair of the snapshot in ascending `(i, j)` order and
    /// forgets pairs involving vehicles that have left.
    pub fn update_snapshot(&mut self, snapshot: &FleetSnapshot, rng: &mut StreamRng, cfg: &ChannelConfig) {
        let present: Vec<VehicleIdx> = snapshot.positions.iter().map(|&(v, _)| v).collect();
        self.entries
            .retain(|&(a, b), _| present.binary_search(&a).is_ok() && present.binary_search(&b).is_ok());
        for (n, &(i, pi)) in snapshot.positions.iter().enumerate() {
            for &(j, pj) in &snapshot.positions[n + 1..] {
                self.update(i, j, pi, pj, rng, cfg);
            }
        }
    }
}

/// `G_t G_r / (X_ij PL_ij)` in linear units.
pub fn link_gain_linear(distance_m: f64, shadow_db: f64, cfg: &ChannelConfig) -> Result<f64, NonPositiveDistance> {
    let pl = pathloss_db(distance_m, cfg)?;
    Ok(db_to_linear(2.0 * cfg.antenna_gain_db - shadow_db - pl))
}

/// Symmetric per-window gain and distance tables over the vehicles of one
/// snapshot, addressed by position in `snapshot.positions`.
#[derive(Debug, Clone)]
pub struct LinkTable {
    n: usize,
    gains: Vec<f64>,
    distances: Vec<f64>,
}

impl LinkTable {
    pub fn build(snapshot: &FleetSnapshot, field: &ShadowField, cfg: &ChannelConfig) -> Self {
        let n = snapshot.len();
        let mut gains = vec![0.0; n * n];
        let mut distances = vec![0.0; n * n];
        for a in 0..n {
            let (va, pa) = snapshot.positions[a];
            for b in a + 1..n {
                let (vb, pb) = snapshot.positions[b];
                let d = pa.distance(&pb);
                let shadow = field.get(va, vb).unwrap_or(0.0);
                // the floor keeps d > 0 so this cannot fail
                let g = link_gain_linear(d, shadow, cfg).unwrap_or(0.0);
                gains[a * n + b] = g;
                gains[b * n + a] = g;
                distances[a * n + b] = d;
                distances[b * n + a] = d;
            }
        }
        Self { n, gains, distances }
    }

    /// Builds a table from explicit values; `gains` and `distances` are
    /// row-major `n x n`.
    pub fn from_parts(n: usize, gains: Vec<f64>, distances: Vec<f64>) -> Self {
        assert_eq!(gains.len(), n * n);
        assert_eq!(distances.len(), n * n);
        Self { n, gains, distances }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn gain(&self, a: usize, b: usize) -> f64 {
        self.gains[a * self.n + b]
    }

    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.distances[a * self.n + b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::WindowIndex;
    use crate::rng::{counter_stream, Purpose};
    use proptest::prelude::*;

    #[test]
    fn free_space_at_100m() {
        // 20 log10(4 pi 100 5.9e9 / 3e8) by hand: 87.86 dB
        let hand = 20.0 * (4.0 * std::f64::consts::PI * 100.0 * 5.9e9 / 3e8).log10();
        assert!((hand - 87.86).abs() < 0.01);
        assert!((free_space_pathloss_db(100.0, 5.9) - hand).abs() < 0.01);
    }

    #[test]
    fn max_rule_picks_larger_model() {
        let cfg = ChannelConfig::default();
        for d in [1.0, 5.0, 15.0, 30.0, 100.0, 400.0] {
            let fs = free_space_pathloss_db(d, cfg.carrier_freq_ghz);
            let b1 = cfg.winner_b1.pathloss_db(d, cfg.carrier_freq_ghz);
            assert_eq!(pathloss_db(d, &cfg).unwrap(), fs.max(b1));
        }
        // short range: free space dominates
        let d = 5.0;
        assert!(free_space_pathloss_db(d, 5.9) > cfg.winner_b1.pathloss_db(d, 5.9));
        assert_eq!(pathloss_db(d, &cfg).unwrap(), free_space_pathloss_db(d, 5.9));
        // long range: B1 dominates
        assert!(cfg.winner_b1.pathloss_db(300.0, 5.9) > free_space_pathloss_db(300.0, 5.9));
    }

    #[test]
    fn distance_floor() {
        let cfg = ChannelConfig::default();
        assert_eq!(pathloss_db(0.0, &cfg).unwrap(), pathloss_db(1.0, &cfg).unwrap());
        assert_eq!(pathloss_db(-4.0, &cfg).unwrap(), pathloss_db(1.0, &cfg).unwrap());
        let no_floor = ChannelConfig { min_distance_m: 0.0, ..ChannelConfig::default() };
        assert!(pathloss_db(0.0, &no_floor).is_err());
    }

    #[test]
    fn ibe_weights() {
        let cfg = ChannelConfig::default();
        assert_eq!(ibe_weight(2, 2, &cfg), 1.0);
        assert_eq!(ibe_weight(1, 2, &cfg), 1e-3);
        assert_eq!(ibe_weight(1, 3, &cfg), 1e-4);
        for f in 1..=3 {
            assert_eq!(ibe_weight(f, f, &cfg), 1.0);
            for p in 1..=3 {
                assert_eq!(ibe_weight(f, p, &cfg), ibe_weight(p, f, &cfg));
            }
        }
    }

    #[test]
    fn config_rejects_short_ibe_vector() {
        let cfg = ChannelConfig::default();
        assert!(cfg.validate(3).is_ok());
        let err = cfg.validate(4).unwrap_err();
        assert_eq!(err.key(), "channel.ibe_vector");
        let bad = ChannelConfig { ibe_vector: vec![0.5, 1e-3], ..ChannelConfig::default() };
        assert!(bad.validate(1).is_err());
    }

    #[test]
    fn gain_arithmetic() {
        let cfg0 = ChannelConfig { antenna_gain_db: 0.0, ..ChannelConfig::default() };
        let pl = pathloss_db(100.0, &cfg0).unwrap();
        let g = link_gain_linear(100.0, 0.0, &cfg0).unwrap();
        assert!((g - 1.0 / db_to_linear(pl)).abs() / g < 1e-12);

        // G_t = G_r = 3 dB against a pathloss pinned to 87.9 dB
        let g = db_to_linear(3.0) * db_to_linear(3.0) / (db_to_linear(0.0) * db_to_linear(87.9));
        assert!((g - 10f64.powf(0.6 - 8.79)).abs() / g < 1e-12);
    }

    #[test]
    fn shadowing_identity_and_decorrelation() {
        let cfg = ChannelConfig::default();
        let mut rng = counter_stream(1, Purpose::Shadowing, 0);
        let mut field = ShadowField::new();
        let p = Position::new(0.0, 0.0);
        let q = Position::new(50.0, 0.0);
        let first = field.update(0, 1, p, q, &mut rng, &cfg);
        let same = field.update(1, 0, p, q, &mut rng, &cfg);
        assert_eq!(first, same, "zero displacement keeps the value");
        assert_eq!(field.get(0, 1), field.get(1, 0));

        // a huge jump behaves like a fresh draw: rho underflows to 0
        let far = Position::new(1e6, 0.0);
        let mut replay = rng.clone();
        let jumped = field.update(0, 1, far, far, &mut rng, &cfg);
        let z: f64 = StandardNormal.sample(&mut replay);
        assert_eq!(jumped, cfg.shadow_sigma_db * z);
    }

    #[test]
    fn shadow_std_converges() {
        let cfg = ChannelConfig::default();
        let mut rng = counter_stream(42, Purpose::Shadowing, 0);
        let mut field = ShadowField::new();
        let mut values = Vec::new();
        for step in 0..40_000 {
            let x = step as f64 * 5.0;
            values.push(field.update(0, 1, Position::new(x, 0.0), Position::new(x, 10.0), &mut rng, &cfg));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        assert!((var.sqrt() - 7.0).abs() < 0.5, "std {}", var.sqrt());
    }

    #[test]
    fn link_table_is_symmetric() {
        let cfg = ChannelConfig::default();
        let snap = FleetSnapshot {
            window: WindowIndex(0),
            time: 0.0,
            positions: vec![(0, Position::new(0.0, 0.0)), (3, Position::new(40.0, 3.0)), (7, Position::new(-90.0, 0.0))],
        };
        let mut field = ShadowField::new();
        field.update_snapshot(&snap, &mut counter_stream(1, Purpose::Shadowing, 0), &cfg);
        assert_eq!(field.len(), 3);
        let t = LinkTable::build(&snap, &field, &cfg);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(t.gain(a, b), t.gain(b, a));
            }
        }
        let g01 = link_gain_linear(snap.positions[0].1.distance(&snap.positions[1].1), field.get(0, 3).unwrap(), &cfg).unwrap();
        assert_eq!(t.gain(0, 1), g01);
        // vehicle 7 leaves
        let snap2 = FleetSnapshot { positions: snap.positions[..2].to_vec(), ..snap };
        field.update_snapshot(&snap2, &mut counter_stream(1, Purpose::Shadowing, 1), &cfg);
        assert_eq!(field.len(), 1);
    }

    proptest! {
        #[test]
        fn pathloss_monotone(d in 0.01f64..5000.0, scale in 1.0f64..4.0) {
            let cfg = ChannelConfig::default();
            prop_assert!(pathloss_db(d * scale, &cfg).unwrap() >= pathloss_db(d, &cfg).unwrap());
            prop_assert!(pathloss_db(2.0 * d, &cfg).unwrap() >= pathloss_db(d, &cfg).unwrap());
            prop_assert!(link_gain_linear(2.0 * d, 0.0, &cfg).unwrap() <= link_gain_linear(d, 0.0, &cfg).unwrap());
        }
    }
}
