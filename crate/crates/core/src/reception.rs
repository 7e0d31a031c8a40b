//! Per-link decode decisions.
//!
//! Every transmitted copy is evaluated at every receiver inside the awareness
//! limit. A copy is lost to half-duplex if the receiver transmits anywhere in
//! the same subframe, to propagation if the received power is below the
//! per-subchannel sensitivity, and to interference if its SINR does not
//! exceed `gamma_T`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ibe_weight, linear_to_db, ChannelConfig, LinkTable};
use crate::error::ConfigError;
use crate::grid::{SubchannelId, WindowIndex};
use crate::plan::{Occupant, WindowPlan};
use crate::trace::VehicleIdx;

/// SINR threshold `10 log10(2^(rho / lambda) - 1)` in dB.
pub fn gamma_t(rho: f64, lambda: f64) -> f64 {
    10.0 * (2f64.powf(rho / lambda) - 1.0).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeThresholds {
    /// Effective coded throughput in bps/Hz.
    pub rho_bps_hz: f64,
    /// Throughput loss coefficient.
    pub lambda: f64,
}

impl Default for DecodeThresholds {
    fn default() -> Self {
        Self { rho_bps_hz: 0.916, lambda: 0.6 }
    }
}

impl DecodeThresholds {
    pub fn gamma_t_db(&self) -> f64 {
        gamma_t(self.rho_bps_hz, self.lambda)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.rho_bps_hz.is_finite() && self.rho_bps_hz > 0.0) {
            return Err(ConfigError::invalid("reception.rho_bps_hz", "must be > 0"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ConfigError::invalid("reception.lambda", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Decoded,
    LostHalfDuplex,
    LostPropagation,
    LostInterference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceptionRecord {
    pub tx: VehicleIdx,
    pub rx: VehicleIdx,
    pub subchannel: SubchannelId,
    pub window: WindowIndex,
    pub distance_m: f64,
    pub rx_power_dbm: f64,
    /// Absent when the receiver was transmitting in the same subframe.
    pub sinr_db: Option<f64>,
    pub outcome: Outcome,
}

/// Linear SINR of `tx`'s copy on `(f, k)` at `rx`. `concurrent` lists every
/// transmission of subframe `k`; entries of `rx` and `tx` are skipped.
pub fn sinr(
    rx: usize,
    tx: usize,
    sub_band: u16,
    concurrent: &[Occupant],
    links: &LinkTable,
    cfg: &ChannelConfig,
) -> f64 {
    sinr_with(rx, tx, sub_band, concurrent, links, cfg, cfg.tx_power_mw(), cfg.noise_mw())
}

#[allow(clippy::too_many_arguments)]
fn sinr_with(
    rx: usize,
    tx: usize,
    sub_band: u16,
    concurrent: &[Occupant],
    links: &LinkTable,
    cfg: &ChannelConfig,
    p_tx: f64,
    noise: f64,
) -> f64 {
    let interference: f64 = concurrent
        .iter()
        .filter(|&&(l, _)| l != rx && l != tx)
        .map(|&(l, p)| ibe_weight(sub_band, p, cfg) * p_tx * links.gain(rx, l))
        .sum();
    p_tx * links.gain(rx, tx) / (interference + noise)
}

/// Outcome precedence: half-duplex, propagation, interference.
pub fn classify_outcome(
    rx_transmitting: bool,
    rx_power_dbm: f64,
    sinr_db: Option<f64>,
    sensitivity_dbm: f64,
    thresholds: &DecodeThresholds,
) -> Outcome {
    classify(rx_transmitting, rx_power_dbm, sinr_db, sensitivity_dbm, thresholds.gamma_t_db())
}

fn classify(rx_transmitting: bool, rx_power_dbm: f64, sinr_db: Option<f64>, sensitivity_dbm: f64, gamma_t_db: f64) -> Outcome {
    if rx_transmitting {
        return Outcome::LostHalfDuplex;
    }
    if rx_power_dbm < sensitivity_dbm {
        return Outcome::LostPropagation;
    }
    match sinr_db {
        Some(s) if s > gamma_t_db => Outcome::Decoded,
        _ => Outcome::LostInterference,
    }
}

/// One record per (transmitted copy, receiver within `awareness_limit_m`),
/// ordered by transmitter, receiver, then sub-band.
pub fn evaluate_window(
    plan: &WindowPlan,
    links: &LinkTable,
    cfg: &ChannelConfig,
    thresholds: &DecodeThresholds,
    awareness_limit_m: f64,
) -> Vec<ReceptionRecord> {
    let p_tx = cfg.tx_power_mw();
    let noise = cfg.noise_mw();
    let gamma_db = thresholds.gamma_t_db();
    let per_tx: Vec<Vec<ReceptionRecord>> = (0..plan.len())
        .into_par_iter()
        .map(|tx| {
            let mut out = Vec::new();
            for rx in (0..plan.len()).filter(|&rx| rx != tx) {
                let distance_m = links.distance(rx, tx);
                if distance_m > awareness_limit_m {
                    continue;
                }
                let rx_power_dbm = linear_to_db(p_tx * links.gain(rx, tx));
                for &sc in plan.subchannels(tx) {
                    let busy = plan.transmits_in(rx, sc.subframe);
                    let sinr_db = (!busy).then(|| {
                        let concurrent = plan.concurrent(sc.subframe);
                        linear_to_db(sinr_with(rx, tx, sc.sub_band, concurrent, links, cfg, p_tx, noise))
                    });
                    let outcome = classify(busy, rx_power_dbm, sinr_db, cfg.sensitivity_dbm, gamma_db);
                    out.push(ReceptionRecord {
                        tx: plan.vehicle(tx),
                        rx: plan.vehicle(rx),
                        subchannel: sc,
                        window: plan.window,
                        distance_m,
                        rx_power_dbm,
                        sinr_db,
                        outcome,
                    });
                }
            }
            out
        })
        .collect();
    per_tx.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::db_to_linear;
    use crate::grid::GridConfig;

    fn cfg() -> ChannelConfig {
        ChannelConfig::default()
    }

    #[test]
    fn gamma_t_values() {
        assert!((gamma_t(0.916, 0.6) - 2.75).abs() < 0.01);
        assert_eq!(gamma_t(0.6, 0.6), 0.0);
        assert!((gamma_t(1.2, 0.6) - 4.771_212_547).abs() < 1e-6);
        let t = DecodeThresholds { rho_bps_hz: 1.2, lambda: 0.6 };
        assert!((t.gamma_t_db() - 10.0 * 3f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn sinr_without_interferers() {
        let c = cfg();
        let links = LinkTable::from_parts(2, vec![0.0, 2e-12, 2e-12, 0.0], vec![0.0; 4]);
        let s = sinr(0, 1, 1, &[(1, 1)], &links, &c);
        assert!((s - c.tx_power_mw() * 2e-12 / c.noise_mw()).abs() / s < 1e-12);
    }

    #[test]
    fn sinr_equal_cochannel_interferer() {
        let c = cfg();
        let g = 1e-9;
        let links = LinkTable::from_parts(3, vec![0.0, g, g, g, 0.0, g, g, g, 0.0], vec![0.0; 9]);
        let s = sinr(0, 1, 1, &[(1, 1), (2, 1)], &links, &c);
        let p = c.tx_power_mw();
        assert_eq!(s, p * g / (p * g + c.noise_mw()));
        assert!(s < 1.0);
        // same interferer on the adjacent band leaks with weight 1e-3
        let s = sinr(0, 1, 1, &[(1, 1), (2, 2)], &links, &c);
        assert_eq!(s, p * g / (1e-3 * p * g + c.noise_mw()));
    }

    #[test]
    fn classification_edges() {
        let t = DecodeThresholds::default();
        let sens = -103.4;
        assert_eq!(classify_outcome(true, -50.0, None, sens, &t), Outcome::LostHalfDuplex);
        assert_eq!(classify_outcome(false, sens - 0.1, Some(40.0), sens, &t), Outcome::LostPropagation);
        let g = t.gamma_t_db();
        assert_eq!(classify_outcome(false, -90.0, Some(g + 0.1), sens, &t), Outcome::Decoded);
        assert_eq!(classify_outcome(false, -90.0, Some(g), sens, &t), Outcome::LostInterference);
        assert_eq!(classify_outcome(false, -90.0, Some(g - 0.1), sens, &t), Outcome::LostInterference);
    }

    fn two_static(distance: f64, subframes: (u16, u16)) -> (WindowPlan, LinkTable) {
        let grid = GridConfig::default();
        let plan = WindowPlan::new(
            WindowIndex(0),
            &grid,
            vec![(0, vec![SubchannelId::primary(subframes.0)]), (1, vec![SubchannelId::primary(subframes.1)])],
        );
        let g = crate::channel::link_gain_linear(distance, 0.0, &cfg()).unwrap();
        let links = LinkTable::from_parts(2, vec![0.0, g, g, 0.0], vec![0.0, distance, distance, 0.0]);
        (plan, links)
    }

    #[test]
    fn awareness_filter() {
        let (plan, links) = two_static(400.0, (1, 2));
        assert!(evaluate_window(&plan, &links, &cfg(), &DecodeThresholds::default(), 300.0).is_empty());
    }

    #[test]
    fn two_vehicles_two_records() {
        let (plan, links) = two_static(50.0, (3, 8));
        let recs = evaluate_window(&plan, &links, &cfg(), &DecodeThresholds::default(), 300.0);
        assert_eq!(recs.len(), 2);
        assert_eq!((recs[0].tx, recs[0].rx), (0, 1));
        assert_eq!((recs[1].tx, recs[1].rx), (1, 0));
        assert!(recs.iter().all(|r| r.outcome == Outcome::Decoded));

        let (plan, links) = two_static(50.0, (3, 3));
        let recs = evaluate_window(&plan, &links, &cfg(), &DecodeThresholds::default(), 300.0);
        assert!(recs.iter().all(|r| r.outcome == Outcome::LostHalfDuplex && r.sinr_db.is_none()));
    }

    #[test]
    fn forced_collision_is_interference() {
        // rx 0 sits between two transmitters at equal distance on the same subchannel
        let c = ChannelConfig { noise_power_dbm: -150.0, ..cfg() };
        let grid = GridConfig::default();
        let plan = WindowPlan::new(
            WindowIndex(0),
            &grid,
            vec![
                (0, vec![SubchannelId::primary(50)]),
                (1, vec![SubchannelId::primary(7)]),
                (2, vec![SubchannelId::primary(7)]),
            ],
        );
        let g = 1e-10;
        let d = 100.0;
        let links = LinkTable::from_parts(
            3,
            vec![0.0, g, g, g, 0.0, 1e-13, g, 1e-13, 0.0],
            vec![0.0, d, d, d, 0.0, 2.0 * d, d, 2.0 * d, 0.0],
        );
        let recs = evaluate_window(&plan, &links, &c, &DecodeThresholds::default(), 150.0);
        let at0: Vec<_> = recs.iter().filter(|r| r.rx == 0).collect();
        assert_eq!(at0.len(), 2);
        // hand: S / (I + N) = g / (g + 1e-15 / P) just under 1, i.e. ~0 dB < 2.75 dB
        let p = c.tx_power_mw();
        let hand = linear_to_db(p * g / (p * g + db_to_linear(-150.0)));
        for r in at0 {
            assert_eq!(r.outcome, Outcome::LostInterference);
            assert!((r.sinr_db.unwrap() - hand).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_monotonicity() {
        let (plan, links) = two_static(280.0, (3, 8));
        let t = DecodeThresholds::default();
        let mut decoded_prev = usize::MAX;
        for noise in [-140.0, -120.0, -110.0, -103.4, -95.0, -90.0, -85.0] {
            let c = ChannelConfig { noise_power_dbm: noise, sensitivity_dbm: -130.0, ..cfg() };
            let recs = evaluate_window(&plan, &links, &c, &t, 300.0);
            let decoded = recs.iter().filter(|r| r.outcome == Outcome::Decoded).count();
            assert!(decoded <= decoded_prev);
            assert!(recs.iter().all(|r| matches!(r.outcome, Outcome::Decoded | Outcome::LostInterference)));
            decoded_prev = decoded;
        }
        assert_eq!(decoded_prev, 0);
    }
}
