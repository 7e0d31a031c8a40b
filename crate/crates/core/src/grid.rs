//! Time-frequency resource grid.
//!
//! Every sub-band is split into `S` one-millisecond subframes that repeat with
//! the CAM period `T_w`. A subchannel is addressed by `(sub_band, subframe)`,
//! both 1-indexed at every public interface.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Duration of one subframe in milliseconds.
pub const SUBFRAME_MS: u64 = 1;

/// Coordinate of one subchannel on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubchannelId {
    pub sub_band: u16,
    pub subframe: u16,
}

impl SubchannelId {
    pub fn new(sub_band: u16, subframe: u16, cfg: &GridConfig) -> Result<Self, GridError> {
        if sub_band == 0 || sub_band as usize > cfg.num_sub_bands {
            return Err(GridError::SubBandOutOfRange { sub_band, num_sub_bands: cfg.num_sub_bands });
        }
        cfg.check_subframe(subframe)?;
        Ok(Self { sub_band, subframe })
    }

    /// Primary sub-band subchannel at subframe `k`.
    pub fn primary(subframe: u16) -> Self {
        Self { sub_band: 1, subframe }
    }

    pub fn is_primary(&self) -> bool {
        self.sub_band == 1
    }
}

impl std::fmt::Display for SubchannelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "s({},{})", self.sub_band, self.subframe)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("subframe {subframe} outside 1..={subchannels_per_band}")]
    SubframeOutOfRange { subframe: u16, subchannels_per_band: usize },
    #[error("sub-band {sub_band} outside 1..={num_sub_bands}")]
    SubBandOutOfRange { sub_band: u16, num_sub_bands: usize },
    #[error("negative time {0} ms")]
    NegativeTime(i64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Number of sub-bands `F`; sub-band 1 is primary, the rest auxiliary.
    pub num_sub_bands: usize,
    /// Subchannels per sub-band, one per subframe of the window.
    pub subchannels_per_band: usize,
    pub window_ms: u64,
    pub cam_rate_hz: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { num_sub_bands: 1, subchannels_per_band: 100, window_ms: 100, cam_rate_hz: 10 }
    }
}

impl GridConfig {
    pub fn with_sub_bands(mut self, num_sub_bands: usize) -> Self {
        self.num_sub_bands = num_sub_bands;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_sub_bands == 0 {
            return Err(ConfigError::invalid("grid.num_sub_bands", "must be at least 1"));
        }
        if self.cam_rate_hz == 0 || 1000 % self.cam_rate_hz as u64 != 0 {
            return Err(ConfigError::invalid("grid.cam_rate_hz", "must divide 1000 ms evenly"));
        }
        if self.window_ms != 1000 / self.cam_rate_hz as u64 {
            return Err(ConfigError::invalid(
                "grid.window_ms",
                format!("must equal 1000 / cam_rate_hz = {}", 1000 / self.cam_rate_hz),
            ));
        }
        if self.subchannels_per_band as u64 * SUBFRAME_MS != self.window_ms {
            return Err(ConfigError::invalid(
                "grid.subchannels_per_band",
                format!("must fill the {} ms window with 1 ms subframes", self.window_ms),
            ));
        }
        if self.subchannels_per_band > u16::MAX as usize || self.num_sub_bands > u16::MAX as usize {
            return Err(ConfigError::invalid("grid", "grid dimensions exceed 65535"));
        }
        Ok(())
    }

    pub fn window_seconds(&self) -> f64 {
        self.window_ms as f64 / 1000.0
    }

    pub fn check_subframe(&self, subframe: u16) -> Result<(), GridError> {
        if subframe == 0 || subframe as usize > self.subchannels_per_band {
            return Err(GridError::SubframeOutOfRange {
                subframe,
                subchannels_per_band: self.subchannels_per_band,
            });
        }
        Ok(())
    }
}

/// Window counter since simulation start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct WindowIndex(pub u64);

impl WindowIndex {
    pub fn next(self) -> Self {
        WindowIndex(self.0 + 1)
    }

    pub fn start_ms(self, cfg: &GridConfig) -> u64 {
        self.0 * cfg.window_ms
    }
}

/// Maps an absolute time in milliseconds onto `(window, subframe)`.
pub fn subframe_of_time(t_ms: i64, cfg: &GridConfig) -> Result<(WindowIndex, u16), GridError> {
    if t_ms < 0 {
        return Err(GridError::NegativeTime(t_ms));
    }
    let t = t_ms as u64;
    let n = t / cfg.window_ms;
    let k = (t % cfg.window_ms) / SUBFRAME_MS + 1;
    Ok((WindowIndex(n), k as u16))
}

/// All subchannels sharing subframe `k`, one per sub-band.
pub fn same_subframe_set(subframe: u16, cfg: &GridConfig) -> Result<Vec<SubchannelId>, GridError> {
    cfg.check_subframe(subframe)?;
    Ok((1..=cfg.num_sub_bands as u16).map(|f| SubchannelId { sub_band: f, subframe }).collect())
}
