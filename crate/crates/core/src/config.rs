//! Run configuration files.
//!
//! TOML with one section per module. Every section except `[scheduler]` may
//! be omitted; `scheduler.selectivity_k` has no default. Unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::engine::SimConfig;
use crate::error::{ConfigError, SimError, TraceError};
use crate::grid::GridConfig;
use crate::metrics::MetricsConfig;
use crate::reception::DecodeThresholds;
use crate::rng::{counter_stream, Purpose};
use crate::sps::SchedulerConfig;
use crate::trace::{generate_synthetic, load_fcd, load_trace, MobilityTrace, SyntheticParams};

fn default_seed() -> u64 {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_windows: Option<u64>,
}

/// Mobility source: a trace file (CSV, or SUMO FCD when the extension is
/// `.xml`) or synthetic road parameters. Neither given means synthetic
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticParams>,
}

/// Sweep axes. Empty lists fall back to the single values in `[scheduler]`
/// and `[grid]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub k_values: Vec<usize>,
    pub f_values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub reception: DecodeThresholds,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// Turns serde's "missing field `x`" into a key path.
fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

fn join_path(prefix: &str, field: &str) -> String {
    if prefix.is_empty() || prefix == "." {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = toml::Deserializer::new(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.message().to_string();
        match missing_field(&message) {
            Some("scheduler") if path == "." || path.is_empty() => {
                ConfigError::Missing { key: "scheduler.selectivity_k".into() }
            }
            Some(field) => ConfigError::Missing { key: join_path(&path, field) },
            None => ConfigError::Parse { key: if path.is_empty() { ".".into() } else { path }, message },
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
    Ok(parse_config(&text)?)
}

impl RunConfig {
    /// Minimal config with all defaults and the given `K`.
    pub fn with_k(selectivity_k: usize) -> Self {
        Self {
            seed: default_seed(),
            output_dir: default_output_dir(),
            grid: GridConfig::default(),
            channel: ChannelConfig::default(),
            scheduler: SchedulerConfig::new(selectivity_k),
            reception: DecodeThresholds::default(),
            metrics: MetricsConfig::default(),
            engine: EngineSection::default(),
            trace: TraceSection::default(),
            sweep: SweepSection::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to toml")
    }

    pub fn k_values(&self) -> Vec<usize> {
        if self.sweep.k_values.is_empty() {
            vec![self.scheduler.selectivity_k]
        } else {
            self.sweep.k_values.clone()
        }
    }

    pub fn f_values(&self) -> Vec<usize> {
        if self.sweep.f_values.is_empty() {
            vec![self.grid.num_sub_bands]
        } else {
            self.sweep.f_values.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim().validate()?;
        for &f in &self.sweep.f_values {
            let grid = self.grid.clone().with_sub_bands(f);
            grid.validate().map_err(|e| retag(e, "sweep.f_values"))?;
            self.channel.validate(f).map_err(|e| retag(e, "sweep.f_values"))?;
        }
        for &k in &self.sweep.k_values {
            let sched = SchedulerConfig { selectivity_k: k, ..self.scheduler.clone() };
            sched.validate(&self.grid).map_err(|e| retag(e, "sweep.k_values"))?;
        }
        if self.trace.file.is_some() && self.trace.synthetic.is_some() {
            return Err(ConfigError::invalid("trace", "give either `file` or `[trace.synthetic]`, not both"));
        }
        if let Some(p) = &self.trace.synthetic {
            p.validate().map_err(|e| ConfigError::invalid("trace.synthetic", e.to_string()))?;
        }
        Ok(())
    }

    /// Engine config for the base `K` and `F`.
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            grid: self.grid.clone(),
            channel: self.channel.clone(),
            scheduler: self.scheduler.clone(),
            reception: self.reception.clone(),
            metrics: self.metrics.clone(),
            warmup_windows: self.engine.warmup_windows,
        }
    }

    /// Engine config for one sweep point.
    pub fn sim_for(&self, selectivity_k: usize, num_sub_bands: usize) -> SimConfig {
        let mut sim = self.sim();
        sim.scheduler.selectivity_k = selectivity_k;
        sim.grid = sim.grid.with_sub_bands(num_sub_bands);
        sim
    }

    /// Loads or generates the mobility trace. Relative file paths resolve
    /// against `base_dir`.
    pub fn load_trace(&self, base_dir: &Path) -> Result<MobilityTrace, SimError> {
        match &self.trace.file {
            Some(file) => {
                let path = if file.is_absolute() { file.clone() } else { base_dir.join(file) };
                let io_err = |source| SimError::Io { path: path.clone(), source };
                let is_xml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml"));
                if is_xml {
                    let text = std::fs::read_to_string(&path).map_err(io_err)?;
                    Ok(load_fcd(&text)?)
                } else {
                    let f = std::fs::File::open(&path).map_err(io_err)?;
                    Ok(load_trace(std::io::BufReader::new(f))?)
                }
            }
            None => Ok(self.synthetic_trace()?),
        }
    }

    pub fn synthetic_trace(&self) -> Result<MobilityTrace, TraceError> {
        let params = self.trace.synthetic.clone().unwrap_or_default();
        generate_synthetic(&params, &mut counter_stream(self.seed, Purpose::Mobility, 0))
    }
}

fn retag(e: ConfigError, key: &str) -> ConfigError {
    ConfigError::invalid(key, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::BinMode;
    use crate::sps::AuxPolicy;

    #[test]
    fn empty_config_requires_k() {
        let err = parse_config("").unwrap_err();
        assert_eq!(err, ConfigError::Missing { key: "scheduler.selectivity_k".into() });
        let err = parse_config("[scheduler]\naux_policy = \"per_period\"\n").unwrap_err();
        assert_eq!(err.key(), "scheduler.selectivity_k");
    }

    #[test]
    fn defaults_match_reference_parameters() {
        let cfg = parse_config("[scheduler]\nselectivity_k = 30\n").unwrap();
        assert_eq!(cfg.grid.subchannels_per_band, 100);
        assert_eq!(cfg.grid.window_ms, 100);
        assert_eq!(cfg.grid.num_sub_bands, 1);
        assert_eq!(cfg.channel.tx_power_dbm, 23.0);
        assert_eq!(cfg.channel.antenna_gain_db, 3.0);
        assert_eq!(cfg.channel.shadow_sigma_db, 7.0);
        assert_eq!(cfg.channel.shadow_corr_dist_m, 10.0);
        assert_eq!(cfg.channel.sensitivity_dbm, -103.4);
        assert_eq!(cfg.channel.ibe_vector, vec![1.0, 1e-3, 1e-4]);
        assert!((cfg.reception.gamma_t_db() - 2.75).abs() < 0.01);
        assert_eq!(cfg.metrics.bins_m, vec![50.0, 100.0, 150.0, 200.0, 250.0, 300.0]);
        assert_eq!(cfg.scheduler.duration_windows(&cfg.grid), (5..=15).collect::<Vec<_>>());
    }

    #[test]
    fn k_above_grid_is_rejected() {
        let err = parse_config("[scheduler]\nselectivity_k = 150\n").unwrap_err();
        assert_eq!(err.key(), "scheduler.selectivity_k");
        let err = parse_config("[scheduler]\nselectivity_k = 10\n[sweep]\nk_values = [1, 150]\n").unwrap_err();
        assert_eq!(err.key(), "sweep.k_values");
    }

    #[test]
    fn f_beyond_ibe_vector_is_rejected() {
        let err = parse_config("[grid]\nnum_sub_bands = 4\n[scheduler]\nselectivity_k = 10\n").unwrap_err();
        assert_eq!(err.key(), "channel.ibe_vector");
        let err = parse_config("[scheduler]\nselectivity_k = 10\n[sweep]\nf_values = [1, 4]\n").unwrap_err();
        assert_eq!(err.key(), "sweep.f_values");
        let ok = "[channel]\nibe_vector = [1.0, 0.001, 0.0001, 0.00001]\n[grid]\nnum_sub_bands = 4\n[scheduler]\nselectivity_k = 10\n";
        assert!(parse_config(ok).is_ok());
    }

    #[test]
    fn unknown_and_mistyped_keys_name_their_path() {
        let err = parse_config("[scheduler]\nselectivity_k = 10\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
        assert!(err.key().starts_with("scheduler"), "{err}");
        let err = parse_config("[scheduler]\nselectivity_k = 10\n[channel]\ntx_power_dbm = \"loud\"\n").unwrap_err();
        assert_eq!(err.key(), "channel.tx_power_dbm");
        let err = parse_config("[scheduler]\nselectivity_k = 10\n[channel.winner_b1]\nnope = 2\n").unwrap_err();
        assert!(err.key().starts_with("channel.winner_b1"), "{err}");
    }

    #[test]
    fn trace_source_is_exclusive() {
        let text = "[scheduler]\nselectivity_k = 10\n[trace]\nfile = \"a.csv\"\n[trace.synthetic]\nnum_vehicles = 3\n";
        assert_eq!(parse_config(text).unwrap_err().key(), "trace");
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::with_k(30);
        cfg.seed = 77;
        cfg.scheduler.aux_policy = AuxPolicy::PerPeriod;
        cfg.metrics.bin_mode = BinMode::Annulus;
        cfg.engine.warmup_windows = Some(3);
        cfg.trace.synthetic = Some(SyntheticParams { num_vehicles: 20, ..Default::default() });
        cfg.sweep = SweepSection { k_values: vec![1, 30, 100], f_values: vec![1, 2, 3] };
        let text = cfg.to_toml();
        assert_eq!(parse_config(&text).unwrap(), cfg);

        let plain = RunConfig::with_k(5);
        assert_eq!(parse_config(&plain.to_toml()).unwrap(), plain);
    }

    #[test]
    fn synthetic_trace_follows_seed() {
        let mut cfg = RunConfig::with_k(5);
        cfg.trace.synthetic = Some(SyntheticParams { num_vehicles: 5, duration_s: 3.0, ..Default::default() });
        let a = cfg.synthetic_trace().unwrap();
        assert_eq!(a, cfg.synthetic_trace().unwrap());
        cfg.seed = 2;
        assert_ne!(a, cfg.synthetic_trace().unwrap());
    }
}
