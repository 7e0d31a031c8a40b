//! Sweeps over `(K, F)` and their CSV/JSON reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::engine::{run_paired, RunMetadata, SimConfig, SimulationResult};
use crate::error::SimError;
use crate::trace::MobilityTrace;

/// One sweep point and what became of it.
#[derive(Debug)]
pub struct SweepRun {
    pub selectivity_k: usize,
    pub num_sub_bands: usize,
    pub result: Result<SimulationResult, SimError>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub seed: u64,
    pub config_digest: String,
    pub runs: Vec<SweepRun>,
}

impl SweepOutcome {
    pub fn has_errors(&self) -> bool {
        self.runs.iter().any(|r| r.result.is_err())
    }

    pub fn get(&self, k: usize, f: usize) -> Option<&SimulationResult> {
        self.runs
            .iter()
            .find(|r| r.selectivity_k == k && r.num_sub_bands == f)
            .and_then(|r| r.result.as_ref().ok())
    }
}

pub fn config_digest(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

/// Runs the given points on the master seed over one shared channel
/// realization. A point that fails validation is reported without stopping
/// the others.
pub fn run_points(cfg: &RunConfig, trace: &MobilityTrace, points: &[(usize, usize)]) -> SweepOutcome {
    let sims: Vec<SimConfig> = points.iter().map(|&(k, f)| cfg.sim_for(k, f)).collect();
    let mut results: Vec<Option<Result<SimulationResult, SimError>>> =
        sims.iter().map(|s| s.validate().err().map(|e| Err(e.into()))).collect();
    let valid: Vec<usize> = (0..sims.len()).filter(|&i| results[i].is_none()).collect();
    let batch: Vec<SimConfig> = valid.iter().map(|&i| sims[i].clone()).collect();
    match run_paired(&batch, trace, cfg.seed) {
        Ok(done) => {
            for (i, res) in valid.iter().zip(done) {
                results[*i] = Some(Ok(res));
            }
        }
        Err(e) => {
            let message = e.to_string();
            for &i in &valid {
                results[i] = Some(Err(SimError::Run(message.clone())));
            }
        }
    }
    let runs = points
        .iter()
        .zip(results)
        .map(|(&(k, f), result)| SweepRun {
            selectivity_k: k,
            num_sub_bands: f,
            result: result.expect("every point resolved"),
        })
        .collect();
    SweepOutcome { seed: cfg.seed, config_digest: config_digest(cfg), runs }
}

/// Cartesian product of the sweep axes, `K` outer.
pub fn sweep_points(cfg: &RunConfig) -> Vec<(usize, usize)> {
    let fs = cfg.f_values();
    cfg.k_values().into_iter().flat_map(|k| fs.iter().map(move |&f| (k, f))).collect()
}

pub fn run_sweep(cfg: &RunConfig, trace: &MobilityTrace) -> SweepOutcome {
    run_points(cfg, trace, &sweep_points(cfg))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn prr_csv(r: &SimulationResult) -> String {
    let mut out = String::from("d_x,prr_raw,prr_service,loss_cci,loss_prop,loss_hd,attempts\n");
    for ((p, l), c) in r.prr.iter().zip(&r.losses).zip(r.counters.counters()) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.d_x,
            opt(p.prr_raw),
            opt(p.prr_service),
            opt(l.map(|l| l.interference)),
            opt(l.map(|l| l.propagation)),
            opt(l.map(|l| l.half_duplex)),
            c.raw_attempts
        );
    }
    out
}

pub fn losses_csv(r: &SimulationResult) -> String {
    let mut out = String::from(
        "d_x,copies,copies_decoded,copies_cci,copies_prop,copies_hd,messages,messages_decoded,messages_cci,messages_prop,messages_hd\n",
    );
    for (d, c) in r.counters.bins().iter().zip(r.counters.counters()) {
        let _ = writeln!(
            out,
            "{d},{},{},{},{},{},{},{},{},{},{}",
            c.raw_attempts,
            c.raw_successes,
            c.raw_losses[0],
            c.raw_losses[1],
            c.raw_losses[2],
            c.service_messages,
            c.service_successes,
            c.service_losses[0],
            c.service_losses[1],
            c.service_losses[2]
        );
    }
    out
}

pub fn cdf_csv(r: &SimulationResult) -> String {
    let mut out = String::from("power_mw,probability\n");
    for (x, p) in r.power_cdf.power_cdf() {
        let _ = writeln!(out, "{x},{p}");
    }
    out
}

/// Wide table with one `prr_service` and one `prr_raw` column per successful
/// run, rows keyed by `d_x`.
pub fn comparison_csv(outcome: &SweepOutcome) -> String {
    let ok: Vec<&SweepRun> = outcome.runs.iter().filter(|r| r.result.is_ok()).collect();
    let mut out = String::from("d_x");
    for kind in ["prr_service", "prr_raw"] {
        for r in &ok {
            let _ = write!(out, ",{kind}_K{}_F{}", r.selectivity_k, r.num_sub_bands);
        }
    }
    out.push('\n');
    let Some(first) = ok.first().and_then(|r| r.result.as_ref().ok()) else {
        return out;
    };
    for (b, bin) in first.prr.iter().enumerate() {
        let _ = write!(out, "{}", bin.d_x);
        for service in [true, false] {
            for r in &ok {
                let p = r.result.as_ref().unwrap().prr[b];
                let _ = write!(out, ",{}", opt(if service { p.prr_service } else { p.prr_raw }));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct RunEntry<'a> {
    selectivity_k: usize,
    num_sub_bands: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    files: Option<[String; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metadata: Option<&'a RunMetadata>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    config_digest: &'a str,
    runs: Vec<RunEntry<'a>>,
    comparison: &'a str,
}

fn file_names(k: usize, f: usize) -> [String; 3] {
    [format!("prr_{k}_{f}.csv"), format!("cdf_{k}_{f}.csv"), format!("losses_{k}_{f}.csv")]
}

pub fn summary_json(outcome: &SweepOutcome) -> String {
    let runs = outcome
        .runs
        .iter()
        .map(|r| RunEntry {
            selectivity_k: r.selectivity_k,
            num_sub_bands: r.num_sub_bands,
            files: r.result.is_ok().then(|| file_names(r.selectivity_k, r.num_sub_bands)),
            metadata: r.result.as_ref().ok().map(|res| &res.meta),
            error: r.result.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    let summary =
        Summary { seed: outcome.seed, config_digest: &outcome.config_digest, runs, comparison: "comparison.csv" };
    let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes per-run reports, `comparison.csv` and `summary.json` into `dir`.
/// Returns the paths written, in a fixed order.
pub fn write_reports(outcome: &SweepOutcome, dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SimError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<(), SimError> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
        Ok(())
    };
    for r in &outcome.runs {
        if let Ok(res) = &r.result {
            let [prr, cdf, losses] = file_names(r.selectivity_k, r.num_sub_bands);
            put(&prr, prr_csv(res))?;
            put(&cdf, cdf_csv(res))?;
            put(&losses, losses_csv(res))?;
        }
    }
    put("comparison.csv", comparison_csv(outcome))?;
    put("summary.json", summary_json(outcome))?;
    Ok(written)
}
