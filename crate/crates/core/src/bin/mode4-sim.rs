use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mode4_sim::config::{load_config, RunConfig};
use mode4_sim::report::{run_points, run_sweep, write_reports, SweepOutcome};
use mode4_sim::rng::{counter_stream, Purpose};
use mode4_sim::trace::{generate_synthetic, SyntheticParams};
use mode4_sim::SimError;

#[derive(Parser)]
#[command(name = "mode4-sim", version, about = "Sidelink SPS scheduling simulator with blind replicas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Single run at the configured K and F.
    Run(Common),
    /// Every (K, F) pair of the sweep axes.
    Sweep(Common),
    /// Synthetic trace CSV to `--out` or stdout.
    GenTrace {
        /// Optional config; its `[trace.synthetic]` section and seed are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Parse and validate a config without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn load(common: &Common) -> Result<RunConfig, SimError> {
    let mut cfg = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn simulate(common: &Common, sweep: bool) -> Result<bool, SimError> {
    let cfg = load(common)?;
    let trace = cfg.load_trace(&config_dir(&common.config))?;
    let outcome: SweepOutcome = if sweep {
        run_sweep(&cfg, &trace)
    } else {
        run_points(&cfg, &trace, &[(cfg.scheduler.selectivity_k, cfg.grid.num_sub_bands)])
    };
    let dir = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let written = write_reports(&outcome, &dir)?;
    for r in &outcome.runs {
        if let Err(e) = &r.result {
            eprintln!("K={} F={}: {e}", r.selectivity_k, r.num_sub_bands);
        }
    }
    if !common.quiet {
        for r in &outcome.runs {
            if let Ok(res) = &r.result {
                let last = res.prr.last().copied();
                println!(
                    "K={} F={}: {} windows, {:.1} vehicles, prr_service@{}m={}",
                    r.selectivity_k,
                    r.num_sub_bands,
                    res.meta.windows_simulated,
                    res.meta.mean_fleet_size,
                    last.map(|b| b.d_x).unwrap_or_default(),
                    last.and_then(|b| b.prr_service).map(|p| format!("{p:.4}")).unwrap_or_else(|| "n/a".into()),
                );
            }
        }
        println!("wrote {} files to {}", written.len(), dir.display());
    }
    Ok(!outcome.has_errors())
}

fn gen_trace(config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<(), SimError> {
    let (params, master) = match config {
        Some(path) => {
            let cfg = load_config(path)?;
            (cfg.trace.synthetic.clone().unwrap_or_default(), cfg.seed)
        }
        None => (SyntheticParams::default(), 1),
    };
    let seed = seed.unwrap_or(master);
    let trace = generate_synthetic(&params, &mut counter_stream(seed, Purpose::Mobility, 0))?;
    let csv = trace.to_csv();
    match out {
        Some(path) => std::fs::write(path, csv).map_err(|source| SimError::Io { path: path.to_path_buf(), source }),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|source| SimError::Io { path: PathBuf::from("<stdout>"), source }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => simulate(c, false),
        Command::Sweep(c) => simulate(c, true),
        Command::GenTrace { config, seed, out, quiet } => gen_trace(config.as_deref(), *seed, out.as_deref()).map(|()| {
            if !quiet {
                if let Some(p) = out {
                    eprintln!("wrote {}", p.display());
                }
            }
            true
        }),
        Command::Validate { config, quiet } => load_config(config).map(|_| {
            if !quiet {
                println!("{}: ok", config.display());
            }
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
