//! Batch front end: run a scenario, sweep a parameter axis, trace the
//! achievable rate region, or just validate a config file.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uav_icic::report::{
    self, rate_region, region_csv, report_json, run_scenario, sweep, sweep_csv, RunError,
    SweepAxis,
};
use uav_icic::scenario::ScenarioConfig;

#[derive(Parser)]
#[command(name = "uav-icic", version, about = "UAV uplink interference coordination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario config (TOML); defaults cover the full-scale reference setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports and tables.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Comma-separated scheme list (or "all").
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Override the number of channel snapshots.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    parallel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every requested scheme on each snapshot and write report.json.
    Run(CommonArgs),
    /// Re-run the scenario across an axis and write a plot-ready CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Axis: pmax | num-ues | altitude | beamwidth.
        #[arg(long)]
        axis: SweepAxisArg,
        /// Comma-separated, monotone axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Also write the full per-snapshot detail JSON.
        #[arg(long)]
        details: bool,
    },
    /// Trace the UAV/ground achievable-rate region over weight ratios.
    Region {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated positive mu_g/mu_u ratios; the two extremes are
        /// always included.
        #[arg(long, value_delimiter = ',', required = true)]
        ratios: Vec<f64>,
    },
    /// Parse and validate a config file, printing the resolved settings.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy)]
struct SweepAxisArg(SweepAxis);

impl std::str::FromStr for SweepAxisArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(SweepAxisArg)
    }
}

fn load_config(common: &CommonArgs) -> Result<ScenarioConfig, RunError> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::from_toml_file(&path.display().to_string())
            .map_err(|e| RunError::Config(e.to_string()))?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(snapshots) = common.snapshots {
        cfg.snapshots = snapshots;
    }
    if let Some(schemes) = &common.schemes {
        cfg.schemes = schemes.clone();
    }
    cfg.validate().map_err(|e| RunError::Config(e.to_string()))?;
    Ok(cfg)
}

fn init_threads(parallel: usize) {
    if parallel > 0 {
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build_global();
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, RunError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| RunError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| RunError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run(common) => {
            init_threads(common.parallel);
            let cfg = load_config(&common)?;
            let report = run_scenario(&cfg)?;
            let path = write_out(&common.out, "report.json", &report_json(&report))?;
            println!("wrote {}", path.display());
            for row in &report.aggregate {
                let bound = row
                    .bound_mean
                    .map(|b| format!(" bound {b:.4}"))
                    .unwrap_or_default();
                println!(
                    "  {:<22} weighted {:.4} (uav {:.4}, ground {:.4}){bound}",
                    row.scheme.name(),
                    row.weighted_mean,
                    row.uav_rate_mean,
                    row.ground_rate_mean
                );
            }
            Ok(())
        }
        Command::Sweep {
            common,
            axis,
            values,
            details,
        } => {
            init_threads(common.parallel);
            let cfg = load_config(&common)?;
            let result = sweep(&cfg, axis.0, &values)?;
            let csv_name = format!("sweep_{}.csv", axis.0.name());
            let path = write_out(&common.out, &csv_name, &sweep_csv(&result))?;
            println!("wrote {}", path.display());
            if details {
                let json_name = format!("sweep_{}.json", axis.0.name());
                let path = write_out(&common.out, &json_name, &report_json(&result))?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Region { common, ratios } => {
            init_threads(common.parallel);
            let cfg = load_config(&common)?;
            let result = rate_region(&cfg, &ratios)?;
            let path = write_out(&common.out, "region.csv", &region_csv(&result))?;
            println!("wrote {}", path.display());
            let path = write_out(&common.out, "region.json", &report_json(&result))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::ValidateConfig { config } => {
            let cfg = ScenarioConfig::from_toml_file(&config.display().to_string())
                .map_err(|e| RunError::Config(e.to_string()))?;
            let schemes: Vec<&str> = cfg
                .parsed_schemes()
                .map_err(|e| RunError::Config(e.to_string()))?
                .iter()
                .map(|s| s.name())
                .collect();
            println!(
                "ok: {} cells, {} UEs on {} RBs, {} snapshots, schemes: {}, schema v{}",
                uav_icic::HexGrid::cell_count_for_tiers(cfg.grid.tiers),
                cfg.ues.count,
                cfg.ues.rbs,
                cfg.snapshots,
                schemes.join(","),
                report::SCHEMA_VERSION,
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
