//! spacelink: run and compare space-link congestion-control simulations.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use spacelink_core::analysis::analyze_slow_start;
use spacelink_core::geometry::{
    interruption_threshold, path_geometry, GeometryConstants, SubSatellitePoint,
};
use spacelink_core::runner::{self, RunError};
use spacelink_core::scenario::{ConfigError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "spacelink", version, about = "Deterministic space-link congestion-control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario for every configured seed and write CSV/JSON outputs.
    Run(RunArgs),
    /// Run the sweep in the config across algorithms and loss rates.
    Compare(CompareArgs),
    /// Compute link geometry for a chain of sub-satellite points.
    Geometry(GeometryArgs),
    /// Slow-start duration to reach a stable rate (closed form).
    AnalyzeSlowstart(SlowStartArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory root.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Sweep only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GeometryArgs {
    /// Sub-satellite point as lat_deg,lon_deg,alt_km; repeat for a chain.
    #[arg(
        long = "point",
        value_name = "LAT,LON,ALT_KM",
        required = true,
        allow_hyphen_values = true
    )]
    points: Vec<String>,
    /// Emit JSON instead of a text table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SlowStartArgs {
    /// Take rtt/bandwidth/segment defaults from a scenario config's
    /// [analysis] section and path geometry.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Round-trip time, seconds.
    #[arg(long, required_unless_present = "config")]
    rtt_s: Option<f64>,
    /// Stable transmission rate, bits per second.
    #[arg(long, required_unless_present = "config")]
    bandwidth_bps: Option<f64>,
    /// Segment length, bits (1 KB = 8192).
    #[arg(long)]
    segment_bits: Option<f64>,
}

/// Errors that should exit with status 1 (bad input) vs 2 (runtime).
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 1;
        }
        if let Some(run) = cause.downcast_ref::<RunError>() {
            return match run {
                RunError::Config(_) | RunError::MismatchedSweep(_) => 1,
                _ => 2,
            };
        }
        if cause.downcast_ref::<clap::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Geometry(args) => cmd_geometry(args),
        Command::AnalyzeSlowstart(args) => cmd_slow_start(args),
    }
}

fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    let summaries = runner::run_and_write(&cfg, &args.out)?;
    for s in &summaries {
        let dir = runner::cell_dir(&args.out, &s.scenario, &s.algorithm, s.seed);
        println!("seed {}: wrote {}", s.seed, dir.display());
        println!("{}", serde_json::to_string_pretty(s)?);
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    let report = runner::compare(&cfg)?;
    let dir = runner::write_comparison(&args.out, &cfg.name, &report)?;

    println!(
        "{:<14} {:>9} {:>6} {:>14} {:>12} {:>12} {:>12}",
        "algorithm", "loss", "seed", "tput_bps", "compl_s", "hold_on_s", "block_rate"
    );
    for r in &report.rows {
        println!(
            "{:<14} {:>9} {:>6} {:>14.0} {:>12} {:>12} {:>12}",
            r.algorithm,
            r.loss_rate,
            r.seed,
            r.mean_throughput_bps,
            r.completion_time_s.map(|v| format!("{v:.2}")).unwrap_or_default(),
            r.mean_hold_on_s.map(|v| format!("{v:.4}")).unwrap_or_default(),
            r.blocking_rate.map(|v| format!("{v:.5}")).unwrap_or_default(),
        );
    }
    println!();
    for rank in &report.rankings {
        println!(
            "ranking at loss {}: {} -> {}",
            rank.loss_rate,
            rank.metric,
            rank.ordered_algorithms.join(" > ")
        );
    }
    println!("\nwrote {}", dir.display());
    Ok(())
}

fn parse_point(s: &str) -> anyhow::Result<SubSatellitePoint> {
    let invalid = |msg: String| anyhow::anyhow!(ConfigError::Invalid(msg));
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(invalid(format!("point {s:?} must be lat_deg,lon_deg,alt_km")));
    }
    let coord = |i: usize, what: &str| -> anyhow::Result<f64> {
        parts[i]
            .trim()
            .parse()
            .map_err(|e| invalid(format!("{what} in point {s:?}: {e}")))
    };
    let lat = coord(0, "latitude")?;
    let lon = coord(1, "longitude")?;
    let alt = coord(2, "altitude")?;
    SubSatellitePoint::from_degrees(lat, lon, alt).map_err(|e| invalid(e.to_string()))
}

fn cmd_geometry(args: GeometryArgs) -> anyhow::Result<()> {
    let points: Vec<SubSatellitePoint> = args
        .points
        .iter()
        .map(|p| parse_point(p))
        .collect::<anyhow::Result<_>>()?;
    let consts = GeometryConstants::default();
    let geom = path_geometry(&points, &consts)
        .map_err(|e| anyhow::anyhow!(ConfigError::Invalid(e.to_string())))?;
    let threshold = interruption_threshold(&geom).ok();

    if args.json {
        let value = serde_json::json!({
            "hops": geom
                .hop_thetas
                .iter()
                .zip(&geom.hop_distances_m)
                .enumerate()
                .map(|(i, (theta, d))| serde_json::json!({
                    "hop": i,
                    "theta_rad": theta,
                    "distance_m": d,
                    "exceeds_visibility": geom.wide_angle_hops.contains(&i),
                }))
                .collect::<Vec<_>>(),
            "total_distance_m": geom.total_distance_m,
            "rtt_est_s": geom.rtt_est_s,
            "interruption_threshold_s": threshold,
        });
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        println!("{:<5} {:>14} {:>16} {:>12}", "hop", "theta_rad", "distance_km", "visible");
        for (i, (theta, d)) in geom.hop_thetas.iter().zip(&geom.hop_distances_m).enumerate() {
            println!(
                "{:<5} {:>14.6} {:>16.3} {:>12}",
                i,
                theta,
                d / 1000.0,
                if geom.wide_angle_hops.contains(&i) { "EXCEEDED" } else { "ok" }
            );
        }
        println!("total distance D = {:.3} km", geom.total_distance_m / 1000.0);
        println!("rtt_est = 2D/c   = {:.6} s", geom.rtt_est_s);
        match threshold {
            Some(t) => println!("interruption threshold (10 x rtt_est) = {t:.6} s"),
            None => println!("interruption threshold undefined for a zero-length path"),
        }
    }
    Ok(())
}

fn cmd_slow_start(args: SlowStartArgs) -> anyhow::Result<()> {
    let from_config = match &args.config {
        Some(path) => {
            let cfg = load_config(path)?;
            let analysis = cfg.analysis.ok_or_else(|| {
                anyhow::anyhow!(ConfigError::Invalid("config has no [analysis] section".into()))
            })?;
            Some((
                analysis.rtt_s.unwrap_or_else(|| cfg.path.effective_rtt_est_s()),
                analysis.bandwidth_bps,
                analysis.segment_bits,
            ))
        }
        None => None,
    };
    let rtt_s = args.rtt_s.or(from_config.map(|c| c.0)).expect("clap enforces rtt or config");
    let bandwidth_bps = args
        .bandwidth_bps
        .or(from_config.map(|c| c.1))
        .expect("clap enforces bandwidth or config");
    let segment_bits = args.segment_bits.or(from_config.map(|c| c.2)).unwrap_or(8192.0);
    let t_ss = analyze_slow_start(rtt_s, bandwidth_bps, segment_bits)
        .map_err(|e| anyhow::anyhow!(ConfigError::Invalid(e.to_string())))?;
    println!(
        "t_ss = rtt * (1 + log2(B*rtt/l)) = {t_ss:.4} s  (rtt {rtt_s} s, B {bandwidth_bps} bps, l {segment_bits} bits)"
    );
    Ok(())
}
