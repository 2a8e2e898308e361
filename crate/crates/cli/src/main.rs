//! Command-line front end: generate, run, plot, check.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use subnetgeo::report::{self, parse_metric_list, RunConfig};
use subnetgeo::synthgen::{self, SynthConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "subnetgeo", version, about = "IP-geolocation error and subnet-scale measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset, its ground-truth sidecar and a run config.
    Generate {
        /// Synthetic scenario (TOML). Without it a small single-ISP scenario is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full pipeline and write a report directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the report directory named in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Comma-separated metric names; default is all.
        #[arg(long)]
        metrics: Option<String>,
    },
    /// Render SVG charts from a report directory.
    Plot {
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate inputs and print row accounting without computing metrics.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn generate(config: Option<PathBuf>, out: PathBuf, seed: Option<u64>) -> anyhow::Result<()> {
    let mut cfg = match config {
        Some(p) => SynthConfig::load(&p)?,
        None => SynthConfig::simple(seed.unwrap_or(0), 1000, 30),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let ds = synthgen::generate(&cfg)?;
    let paths = synthgen::write_dataset(&ds, &out)?;
    let run_cfg = report::config_for_dataset(&paths, &ds, &out, PathBuf::from("report"));
    let run_toml = out.join("run.toml");
    std::fs::write(&run_toml, run_cfg.to_toml()?).with_context(|| format!("writing {}", run_toml.display()))?;
    println!("wrote {} clusters to {}", ds.clusters.len(), out.display());
    println!("run config: {}", run_toml.display());
    Ok(())
}

fn run(config: PathBuf, out: Option<PathBuf>, threads: Option<usize>, metrics: Option<String>) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(&config)?;
    if let Some(o) = out {
        cfg.out = o;
    }
    if let Some(m) = metrics {
        cfg.metrics = parse_metric_list(&m)?;
    }
    let outcome = report::run_with_threads(&cfg, threads)?;
    println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
    Ok(())
}

fn plot(out: PathBuf) -> anyhow::Result<()> {
    let o = report::plot(&out)?;
    for n in &o.notices {
        eprintln!("notice: {n}");
    }
    for p in &o.written {
        println!("{}", p.display());
    }
    Ok(())
}

fn check(config: PathBuf, threads: Option<usize>) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&config)?;
    let pool = rayon_pool(threads)?;
    let r = pool.install(|| report::check(&cfg))?;
    let t = &r.tally;
    println!("rows {} accepted {} rejected {} balanced {}", t.total, t.accepted, t.rejected_total(), t.balanced());
    for (reason, n) in &t.rejected {
        println!("  rejected {}: {n}", reason.as_str());
    }
    if let Some(t2) = &r.tally_period2 {
        println!("period 2: rows {} accepted {} rejected {}", t2.total, t2.accepted, t2.rejected_total());
    }
    println!("registry records {}", r.registry_records);
    for (p, n) in &r.snapshot_entries {
        println!("snapshot {p}: {n} prefixes");
    }
    println!("polygons {}", r.polygons);
    println!("subnets without an organization {}", r.unknown_subnets);
    Ok(())
}

fn rayon_pool(threads: Option<usize>) -> anyhow::Result<subnetgeo::report::ThreadPool> {
    report::thread_pool(threads).map_err(Into::into)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<subnetgeo::Error>() {
        Some(e) if !e.is_config() => EXIT_DATA,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, out, seed } => generate(config, out, seed),
        Command::Run { config, out, threads, metrics } => run(config, out, threads, metrics),
        Command::Plot { out } => plot(out),
        Command::Check { config, threads } => check(config, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
