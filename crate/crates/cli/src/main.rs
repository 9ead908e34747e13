//! Command-line front end for the two-level heat studies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twolevel_core::experiments::{
    echo_config, empirical_orders, parse_config, run_consistency_study, run_slab_verification, run_steady_study, run_unsteady_study, ExperimentConfig,
};
use twolevel_core::io::Table;
use twolevel_core::sparse::set_threads;
use twolevel_core::{Error, Result};

/// Largest slab error accepted by `verify-slab`.
const SLAB_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "twolevel", version, about = "Two-mesh solver studies for heat conduction with a thin surface layer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for matrix-vector products.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Steady study: error against a fine reference for every local mesh size.
    Steady(Common),
    /// Unsteady study: errors in time and probe series.
    Unsteady(Common),
    /// Layered slab against its exact profile (built-in configuration unless --config is given).
    VerifySlab(Common),
    /// Two-level against monolithic under simultaneous refinement.
    ConsistencyStudy(Common),
    /// Prints a configuration with all defaults filled in.
    ShowConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(common: &Common, fallback: Option<fn() -> ExperimentConfig>) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = match (&common.config, fallback) {
        (Some(path), _) => parse_config(path)?,
        (None, Some(f)) => f(),
        (None, None) => return Err(Error::InvalidConfig("--config is required for this command".into())),
    };
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    set_threads(common.threads);
    Ok((cfg, out))
}

fn print_table(title: &str, table: &Table) {
    println!("# {title}");
    print!("{}", table.to_csv_string());
}

fn steady(common: &Common) -> Result<()> {
    let (cfg, out) = load(common, None)?;
    let study = run_steady_study(&cfg, Some(&out))?;
    for level in &study.levels {
        print_table(&format!("h = 1/{}", level.n_global), &level.table());
    }
    report_written(&out);
    Ok(())
}

fn unsteady(common: &Common) -> Result<()> {
    let (cfg, out) = load(common, None)?;
    let study = run_unsteady_study(&cfg, Some(&out))?;
    for level in &study.levels {
        print_table(&format!("h = 1/{}, time-averaged", level.n_global), &level.table());
    }
    report_written(&out);
    Ok(())
}

fn verify_slab(common: &Common) -> Result<bool> {
    let (cfg, out) = load(common, Some(ExperimentConfig::slab))?;
    let checks = run_slab_verification(&cfg, Some(&out))?;
    let mut ok = true;
    for c in &checks {
        let pass = c.global_error <= SLAB_TOL && c.local_error <= SLAB_TOL;
        ok &= pass;
        println!(
            "h = 1/{}, h_minus = 1/{}: {} iterations (theta {}), global {:.3e}, local {:.3e}, u(top) = {:.10} [{}]",
            c.n_global,
            c.n_local,
            c.iterations,
            c.theta,
            c.global_error,
            c.local_error,
            c.top_value,
            if pass { "ok" } else { "FAIL" }
        );
    }
    report_written(&out);
    Ok(ok)
}

fn consistency(common: &Common) -> Result<()> {
    let (cfg, out) = load(common, Some(ExperimentConfig::consistency))?;
    let levels = run_consistency_study(&cfg, Some(&out))?;
    let orders = empirical_orders(&levels.iter().map(|l| l.difference).collect::<Vec<_>>());
    for (k, l) in levels.iter().enumerate() {
        let order = if k == 0 { String::from("-") } else { format!("{:.2}", orders[k - 1]) };
        println!("h = 1/{}: difference {:.4e}, order {order}, {} iterations", l.n, l.difference, l.iterations);
    }
    report_written(&out);
    Ok(())
}

fn report_written(out: &Path) {
    eprintln!("results written to {}", out.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Steady(c) => steady(c).map(|_| true),
        Command::Unsteady(c) => unsteady(c).map(|_| true),
        Command::VerifySlab(c) => verify_slab(c),
        Command::ConsistencyStudy(c) => consistency(c).map(|_| true),
        Command::ShowConfig { config } => parse_config(config).map(|cfg| {
            println!("{}", echo_config(&cfg));
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                if !msg.contains(&s.to_string()) {
                    msg.push_str(&format!("\n  caused by: {s}"));
                }
                src = s.source();
            }
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
