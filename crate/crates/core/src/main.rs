use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use riskdesign::cli::{self, LoadedConfig, RunConfig};
use riskdesign::solver::SolveStatus;
use riskdesign::{Error, Result};

/// Scenario-based robust design: solve, analyze and grow design datasets.
#[derive(Parser)]
#[command(name = "riskdesign", version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the configured formulation and write the design report.
    Design {
        #[arg(short, long)]
        config: PathBuf,
        /// Overrides `output_dir`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate nominal and perturbational failure probabilities of a design.
    Analyze {
        #[arg(short, long)]
        config: PathBuf,
        /// `design.json` or a one-column `theta` CSV.
        #[arg(short, long)]
        design: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rerun the enclosure studies and write their tables and point data.
    DemoEnclosure {
        /// Only the `[demo]` section and `output_dir` are read.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Grow the training set from a pool until the failure target is met.
    Sequential {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the default configuration, or write it to a file.
    Template {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load(config: Option<PathBuf>, output: Option<PathBuf>) -> Result<LoadedConfig> {
    let loaded = match config {
        Some(path) => LoadedConfig::load(&path)?,
        None => LoadedConfig::new(RunConfig::default(), "."),
    };
    Ok(match output {
        // an override changes what produced the reports, so rehash
        Some(dir) => {
            let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
            let mut config = loaded.config;
            config.output_dir = cwd.join(dir);
            LoadedConfig::new(config, loaded.base)
        }
        None => loaded,
    })
}

fn run(args: Args) -> Result<u8> {
    cli::configure_threads()?;
    match args.command {
        Cmd::Design { config, output } => {
            let cfg = load(Some(config), output)?;
            let r = cli::cmd_design(&cfg)?;
            println!(
                "{}  J = {:.6}  sigma = {}  outliers = {:?}  ({:.1}s)",
                r.status.as_str(),
                r.objective,
                r.sigma,
                r.outliers,
                r.wall_time_s
            );
            println!("theta = {:?}", r.theta);
            println!("wrote {}", cfg.output_dir().join("design.json").display());
            Ok(if r.status == SolveStatus::Converged { 0 } else { 2 })
        }
        Cmd::Analyze { config, design, output } => {
            let cfg = load(Some(config), output)?;
            let r = cli::cmd_analyze(&cfg, &design)?;
            let e = r.nominal;
            println!("p_nom = {:.6}  [{:.6}, {:.6}]  n' = {}", e.p, e.lo, e.hi, r.n_test);
            for (g, e) in &r.perturbational {
                println!("p_per(gamma={g}) = {:.6}  [{:.6}, {:.6}]  m' = {}", e.p, e.lo, e.hi, r.m_test);
            }
            println!("wrote {}", cfg.output_dir().join("analysis.csv").display());
            Ok(0)
        }
        Cmd::DemoEnclosure { config, output } => {
            let cfg = load(config, output)?;
            let b = cli::cmd_demo_enclosure(&cfg)?;
            for d in b.table_one.iter().chain(&b.table_two) {
                println!(
                    "{:<9} {:<26} m={:<3} sigma={:<3} J={:>9.4}  {}{}",
                    d.label,
                    d.formulation.as_str(),
                    d.m,
                    d.sigma,
                    d.objective,
                    d.status.as_str(),
                    d.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default()
                );
            }
            println!("wrote {}", cfg.output_dir().display());
            let all_converged = b.table_one.iter().chain(&b.table_two).all(|d| d.converged());
            Ok(if all_converged { 0 } else { 2 })
        }
        Cmd::Sequential { config, output } => {
            let cfg = load(Some(config), output)?;
            let o = cli::cmd_sequential(&cfg)?;
            for r in &o.trace {
                println!("iter {:>2}  n_u = {:>5}  J = {:.6}  p_hat = {:.6}", r.iteration, r.n_u, r.objective, r.estimate.p);
            }
            println!("status: {}", o.status.as_str());
            println!("wrote {}", cfg.output_dir().join("sequential_trace.csv").display());
            Ok(0)
        }
        Cmd::Template { output } => {
            let text = cli::template();
            match output {
                Some(path) => cli::write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
