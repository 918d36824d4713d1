//! Command-line front end.
//!
//! Exit status is 0 when every audit verdict passes, 1 when a verdict
//! fails and 2 on errors. `THERMODAMAGE_THREADS` caps the worker threads.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thermodamage::constitutive::validate_exponents;
use thermodamage::diagnostics::DiagnosticsReport;
use thermodamage::io::experiments::write_study;
use thermodamage::io::{audit_directory, load_config, run_m_sweep, run_single, run_tau_refinement, write_report};
use thermodamage::Result;

#[derive(Parser)]
#[command(
    name = "thermodamage",
    version,
    about = "Thermoviscoelastic damage simulator with audited time stepping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write time series, snapshots and the audit.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a run with the time step halved `levels − 1` times.
    RefineTau {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Write `refinement.json` here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a run at several truncation levels.
    SweepM {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated truncation levels.
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-audit the snapshots of a finished run.
    Audit {
        #[arg(long)]
        snapshots: PathBuf,
    },
    /// Parse and validate a configuration.
    CheckConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn init_threads() {
    if let Some(n) = std::env::var("THERMODAMAGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        // fails only when a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn print_verdicts(report: &DiagnosticsReport) {
    let v = &report.verdicts;
    let show = |o: Option<bool>| o.map_or("n/a", |b| if b { "pass" } else { "FAIL" });
    let flag = |b: bool| if b { "pass" } else { "FAIL" };
    println!(
        "positivity                 {}  (min w = {:e})",
        flag(v.positivity),
        report.w_min
    );
    println!("irreversibility            {}", flag(v.irreversibility));
    println!("bounds 0 ≤ χ ≤ 1           {}", flag(v.bounds));
    println!(
        "remainder cancellation     {}  (max {:e})",
        show(v.remainder_cancellation),
        report.max_cancel_resid()
    );
    println!(
        "energy inequality          {}  (max relative excess {:e})",
        show(v.energy_inequality),
        report.max_relative_excess()
    );
    println!("partial energy inequality  {}", show(v.partial_energy_inequality));
    println!(
        "weak residuals             {}  (max {:e})",
        show(v.weak_residuals),
        report.max_weak_residual()
    );
    println!(
        "multiplier consistency     {}  (max {:e})",
        show(v.xi_consistency),
        report.max_xi_discrepancy()
    );
    println!("singular estimate          {}", show(v.singular_estimate));
    for n in &report.notes {
        println!("note: {n}");
    }
}

fn output_or_print<T: serde::Serialize>(out: Option<&Path>, name: &str, table: &T) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| thermodamage::Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
            write_study(&dir.join(name), table)
        }
        None => {
            println!("{}", serde_json::to_string_pretty(table).expect("tables serialize"));
            Ok(())
        }
    }
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config)?;
            let out = out
                .or_else(|| cfg.file.output.directory.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let run = run_single(&cfg, &out)?;
            println!(
                "{} steps to t = {}, output in {}",
                run.trajectory.reports.len(),
                run.trajectory.last().t,
                out.display()
            );
            print_verdicts(&run.report);
            Ok(run.report.all_pass())
        }
        Command::RefineTau { config, levels, out } => {
            let cfg = load_config(&config)?;
            let table = run_tau_refinement(&cfg, levels)?;
            output_or_print(out.as_deref(), "refinement.json", &table)?;
            for (l, d) in table
                .levels
                .iter()
                .zip(table.differences.iter().map(Some).chain(std::iter::repeat(None)))
            {
                match d {
                    Some(d) => eprintln!("τ = {:e}: difference to next level {:e}", l.tau, d.combined()),
                    None => eprintln!("τ = {:e}", l.tau),
                }
            }
            eprintln!(
                "Cauchy {}, norm spread {:.3}%, complete {}",
                table.cauchy,
                100.0 * table.norm_spread,
                table.complete
            );
            Ok(table.passes())
        }
        Command::SweepM { config, m, out } => {
            let cfg = load_config(&config)?;
            let table = run_m_sweep(&cfg, &m)?;
            output_or_print(out.as_deref(), "m_sweep.json", &table)?;
            for p in &table.pairs {
                eprintln!(
                    "M = {:e} vs {:e}: distance {:e}, inactive {}, truncation active {}",
                    p.m_low, p.m_high, p.distance, p.inactive, p.truncation_active
                );
            }
            Ok(table.passes())
        }
        Command::Audit { snapshots } => {
            let report = audit_directory(&snapshots)?;
            write_report(&snapshots.join("audit.json"), &report)?;
            print_verdicts(&report);
            Ok(report.all_pass())
        }
        Command::CheckConfig { config } => {
            let cfg = load_config(&config)?;
            let co = &cfg.problem.model.coeffs;
            let v = validate_exponents(co.sigma, co.q, co.q0);
            println!(
                "{}: valid; d = {}, {} nodes, r = {:?}, s = {:?}",
                config.display(),
                co.dim,
                cfg.problem.mesh.node_count(),
                v.r,
                v.s
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
