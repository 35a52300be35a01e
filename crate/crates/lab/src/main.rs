use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use bsvi_lab::registry;
use bsvi_lab::runner::{self, OUTPUT_ROOT_ENV};
use bsvi_lab::sweep::{self, Axis};
use bsvi_lab::ExperimentConfig;

/// Penalized solver experiments with verification artifacts.
#[derive(Parser)]
#[command(name = "bsvi-lab", version, after_help = concat!(
    "Relative out_dir entries are placed under $", "BSVI_LAB_OUTPUT_ROOT", " when it is set."
))]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve and verify one configuration; writes results.csv, summary.json, verify.json.
    Run {
        config: PathBuf,
        /// Exit with status 1 when any verifier check fails.
        #[arg(long)]
        gate: bool,
    },
    /// Convergence table along one axis.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma separated values (eps levels, time steps or path counts).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Seeds per value on the paths axis; errors are reported as RMS.
        #[arg(long, default_value_t = 1)]
        replications: usize,
    },
    /// Check a run directory; exits with status 1 on any failure.
    Verify {
        run_dir: PathBuf,
        /// Re-run the recorded configuration and compare results.csv byte for byte.
        #[arg(long)]
        recompute: bool,
    },
    /// List registered scenarios, or print one as a configuration document.
    ListScenarios {
        #[arg(long, value_name = "NAME")]
        emit: Option<String>,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.6e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .init();
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` signals a failed verdict.
fn dispatch(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Run { config, gate } => {
            let out = runner::run(&load(&config)?)?;
            let s = &out.summary;
            println!("scenario {} seed {} ({})", s.scenario, s.seed, s.seed_source);
            for (e, y) in s.eps.iter().zip(&s.y0) {
                println!("  eps {e:<10} Y0 {y:.12}");
            }
            for g in &s.gaps {
                println!("  gap {} -> {}: {:.6e}", g.eps_a, g.eps_b, g.y_sup);
            }
            if let Some(r) = &s.reference {
                println!("  reference: Y0 error {}, sup error {}", opt(r.y0_error), opt(r.sup_error));
            }
            println!("  checks {}/{} passed", s.verdicts.passed, s.verdicts.total);
            for f in &s.verdicts.failed {
                println!("  FAIL {f}");
            }
            for k in &s.skipped {
                println!("  skipped {k}");
            }
            for w in &s.warnings {
                println!("  warning: {w}");
            }
            println!("  wrote {}", out.dir.display());
            Ok(!gate || s.verdicts.pass)
        }
        Cmd::Sweep { config, axis, values, replications } => {
            let cfg = load(&config)?;
            let rows = sweep::sweep(&cfg, axis, &values, replications)?;
            println!("{:>14} {:>20} {:>14} {:>14} {:>14} {:>10}", "value", "Y0", "gap", "Y0 error", "sup error", "ms");
            for r in &rows {
                println!(
                    "{:>14} {:>20.12} {:>14} {:>14} {:>14} {:>10.1}",
                    r.value, r.y0, opt(r.gap), opt(r.y0_error), opt(r.sup_error), r.runtime_ms
                );
            }
            let dir = runner::output_dir(&cfg);
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let name = format!("sweep_{}.csv", format!("{axis:?}").to_lowercase());
            fs::write(dir.join(&name), sweep::rows_csv(&rows))?;
            println!("wrote {}", dir.join(name).display());
            Ok(true)
        }
        Cmd::Verify { run_dir, recompute } => {
            let check = runner::verify_dir(&run_dir, recompute)?;
            for l in &check.lines {
                println!("{l}");
            }
            println!("{}", if check.pass { "PASS" } else { "FAIL" });
            Ok(check.pass)
        }
        Cmd::ListScenarios { emit } => {
            match emit {
                Some(name) => match registry::preset(&name) {
                    Some(cfg) => println!("{}", cfg.to_json()),
                    None => bail!("unknown scenario {name:?}"),
                },
                None => {
                    for name in registry::names() {
                        println!("{name:<22} {}", registry::describe(name).unwrap_or(""));
                    }
                    if std::env::var_os(OUTPUT_ROOT_ENV).is_some() {
                        println!("(output root overridden by {OUTPUT_ROOT_ENV})");
                    }
                }
            }
            Ok(true)
        }
    }
}
