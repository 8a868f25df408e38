use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use podrom::error::{Error, Result};
use podrom::pipeline::{self, PipelineConfig, Study, StudyOutcome, Workspace};

#[derive(Parser)]
#[command(name = "podrom", version, about = "POD reduced-order Navier-Stokes pipeline")]
struct Cli {
    /// Pipeline configuration file; built-in desk defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the rayon pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random stream, overrides `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full-order model and store snapshots.
    Fom,
    /// Build velocity and pressure POD bases.
    Pod,
    /// Build supremizers and report the compatibility constants.
    Supremize,
    /// Integrate the velocity ROM.
    Rom,
    /// Recover reduced pressures with the configured methods.
    Recover,
    /// Run a study: CONV_M, CONV_R or MER_VS_PPE; all three when omitted.
    Study { which: Option<String> },
    /// Run the invariant checks on the configured run.
    Verify,
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let studies = match &cli.cmd {
        Cmd::Study { which: Some(w) } => {
            vec![Study::parse(w).ok_or_else(|| Error::Config(format!("unknown study `{w}`")))?]
        }
        Cmd::Study { which: None } => cfg.study.map(|s| vec![s]).unwrap_or_else(|| Study::ALL.to_vec()),
        _ => Vec::new(),
    };
    let ws = Workspace::open(cfg)?;
    match cli.cmd {
        Cmd::Fom => println!("{}", pipeline::cmd_fom(&ws)?.display()),
        Cmd::Pod => println!("{}", pipeline::cmd_pod(&ws)?.display()),
        Cmd::Supremize => {
            let rep = pipeline::cmd_supremize(&ws)?;
            for (k, v) in rep.to_manifest().entries() {
                println!("{k} = {v}");
            }
        }
        Cmd::Rom => println!("{}", pipeline::cmd_rom(&ws)?.display()),
        Cmd::Recover => {
            for d in pipeline::cmd_recover(&ws)? {
                println!("{}", d.display());
            }
        }
        Cmd::Study { .. } => {
            for s in studies {
                match pipeline::cmd_study(&ws, s)? {
                    StudyOutcome::Sweep(o) => {
                        let q = o.regression.map(|f| format!("{:.4}", f.exponent)).unwrap_or_else(|| "undefined".into());
                        println!("{}: exponent {q}, within band: {}", s.name(), o.passed);
                    }
                    StudyOutcome::Comparison(o) => {
                        println!("{}: stagnation statistic holds: {}", s.name(), o.stagnation_passed);
                        println!("  band ratio MER {:.3}, PPE {:.3}", o.band_ratio_mer, o.band_ratio_ppe);
                        println!(
                            "  force errors at m = {}: MER drag {:.3e} lift {:.3e}, PPE drag {:.3e} lift {:.3e}",
                            o.force_m, o.force_errors_mer.0, o.force_errors_mer.1, o.force_errors_ppe.0, o.force_errors_ppe.1
                        );
                    }
                }
            }
        }
        Cmd::Verify => {
            let checks = pipeline::cmd_verify(&ws)?;
            let ok = checks.iter().all(|c| c.passed);
            for c in checks {
                println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
