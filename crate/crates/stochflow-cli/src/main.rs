use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use stochflow::app::config::parse_config;
use stochflow::app::run::{check_mesh, simulate};
use stochflow::app::selftest::{run_selftest, SelfTestOptions};
use stochflow::app::{AppError, EXIT_FAILURE, EXIT_INVALID, EXIT_OK, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "stochflow", version, about = "Structure-preserving incompressible Euler solver on cell complexes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a configuration file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build a mesh file and report its geometry, or why it is rejected.
    CheckMesh {
        #[arg(long)]
        mesh: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest {
        /// Only run checks whose name contains this text.
        #[arg(long)]
        filter: Option<String>,
        /// Add this to one corner coefficient of every test mesh.
        #[arg(long, hide = true, allow_hyphen_values = true)]
        perturb_k: Option<f64>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn fail(e: AppError) -> ExitCode {
    eprintln!("error: {e}");
    code(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => code(EXIT_OK),
                _ => code(EXIT_USAGE),
            };
        }
    };
    match cli.command {
        Command::Simulate { config } => {
            let cfg = match parse_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(e.into()),
            };
            match simulate(&cfg) {
                Ok(rep) => {
                    let s = &rep.summary;
                    println!(
                        "{} steps, energy in [{:.10e}, {:.10e}], max divergence {:.3e}, Newton iterations {} (max {} per step), {} frames in {}",
                        s.steps,
                        s.min_energy,
                        s.max_energy,
                        s.max_divergence,
                        s.total_newton_iters,
                        s.max_newton_iters,
                        rep.frames,
                        rep.output_dir.display()
                    );
                    code(EXIT_OK)
                }
                Err(e) => fail(e),
            }
        }
        Command::CheckMesh { mesh } => match check_mesh(&mesh) {
            Ok(text) => {
                print!("{text}");
                code(EXIT_OK)
            }
            Err(e) => fail(e),
        },
        Command::Selftest { filter, perturb_k } => {
            let results = match run_selftest(&SelfTestOptions { filter, perturb_k }) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return code(EXIT_INVALID);
                }
            };
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} passed, {} failed", results.len() - failed, failed);
            code(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}
