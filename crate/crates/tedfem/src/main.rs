use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tedfem::cli::{cmd_convergence, cmd_run, cmd_verify, resolve_out_dir};
use tedfem::config::{preset, RunConfig};

/// Coupled thermo-elastic damage finite element solver.
#[derive(Parser)]
#[command(name = "tedfem", version, about)]
struct Cli {
    /// Force deterministic sequential execution. Execution is sequential in
    /// this build, so this only pins the intent.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured problem (transient time loop or a manufactured
    /// order check, depending on the config's run mode).
    Run {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in preset: sens-notch, zero, mms-elastic, mms-heat.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory (defaults to the config's output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump the effective configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Convergence study on nested refinements with a reference one level
    /// finer.
    Convergence {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Override the base mesh resolution.
        #[arg(long)]
        n: Option<usize>,
        /// Override the number of time steps.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the operator/stencil/penalty property suite.
    Verify,
}

fn load_config(config: Option<PathBuf>, name: Option<String>) -> tedfem::Result<RunConfig> {
    match (config, name) {
        (Some(path), _) => RunConfig::from_path(&path),
        (None, Some(name)) => preset(&name),
        (None, None) => Err(tedfem::Error::Config(
            "pass either --config <path> or --preset <name>".into(),
        )),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("TEDFEM_THREADS") {
        if threads.trim().parse::<usize>().map(|t| t > 1).unwrap_or(false) {
            eprintln!("note: execution is single-threaded; TEDFEM_THREADS={threads} has no effect");
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, preset, out, print_config } => {
            load_config(config, preset).and_then(|cfg| {
                if print_config {
                    print!("{}", cfg.to_toml());
                    return Ok(());
                }
                let dir = resolve_out_dir(&cfg, out.as_deref());
                cmd_run(&cfg, &dir)
            })
        }
        Command::Convergence { config, preset, levels, n, steps, out } => {
            load_config(config, preset).and_then(|mut cfg| {
                if let Some(n) = n {
                    cfg.mesh.n = n;
                }
                if let Some(steps) = steps {
                    cfg.time.steps = steps;
                }
                let dir = resolve_out_dir(&cfg, out.as_deref());
                let outcome = cmd_convergence(&cfg, levels, Some(&dir))?;
                print_rates(&outcome);
                Ok(())
            })
        }
        Command::Verify => match cmd_verify() {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("verification failed");
                return ExitCode::FAILURE;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn print_rates(outcome: &tedfem::cli::ConvergenceOutcome) {
    let show = |name: &str, r: Option<f64>| match r {
        Some(v) => println!("fitted rate {name:<12} {v:.4}"),
        None => println!("fitted rate {name:<12} undefined"),
    };
    show("u (L2)", outcome.fitted.u_l2);
    show("phi (L2)", outcome.fitted.phi_l2);
    show("theta (L2)", outcome.fitted.theta_l2);
    show("u (H1)", outcome.fitted.u_h1);
    show("phi (H1)", outcome.fitted.phi_h1);
    show("theta (H1)", outcome.fitted.theta_h1);
    show("u (A-norm)", outcome.fitted.u_anorm);
}
