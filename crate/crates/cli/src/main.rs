use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pidectl_cli::commands::CONTROLLER_FILE;
use pidectl_cli::{analyze, certify, load_controller, simulate, synthesize, CliError, CliResult, Scenario};

#[derive(Parser)]
#[command(name = "pidectl", version, about = "Feedback stabilization of PIDEs with exponential memory")]
struct Cli {
    /// Scenario document (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the scenario).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integration step.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Null-control horizon T.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ControllerArgs {
    /// Controller document; defaults to controller.json in the output directory.
    #[arg(long)]
    controller: Option<PathBuf>,
    /// Ignore any controller and run the open loop.
    #[arg(long)]
    open_loop: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Modal roots, growth bound and unstable partition.
    Analyze,
    /// Null control of the unstable block and the Riccati feedback.
    Synthesize,
    /// Modal trajectory with or without feedback.
    Simulate(ControllerArgs),
    /// Decay certificate from the recorded trajectory.
    Certify(ControllerArgs),
}

fn scenario(cli: &Cli) -> CliResult<Scenario> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("config", "--config PATH is required"))?;
    let mut s = Scenario::load(path)?;
    if let Some(o) = &cli.out {
        s.out = Some(o.clone());
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if cli.step.is_some() {
        s.step = cli.step;
    }
    if let Some(h) = cli.horizon {
        s.horizon = Some(h);
    }
    s.validate()?;
    Ok(s)
}

fn controller_for(args: &ControllerArgs, out: &Path) -> CliResult<Option<pidectl_core::riccati::RiccatiSolution>> {
    if args.open_loop {
        return Ok(None);
    }
    match &args.controller {
        Some(p) => load_controller(p).map(Some),
        None => {
            let p = out.join(CONTROLLER_FILE);
            if p.exists() {
                load_controller(&p).map(Some)
            } else {
                Ok(None)
            }
        }
    }
}

fn run(cli: &Cli) -> CliResult<String> {
    let s = scenario(cli)?;
    let out = s.out_dir();
    match &cli.command {
        Command::Analyze => Ok(analyze(&s, &out)?.summary()),
        Command::Synthesize => Ok(synthesize(&s, &out)?.summary()),
        Command::Simulate(args) => {
            let c = controller_for(args, &out)?;
            let r = simulate(&s, c.as_ref(), &out)?;
            Ok(format!(
                "{} loop, {} modes, {} samples, step {:.3e}, final |y| = {:.6e}\n",
                if r.closed_loop { "closed" } else { "open" },
                r.modes,
                r.samples,
                r.step,
                r.final_norm
            ))
        }
        Command::Certify(args) => {
            let c = controller_for(args, &out)?;
            let cert = certify(&s, c.as_ref(), &out)?;
            if cert.pass {
                Ok(cert.summary())
            } else {
                Err(CliError::Certification(cert.summary().trim_end().to_string()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
