use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hopmp::commands::{self, CliError, Options, Output};
use hopmp::formats::{read_json, to_json, InputError, MultiplierFile, ProblemFile, ProcessFile};
use hopmp_core::pmp::Tolerances;

/// Space-time embedding and maximum-principle checks for control-affine
/// optimal control problems with unbounded controls.
#[derive(Parser)]
#[command(name = "hopmp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Maximum bracket degree (number of leaves).
    #[arg(long, global = true, default_value_t = 3)]
    depth: usize,
    /// Integration steps per control cell.
    #[arg(long, global = true, default_value_t = 10)]
    substeps: usize,
    /// Extra control samples of the admissible set per grid node.
    #[arg(long, global = true, default_value_t = 64)]
    samples: usize,
    /// Tolerance for pointwise equalities.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol_eq: f64,
    /// Tolerance for target membership and activity.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol_target: f64,
    /// Tolerance for the transversality distance.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol_trans: f64,
    /// Tolerance for the adjoint finite-difference residual.
    #[arg(long, global = true, default_value_t = 1e-5)]
    tol_adjoint: f64,
    /// Cells with w0 below this are impulsive for `project`.
    #[arg(long, global = true, default_value_t = 1e-9)]
    w0_min: f64,
    /// Write the JSON report of `check`/`certify` here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Write the process produced by `simulate`/`embed`/`project` here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// List nonzero iterated brackets of the controlled fields.
    Brackets { problem: PathBuf },
    /// Integrate a process and report its endpoint.
    Simulate { problem: PathBuf, process: PathBuf },
    /// Reparameterize a strict process by pseudo-time.
    Embed { problem: PathBuf, process: PathBuf },
    /// Map a space-time process back to real time.
    Project { problem: PathBuf, process: PathBuf },
    /// Check the conditions for a given multiplier.
    Check {
        problem: PathBuf,
        process: PathBuf,
        multiplier: PathBuf,
    },
    /// Search for a multiplier satisfying the conditions.
    Certify { problem: PathBuf, process: PathBuf },
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| {
        InputError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    let f = &cli.flags;
    let opts = Options {
        depth: f.depth,
        substeps: f.substeps,
        samples: f.samples,
        tolerances: Tolerances {
            eq: f.tol_eq,
            target: f.tol_target,
            transversality: f.tol_trans,
            adjoint: f.tol_adjoint,
        },
        w0_min: f.w0_min,
    };
    let problem = |p: &Path| read_json::<ProblemFile>(p);
    let process = |p: &Path| read_json::<ProcessFile>(p);
    let out = match &cli.command {
        Command::Brackets { problem: p } => commands::cmd_brackets(&problem(p)?, &opts)?,
        Command::Simulate { problem: p, process: q } => commands::cmd_simulate(&problem(p)?, &process(q)?, &opts)?,
        Command::Embed { problem: p, process: q } => commands::cmd_embed(&problem(p)?, &process(q)?, &opts)?,
        Command::Project { problem: p, process: q } => commands::cmd_project(&problem(p)?, &process(q)?, &opts)?,
        Command::Check {
            problem: p,
            process: q,
            multiplier: r,
        } => commands::cmd_check(&problem(p)?, &process(q)?, &read_json::<MultiplierFile>(r)?, &opts)?,
        Command::Certify { problem: p, process: q } => commands::cmd_certify(&problem(p)?, &process(q)?, &opts)?,
    };
    if let (Some(path), Some(doc)) = (&f.out, &out.process) {
        write_file(path, &to_json(doc))?;
    }
    if let (Some(path), Some(doc)) = (&f.report, &out.report) {
        write_file(path, &to_json(doc))?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{}", if cli.flags.json { &out.json } else { &out.text });
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
