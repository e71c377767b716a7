use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use strongmin::cli::{self, AnalyzeFlags, CommandOutput, LinearizeFlags, VerifyFlags};
use strongmin::polyrat::StructureTag;

#[derive(Parser)]
#[command(name = "strongmin", version, about = "Strongly minimal linearizations of rational matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a certified linear system matrix for a problem file.
    Linearize {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Structure tag; overrides the one in the problem file.
        #[arg(long)]
        structure: Option<StructureTag>,
        /// Absolute rank threshold.
        #[arg(long)]
        tol: Option<f64>,
        /// Hankel block count for Laurent tails.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, env = "STRONGMIN_SEED")]
        seed: Option<u64>,
        /// Exit with status 3 when any numerical diagnostic is raised.
        #[arg(long)]
        strict: bool,
    },
    /// Re-certify a result file against its problem.
    Verify {
        #[arg(short, long)]
        result: PathBuf,
        #[arg(short, long)]
        problem: PathBuf,
    },
    /// Report structural data of a result file.
    Analyze {
        #[arg(short, long)]
        result: PathBuf,
        #[arg(long)]
        infinity: bool,
        #[arg(long)]
        eigs: bool,
        #[arg(long)]
        audit: bool,
    },
}

fn main() -> ExitCode {
    let out: CommandOutput = match Cli::parse().command {
        Command::Linearize {
            input,
            output,
            structure,
            tol,
            k,
            seed,
            strict,
        } => cli::cmd_linearize(&LinearizeFlags {
            input,
            output,
            structure,
            tol,
            k,
            seed,
            strict,
        }),
        Command::Verify { result, problem } => cli::cmd_verify(&VerifyFlags { result, problem }),
        Command::Analyze {
            result,
            infinity,
            eigs,
            audit,
        } => cli::cmd_analyze(&AnalyzeFlags {
            result,
            infinity,
            eigs,
            audit,
        }),
    };
    print!("{}", out.stdout);
    for line in &out.stderr {
        eprintln!("{line}");
    }
    ExitCode::from(out.code as u8)
}
