use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kahler::cli::{cmd_oracle, cmd_solve, cmd_verify, summary_path, summary_table, OracleRequest};

#[derive(Parser)]
#[command(name = "kahler", version, about = "Invariant Kähler metrics via Weyl-invariant Monge-Ampère solves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the regularized sequence described by a JSON config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a run artifact at sampled chamber points and write a CSV report.
    Verify {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate a closed-form solution: su2, heisenberg or canonical.
    Oracle {
        name: String,
        #[arg(long, default_value_t = 3.0)]
        tmax: f64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value = "ricci-flat")]
        f: String,
        #[arg(long, default_value = "A1")]
        group: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> kahler::Result<()> {
    match cli.command {
        Command::Solve { config, out } => {
            let artifact = cmd_solve(&config, &out)?;
            print!("{}", summary_table(&artifact));
            println!("wrote {}", out.display());
        }
        Command::Verify { artifact, samples, out } => {
            let s = cmd_verify(&artifact, samples, &out)?;
            println!("samples                 {}", s.samples);
            println!("median defect           {:.12e}", s.median_defect);
            println!("max defect deviation    {:.3e}", s.max_defect_deviation);
            println!("max invariance residual {:.3e}", s.max_invariance_residual);
            println!("positivity failures     {}", s.positivity_failures);
            println!("closedness residual     {:.3e}", s.closedness_residual);
            println!("proper on sampled rays  {}", s.proper);
            println!("wrote {} and {}", out.display(), summary_path(&out).display());
        }
        Command::Oracle { name, tmax, samples, n, f, group, seed, out } => {
            let req = OracleRequest { name, tmax, samples, n, f, group, seed };
            let rows = cmd_oracle(&req, &out)?;
            println!("wrote {rows} rows to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
