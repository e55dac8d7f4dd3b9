use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cournot_core::scenario::{
    compare_records, emit_scenario, load_record, load_scenario, presets, run_scenario, verify_record, Overrides,
};
use cournot_core::Error;

#[derive(Parser)]
#[command(name = "cournot", version, about = "Compute and certify Cournot-Nash equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario file or preset and write result artifacts.
    Solve {
        /// Preset name or path to a scenario file.
        scenario: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Re-run every check on a stored result file.
    Verify { result: PathBuf },
    /// Pairwise W1 distances between stored results.
    Compare {
        #[arg(num_args = 2.., required = true)]
        results: Vec<PathBuf>,
    },
    /// List built-in presets, or print one as scenario text.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct Flags {
    /// Directory for result artifacts (default: the scenario's out_dir, or `.`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    /// Number of grid cells for the one-dimensional solvers.
    #[arg(long)]
    grid: Option<usize>,
}

fn fail(e: Error) -> ExitCode {
    match e {
        Error::Config(issues) => {
            for i in issues {
                eprintln!("error: {i}");
            }
        }
        e => eprintln!("error: {e}"),
    }
    ExitCode::from(1)
}

fn solve(scenario: &str, f: Flags) -> Result<i32, Error> {
    let mut c = load_scenario(scenario)?;
    c.apply(&Overrides {
        seed: f.seed,
        tol: f.tol,
        max_iter: f.max_iter,
        damping: f.damping,
        grid: f.grid,
    })?;
    let (record, files) = run_scenario(&c, f.out_dir.as_deref())?;
    let r = &record.result;
    let cert = &record.certification;
    println!(
        "{}: {} after {} iterations, exploitability {:.3e}, certified {}",
        c.name,
        if r.converged { "converged" } else { "not converged" },
        r.iterations,
        cert.exploitability,
        cert.passed
    );
    if let Some(d) = &cert.duality {
        println!("  duality gap {:.3e}, max violation {:.3e}", d.gap, d.max_violation);
    }
    if let Some(k) = &cert.complementarity {
        println!(
            "  complementarity: support residual {:.3e}, lambda {}",
            k.max_violation_on_support, k.lambda
        );
    }
    if let Some(k) = &record.contraction {
        println!("  contraction ratio {:.4} (certified {})", k.ratio, k.certified);
    }
    for n in &r.notes {
        println!("  note: {n}");
    }
    for p in files {
        println!("  wrote {}", p.display());
    }
    Ok(record.exit_code())
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Solve { scenario, flags } => solve(&scenario, flags),
        Command::Verify { result } => {
            let report = verify_record(&load_record(&result)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.exit_code())
        }
        Command::Compare { results } => {
            let records = results
                .iter()
                .map(|p| Ok((p.display().to_string(), load_record(p)?)))
                .collect::<Result<Vec<_>, Error>>()?;
            let report = compare_records(&records)?;
            for (name, row) in report.names.iter().zip(&report.w1) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.3e}")).collect();
                println!("{name}\t{}", cells.join("\t"));
            }
            println!("max W1 {:.3e}", report.max_w1);
            Ok(0)
        }
        Command::Presets { name: None } => {
            for p in presets() {
                println!("{}", p.name);
            }
            Ok(0)
        }
        Command::Presets { name: Some(n) } => {
            let c = load_scenario(&n)?;
            print!("{}", emit_scenario(&c));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => fail(e),
    }
}
