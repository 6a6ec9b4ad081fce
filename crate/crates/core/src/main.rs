use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ecomp::energy::{power_region_boundary, Efficiency};
use ecomp::harness::{emit_results, run_scenario, scenario_profile, write_results, Format, Scenario};
use ecomp::Error;

#[derive(Parser)]
#[command(name = "ecomp", version, about = "Sum-rate experiments for energy-cooperating CoMP clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write one row per (sweep point, scheme, beta).
    Run {
        scenario: PathBuf,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: Format,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of channel realizations.
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Print the boundary of the two-BS power region as CSV.
    Region {
        /// Budgets `E1,E2`.
        #[arg(long, value_delimiter = ',')]
        budgets: Vec<f64>,
        #[arg(long)]
        beta: f64,
        /// Points per branch of the boundary.
        #[arg(long, default_value_t = 11)]
        samples: usize,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit code 1 for problems with the inputs, 2 for failures while running.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Validation(_) | Error::InvalidInput(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            format,
            seed,
            realizations,
        } => {
            let mut scn = Scenario::load(&scenario)?;
            if let Some(s) = seed {
                scn.seed = s;
            }
            if let Some(r) = realizations {
                scn.realizations = r;
            }
            scn.validate()?;
            let profile = scenario_profile(&scn)?;
            let table = run_scenario(&scn, profile.as_ref())?;
            let failed: usize = table.rows.iter().map(|r| r.failures).sum();
            if failed > 0 {
                eprintln!("warning: {failed} solves failed; see the failures column");
            }
            match out {
                Some(path) => emit_results(&table, &path, format),
                None => write_results(&table, std::io::stdout().lock(), format),
            }
        }
        Command::Region { budgets, beta, samples } => {
            if budgets.len() != 2 {
                return Err(Error::InvalidInput(format!(
                    "--budgets takes two values, got {}",
                    budgets.len()
                )));
            }
            let eff = Efficiency::uniform(2, beta)?;
            let points = power_region_boundary(&budgets, &eff, samples)?;
            let mut out = std::io::stdout().lock();
            let io = |e| Error::io("<stdout>", e);
            writeln!(out, "p1,p2").map_err(io)?;
            for [p1, p2] in points {
                writeln!(out, "{},{}", ecomp::harness::emit::sig9(p1), ecomp::harness::emit::sig9(p2)).map_err(io)?;
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let scn = Scenario::load(&scenario)?;
            if let Some(p) = scenario_profile(&scn)? {
                println!("ok: {} ({} profile samples)", scenario.display(), p.len());
            } else {
                println!("ok: {}", scenario.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
