use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jetmech_cli::{catalog, parse_scenario, refine, run, write_refine, write_run, Scenario};

#[derive(Parser)]
#[command(name = "jetmech", version, about = "Simulate scenarios and check their balance identities")]
struct Cli {
    /// Directory for CSV artifacts; overrides `output.dir` in the scenario.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario once and report every diagnostic.
    Run { scenario: PathBuf },
    /// Rerun with the step (or grid spacing) halved per level and report residual ratios.
    Refine {
        scenario: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u16).range(2..))]
        levels: u16,
    },
    /// List the force, torque and momentum laws.
    Catalog,
}

const FAIL: u8 = 1;
const INVALID: u8 = 2;

fn load(path: &Path) -> Result<Scenario, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(INVALID)
    })?;
    parse_scenario(&text).map_err(|errors| {
        eprint!("{}: {errors}", path.display());
        ExitCode::from(INVALID)
    })
}

fn status(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(FAIL)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (path, levels) = match cli.command {
        Command::Catalog => {
            print!("{}", catalog::describe());
            return ExitCode::SUCCESS;
        }
        Command::Run { scenario } => (scenario, None),
        Command::Refine { scenario, levels } => (scenario, Some(levels as usize)),
    };
    let scenario = match load(&path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let out = cli.out.or_else(|| scenario.output_dir.clone());
    let result = match levels {
        None => run(&scenario).map(|output| {
            print!("{}", output.report.summary());
            let written = out.as_deref().map(|dir| write_run(dir, &output.report, &output.tables));
            (output.report.passed(), written)
        }),
        Some(levels) => refine(&scenario, levels).map(|report| {
            print!("{}", report.summary());
            let written = out.as_deref().map(|dir| write_refine(dir, &report));
            (report.passed(), written)
        }),
    };
    match result {
        Ok((passed, written)) => {
            if let Some(Err(e)) = written {
                eprintln!("writing {}: {e}", out.unwrap_or_default().display());
                return ExitCode::from(FAIL);
            }
            status(passed)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(FAIL)
        }
    }
}
