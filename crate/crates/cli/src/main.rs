use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ssdual::{Direction, Tolerances};
use ssdual_cli::{execute, CliError, Command, RunConfig};

/// Möbius monotonicity, strong stationary duals and convergence bounds for
/// Markov chains on partially ordered state spaces.
#[derive(Debug, Parser)]
#[command(name = "ssdual", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// Spec file (TOML).
    #[arg(short, long)]
    input: PathBuf,

    /// Artifact path; defaults to `$SSDUAL_OUTPUT_DIR/<stem>.<command>.<ext>`,
    /// or stdout when that is unset.
    #[arg(short, long)]
    output: Option<PathBuf>,

    #[arg(long, env = "SSDUAL_OUTPUT_DIR", hide_env_values = true)]
    output_dir: Option<PathBuf>,

    /// Last step of separation and absorption curves.
    #[arg(long)]
    horizon: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Monte Carlo sample count.
    #[arg(long, default_value_t = ssdual_cli::run::DEFAULT_SAMPLES)]
    samples: usize,

    /// Row-sum tolerance for transition matrices.
    #[arg(long, default_value_t = Tolerances::default().row)]
    tolerance_row: f64,

    /// Sign tolerance for the monotonicity checks.
    #[arg(long, default_value_t = Tolerances::default().mono)]
    tolerance_mono: f64,

    /// Re-check near-boundary Möbius verdicts in rational arithmetic.
    #[arg(long)]
    exact: bool,

    /// Uniformization rate as a multiple of the largest exit rate.
    #[arg(long)]
    multiplier: Option<f64>,

    #[arg(long, value_parser = ["down", "up"], default_value = "down")]
    direction: String,
}

impl Cli {
    fn config(self) -> RunConfig {
        RunConfig {
            command: self.command,
            input: self.input,
            output: self.output,
            output_dir: self.output_dir,
            tol: Tolerances {
                row: self.tolerance_row,
                mono: self.tolerance_mono,
                ..Tolerances::default()
            },
            horizon: self.horizon,
            seed: self.seed,
            samples: self.samples,
            exact: self.exact,
            multiplier: self.multiplier,
            direction: self.direction.parse::<Direction>().expect("validated by clap"),
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprint!("{}", e.to_block());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help, --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    match execute(&cli.config()) {
        Ok((_, None)) => ExitCode::SUCCESS,
        Ok((_, Some(failure))) => fail(&failure),
        Err(e) => fail(&e),
    }
}
