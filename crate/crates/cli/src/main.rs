use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lqgame_cli::{cmd_compare, cmd_figures, cmd_solve, cmd_steady, cmd_verify, Options, ProfileChoice};

const EXIT_CODES: &str = "Exit codes: 0 success, 1 validation failure (bad or inconsistent model), \
2 solver or convergence failure, 3 verification failure (a gated check did not hold).";

/// Nash equilibria of two-player LQG games with one-step-delayed asymmetric information.
#[derive(Parser)]
#[command(version, after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-horizon solve; writes riccati.csv, covariances.csv, gains.csv, costs.csv.
    #[command(after_help = EXIT_CODES)]
    Solve(Common),
    /// Steady-state gains and covariances; writes steady.csv.
    #[command(after_help = EXIT_CODES)]
    Steady {
        #[command(flatten)]
        common: Common,
        /// Relative Frobenius change at which the fixed-point iteration stops.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Iteration cap for the fixed-point iteration.
        #[arg(long = "max-iter", default_value_t = 2000)]
        max_iter: usize,
    },
    /// Costs under both information structures; writes table1.csv and gap.csv.
    #[command(after_help = EXIT_CODES)]
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: MonteCarlo,
    },
    /// Property suite; writes verify.csv and certificate.csv.
    #[command(after_help = EXIT_CODES)]
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: MonteCarlo,
    },
    /// Plottable series; writes fig_riccati1.csv, fig_riccati2.csv, fig_gains.csv,
    /// fig_trajectory.csv, fig_sigma_trace.csv.
    #[command(after_help = EXIT_CODES)]
    Figures {
        #[command(flatten)]
        common: Common,
        /// Seed of the simulated trajectory.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// Model file (JSON). Defaults to the built-in two-state example.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the horizon N of the model file.
    #[arg(long)]
    horizon: Option<usize>,
    /// Strategy profile used for gains, simulation and certification.
    #[arg(long, value_enum, default_value_t = Profile::Nash)]
    profile: Profile,
}

#[derive(Args)]
struct MonteCarlo {
    /// Number of Monte Carlo runs M.
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    /// Base seed; run r draws from stream r of this seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Asymmetric-information equilibrium gains.
    Nash,
    /// Both players feed back on estimator 2.
    Symmetric,
    /// All gains zero (a deliberate non-equilibrium).
    Zero,
}

impl Common {
    fn options(self) -> Options {
        Options {
            config: self.config,
            out: self.out,
            horizon: self.horizon,
            profile: match self.profile {
                Profile::Nash => ProfileChoice::Nash,
                Profile::Symmetric => ProfileChoice::Symmetric,
                Profile::Zero => ProfileChoice::Zero,
            },
            ..Options::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(c) => cmd_solve(&c.options()),
        Command::Steady { common, tol, max_iter } => cmd_steady(&Options {
            tol,
            max_iter,
            ..common.options()
        }),
        Command::Compare { common, mc } => cmd_compare(&Options {
            runs: mc.runs,
            seed: mc.seed,
            ..common.options()
        }),
        Command::Verify { common, mc } => cmd_verify(&Options {
            runs: mc.runs,
            seed: mc.seed,
            ..common.options()
        }),
        Command::Figures { common, seed } => cmd_figures(&Options {
            seed,
            ..common.options()
        }),
    };
    if outcome.exit_code == 0 {
        print!("{}", outcome.summary);
    } else {
        eprint!("{}", outcome.summary);
    }
    for a in &outcome.artifacts {
        println!("wrote {}", a.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}
