use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use jeffrey::cli::{cmd_estimate, cmd_simulate, cmd_verify, RunConfig, Theta0Source};
use jeffrey::em::StopCriteria;

/// Estimate the input distribution of a discrete channel from observed
/// output frequencies, with certified monotone-KL convergence.
#[derive(Parser)]
#[command(name = "jeffrey", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the input distribution from observations
    #[command(group(ArgGroup::new("observations").required(true).args(["tau", "samples"])))]
    Estimate {
        /// Channel matrix file: JSON {"n","m","rows"} or CSV rows
        #[arg(long)]
        channel: PathBuf,
        /// Observed output distribution (JSON array)
        #[arg(long)]
        tau: Option<PathBuf>,
        /// Raw observed output indices, one per line (tabulated internally)
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Initial estimate: "uniform" or a JSON array file
        #[arg(long, default_value = "uniform")]
        theta0: String,
        /// Iteration budget
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        /// Stop when successive estimates move at most this far in L1
        /// (0 disables this criterion)
        #[arg(long, default_value_t = 1e-10)]
        theta_tol: f64,
        /// Stop when a step gains at most this much log-likelihood
        /// (0 disables this criterion)
        #[arg(long, default_value_t = 1e-12)]
        delta_l_tol: f64,
        /// Output directory for trace and reports
        #[arg(long)]
        out: PathBuf,
        /// Also write plot_data.csv (iteration, kl, log_lik)
        #[arg(long)]
        plot_data: bool,
    },
    /// Sample synthetic observations from a known input distribution
    Simulate {
        /// Channel matrix file: JSON {"n","m","rows"} or CSV rows
        #[arg(long)]
        channel: PathBuf,
        /// Ground-truth input distribution (JSON array)
        #[arg(long)]
        true_theta: PathBuf,
        /// Number of samples
        #[arg(short, long)]
        n: usize,
        /// Random seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for run.json and observations.txt
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check the monotonicity certificate on a written trace
    Verify {
        /// trace.jsonl produced by estimate
        trace: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Estimate {
            channel,
            tau,
            samples,
            theta0,
            max_iters,
            theta_tol,
            delta_l_tol,
            out,
            plot_data,
        } => {
            let config = RunConfig {
                channel_path: channel,
                tau_path: tau,
                samples_path: samples,
                theta0: if theta0 == "uniform" {
                    Theta0Source::Uniform
                } else {
                    Theta0Source::File(PathBuf::from(theta0))
                },
                stop: StopCriteria {
                    max_iterations: max_iters,
                    theta_l1_tol: theta_tol,
                    delta_l_tol,
                },
                output_dir: out,
                seed: None,
                emit_plot_data: plot_data,
            };
            cmd_estimate(&config)
        }
        Command::Simulate {
            channel,
            true_theta,
            n,
            seed,
            out,
        } => {
            let config = RunConfig {
                channel_path: channel,
                tau_path: None,
                samples_path: None,
                theta0: Theta0Source::Uniform,
                stop: StopCriteria::default(),
                output_dir: out,
                seed: Some(seed),
                emit_plot_data: false,
            };
            cmd_simulate(&config, &true_theta, n).map(|()| true)
        }
        Command::Verify { trace } => cmd_verify(&trace),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
