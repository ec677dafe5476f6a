use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vmfdiff::forward::ForwardMode;
use vmfdiff::schedule::ScheduleShape;
use vmfdiff_cli::chains::with_threads;
use vmfdiff_cli::commands::{self, RunArgs};
use vmfdiff_cli::Result;

#[derive(Parser)]
#[command(name = "vmfdiff", version, about = "Hyperspherical vMF diffusion experiments")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `baseline.enabled`.
    #[arg(long, value_enum)]
    baseline: Option<Switch>,
}

impl From<ConfigArgs> for RunArgs {
    fn from(a: ConfigArgs) -> Self {
        RunArgs {
            config: a.config,
            seed: a.seed,
            out: a.out,
            baseline: a.baseline.map(|s| matches!(s, Switch::On)),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw from vMF(e_0, kappa) and compare the resultant length with A_d(kappa).
    SampleVmf {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// CSV file for the draws.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run forward chains from a fixed point and test terminal uniformity.
    Forward {
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value = "linear")]
        shape: ScheduleShape,
        #[arg(long, default_value = "angular")]
        mode: ForwardMode,
        #[arg(long, default_value_t = 10_000)]
        chains: usize,
        #[arg(long)]
        seed: u64,
        /// CSV file for per-step statistics.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample every class with the reverse process and write the draws as CSV.
    Reverse(ConfigArgs),
    /// Train the score network on the configured data.
    Train(ConfigArgs),
    /// Score a sample CSV against class cones fitted on a reference CSV.
    Metrics {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value_t = vmfdiff::metrics::DEFAULT_PERCENTILE)]
        percentile: f64,
        #[arg(long, default_value_t = vmfdiff::metrics::DEFAULT_BINS)]
        bins: usize,
        /// JSON file for the metric report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the coverage and separation bounds on their grids.
    VerifyBounds {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Full pipeline: data, class cones, vMF sampling, Gaussian baseline, report.
    Run(ConfigArgs),
    /// Scheduled against constant concentration.
    AblateSchedule {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,30,40,60,100")]
        constants: Vec<f64>,
    },
}

fn dispatch(cmd: Command, threads: Option<usize>) -> Result<String> {
    match cmd {
        Command::SampleVmf {
            dim,
            kappa,
            n,
            seed,
            out,
        } => commands::sample_vmf_cmd(dim, kappa, n, seed, out.as_deref()),
        Command::Forward {
            dim,
            steps,
            shape,
            mode,
            chains,
            seed,
            out,
        } => commands::forward_cmd(dim, steps, shape, mode, chains, seed, out.as_deref()),
        Command::Reverse(a) => commands::reverse(&a.into()),
        Command::Train(a) => commands::train(&a.into()),
        Command::Metrics {
            reference,
            samples,
            normalize,
            percentile,
            bins,
            out,
        } => commands::metrics_cmd(&reference, &samples, normalize, percentile, bins, out.as_deref()),
        Command::VerifyBounds { seed, n, out } => commands::verify_bounds(seed, n, &out),
        Command::Run(a) => commands::run(&a.into(), threads),
        Command::AblateSchedule { args, constants } => commands::ablate(&args.into(), &constants),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match with_threads(threads, move || dispatch(cli.command, threads)).and_then(|r| r) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
