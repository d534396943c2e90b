use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdcbf::sim::ControllerKind;
use sdcbf_cli::{
    describe_run, is_config_error, load_config, run_to_dir, sweep, validate, Axis, Overrides, EXIT_CONFIG, EXIT_FAILURE,
    EXIT_OK,
};

/// Sampled-data CBF safety filters with rigorous margins.
///
/// Exit codes: 0 success, 2 configuration error, 3 safety violation,
/// infeasible filter step or refused start for a non-naive controller.
#[derive(Parser)]
#[command(name = "sdcbf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write trajectory.csv, steps.csv, summary.json
    /// and timing.json.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "usdcbf")]
        controller: ControllerKind,
        /// Output directory; defaults to runs/<scenario>-<controller>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario without simulating it.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Run every value of one axis against each controller and write
    /// comparison.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// eps-x, eps-u, rate, seed, taylor-order or pop-budget.
        #[arg(long)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["naive", "usdcbf"])]
        controllers: Vec<ControllerKind>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "eps-x")]
    eps_x: Option<f64>,
    #[arg(long = "eps-u")]
    eps_u: Option<f64>,
    /// Control rate in Hz; replaces the sampling interval.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long = "taylor-order")]
    taylor_order: Option<u32>,
    /// Node budget of the margin branch and bound.
    #[arg(long = "pop-budget")]
    pop_budget: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            eps_x: self.eps_x,
            eps_u: self.eps_u,
            rate: self.rate,
            taylor_order: self.taylor_order,
            pop_budget: self.pop_budget,
        }
    }
}

fn fail(e: &sdcbf::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if is_config_error(e) { EXIT_CONFIG } else { EXIT_FAILURE } as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common, controller, out } => {
            let cfg = match load_config(&common.scenario, &common.overrides()).and_then(|c| c.compile::<f64>().map(|_| c)) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{}", cfg.name, controller)));
            match run_to_dir(&cfg, controller, &out) {
                Ok(r) => {
                    println!("{}", describe_run(&r));
                    ExitCode::from(if r.failed() { EXIT_FAILURE } else { EXIT_OK } as u8)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { common } => {
            let rep = validate(&common.scenario, &common.overrides());
            println!("{rep}");
            ExitCode::from(if rep.ok() { EXIT_OK } else { EXIT_CONFIG } as u8)
        }
        Command::Sweep { common, axis, values, controllers, out, workers } => {
            let cfg = match load_config(&common.scenario, &common.overrides()) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            match sweep(&cfg, axis, &values, &controllers, &out, workers) {
                Ok(results) => {
                    for r in &results {
                        match &r.outcome {
                            Ok(o) => println!("{}", describe_run(o)),
                            Err(msg) => println!("{} / {} at {} = {}: {msg}", cfg.name, r.cell.kind, axis, r.cell.value),
                        }
                    }
                    println!("comparison: {}", out.join("comparison.csv").display());
                    let failed = results.iter().any(|r| r.failed());
                    ExitCode::from(if failed { EXIT_FAILURE } else { EXIT_OK } as u8)
                }
                Err(e) => fail(&e),
            }
        }
    }
}
