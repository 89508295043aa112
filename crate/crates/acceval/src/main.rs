use std::path::PathBuf;
use std::process::ExitCode;

use acceval::config::{FamilyChoice, RunConfig};
use acceval::{cmd_ce, cmd_eval, cmd_fit, cmd_synth, AppError, Outcome};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "acceval",
    version,
    about = "Accelerated rare-event evaluation of cut-in scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw events from the synthetic ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Number of events.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Fit the piecewise model to an event CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Tune importance-sampling proposals with the cross-entropy method.
    Ce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        family: Option<FamilyChoice>,
        /// Samples per iteration.
        #[arg(long)]
        ce_n: Option<usize>,
        #[arg(long)]
        pi_floor: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Estimate the crash probability with a proposal.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        proposal: Option<PathBuf>,
        /// Second proposal run on the same seed.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        min_samples: Option<u64>,
        #[arg(long)]
        max_samples: Option<u64>,
        /// Also run crude Monte Carlo.
        #[arg(long)]
        crude: bool,
        /// Relaxation level of the crude run (0 = crash).
        #[arg(long)]
        crude_level: Option<f64>,
    },
}

fn base_config(common: &Common) -> Result<RunConfig, AppError> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        c.out = o.clone();
    }
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if common.workers.is_some() {
        c.workers = common.workers;
    }
    Ok(c)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<Outcome, AppError> {
    match cli.command {
        Command::Synth { common, count } => {
            let mut c = base_config(&common)?;
            set(&mut c.count, count);
            cmd_synth(&c)
        }
        Command::Fit { common, events } => {
            let mut c = base_config(&common)?;
            if events.is_some() {
                c.events = events;
            }
            cmd_fit(&c)
        }
        Command::Ce {
            common,
            model,
            family,
            ce_n,
            pi_floor,
            max_iterations,
        } => {
            let mut c = base_config(&common)?;
            if model.is_some() {
                c.model = model;
            }
            set(&mut c.ce.family, family);
            set(&mut c.ce.sample_size, ce_n);
            set(&mut c.ce.pi_floor, pi_floor);
            set(&mut c.ce.max_iterations, max_iterations);
            cmd_ce(&c)
        }
        Command::Eval {
            common,
            model,
            proposal,
            compare,
            alpha,
            beta,
            min_samples,
            max_samples,
            crude,
            crude_level,
        } => {
            let mut c = base_config(&common)?;
            if model.is_some() {
                c.model = model;
            }
            if proposal.is_some() {
                c.proposal = proposal;
            }
            if compare.is_some() {
                c.compare = compare;
            }
            set(&mut c.eval.alpha, alpha);
            set(&mut c.eval.beta, beta);
            set(&mut c.eval.min_samples, min_samples);
            set(&mut c.eval.max_samples, max_samples);
            c.eval.crude |= crude;
            set(&mut c.eval.crude_level, crude_level);
            cmd_eval(&c)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("  {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
