use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dtlearn_cli::experiment::{run_experiment, Cell, ExperimentConfig, DEFAULT_GRID};
use dtlearn_cli::oracle::OracleSpec;
use dtlearn_cli::{execute, RunOptions};
use dtlearn_core::count::{approx_count, exact_count_projected, ApproxParams, CounterConfig, ExactCount};
use dtlearn_core::dimacs::parse_dimacs;
use dtlearn_core::learn::{LearnStatus, LearnerConfig, Stagnation};
use dtlearn_core::sat::SolverConfig;
use dtlearn_core::tree::TreeSpec;

#[derive(Parser)]
#[command(name = "dtlearn", version, about = "Learn a decision tree from membership queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn one hidden function.
    Learn(LearnArgs),
    /// Run the learner over a grid of shapes and random hidden trees.
    Experiment(ExperimentArgs),
    /// Count the projected models of a DIMACS file.
    Count(CountArgs),
}

#[derive(Args)]
struct CounterArgs {
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Counts below this are computed exactly (0 turns the exact path off).
    #[arg(long, default_value_t = 10_000)]
    exact_cap: u64,
    #[arg(long, default_value = "flat")]
    stagnation: Stagnation,
}

impl CounterArgs {
    fn learner(&self, seed: u64, max_rounds: Option<usize>) -> anyhow::Result<LearnerConfig> {
        if max_rounds == Some(0) {
            bail!("--max-rounds must be at least 1");
        }
        Ok(LearnerConfig {
            counter: CounterConfig {
                approx: ApproxParams::new(self.epsilon, self.delta)?,
                exact_cap: self.exact_cap,
                ..CounterConfig::default()
            },
            max_rounds,
            seed,
            stagnation: self.stagnation,
            ..LearnerConfig::default()
        })
    }
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    features: usize,
    #[arg(long)]
    depth: usize,
    /// random:<seed>, table:<path> or exec:<cmd>
    #[arg(long)]
    oracle: OracleSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    counter: CounterArgs,
    /// Defaults to 2^features.
    #[arg(long)]
    max_rounds: Option<usize>,
    /// JSONL log path.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Directory for round_<k>.cnf dumps.
    #[arg(long)]
    emit_dimacs: Option<PathBuf>,
    /// Record per-round wall-clock times in the log.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Comma-separated <n>x<d> cells.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<Cell>,
    /// Number of hidden trees per cell; seeds run from --first-seed upward.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[command(flatten)]
    counter: CounterArgs,
    #[arg(long, default_value = "experiment")]
    out: PathBuf,
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct CountArgs {
    file: PathBuf,
    /// Only run the exact counter.
    #[arg(long)]
    exact: bool,
    /// Largest count the exact counter is allowed to reach.
    #[arg(long, default_value_t = 1_000_000)]
    exact_cap: u64,
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn learn(args: LearnArgs) -> anyhow::Result<ExitCode> {
    let spec = TreeSpec::new(args.features, args.depth)?;
    let opts = RunOptions {
        spec,
        oracle: args.oracle,
        config: args.counter.learner(args.seed, args.max_rounds)?,
        log: args.log,
        emit_dimacs: args.emit_dimacs,
        timings: args.timings,
    };
    let outcome = execute(&opts)?;
    println!("status: {:?}", outcome.status);
    println!("queries: {}", outcome.queries());
    if let Some(tree) = &outcome.tree {
        println!("tree: {tree}");
        println!("truth table: {}", tree.truth_table().to_bitstring());
    }
    Ok(match outcome.status {
        LearnStatus::UniqueTree | LearnStatus::FunctionalCollapse => ExitCode::SUCCESS,
        LearnStatus::NoUniqueTree => ExitCode::from(2),
    })
}

fn experiment(args: ExperimentArgs) -> anyhow::Result<ExitCode> {
    let grid = if args.grid.is_empty() {
        DEFAULT_GRID.iter().map(|&(n, d)| TreeSpec::new(n, d)).collect::<Result<_, _>>()?
    } else {
        args.grid.iter().map(|c| c.0).collect()
    };
    let cfg = ExperimentConfig {
        grid,
        seeds: (args.first_seed..args.first_seed + args.seeds).collect(),
        learner: args.counter.learner(0, None)?,
        out_dir: args.out,
        timings: args.timings,
    };
    let rows = run_experiment(&cfg)?;
    let failed = rows.iter().filter(|r| !r.correct).count();
    println!(
        "{} runs, {} correct, summary in {}",
        rows.len(),
        rows.len() - failed,
        cfg.out_dir.join("summary.csv").display()
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn count(args: CountArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let formula = parse_dimacs(&text).with_context(|| format!("parsing {}", args.file.display()))?;
    if formula.projection().is_empty() {
        bail!("{} has no `c ind` projection lines", args.file.display());
    }
    if args.exact {
        match exact_count_projected(&formula, args.exact_cap, None)? {
            ExactCount::Count(c) => println!("exact: {c}"),
            ExactCount::Overflow(cap) => bail!("count reaches the cap of {cap}"),
        }
        return Ok(ExitCode::SUCCESS);
    }
    let params = ApproxParams::new(args.epsilon, args.delta)?;
    let est = approx_count(&formula, params, args.seed, &SolverConfig::default())?;
    println!(
        "estimate: {est} ({}) epsilon={} delta={} seed={}",
        if est.exact { "exact" } else { "approximate" },
        params.epsilon,
        params.delta,
        args.seed
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Learn(a) => learn(a),
        Command::Experiment(a) => experiment(a),
        Command::Count(a) => count(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
