use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use saga_cli::commands::{cmd_evaluate, cmd_factorize, cmd_groups, cmd_recommend};
use saga_cli::config::{
    default_gamma_grid, default_lambda_grid, parse_group_kind, Algorithm, ExperimentConfig,
    InputFormat,
};
use saga_cli::pipeline::{run_experiment, AlgoRun};
use saga_core::evaluation::GroupKind;

#[derive(Parser)]
#[command(
    name = "saga",
    about = "Group recommendation by submodular consensus maximization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full offline experiment: filter, repeated holdout,
    /// factorization, group formation, recommendation, metrics.
    Run(RunArgs),
    /// One repetition's holdout split and factorization.
    Factorize(FactorizeArgs),
    /// Form one batch of groups for a repetition.
    Groups(GroupsArgs),
    /// Recommend for saved groups under one algorithm.
    Recommend(RecommendArgs),
    /// Score saved recommendations.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Dataset path.
    #[arg(long)]
    input: PathBuf,
    /// Dataset format: movielens-dat or csv.
    #[arg(long, default_value = "movielens-dat")]
    format: InputFormat,
    /// Keep only users with at least this many ratings.
    #[arg(long, default_value_t = 100)]
    min_ratings: usize,
}

#[derive(Args)]
struct FactorArgs {
    /// Latent feature dimension.
    #[arg(long, default_value_t = 150)]
    d: usize,
    /// L2 regularization weight.
    #[arg(long, default_value_t = 0.1)]
    reg: f64,
    /// Maximum alternations.
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Relative objective-improvement stopping tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct MetricArgs {
    /// PSR popularity exponent.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Minimum rating counted as relevant.
    #[arg(long, default_value_t = 4.0)]
    relevance_threshold: f64,
    /// DCG discount log base.
    #[arg(long, default_value_t = 2.0)]
    dcg_log_base: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Fraction of the item set held out as test.
    #[arg(long, default_value_t = 0.30)]
    holdout_frac: f64,
    /// Number of holdout repetitions.
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[command(flatten)]
    factor: FactorArgs,
    /// RBF bandwidths swept for the consensus variants.
    #[arg(long, value_delimiter = ',', default_values_t = default_gamma_grid())]
    gamma_grid: Vec<f64>,
    /// Trade-off values swept for fm.
    #[arg(long, value_delimiter = ',', default_values_t = default_lambda_grid())]
    lambda_grid: Vec<f64>,
    /// Group kinds to form: random, similar.
    #[arg(long, value_delimiter = ',', value_parser = parse_group_kind,
          default_values = ["random", "similar"])]
    group_kind: Vec<GroupKind>,
    /// Group sizes to form.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 6, 8])]
    group_size: Vec<usize>,
    /// Uniform group count override (default: per-kind/size table).
    #[arg(long)]
    group_count: Option<usize>,
    /// Pairwise cosine threshold for similar groups.
    #[arg(long, default_value_t = 0.60)]
    sim_threshold: f64,
    /// Candidate draws allowed per similar group.
    #[arg(long, default_value_t = 1000)]
    retry_budget: usize,
    /// Recommendation list sizes to score.
    #[arg(long = "k", value_delimiter = ',',
          default_values_t = [1usize, 2, 3, 4, 5, 6, 7, 8, 9, 10])]
    k_list: Vec<usize>,
    /// Algorithms to run.
    #[arg(long = "algo", value_delimiter = ',',
          default_values = ["saga-linear", "saga-concave", "am", "fm"])]
    algorithms: Vec<Algorithm>,
    #[command(flatten)]
    metrics: MetricArgs,
    /// Master seed; every stage derives its own sub-seed from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RunArgs {
    fn into_config(self) -> ExperimentConfig {
        ExperimentConfig {
            input: self.data.input,
            format: self.data.format,
            out: self.out,
            min_ratings: self.data.min_ratings,
            holdout_frac: self.holdout_frac,
            repetitions: self.repetitions,
            d: self.factor.d,
            reg: self.factor.reg,
            max_iters: self.factor.max_iters,
            tol: self.factor.tol,
            gamma_grid: self.gamma_grid,
            lambda_grid: self.lambda_grid,
            group_kinds: self.group_kind,
            group_sizes: self.group_size,
            group_count: self.group_count,
            sim_threshold: self.sim_threshold,
            retry_budget: self.retry_budget,
            k_list: self.k_list,
            algorithms: self.algorithms,
            beta: self.metrics.beta,
            relevance_threshold: self.metrics.relevance_threshold,
            dcg_log_base: self.metrics.dcg_log_base,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct FactorizeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Repetition index (drives the derived seeds).
    #[arg(long, default_value_t = 0)]
    rep: usize,
    /// Fraction of the item set held out as test.
    #[arg(long, default_value_t = 0.30)]
    holdout_frac: f64,
    #[command(flatten)]
    factor: FactorArgs,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GroupsArgs {
    /// Output directory holding the factorize artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Repetition index.
    #[arg(long, default_value_t = 0)]
    rep: usize,
    /// Group kind: random or similar.
    #[arg(long, value_parser = parse_group_kind)]
    group_kind: GroupKind,
    /// Group size.
    #[arg(long)]
    group_size: usize,
    /// Number of groups to draw (default: per-kind/size table).
    #[arg(long)]
    group_count: Option<usize>,
    /// Pairwise cosine threshold for similar groups.
    #[arg(long, default_value_t = 0.60)]
    sim_threshold: f64,
    /// Candidate draws allowed per similar group.
    #[arg(long, default_value_t = 1000)]
    retry_budget: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AlgoArgs {
    /// Algorithm to run.
    #[arg(long)]
    algo: Algorithm,
    /// RBF bandwidth (consensus variants).
    #[arg(long)]
    gamma: Option<f64>,
    /// Relevance/disagreement trade-off (fm).
    #[arg(long)]
    lambda: Option<f64>,
}

impl AlgoArgs {
    fn into_run(self) -> Result<AlgoRun> {
        let param = match self.algo {
            Algorithm::SagaLinear | Algorithm::SagaConcave => Some(
                self.gamma
                    .ok_or_else(|| anyhow::anyhow!("{} requires --gamma", self.algo))?,
            ),
            Algorithm::Fm => Some(self.lambda.unwrap_or(0.5)),
            _ => None,
        };
        Ok(AlgoRun {
            algo: self.algo,
            param,
        })
    }
}

#[derive(Args)]
struct RecommendArgs {
    /// Output directory holding earlier stage artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Repetition index.
    #[arg(long, default_value_t = 0)]
    rep: usize,
    /// Group kind the groups file was formed with.
    #[arg(long, value_parser = parse_group_kind)]
    group_kind: GroupKind,
    /// Group size the groups file was formed with.
    #[arg(long)]
    group_size: usize,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Recommendation list length.
    #[arg(long = "k", default_value_t = 10)]
    k: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Output directory holding earlier stage artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Repetition index.
    #[arg(long, default_value_t = 0)]
    rep: usize,
    /// Group kind the recommendations were made for.
    #[arg(long, value_parser = parse_group_kind)]
    group_kind: GroupKind,
    /// Group size the recommendations were made for.
    #[arg(long)]
    group_size: usize,
    #[command(flatten)]
    algo: AlgoArgs,
    /// List lengths to score (prefixes of the saved recommendation).
    #[arg(long = "k", value_delimiter = ',', default_values_t = [5usize])]
    k_list: Vec<usize>,
    #[command(flatten)]
    metrics: MetricArgs,
    /// Where to write the metric rows (default: next to the recs file).
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

/// Stage commands reuse the experiment config shape; fields a stage does
/// not use keep their defaults.
fn stage_config(out: PathBuf, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(PathBuf::new(), InputFormat::Csv, out);
    cfg.seed = seed;
    cfg
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = args.into_config();
            let output = run_experiment(&cfg)?;
            if output.malformed > 0 {
                println!("skipped {} malformed lines", output.malformed);
            }
            if output.group_failures > 0 {
                println!(
                    "warning: {} group slots abandoned after the retry budget",
                    output.group_failures
                );
            }
            for (rep, cause) in &output.aborted {
                println!("warning: repetition {rep} aborted ({cause}); metrics.csv is partial");
            }
            println!(
                "wrote {} metric rows to {}",
                output.rows.len(),
                cfg.out.join("metrics.csv").display()
            );
            println!(
                "best-parameter summary: {}",
                cfg.out.join("summary.csv").display()
            );
        }
        Command::Factorize(args) => {
            let mut cfg = ExperimentConfig::new(args.data.input, args.data.format, args.out);
            cfg.min_ratings = args.data.min_ratings;
            cfg.holdout_frac = args.holdout_frac;
            cfg.d = args.factor.d;
            cfg.reg = args.factor.reg;
            cfg.max_iters = args.factor.max_iters;
            cfg.tol = args.factor.tol;
            cfg.seed = args.seed;
            cmd_factorize(&cfg, args.rep)?;
        }
        Command::Groups(args) => {
            let mut cfg = stage_config(args.out, args.seed);
            cfg.group_count = args.group_count;
            cfg.sim_threshold = args.sim_threshold;
            cfg.retry_budget = args.retry_budget;
            cmd_groups(&cfg, args.rep, args.group_kind, args.group_size)?;
        }
        Command::Recommend(args) => {
            // recommending from saved artifacts involves no randomness
            let cfg = stage_config(args.out, 0);
            let run = args.algo.into_run()?;
            cmd_recommend(&cfg, args.rep, args.group_kind, args.group_size, run, args.k)?;
        }
        Command::Evaluate(args) => {
            let mut cfg = stage_config(args.out.clone(), 0);
            cfg.k_list = args.k_list.clone();
            cfg.beta = args.metrics.beta;
            cfg.relevance_threshold = args.metrics.relevance_threshold;
            cfg.dcg_log_base = args.metrics.dcg_log_base;
            let run = args.algo.into_run()?;
            cmd_evaluate(
                &cfg,
                args.rep,
                args.group_kind,
                args.group_size,
                run,
                args.metrics_out,
            )?;
        }
    }
    Ok(())
}
