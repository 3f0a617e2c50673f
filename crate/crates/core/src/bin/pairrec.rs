use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pairrec::harness::{emit, run_experiment, ExperimentConfig, ExperimentKind, Format, RatioAggregation};
use pairrec::solver::InitKind;
use pairrec::weights::WeightScheme;
use pairrec::Error;

/// Dynamic skew-symmetric recovery experiments.
#[derive(Parser)]
#[command(name = "pairrec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean relative error versus drift level per weight scheme.
    SyntheticError(Flags),
    /// Minimal sampling rate for successful recovery versus drift level.
    SyntheticRatio(Flags),
    /// Sample-complexity and error-bound curves over T and drift level.
    RhsSweep(Flags),
    /// Price-guessing game recovered with assumed drift levels.
    Game(Flags),
    /// Transitive cell-count model with integer drift.
    Cells(Flags),
    /// Housing comparisons versus number of measurements.
    Housing(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, alias = "r")]
    rank: Option<usize>,
    /// Time steps (days for the game).
    #[arg(long, alias = "days")]
    horizon: Option<usize>,
    #[arg(long)]
    sigma1: Option<f64>,
    /// Single true drift level.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Drift levels; assumed levels for game and housing.
    #[arg(long, value_delimiter = ',')]
    sigma2_grid: Option<Vec<f64>>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    /// Measurements per step; overrides --p.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    m_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Weight schemes: equal, last, optimal, optimal-na.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<String>>,
    #[arg(long)]
    assumed_sigma2: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    assumed_sigma2_grid: Option<Vec<f64>>,
    /// Spikiness bound used by the `optimal` scheme and the bounds.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Success threshold on the squared relative error.
    #[arg(long)]
    threshold: Option<f64>,
    /// per-trial-min or success-rate.
    #[arg(long)]
    aggregation: Option<String>,
    /// spectral or random.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    games_per_day: Option<usize>,
    /// Standard deviation of the daily Beta-parameter drift.
    #[arg(long)]
    drift: Option<f64>,
    #[arg(long)]
    ground_truth_games: Option<usize>,
    /// Large trial counts and game size.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn build_config(kind: ExperimentKind, f: &Flags) -> Result<ExperimentConfig, Error> {
    let mut c = ExperimentConfig::defaults(kind);
    if f.full_scale {
        c = c.full_scale();
    }
    let assumed_kind = matches!(kind, ExperimentKind::Game | ExperimentKind::Housing);
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value.clone() {
                c.$field = v;
            }
        };
    }
    set!(n, f.n);
    set!(r, f.rank);
    set!(horizon, f.horizon);
    set!(sigma1, f.sigma1);
    set!(p, f.p);
    set!(p_grid, f.p_grid);
    set!(m_grid, f.m_grid);
    set!(horizon_grid, f.t_grid);
    set!(trials, f.trials);
    set!(a, f.a);
    set!(mu, f.mu);
    set!(success_threshold, f.threshold);
    set!(games_per_day, f.games_per_day);
    set!(drift, f.drift);
    set!(ground_truth_games, f.ground_truth_games);
    if f.m.is_some() {
        c.m = f.m;
    }
    if let Some(s2) = f.sigma2 {
        c.sigma2_grid = vec![s2];
    }
    if let Some(grid) = &f.sigma2_grid {
        if assumed_kind {
            c.assumed_sigma2_grid = grid.clone();
        } else {
            c.sigma2_grid = grid.clone();
        }
    }
    if let Some(s2) = f.assumed_sigma2 {
        c.assumed_sigma2_grid = vec![s2];
    }
    set!(assumed_sigma2_grid, f.assumed_sigma2_grid);
    if let Some(ws) = &f.weights {
        c.schemes = ws.iter().map(|w| w.parse::<WeightScheme>()).collect::<Result<_, _>>()?;
    }
    if let Some(agg) = &f.aggregation {
        c.aggregation = agg.parse::<RatioAggregation>()?;
    }
    if let Some(init) = &f.init {
        c.init = init.parse::<InitKind>()?;
    }
    c.seed = f.seed;
    match kind {
        ExperimentKind::Cells => c.counts_csv = Some(f.counts.clone().unwrap_or_else(|| fixture("cells.csv"))),
        ExperimentKind::Housing => {
            c.features_csv = Some(f.features.clone().unwrap_or_else(|| fixture("housing_features.csv")));
            c.prices_csv = Some(f.prices.clone().unwrap_or_else(|| fixture("housing_prices.csv")));
        }
        _ => {}
    }
    c.validate()?;
    Ok(c)
}

fn run(kind: ExperimentKind, flags: &Flags) -> Result<(), Error> {
    let format: Format = flags.format.parse()?;
    let config = build_config(kind, flags)?;
    let table = run_experiment(&config)?;
    match &flags.out {
        Some(path) => emit(&table, path, format),
        None => {
            let text = match format {
                Format::Csv => table.to_csv(),
                Format::Json => table.to_json(),
            };
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::SyntheticError(f) => (ExperimentKind::SyntheticError, f),
        Command::SyntheticRatio(f) => (ExperimentKind::SyntheticRatio, f),
        Command::RhsSweep(f) => (ExperimentKind::RhsSweep, f),
        Command::Game(f) => (ExperimentKind::Game, f),
        Command::Cells(f) => (ExperimentKind::Cells, f),
        Command::Housing(f) => (ExperimentKind::Housing, f),
    };
    match run(kind, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pairrec: {e}");
            ExitCode::from(if e.is_data_error() { 3 } else { 2 })
        }
    }
}
