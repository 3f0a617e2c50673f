use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, RatioAggregation};
use super::data::{read_counts, read_housing_features, read_housing_prices};
use super::table::{Cell, ResultTable, CODE_VERSION};
use crate::bounds::{error_bound, sample_complexity_rhs, BoundInputs};
use crate::error::{Error, Result};
use crate::gamesim::{run_game_experiment, GameConfig};
use crate::model::{
    cardinal_violation, centered, evolve_trajectory, extract_score_vector, relative_error, LatentFactorPair,
    LatentTrajectory,
};
use crate::randkit::RngStream;
use crate::sampling::{draw_uniform_ensembles, measure_series, MeasurementSeries, SamplingEnsemble};
use crate::solver::{solve, RecoveryResult, SolverConfig};
use crate::weights::{WeightParams, WeightScheme, WeightVector};

const LABEL_FACTORS: u64 = 1;
const LABEL_WALK: u64 = 2;
const LABEL_ENSEMBLE: u64 = 3;
const LABEL_NOISE: u64 = 4;
const LABEL_SOLVER: u64 = 5;

/// Run the experiment selected by `config.kind`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    match config.kind {
        ExperimentKind::SyntheticError => run_synthetic_error_sweep(config),
        ExperimentKind::SyntheticRatio => run_sampling_ratio_sweep(config),
        ExperimentKind::RhsSweep => run_rhs_sweep(config),
        ExperimentKind::Game => run_game(config),
        ExperimentKind::Cells => run_cells_experiment(config),
        ExperimentKind::Housing => run_housing_experiment(config),
    }
}

fn new_table(config: &ExperimentConfig, columns: &[&str]) -> ResultTable {
    let mut t = ResultTable::new(columns);
    t.set_meta("experiment", config.kind);
    t.set_meta("seed", config.seed);
    t.set_meta("code_version", CODE_VERSION);
    t.set_meta("config", serde_json::to_string(config).expect("config always serialises"));
    t
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn weights(config: &ExperimentConfig, scheme: WeightScheme, horizon: usize, sigma2: f64) -> Result<WeightVector> {
    WeightVector::for_scheme(
        scheme,
        horizon,
        WeightParams {
            sigma1: config.sigma1,
            sigma2,
            a: config.a,
        },
    )
}

fn solver_config(config: &ExperimentConfig, r: usize) -> SolverConfig {
    SolverConfig {
        init: config.init,
        ..SolverConfig::new(r)
    }
}

fn recover(
    config: &ExperimentConfig,
    series: &MeasurementSeries,
    w: &WeightVector,
    r: usize,
    rng: &RngStream,
) -> Result<RecoveryResult> {
    solve(series, w, &solver_config(config, r), &mut rng.clone())
}

/// Trial stream; independent of the grid point so that every grid point and
/// scheme sees the same latent factors and innovations.
fn trial_stream(config: &ExperimentConfig, trial: usize) -> RngStream {
    RngStream::root(config.seed).derive(trial as u64)
}

fn synthetic_trajectory(config: &ExperimentConfig, sigma2: f64, trial: &RngStream) -> Result<LatentTrajectory> {
    let pair = LatentFactorPair::gaussian(config.n, config.r, &mut trial.derive(LABEL_FACTORS))?;
    evolve_trajectory(&pair.s, &pair.q, config.horizon, sigma2, &trial.derive(LABEL_WALK), false)
}

fn observe(traj: &LatentTrajectory, m: usize, sigma1: f64, ens_rng: &RngStream, noise_rng: &RngStream) -> Result<MeasurementSeries> {
    let ens = draw_uniform_ensembles(traj.n(), m, traj.horizon(), ens_rng)?;
    measure_series(traj, ens, sigma1, noise_rng)
}

/// Grid of `(outer, trial)` jobs evaluated in parallel; results come back in
/// index order.
fn fan_out<T: Send>(outer: usize, trials: usize, job: impl Fn(usize, usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..outer * trials)
        .into_par_iter()
        .map(|k| job(k / trials, k % trials))
        .collect()
}

/// Mean relative error of `X^T` per drift level and weight scheme.
pub fn run_synthetic_error_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let m = config.measurements();
    let schemes = &config.schemes;
    let errors: Vec<Vec<f64>> = fan_out(config.sigma2_grid.len(), config.trials, |g, trial| {
        let sigma2 = config.sigma2_grid[g];
        let rng = trial_stream(config, trial);
        let traj = synthetic_trajectory(config, sigma2, &rng)?;
        let series = observe(&traj, m, config.sigma1, &rng.derive(LABEL_ENSEMBLE), &rng.derive(LABEL_NOISE))?;
        let truth = traj.final_comparison();
        schemes
            .iter()
            .map(|&scheme| {
                let w = weights(config, scheme, config.horizon, sigma2)?;
                let res = recover(config, &series, &w, config.r, &rng.derive(LABEL_SOLVER))?;
                relative_error(res.xhat.matrix(), truth.matrix())
            })
            .collect()
    })?;
    let mut table = new_table(config, &["sigma2", "scheme", "rel_error", "rel_error_std"]);
    table.set_meta("m", m);
    for (g, &sigma2) in config.sigma2_grid.iter().enumerate() {
        let block = &errors[g * config.trials..(g + 1) * config.trials];
        for (k, scheme) in schemes.iter().enumerate() {
            let vals: Vec<f64> = block.iter().map(|e| e[k]).collect();
            let (mean, std) = mean_std(&vals);
            table.push(vec![sigma2.into(), scheme.name().into(), mean.into(), std.into()]);
        }
    }
    Ok(table)
}

/// Smallest sampling rate reaching the success threshold per drift level and
/// weight scheme.
pub fn run_sampling_ratio_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let n2 = (config.n * config.n) as f64;
    let p_grid = &config.p_grid;
    let exhaustive = config.aggregation == RatioAggregation::SuccessRate;
    // success[g * trials + trial][scheme][p]; unscanned rates stay false.
    let success: Vec<Vec<Vec<bool>>> = fan_out(config.sigma2_grid.len(), config.trials, |g, trial| {
        let sigma2 = config.sigma2_grid[g];
        let rng = trial_stream(config, trial);
        let traj = synthetic_trajectory(config, sigma2, &rng)?;
        let truth = traj.final_comparison();
        let mut series_cache: Vec<Option<MeasurementSeries>> = vec![None; p_grid.len()];
        config
            .schemes
            .iter()
            .map(|&scheme| {
                let w = weights(config, scheme, config.horizon, sigma2)?;
                let mut hits = vec![false; p_grid.len()];
                for (k, &p) in p_grid.iter().enumerate() {
                    if series_cache[k].is_none() {
                        let m = ((p * n2).round() as usize).max(1);
                        let ens = rng.derive(LABEL_ENSEMBLE).derive(k as u64);
                        let noise = rng.derive(LABEL_NOISE).derive(k as u64);
                        series_cache[k] = Some(observe(&traj, m, config.sigma1, &ens, &noise)?);
                    }
                    let series = series_cache[k].as_ref().expect("filled above");
                    let res = recover(config, series, &w, config.r, &rng.derive(LABEL_SOLVER))?;
                    hits[k] = relative_error(res.xhat.matrix(), truth.matrix())? <= config.success_threshold;
                    if hits[k] && !exhaustive {
                        break;
                    }
                }
                Ok(hits)
            })
            .collect()
    })?;
    let mut table = new_table(config, &["sigma2", "scheme", "min_p", "unsuccessful_trials"]);
    table.set_meta(
        "aggregation",
        match config.aggregation {
            RatioAggregation::PerTrialMin => "per-trial-min",
            RatioAggregation::SuccessRate => "success-rate",
        },
    );
    for (g, &sigma2) in config.sigma2_grid.iter().enumerate() {
        let block = &success[g * config.trials..(g + 1) * config.trials];
        for (s, scheme) in config.schemes.iter().enumerate() {
            let (min_p, failed) = match config.aggregation {
                RatioAggregation::PerTrialMin => {
                    let mins: Vec<Option<f64>> =
                        block.iter().map(|t| t[s].iter().position(|&h| h).map(|k| p_grid[k])).collect();
                    let failed = mins.iter().filter(|m| m.is_none()).count();
                    let mean = mins.iter().map(|m| m.unwrap_or(1.0)).sum::<f64>() / config.trials as f64;
                    (mean, failed)
                }
                RatioAggregation::SuccessRate => {
                    let first = (0..p_grid.len()).find(|&k| {
                        let wins = block.iter().filter(|t| t[s][k]).count();
                        2 * wins >= config.trials
                    });
                    match first {
                        Some(k) => (p_grid[k], block.iter().filter(|t| !t[s][k]).count()),
                        None => (1.0, config.trials),
                    }
                }
            };
            table.push(vec![sigma2.into(), scheme.name().into(), min_p.into(), failed.into()]);
        }
    }
    Ok(table)
}

/// Sample-complexity right-hand side and error-bound terms over `T` and drift.
pub fn run_rhs_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let m = config.measurements();
    let mut table = new_table(config, &["T", "sigma2", "scheme", "rhs", "b1", "b2", "bound"]);
    table.set_meta("m", m);
    for &sigma2 in &config.sigma2_grid {
        for &t in &config.horizon_grid {
            for &scheme in &config.schemes {
                let w = weights(config, scheme, t, sigma2)?;
                let rhs = sample_complexity_rhs(config.n, config.r, config.mu, config.sigma1, sigma2, &w)?;
                let inputs = BoundInputs::new(config.n, config.r, config.mu, config.sigma1, sigma2, config.a, m, w);
                let b = error_bound(&inputs)?;
                table.push(vec![t.into(), sigma2.into(), scheme.name().into(), rhs.into(), b.b1.into(), b.b2.into(), b.bound.into()]);
            }
        }
    }
    Ok(table)
}

pub fn game_config(config: &ExperimentConfig) -> GameConfig {
    GameConfig {
        n_players: config.n,
        games_per_day: config.games_per_day,
        days: config.horizon,
        param_drift_sigma: config.drift,
        ground_truth_games: config.ground_truth_games,
        sigma1: config.sigma1,
        r: config.r,
        seed: config.seed,
        ..GameConfig::default()
    }
}

fn run_game(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let exp = run_game_experiment(&game_config(config), &config.assumed_sigma2_grid, config.schemes[0])?;
    let mut table = new_table(config, &["sigma2_assumed", "rel_error", "sign_accuracy"]);
    table.set_meta("scheme", config.schemes[0]);
    table.set_meta("raw_final_rel_error", exp.raw_final_rel_error);
    table.set_meta("raw_final_sign_accuracy", exp.raw_final_sign_accuracy);
    table.set_meta("near_zero_truth_entries", exp.near_zero_truth_entries);
    table.set_meta("truth_cardinal_violation", cardinal_violation(&exp.data.ground_truth));
    if let Some(best) = exp.best_row() {
        table.set_meta("best_sigma2_assumed", best.sigma2_assumed);
    }
    for row in &exp.rows {
        table.push(vec![row.sigma2_assumed.into(), row.rel_error.into(), row.sign_accuracy.into()]);
    }
    Ok(table)
}

fn required<'a>(path: &'a Option<std::path::PathBuf>, what: &str) -> Result<&'a std::path::Path> {
    path.as_deref().ok_or_else(|| Error::param(format!("{what} CSV path is required")))
}

/// Transitive count model with integer-rounded drift; errors on `X^T` and on
/// the centred score vector.
pub fn run_cells_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let counts = read_counts(required(&config.counts_csv, "counts")?)?;
    let n = counts.len();
    if 2 * config.r > n {
        return Err(Error::param(format!("r={} too large for {n} items", config.r)));
    }
    let m = config.m.unwrap_or_else(|| (config.p * (n * n) as f64).round() as usize).max(1);
    let s1 = DMatrix::from_column_slice(n, 1, &counts);
    let ones = DMatrix::from_element(n, 1, 1.0);
    let results: Vec<Vec<(f64, f64)>> = fan_out(config.sigma2_grid.len(), config.trials, |g, trial| {
        let sigma2 = config.sigma2_grid[g];
        let rng = trial_stream(config, trial);
        let traj = evolve_trajectory(&s1, &ones, config.horizon, sigma2, &rng.derive(LABEL_WALK), true)?;
        let series = observe(&traj, m, config.sigma1, &rng.derive(LABEL_ENSEMBLE), &rng.derive(LABEL_NOISE))?;
        let truth = traj.final_comparison();
        let s_true = centered(&DVector::from_column_slice(traj.s_list[config.horizon - 1].as_slice()));
        config
            .schemes
            .iter()
            .map(|&scheme| {
                let w = weights(config, scheme, config.horizon, sigma2)?;
                let res = recover(config, &series, &w, config.r, &rng.derive(LABEL_SOLVER))?;
                let matrix_err = relative_error(res.xhat.matrix(), truth.matrix())?;
                let score_err = relative_error(&centered(&extract_score_vector(&res.xhat)), &s_true)?;
                Ok((matrix_err, score_err))
            })
            .collect()
    })?;
    let mut table = new_table(
        config,
        &["sigma2", "scheme", "matrix_rel_error", "score_rel_error", "ceiling_violations"],
    );
    table.set_meta("n", n);
    table.set_meta("m", m);
    for (g, &sigma2) in config.sigma2_grid.iter().enumerate() {
        let block = &results[g * config.trials..(g + 1) * config.trials];
        for (k, scheme) in config.schemes.iter().enumerate() {
            let mats: Vec<f64> = block.iter().map(|r| r[k].0).collect();
            let scores: Vec<f64> = block.iter().map(|r| r[k].1).collect();
            // The score is a row average of X, so its error is at most twice
            // the matrix error.
            let violations = mats.iter().zip(&scores).filter(|(m, s)| **s > 2.0 * **m * (1.0 + 1e-9)).count();
            table.push(vec![
                sigma2.into(),
                scheme.name().into(),
                mean_std(&mats).0.into(),
                mean_std(&scores).0.into(),
                violations.into(),
            ]);
        }
    }
    Ok(table)
}

/// Latent trajectory of the housing data: `Q = [rooms, size]` and
/// `S^t = [price_t, age_t]`, each column scaled by its largest magnitude.
pub fn housing_trajectory(features: &std::path::Path, prices: &std::path::Path) -> Result<LatentTrajectory> {
    let houses = read_housing_features(features)?;
    let series = read_housing_prices(prices)?;
    if houses.len() != series.ids.len() {
        return Err(Error::data(format!(
            "{} houses in features but {} in prices",
            houses.len(),
            series.ids.len()
        )));
    }
    if let Some((h, id)) = houses.iter().zip(&series.ids).find(|(h, id)| &h.id != *id) {
        return Err(Error::data(format!("house '{}' in features but '{id}' in prices", h.id)));
    }
    let n = houses.len();
    if n < 4 {
        return Err(Error::data(format!("need at least 4 houses for r = 2, got {n}")));
    }
    let max_rooms = houses.iter().map(|h| h.rooms).fold(0.0, f64::max);
    let max_size = houses.iter().map(|h| h.size_sqft).fold(0.0, f64::max);
    let q = DMatrix::from_fn(n, 2, |i, k| if k == 0 { houses[i].rooms / max_rooms } else { houses[i].size_sqft / max_size });
    let max_price = series.prices.iter().flatten().copied().fold(0.0, f64::max);
    let ages: Vec<Vec<f64>> = houses
        .iter()
        .map(|h| series.years.iter().map(|y| y - h.year_built).collect())
        .collect();
    let max_age = ages.iter().flatten().map(|a| a.abs()).fold(0.0, f64::max);
    if max_age == 0.0 {
        return Err(Error::data("every house has age zero in every epoch"));
    }
    let s_list = (0..series.years.len())
        .map(|t| DMatrix::from_fn(n, 2, |i, k| if k == 0 { series.prices[i][t] / max_price } else { ages[i][t] / max_age }))
        .collect();
    Ok(LatentTrajectory { q, s_list, sigma2: f64::NAN })
}

/// Relative error of `X^T` versus measurements per step for each assumed
/// drift level.
pub fn run_housing_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let traj = housing_trajectory(required(&config.features_csv, "features")?, required(&config.prices_csv, "prices")?)?;
    let (n, horizon) = (traj.n(), traj.horizon());
    let truth = traj.final_comparison();
    let r = config.r;
    if 2 * r > n {
        return Err(Error::param(format!("r={r} too large for {n} houses")));
    }
    let jobs = config.assumed_sigma2_grid.len() * config.schemes.len();
    let errors: Vec<Vec<f64>> = fan_out(config.m_grid.len(), config.trials, |g, trial| {
        let m = config.m_grid[g];
        let rng = trial_stream(config, trial).derive(g as u64);
        let ens = if m == n * n {
            vec![SamplingEnsemble::full(n); horizon]
        } else {
            draw_uniform_ensembles(n, m, horizon, &rng.derive(LABEL_ENSEMBLE))?
        };
        let series = measure_series(&traj, ens, config.sigma1, &rng.derive(LABEL_NOISE))?;
        let mut out = Vec::with_capacity(jobs);
        for &sigma2 in &config.assumed_sigma2_grid {
            for &scheme in &config.schemes {
                let w = weights(config, scheme, horizon, sigma2)?;
                let res = recover(config, &series, &w, r, &rng.derive(LABEL_SOLVER))?;
                out.push(relative_error(res.xhat.matrix(), truth.matrix())?);
            }
        }
        Ok(out)
    })?;
    let mut table = new_table(config, &["m", "sigma2_assumed", "scheme", "rel_error"]);
    table.set_meta("n", n);
    table.set_meta("horizon", horizon);
    for (g, &m) in config.m_grid.iter().enumerate() {
        let block = &errors[g * config.trials..(g + 1) * config.trials];
        let mut k = 0;
        for &sigma2 in &config.assumed_sigma2_grid {
            for scheme in &config.schemes {
                let vals: Vec<f64> = block.iter().map(|e| e[k]).collect();
                table.push(vec![m.into(), sigma2.into(), scheme.name().into(), Cell::Num(mean_std(&vals).0)]);
                k += 1;
            }
        }
    }
    Ok(table)
}
