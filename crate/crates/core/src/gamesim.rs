//! Price-guessing game between pairs of players.
//!
//! Each game draws a true price `p* ~ U[0, 1]` and one guess per player from
//! the player's Beta(a, b). The closest guess that does not exceed `p*` wins.
//! A day's matrix accumulates `+p*` into entry `(i, j)` when `i` wins and `-p*`
//! when `j` wins, averages over the games played and is antisymmetrised. Games
//! where both players overbid, or that tie exactly, have no winner and add 0.
//!
//! Player parameters drift by a Gaussian step per day and are clamped at
//! [`PARAM_FLOOR`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{relative_error, sign_accuracy, ComparisonMatrix};
use crate::randkit::RngStream;
use crate::sampling::{MeasurementSeries, SamplingEnsemble};
use crate::solver::{solve, SolverConfig};
use crate::weights::{WeightParams, WeightScheme, WeightVector};

/// Lower clamp for Beta parameters after drift.
pub const PARAM_FLOOR: f64 = 1e-3;

const LABEL_INIT: u64 = 1;
const LABEL_DRIFT: u64 = 2;
const LABEL_DAY: u64 = 3;
const LABEL_TRUTH: u64 = 4;
const LABEL_SOLVE: u64 = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct GameConfig {
    pub n_players: usize,
    pub games_per_day: usize,
    pub days: usize,
    /// Standard deviation of the daily parameter step.
    pub param_drift_sigma: f64,
    pub param_init_range: (f64, f64),
    /// Games per pair used for the ground-truth matrix.
    pub ground_truth_games: usize,
    /// Noise level assumed when computing weights.
    pub sigma1: f64,
    /// Latent dimension used for recovery.
    pub r: usize,
    pub seed: u64,
}

impl Default for GameConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            n_players: 10,
            games_per_day: 20,
            days: 200,
            param_drift_sigma: 1e-2,
            param_init_range: (0.5, 5.0),
            ground_truth_games: 100_000,
            sigma1: 0.1,
            r: 1,
            seed: 0,
        }
    }
}

impl GameConfig {
    /// 100 games a day for 10^4 days, 10^6 ground-truth games per pair.
    pub fn full_scale() -> Self {
        Self {
            games_per_day: 100,
            days: 10_000,
            ground_truth_games: 1_000_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_players < 2 {
            return Err(Error::param("game needs at least two players"));
        }
        if self.games_per_day == 0 || self.days == 0 || self.ground_truth_games == 0 {
            return Err(Error::param("games per day, days and ground-truth games must be positive"));
        }
        let (lo, hi) = self.param_init_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::param(format!("parameter range [{lo}, {hi}] must be positive")));
        }
        if !(self.param_drift_sigma >= 0.0 && self.sigma1 > 0.0) {
            return Err(Error::param("drift sigma must be >= 0 and sigma1 > 0"));
        }
        if self.r == 0 || 2 * self.r > self.n_players {
            return Err(Error::param(format!("r={} invalid for {} players", self.r, self.n_players)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlayerParams {
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    IWins,
    JWins,
    NoWinner,
}

/// Closest guess without going over wins.
pub fn play_game(p_star: f64, guess_i: f64, guess_j: f64) -> Outcome {
    let i_ok = guess_i <= p_star;
    let j_ok = guess_j <= p_star;
    match (i_ok, j_ok) {
        (false, false) => Outcome::NoWinner,
        (true, false) => Outcome::IWins,
        (false, true) => Outcome::JWins,
        (true, true) if guess_i > guess_j => Outcome::IWins,
        (true, true) if guess_j > guess_i => Outcome::JWins,
        (true, true) => Outcome::NoWinner,
    }
}

/// Players with `a, b ~ U[lo, hi)`.
pub fn initial_params(n: usize, range: (f64, f64), rng: &mut RngStream) -> Result<Vec<PlayerParams>> {
    (0..n)
        .map(|_| {
            Ok(PlayerParams {
                a: rng.uniform_range(range.0, range.1)?,
                b: rng.uniform_range(range.0, range.1)?,
            })
        })
        .collect()
}

fn pair_margin(pi: PlayerParams, pj: PlayerParams, games: usize, rng: &mut RngStream) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..games {
        let p_star = rng.uniform();
        let gi = rng.beta(pi.a, pi.b)?;
        let gj = rng.beta(pj.a, pj.b)?;
        match play_game(p_star, gi, gj) {
            Outcome::IWins => total += p_star,
            Outcome::JWins => total -= p_star,
            Outcome::NoWinner => {}
        }
    }
    Ok(total / games as f64)
}

/// Average margins over `games` games per pair; pair `(i, j)` draws from
/// `rng.derive(i * n + j)`.
fn play_all_pairs(params: &[PlayerParams], games: usize, rng: &RngStream) -> Result<ComparisonMatrix> {
    let n = params.len();
    if n < 2 {
        return Err(Error::param("need at least two players"));
    }
    if games == 0 {
        return Err(Error::param("need at least one game per pair"));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let margins: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| pair_margin(params[i], params[j], games, &mut rng.derive((i * n + j) as u64)))
        .collect::<Result<_>>()?;
    let mut upper = DMatrix::zeros(n, n);
    for (&(i, j), m) in pairs.iter().zip(margins) {
        upper[(i, j)] = m;
    }
    ComparisonMatrix::antisymmetrized(&upper)
}

pub fn simulate_day(params: &[PlayerParams], games_per_day: usize, rng: &RngStream) -> Result<ComparisonMatrix> {
    play_all_pairs(params, games_per_day, rng)
}

/// Add `N(0, sigma^2)` to every `a` and `b`, clamped below at [`PARAM_FLOOR`].
pub fn drift_params(params: &[PlayerParams], sigma: f64, rng: &mut RngStream) -> Result<Vec<PlayerParams>> {
    params
        .iter()
        .map(|p| {
            Ok(PlayerParams {
                a: (p.a + rng.gaussian(0.0, sigma)?).max(PARAM_FLOOR),
                b: (p.b + rng.gaussian(0.0, sigma)?).max(PARAM_FLOOR),
            })
        })
        .collect()
}

pub fn ground_truth_matrix(final_params: &[PlayerParams], total_games: usize, rng: &RngStream) -> Result<ComparisonMatrix> {
    play_all_pairs(final_params, total_games, rng)
}

/// Daily matrices, final-day parameters and the ground truth.
#[derive(Clone, Debug)]
pub struct GameData {
    pub daily: Vec<ComparisonMatrix>,
    pub final_params: Vec<PlayerParams>,
    pub ground_truth: ComparisonMatrix,
}

pub fn simulate_game(config: &GameConfig) -> Result<GameData> {
    config.validate()?;
    let root = RngStream::root(config.seed);
    let mut params = initial_params(config.n_players, config.param_init_range, &mut root.derive(LABEL_INIT))?;
    let drift = root.derive(LABEL_DRIFT);
    let days = root.derive(LABEL_DAY);
    let mut daily = Vec::with_capacity(config.days);
    for t in 1..=config.days {
        if t > 1 {
            params = drift_params(&params, config.param_drift_sigma, &mut drift.derive(t as u64))?;
        }
        daily.push(simulate_day(&params, config.games_per_day, &days.derive(t as u64))?.with_time(t));
    }
    let ground_truth = ground_truth_matrix(&params, config.ground_truth_games, &root.derive(LABEL_TRUTH))?;
    Ok(GameData {
        daily,
        final_params: params,
        ground_truth,
    })
}

/// Every day observed in full.
pub fn daily_series(daily: &[ComparisonMatrix], sigma1: f64) -> Result<MeasurementSeries> {
    let n = daily.first().ok_or_else(|| Error::param("no days simulated"))?.n();
    let full = SamplingEnsemble::full(n);
    let y = daily
        .iter()
        .map(|x| full.apply(x.matrix()))
        .collect::<Result<Vec<DVector<f64>>>>()?;
    MeasurementSeries::new(vec![full; daily.len()], y, sigma1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GameRow {
    pub sigma2_assumed: f64,
    pub rel_error: f64,
    pub sign_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct GameExperiment {
    pub data: GameData,
    pub rows: Vec<GameRow>,
    pub raw_final_rel_error: f64,
    pub raw_final_sign_accuracy: f64,
    /// Ground-truth entries within three Monte-Carlo standard errors of zero.
    pub near_zero_truth_entries: usize,
}

impl GameExperiment {
    /// Row with the smallest relative error (first on ties).
    pub fn best_row(&self) -> Option<&GameRow> {
        self.rows
            .iter()
            .fold(None, |best: Option<&GameRow>, row| match best {
                Some(b) if b.rel_error <= row.rel_error => Some(b),
                _ => Some(row),
            })
    }
}

/// Simulate the game and recover the ground truth from the daily matrices for
/// each assumed drift level.
pub fn run_game_experiment(config: &GameConfig, sigma2_grid: &[f64], scheme: WeightScheme) -> Result<GameExperiment> {
    if sigma2_grid.is_empty() {
        return Err(Error::param("sigma2 grid is empty"));
    }
    let data = simulate_game(config)?;
    let series = daily_series(&data.daily, config.sigma1)?;
    let truth = data.ground_truth.matrix();
    let solver = SolverConfig::new(config.r);
    let root = RngStream::root(config.seed).derive(LABEL_SOLVE);
    let rows = sigma2_grid
        .par_iter()
        .enumerate()
        .map(|(g, &sigma2)| {
            let w = WeightVector::for_scheme(
                scheme,
                config.days,
                WeightParams {
                    sigma1: config.sigma1,
                    sigma2,
                    a: 1.0,
                },
            )?;
            let res = solve(&series, &w, &solver, &mut root.derive(g as u64))?;
            Ok(GameRow {
                sigma2_assumed: sigma2,
                rel_error: relative_error(res.xhat.matrix(), truth)?,
                sign_accuracy: sign_accuracy(res.xhat.matrix(), truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let last = data.daily.last().expect("at least one day").matrix();
    let raw_final_rel_error = relative_error(last, truth)?;
    let raw_final_sign_accuracy = sign_accuracy(last, truth)?;
    let se = 3.0 / (config.ground_truth_games as f64).sqrt();
    let n = config.n_players;
    let near_zero_truth_entries = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| truth[(i, j)].abs() <= se)
        .count();
    Ok(GameExperiment {
        data,
        rows,
        raw_final_rel_error,
        raw_final_sign_accuracy,
        near_zero_truth_entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn game_rules() {
        assert_eq!(play_game(0.5, 0.4, 0.6), Outcome::IWins);
        assert_eq!(play_game(0.5, 0.6, 0.7), Outcome::NoWinner);
        assert_eq!(play_game(0.5, 0.3, 0.4), Outcome::JWins);
        assert_eq!(play_game(0.5, 0.3, 0.3), Outcome::NoWinner);
        assert_eq!(play_game(0.5, 0.5, 0.2), Outcome::IWins);
    }

    #[test]
    fn all_overbid_gives_zero_matrix() {
        // Beta(1000, 1e-3) sits at 1, above every price in [0, 1).
        let params = vec![PlayerParams { a: 1000.0, b: 1e-3 }; 4];
        let x = simulate_day(&params, 50, &RngStream::root(1)).unwrap();
        assert_eq!(x.matrix(), &DMatrix::zeros(4, 4));
    }

    #[test]
    fn day_is_skew_and_bounded() {
        let params = initial_params(6, (0.5, 5.0), &mut RngStream::root(2)).unwrap();
        let x = simulate_day(&params, 30, &RngStream::root(3)).unwrap();
        let m = x.matrix();
        assert_eq!(m + m.transpose(), DMatrix::zeros(6, 6));
        assert!(x.max_abs() <= 1.0);
        assert!(x.max_abs() > 0.0);
    }

    #[test]
    fn drift_examples() {
        let params = vec![PlayerParams { a: 1.0, b: 2.0 }, PlayerParams { a: 0.5, b: 0.7 }];
        assert_eq!(drift_params(&params, 0.0, &mut RngStream::root(0)).unwrap(), params);
        let tiny = vec![PlayerParams { a: 1e-3, b: 1e-3 }; 50];
        let moved = drift_params(&tiny, 1.0, &mut RngStream::root(0)).unwrap();
        assert!(moved.iter().all(|p| p.a >= PARAM_FLOOR && p.b >= PARAM_FLOOR));
        assert!(moved.iter().any(|p| p.a == PARAM_FLOOR));
        let a = drift_params(&params, 0.1, &mut RngStream::root(5)).unwrap();
        let b = drift_params(&params, 0.1, &mut RngStream::root(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_players_near_zero_truth() {
        let params = vec![PlayerParams { a: 2.0, b: 3.0 }; 3];
        let x = ground_truth_matrix(&params, 1_000_000, &RngStream::root(11)).unwrap();
        assert!(x.max_abs() <= 3.0 / 1000.0, "max {}", x.max_abs());
        let m = x.matrix();
        assert_eq!(m + m.transpose(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn best_row_picks_minimum() {
        let exp_rows = vec![
            GameRow { sigma2_assumed: 1.0, rel_error: 0.3, sign_accuracy: 0.8 },
            GameRow { sigma2_assumed: 2.0, rel_error: 0.1, sign_accuracy: 0.9 },
            GameRow { sigma2_assumed: 3.0, rel_error: 0.2, sign_accuracy: 0.9 },
        ];
        let exp = GameExperiment {
            data: GameData { daily: vec![], final_params: vec![], ground_truth: ComparisonMatrix::zeros(2) },
            rows: exp_rows,
            raw_final_rel_error: 0.0,
            raw_final_sign_accuracy: 0.0,
            near_zero_truth_entries: 0,
        };
        assert_eq!(exp.best_row().unwrap().sigma2_assumed, 2.0);
    }
}
