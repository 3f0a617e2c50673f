use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::InitKind;
use crate::weights::WeightScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SyntheticError,
    SyntheticRatio,
    RhsSweep,
    Game,
    Cells,
    Housing,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::SyntheticError,
        ExperimentKind::SyntheticRatio,
        ExperimentKind::RhsSweep,
        ExperimentKind::Game,
        ExperimentKind::Cells,
        ExperimentKind::Housing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SyntheticError => "synthetic-error",
            ExperimentKind::SyntheticRatio => "synthetic-ratio",
            ExperimentKind::RhsSweep => "rhs-sweep",
            ExperimentKind::Game => "game",
            ExperimentKind::Cells => "cells",
            ExperimentKind::Housing => "housing",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param(format!("unknown experiment '{s}'")))
    }
}

/// How minimal sampling rates are aggregated across trials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioAggregation {
    /// Mean over trials of each trial's smallest successful `p`.
    PerTrialMin,
    /// Smallest `p` whose success rate across trials is at least one half.
    SuccessRate,
}

impl FromStr for RatioAggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-trial-min" => Ok(RatioAggregation::PerTrialMin),
            "success-rate" => Ok(RatioAggregation::SuccessRate),
            other => Err(Error::param(format!("unknown aggregation '{other}'"))),
        }
    }
}

/// `10^lo, 10^(lo + step), ..., 10^hi`.
pub fn log_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as usize;
    (0..=count).map(|k| 10f64.powf(lo + k as f64 * step)).collect()
}

/// `lo, lo + step, ..., hi` computed as `k * step` to avoid drift.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let first = (lo / step).round() as usize;
    let last = (hi / step).round() as usize;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Everything an experiment run depends on. Output location and format are
/// not part of the configuration, so the echoed header does not depend on
/// where results are written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub r: usize,
    pub horizon: usize,
    pub sigma1: f64,
    /// True drift levels (synthetic, cells, rhs-sweep).
    pub sigma2_grid: Vec<f64>,
    pub p: f64,
    /// Overrides `p` when set.
    pub m: Option<usize>,
    pub p_grid: Vec<f64>,
    pub m_grid: Vec<usize>,
    pub horizon_grid: Vec<usize>,
    pub trials: usize,
    pub schemes: Vec<WeightScheme>,
    /// Drift levels assumed when the true one is unknown (game, housing).
    pub assumed_sigma2_grid: Vec<f64>,
    /// Spikiness bound used by the `optimal` scheme and the bounds.
    pub a: f64,
    pub mu: f64,
    pub success_threshold: f64,
    pub aggregation: RatioAggregation,
    pub init: InitKind,
    pub games_per_day: usize,
    pub drift: f64,
    pub ground_truth_games: usize,
    pub seed: u64,
    pub counts_csv: Option<PathBuf>,
    pub features_csv: Option<PathBuf>,
    pub prices_csv: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            n: 20,
            r: 2,
            horizon: 5,
            sigma1: 0.01,
            sigma2_grid: log_grid(-4.0, 0.5, 0.5),
            p: 0.4,
            m: None,
            p_grid: linear_grid(0.05, 1.0, 0.05),
            m_grid: Vec::new(),
            horizon_grid: Vec::new(),
            trials: 20,
            schemes: vec![WeightScheme::Equal, WeightScheme::Last, WeightScheme::OptimalNa],
            assumed_sigma2_grid: Vec::new(),
            a: 1.0,
            mu: 1.0,
            success_threshold: 1e-4,
            aggregation: RatioAggregation::PerTrialMin,
            init: InitKind::Spectral,
            games_per_day: 20,
            drift: 1e-2,
            ground_truth_games: 100_000,
            seed: 0,
            counts_csv: None,
            features_csv: None,
            prices_csv: None,
        };
        match kind {
            ExperimentKind::SyntheticError | ExperimentKind::SyntheticRatio => base,
            ExperimentKind::RhsSweep => Self {
                sigma2_grid: vec![0.0, 1e-4, 1e-3, 1e-2, 10f64.powf(-1.5), 1e-1],
                horizon_grid: (1..=100).collect(),
                schemes: vec![WeightScheme::OptimalNa],
                trials: 1,
                ..base
            },
            ExperimentKind::Game => Self {
                n: 10,
                r: 1,
                horizon: 200,
                sigma1: 0.1,
                sigma2_grid: Vec::new(),
                assumed_sigma2_grid: log_grid(-5.0, 0.0, 0.5),
                schemes: vec![WeightScheme::OptimalNa],
                trials: 1,
                ..base
            },
            ExperimentKind::Cells => Self {
                n: 22,
                r: 1,
                sigma1: 0.1,
                p: 0.2,
                sigma2_grid: vec![0.0, 0.1, 10f64.powf(-0.5), 1.0, 10f64.powf(0.5), 10.0],
                ..base
            },
            ExperimentKind::Housing => Self {
                n: 8,
                r: 2,
                sigma1: 0.01,
                sigma2_grid: Vec::new(),
                m_grid: vec![8, 12, 16, 24, 32, 48, 64],
                assumed_sigma2_grid: log_grid(-1.5, 0.0, 0.5),
                schemes: vec![WeightScheme::OptimalNa],
                ..base
            },
        }
    }

    /// Full-scale settings: 100 trials, and for the game 100 games a day over
    /// 10^4 days with 10^6 ground-truth games per pair.
    pub fn full_scale(mut self) -> Self {
        self.trials = if self.kind == ExperimentKind::RhsSweep || self.kind == ExperimentKind::Game {
            1
        } else {
            100
        };
        if self.kind == ExperimentKind::Game {
            self.horizon = 10_000;
            self.games_per_day = 100;
            self.ground_truth_games = 1_000_000;
        }
        self
    }

    /// Measurements per step: `m` if set, otherwise `round(p N^2)`.
    pub fn measurements(&self) -> usize {
        self.m.unwrap_or_else(|| (self.p * (self.n * self.n) as f64).round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::param(msg));
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return fail(format!("sampling rate p must be in (0, 1], got {}", self.p));
        }
        if self.p_grid.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return fail("every p in the grid must be in (0, 1]".into());
        }
        if self.m == Some(0) || self.m_grid.contains(&0) {
            return fail("M must be >= 1".into());
        }
        if self.r == 0 || self.horizon == 0 {
            return fail("r and T must be >= 1".into());
        }
        if !(self.sigma1.is_finite() && self.sigma1 >= 0.0) {
            return fail(format!("sigma1 must be >= 0, got {}", self.sigma1));
        }
        let grids = [("sigma2", &self.sigma2_grid), ("assumed sigma2", &self.assumed_sigma2_grid)];
        for (name, grid) in grids {
            if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return fail(format!("{name} grid values must be finite and >= 0"));
            }
        }
        if self.schemes.is_empty() {
            return fail("at least one weight scheme is required".into());
        }
        let need_nonempty = |name: &str, empty: bool| if empty { fail(format!("{name} grid is empty")) } else { Ok(()) };
        match self.kind {
            ExperimentKind::SyntheticError | ExperimentKind::Cells => need_nonempty("sigma2", self.sigma2_grid.is_empty())?,
            ExperimentKind::SyntheticRatio => {
                need_nonempty("sigma2", self.sigma2_grid.is_empty())?;
                need_nonempty("p", self.p_grid.is_empty())?;
            }
            ExperimentKind::RhsSweep => {
                need_nonempty("sigma2", self.sigma2_grid.is_empty())?;
                need_nonempty("T", self.horizon_grid.is_empty())?;
                if self.horizon_grid.contains(&0) {
                    return fail("T grid values must be >= 1".into());
                }
            }
            ExperimentKind::Game => need_nonempty("assumed sigma2", self.assumed_sigma2_grid.is_empty())?,
            ExperimentKind::Housing => {
                need_nonempty("assumed sigma2", self.assumed_sigma2_grid.is_empty())?;
                need_nonempty("M", self.m_grid.is_empty())?;
            }
        }
        if matches!(self.kind, ExperimentKind::SyntheticError | ExperimentKind::SyntheticRatio | ExperimentKind::RhsSweep)
            && (self.n < 2 || 2 * self.r > self.n)
        {
            return fail(format!("need N >= 2 and 2r <= N, got N={}, r={}", self.n, self.r));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = log_grid(-4.0, 0.5, 0.5);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 1e-4);
        assert!((g[9] - 10f64.sqrt()).abs() < 1e-15);
        let p = linear_grid(0.05, 1.0, 0.05);
        assert_eq!(p.len(), 20);
        assert_eq!(p[19], 1.0);
    }

    #[test]
    fn synthetic_defaults_match_reference_setting() {
        let c = ExperimentConfig::defaults(ExperimentKind::SyntheticError);
        assert_eq!((c.n, c.r, c.horizon, c.sigma1, c.p), (20, 2, 5, 0.01, 0.4));
        assert_eq!(c.measurements(), 160);
        assert_eq!(c.trials, 20);
        assert_eq!(c.schemes, vec![WeightScheme::Equal, WeightScheme::Last, WeightScheme::OptimalNa]);
        assert_eq!(c.full_scale().trials, 100);
    }

    #[test]
    fn other_defaults() {
        let cells = ExperimentConfig::defaults(ExperimentKind::Cells);
        assert_eq!((cells.sigma1, cells.p, cells.horizon, cells.r), (0.1, 0.2, 5, 1));
        assert_eq!(cells.measurements(), 97);
        let house = ExperimentConfig::defaults(ExperimentKind::Housing);
        assert_eq!((house.n, house.r, house.horizon, house.sigma1), (8, 2, 5, 0.01));
        assert!((house.assumed_sigma2_grid[0] - 10f64.powf(-1.5)).abs() < 1e-16);
        let game = ExperimentConfig::defaults(ExperimentKind::Game);
        assert_eq!((game.n, game.r, game.horizon, game.games_per_day), (10, 1, 200, 20));
        assert_eq!(game.drift, 1e-2);
        let full = game.full_scale();
        assert_eq!((full.horizon, full.games_per_day, full.ground_truth_games), (10_000, 100, 1_000_000));
        let rhs = ExperimentConfig::defaults(ExperimentKind::RhsSweep);
        assert_eq!(rhs.horizon_grid.len(), 100);
        for kind in ExperimentKind::ALL {
            ExperimentConfig::defaults(kind).validate().unwrap();
            assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
        }
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::SyntheticError);
        c.p = 0.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::SyntheticError);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::SyntheticError);
        c.sigma2_grid.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::Housing);
        c.m_grid.clear();
        assert!(c.validate().is_err());
    }
}
