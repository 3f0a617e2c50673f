//! Temporal weights for pooling measurements across time steps.
//!
//! Both closed-form schemes have the shape `w_t ∝ 1 / (1 + c (T - t))`:
//! - [`optimal_weights_a`]: `c = 2 sigma2^2 / (sigma1^2 + a^2)`;
//! - [`optimal_weights_na`]: `c = 2 sigma2^2 / sigma1^2`, the default.
//!
//! `c = 0` gives equal weights and `c -> inf` concentrates all weight on the
//! last step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    Equal,
    Last,
    Optimal,
    OptimalNa,
}

impl WeightScheme {
    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::Equal => "equal",
            WeightScheme::Last => "last",
            WeightScheme::Optimal => "optimal",
            WeightScheme::OptimalNa => "optimal-na",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "equal" => Ok(WeightScheme::Equal),
            "last" | "last-only" => Ok(WeightScheme::Last),
            "optimal" | "optimal-a" => Ok(WeightScheme::Optimal),
            "optimal-na" => Ok(WeightScheme::OptimalNa),
            other => Err(Error::param(format!("unknown weight scheme '{other}'"))),
        }
    }
}

/// Parameters a scheme was evaluated with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub a: f64,
}

/// Nonnegative weights over `T` steps summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
    pub scheme: WeightScheme,
    pub params: WeightParams,
}

impl WeightVector {
    /// Dispatch on `scheme`; parameters not used by the scheme are ignored.
    pub fn for_scheme(scheme: WeightScheme, horizon: usize, params: WeightParams) -> Result<Self> {
        match scheme {
            WeightScheme::Equal => equal_weights(horizon),
            WeightScheme::Last => last_only_weights(horizon),
            WeightScheme::Optimal => optimal_weights_a(horizon, params.sigma1, params.sigma2, params.a),
            WeightScheme::OptimalNa => optimal_weights_na(horizon, params.sigma1, params.sigma2),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn horizon(&self) -> usize {
        self.w.len()
    }

    /// Weight of 1-based step `t`.
    pub fn get(&self, t: usize) -> f64 {
        self.w[t - 1]
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.w.iter().map(|w| w * w).sum()
    }

    pub fn max(&self) -> f64 {
        self.w.iter().copied().fold(0.0, f64::max)
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::param("weights need T >= 1"));
    }
    Ok(())
}

fn check_sigma(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::param(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

pub fn equal_weights(horizon: usize) -> Result<WeightVector> {
    check_horizon(horizon)?;
    Ok(WeightVector {
        w: vec![1.0 / horizon as f64; horizon],
        scheme: WeightScheme::Equal,
        params: WeightParams::default(),
    })
}

pub fn last_only_weights(horizon: usize) -> Result<WeightVector> {
    check_horizon(horizon)?;
    let mut w = vec![0.0; horizon];
    w[horizon - 1] = 1.0;
    Ok(WeightVector {
        w,
        scheme: WeightScheme::Last,
        params: WeightParams::default(),
    })
}

/// Normalised `1 / (1 + rate (T - t))`.
fn decay_weights(horizon: usize, rate: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=horizon)
        .map(|t| 1.0 / (1.0 + rate * (horizon - t) as f64))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Weights minimising the bound with the spikiness term included.
pub fn optimal_weights_a(horizon: usize, sigma1: f64, sigma2: f64, a: f64) -> Result<WeightVector> {
    check_horizon(horizon)?;
    check_sigma("sigma1", sigma1)?;
    check_sigma("sigma2", sigma2)?;
    check_sigma("a", a)?;
    let floor = sigma1 * sigma1 + a * a;
    let rate = if sigma2 == 0.0 {
        0.0
    } else if floor == 0.0 {
        return Err(Error::param("sigma1^2 + a^2 = 0 with sigma2 > 0"));
    } else {
        2.0 * sigma2 * sigma2 / floor
    };
    Ok(WeightVector {
        w: decay_weights(horizon, rate),
        scheme: WeightScheme::Optimal,
        params: WeightParams { sigma1, sigma2, a },
    })
}

/// Weights minimising the bound without the spikiness term.
pub fn optimal_weights_na(horizon: usize, sigma1: f64, sigma2: f64) -> Result<WeightVector> {
    check_horizon(horizon)?;
    check_sigma("sigma1", sigma1)?;
    check_sigma("sigma2", sigma2)?;
    let floor = sigma1 * sigma1;
    let rate = if sigma2 == 0.0 {
        0.0
    } else if floor == 0.0 {
        return Err(Error::param("sigma1 = 0 with sigma2 > 0"));
    } else {
        2.0 * sigma2 * sigma2 / floor
    };
    Ok(WeightVector {
        w: decay_weights(horizon, rate),
        scheme: WeightScheme::OptimalNa,
        params: WeightParams { sigma1, sigma2, a: 0.0 },
    })
}
