//! Error-bound and sample-complexity expressions.
//!
//! Absolute constants `C`, `C1`, `C2` default to 1; only shapes and ratios of
//! these quantities are meaningful. Logarithms are natural.

use crate::error::{Error, Result};
use crate::weights::WeightVector;

#[derive(Clone, Debug)]
pub struct BoundInputs {
    pub n: usize,
    pub r: usize,
    pub mu: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Spikiness bound `|X^T|_inf <= a`.
    pub a: f64,
    /// Measurements per time step.
    pub m: usize,
    pub w: WeightVector,
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
}

impl BoundInputs {
    /// Inputs with all constants set to 1.
    pub fn new(n: usize, r: usize, mu: f64, sigma1: f64, sigma2: f64, a: f64, m: usize, w: WeightVector) -> Self {
        Self {
            n,
            r,
            mu,
            sigma1,
            sigma2,
            a,
            m,
            w,
            c1: 1.0,
            c2: 1.0,
            c: 1.0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.w.horizon()
    }

    /// `1 <= mu <= sqrt(N / 2r)`.
    pub fn mu_in_range(&self) -> bool {
        self.mu >= 1.0 && self.mu <= (self.n as f64 / (2 * self.r) as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBound {
    pub b1: f64,
    pub b2: f64,
    pub bound: f64,
}

/// `sum_t w_t^2 (2 sigma2^2 (T - t) + sigma1^2)`.
fn drift_noise_energy(w: &WeightVector, sigma1: f64, sigma2: f64) -> f64 {
    let horizon = w.horizon();
    w.as_slice()
        .iter()
        .enumerate()
        .map(|(i, wt)| wt * wt * (2.0 * sigma2 * sigma2 * (horizon - 1 - i) as f64 + sigma1 * sigma1))
        .sum()
}

/// `B1`, `B2` and their maximum.
pub fn error_bound(inputs: &BoundInputs) -> Result<ErrorBound> {
    if inputs.m == 0 {
        return Err(Error::param("error bound needs M >= 1"));
    }
    if inputs.n == 0 || inputs.r == 0 {
        return Err(Error::param("error bound needs N >= 1 and r >= 1"));
    }
    for (name, v) in [("sigma1", inputs.sigma1), ("sigma2", inputs.sigma2), ("a", inputs.a)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::param(format!("{name} must be >= 0, got {v}")));
        }
    }
    let n = inputs.n as f64;
    let m = inputs.m as f64;
    let log2n = (2.0 * n).ln();
    let sum_w2 = inputs.w.sum_of_squares();
    let a2 = inputs.a * inputs.a;
    let b1 = inputs.c1 * a2 * n * n * (sum_w2 * log2n / m).sqrt();
    let b2 = inputs.c2 * (inputs.r as f64 * n.powi(3) * log2n / m)
        * (drift_noise_energy(&inputs.w, inputs.sigma1, inputs.sigma2) + a2 * sum_w2);
    Ok(ErrorBound { b1, b2, bound: b1.max(b2) })
}

/// Right-hand side of the measurement-count condition (with `C = 1`).
pub fn sample_complexity_rhs(n: usize, r: usize, mu: f64, sigma1: f64, sigma2: f64, w: &WeightVector) -> Result<f64> {
    let horizon = w.horizon();
    let denom = drift_noise_energy(w, sigma1, sigma2);
    if !(denom > 0.0) {
        return Err(Error::param("sample complexity undefined: sum_t w_t^2 (sigma1^2 + 2 (T - t) sigma2^2) = 0"));
    }
    let nf = n as f64;
    let max_lag = w
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, wt)| wt * wt * (horizon - 1 - i) as f64)
        .fold(0.0, f64::max);
    let max_w2 = w.as_slice().iter().map(|wt| wt * wt).fold(0.0, f64::max);
    let inner = sigma2 * mu * (r as f64).sqrt() / nf.sqrt() * max_lag.sqrt() + sigma1 * max_w2.sqrt();
    let logs = nf * (2.0 * horizon as f64 * nf.powi(3)).ln() * (2.0 * nf).ln();
    Ok(logs * inner * inner / denom)
}

/// [`sample_complexity_rhs`] scaled by a configurable constant `C`.
pub fn sample_complexity(inputs: &BoundInputs) -> Result<f64> {
    Ok(inputs.c * sample_complexity_rhs(inputs.n, inputs.r, inputs.mu, inputs.sigma1, inputs.sigma2, &inputs.w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{equal_weights, last_only_weights, optimal_weights_na};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn last_only_reduces_to_static() {
        let w = last_only_weights(6).unwrap();
        let inp = BoundInputs::new(20, 2, 1.0, 0.01, 0.3, 1.5, 160, w);
        let b = error_bound(&inp).unwrap();
        let expect = 2.0 * 8000.0 * 40f64.ln() / 160.0 * (0.01f64.powi(2) + 2.25);
        assert!(rel(b.b2, expect) < 1e-14);
        let expect_b1 = 2.25 * 400.0 * (40f64.ln() / 160.0).sqrt();
        assert!(rel(b.b1, expect_b1) < 1e-14);
    }

    #[test]
    fn static_equal_weights_divide_by_t() {
        let t = 5;
        let inp = BoundInputs::new(20, 2, 1.0, 0.01, 0.0, 1.0, 160, equal_weights(t).unwrap());
        let b = error_bound(&inp).unwrap();
        let expect = 2.0 * 8000.0 * 40f64.ln() / (160.0 * t as f64) * (1e-4 + 1.0);
        assert!(rel(b.b2, expect) < 1e-14);
        let expect_b1 = 400.0 * (40f64.ln() / (160.0 * t as f64)).sqrt();
        assert!(rel(b.b1, expect_b1) < 1e-14);
    }

    #[test]
    fn desk_setting_matches_hand_evaluation() {
        // Expanded by hand with w_t = 1/5: sum w^2 = 1/5,
        // sum w^2 (2 sigma2^2 (T - t) + sigma1^2) = (2 * 0.01 * 10 + 5e-4) / 25.
        let inp = BoundInputs::new(20, 2, 1.0, 0.01, 0.1, 1.0, 160, equal_weights(5).unwrap());
        let b = error_bound(&inp).unwrap();
        let energy = (0.2 + 5.0 * 1e-4) / 25.0;
        let b2 = 2.0 * 8000.0 * 40f64.ln() / 160.0 * (energy + 0.2);
        let b1 = 400.0 * (0.2 * 40f64.ln() / 160.0).sqrt();
        assert!(rel(b.b2, b2) < 1e-14);
        assert!(rel(b.b1, b1) < 1e-14);
        assert_eq!(b.bound, b.b1.max(b.b2));
    }

    #[test]
    fn zero_m_rejected() {
        let inp = BoundInputs::new(20, 2, 1.0, 0.01, 0.1, 1.0, 0, equal_weights(5).unwrap());
        assert!(error_bound(&inp).is_err());
    }

    #[test]
    fn rhs_static_closed_form() {
        for t in [1usize, 2, 7, 40] {
            let w = equal_weights(t).unwrap();
            let got = sample_complexity_rhs(20, 2, 1.0, 0.01, 0.0, &w).unwrap();
            let expect = 20.0 * (2.0 * t as f64 * 8000.0).ln() * 40f64.ln() / t as f64;
            assert!(rel(got, expect) < 1e-12, "T={t}");
        }
    }

    #[test]
    fn rhs_doubling_t_roughly_halves() {
        let t = 10usize;
        let a = sample_complexity_rhs(20, 2, 1.0, 0.01, 0.0, &equal_weights(t).unwrap()).unwrap();
        let b = sample_complexity_rhs(20, 2, 1.0, 0.01, 0.0, &equal_weights(2 * t).unwrap()).unwrap();
        let expect = (4.0 * t as f64 * 8000.0).ln() / (2.0 * t as f64 * 8000.0).ln() * 0.5;
        assert!(rel(b / a, expect) < 1e-12);
    }

    #[test]
    fn rhs_large_drift_not_one_over_t() {
        let sigma2 = 10f64.powf(-1.5);
        let per_t: Vec<f64> = (1..=100)
            .map(|t| {
                let w = optimal_weights_na(t, 0.01, sigma2).unwrap();
                t as f64 * sample_complexity_rhs(20, 2, 1.0, 0.01, sigma2, &w).unwrap()
            })
            .collect();
        assert!(per_t[99] > 3.0 * per_t[0]);
    }

    #[test]
    fn rhs_zero_denominator() {
        assert!(sample_complexity_rhs(20, 2, 1.0, 0.0, 0.0, &equal_weights(3).unwrap()).is_err());
    }
}
