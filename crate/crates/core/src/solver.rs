//! Weighted alternating minimization over the skew factorization.
//!
//! The program is
//!
//! ```text
//! min_{S,Q}  sum_t  w_t / 2 * | A^t(S Q^T - Q S^T) - y^t |^2
//! ```
//!
//! With one factor fixed the residuals are linear in the other: for a
//! measurement of entry `(i, j)`,
//! `X_ij = sum_k S_ik Q_jk - S_jk Q_ik`, so the design row touches rows `i`
//! and `j` of the free factor only. Each half step solves the ridge-regularised
//! normal equations of size `N r` by Cholesky.
//!
//! Measurements of `(i, j)` and `(j, i)` see the same unknown up to sign and
//! diagonal measurements see nothing, so the normal equations are assembled
//! from per-cell sufficient statistics over the strict upper triangle. This is
//! an exact rewrite of the per-measurement sum; repeated pairs still count once
//! per draw.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_comparison, gaussian_matrix, ComparisonMatrix};
use crate::randkit::RngStream;
use crate::sampling::MeasurementSeries;
use crate::weights::WeightVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Spectral,
    Random,
}

impl std::str::FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(InitKind::Spectral),
            "random" => Ok(InitKind::Random),
            other => Err(Error::param(format!("unknown init '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Latent dimension; the recovered matrix has rank at most `2r`.
    pub r: usize,
    pub max_outer_iterations: usize,
    pub rel_objective_tol: f64,
    pub ridge: f64,
    pub init: InitKind,
    /// Optional entrywise clip of the final estimate to `[-a, a]`.
    pub clip_a: Option<f64>,
    /// Extra random starts run after the configured one; the run with the
    /// lowest final objective is kept.
    pub restarts: usize,
}

impl SolverConfig {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::param("solver rank r must be >= 1"));
        }
        if !(self.rel_objective_tol >= 0.0 && self.ridge >= 0.0) {
            return Err(Error::param("tolerance and ridge must be >= 0"));
        }
        if let Some(a) = self.clip_a {
            if !(a > 0.0) {
                return Err(Error::param(format!("clip bound must be > 0, got {a}")));
            }
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            r: 1,
            max_outer_iterations: 500,
            rel_objective_tol: 1e-10,
            ridge: 1e-8,
            init: InitKind::Spectral,
            clip_a: None,
            restarts: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub xhat: ComparisonMatrix,
    pub s_hat: DMatrix<f64>,
    pub q_hat: DMatrix<f64>,
    /// Ridge-augmented objective at the initial point and after every half
    /// step (`[init, S_1, Q_1, S_2, Q_2, ...]`).
    pub objective_trace: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Spectral init was requested but the measurements were all zero.
    pub used_random_fallback: bool,
}

/// Weighted least-squares statistics per strict-upper-triangle cell.
///
/// Up to a constant the objective equals
/// `sum_cells (c/2) X_ab^2 - beta X_ab`.
#[derive(Clone, Debug)]
struct CellStats {
    n: usize,
    cells: Vec<(usize, usize, f64, f64)>,
}

impl CellStats {
    fn gather(series: &MeasurementSeries, w: &WeightVector) -> Self {
        let n = series.n();
        let mut c = DMatrix::<f64>::zeros(n, n);
        let mut beta = DMatrix::<f64>::zeros(n, n);
        for ((ens, y), &wt) in series.steps().zip(w.as_slice()) {
            if wt == 0.0 {
                continue;
            }
            for (&(i, j), &v) in ens.pairs().iter().zip(y.iter()) {
                if i == j {
                    continue;
                }
                let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
                c[(a, b)] += wt;
                beta[(a, b)] += wt * sign * v;
            }
        }
        let mut cells = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if c[(a, b)] > 0.0 {
                    cells.push((a, b, c[(a, b)], beta[(a, b)]));
                }
            }
        }
        Self { n, cells }
    }

    /// Minimiser over `V` of the objective plus `ridge |V|_F^2` when the
    /// unknown is `X_ab = sum_k V_ak P_bk - V_bk P_ak`.
    ///
    /// The S step uses `P = Q`; the Q step uses `P = -S`.
    fn solve_factor(&self, partner: &DMatrix<f64>, ridge: f64, which: &'static str) -> Result<DMatrix<f64>> {
        let r = partner.ncols();
        let dim = self.n * r;
        let mut h = DMatrix::<f64>::identity(dim, dim) * (2.0 * ridge);
        let mut rhs = DVector::<f64>::zeros(dim);
        let mut idx = vec![0usize; 2 * r];
        let mut g = vec![0.0f64; 2 * r];
        for &(a, b, c, beta) in &self.cells {
            for k in 0..r {
                idx[k] = a * r + k;
                g[k] = partner[(b, k)];
                idx[r + k] = b * r + k;
                g[r + k] = -partner[(a, k)];
            }
            for p in 0..2 * r {
                rhs[idx[p]] += beta * g[p];
                let cg = c * g[p];
                for q in 0..2 * r {
                    h[(idx[p], idx[q])] += cg * g[q];
                }
            }
        }
        let v = match Cholesky::new(h.clone()) {
            Some(chol) => chol.solve(&rhs),
            None if ridge > 0.0 => clamped_eigen_solve(h, &rhs, 2.0 * ridge),
            None => return Err(Error::Singular(which)),
        };
        Ok(DMatrix::from_row_slice(self.n, r, v.as_slice()))
    }
}

/// Solve `(G + shift I) v = rhs` given `h = G + shift I` with `G` positive
/// semidefinite in exact arithmetic. Used when rounding in a badly scaled
/// `G` defeats Cholesky; eigenvalues of `G` are clamped at zero.
fn clamped_eigen_solve(h: DMatrix<f64>, rhs: &DVector<f64>, shift: f64) -> DVector<f64> {
    let dim = h.nrows();
    let eig = SymmetricEigen::new(h - DMatrix::<f64>::identity(dim, dim) * shift);
    let coeffs = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_fn(dim, |i, _| coeffs[i] / (eig.eigenvalues[i].max(0.0) + shift));
    eig.eigenvectors * scaled
}

fn check_inputs(series: &MeasurementSeries, w: &WeightVector) -> Result<()> {
    if w.horizon() != series.horizon() {
        return Err(Error::dim(format!(
            "{} weights for {} time steps",
            w.horizon(),
            series.horizon()
        )));
    }
    Ok(())
}

fn check_factor(f: &DMatrix<f64>, n: usize) -> Result<()> {
    if f.nrows() != n || f.ncols() == 0 {
        return Err(Error::dim(format!("factor is {}x{}, expected {n} rows", f.nrows(), f.ncols())));
    }
    Ok(())
}

/// `sum_t w_t / 2 * |A^t(S Q^T - Q S^T) - y^t|^2`, evaluated residual by residual.
pub fn objective(s: &DMatrix<f64>, q: &DMatrix<f64>, series: &MeasurementSeries, w: &WeightVector) -> Result<f64> {
    check_inputs(series, w)?;
    check_factor(s, series.n())?;
    let x = build_comparison(s, q)?;
    Ok(objective_of(x.matrix(), series, w))
}

fn objective_of(x: &DMatrix<f64>, series: &MeasurementSeries, w: &WeightVector) -> f64 {
    series
        .steps()
        .zip(w.as_slice())
        .filter(|(_, &wt)| wt != 0.0)
        .map(|((ens, y), &wt)| {
            let sq: f64 = ens
                .pairs()
                .iter()
                .zip(y.iter())
                .map(|(&(i, j), &v)| (x[(i, j)] - v).powi(2))
                .sum();
            0.5 * wt * sq
        })
        .sum()
}

fn augmented(s: &DMatrix<f64>, q: &DMatrix<f64>, series: &MeasurementSeries, w: &WeightVector, ridge: f64) -> f64 {
    let x = build_comparison(s, q).expect("factor shapes match");
    objective_of(x.matrix(), series, w) + ridge * (s.norm_squared() + q.norm_squared())
}

/// Exact minimiser over `S` of the objective plus `ridge |S|_F^2` with `Q` fixed.
pub fn half_step_s(q: &DMatrix<f64>, series: &MeasurementSeries, w: &WeightVector, ridge: f64) -> Result<DMatrix<f64>> {
    check_inputs(series, w)?;
    check_factor(q, series.n())?;
    CellStats::gather(series, w).solve_factor(q, ridge, "S")
}

/// Exact minimiser over `Q` of the objective plus `ridge |Q|_F^2` with `S` fixed.
pub fn half_step_q(s: &DMatrix<f64>, series: &MeasurementSeries, w: &WeightVector, ridge: f64) -> Result<DMatrix<f64>> {
    check_inputs(series, w)?;
    check_factor(s, series.n())?;
    CellStats::gather(series, w).solve_factor(&(-s), ridge, "Q")
}

/// Spectral starting point.
///
/// Per step the observed entries are averaged over repeats, zero-filled,
/// weighted by `w_t` and scaled by `1 / p`; the sum is antisymmetrised and its
/// best rank-`2r` skew approximation factored into `(S0, Q0)`. Returns `None`
/// when every measurement is zero, in which case callers fall back to a random
/// start.
pub fn spectral_init(
    series: &MeasurementSeries,
    w: &WeightVector,
    n: usize,
    r: usize,
    p: f64,
) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
    check_inputs(series, w)?;
    if series.n() != n {
        return Err(Error::dim(format!("series is over N={}, asked for N={n}", series.n())));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param(format!("sampling rate must be > 0, got {p}")));
    }
    let mut m0 = DMatrix::<f64>::zeros(n, n);
    for ((ens, y), &wt) in series.steps().zip(w.as_slice()) {
        if wt == 0.0 {
            continue;
        }
        let sums = ens.adjoint(y)?;
        let counts = ens.adjoint(&DVector::from_element(ens.m(), 1.0))?;
        for idx in 0..n * n {
            if counts[idx] > 0.0 {
                m0[idx] += wt * sums[idx] / counts[idx] / p;
            }
        }
    }
    let skew = linalg::antisymmetrize(&m0) * 0.5;
    if skew.iter().all(|&v| v == 0.0) {
        return Ok(None);
    }
    Ok(Some(linalg::skew_factors(&skew, r)))
}

/// Run alternating minimization from the configured initial point and from
/// `config.restarts` random points, keeping the lowest final objective.
pub fn solve(series: &MeasurementSeries, w: &WeightVector, config: &SolverConfig, rng: &mut RngStream) -> Result<RecoveryResult> {
    config.validate()?;
    check_inputs(series, w)?;
    let n = series.n();
    let spectral = match config.init {
        InitKind::Spectral => spectral_init(series, w, n, config.r, series.mean_sampling_rate().min(1.0))?,
        InitKind::Random => None,
    };
    let fallback = config.init == InitKind::Spectral && spectral.is_none();
    let (s0, q0) = match spectral {
        Some(init) => init,
        None => random_factors(n, config.r, rng)?,
    };
    let mut best = solve_from(series, w, config, s0, q0)?;
    for _ in 0..config.restarts {
        let (s0, q0) = random_factors(n, config.r, rng)?;
        let run = solve_from(series, w, config, s0, q0)?;
        if final_objective(&run) < final_objective(&best) {
            best = run;
        }
    }
    best.used_random_fallback = fallback;
    Ok(best)
}

fn random_factors(n: usize, r: usize, rng: &mut RngStream) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let s0 = gaussian_matrix(n, r, rng)?;
    let q0 = gaussian_matrix(n, r, rng)?;
    Ok((s0, q0))
}

fn final_objective(run: &RecoveryResult) -> f64 {
    *run.objective_trace.last().expect("trace is never empty")
}

/// Run alternating minimization from `(s0, q0)`.
pub fn solve_from(
    series: &MeasurementSeries,
    w: &WeightVector,
    config: &SolverConfig,
    s0: DMatrix<f64>,
    q0: DMatrix<f64>,
) -> Result<RecoveryResult> {
    config.validate()?;
    check_inputs(series, w)?;
    let n = series.n();
    for f in [&s0, &q0] {
        if f.shape() != (n, config.r) {
            return Err(Error::dim(format!(
                "initial factor is {}x{}, expected {n}x{}",
                f.nrows(),
                f.ncols(),
                config.r
            )));
        }
    }
    let stats = CellStats::gather(series, w);
    let (mut s, mut q) = (s0, q0);
    let mut trace = vec![augmented(&s, &q, series, w, config.ridge)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_outer_iterations {
        iterations += 1;
        let before = *trace.last().expect("trace is never empty");
        s = stats.solve_factor(&q, config.ridge, "S")?;
        trace.push(augmented(&s, &q, series, w, config.ridge));
        q = stats.solve_factor(&(-&s), config.ridge, "Q")?;
        let after = augmented(&s, &q, series, w, config.ridge);
        trace.push(after);
        let decrease = if before > 0.0 { (before - after) / before } else { 0.0 };
        if decrease < config.rel_objective_tol {
            converged = true;
            break;
        }
    }
    let mut xhat = build_comparison(&s, &q)?;
    if let Some(a) = config.clip_a {
        xhat = xhat.clipped(a);
    }
    Ok(RecoveryResult {
        xhat,
        s_hat: s,
        q_hat: q,
        objective_trace: trace,
        iterations_used: iterations,
        converged,
        used_random_fallback: false,
    })
}
