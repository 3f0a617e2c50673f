//! Entry-sampling measurement operators.
//!
//! A [`SamplingEnsemble`] is the operator `X -> (X[i_m, j_m])_m`. Pairs are
//! drawn with replacement over all `N^2` positions, diagonal included, so a
//! repeated pair yields repeated measurements and a diagonal pair measures only
//! noise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::LatentTrajectory;
use crate::randkit::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleKind {
    Uniform,
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingEnsemble {
    n: usize,
    pairs: Vec<(usize, usize)>,
    kind: EnsembleKind,
}

impl SamplingEnsemble {
    /// `m` i.i.d. uniform positions over the `n x n` grid.
    pub fn draw_uniform(n: usize, m: usize, rng: &mut RngStream) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::param(format!("ensemble needs N >= 1 and M >= 1, got N={n}, M={m}")));
        }
        let mut pairs = Vec::with_capacity(m);
        for _ in 0..m {
            let cell = rng.uniform_index(n * n)?;
            pairs.push((cell / n, cell % n));
        }
        Ok(Self {
            n,
            pairs,
            kind: EnsembleKind::Uniform,
        })
    }

    /// Every entry once, row-major.
    pub fn full(n: usize) -> Self {
        let pairs = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        Self {
            n,
            pairs,
            kind: EnsembleKind::Full,
        }
    }

    /// Ensemble from explicit pairs. Recognised as `Full` when the pairs are the
    /// row-major enumeration of the grid.
    pub fn from_pairs(n: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
            return Err(Error::data(format!("pair ({i},{j}) out of range for N={n}")));
        }
        let full = pairs.len() == n * n && pairs.iter().enumerate().all(|(k, &(i, j))| i == k / n && j == k % n);
        Ok(Self {
            n,
            pairs,
            kind: if full { EnsembleKind::Full } else { EnsembleKind::Uniform },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `M / N^2`.
    pub fn sampling_rate(&self) -> f64 {
        self.m() as f64 / (self.n * self.n) as f64
    }

    fn check_matrix(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.shape() != (self.n, self.n) {
            return Err(Error::dim(format!(
                "ensemble is over {n}x{n} but matrix is {}x{}",
                x.nrows(),
                x.ncols(),
                n = self.n
            )));
        }
        Ok(())
    }

    /// `y_m = X[i_m, j_m]`.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_matrix(x)?;
        Ok(DVector::from_iterator(self.m(), self.pairs.iter().map(|&(i, j)| x[(i, j)])))
    }

    /// `sum_m z_m e_{i_m} e_{j_m}^T`; repeated pairs accumulate.
    pub fn adjoint(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        if z.len() != self.m() {
            return Err(Error::dim(format!("adjoint needs {} values, got {}", self.m(), z.len())));
        }
        let mut out = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &v) in self.pairs.iter().zip(z.iter()) {
            out[(i, j)] += v;
        }
        Ok(out)
    }
}

/// Observations `y^t = A^t(X^t) + z^t` for `t = 1..T`.
#[derive(Clone, Debug)]
pub struct MeasurementSeries {
    ensembles: Vec<SamplingEnsemble>,
    y: Vec<DVector<f64>>,
    pub sigma1: f64,
}

impl MeasurementSeries {
    pub fn new(ensembles: Vec<SamplingEnsemble>, y: Vec<DVector<f64>>, sigma1: f64) -> Result<Self> {
        if ensembles.is_empty() {
            return Err(Error::param("measurement series needs at least one time step"));
        }
        if ensembles.len() != y.len() {
            return Err(Error::dim(format!("{} ensembles but {} observation vectors", ensembles.len(), y.len())));
        }
        let n = ensembles[0].n();
        for (t, (e, yt)) in ensembles.iter().zip(&y).enumerate() {
            if e.n() != n {
                return Err(Error::dim(format!("ensemble {} is over N={}, expected {n}", t + 1, e.n())));
            }
            if e.m() != yt.len() {
                return Err(Error::dim(format!("step {}: M={} but |y|={}", t + 1, e.m(), yt.len())));
            }
        }
        Ok(Self { ensembles, y, sigma1 })
    }

    pub fn horizon(&self) -> usize {
        self.ensembles.len()
    }

    pub fn n(&self) -> usize {
        self.ensembles[0].n()
    }

    pub fn ensembles(&self) -> &[SamplingEnsemble] {
        &self.ensembles
    }

    pub fn observations(&self) -> &[DVector<f64>] {
        &self.y
    }

    /// Iterate `(ensemble, y)` per time step.
    pub fn steps(&self) -> impl Iterator<Item = (&SamplingEnsemble, &DVector<f64>)> {
        self.ensembles.iter().zip(self.y.iter())
    }

    /// Mean of `M_t / N^2` over time steps.
    pub fn mean_sampling_rate(&self) -> f64 {
        self.ensembles.iter().map(|e| e.sampling_rate()).sum::<f64>() / self.horizon() as f64
    }
}

/// Independent uniform ensembles, one per step, from sub-streams `rng.derive(t)`.
pub fn draw_uniform_ensembles(n: usize, m: usize, horizon: usize, rng: &RngStream) -> Result<Vec<SamplingEnsemble>> {
    (1..=horizon)
        .map(|t| SamplingEnsemble::draw_uniform(n, m, &mut rng.derive(t as u64)))
        .collect()
}

/// Noisy measurements of each `X^t` of the trajectory; the noise for step `t`
/// comes from `rng.derive(t)`.
pub fn measure_series(
    trajectory: &LatentTrajectory,
    ensembles: Vec<SamplingEnsemble>,
    sigma1: f64,
    rng: &RngStream,
) -> Result<MeasurementSeries> {
    if ensembles.len() != trajectory.horizon() {
        return Err(Error::dim(format!(
            "{} ensembles for a horizon of {}",
            ensembles.len(),
            trajectory.horizon()
        )));
    }
    if !(sigma1.is_finite() && sigma1 >= 0.0) {
        return Err(Error::param(format!("sigma1 must be >= 0, got {sigma1}")));
    }
    let mut y = Vec::with_capacity(ensembles.len());
    for (t, e) in ensembles.iter().enumerate() {
        let x = trajectory.comparison_at(t + 1);
        let mut yt = e.apply(x.matrix())?;
        let mut noise = rng.derive((t + 1) as u64);
        for v in yt.iter_mut() {
            *v += noise.gaussian(0.0, sigma1)?;
        }
        y.push(yt);
    }
    MeasurementSeries::new(ensembles, y, sigma1)
}
