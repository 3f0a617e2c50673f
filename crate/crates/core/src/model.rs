//! Pairwise comparison matrices and their latent factors.
//!
//! A comparison matrix is built from two `N x r` factors as `X = S Q^T - Q S^T`.
//! The transitive special case `Q = 1` gives `X_ij = s_i - s_j`. Over time `S`
//! follows a Gaussian random walk while `Q` stays fixed.

use nalgebra::{DMatrix, DVector, Dim, Matrix, Storage};

use crate::error::{Error, Result};
use crate::linalg;
use crate::randkit::RngStream;

/// Dense skew-symmetric `N x N` matrix.
///
/// Skew-symmetry and the zero diagonal hold exactly as stored: every
/// constructor writes the strict upper triangle and mirrors it with a sign flip.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonMatrix {
    x: DMatrix<f64>,
    /// 1-based time step, `None` for a static matrix.
    pub time_index: Option<usize>,
    /// `2r` when built from rank-`r` factors.
    pub rank_bound: Option<usize>,
}

impl ComparisonMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: DMatrix::zeros(n, n),
            time_index: None,
            rank_bound: None,
        }
    }

    /// `A - A^T`.
    pub fn antisymmetrized(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(format!("{}x{} is not square", a.nrows(), a.ncols())));
        }
        Ok(Self {
            x: linalg::antisymmetrize(a),
            time_index: None,
            rank_bound: None,
        })
    }

    /// Accepts `x` only if it is exactly skew-symmetric.
    pub fn from_skew(x: DMatrix<f64>) -> Result<Self> {
        if !x.is_square() {
            return Err(Error::dim(format!("{}x{} is not square", x.nrows(), x.ncols())));
        }
        let n = x.nrows();
        for i in 0..n {
            for j in i..n {
                if x[(i, j)] != -x[(j, i)] || !x[(i, j)].is_finite() {
                    return Err(Error::data(format!(
                        "entries ({i},{j}) and ({j},{i}) are not negatives of each other"
                    )));
                }
            }
        }
        Ok(Self {
            x,
            time_index: None,
            rank_bound: None,
        })
    }

    pub fn with_time(mut self, t: usize) -> Self {
        self.time_index = Some(t);
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.x
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[(i, j)]
    }

    /// `max |X_ij|`.
    pub fn max_abs(&self) -> f64 {
        self.x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Entrywise clip to `[-a, a]`; symmetric so skew-symmetry survives.
    pub fn clipped(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.x.apply(|v| *v = v.clamp(-a, a));
        out
    }

    pub fn numerical_rank(&self) -> usize {
        linalg::numerical_rank(&self.x)
    }
}

/// Static and dynamic latent factors of equal shape.
#[derive(Clone, Debug)]
pub struct LatentFactorPair {
    pub s: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl LatentFactorPair {
    pub fn new(s: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self> {
        check_factor_shapes(&s, &q)?;
        let (n, r) = s.shape();
        if n < 2 || r < 1 || 2 * r > n {
            return Err(Error::param(format!("need N >= 2, r >= 1, 2r <= N; got N={n}, r={r}")));
        }
        Ok(Self { s, q })
    }

    /// Both factors with i.i.d. `N(0, 1)` entries.
    pub fn gaussian(n: usize, r: usize, rng: &mut RngStream) -> Result<Self> {
        let q = gaussian_matrix(n, r, rng)?;
        let s = gaussian_matrix(n, r, rng)?;
        Self::new(s, q)
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn r(&self) -> usize {
        self.s.ncols()
    }

    pub fn comparison(&self) -> ComparisonMatrix {
        build_comparison(&self.s, &self.q).expect("shapes checked on construction")
    }
}

pub(crate) fn gaussian_matrix(n: usize, r: usize, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(n, r);
    for i in 0..n {
        for k in 0..r {
            m[(i, k)] = rng.gaussian(0.0, 1.0)?;
        }
    }
    Ok(m)
}

fn check_factor_shapes(s: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<()> {
    if s.shape() != q.shape() {
        return Err(Error::dim(format!(
            "S is {}x{} but Q is {}x{}",
            s.nrows(),
            s.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    Ok(())
}

/// `X = S Q^T - Q S^T`, exactly skew-symmetric.
pub fn build_comparison(s: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<ComparisonMatrix> {
    check_factor_shapes(s, q)?;
    let a = s * q.transpose();
    let mut x = ComparisonMatrix::antisymmetrized(&a)?;
    x.rank_bound = Some(2 * s.ncols());
    Ok(x)
}

/// `X_ij = s_i - s_j`, the rank-2 transitive model.
pub fn build_transitive(s: &DVector<f64>) -> Result<ComparisonMatrix> {
    let n = s.len();
    if n < 2 {
        return Err(Error::param("transitive model needs at least two items"));
    }
    let mut x = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = s[i] - s[j];
            x[(i, j)] = v;
            x[(j, i)] = -v;
        }
    }
    Ok(ComparisonMatrix {
        x,
        time_index: None,
        rank_bound: Some(2),
    })
}

/// Fixed `Q` plus the walk `S^1, ..., S^T`.
#[derive(Clone, Debug)]
pub struct LatentTrajectory {
    pub q: DMatrix<f64>,
    pub s_list: Vec<DMatrix<f64>>,
    pub sigma2: f64,
}

impl LatentTrajectory {
    pub fn horizon(&self) -> usize {
        self.s_list.len()
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn r(&self) -> usize {
        self.q.ncols()
    }

    /// `X^t` for 1-based `t`.
    pub fn comparison_at(&self, t: usize) -> ComparisonMatrix {
        build_comparison(&self.s_list[t - 1], &self.q)
            .expect("trajectory shapes are consistent")
            .with_time(t)
    }

    /// `X^T`.
    pub fn final_comparison(&self) -> ComparisonMatrix {
        self.comparison_at(self.horizon())
    }
}

/// `S^t = S^{t-1} + E^t` with `E^t` i.i.d. `N(0, sigma2^2)`.
///
/// With `integer_rounding` each innovation entry is rounded to the nearest
/// integer before it is added. Innovations for step `t` come from the
/// sub-stream `rng.derive(t)`.
pub fn evolve_trajectory(
    s1: &DMatrix<f64>,
    q: &DMatrix<f64>,
    horizon: usize,
    sigma2: f64,
    rng: &RngStream,
    integer_rounding: bool,
) -> Result<LatentTrajectory> {
    check_factor_shapes(s1, q)?;
    if horizon == 0 {
        return Err(Error::param("horizon T must be >= 1"));
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::param(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    let mut s_list = Vec::with_capacity(horizon);
    s_list.push(s1.clone());
    for t in 2..=horizon {
        let mut step = rng.derive(t as u64);
        let mut next = s_list[t - 2].clone();
        for v in next.iter_mut() {
            let mut e = step.gaussian(0.0, sigma2)?;
            if integer_rounding {
                e = e.round();
            }
            *v += e;
        }
        s_list.push(next);
    }
    Ok(LatentTrajectory {
        q: q.clone(),
        s_list,
        sigma2,
    })
}

/// Largest violation `|X_ij - X_ik - X_kj|` over all triples.
pub fn cardinal_violation(x: &ComparisonMatrix) -> f64 {
    let n = x.n();
    let m = x.matrix();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((m[(i, j)] - m[(i, k)] - m[(k, j)]).abs());
            }
        }
    }
    worst
}

pub fn check_cardinal_transitivity(x: &ComparisonMatrix, tol: f64) -> bool {
    cardinal_violation(x) <= tol
}

/// `X_ik > 0 && X_kj > 0 => X_ij > 0` for every triple.
pub fn check_ordinal_transitivity(x: &ComparisonMatrix) -> bool {
    let n = x.n();
    let m = x.matrix();
    for i in 0..n {
        for k in 0..n {
            if m[(i, k)] <= 0.0 {
                continue;
            }
            for j in 0..n {
                if m[(k, j)] > 0.0 && m[(i, j)] <= 0.0 {
                    return false;
                }
            }
        }
    }
    true
}

/// Incoherence parameter and the numerical rank it was computed at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Incoherence {
    pub mu: f64,
    pub rank: usize,
}

impl Incoherence {
    /// Whether `1 <= mu <= sqrt(N / 2r)` holds for latent dimension `r`.
    ///
    /// Against its own numerical rank `mu` never exceeds `sqrt(N / rank)`; the
    /// check bites when the matrix has lower rank than the model assumes.
    pub fn within_theorem_range(&self, n: usize, r: usize) -> bool {
        self.mu >= 1.0 - 1e-12 && self.mu <= (n as f64 / (2 * r) as f64).sqrt() + 1e-12
    }
}

/// `mu = sqrt(N / r) * max_n max(|U_n:|, |V_n:|)` over the rank-`r` singular
/// subspaces, `r` the numerical rank.
pub fn incoherence(x: &ComparisonMatrix) -> Result<Incoherence> {
    let n = x.n();
    let svd = nalgebra::SVD::new(x.matrix().clone(), true, true);
    let sv = &svd.singular_values;
    let top = sv.iter().copied().fold(0.0f64, f64::max);
    if top == 0.0 {
        return Err(Error::ZeroMatrix("incoherence of the zero matrix is undefined"));
    }
    let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > linalg::RANK_TOL * top).collect();
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut max_row = 0.0f64;
    for row in 0..n {
        let un: f64 = keep.iter().map(|&k| u[(row, k)].powi(2)).sum::<f64>().sqrt();
        let vn: f64 = keep.iter().map(|&k| v_t[(k, row)].powi(2)).sum::<f64>().sqrt();
        max_row = max_row.max(un).max(vn);
    }
    let rank = keep.len();
    Ok(Incoherence {
        mu: (n as f64 / rank as f64).sqrt() * max_row,
        rank,
    })
}

/// Row means `X 1 / N`. For `X = s 1^T - 1 s^T` this is the centered score
/// `s - mean(s)`.
pub fn extract_score_vector(x: &ComparisonMatrix) -> DVector<f64> {
    let n = x.n();
    let m = x.matrix();
    DVector::from_fn(n, |i, _| m.row(i).sum() / n as f64)
}

/// `s - mean(s) 1`.
pub fn centered(s: &DVector<f64>) -> DVector<f64> {
    let mean = s.mean();
    s.map(|v| v - mean)
}

/// `|Xhat - X|_F^2 / |X|_F^2`.
pub fn relative_error<R, C, S1, S2>(xhat: &Matrix<f64, R, C, S1>, x: &Matrix<f64, R, C, S2>) -> Result<f64>
where
    R: Dim,
    C: Dim,
    S1: Storage<f64, R, C>,
    S2: Storage<f64, R, C>,
{
    if xhat.shape() != x.shape() {
        return Err(Error::dim(format!("{:?} vs {:?}", xhat.shape(), x.shape())));
    }
    let denom = x.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroMatrix("relative error against a zero ground truth"));
    }
    let num: f64 = xhat.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / denom)
}

/// Fraction of off-diagonal entries whose sign matches the ground truth.
///
/// Zero ground-truth entries are excluded; a zero estimate against a nonzero
/// truth counts as a miss. Returns 1.0 when no entry is eligible.
pub fn sign_accuracy(xhat: &DMatrix<f64>, xstar: &DMatrix<f64>) -> Result<f64> {
    if xhat.shape() != xstar.shape() {
        return Err(Error::dim(format!("{:?} vs {:?}", xhat.shape(), xstar.shape())));
    }
    let n = xstar.nrows();
    let (mut hits, mut total) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            let truth = xstar[(i, j)];
            if i == j || truth == 0.0 {
                continue;
            }
            total += 1;
            let est = xhat[(i, j)];
            if est != 0.0 && est.signum() == truth.signum() {
                hits += 1;
            }
        }
    }
    Ok(if total == 0 { 1.0 } else { hits as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn cycle() -> ComparisonMatrix {
        let h = 3f64.sqrt() / 2.0;
        build_comparison(&col(&[1.0, -0.5, -0.5]), &col(&[0.0, h, -h])).unwrap()
    }

    #[test]
    fn equal_factors_cancel() {
        let s = DMatrix::from_fn(5, 2, |i, j| (i * 3 + j) as f64 - 2.5);
        let x = build_comparison(&s, &s).unwrap();
        assert_eq!(x.matrix(), &DMatrix::zeros(5, 5));
    }

    #[test]
    fn two_item_example() {
        let x = build_comparison(&col(&[1.0, 2.0]), &col(&[1.0, 1.0])).unwrap();
        assert_eq!(x.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn planar_vectors_form_a_cycle() {
        let x = cycle();
        assert!(x.get(0, 1) > 0.0 && x.get(1, 2) > 0.0 && x.get(2, 0) > 0.0);
        assert!(!check_ordinal_transitivity(&x));
        assert!(!check_cardinal_transitivity(&x, 1e-6));
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(build_comparison(&DMatrix::zeros(3, 1), &DMatrix::zeros(3, 2)).is_err());
        assert!(LatentFactorPair::new(DMatrix::zeros(3, 2), DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn transitive_examples() {
        let x = build_transitive(&DVector::from_vec(vec![3.0, 1.0, 2.0])).unwrap();
        assert_eq!(x.get(0, 1), 2.0);
        assert_eq!(x.get(0, 2), 1.0);
        assert_eq!(x.get(1, 2), -1.0);
        assert_eq!(x.get(2, 1), 1.0);
        assert!(check_cardinal_transitivity(&x, 1e-12));
        assert!(check_ordinal_transitivity(&x));

        let flat = build_transitive(&DVector::from_element(4, 7.5)).unwrap();
        assert_eq!(flat.matrix(), &DMatrix::zeros(4, 4));
        assert!(build_transitive(&DVector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn transitive_matches_ones_factor() {
        let s = DVector::from_vec(vec![0.3, -1.2, 4.0, 2.2]);
        let a = build_transitive(&s).unwrap();
        let b = build_comparison(&col(s.as_slice()), &DMatrix::from_element(4, 1, 1.0)).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn zero_matrix_is_transitive() {
        let z = ComparisonMatrix::zeros(4);
        assert!(check_cardinal_transitivity(&z, 0.0));
        assert!(check_ordinal_transitivity(&z));
        assert!(incoherence(&z).is_err());
        assert_eq!(extract_score_vector(&z), DVector::zeros(4));
    }

    #[test]
    fn trajectory_static_and_replay() {
        let mut rng = RngStream::root(11);
        let pair = LatentFactorPair::gaussian(6, 2, &mut rng).unwrap();
        let stat = evolve_trajectory(&pair.s, &pair.q, 4, 0.0, &rng.derive(1), false).unwrap();
        assert_eq!(stat.horizon(), 4);
        assert!(stat.s_list.iter().all(|s| s == &pair.s));

        let a = evolve_trajectory(&pair.s, &pair.q, 3, 1.0, &rng.derive(2), false).unwrap();
        let b = evolve_trajectory(&pair.s, &pair.q, 3, 1.0, &rng.derive(2), false).unwrap();
        assert_eq!(a.s_list, b.s_list);
        assert_ne!(a.s_list[0], a.s_list[2]);
        assert!(evolve_trajectory(&pair.s, &pair.q, 3, -1.0, &rng, false).is_err());
    }

    #[test]
    fn rounded_innovations_are_integers() {
        let s1 = DMatrix::from_fn(5, 1, |i, _| 10.25 + i as f64);
        let q = DMatrix::from_element(5, 1, 1.0);
        let traj = evolve_trajectory(&s1, &q, 6, 0.1, &RngStream::root(3), true).unwrap();
        for s in &traj.s_list {
            for (a, b) in s.iter().zip(s1.iter()) {
                let d = a - b;
                assert_eq!(d, d.round());
            }
        }
        // At sigma2 = 2 rounding must still leave integer steps and move something.
        let moved = evolve_trajectory(&s1, &q, 6, 2.0, &RngStream::root(3), true).unwrap();
        assert_ne!(moved.s_list[5], s1);
        for (a, b) in moved.s_list[5].iter().zip(s1.iter()) {
            assert_eq!(a - b, (a - b).round());
        }
    }

    #[test]
    fn incoherence_at_least_one() {
        let s = DVector::from_fn(20, |i, _| (i + 1) as f64);
        let inc = incoherence(&build_transitive(&s).unwrap()).unwrap();
        assert_eq!(inc.rank, 2);
        assert!(inc.mu >= 1.0);
        assert!(inc.within_theorem_range(20, 1));
        // A matrix concentrated on two items is maximally coherent.
        let mut spiky = DMatrix::zeros(20, 20);
        spiky[(0, 1)] = 1.0;
        spiky[(1, 0)] = -1.0;
        let inc = incoherence(&ComparisonMatrix::from_skew(spiky).unwrap()).unwrap();
        assert_eq!(inc.rank, 2);
        assert!((inc.mu - 10f64.sqrt()).abs() < 1e-12);
        assert!(inc.within_theorem_range(20, 1));
        assert!(!inc.within_theorem_range(20, 2));
    }

    #[test]
    fn score_vector_centers() {
        let s = DVector::from_vec(vec![5.0, 1.0, -2.0, 8.0, 0.5]);
        let x = build_transitive(&s).unwrap();
        let got = extract_score_vector(&x);
        assert!((got - centered(&s)).amax() < 1e-12);
    }

    #[test]
    fn relative_error_examples() {
        let x = cycle().into_matrix();
        assert_eq!(relative_error(&x, &x).unwrap(), 0.0);
        assert_eq!(relative_error(&DMatrix::zeros(3, 3), &x).unwrap(), 1.0);
        assert!((relative_error(&(&x * 2.0), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_error(&x, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn sign_accuracy_examples() {
        let s = DVector::from_vec(vec![1.0, 3.0, 6.0, 10.0]);
        let x = build_transitive(&s).unwrap().into_matrix();
        assert_eq!(sign_accuracy(&x, &x).unwrap(), 1.0);
        assert_eq!(sign_accuracy(&(-&x), &x).unwrap(), 0.0);
        let mut noisy = x.clone();
        noisy[(0, 1)] += 1e-15;
        noisy[(3, 2)] -= 1e-15;
        assert_eq!(sign_accuracy(&noisy, &x).unwrap(), 1.0);
        assert_eq!(sign_accuracy(&DMatrix::zeros(4, 4), &x).unwrap(), 0.0);
    }

    #[test]
    fn from_skew_rejects_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(ComparisonMatrix::from_skew(bad).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(ComparisonMatrix::from_skew(diag).is_err());
    }
}
