//! Dense linear-algebra primitives shared by every fitter: least-squares
//! solves, orthogonal projections and numerical rank detection.
//!
//! Everything here is double precision and sized for small dense problems
//! (n, p up to a few hundred). Values are immutable after construction and
//! safe to share across threads.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for rank decisions, applied to the largest singular
/// value (or the largest R diagonal in pivoted QR).
pub const RANK_TOL: f64 = 1e-10;

/// An immutable n x p design matrix with its numerical rank cached at
/// construction time.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
    rank: usize,
    singular_values: Vec<f64>,
}

impl DesignMatrix {
    /// Wraps a dense matrix, validating shape and finiteness and caching
    /// the numerical rank under [`RANK_TOL`].
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidParam(
                "design matrix must have at least one row and one column".into(),
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(
                "design matrix entries must be finite".into(),
            ));
        }
        let mut singular_values: Vec<f64> =
            entries.clone().svd(false, false).singular_values.iter().copied().collect();
        singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let rank = rank_from_singular_values(&singular_values, RANK_TOL);
        Ok(Self {
            entries,
            rank,
            singular_values,
        })
    }

    /// Builds from row-major data.
    pub fn from_rows(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::InvalidParam(format!(
                "expected {} entries for a {n} x {p} matrix, got {}",
                n * p,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, p, data))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is a valid design")
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn p(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Numerical column rank under [`RANK_TOL`], cached at construction.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn has_full_column_rank(&self) -> bool {
        self.rank == self.p()
    }
}

/// A linear subspace of R^n held as an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps an n x d matrix whose columns must already be orthonormal
    /// (B^T B = I within 1e-10 elementwise).
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        if basis.ncols() > basis.nrows() {
            return Err(Error::InvalidParam(format!(
                "subspace dimension {} exceeds ambient dimension {}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        let gram = basis.tr_mul(&basis);
        let eye = DMatrix::identity(basis.ncols(), basis.ncols());
        let max_dev = (&gram - &eye).amax();
        if basis.ncols() > 0 && max_dev > 1e-10 {
            return Err(Error::InvalidParam(format!(
                "basis is not orthonormal (max |B^T B - I| = {max_dev:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    /// The span of the columns of `m`, orthonormalized by pivoted QR and
    /// truncated to the numerical rank.
    pub fn span_of_columns(m: &DMatrix<f64>) -> Self {
        match orthonormal_columns(m, RANK_TOL) {
            ColumnBasis::FullRank(q) | ColumnBasis::Deficient { basis: q, .. } => {
                Self { basis: q }
            }
        }
    }

    /// The zero subspace of R^n.
    pub fn zero(n: usize) -> Self {
        Self {
            basis: DMatrix::zeros(n, 0),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

/// Solves min |y - X b| by (unpivoted) QR on a full-column-rank design.
///
/// Returns the coefficients, the fitted vector X b and the residual sum of
/// squares. Rank is checked against the cached SVD rank first so callers
/// get `RankDeficient` with the detected rank rather than garbage.
pub fn least_squares(x: &DesignMatrix, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            got: y.len(),
        });
    }
    if !x.has_full_column_rank() {
        return Err(Error::RankDeficient {
            rank: x.rank(),
            cols: x.p(),
        });
    }
    let qr = x.matrix().clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.tr_mul(y);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient {
            rank: x.rank(),
            cols: x.p(),
        })?;
    let fitted = x.matrix() * &beta;
    let rss = (y - &fitted).norm_squared();
    Ok((beta, fitted, rss))
}

/// Orthogonal projection of `y` onto the subspace: B (B^T y).
pub fn project_subspace(s: &Subspace, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != s.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: s.ambient_dim(),
            got: y.len(),
        });
    }
    if s.dim() == 0 {
        return Ok(DVector::zeros(y.len()));
    }
    let coords = s.basis().tr_mul(y);
    Ok(s.basis() * coords)
}

/// Count of singular values exceeding `tol` times the largest one.
pub fn numerical_rank(x: &DesignMatrix, tol: f64) -> usize {
    assert!(tol > 0.0, "rank tolerance must be positive");
    rank_from_singular_values(x.singular_values(), tol)
}

fn rank_from_singular_values(sv: &[f64], tol: f64) -> usize {
    let max = sv.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Outcome of orthonormalizing the columns of a matrix.
pub enum ColumnBasis {
    /// All columns independent; the basis spans the full column set.
    FullRank(DMatrix<f64>),
    /// Numerical rank fell short; basis holds the leading `rank` directions.
    Deficient { basis: DMatrix<f64>, rank: usize },
}

/// Orthonormal basis for the column space of `m` via column-pivoted QR.
///
/// Rank is decided by comparing R's diagonal against `tol` times its
/// largest entry, mirroring the SVD criterion.
pub fn orthonormal_columns(m: &DMatrix<f64>, tol: f64) -> ColumnBasis {
    let k = m.ncols().min(m.nrows());
    if k == 0 {
        return ColumnBasis::FullRank(DMatrix::zeros(m.nrows(), 0));
    }
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let rmax = (0..k).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    let rank = if rmax <= 0.0 {
        0
    } else {
        (0..k).take_while(|&i| r[(i, i)].abs() > tol * rmax).count()
    };
    let q = qr.q();
    if rank == m.ncols() {
        ColumnBasis::FullRank(q)
    } else {
        ColumnBasis::Deficient {
            basis: q.columns(0, rank).into_owned(),
            rank,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn seeded_gaussian(n: usize, p: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        DesignMatrix::from_rows(n, p, &data).unwrap()
    }

    #[test]
    fn least_squares_identity_design() {
        let x = DesignMatrix::identity(2);
        let y = DVector::from_vec(vec![3.0, -1.0]);
        let (beta, fitted, rss) = least_squares(&x, &y).unwrap();
        assert_relative_eq!(beta[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(beta[1], -1.0, max_relative = 1e-12);
        assert_relative_eq!(fitted[0], 3.0, max_relative = 1e-12);
        assert!(rss.abs() < 1e-12);
    }

    #[test]
    fn least_squares_mean_fit() {
        let x = DesignMatrix::from_rows(2, 1, &[1.0, 1.0]).unwrap();
        let y = DVector::from_vec(vec![1.0, 3.0]);
        let (beta, fitted, rss) = least_squares(&x, &y).unwrap();
        assert_relative_eq!(beta[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(fitted[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(fitted[1], 2.0, max_relative = 1e-12);
        assert_relative_eq!(rss, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn least_squares_noiseless_recovery() {
        let x = seeded_gaussian(50, 15, 7);
        let beta_true = DVector::from_element(15, 1.0);
        let y = x.matrix() * &beta_true;
        let (_, _, rss) = least_squares(&x, &y).unwrap();
        assert!(rss < 1e-8, "rss = {rss}");
    }

    #[test]
    fn least_squares_normal_equations_residual() {
        let x = seeded_gaussian(50, 15, 11);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let y = DVector::from_fn(50, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (_, fitted, _) = least_squares(&x, &y).unwrap();
        let resid = &y - &fitted;
        let xtr = x.matrix().tr_mul(&resid);
        assert!(xtr.amax() <= 1e-8 * y.norm(), "X^T r = {:?}", xtr.amax());
    }

    #[test]
    fn least_squares_rejects_rank_deficient() {
        let x = DesignMatrix::from_rows(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0]);
        match least_squares(&x, &y) {
            Err(Error::RankDeficient { rank, cols }) => {
                assert_eq!(rank, 1);
                assert_eq!(cols, 2);
            }
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn project_axis() {
        let basis = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let s = Subspace::new(basis).unwrap();
        let y = DVector::from_vec(vec![2.0, 5.0]);
        let proj = project_subspace(&s, &y).unwrap();
        assert_relative_eq!(proj[0], 2.0, max_relative = 1e-12);
        assert!(proj[1].abs() < 1e-12);
    }

    #[test]
    fn project_full_space_is_identity() {
        let s = Subspace::new(DMatrix::identity(3, 3)).unwrap();
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let proj = project_subspace(&s, &y).unwrap();
        assert_relative_eq!((proj - &y).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn project_zero_space() {
        let s = Subspace::zero(2);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let proj = project_subspace(&s, &y).unwrap();
        assert_eq!(proj, DVector::zeros(2));
    }

    #[test]
    fn project_dimension_mismatch() {
        let s = Subspace::zero(2);
        let y = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert!(matches!(
            project_subspace(&s, &y),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn numerical_rank_examples() {
        assert_eq!(numerical_rank(&DesignMatrix::identity(2), 1e-10), 2);
        let ones = DesignMatrix::from_rows(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(numerical_rank(&ones, 1e-10), 1);
        let zero = DesignMatrix::from_rows(2, 2, &[0.0; 4]).unwrap();
        assert_eq!(numerical_rank(&zero, 1e-10), 0);
    }

    #[test]
    fn projection_idempotent_and_pythagoras() {
        let m = seeded_gaussian(6, 3, 21);
        let s = Subspace::span_of_columns(m.matrix());
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let y = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let p1 = project_subspace(&s, &y).unwrap();
            let p2 = project_subspace(&s, &p1).unwrap();
            assert!((&p2 - &p1).amax() < 1e-10);
            let resid = &y - &p1;
            let lhs = y.norm_squared();
            let rhs = p1.norm_squared() + resid.norm_squared();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
            assert!(p1.norm() <= y.norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn least_squares_matches_column_space_projection() {
        let x = seeded_gaussian(10, 4, 33);
        let s = Subspace::span_of_columns(x.matrix());
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let y = DVector::from_fn(10, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (_, fitted, _) = least_squares(&x, &y).unwrap();
        let proj = project_subspace(&s, &y).unwrap();
        assert!((fitted - proj).amax() < 1e-8);
    }

    #[test]
    fn subspace_rejects_non_orthonormal() {
        let basis = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(Subspace::new(basis).is_err());
    }
}
