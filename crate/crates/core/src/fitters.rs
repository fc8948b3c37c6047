//! Fitting procedures behind one uniform, deterministic interface.
//!
//! Each fitter maps a response vector to a fitted vector. All of them are
//! intercept-free, deterministic (fixed tie-breaking) and immutable after
//! construction, so a single fitter can be shared across Monte Carlo
//! replicates running on different threads.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_columns, ColumnBasis, DesignMatrix, RANK_TOL};

/// Exhaustive subset enumeration is a desk-scale tool; beyond this the
/// number of subsets explodes.
pub const MAX_SUBSET_P: usize = 25;

/// Output of one fit: the fitted vector, the selected support (column
/// indices for subset methods, the chosen point index for point sets,
/// all columns otherwise) and the residual sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub fitted: DVector<f64>,
    pub support: Vec<usize>,
    pub rss: f64,
}

impl FitResult {
    fn from_fitted(y: &DVector<f64>, fitted: DVector<f64>, support: Vec<usize>) -> Self {
        let rss = (y - &fitted).norm_squared();
        Self {
            fitted,
            support,
            rss,
        }
    }
}

/// A deterministic fitting procedure y -> y_hat.
#[derive(Debug, Clone)]
pub enum Fitter {
    Ols(OlsFitter),
    Ridge(RidgeFitter),
    BestSubset(BestSubsetFitter),
    ForwardStepwise(StepwiseFitter),
    /// Best subset specialized to the identity design: keep the k
    /// largest-magnitude coordinates, zero the rest.
    AxisSubset { n: usize, k: usize },
    PointSet(PointSetFitter),
}

impl Fitter {
    pub fn ols(design: DesignMatrix) -> Result<Self> {
        Ok(Self::Ols(OlsFitter::new(design)?))
    }

    pub fn ridge(design: DesignMatrix, lambda: f64) -> Result<Self> {
        Ok(Self::Ridge(RidgeFitter::new(design, lambda)?))
    }

    pub fn best_subset(design: DesignMatrix, k: usize) -> Result<Self> {
        Ok(Self::BestSubset(BestSubsetFitter::new(design, k)?))
    }

    pub fn forward_stepwise(design: DesignMatrix, k: usize) -> Result<Self> {
        Ok(Self::ForwardStepwise(StepwiseFitter::new(design, k)?))
    }

    pub fn axis_subset(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam("axis subset needs n >= 1".into()));
        }
        if k > n {
            return Err(Error::InvalidParam(format!(
                "axis subset size k = {k} exceeds dimension n = {n}"
            )));
        }
        Ok(Self::AxisSubset { n, k })
    }

    pub fn point_set(points: Vec<DVector<f64>>) -> Result<Self> {
        Ok(Self::PointSet(PointSetFitter::new(points)?))
    }

    /// Length of response vectors this fitter accepts.
    pub fn response_dim(&self) -> usize {
        match self {
            Self::Ols(f) => f.design.n(),
            Self::Ridge(f) => f.design.n(),
            Self::BestSubset(f) => f.design.n(),
            Self::ForwardStepwise(f) => f.design.n(),
            Self::AxisSubset { n, .. } => *n,
            Self::PointSet(f) => f.points[0].len(),
        }
    }

    pub fn fit(&self, y: &DVector<f64>) -> Result<FitResult> {
        if y.len() != self.response_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.response_dim(),
                got: y.len(),
            });
        }
        match self {
            Self::Ols(f) => Ok(f.fit(y)),
            Self::Ridge(f) => Ok(f.fit(y)),
            Self::BestSubset(f) => f.fit(y),
            Self::ForwardStepwise(f) => f.fit(y),
            Self::AxisSubset { n, k } => Ok(axis_subset_fit(*n, *k, y)),
            Self::PointSet(f) => Ok(f.fit(y)),
        }
    }

    /// Short human-readable description, used in CLI output.
    pub fn describe(&self) -> String {
        match self {
            Self::Ols(f) => format!("ols[{}x{}]", f.design.n(), f.design.p()),
            Self::Ridge(f) => format!("ridge[lambda={}]", f.lambda),
            Self::BestSubset(f) => format!("bsr[k={}]", f.k),
            Self::ForwardStepwise(f) => format!("fsr[k={}]", f.k),
            Self::AxisSubset { k, .. } => format!("axis[k={k}]"),
            Self::PointSet(f) => format!("points[{}]", f.points.len()),
        }
    }
}

/// OLS with the design's thin QR cached at construction.
#[derive(Debug, Clone)]
pub struct OlsFitter {
    design: DesignMatrix,
    q: DMatrix<f64>,
}

impl OlsFitter {
    pub fn new(design: DesignMatrix) -> Result<Self> {
        if !design.has_full_column_rank() {
            return Err(Error::RankDeficient {
                rank: design.rank(),
                cols: design.p(),
            });
        }
        let q = match orthonormal_columns(design.matrix(), RANK_TOL) {
            ColumnBasis::FullRank(q) => q,
            ColumnBasis::Deficient { rank, .. } => {
                return Err(Error::RankDeficient {
                    rank,
                    cols: design.p(),
                })
            }
        };
        Ok(Self { design, q })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    fn fit(&self, y: &DVector<f64>) -> FitResult {
        let coords = self.q.tr_mul(y);
        let fitted = &self.q * coords;
        FitResult::from_fitted(y, fitted, (0..self.design.p()).collect())
    }
}

/// Ridge via QR of the augmented system [X; sqrt(lambda) I].
///
/// The factorization is done once; each fit is two small matrix-vector
/// products: y_hat = (X R^-1) (Q1^T y).
#[derive(Debug, Clone)]
pub struct RidgeFitter {
    design: DesignMatrix,
    lambda: f64,
    q1: DMatrix<f64>,
    x_rinv: DMatrix<f64>,
}

impl RidgeFitter {
    pub fn new(design: DesignMatrix, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "ridge lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if lambda == 0.0 && !design.has_full_column_rank() {
            return Err(Error::RankDeficient {
                rank: design.rank(),
                cols: design.p(),
            });
        }
        let (n, p) = (design.n(), design.p());
        let mut aug = DMatrix::zeros(n + p, p);
        aug.view_mut((0, 0), (n, p)).copy_from(design.matrix());
        let root = lambda.sqrt();
        for j in 0..p {
            aug[(n + j, j)] = root;
        }
        let qr = aug.qr();
        let q = qr.q();
        let r = qr.r();
        let rinv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or(Error::RankDeficient {
                rank: design.rank(),
                cols: p,
            })?;
        let q1 = q.view((0, 0), (n, p)).into_owned();
        let x_rinv = design.matrix() * rinv;
        Ok(Self {
            design,
            lambda,
            q1,
            x_rinv,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn fit(&self, y: &DVector<f64>) -> FitResult {
        let t = self.q1.tr_mul(y);
        let fitted = &self.x_rinv * t;
        FitResult::from_fitted(y, fitted, (0..self.design.p()).collect())
    }
}

/// Exhaustive best-subset regression: RSS over all (p choose k) subsets,
/// each solved through its QR factor, cached at construction.
///
/// For a subset S with thin QR X_S = Q R, the projection energy is
/// |Q^T y|^2 = |R^-T (X_S^T y)|^2, so one X^T y per fit plus a small
/// forward substitution per subset replaces an n x k product per subset.
/// The R factors are stored packed (upper triangle, column by column) in
/// one flat buffer; subset index lists live in a parallel flat buffer.
#[derive(Debug, Clone)]
pub struct BestSubsetFitter {
    design: DesignMatrix,
    k: usize,
    /// k u32 column indices per subset, lexicographic subset order.
    indices: Vec<u32>,
    /// k(k+1)/2 packed R entries per subset, same order.
    rpack: Vec<f64>,
    subset_count: usize,
    skipped_rank_deficient: usize,
}

impl BestSubsetFitter {
    pub fn new(design: DesignMatrix, k: usize) -> Result<Self> {
        let p = design.p();
        if p > MAX_SUBSET_P {
            return Err(Error::SubsetTooLarge { p, max: MAX_SUBSET_P });
        }
        if k > p {
            return Err(Error::InvalidParam(format!(
                "subset size k = {k} exceeds p = {p}"
            )));
        }
        let n = design.n();
        let rlen = k * (k + 1) / 2;
        let mut indices: Vec<u32> = Vec::new();
        let mut rpack: Vec<f64> = Vec::new();
        let mut subset_count = 0usize;
        let mut skipped = 0usize;
        if k > 0 {
            let mut sub = DMatrix::zeros(n, k);
            for subset in combinations_lex(p, k) {
                for (j, &c) in subset.iter().enumerate() {
                    sub.set_column(j, &design.matrix().column(c));
                }
                // pivoted QR detects rank; the unpivoted R drives the solve
                // so the packed entries line up with the subset's own order
                if matches!(
                    orthonormal_columns(&sub, RANK_TOL),
                    ColumnBasis::Deficient { .. }
                ) {
                    skipped += 1;
                    continue;
                }
                let r = sub.clone().qr().unpack_r();
                for col in 0..k {
                    for row in 0..=col {
                        rpack.push(r[(row, col)]);
                    }
                }
                indices.extend(subset.iter().map(|&c| c as u32));
                subset_count += 1;
            }
            if subset_count == 0 {
                return Err(Error::InfeasibleSubset { k });
            }
            debug_assert_eq!(rpack.len(), subset_count * rlen);
        }
        Ok(Self {
            design,
            k,
            indices,
            rpack,
            subset_count,
            skipped_rank_deficient: skipped,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn skipped_subsets(&self) -> usize {
        self.skipped_rank_deficient
    }

    fn fit(&self, y: &DVector<f64>) -> Result<FitResult> {
        let n = self.design.n();
        let k = self.k;
        if k == 0 {
            return Ok(FitResult::from_fitted(y, DVector::zeros(n), Vec::new()));
        }
        let g = self.design.matrix().tr_mul(y);
        let gs = g.as_slice();
        let rlen = k * (k + 1) / 2;

        // argmin RSS = argmax |w|^2 with R^T w = X_S^T y; strict > keeps
        // the lexicographically first subset on ties
        let mut w = [0.0f64; MAX_SUBSET_P];
        let mut best = 0usize;
        let mut best_ssq = f64::NEG_INFINITY;
        let mut best_w = [0.0f64; MAX_SUBSET_P];
        for s in 0..self.subset_count {
            let idx = &self.indices[s * k..(s + 1) * k];
            let r = &self.rpack[s * rlen..(s + 1) * rlen];
            let mut ssq = 0.0;
            let mut off = 0usize;
            for j in 0..k {
                let mut acc = gs[idx[j] as usize];
                for i in 0..j {
                    acc -= r[off + i] * w[i];
                }
                let wj = acc / r[off + j];
                w[j] = wj;
                ssq += wj * wj;
                off += j + 1;
            }
            if ssq > best_ssq {
                best_ssq = ssq;
                best = s;
                best_w[..k].copy_from_slice(&w[..k]);
            }
        }

        // back substitution R beta = w, then fitted = X_S beta
        let idx = &self.indices[best * k..(best + 1) * k];
        let r = &self.rpack[best * rlen..(best + 1) * rlen];
        let mut beta = [0.0f64; MAX_SUBSET_P];
        for j in (0..k).rev() {
            let mut acc = best_w[j];
            for i in j + 1..k {
                // column i of packed R starts at i(i+1)/2
                acc -= r[i * (i + 1) / 2 + j] * beta[i];
            }
            beta[j] = acc / r[j * (j + 1) / 2 + j];
        }
        let mut fitted = DVector::zeros(n);
        let x = self.design.matrix();
        for (j, &c) in idx.iter().enumerate() {
            fitted.axpy(beta[j], &x.column(c as usize), 1.0);
        }
        let support: Vec<usize> = idx.iter().map(|&c| c as usize).collect();
        Ok(FitResult::from_fitted(y, fitted, support))
    }
}

/// Greedy forward stepwise: start from the empty model and add, k times,
/// the column whose OLS re-fit yields the lowest RSS.
#[derive(Debug, Clone)]
pub struct StepwiseFitter {
    design: DesignMatrix,
    k: usize,
}

impl StepwiseFitter {
    pub fn new(design: DesignMatrix, k: usize) -> Result<Self> {
        if k > design.p() {
            return Err(Error::InvalidParam(format!(
                "stepwise size k = {k} exceeds p = {}",
                design.p()
            )));
        }
        Ok(Self { design, k })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn fit(&self, y: &DVector<f64>) -> Result<FitResult> {
        let x = self.design.matrix();
        let (n, p) = (self.design.n(), self.design.p());
        let mut support: Vec<usize> = Vec::with_capacity(self.k);
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(self.k);
        let mut resid = y.clone();
        let col_norms: Vec<f64> = (0..p).map(|c| x.column(c).norm()).collect();

        for _ in 0..self.k {
            let mut best: Option<(usize, f64, DVector<f64>)> = None;
            for (c, &col_norm) in col_norms.iter().enumerate() {
                if support.contains(&c) {
                    continue;
                }
                // Residualize the candidate against the current basis;
                // a second pass keeps the direction orthogonal.
                let mut v: DVector<f64> = x.column(c).into_owned();
                for _ in 0..2 {
                    for u in &basis {
                        let coef = u.dot(&v);
                        v.axpy(-coef, u, 1.0);
                    }
                }
                let norm = v.norm();
                if norm <= RANK_TOL * col_norm.max(1.0) {
                    continue; // appending c leaves the subset rank deficient
                }
                let u = v / norm;
                let gain = u.dot(&resid).powi(2);
                let better = match &best {
                    None => true,
                    Some((_, g, _)) => gain > *g,
                };
                if better {
                    best = Some((c, gain, u));
                }
            }
            let (c, _, u) = best.ok_or(Error::RankDeficient {
                rank: support.len(),
                cols: support.len() + 1,
            })?;
            let coef = u.dot(&resid);
            resid.axpy(-coef, &u, 1.0);
            support.push(c);
            basis.push(u);
        }

        let mut fitted = DVector::zeros(n);
        for u in &basis {
            let coef = u.dot(y);
            fitted.axpy(coef, u, 1.0);
        }
        support.sort_unstable();
        Ok(FitResult::from_fitted(y, fitted, support))
    }
}

fn axis_subset_fit(n: usize, k: usize, y: &DVector<f64>) -> FitResult {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        y[b].abs()
            .partial_cmp(&y[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut support: Vec<usize> = order[..k].to_vec();
    support.sort_unstable();
    let mut fitted = DVector::zeros(n);
    for &i in &support {
        fitted[i] = y[i];
    }
    FitResult::from_fitted(y, fitted, support)
}

/// Projection onto a finite point set: the nearest point wins, ties go to
/// the smallest list index.
#[derive(Debug, Clone)]
pub struct PointSetFitter {
    points: Vec<DVector<f64>>,
}

impl PointSetFitter {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParam("point set must be nonempty".into()));
        }
        let n = points[0].len();
        if n == 0 {
            return Err(Error::InvalidParam("points must have dimension >= 1".into()));
        }
        for (i, pt) in points.iter().enumerate() {
            if pt.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: pt.len(),
                });
            }
            if pt.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam(format!("point {i} has non-finite entries")));
            }
            for prev in &points[..i] {
                if prev == pt {
                    return Err(Error::InvalidParam(format!("point {i} duplicates an earlier point")));
                }
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    fn fit(&self, y: &DVector<f64>) -> FitResult {
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (i, pt) in self.points.iter().enumerate() {
            let d2 = (y - pt).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        FitResult::from_fitted(y, self.points[best].clone(), vec![best])
    }
}

/// All size-k index subsets of 0..p in lexicographic order.
fn combinations_lex(p: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = if k <= p {
        Some((0..k).collect())
    } else {
        None
    };
    std::iter::from_fn(move || {
        let cur = current.clone()?;
        // advance to the next combination
        let mut next = cur.clone();
        let mut i = k;
        loop {
            if i == 0 {
                current = None;
                break;
            }
            i -= 1;
            if next[i] < p - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                current = Some(next);
                break;
            }
        }
        Some(cur)
    })
}

// Spec-level operation wrappers: construct the fitter and apply it once.

pub fn fit_ols(design: &DesignMatrix, y: &DVector<f64>) -> Result<FitResult> {
    Fitter::ols(design.clone())?.fit(y)
}

pub fn fit_ridge(design: &DesignMatrix, lambda: f64, y: &DVector<f64>) -> Result<FitResult> {
    Fitter::ridge(design.clone(), lambda)?.fit(y)
}

pub fn fit_best_subset(design: &DesignMatrix, k: usize, y: &DVector<f64>) -> Result<FitResult> {
    Fitter::best_subset(design.clone(), k)?.fit(y)
}

pub fn fit_forward_stepwise(design: &DesignMatrix, k: usize, y: &DVector<f64>) -> Result<FitResult> {
    Fitter::forward_stepwise(design.clone(), k)?.fit(y)
}

pub fn fit_axis_subset(k: usize, y: &DVector<f64>) -> Result<FitResult> {
    Fitter::axis_subset(y.len(), k)?.fit(y)
}

pub fn fit_point_set(points: &[DVector<f64>], y: &DVector<f64>) -> Result<FitResult> {
    Fitter::point_set(points.to_vec())?.fit(y)
}

/// Verifies `least_squares` residual orthogonality for a fitted result;
/// shared by tests.
#[cfg(test)]
pub(crate) fn residual_orthogonal(design: &DesignMatrix, y: &DVector<f64>, fitted: &DVector<f64>) -> f64 {
    design.matrix().tr_mul(&(y - fitted)).amax()
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

    fn random_y(n: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn ols_identity_is_identity_map() {
        let design = DesignMatrix::identity(2);
        let y = DVector::from_vec(vec![1.5, -0.25]);
        let res = fit_ols(&design, &y).unwrap();
        assert!((res.fitted - &y).amax() < 1e-12);
        assert!(res.rss < 1e-12);
    }

    #[test]
    fn ols_mean_fit() {
        let design = DesignMatrix::from_rows(2, 1, &[1.0, 1.0]).unwrap();
        let y = DVector::from_vec(vec![0.0, 4.0]);
        let res = fit_ols(&design, &y).unwrap();
        assert_relative_eq!(res.fitted[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(res.fitted[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn ols_normal_equations() {
        let design = seeded_gaussian(50, 15, 42);
        let y = random_y(50, 1);
        let res = fit_ols(&design, &y).unwrap();
        assert!(residual_orthogonal(&design, &y, &res.fitted) < 1e-8 * y.norm());
    }

    #[test]
    fn bsr_identity_picks_larger_coordinate() {
        let design = DesignMatrix::identity(2);
        let res = fit_best_subset(&design, 1, &DVector::from_vec(vec![3.0, 1.0])).unwrap();
        assert_eq!(res.support, vec![0]);
        assert_relative_eq!(res.fitted[0], 3.0, max_relative = 1e-12);
        assert!(res.fitted[1].abs() < 1e-12);

        let res = fit_best_subset(&design, 1, &DVector::from_vec(vec![1.0, 3.0])).unwrap();
        assert_eq!(res.support, vec![1]);
        assert!(res.fitted[0].abs() < 1e-12);
        assert_relative_eq!(res.fitted[1], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn bsr_full_k_equals_ols() {
        let design = seeded_gaussian(10, 4, 5);
        let y = random_y(10, 6);
        let bsr = fit_best_subset(&design, 4, &y).unwrap();
        let ols = fit_ols(&design, &y).unwrap();
        assert!((bsr.fitted - ols.fitted).amax() < 1e-10);
        assert_eq!(bsr.support, vec![0, 1, 2, 3]);
    }

    #[test]
    fn bsr_tie_breaks_lexicographically() {
        let design = DesignMatrix::identity(2);
        let res = fit_best_subset(&design, 1, &DVector::from_vec(vec![1.0, -1.0])).unwrap();
        assert_eq!(res.support, vec![0]);
    }

    #[test]
    fn bsr_k_zero_is_zero_fitter() {
        let design = seeded_gaussian(5, 3, 2);
        let y = random_y(5, 3);
        let res = fit_best_subset(&design, 0, &y).unwrap();
        assert_eq!(res.fitted, DVector::zeros(5));
        assert!(res.support.is_empty());
        assert_relative_eq!(res.rss, y.norm_squared(), max_relative = 1e-12);
    }

    #[test]
    fn bsr_caps_p() {
        let design = seeded_gaussian(30, 26, 8);
        assert!(matches!(
            Fitter::best_subset(design, 2),
            Err(Error::SubsetTooLarge { p: 26, max: 25 })
        ));
    }

    #[test]
    fn bsr_infeasible_when_all_subsets_singular() {
        let design = DesignMatrix::from_rows(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            Fitter::best_subset(design, 2),
            Err(Error::InfeasibleSubset { k: 2 })
        ));
    }

    #[test]
    fn fsr_errors_when_no_feasible_column_remains() {
        // two parallel columns: after the first step the second adds nothing
        let design = DesignMatrix::from_rows(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        let f = Fitter::forward_stepwise(design, 2).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(f.fit(&y), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn bsr_skips_rank_deficient_subsets() {
        // duplicate column: subset {0,1} is singular; {0,2} and {1,2} are fine
        let design = DesignMatrix::from_rows(
            3,
            3,
            &[
                1.0, 1.0, 0.0, //
                2.0, 2.0, 1.0, //
                0.0, 0.0, 3.0,
            ],
        )
        .unwrap();
        let f = BestSubsetFitter::new(design, 2).unwrap();
        assert_eq!(f.skipped_subsets(), 1);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let res = f.fit(&y).unwrap();
        assert_eq!(res.support.len(), 2);
        assert_ne!(res.support, vec![0, 1]);
    }

    #[test]
    fn fsr_identity_matches_bsr() {
        let design = DesignMatrix::identity(2);
        let res = fit_forward_stepwise(&design, 1, &DVector::from_vec(vec![3.0, 1.0])).unwrap();
        assert_eq!(res.support, vec![0]);
    }

    #[test]
    fn fsr_full_k_equals_ols() {
        let design = seeded_gaussian(12, 5, 9);
        let y = random_y(12, 10);
        let fsr = fit_forward_stepwise(&design, 5, &y).unwrap();
        let ols = fit_ols(&design, &y).unwrap();
        assert!((fsr.fitted - ols.fitted).amax() < 1e-9);
    }

    #[test]
    fn fsr_rss_dominated_by_bsr() {
        for seed in 0..10 {
            let design = seeded_gaussian(50, 15, 100 + seed);
            let y = random_y(50, 200 + seed);
            for k in 1..=4 {
                let bsr = fit_best_subset(&design, k, &y).unwrap();
                let fsr = fit_forward_stepwise(&design, k, &y).unwrap();
                assert!(
                    fsr.rss >= bsr.rss - 1e-9 * y.norm_squared(),
                    "seed {seed} k {k}: fsr {} < bsr {}",
                    fsr.rss,
                    bsr.rss
                );
            }
        }
    }

    #[test]
    fn axis_subset_examples() {
        let res = fit_axis_subset(1, &DVector::from_vec(vec![3.0, -5.0])).unwrap();
        assert_eq!(res.support, vec![1]);
        assert!(res.fitted[0].abs() < 1e-15);
        assert_relative_eq!(res.fitted[1], -5.0, max_relative = 1e-15);

        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let res = fit_axis_subset(3, &y).unwrap();
        assert_eq!(res.fitted, y);

        // tie on |y|: smaller index kept
        let res = fit_axis_subset(1, &DVector::from_vec(vec![2.0, -2.0])).unwrap();
        assert_eq!(res.support, vec![0]);
    }

    #[test]
    fn axis_subset_agrees_with_bsr_identity() {
        let design = DesignMatrix::identity(2);
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let y = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let a = fit_axis_subset(1, &y).unwrap();
            let b = fit_best_subset(&design, 1, &y).unwrap();
            assert_eq!(a.support, b.support);
            assert!((a.fitted - b.fitted).amax() < 1e-12);
        }
    }

    #[test]
    fn point_set_examples() {
        let pts = vec![DVector::from_vec(vec![-1.0]), DVector::from_vec(vec![1.0])];
        let res = fit_point_set(&pts, &DVector::from_vec(vec![0.2])).unwrap();
        assert_eq!(res.support, vec![1]);
        assert_relative_eq!(res.fitted[0], 1.0, max_relative = 1e-15);

        let res = fit_point_set(&pts, &DVector::from_vec(vec![0.0])).unwrap();
        assert_eq!(res.support, vec![0]);
        assert_relative_eq!(res.fitted[0], -1.0, max_relative = 1e-15);

        let single = vec![DVector::from_vec(vec![2.0, -3.0])];
        let res = fit_point_set(&single, &DVector::from_vec(vec![9.0, 9.0])).unwrap();
        assert_eq!(res.fitted, single[0]);
    }

    #[test]
    fn point_set_rejects_duplicates_and_empty() {
        assert!(Fitter::point_set(vec![]).is_err());
        let dup = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![1.0])];
        assert!(Fitter::point_set(dup).is_err());
    }

    #[test]
    fn ridge_examples() {
        let design = DesignMatrix::identity(2);
        let y = DVector::from_vec(vec![2.0, 4.0]);
        let res = fit_ridge(&design, 1.0, &y).unwrap();
        assert_relative_eq!(res.fitted[0], 1.0, max_relative = 1e-10);
        assert_relative_eq!(res.fitted[1], 2.0, max_relative = 1e-10);

        let design = seeded_gaussian(8, 3, 4);
        let y = random_y(8, 5);
        let r0 = fit_ridge(&design, 0.0, &y).unwrap();
        let ols = fit_ols(&design, &y).unwrap();
        assert!((r0.fitted - ols.fitted).amax() < 1e-9);

        let big = fit_ridge(&design, 1e12, &y).unwrap();
        assert!(big.fitted.norm() <= 1e-6 * y.norm());
    }

    #[test]
    fn ridge_zero_lambda_needs_full_rank() {
        let design = DesignMatrix::from_rows(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            Fitter::ridge(design.clone(), 0.0),
            Err(Error::RankDeficient { .. })
        ));
        // positive lambda regularizes the singular design
        let f = Fitter::ridge(design, 0.5).unwrap();
        let y = DVector::from_vec(vec![1.0, 3.0]);
        assert!(f.fit(&y).is_ok());
    }

    #[test]
    fn rss_monotone_in_k() {
        let design = seeded_gaussian(12, 6, 55);
        let y = random_y(12, 56);
        let mut prev_bsr = f64::INFINITY;
        let mut prev_fsr = f64::INFINITY;
        for k in 0..=6 {
            let bsr = fit_best_subset(&design, k, &y).unwrap();
            let fsr = fit_forward_stepwise(&design, k, &y).unwrap();
            assert!(bsr.rss <= prev_bsr + 1e-10);
            assert!(fsr.rss <= prev_fsr + 1e-10);
            prev_bsr = bsr.rss;
            prev_fsr = fsr.rss;
        }
    }

    #[test]
    fn deterministic_fit_results() {
        let design = seeded_gaussian(10, 4, 3);
        let f = Fitter::best_subset(design, 2).unwrap();
        let y = random_y(10, 4);
        let a = f.fit(&y).unwrap();
        let b = f.fit(&y).unwrap();
        assert_eq!(a, b);
        assert!(a.fitted.iter().zip(b.fitted.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn projection_idempotence() {
        let design = seeded_gaussian(8, 4, 60);
        for k in 1..=3 {
            let f = Fitter::best_subset(design.clone(), k).unwrap();
            let y = random_y(8, 61);
            let once = f.fit(&y).unwrap();
            let twice = f.fit(&once.fitted).unwrap();
            assert!(
                (&twice.fitted - &once.fitted).amax() < 1e-10 * (1.0 + once.fitted.amax()),
                "k = {k}"
            );
        }
        let y = random_y(6, 62);
        let once = fit_axis_subset(2, &y).unwrap();
        let twice = fit_axis_subset(2, &once.fitted).unwrap();
        assert_eq!(once.fitted, twice.fitted);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<Vec<usize>> = combinations_lex(4, 2).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(combinations_lex(3, 0).count(), 1);
        assert_eq!(combinations_lex(15, 7).count(), 6435);
    }
}
