//! Exact and independently-computed DF references: hat-matrix traces for
//! linear fitters, tensor-product Gauss-Hermite quadrature for small n,
//! and the closed-form limit of the diagonal scaling example.
//!
//! Quadrature values for fitters with decision boundaries converge slowly
//! (the integrand has kinks), so every quadrature call evaluates at m and
//! 2m nodes and returns the pair together with its Richardson
//! extrapolation; callers decide whether the discrepancy is acceptable.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::fitters::Fitter;
use crate::mc::{DataModel, NoiseLaw};

/// Tensor-product quadrature is limited to this many dimensions.
pub const QUADRATURE_MAX_DIM: usize = 3;

/// Relative discrepancy below which a quadrature pair counts as converged.
pub const QUADRATURE_CONVERGENCE_TOL: f64 = 1e-6;

/// Gauss-Hermite rule adapted to the standard normal density: for an
/// m-node rule, sum(w_i f(x_i)) equals E[f(Z)], Z ~ N(0,1), exactly for
/// polynomials up to degree 2m - 1.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

type RuleData = Arc<(Vec<f64>, Vec<f64>)>;

/// Rules are deterministic in (family, m); memoize them since the
/// eigendecomposition is the expensive part of every quadrature call.
static RULE_CACHE: LazyLock<Mutex<HashMap<(RuleFamily, usize), RuleData>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RuleFamily {
    Hermite,
    Legendre,
}

fn cached_rule(family: RuleFamily, m: usize, build: fn(usize) -> (Vec<f64>, Vec<f64>)) -> RuleData {
    let key = (family, m);
    let cached = RULE_CACHE
        .lock()
        .expect("rule cache poisoned")
        .get(&key)
        .cloned();
    match cached {
        Some(arc) => arc,
        None => {
            let arc = Arc::new(build(m));
            RULE_CACHE
                .lock()
                .expect("rule cache poisoned")
                .insert(key, arc.clone());
            arc
        }
    }
}

impl QuadratureRule {
    /// Builds the m-node rule by Golub-Welsch: nodes are eigenvalues of
    /// the Jacobi matrix of the Hermite recurrence, weights come from the
    /// first eigenvector components.
    pub fn gauss_hermite(m: usize) -> Self {
        assert!(m >= 1, "quadrature needs at least one node");
        let arc = cached_rule(RuleFamily::Hermite, m, gauss_hermite_normal);
        Self {
            nodes: arc.0.clone(),
            weights: arc.1.clone(),
        }
    }

    /// Gauss-Legendre on [-1, 1] (weights sum to 2), by the same
    /// Golub-Welsch construction.
    pub fn gauss_legendre(m: usize) -> Self {
        assert!(m >= 1, "quadrature needs at least one node");
        let arc = cached_rule(RuleFamily::Legendre, m, gauss_legendre_unit);
        Self {
            nodes: arc.0.clone(),
            weights: arc.1.clone(),
        }
    }

    /// Integral of f over [lo, hi] under this Gauss-Legendre rule.
    pub fn integrate_interval(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut acc = Neumaier::default();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(mid + half * x));
        }
        half * acc.total()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[f(Z)] for Z ~ N(0,1).
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = Neumaier::default();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.total()
    }
}

/// Nodes and weights adapted to the standard normal measure, ascending.
///
/// Jacobi matrix for physicists' Hermite: zero diagonal, off-diagonal
/// sqrt(j/2). Adapted nodes are sqrt(2) times its eigenvalues; adapted
/// weights are the squared first eigenvector components, which already
/// sum to one. Node symmetry is enforced by averaging mirror pairs.
fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let mut jacobi = DMatrix::zeros(n, n);
    for j in 1..n {
        let b = (j as f64 / 2.0).sqrt();
        jacobi[(j, j - 1)] = b;
        jacobi[(j - 1, j)] = b;
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let root2 = std::f64::consts::SQRT_2;
    let mut nodes: Vec<f64> = pairs.iter().map(|&(x, _)| root2 * x).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|&(_, w)| w).collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let z = (nodes[j] - nodes[i]) / 2.0;
        nodes[i] = -z;
        nodes[j] = z;
        let w = (weights[i] + weights[j]) / 2.0;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Legendre on [-1, 1]: Jacobi matrix has zero diagonal and
/// off-diagonal j / sqrt(4 j^2 - 1); the weight measure has total mass 2.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut jacobi = DMatrix::zeros(n, n);
    for j in 1..n {
        let jf = j as f64;
        let b = jf / (4.0 * jf * jf - 1.0).sqrt();
        jacobi[(j, j - 1)] = b;
        jacobi[(j - 1, j)] = b;
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut nodes: Vec<f64> = pairs.iter().map(|&(x, _)| x).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|&(_, w)| w).collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let z = (nodes[j] - nodes[i]) / 2.0;
        nodes[i] = -z;
        nodes[j] = z;
        let w = (weights[i] + weights[j]) / 2.0;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Compensated (Neumaier) summation; order of `add` calls is fixed by the
/// caller, keeping reductions bit-deterministic.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Hat-matrix trace for linear fitters.
///
/// OLS has trace p (the design is full rank by construction); ridge has
/// trace sum d_i^2 / (d_i^2 + lambda) over the design's singular values.
pub fn df_trace_linear(fitter: &Fitter) -> Result<f64> {
    match fitter {
        Fitter::Ols(f) => Ok(f.design().p() as f64),
        Fitter::Ridge(f) => {
            let lambda = f.lambda();
            Ok(f.design()
                .singular_values()
                .iter()
                .map(|&d| {
                    let d2 = d * d;
                    if d2 == 0.0 && lambda == 0.0 {
                        0.0
                    } else {
                        d2 / (d2 + lambda)
                    }
                })
                .sum())
        }
        _ => Err(Error::NotLinear),
    }
}

/// A quadrature value at m and 2m nodes per dimension, plus the
/// first-order Richardson extrapolation of the pair.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureEstimate {
    /// Richardson extrapolation 2*fine - coarse; exact integrands leave it
    /// equal to `fine`.
    pub value: f64,
    pub coarse: f64,
    pub fine: f64,
}

impl QuadratureEstimate {
    pub fn discrepancy(&self) -> f64 {
        (self.fine - self.coarse).abs()
    }

    pub fn rel_discrepancy(&self) -> f64 {
        self.discrepancy() / self.fine.abs().max(f64::MIN_POSITIVE)
    }

    /// Whether doubling the node count moved the value by less than `tol`
    /// relative. Reported, never raised.
    pub fn converged(&self, tol: f64) -> bool {
        self.rel_discrepancy() < tol
    }

    /// The value, but only when the pair has converged at `tol`.
    pub fn converged_value(&self, tol: f64) -> Option<f64> {
        self.converged(tol).then_some(self.value)
    }
}

/// DF by deterministic integration: (1/sigma) E[z^T y_hat(mu + sigma z)]
/// over the standard Gaussian z, evaluated at `nodes_per_dim` and twice
/// that. Only n <= 3 and Gaussian noise are supported. Fitters with
/// decision boundaries need nodes_per_dim >= 64.
pub fn df_quadrature(
    model: &DataModel,
    fitter: &Fitter,
    nodes_per_dim: usize,
) -> Result<QuadratureEstimate> {
    let n = model.dim();
    if n > QUADRATURE_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            n,
            max: QUADRATURE_MAX_DIM,
        });
    }
    if fitter.response_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: fitter.response_dim(),
        });
    }
    match model.noise() {
        NoiseLaw::StandardGaussian => {}
    }
    if nodes_per_dim < 2 {
        return Err(Error::InvalidParam(
            "quadrature needs at least 2 nodes per dimension".into(),
        ));
    }
    let coarse = tensor_df(model, fitter, nodes_per_dim)?;
    let fine = tensor_df(model, fitter, 2 * nodes_per_dim)?;
    Ok(QuadratureEstimate {
        value: 2.0 * fine - coarse,
        coarse,
        fine,
    })
}

fn tensor_df(model: &DataModel, fitter: &Fitter, m: usize) -> Result<f64> {
    let rule = QuadratureRule::gauss_hermite(m);
    let nodes = rule.nodes();
    let weights = rule.weights();
    let n = model.dim();
    let mu = model.mu();
    let sigma = model.sigma();
    let mut z = DVector::zeros(n);
    let mut acc = Neumaier::default();
    let eval = |z: &DVector<f64>, w: f64, acc: &mut Neumaier| -> Result<()> {
        let y = mu + sigma * z;
        let fit = fitter.fit(&y)?;
        acc.add(w * z.dot(&fit.fitted));
        Ok(())
    };
    match n {
        1 => {
            for (i, &zi) in nodes.iter().enumerate() {
                z[0] = zi;
                eval(&z, weights[i], &mut acc)?;
            }
        }
        2 => {
            for (i, &zi) in nodes.iter().enumerate() {
                z[0] = zi;
                for (j, &zj) in nodes.iter().enumerate() {
                    z[1] = zj;
                    eval(&z, weights[i] * weights[j], &mut acc)?;
                }
            }
        }
        3 => {
            for (i, &zi) in nodes.iter().enumerate() {
                z[0] = zi;
                for (j, &zj) in nodes.iter().enumerate() {
                    z[1] = zj;
                    for (k, &zk) in nodes.iter().enumerate() {
                        z[2] = zk;
                        eval(&z, weights[i] * weights[j] * weights[k], &mut acc)?;
                    }
                }
            }
        }
        _ => unreachable!("dimension checked above"),
    }
    Ok(acc.total() / sigma)
}

/// Exact DF of keep-the-larger-of-two coordinates (n = 2, subset size 1)
/// at mean `mu` and noise scale `sigma`.
///
/// Conditioning on one coordinate collapses the 2D expectation into two
/// 1D integrals of smooth functions: the probability that coordinate i
/// wins is a difference of normal CDFs. The integrand's only kink, from
/// |mu_i + sigma e|, sits at e = -mu_i / sigma; integrating each side
/// piecewise with Gauss-Legendre panels reaches near machine precision,
/// unlike tensor quadrature, whose kink crosses the node lattice.
pub fn df_axis_pair_reference(mu: [f64; 2], sigma: f64) -> f64 {
    assert!(sigma > 0.0 && sigma.is_finite(), "sigma must be positive");
    let term = |mu_i: f64, mu_j: f64| -> f64 {
        let f = |e: f64| {
            let t = (mu_i + sigma * e).abs();
            let win = normal_cdf((t - mu_j) / sigma) - normal_cdf((-t - mu_j) / sigma);
            e * (mu_i + sigma * e) * win * normal_pdf(e)
        };
        integrate_with_kink(&f, -mu_i / sigma)
    };
    (term(mu[0], mu[1]) + term(mu[1], mu[0])) / sigma
}

/// Integral of f against de over [-10, 10], split at one known kink and
/// into panels short enough that 32-node Gauss-Legendre resolves each to
/// machine precision. The caller folds the Gaussian density into f.
fn integrate_with_kink(f: &impl Fn(f64) -> f64, kink: f64) -> f64 {
    const BOUND: f64 = 10.0;
    let rule = QuadratureRule::gauss_legendre(32);
    let mut cuts = vec![-BOUND];
    if kink > -BOUND && kink < BOUND {
        cuts.push(kink);
    }
    cuts.push(BOUND);
    let mut acc = Neumaier::default();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let nseg = (((hi - lo) / 2.0).ceil() as usize).max(1);
        for s in 0..nseg {
            let a = lo + (hi - lo) * s as f64 / nseg as f64;
            let b = lo + (hi - lo) * (s + 1) as f64 / nseg as f64;
            acc.add(rule.integrate_interval(a, b, f));
        }
    }
    acc.total()
}

/// Pixel-level ground truth for the heatmap setting: keep-one-of-two on
/// the identity design, sigma = 1.
pub fn df_heatmap_reference(mu: [f64; 2]) -> f64 {
    df_axis_pair_reference(mu, 1.0)
}

/// E[max(Z1, Z2)] for independent standard normals: 1/sqrt(pi).
///
/// The closed form is cross-checked against a quadrature evaluation of
/// the smooth conditional E[t Phi(t) + phi(t)] before being returned.
pub fn df_scaling_limit() -> f64 {
    let closed = 1.0 / std::f64::consts::PI.sqrt();
    let rule = QuadratureRule::gauss_hermite(64);
    let quad = rule.expectation(|t| t * normal_cdf(t) + normal_pdf(t));
    assert!(
        (quad - closed).abs() < 1e-10,
        "quadrature check failed: {quad} vs {closed}"
    );
    closed
}

pub fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
