//! Monte Carlo estimation of effective degrees of freedom.
//!
//! DF is estimated from replicates of y = mu + sigma * eps in two ways:
//! the covariance form averages eps^T y_hat / sigma^2, and the optimism
//! form averages (|y* - y_hat|^2 - |y - y_hat|^2) / (2 sigma^2) with an
//! independent noise copy y*. Both are unbiased for the same quantity.
//!
//! Every replicate owns its own counter-derived RNG stream, and replicate
//! statistics are reduced block-by-block in index order, so results are
//! bit-identical for a given seed no matter how many workers run.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fitters::Fitter;

/// Noise law for the i.i.d. errors. Each law must have mean zero and unit
/// variance; `sigma` carries all scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseLaw {
    StandardGaussian,
}

/// The data-generating triple (mu, sigma, noise law) for y = mu + sigma * eps.
#[derive(Debug, Clone)]
pub struct DataModel {
    mu: DVector<f64>,
    sigma: f64,
    noise: NoiseLaw,
}

impl DataModel {
    pub fn new(mu: DVector<f64>, sigma: f64, noise: NoiseLaw) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "sigma must be finite and > 0, got {sigma}"
            )));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("mu entries must be finite".into()));
        }
        if mu.is_empty() {
            return Err(Error::InvalidParam("mu must have length >= 1".into()));
        }
        Ok(Self { mu, sigma, noise })
    }

    pub fn standard_gaussian(mu: DVector<f64>, sigma: f64) -> Result<Self> {
        Self::new(mu, sigma, NoiseLaw::StandardGaussian)
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn noise(&self) -> NoiseLaw {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn sample_noise(&self, rng: &mut ChaCha12Rng) -> DVector<f64> {
        match self.noise {
            NoiseLaw::StandardGaussian => {
                DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal))
            }
        }
    }
}

/// Which per-replicate statistic is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Covariance,
    Optimism,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Covariance => "cov",
            Self::Optimism => "opt",
        }
    }
}

/// One simulated draw together with its DF statistics.
#[derive(Debug, Clone)]
pub struct ReplicateDraw {
    pub epsilon: DVector<f64>,
    pub y: DVector<f64>,
    pub fitted: DVector<f64>,
    pub epsilon_star: Option<DVector<f64>>,
    /// eps^T y_hat in response units (eps here is sigma times the unit draw).
    pub stat_cov: f64,
    /// |y* - y_hat|^2 - |y - y_hat|^2, present when the star copy was drawn.
    pub stat_opt: Option<f64>,
}

/// A DF point estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: u64,
    pub estimator: EstimatorKind,
}

/// Counter-derived per-replicate RNG streams: one ChaCha key per seed, one
/// stream index per replicate. Worker scheduling cannot change any draw.
#[derive(Debug, Clone, Copy)]
pub struct ReplicateStreams {
    key: [u8; 32],
}

impl ReplicateStreams {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self { key }
    }

    pub fn replicate_rng(&self, index: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

/// Standard 64-bit seed mixer; also used to derive per-point seeds in sweeps.
pub fn splitmix64(mut state: u64) -> u64 {
    state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for sweep point `index` under `base_seed`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index.wrapping_add(0x517C_C1B7_2722_0A95)))
}

/// Simulates one replicate: draws eps (and eps* when requested), fits, and
/// computes both statistics. The epsilon draw always comes first so the
/// covariance statistic is identical whether or not the star copy exists.
pub fn draw_replicate(
    model: &DataModel,
    fitter: &Fitter,
    rng: &mut ChaCha12Rng,
    need_star: bool,
) -> Result<ReplicateDraw> {
    if fitter.response_dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: fitter.response_dim(),
        });
    }
    let epsilon = model.sample_noise(rng);
    let y = model.mu() + model.sigma() * &epsilon;
    let fit = fitter.fit(&y)?;
    let stat_cov = model.sigma() * epsilon.dot(&fit.fitted);
    let (epsilon_star, stat_opt) = if need_star {
        let eps_star = model.sample_noise(rng);
        let y_star = model.mu() + model.sigma() * &eps_star;
        let out = (&y_star - &fit.fitted).norm_squared();
        let stat_opt = out - fit.rss;
        (Some(eps_star), Some(stat_opt))
    } else {
        (None, None)
    };
    Ok(ReplicateDraw {
        epsilon,
        y,
        fitted: fit.fitted,
        epsilon_star,
        stat_cov,
        stat_opt,
    })
}

/// Streaming mean/variance accumulator (Welford), combinable across blocks.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn combine(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * (other.count as f64 / total as f64);
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64 / total as f64);
        Moments {
            count: total,
            mean,
            m2,
        }
    }

    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let var = self.m2 / (self.count - 1) as f64;
        (var / self.count as f64).sqrt()
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct BlockAcc {
    cov: Moments,
    opt: Moments,
}

/// Replicates per reduction block. Fixed so that block boundaries (and
/// therefore the combine order) never depend on the worker count.
const BLOCK: u64 = 4096;

fn run_blocks(
    model: &DataModel,
    fitter: &Fitter,
    replicates: u64,
    seed: u64,
    need_opt: bool,
) -> Result<BlockAcc> {
    if replicates < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 replicates, got {replicates}"
        )));
    }
    if fitter.response_dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: fitter.response_dim(),
        });
    }
    let streams = ReplicateStreams::new(seed);
    let sigma = model.sigma();
    let inv_sigma = 1.0 / sigma;
    let half_inv_var = 0.5 / (sigma * sigma);
    let nblocks = replicates.div_ceil(BLOCK);
    let results: Vec<Result<BlockAcc>> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(replicates);
            let mut acc = BlockAcc::default();
            for r in lo..hi {
                let mut rng = streams.replicate_rng(r);
                let draw = draw_replicate(model, fitter, &mut rng, need_opt).map_err(|e| {
                    Error::Replicate {
                        replicate: r,
                        source: Box::new(e),
                    }
                })?;
                let t_cov = draw.stat_cov * inv_sigma * inv_sigma;
                if !t_cov.is_finite() {
                    return Err(Error::NonFiniteStatistic { replicate: r });
                }
                acc.cov.push(t_cov);
                if need_opt {
                    let t_opt = draw.stat_opt.expect("star copy requested") * half_inv_var;
                    if !t_opt.is_finite() {
                        return Err(Error::NonFiniteStatistic { replicate: r });
                    }
                    acc.opt.push(t_opt);
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = BlockAcc::default();
    for block in results {
        let block = block?;
        total.cov = total.cov.combine(block.cov);
        total.opt = total.opt.combine(block.opt);
    }
    Ok(total)
}

/// Estimates DF with the chosen estimator. Same (model, fitter, replicates,
/// seed) gives a bit-identical result for any worker count.
pub fn estimate_df(
    model: &DataModel,
    fitter: &Fitter,
    replicates: u64,
    seed: u64,
    estimator: EstimatorKind,
) -> Result<DfEstimate> {
    let need_opt = matches!(estimator, EstimatorKind::Optimism);
    let acc = run_blocks(model, fitter, replicates, seed, need_opt)?;
    let m = match estimator {
        EstimatorKind::Covariance => acc.cov,
        EstimatorKind::Optimism => acc.opt,
    };
    Ok(DfEstimate {
        value: m.mean,
        std_error: m.std_error(),
        replicates: m.count,
        estimator,
    })
}

/// Runs both estimators on the same epsilon draws (common random numbers;
/// the star copy is drawn additionally) and returns (covariance, optimism).
pub fn estimate_df_both(
    model: &DataModel,
    fitter: &Fitter,
    replicates: u64,
    seed: u64,
) -> Result<(DfEstimate, DfEstimate)> {
    let acc = run_blocks(model, fitter, replicates, seed, true)?;
    Ok((
        DfEstimate {
            value: acc.cov.mean,
            std_error: acc.cov.std_error(),
            replicates: acc.cov.count,
            estimator: EstimatorKind::Covariance,
        },
        DfEstimate {
            value: acc.opt.mean,
            std_error: acc.opt.std_error(),
            replicates: acc.opt.count,
            estimator: EstimatorKind::Optimism,
        },
    ))
}
