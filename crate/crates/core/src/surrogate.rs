//! Gaussian-process surrogate with a Matérn 5/2 kernel and fixed
//! hyperparameters.
//!
//! The model is noiseless: `Σ = K(X, X) + jitter · output_scale · I`, where
//! the jitter only keeps the Cholesky factorization stable. Posterior mean
//! and variance are
//!
//! ```text
//! μ(x)  = m + K(x, X) Σ⁻¹ (f - m)
//! σ²(x) = K(x, x) - K(x, X) Σ⁻¹ K(X, x)
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::archive::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats;

/// Shape of the gamma length-scale prior.
pub const LENGTH_PRIOR_SHAPE: f64 = 3.0;
/// Rate of the gamma length-scale prior.
pub const LENGTH_PRIOR_RATE: f64 = 6.0;

pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

const SQRT5: f64 = 2.236_067_977_499_79;

/// Mode of the gamma(shape, rate) prior, `(shape - 1) / rate`.
pub fn gamma_mode(shape: f64, rate: f64) -> f64 {
    (shape - 1.0) / rate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthScale {
    Isotropic(f64),
    PerDimension(Vec<f64>),
}

impl LengthScale {
    fn get(&self, i: usize) -> f64 {
        match self {
            LengthScale::Isotropic(l) => *l,
            LengthScale::PerDimension(ls) => ls[i],
        }
    }

    fn is_valid(&self) -> bool {
        match self {
            LengthScale::Isotropic(l) => *l > 0.0 && l.is_finite(),
            LengthScale::PerDimension(ls) => {
                !ls.is_empty() && ls.iter().all(|l| *l > 0.0 && l.is_finite())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub smoothness: f64,
    pub length_scale: LengthScale,
    pub output_scale: f64,
    pub mean_const: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            smoothness: 2.5,
            length_scale: LengthScale::Isotropic(gamma_mode(LENGTH_PRIOR_SHAPE, LENGTH_PRIOR_RATE)),
            output_scale: 1.0,
            mean_const: 0.0,
        }
    }
}

impl KernelConfig {
    /// Fixed hyperparameters from an initial design: the prior-mode length
    /// scale, output scale = sample variance, constant mean = sample mean.
    pub fn from_initial_values(values: &[f64]) -> Self {
        let mean_const = if values.is_empty() {
            0.0
        } else {
            stats::mean(values)
        };
        let var = stats::variance(values);
        let output_scale = if var.is_finite() && var > 1e-12 {
            var
        } else {
            1.0
        };
        Self {
            output_scale,
            mean_const,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.smoothness != 2.5 {
            return Err(Error::Config(format!(
                "only Matérn smoothness 2.5 is supported, got {}",
                self.smoothness
            )));
        }
        if !self.length_scale.is_valid() {
            return Err(Error::Config("length scales must be positive".into()));
        }
        if !(self.output_scale > 0.0 && self.output_scale.is_finite()) {
            return Err(Error::Config("output scale must be positive".into()));
        }
        if !self.mean_const.is_finite() {
            return Err(Error::Config("constant mean must be finite".into()));
        }
        Ok(())
    }

    /// Length-scaled Euclidean distance.
    pub fn scaled_distance(&self, xa: &[f64], xb: &[f64]) -> f64 {
        xa.iter()
            .zip(xb)
            .enumerate()
            .map(|(i, (a, b))| {
                let t = (a - b) / self.length_scale.get(i);
                t * t
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Matérn ν = 5/2 covariance.
pub fn matern25(xa: &[f64], xb: &[f64], cfg: &KernelConfig) -> f64 {
    let r = cfg.scaled_distance(xa, xb);
    let sr = SQRT5 * r;
    cfg.output_scale * (1.0 + sr + 5.0 * r * r / 3.0) * (-sr).exp()
}

fn cross_kernel(a: &[Vec<f64>], b: &[Vec<f64>], cfg: &KernelConfig) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| matern25(&a[i], &b[j], cfg))
}

/// Cholesky of `k + jitter · scale · I`, doubling the jitter from
/// [`JITTER_START`] until it exceeds [`JITTER_MAX`].
pub(crate) fn jittered_cholesky(k: &DMatrix<f64>, scale: f64) -> Result<(DMatrix<f64>, f64)> {
    let mut jitter = JITTER_START;
    loop {
        let mut sigma = k.clone();
        for i in 0..sigma.nrows() {
            sigma[(i, i)] += jitter * scale;
        }
        if let Some(chol) = sigma.cholesky() {
            return Ok((chol.unpack(), jitter));
        }
        let next = jitter * 2.0;
        if next > JITTER_MAX {
            return Err(Error::Factorization { jitter });
        }
        log::debug!("Cholesky failed at jitter {jitter:e}; retrying at {next:e}");
        jitter = next;
    }
}

/// Square-root factor `A` with `A Aᵀ = cov`, clipping negative eigenvalues.
pub fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let m = cov.nrows();
    let eig = SymmetricEigen::new(cov.clone());
    let scale = cov
        .diagonal()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -1e-8 * scale {
        log::warn!("posterior covariance not PSD (min eigenvalue {min:e}); clipping at 0");
    }
    let mut factor = eig.eigenvectors;
    for j in 0..m {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    factor
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub cross_cov: Option<DMatrix<f64>>,
}

impl Posterior {
    pub fn std(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }
}

/// Posterior over a fixed query set, keeping `V = L⁻¹ K(X, Q)` so that any
/// entry of the joint covariance costs one dot product.
#[derive(Debug, Clone)]
pub struct QueryCache {
    queries: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    v: DMatrix<f64>,
    cfg: KernelConfig,
}

impl QueryCache {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn queries(&self) -> &[Vec<f64>] {
        &self.queries
    }

    pub fn std(&self, i: usize) -> f64 {
        self.variance[i].sqrt()
    }

    /// Posterior covariance between queries `i` and `j`.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.variance[i];
        }
        let prior = matern25(&self.queries[i], &self.queries[j], &self.cfg);
        prior - self.v.column(i).dot(&self.v.column(j))
    }

    pub fn joint_cov(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.cov(idx[a], idx[b]))
    }
}

/// A fitted Gaussian process. Immutable after fitting.
#[derive(Debug, Clone)]
pub struct GpModel {
    cfg: KernelConfig,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    pub fn fit(points: &[Vec<f64>], values: &[f64], cfg: &KernelConfig) -> Result<Self> {
        cfg.validate()?;
        if points.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                got: points.len(),
            });
        }
        if points.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*v));
        }
        let k = cross_kernel(points, points, cfg);
        let (chol, jitter) = jittered_cholesky(&k, cfg.output_scale)?;
        let centered =
            DVector::from_iterator(values.len(), values.iter().map(|v| v - cfg.mean_const));
        let alpha = solve_chol(&chol, centered);
        Ok(Self {
            cfg: cfg.clone(),
            points: points.to_vec(),
            values: values.to_vec(),
            chol,
            alpha,
            jitter,
        })
    }

    pub fn fit_dataset(dataset: &Dataset, cfg: &KernelConfig) -> Result<Self> {
        Self::fit(dataset.points(), dataset.values(), cfg)
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_train(&self) -> usize {
        self.points.len()
    }

    /// Relative jitter the factorization settled on.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn chol_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Posterior mean only, `O(n)` per query.
    pub fn predict_mean(&self, queries: &[Vec<f64>]) -> Vec<f64> {
        queries
            .iter()
            .map(|q| {
                self.cfg.mean_const
                    + self
                        .points
                        .iter()
                        .zip(self.alpha.iter())
                        .map(|(p, a)| matern25(p, q, &self.cfg) * a)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn query_cache(&self, queries: &[Vec<f64>]) -> QueryCache {
        let kq = cross_kernel(&self.points, queries, &self.cfg);
        let mean = (kq.transpose() * &self.alpha)
            .iter()
            .map(|v| v + self.cfg.mean_const)
            .collect();
        let mut v = kq;
        self.chol.solve_lower_triangular_mut(&mut v);
        let variance = (0..queries.len())
            .map(|j| (self.cfg.output_scale - v.column(j).norm_squared()).max(0.0))
            .collect();
        QueryCache {
            queries: queries.to_vec(),
            mean,
            variance,
            v,
            cfg: self.cfg.clone(),
        }
    }

    pub fn predict(&self, queries: &[Vec<f64>], want_joint: bool) -> Result<Posterior> {
        if queries.is_empty() {
            return Err(Error::InvalidArgument("no query points".into()));
        }
        let cache = self.query_cache(queries);
        let cross_cov = want_joint.then(|| {
            let idx: Vec<usize> = (0..queries.len()).collect();
            cache.joint_cov(&idx)
        });
        Ok(Posterior {
            mean: cache.mean,
            variance: cache.variance,
            cross_cov,
        })
    }

    /// Draws `n_samples` joint posterior samples over `queries`, one row per
    /// sample.
    pub fn sample_joint(
        &self,
        queries: &[Vec<f64>],
        n_samples: usize,
        rng: &mut RngStream,
    ) -> Result<DMatrix<f64>> {
        if n_samples == 0 {
            return Err(Error::InvalidArgument(
                "n_samples must be at least 1".into(),
            ));
        }
        let post = self.predict(queries, true)?;
        let cov = post.cross_cov.expect("joint covariance requested");
        let factor = psd_factor(&cov);
        let m = queries.len();
        let mut out = DMatrix::zeros(n_samples, m);
        let mut z = DVector::zeros(m);
        for s in 0..n_samples {
            z.iter_mut().for_each(|v| *v = rng.normal());
            let y = &factor * &z;
            for j in 0..m {
                out[(s, j)] = post.mean[j] + y[j];
            }
        }
        Ok(out)
    }

    /// The model refit with one extra observation, computed by bordering the
    /// existing Cholesky factor (`O(n²)`).
    pub fn condition_on(&self, point: &[f64], value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite(value));
        }
        let n = self.n_train();
        let kx =
            DVector::from_iterator(n, self.points.iter().map(|p| matern25(p, point, &self.cfg)));
        let mut l = kx;
        self.chol.solve_lower_triangular_mut(&mut l);
        let diag = self.cfg.output_scale * (1.0 + self.jitter) - l.norm_squared();
        if !(diag > 0.0) {
            return Err(Error::Factorization {
                jitter: self.jitter,
            });
        }
        let mut chol = self.chol.clone().resize(n + 1, n + 1, 0.0);
        for j in 0..n {
            chol[(n, j)] = l[j];
        }
        chol[(n, n)] = diag.sqrt();
        let mut points = self.points.clone();
        points.push(point.to_vec());
        let mut values = self.values.clone();
        values.push(value);
        let centered =
            DVector::from_iterator(n + 1, values.iter().map(|v| v - self.cfg.mean_const));
        let alpha = solve_chol(&chol, centered);
        Ok(Self {
            cfg: self.cfg.clone(),
            points,
            values,
            chol,
            alpha,
            jitter: self.jitter,
        })
    }
}

fn solve_chol(l: &DMatrix<f64>, mut b: DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular_mut(&mut b);
    l.tr_solve_lower_triangular_mut(&mut b);
    b
}
