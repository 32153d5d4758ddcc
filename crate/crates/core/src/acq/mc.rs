//! Monte-Carlo batch acquisitions (qEI, qPI, qUCB) and the discrete
//! knowledge gradient.
//!
//! Batch scores use the reparameterization `y = μ + L z` with one fixed set of
//! base samples `z` per selection, so every candidate is compared under common
//! random numbers. Batches are grown greedily over the finite candidate set.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::acq::analytic::STD_EPS;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::space::sq_dist;
use crate::stats::{self, sigmoid};
use crate::surrogate::{GpModel, Posterior, QueryCache};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_mc: usize,
    pub n_fantasy: usize,
    pub batch_q: usize,
    /// One-swap exchange passes run after greedy construction (0 = greedy only).
    pub greedy_restarts: usize,
    /// Sigmoid temperature for qPI; 0 selects the exact indicator.
    pub pi_temperature: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_mc: 4096,
            n_fantasy: 32,
            batch_q: 4,
            greedy_restarts: 0,
            pi_temperature: 1e-3,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mc < 128 {
            return Err(Error::Config(format!(
                "n_mc must be at least 128, got {}",
                self.n_mc
            )));
        }
        if self.n_fantasy < 8 {
            return Err(Error::Config(format!(
                "n_fantasy must be at least 8, got {}",
                self.n_fantasy
            )));
        }
        if self.batch_q == 0 {
            return Err(Error::Config("batch_q must be at least 1".into()));
        }
        if !(self.pi_temperature >= 0.0) {
            return Err(Error::Config("pi_temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum McKind {
    Ei,
    Pi,
    /// Reparameterized UCB with exploration weight `beta`.
    Ucb {
        beta: f64,
    },
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
}

/// Base samples plus the incrementally grown factor of the selected batch.
struct BatchSampler<'a> {
    cache: &'a QueryCache,
    kind: McKind,
    incumbent: f64,
    pi_temperature: f64,
    /// `n_mc × q` standard normals
    z: DMatrix<f64>,
    selected: Vec<usize>,
    /// lower-triangular factor of the selected joint covariance, row-major
    factor: Vec<Vec<f64>>,
    /// per-sample best utility of the selected members
    best: Vec<f64>,
}

impl<'a> BatchSampler<'a> {
    fn new(
        cache: &'a QueryCache,
        kind: McKind,
        incumbent: f64,
        cfg: &McConfig,
        q: usize,
        rng: &mut RngStream,
    ) -> Self {
        let z = DMatrix::from_fn(cfg.n_mc, q, |_, _| rng.normal());
        Self {
            cache,
            kind,
            incumbent,
            pi_temperature: cfg.pi_temperature,
            z,
            selected: Vec::new(),
            factor: Vec::new(),
            best: vec![f64::NEG_INFINITY; cfg.n_mc],
        }
    }

    fn utility(&self, y: f64, mean: f64) -> f64 {
        match self.kind {
            McKind::Ei => (y - self.incumbent).max(0.0),
            McKind::Pi => {
                if self.pi_temperature > 0.0 {
                    sigmoid((y - self.incumbent) / self.pi_temperature)
                } else if y > self.incumbent {
                    1.0
                } else {
                    0.0
                }
            }
            McKind::Ucb { beta } => mean + (beta * PI / 2.0).sqrt() * (y - mean).abs(),
        }
    }

    /// Factor row for candidate `c` appended to the current selection.
    fn factor_row(&self, c: usize) -> Vec<f64> {
        let k = self.selected.len();
        let mut row = vec![0.0; k + 1];
        let mut rest = self.cache.variance[c];
        for j in 0..k {
            let mut v = self.cache.cov(self.selected[j], c);
            for (i, r) in row.iter().enumerate().take(j) {
                v -= self.factor[j][i] * r;
            }
            let pivot = self.factor[j][j];
            row[j] = if pivot > 1e-12 * (1.0 + self.cache.variance[c].sqrt()) {
                v / pivot
            } else {
                0.0
            };
            rest -= row[j] * row[j];
        }
        row[k] = rest.max(0.0).sqrt();
        row
    }

    /// Per-sample utilities of candidate `c` joined to the selection.
    fn sample_utilities(&self, c: usize, row: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let mean = self.cache.mean[c];
        let row = row.to_vec();
        (0..self.z.nrows()).map(move |s| {
            let y = mean
                + row
                    .iter()
                    .enumerate()
                    .map(|(i, l)| l * self.z[(s, i)])
                    .sum::<f64>();
            self.best[s].max(self.utility(y, mean))
        })
    }

    fn estimate_with(&self, c: usize) -> McEstimate {
        let row = self.factor_row(c);
        let n = self.z.nrows() as f64;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for u in self.sample_utilities(c, &row) {
            sum += u;
            sum2 += u * u;
        }
        let mean = sum / n;
        let var = ((sum2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
        McEstimate {
            value: mean,
            std_err: (var / n).sqrt(),
        }
    }

    fn push(&mut self, c: usize) {
        let row = self.factor_row(c);
        let best: Vec<f64> = self.sample_utilities(c, &row).collect();
        self.best = best;
        self.factor.push(row);
        self.selected.push(c);
    }

    fn current(&self) -> McEstimate {
        let n = self.best.len() as f64;
        let mean = self.best.iter().sum::<f64>() / n;
        let var = self
            .best
            .iter()
            .map(|b| (b - mean) * (b - mean))
            .sum::<f64>()
            / (n - 1.0);
        McEstimate {
            value: mean,
            std_err: (var / n).sqrt(),
        }
    }
}

/// Joint MC score of a batch: `E[max_j g(y_j)]`.
pub fn q_improvement_estimate(
    model: &GpModel,
    batch: &[Vec<f64>],
    incumbent: f64,
    kind: McKind,
    cfg: &McConfig,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let cache = model.query_cache(batch);
    let mut sampler = BatchSampler::new(&cache, kind, incumbent, cfg, batch.len(), rng);
    for i in 0..batch.len() {
        sampler.push(i);
    }
    Ok(sampler.current())
}

pub fn q_improvement_score(
    model: &GpModel,
    batch: &[Vec<f64>],
    incumbent: f64,
    kind: McKind,
    cfg: &McConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    q_improvement_estimate(model, batch, incumbent, kind, cfg, rng).map(|e| e.value)
}

/// Greedy batch construction: each step adds the candidate maximizing the
/// joint score of the partial batch. Returns candidate indices in selection
/// order.
pub fn greedy_batch_select(
    model: &GpModel,
    candidates: &[Vec<f64>],
    q: usize,
    incumbent: f64,
    kind: McKind,
    cfg: &McConfig,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if q == 0 || candidates.len() < q {
        return Err(Error::InvalidArgument(format!(
            "need at least q = {q} candidates, got {}",
            candidates.len()
        )));
    }
    let cache = model.query_cache(candidates);
    let mut sampler = BatchSampler::new(&cache, kind, incumbent, cfg, q, rng);
    let mut taken = vec![false; candidates.len()];
    for _ in 0..q {
        let mut best: Option<(usize, f64)> = None;
        for c in (0..candidates.len()).filter(|c| !taken[*c]) {
            let v = sampler.estimate_with(c).value;
            if v.is_nan() {
                continue;
            }
            match best {
                Some((_, bv)) if bv >= v => {}
                _ => best = Some((c, v)),
            }
        }
        let (c, _) = best.ok_or(Error::AllNan)?;
        taken[c] = true;
        sampler.push(c);
    }
    let mut chosen = sampler.selected.clone();

    for _ in 0..cfg.greedy_restarts {
        let mut improved = false;
        for pos in 0..q {
            let base = joint_value(&cache, &chosen, kind, incumbent, cfg, &sampler.z);
            let mut best = (chosen[pos], base);
            for c in (0..candidates.len()).filter(|c| !chosen.contains(c)) {
                let mut trial = chosen.clone();
                trial[pos] = c;
                let v = joint_value(&cache, &trial, kind, incumbent, cfg, &sampler.z);
                if v > best.1 {
                    best = (c, v);
                }
            }
            if best.0 != chosen[pos] {
                chosen[pos] = best.0;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(chosen)
}

fn joint_value(
    cache: &QueryCache,
    batch: &[usize],
    kind: McKind,
    incumbent: f64,
    cfg: &McConfig,
    z: &DMatrix<f64>,
) -> f64 {
    let mut s = BatchSampler {
        cache,
        kind,
        incumbent,
        pi_temperature: cfg.pi_temperature,
        z: z.clone(),
        selected: Vec::new(),
        factor: Vec::new(),
        best: vec![f64::NEG_INFINITY; z.nrows()],
    };
    for &c in batch {
        s.push(c);
    }
    s.current().value
}

/// A model conditioned on one hypothesized observation.
#[derive(Debug, Clone)]
pub struct FantasyModel<'a> {
    pub base: &'a GpModel,
    pub fantasy_point: Vec<f64>,
    pub fantasy_value: f64,
    updated: GpModel,
}

impl<'a> FantasyModel<'a> {
    pub fn new(base: &'a GpModel, point: &[f64], value: f64) -> Result<Self> {
        let updated = base.condition_on(point, value)?;
        Ok(Self {
            base,
            fantasy_point: point.to_vec(),
            fantasy_value: value,
            updated,
        })
    }

    pub fn updated_alpha(&self) -> &DVector<f64> {
        self.updated.alpha()
    }

    pub fn model(&self) -> &GpModel {
        &self.updated
    }

    pub fn predict(&self, queries: &[Vec<f64>], want_joint: bool) -> Result<Posterior> {
        self.updated.predict(queries, want_joint)
    }
}

/// Antithetic standard-normal fantasy draws; pairs `(z, -z)` make the
/// discrete KG estimate non-negative by convexity of the max.
fn fantasy_draws(n_fantasy: usize, rng: &mut RngStream) -> Vec<f64> {
    let pairs = n_fantasy.div_ceil(2);
    (0..pairs)
        .flat_map(|_| {
            let z = rng.normal();
            [z, -z]
        })
        .collect()
}

/// KG from pool means, the candidate's posterior covariance with every pool
/// member, and the candidate's variance.
fn kg_from_cov(
    pool_mean: &[f64],
    cov_with_pool: impl Fn(usize) -> f64,
    var: f64,
    noise: f64,
    draws: &[f64],
) -> Result<McEstimate> {
    let sd = var.sqrt();
    if sd < STD_EPS {
        return Ok(McEstimate {
            value: 0.0,
            std_err: 0.0,
        });
    }
    let current = pool_mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slope: Vec<f64> = (0..pool_mean.len())
        .map(|p| cov_with_pool(p) * sd / (var + noise))
        .collect();
    let gains: Vec<f64> = draws
        .iter()
        .map(|z| {
            pool_mean
                .iter()
                .zip(&slope)
                .map(|(m, b)| m + b * z)
                .fold(f64::NEG_INFINITY, f64::max)
                - current
        })
        .filter(|g| g.is_finite())
        .collect();
    if gains.len() * 2 < draws.len() {
        return Err(Error::Fantasy {
            ok: gains.len(),
            wanted: draws.len(),
        });
    }
    let n = gains.len() as f64;
    Ok(McEstimate {
        value: stats::mean(&gains).max(-1e-9),
        std_err: (stats::variance(&gains) / n).sqrt(),
    })
}

/// Discrete knowledge gradient of evaluating `candidate`, with the posterior
/// mean maximized over `pool`.
pub fn kg_estimate(
    model: &GpModel,
    candidate: &[f64],
    pool: &[Vec<f64>],
    cfg: &McConfig,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("empty KG pool".into()));
    }
    let mut queries = pool.to_vec();
    queries.push(candidate.to_vec());
    let cache = model.query_cache(&queries);
    let x = pool.len();
    let draws = fantasy_draws(cfg.n_fantasy, rng);
    let noise = model.jitter() * model.config().output_scale;
    kg_from_cov(
        &cache.mean[..x],
        |p| cache.cov(p, x),
        cache.variance[x],
        noise,
        &draws,
    )
}

pub fn kg_score(
    model: &GpModel,
    candidate: &[f64],
    pool: &[Vec<f64>],
    cfg: &McConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    kg_estimate(model, candidate, pool, cfg, rng).map(|e| e.value)
}

/// Sequential KG batch: after each pick the model is conditioned on the
/// picked point at its posterior mean (which leaves the mean unchanged and
/// shrinks the covariance) before the next pick. The pool is the candidate
/// set plus the training points.
pub fn qkg_batch_select(
    model: &GpModel,
    candidates: &[Vec<f64>],
    q: usize,
    cfg: &McConfig,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    let m = candidates.len();
    if q == 0 || m < q {
        return Err(Error::InvalidArgument(format!(
            "need at least q = {q} candidates, got {m}"
        )));
    }
    let mut pool = candidates.to_vec();
    pool.extend(model.points().iter().cloned());
    let cache = model.query_cache(&pool);
    let noise = model.jitter() * model.config().output_scale;

    // cov(pool, candidates): |pool| × m
    let mut cov = DMatrix::from_fn(pool.len(), m, |p, c| cache.cov(p, c));
    let mut var: Vec<f64> = (0..m).map(|c| cache.variance[c]).collect();
    let draws = fantasy_draws(cfg.n_fantasy, rng);
    let mut chosen: Vec<usize> = Vec::with_capacity(q);

    for _ in 0..q {
        let mut best: Option<(usize, f64)> = None;
        for c in (0..m).filter(|c| !chosen.contains(c)) {
            let col = cov.column(c);
            let v = kg_from_cov(&cache.mean, |p| col[p], var[c], noise, &draws)?.value;
            match best {
                Some((_, bv)) if bv >= v => {}
                _ => best = Some((c, v)),
            }
        }
        let (x, _) = best.expect("at least one unchosen candidate");
        chosen.push(x);
        // rank-one downdate for the mean-value fantasy at x
        let denom = var[x] + noise;
        if denom > 0.0 {
            let cx: DVector<f64> = cov.column(x).into_owned();
            let row: Vec<f64> = (0..m).map(|c| cx[c]).collect();
            for c in 0..m {
                let f = row[c] / denom;
                if f != 0.0 {
                    cov.column_mut(c).axpy(-f, &cx, 1.0);
                }
                var[c] = (var[c] - row[c] * row[c] / denom).max(0.0);
            }
        }
    }
    Ok(chosen)
}

/// Indices of `points` that coincide with any training point of `model`.
pub fn evaluated_mask(model: &GpModel, points: &[Vec<f64>]) -> Vec<bool> {
    points
        .iter()
        .map(|p| model.points().iter().any(|t| sq_dist(p, t) < 1e-24))
        .collect()
}
