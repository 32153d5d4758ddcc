//! Candidate generation: uniform random, scrambled Sobol and dynamic
//! coordinate perturbation, plus the maximin Latin-hypercube initial design.
//!
//! Every generator returns points in the closed unit cube.

mod lhd;
mod sobol;

pub use lhd::{lhd_maximin, min_pairwise_distance};
pub use sobol::{sobol_candidates, SobolSequence, SobolTable};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::space::check_unit;

/// A candidate set, one unit-space point per entry.
pub type CandidateSet = Vec<Vec<f64>>;

pub const DEFAULT_PERTURB_SIGMA: f64 = 0.2;
/// Smallest perturbation scale reachable by halving.
pub const MIN_PERTURB_SIGMA: f64 = DEFAULT_PERTURB_SIGMA / 64.0;
/// Consecutive non-improving iterations before the scale is halved.
pub const FAILURE_TOLERANCE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscretizerKind {
    Uniform,
    Sobol,
    #[serde(rename = "dynamic")]
    DynamicCoordinate,
}

impl DiscretizerKind {
    pub fn name(self) -> &'static str {
        match self {
            DiscretizerKind::Uniform => "uniform",
            DiscretizerKind::Sobol => "sobol",
            DiscretizerKind::DynamicCoordinate => "dynamic",
        }
    }
}

impl fmt::Display for DiscretizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DiscretizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "uni" => Ok(DiscretizerKind::Uniform),
            "sobol" | "so" => Ok(DiscretizerKind::Sobol),
            "dynamic" | "dy" | "dynamiccoordinate" => Ok(DiscretizerKind::DynamicCoordinate),
            other => Err(Error::Config(format!("unknown discretizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizerConfig {
    pub kind: DiscretizerKind,
    pub n_candidates: usize,
    pub perturb_sigma: f64,
    /// Lower bound on the coordinate-selection probability; `None` means `1/d`.
    pub select_prob_floor: Option<f64>,
}

impl DiscretizerConfig {
    pub fn new(kind: DiscretizerKind, n_candidates: usize) -> Self {
        Self {
            kind,
            n_candidates,
            perturb_sigma: DEFAULT_PERTURB_SIGMA,
            select_prob_floor: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be at least 1".into()));
        }
        if !(self.perturb_sigma > 0.0 && self.perturb_sigma <= 1.0) {
            return Err(Error::Config(format!(
                "perturb_sigma must lie in (0, 1], got {}",
                self.perturb_sigma
            )));
        }
        if let Some(p) = self.select_prob_floor {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!(
                    "select_prob_floor must lie in (0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn floor_for(&self, dim: usize) -> f64 {
        self.select_prob_floor.unwrap_or(1.0 / dim as f64)
    }
}

/// Decreasing coordinate-selection schedule for dynamic perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSchedule {
    pub dim: usize,
    /// evaluations so far
    pub t: usize,
    /// evaluations when the adaptive phase started
    pub t0: usize,
    /// total budget
    pub total: usize,
}

impl CoordinateSchedule {
    /// `max(floor, min(20/d, 1) · (1 − ln(t − t0 + 1) / ln(T − t0)))`.
    pub fn select_prob(&self, floor: f64) -> f64 {
        let base = (20.0 / self.dim as f64).min(1.0);
        let span = self.total.saturating_sub(self.t0) as f64;
        let elapsed = self.t.saturating_sub(self.t0) as f64;
        let decay = if span > 1.0 {
            1.0 - (elapsed + 1.0).ln() / span.ln()
        } else {
            1.0
        };
        (base * decay).max(floor).clamp(f64::MIN_POSITIVE, 1.0)
    }
}

pub fn uniform_candidates(
    cfg: &DiscretizerConfig,
    dim: usize,
    rng: &mut RngStream,
) -> CandidateSet {
    (0..cfg.n_candidates)
        .map(|_| (0..dim).map(|_| rng.uniform()).collect())
        .collect()
}

fn reflect(v: f64) -> f64 {
    let r = if v < 0.0 {
        -v
    } else if v > 1.0 {
        2.0 - v
    } else {
        v
    };
    r.clamp(0.0, 1.0)
}

/// Perturbs a random subset of the incumbent's coordinates with
/// `N(0, perturb_sigma²)` noise, reflecting at the cube faces.
pub fn dynamic_candidates(
    cfg: &DiscretizerConfig,
    schedule: &CoordinateSchedule,
    incumbent: &[f64],
    rng: &mut RngStream,
) -> Result<CandidateSet> {
    let dim = incumbent.len();
    check_unit(incumbent, dim)?;
    if dim != schedule.dim {
        return Err(Error::DimensionMismatch {
            expected: schedule.dim,
            got: dim,
        });
    }
    let p = schedule.select_prob(cfg.floor_for(dim));
    let mut out = Vec::with_capacity(cfg.n_candidates);
    let mut mask = vec![false; dim];
    for _ in 0..cfg.n_candidates {
        let mut any = false;
        for m in mask.iter_mut() {
            *m = rng.uniform() < p;
            any |= *m;
        }
        if !any {
            mask[rng.below(dim)] = true;
        }
        let x = incumbent
            .iter()
            .zip(&mask)
            .map(|(v, sel)| {
                if *sel {
                    reflect(v + cfg.perturb_sigma * rng.normal())
                } else {
                    *v
                }
            })
            .collect();
        out.push(x);
    }
    Ok(out)
}

/// Generates a candidate set with the configured scheme. `incumbent` and
/// `schedule` are only consulted by dynamic perturbation.
pub fn generate(
    cfg: &DiscretizerConfig,
    dim: usize,
    schedule: &CoordinateSchedule,
    incumbent: &[f64],
    rng: &mut RngStream,
) -> Result<CandidateSet> {
    match cfg.kind {
        DiscretizerKind::Uniform => Ok(uniform_candidates(cfg, dim, rng)),
        DiscretizerKind::Sobol => sobol_candidates(cfg, dim, rng),
        DiscretizerKind::DynamicCoordinate => dynamic_candidates(cfg, schedule, incumbent, rng),
    }
}
