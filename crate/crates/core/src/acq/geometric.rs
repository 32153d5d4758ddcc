//! Distance-based acquisitions: the weighted score and the EEPA⁺ Pareto
//! sampler.
//!
//! Both work in minimization sign (`f_hat` is the predicted objective to be
//! minimized) and measure exploration by `Δ(x)`, the Euclidean distance in
//! unit space from `x` to the nearest evaluated point.

use serde::{Deserialize, Serialize};

use crate::archive::{Dataset, DUPLICATE_TOL};
use crate::discretize::{dynamic_candidates, CoordinateSchedule, DiscretizerConfig};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::space::{min_dist, sq_dist};
use crate::surrogate::GpModel;

/// Default response-weight pattern for the weighted score.
pub const DEFAULT_WEIGHT_CYCLE: [f64; 4] = [0.3, 0.5, 0.8, 0.95];

const DENOM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCycle {
    response_weights: Vec<f64>,
    position: usize,
}

impl Default for WeightCycle {
    fn default() -> Self {
        Self {
            response_weights: DEFAULT_WEIGHT_CYCLE.to_vec(),
            position: 0,
        }
    }
}

impl WeightCycle {
    pub fn new(response_weights: Vec<f64>) -> Result<Self> {
        if response_weights.is_empty() {
            return Err(Error::Config("weight cycle must not be empty".into()));
        }
        if let Some(w) = response_weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::Config(format!("response weight {w} outside [0, 1]")));
        }
        Ok(Self {
            response_weights,
            position: 0,
        })
    }

    /// Constant weight, used for analysis.
    pub fn fixed(w_r: f64) -> Result<Self> {
        Self::new(vec![w_r])
    }

    pub fn response_weight(&self) -> f64 {
        self.response_weights[self.position]
    }

    pub fn distance_weight(&self) -> f64 {
        1.0 - self.response_weight()
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn advance(&mut self) {
        self.position = (self.position + 1) % self.response_weights.len();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub point: Vec<f64>,
    pub f_hat: f64,
    pub delta: f64,
}

/// Scores candidates with `f_hat = -μ` (minimization sign) and `Δ` to the
/// evaluated set.
pub fn score_candidates(
    model: &GpModel,
    candidates: &[Vec<f64>],
    evaluated: &[Vec<f64>],
) -> Vec<ScoredCandidate> {
    let means = model.predict_mean(candidates);
    candidates
        .iter()
        .zip(means)
        .map(|(x, m)| ScoredCandidate {
            point: x.clone(),
            f_hat: -m,
            delta: min_dist(x, evaluated),
        })
        .collect()
}

/// `W = w_d·V_d + w_r·V_r`; lower is better.
pub fn weighted_score(candidates: &[ScoredCandidate], cycle: &WeightCycle) -> Vec<f64> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let (dmin, dmax) = min_max(candidates.iter().map(|c| c.delta));
    let (fmin, fmax) = min_max(candidates.iter().map(|c| c.f_hat));
    let (w_r, w_d) = (cycle.response_weight(), cycle.distance_weight());
    candidates
        .iter()
        .map(|c| {
            let vd = if dmax - dmin < DENOM_EPS {
                0.0
            } else {
                (dmax - c.delta) / (dmax - dmin)
            };
            let vr = if fmax - fmin < DENOM_EPS {
                0.0
            } else {
                (c.f_hat - fmin) / (fmax - fmin)
            };
            w_d * vd + w_r * vr
        })
        .collect()
}

fn min_max(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn argmin(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in xs.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if xs[b] <= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Weighted-score batch: one pick per weight in the cycle. After each pick
/// the distances are recomputed against the evaluated set plus the picks so
/// far. Returns candidate indices.
pub fn weighted_batch(
    candidates: &[ScoredCandidate],
    q: usize,
    cycle: &mut WeightCycle,
) -> Vec<usize> {
    let mut pool: Vec<ScoredCandidate> = candidates.to_vec();
    let mut alive: Vec<usize> = (0..candidates.len()).collect();
    let mut chosen = Vec::with_capacity(q);
    while chosen.len() < q && !alive.is_empty() {
        let view: Vec<ScoredCandidate> = alive.iter().map(|&i| pool[i].clone()).collect();
        let w = weighted_score(&view, cycle);
        cycle.advance();
        let pick = alive[argmin(&w).expect("finite weighted scores")];
        chosen.push(pick);
        alive.retain(|&i| i != pick);
        let picked = pool[pick].point.clone();
        for &i in &alive {
            let d = sq_dist(&pool[i].point, &picked).sqrt();
            if d < pool[i].delta {
                pool[i].delta = d;
            }
        }
        // candidates collapsing onto a pick are no longer admissible
        alive.retain(|&i| pool[i].delta > DUPLICATE_TOL);
    }
    chosen
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<ScoredCandidate>,
    /// Position of each member in the scored candidate list.
    pub indices: Vec<usize>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Exact non-dominated set under (minimize `f_hat`, maximize `delta`).
///
/// Sort by `f_hat` ascending, `delta` descending, index ascending, then keep
/// each candidate whose `delta` strictly exceeds everything kept so far.
/// Members come out in ascending `f_hat` order.
pub fn pareto_front(candidates: &[ScoredCandidate]) -> ParetoFront {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&candidates[a], &candidates[b]);
        ca.f_hat
            .total_cmp(&cb.f_hat)
            .then_with(|| cb.delta.total_cmp(&ca.delta))
            .then(a.cmp(&b))
    });
    let mut best_delta = f64::NEG_INFINITY;
    let mut indices = Vec::new();
    for i in order {
        if candidates[i].delta > best_delta {
            best_delta = candidates[i].delta;
            indices.push(i);
        }
    }
    let members = indices.iter().map(|&i| candidates[i].clone()).collect();
    ParetoFront { members, indices }
}

/// Diverse batch from the front: the minimum-`f_hat` member first, then
/// repeatedly the member farthest from the evaluated points and the picks so
/// far. Returns positions within `front.members`.
pub fn eepa_batch(front: &ParetoFront, q: usize, dataset: &Dataset) -> Vec<usize> {
    let n = front.len();
    if n <= q {
        return (0..n).collect();
    }
    if q == 0 {
        return Vec::new();
    }
    let seed = (0..n)
        .min_by(|&a, &b| {
            front.members[a]
                .f_hat
                .total_cmp(&front.members[b].f_hat)
                .then(front.indices[a].cmp(&front.indices[b]))
        })
        .expect("non-empty front");
    let mut chosen = vec![seed];
    let mut reach: Vec<f64> = front
        .members
        .iter()
        .map(|m| min_dist(&m.point, dataset.points()))
        .collect();
    while chosen.len() < q {
        let last = &front.members[*chosen.last().unwrap()].point;
        for (i, m) in front.members.iter().enumerate() {
            reach[i] = reach[i].min(sq_dist(&m.point, last).sqrt());
        }
        let next = (0..n)
            .filter(|i| !chosen.contains(i))
            .max_by(|&a, &b| reach[a].total_cmp(&reach[b]).then(b.cmp(&a)))
            .expect("front larger than q");
        chosen.push(next);
    }
    chosen
}

/// One EEPA⁺ step: perturb the incumbent along a decreasing subset of
/// coordinates, build the (f̂, Δ) Pareto front over the unevaluated
/// candidates, and pick a diverse batch of at most `min(q, remaining)`
/// points.
pub fn eepa_plus_iteration(
    dataset: &Dataset,
    model: &GpModel,
    disc: &DiscretizerConfig,
    schedule: &CoordinateSchedule,
    q: usize,
    remaining: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    let (incumbent, _) = dataset.incumbent()?;
    let want = q.min(remaining);
    if want == 0 {
        return Err(Error::BudgetExhausted {
            requested: q,
            remaining,
        });
    }
    let mut cfg = disc.clone();
    for attempt in 0..2 {
        let candidates = dynamic_candidates(&cfg, schedule, incumbent, rng)?;
        let scored: Vec<ScoredCandidate> = score_candidates(model, &candidates, dataset.points())
            .into_iter()
            .filter(|c| c.delta > DUPLICATE_TOL)
            .collect();
        if scored.is_empty() {
            if attempt == 0 {
                cfg.n_candidates *= 2;
                continue;
            }
            break;
        }
        let front = pareto_front(&scored);
        let picks = eepa_batch(&front, want, dataset);
        return Ok(picks
            .into_iter()
            .map(|i| front.members[i].point.clone())
            .collect());
    }
    Err(Error::NoCandidates)
}

/// Placeholder for SOP, whose centre-selection heuristics are not provided.
pub fn sop_iteration() -> Result<Vec<Vec<f64>>> {
    Err(Error::Unimplemented(
        "SOP (tabu list and centre heuristics are not available; use EEPA+ or DYCORS)".into(),
    ))
}

/// `a` dominates `b` under (min f_hat, max delta).
pub fn dominates(a: &ScoredCandidate, b: &ScoredCandidate) -> bool {
    let no_worse = a.f_hat <= b.f_hat && a.delta >= b.delta;
    let better = a.f_hat < b.f_hat || a.delta > b.delta;
    no_worse && better
}
