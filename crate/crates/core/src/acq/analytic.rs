//! Closed-form acquisition scores: PI, EI, UCB and max-value entropy search.
//!
//! All scores assume canonical (maximization) values.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{log_norm_cdf, norm_cdf, norm_pdf, pdf_over_cdf};
use crate::surrogate::GpModel;

/// Below this a posterior standard deviation is treated as zero.
pub const STD_EPS: f64 = 1e-12;

pub const DEFAULT_UCB_DELTA: f64 = 0.1;
pub const DEFAULT_MES_SAMPLES: usize = 10;

pub fn pi_score(mean: f64, std: f64, incumbent: f64) -> f64 {
    if std < STD_EPS {
        return if mean > incumbent { 1.0 } else { 0.0 };
    }
    norm_cdf((mean - incumbent) / std)
}

pub fn ei_score(mean: f64, std: f64, incumbent: f64) -> f64 {
    let diff = mean - incumbent;
    if std < STD_EPS {
        return diff.max(0.0);
    }
    let z = diff / std;
    (diff * norm_cdf(z) + std * norm_pdf(z)).max(0.0)
}

/// GP-UCB exploration schedule `β_t = 2 ln(|X| t² π² / (6 δ))`, with `t`
/// counting function evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcbSchedule {
    pub delta: f64,
    pub cardinality: usize,
    pub t: usize,
}

impl UcbSchedule {
    pub fn new(delta: f64, cardinality: usize, t: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        if cardinality == 0 || t == 0 {
            return Err(Error::InvalidArgument(
                "|X| and t must be at least 1".into(),
            ));
        }
        Ok(Self {
            delta,
            cardinality,
            t,
        })
    }

    pub fn beta(&self) -> f64 {
        let t = self.t as f64;
        2.0 * (self.cardinality as f64 * t * t * PI * PI / (6.0 * self.delta)).ln()
    }
}

pub fn ucb_score(mean: f64, std: f64, schedule: &UcbSchedule) -> f64 {
    mean + schedule.beta().sqrt() * std
}

/// Sampled maxima `y*` from a Gumbel fit to `P(max ≤ y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxValueSamples {
    pub y_star: Vec<f64>,
    /// Gumbel `(location, scale)`; `None` when the fallback was used.
    pub gumbel: Option<(f64, f64)>,
}

/// Fits a Gumbel distribution to the distribution of the maximum over the
/// candidates (independent normals) and draws `k` maxima truncated below at
/// the incumbent.
pub fn sample_max_values(
    model: &GpModel,
    candidates: &[Vec<f64>],
    k: usize,
    rng: &mut RngStream,
) -> Result<MaxValueSamples> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates".into()));
    }
    let post = model.predict(candidates, false)?;
    let incumbent = model
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    sample_max_values_from(&post.mean, &post.std(), incumbent, k, rng)
}

/// As [`sample_max_values`] with the posterior already evaluated.
pub fn sample_max_values_from(
    means: &[f64],
    stds: &[f64],
    incumbent: f64,
    k: usize,
    rng: &mut RngStream,
) -> Result<MaxValueSamples> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "need at least one max-value sample".into(),
        ));
    }
    if means.is_empty() || means.len() != stds.len() {
        return Err(Error::InvalidArgument(
            "means and stds must be non-empty and aligned".into(),
        ));
    }
    let max_std = stds.iter().copied().fold(0.0, f64::max);
    let fallback = |reason: &str| {
        log::warn!("Gumbel fit failed ({reason}); using incumbent + 2·max std");
        MaxValueSamples {
            y_star: vec![incumbent + 2.0 * max_std; k],
            gumbel: None,
        }
    };

    let log_cdf_max = |y: f64| -> f64 {
        let mut acc = 0.0;
        for (m, s) in means.iter().zip(stds) {
            if *s < STD_EPS {
                if y < *m {
                    return f64::NEG_INFINITY;
                }
            } else {
                acc += log_norm_cdf((y - m) / s);
            }
        }
        acc
    };

    let top = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = max_std.max(1e-12 * (1.0 + top.abs()));
    let mut lo = top - 6.0 * spread;
    let mut hi = means
        .iter()
        .zip(stds)
        .map(|(m, s)| m + 8.0 * s)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(top + spread);
    let (ln_q25, ln_q75) = (0.25f64.ln(), 0.75f64.ln());
    let mut expand = 0;
    while log_cdf_max(lo) > ln_q25 || log_cdf_max(hi) < ln_q75 {
        expand += 1;
        if expand > 60 {
            return Ok(fallback("quantiles could not be bracketed"));
        }
        let w = hi - lo;
        lo -= w;
        hi += w;
    }

    let quantile = |p: f64| -> f64 {
        let target = p.ln();
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if log_cdf_max(mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    let (y25, y50, y75) = (quantile(0.25), quantile(0.5), quantile(0.75));
    if !(y25.is_finite() && y50.is_finite() && y75.is_finite()) {
        return Ok(fallback("non-finite quantile"));
    }

    let denom = (-(0.25f64.ln())).ln() - (-(0.75f64.ln())).ln();
    let scale = (y75 - y25) / denom;
    let loc = y50 + scale * 2f64.ln().ln();

    if scale <= 1e-12 * (1.0 + loc.abs()) {
        // point mass at the deterministic maximum
        return Ok(MaxValueSamples {
            y_star: vec![y50.max(incumbent); k],
            gumbel: Some((loc, scale.max(0.0))),
        });
    }

    let floor = (-(-(incumbent - loc) / scale).exp()).exp();
    let y_star = (0..k)
        .map(|_| {
            let u = floor + (1.0 - floor) * rng.open_uniform();
            let y = loc - scale * (-u.ln()).ln();
            if y.is_finite() {
                y.max(incumbent)
            } else {
                incumbent
            }
        })
        .collect();
    Ok(MaxValueSamples {
        y_star,
        gumbel: Some((loc, scale)),
    })
}

/// Max-value entropy search score averaged over sampled maxima.
pub fn mes_score(mean: f64, std: f64, samples: &MaxValueSamples) -> f64 {
    if std < STD_EPS || samples.y_star.is_empty() {
        return 0.0;
    }
    let total: f64 = samples
        .y_star
        .iter()
        .map(|y| {
            let g = (y - mean) / std;
            0.5 * g * pdf_over_cdf(g) - log_norm_cdf(g)
        })
        .sum();
    (total / samples.y_star.len() as f64).max(0.0)
}

/// Index of the highest score, lowest index on ties. NaN scores are skipped.
pub fn select_best(scores: &[f64]) -> Result<usize> {
    let mut best: Option<usize> = None;
    let mut nans = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.is_nan() {
            nans += 1;
            continue;
        }
        match best {
            Some(b) if scores[b] >= *s => {}
            _ => best = Some(i),
        }
    }
    if nans > 0 {
        log::warn!("{nans} NaN acquisition scores excluded");
    }
    best.ok_or(Error::AllNan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::KernelConfig;
    use proptest::prelude::*;

    #[test]
    fn pi_examples() {
        assert_eq!(pi_score(0.3, 1.0, 0.3), 0.5);
        assert!((pi_score(1.0, 1.0, 0.0) - 0.841_345).abs() < 1e-6);
        assert_eq!(pi_score(-1.0, 0.0, 0.0), 0.0);
        assert_eq!(pi_score(1.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn ei_examples() {
        assert!((ei_score(2.0, 1.0, 2.0) - 0.398_942).abs() < 1e-6);
        assert!((ei_score(1.0, 1.0, 0.0) - 1.083_315).abs() < 1e-6);
        assert_eq!(ei_score(5.0, 0.0, 3.0), 2.0);
        assert_eq!(ei_score(1.0, 0.0, 3.0), 0.0);
    }

    #[test]
    fn ucb_examples() {
        let s = UcbSchedule::new(0.1, 1000, 1).unwrap();
        assert!((s.beta() - 19.416_081).abs() < 1e-5);
        assert!((ucb_score(1.0, 2.0, &s) - (1.0 + 2.0 * 4.406_368)).abs() < 1e-5);
        assert_eq!(ucb_score(1.5, 0.0, &s), 1.5);
        let later = UcbSchedule { t: 100, ..s };
        assert!(ucb_score(0.0, 1.0, &later) >= ucb_score(0.0, 1.0, &s));
        assert!(UcbSchedule::new(1.0, 10, 1).is_err());
        assert!(UcbSchedule::new(0.1, 10, 0).is_err());
    }

    #[test]
    fn mes_examples() {
        let at = |y: f64| MaxValueSamples {
            y_star: vec![y],
            gumbel: None,
        };
        assert!((mes_score(0.0, 1.0, &at(0.0)) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(mes_score(0.0, 1.0, &at(10.0)) < 1e-20);
        assert_eq!(mes_score(0.0, 0.0, &at(1.0)), 0.0);
        // deep lower tail stays finite and non-negative
        let s = mes_score(0.0, 1.0, &at(-30.0));
        assert!(s.is_finite() && s > 0.0);
    }

    #[test]
    fn select_best_rules() {
        assert_eq!(select_best(&[0.1, 0.9, 0.9]).unwrap(), 1);
        assert_eq!(select_best(&[3.0]).unwrap(), 0);
        assert_eq!(select_best(&[f64::NAN, 0.2]).unwrap(), 1);
        assert!(matches!(
            select_best(&[f64::NAN, f64::NAN]),
            Err(Error::AllNan)
        ));
    }

    #[test]
    fn max_values_point_mass_when_deterministic() {
        let mut rng = RngStream::new(1, 0);
        let s = sample_max_values_from(&[0.2, 0.9, 0.5], &[0.0; 3], 0.1, 4, &mut rng).unwrap();
        for y in &s.y_star {
            assert!((y - 0.9).abs() < 1e-9);
        }
    }

    #[test]
    fn max_values_respect_incumbent_and_replay() {
        let means = [0.0, 0.3, -0.2];
        let stds = [1.0, 0.5, 2.0];
        let a = sample_max_values_from(&means, &stds, 1.5, 50, &mut RngStream::new(9, 1)).unwrap();
        let b = sample_max_values_from(&means, &stds, 1.5, 50, &mut RngStream::new(9, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a.y_star.iter().all(|y| *y >= 1.5 - 1e-9));
    }

    #[test]
    fn gumbel_matches_quartiles_of_the_max() {
        let means = [0.0, 0.3, -0.2];
        let stds = [1.0, 0.5, 0.8];
        let s = sample_max_values_from(&means, &stds, -5.0, 10, &mut RngStream::new(3, 0)).unwrap();
        let (loc, scale) = s.gumbel.unwrap();
        let cdf = |y: f64| -> f64 {
            means
                .iter()
                .zip(&stds)
                .map(|(m, sd)| norm_cdf((y - m) / sd))
                .product()
        };
        let true_q = |p: f64| {
            let (mut a, mut b) = (-20.0, 20.0);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if cdf(mid) < p {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a
        };
        let gumbel_q = |p: f64| loc - scale * (-p.ln()).ln();
        assert!((gumbel_q(0.5) - true_q(0.5)).abs() < 1e-9);
        let iqr = |q: &dyn Fn(f64) -> f64| q(0.75) - q(0.25);
        assert!((iqr(&gumbel_q) - iqr(&true_q)).abs() < 1e-9);
    }

    /// KS distance between the sampled maxima and the fitted Gumbel law
    /// truncated at the incumbent.
    #[test]
    fn samples_follow_truncated_gumbel() {
        let inc = -0.5;
        let k = 10_000;
        let s = sample_max_values_from(&[0.0], &[1.0], inc, k, &mut RngStream::new(3, 0)).unwrap();
        let (loc, scale) = s.gumbel.unwrap();
        let gcdf = |y: f64| (-(-(y - loc) / scale).exp()).exp();
        let z0 = gcdf(inc);
        let mut ys = s.y_star.clone();
        ys.sort_by(f64::total_cmp);
        let ks = ys
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let f = (gcdf(*y) - z0) / (1.0 - z0);
                ((i + 1) as f64 / k as f64 - f)
                    .abs()
                    .max((i as f64 / k as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic
        assert!(ks < 1.63 / (k as f64).sqrt(), "KS = {ks}");
        assert!(ys[0] >= inc);
    }

    #[test]
    fn sample_max_values_via_model() {
        let cfg = KernelConfig::default();
        let model = GpModel::fit(&[vec![0.1], vec![0.9]], &[0.0, 1.0], &cfg).unwrap();
        let cands: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let s = sample_max_values(&model, &cands, 10, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(s.y_star.len(), 10);
        assert!(s.y_star.iter().all(|y| *y >= 1.0 - 1e-9));
    }

    proptest! {
        #[test]
        fn ei_bounds_and_monotonicity(
            mean in -5.0f64..5.0, std in 0.0f64..3.0, inc in -5.0f64..5.0, dm in 0.0f64..1.0, ds in 0.0f64..1.0
        ) {
            let ei = ei_score(mean, std, inc);
            prop_assert!(ei >= 0.0);
            prop_assert!(ei >= (mean - inc).max(0.0) - 1e-12);
            prop_assert!(ei_score(mean + dm, std, inc) >= ei - 1e-12);
            prop_assert!(ei_score(mean, std + ds, inc) >= ei - 1e-12);
            let pi = pi_score(mean, std, inc);
            prop_assert!((0.0..=1.0).contains(&pi));
            prop_assert!(pi_score(mean + dm, std, inc) >= pi - 1e-12);
        }

        #[test]
        fn mes_shift_invariance(mean in -3.0f64..3.0, std in 0.01f64..3.0, y in -3.0f64..6.0, c in -100.0f64..100.0) {
            let a = mes_score(mean, std, &MaxValueSamples { y_star: vec![y], gumbel: None });
            let b = mes_score(mean + c, std, &MaxValueSamples { y_star: vec![y + c], gumbel: None });
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn ucb_argmax_invariant_under_shift(
            means in proptest::collection::vec(-5.0f64..5.0, 1..20),
            c in -50.0f64..50.0,
        ) {
            let s = UcbSchedule::new(0.1, 1000, 3).unwrap();
            let stds: Vec<f64> = (0..means.len()).map(|i| 0.1 * i as f64).collect();
            let a: Vec<f64> = means.iter().zip(&stds).map(|(m, sd)| ucb_score(*m, *sd, &s)).collect();
            let b: Vec<f64> = means.iter().zip(&stds).map(|(m, sd)| ucb_score(m + c, *sd, &s)).collect();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((y - x - c).abs() < 1e-9);
            }
            prop_assert_eq!(select_best(&a).unwrap(), select_best(&b).unwrap());
        }
    }
}
