//! Box bounds and objective-sense handling.
//!
//! Internally every point lives in `[0, 1]^d` and every objective value is in
//! canonical maximization form; conversion happens only at evaluation time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

impl ObjectiveSense {
    /// `true` when `a` is strictly better than `b` in this sense.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            ObjectiveSense::Minimize => a < b,
            ObjectiveSense::Maximize => a > b,
        }
    }
}

/// Maps a problem-space value to canonical (maximization) form.
pub fn canonicalize(value: f64, sense: ObjectiveSense) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite(value));
    }
    Ok(match sense {
        ObjectiveSense::Maximize => value,
        ObjectiveSense::Minimize => -value,
    })
}

/// Inverse of [`canonicalize`].
pub fn decanonicalize(value: f64, sense: ObjectiveSense) -> Result<f64> {
    canonicalize(value, sense)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidBounds("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidBounds(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidBounds(format!(
                    "coordinate {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lo, hi]` in every one of `dim` coordinates.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Unit cube to problem space. Endpoints map exactly onto the bounds.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (lo, hi))| {
                if *t <= 0.0 {
                    *lo
                } else if *t >= 1.0 {
                    *hi
                } else {
                    (lo + t * (hi - lo)).clamp(*lo, *hi)
                }
            })
            .collect()
    }

    /// Problem space to unit cube.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    }
}

/// Checks that `x` has dimension `dim` and lies in the closed unit cube.
pub fn check_unit(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    match x.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(Error::OutOfBounds {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Euclidean distance from `x` to the nearest point of `set` (`+inf` if empty).
pub fn min_dist<'a, I>(x: &[f64], set: I) -> f64
where
    I: IntoIterator<Item = &'a Vec<f64>>,
{
    set.into_iter()
        .map(|p| sq_dist(x, p))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}
