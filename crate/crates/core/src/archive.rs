//! The evaluated archive `(D, F)` and the evaluation budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{check_unit, sq_dist};

/// Two unit-space points closer than this are the same point.
pub const DUPLICATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetState {
    total: usize,
    remaining: usize,
    batch_size: usize,
}

impl BudgetState {
    pub fn new(total: usize, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        Ok(Self {
            total,
            remaining: total,
            batch_size,
        })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn used(&self) -> usize {
        self.total - self.remaining
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Slots available to the next iteration: never more than the batch size,
    /// however much budget was carried over.
    pub fn next_request(&self) -> usize {
        self.batch_size.min(self.remaining)
    }

    pub fn consume(&mut self, n: usize) -> Result<()> {
        if n > self.remaining {
            return Err(Error::BudgetExhausted {
                requested: n,
                remaining: self.remaining,
            });
        }
        self.remaining -= n;
        Ok(())
    }
}

/// Outcome of [`Dataset::append_evaluations`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AppendReport {
    pub added: usize,
    /// Batch positions that duplicated an archived point and were not stored.
    pub duplicates: Vec<usize>,
}

/// Evaluated points (unit space) with canonical values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    best_index: Option<usize>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
            values: Vec::new(),
            best_index: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn best_index(&self) -> Option<usize> {
        self.best_index
    }

    /// Incumbent point and canonical value; ties go to the lowest index.
    pub fn incumbent(&self) -> Result<(&[f64], f64)> {
        let i = self.best_index.ok_or(Error::EmptyDataset)?;
        Ok((&self.points[i], self.values[i]))
    }

    /// Index of an archived point within [`DUPLICATE_TOL`] of `x`.
    pub fn find_duplicate(&self, x: &[f64]) -> Option<usize> {
        let tol2 = DUPLICATE_TOL * DUPLICATE_TOL;
        self.points.iter().position(|p| sq_dist(p, x) < tol2)
    }

    /// Appends evaluated `(point, canonical value)` pairs, charging one budget
    /// unit per pair.
    ///
    /// The whole batch is validated before anything is recorded. A point that
    /// duplicates an archived one is still charged (it was evaluated) but not
    /// stored, and a warning is logged.
    pub fn append_evaluations(
        &mut self,
        batch: &[(Vec<f64>, f64)],
        budget: &mut BudgetState,
    ) -> Result<AppendReport> {
        if batch.len() > budget.remaining() || (batch.is_empty() && budget.remaining() == 0) {
            return Err(Error::BudgetExhausted {
                requested: batch.len(),
                remaining: budget.remaining(),
            });
        }
        for (x, v) in batch {
            check_unit(x, self.dim)?;
            if !v.is_finite() {
                return Err(Error::NonFinite(*v));
            }
        }

        let mut report = AppendReport::default();
        for (pos, (x, v)) in batch.iter().enumerate() {
            budget.consume(1)?;
            if let Some(existing) = self.find_duplicate(x) {
                log::warn!(
                    "evaluated point duplicates archive entry {existing}; value {v} not stored"
                );
                report.duplicates.push(pos);
                continue;
            }
            self.points.push(x.clone());
            self.values.push(*v);
            let i = self.values.len() - 1;
            match self.best_index {
                Some(b) if self.values[b] >= *v => {}
                _ => self.best_index = Some(i),
            }
            report.added += 1;
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(values: &[f64]) -> Dataset {
        let mut ds = Dataset::new(1);
        let mut budget = BudgetState::new(values.len(), 1).unwrap();
        let n = values.len().max(2) as f64;
        let batch: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, v)| (vec![i as f64 / n], *v))
            .collect();
        ds.append_evaluations(&batch, &mut budget).unwrap();
        ds
    }

    #[test]
    fn incumbent_first_max_wins() {
        let ds = filled(&[1.0, 5.0, 5.0, 2.0]);
        assert_eq!(ds.best_index(), Some(1));
        assert_eq!(ds.incumbent().unwrap().1, 5.0);
    }

    #[test]
    fn incumbent_singleton_and_all_equal() {
        let ds = filled(&[-3.0]);
        assert_eq!(ds.incumbent().unwrap(), (&[0.0][..], -3.0));
        let ds = filled(&[2.0, 2.0, 2.0]);
        assert_eq!(ds.best_index(), Some(0));
    }

    #[test]
    fn incumbent_of_empty_is_error() {
        assert!(matches!(
            Dataset::new(3).incumbent(),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn append_grows_and_charges_budget() {
        let mut ds = Dataset::new(2);
        let mut budget = BudgetState::new(20, 4).unwrap();
        let init: Vec<_> = (0..14)
            .map(|i| (vec![i as f64 / 14.0, 0.5], i as f64))
            .collect();
        ds.append_evaluations(&init, &mut budget).unwrap();
        let more: Vec<_> = (0..4).map(|i| (vec![0.99, i as f64 / 4.0], 0.0)).collect();
        ds.append_evaluations(&more, &mut budget).unwrap();
        assert_eq!(ds.len(), 18);
        assert_eq!(budget.remaining(), 2);
        assert_eq!(budget.next_request(), 2);
    }

    #[test]
    fn duplicate_is_charged_but_not_stored() {
        let mut ds = Dataset::new(2);
        let mut budget = BudgetState::new(5, 4).unwrap();
        ds.append_evaluations(&[(vec![0.25, 0.75], 1.0)], &mut budget)
            .unwrap();
        let report = ds
            .append_evaluations(
                &[(vec![0.25 + 1e-14, 0.75], 9.0), (vec![0.5, 0.5], 0.0)],
                &mut budget,
            )
            .unwrap();
        assert_eq!(report.duplicates, vec![0]);
        assert_eq!(report.added, 1);
        assert_eq!(ds.len(), 2);
        assert_eq!(budget.remaining(), 2);
        // Within-batch duplicates are caught too.
        let report = ds
            .append_evaluations(&[(vec![0.1, 0.1], 0.0), (vec![0.1, 0.1], 0.0)], &mut budget)
            .unwrap();
        assert_eq!(report.duplicates, vec![1]);
        assert_eq!(budget.remaining(), 0);
    }

    #[test]
    fn append_rejects_out_of_bounds_atomically() {
        let mut ds = Dataset::new(2);
        let mut budget = BudgetState::new(5, 4).unwrap();
        let err = ds
            .append_evaluations(&[(vec![0.5, 0.5], 1.0), (vec![1.5, 0.5], 1.0)], &mut budget)
            .unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { index: 0, .. }));
        assert!(ds.is_empty());
        assert_eq!(budget.remaining(), 5);
    }

    #[test]
    fn append_with_exhausted_budget_fails() {
        let mut ds = Dataset::new(1);
        let mut budget = BudgetState::new(1, 1).unwrap();
        ds.append_evaluations(&[(vec![0.5], 1.0)], &mut budget)
            .unwrap();
        assert!(matches!(
            ds.append_evaluations(&[(vec![0.1], 1.0)], &mut budget),
            Err(Error::BudgetExhausted {
                requested: 1,
                remaining: 0
            })
        ));
    }
}
