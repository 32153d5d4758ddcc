use crate::rng::RngStream;
use crate::space::sq_dist;

pub fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.min(sq_dist(&points[i], &points[j]));
        }
    }
    best.sqrt()
}

/// Maximin Latin hypercube: among `restarts` jittered random LHDs keep the one
/// with the largest minimum pairwise distance (first wins on ties).
pub fn lhd_maximin(n: usize, d: usize, rng: &mut RngStream, restarts: usize) -> Vec<Vec<f64>> {
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for _ in 0..restarts.max(1) {
        let mut design = vec![vec![0.0; d]; n];
        let mut perm: Vec<usize> = (0..n).collect();
        for j in 0..d {
            rng.shuffle(&mut perm);
            for (i, cell) in perm.iter().enumerate() {
                design[i][j] = (*cell as f64 + rng.uniform()) / n as f64;
            }
        }
        let score = min_pairwise_distance(&design);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, design));
        }
    }
    best.expect("at least one restart").1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        let d = lhd_maximin(1, 4, &mut RngStream::new(0, 0), 10);
        assert_eq!(d.len(), 1);
        assert!(d[0].iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn one_point_per_stratum() {
        let d = lhd_maximin(5, 1, &mut RngStream::new(1, 0), 5);
        let mut cells: Vec<usize> = d.iter().map(|x| (x[0] * 5.0).floor() as usize).collect();
        cells.sort();
        assert_eq!(cells, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn every_column_is_stratified() {
        let n = 14;
        let d = lhd_maximin(n, 6, &mut RngStream::new(2, 0), 20);
        for j in 0..6 {
            let mut cells: Vec<usize> = d
                .iter()
                .map(|x| (x[j] * n as f64).floor() as usize)
                .collect();
            cells.sort();
            assert_eq!(cells, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn beats_median_uniform_design() {
        let mut rng = RngStream::new(3, 0);
        let lhd = min_pairwise_distance(&lhd_maximin(14, 6, &mut rng, 100));
        let uniform: Vec<f64> = (0..100)
            .map(|_| {
                let pts: Vec<Vec<f64>> = (0..14)
                    .map(|_| (0..6).map(|_| rng.uniform()).collect())
                    .collect();
                min_pairwise_distance(&pts)
            })
            .collect();
        let median = crate::stats::median(&uniform);
        assert!(lhd >= median, "{lhd} < {median}");
    }
}
