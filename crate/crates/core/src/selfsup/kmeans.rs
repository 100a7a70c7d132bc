use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

fn dist2(a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centers: Vec<Point2>,
    /// Sum of squared distances to the assigned centers after each Lloyd
    /// iteration (first entry: right after seeding).
    pub distortion_history: Vec<f64>,
}

impl Clustering {
    pub fn distortion(&self) -> f64 {
        *self.distortion_history.last().expect("at least one entry")
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.centers.len()];
        for a in &self.assignments {
            s[*a] += 1;
        }
        s
    }
}

/// Probability of picking each point as the next seed: squared distance to
/// the nearest chosen center, normalized. Uniform when every point already
/// coincides with a center.
pub fn seeding_probabilities(points: &[Point2], chosen: &[Point2]) -> Vec<f64> {
    let d: Vec<f64> = points
        .iter()
        .map(|p| {
            chosen
                .iter()
                .map(|c| dist2(*p, *c))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let total: f64 = d.iter().sum();
    if total > 0.0 {
        d.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / points.len() as f64; points.len()]
    }
}

fn pick(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum
    probs
        .iter()
        .rposition(|p| *p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing (at most `MAX_ITERATIONS`). Clusters that go empty are re-seeded
/// at the point farthest from its center.
pub fn kmeanspp_cluster(points: &[Point2], k: usize, rng: &mut dyn RngCore) -> Result<Clustering> {
    let n = points.len();
    if k == 0 || n == 0 || k > n {
        return Err(Error::TooFewPoints { k, n });
    }
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.gen_range(0..n)]);
    while centers.len() < k {
        let probs = seeding_probabilities(points, &centers);
        centers.push(points[pick(&probs, rng)]);
    }

    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = dist2(*p, centers[0]);
            for (j, c) in centers.iter().enumerate().skip(1) {
                let d = dist2(*p, *c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        history.push(distortion(points, &assignments, &centers));
        if !changed {
            break;
        }
        let mut sums = vec![[0.0, 0.0]; k];
        let mut counts = vec![0usize; k];
        for (p, a) in points.iter().zip(&assignments) {
            sums[*a][0] += p[0];
            sums[*a][1] += p[1];
            counts[*a] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = [sums[j][0] / counts[j] as f64, sums[j][1] / counts[j] as f64];
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .max_by(|a, b| {
                        let da = dist2(points[*a], centers[assignments[*a]]);
                        let db = dist2(points[*b], centers[assignments[*b]]);
                        da.total_cmp(&db).then(b.cmp(a))
                    })
                    .expect("n >= 1");
                centers[j] = points[far];
                counts[j] = 1;
                counts[assignments[far]] -= 1;
                assignments[far] = j;
            }
        }
    }
    Ok(Clustering {
        assignments,
        centers,
        distortion_history: history,
    })
}

pub const MAX_ITERATIONS: usize = 100;

fn distortion(points: &[Point2], assignments: &[usize], centers: &[Point2]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, a)| dist2(*p, centers[*a]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{stream, Purpose};

    #[test]
    fn seeding_probabilities_on_a_line() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]];
        let p = seeding_probabilities(&pts, &[[0.0, 0.0]]);
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 1.0 / 101.0).abs() < 1e-15);
        assert!((p[2] - 100.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn k_equals_n_is_exact() {
        let pts = [[0.0, 0.0], [3.0, 1.0], [-2.0, 5.0], [7.0, 7.0]];
        let mut rng = stream(1, Purpose::Clustering, 0);
        let c = kmeanspp_cluster(&pts, 4, &mut rng).unwrap();
        assert_eq!(c.distortion(), 0.0);
        let mut a = c.assignments.clone();
        a.sort_unstable();
        a.dedup();
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn rejects_more_clusters_than_points() {
        let mut rng = stream(1, Purpose::Clustering, 0);
        assert_eq!(
            kmeanspp_cluster(&[[0.0, 0.0]], 2, &mut rng),
            Err(Error::TooFewPoints { k: 2, n: 1 })
        );
    }

    #[test]
    fn distortion_never_increases() {
        let pts: Vec<Point2> = (0..200)
            .map(|i| [((i * 37) % 101) as f64, ((i * 59) % 97) as f64])
            .collect();
        for trial in 0..10 {
            let mut rng = stream(trial, Purpose::Clustering, 0);
            let c = kmeanspp_cluster(&pts, 5, &mut rng).unwrap();
            for w in c.distortion_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }
}
