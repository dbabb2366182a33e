//! Seeded k-means (k-means++ seeding followed by Lloyd iterations).

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::par;
use crate::rng::{stream_rng_at, Stream};

#[derive(Clone, Debug)]
pub struct KMeans {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.row_iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Clusters the rows of `x` into `k` groups. `stream_index` separates the
/// random draws of independent calls sharing one seed.
pub fn kmeans(x: &Matrix, k: usize, seed: u64, stream_index: u64, max_iters: usize) -> Result<KMeans> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::Contract(format!("k-means with k = {k} on {n} rows")));
    }
    let mut rng = stream_rng_at(seed, Stream::KMeans, stream_index);

    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = x.row_iter().map(|r| sq_dist(r, x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (d, r) in dist.iter_mut().zip(x.row_iter()) {
            *d = d.min(sq_dist(r, x.row(next)));
        }
    }
    let mut centroids = x.select_rows(&chosen);

    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let nearest_rows: Vec<(usize, f64)> = par::map_range(n, |i| nearest(x.row(i), &centroids));
        let changed = nearest_rows
            .iter()
            .zip(&assignments)
            .any(|(&(a, _), &b)| a != b);
        for (slot, &(a, _)) in assignments.iter_mut().zip(&nearest_rows) {
            *slot = a;
        }
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, &v) in sums.row_mut(a).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let inv = 1.0 / count as f64;
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
    }
    let inertia = assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_dist(x.row(i), centroids.row(a)))
        .sum();
    Ok(KMeans {
        centroids,
        assignments,
        inertia,
        iterations,
    })
}
