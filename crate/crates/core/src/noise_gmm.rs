//! Noisy-sample identification.
//!
//! Per view, a K-component mixture over the unit-norm projected embeddings
//! has its means and scalar variances estimated from the classifier's soft
//! predictions. The posterior of a sample's predicted cluster under that
//! mixture is its clean score; a two-component 1-D mixture fitted to the
//! scores turns them into clean probabilities.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math::{argmax, norm, softmax_rows, Matrix};
use crate::rng::{stream_rng_at, Stream};

/// Lower bound on cluster variances.
pub const SIGMA_FLOOR: f64 = 1e-4;
/// Clusters with less total prediction mass than this keep their old mean.
pub const EMPTY_CLUSTER_WEIGHT: f64 = 1e-8;
/// Lower bound on the 1-D component variances.
pub const SCORE_VARIANCE_FLOOR: f64 = 1e-6;
/// Score ranges narrower than this mark the 1-D fit as degenerate.
pub const DEGENERATE_RANGE: f64 = 1e-9;

/// Unit-norm cluster means (K × d) and scalar variances for one view.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterGmm {
    pub means: Matrix,
    pub variances: Vec<f64>,
}

impl ClusterGmm {
    pub fn num_clusters(&self) -> usize {
        self.variances.len()
    }
}

fn random_unit(dim: usize, seed: u64, cluster: usize) -> Vec<f64> {
    let mut rng = stream_rng_at(seed, Stream::ClusterGmm, cluster as u64);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Re-estimates means and variances from soft predictions `y` (N × K).
///
/// `μ_k` is the ℓ2-normalized `y`-weighted mean of `z`; `σ_k` is the trace of
/// the `y`-weighted covariance around `μ_k` divided by the dimension, floored
/// at [`SIGMA_FLOOR`]. Clusters with (almost) no mass keep the previous mean,
/// or a seeded random unit vector when there is none.
pub fn update_cluster_gmm(
    z: &Matrix,
    y: &Matrix,
    previous: Option<&ClusterGmm>,
    seed: u64,
) -> Result<ClusterGmm> {
    if z.rows() != y.rows() {
        return Err(Error::dim("update_cluster_gmm", z.shape(), y.shape()));
    }
    let k = y.cols();
    if let Some(prev) = previous {
        if prev.num_clusters() != k || prev.means.cols() != z.cols() {
            return Err(Error::dim("update_cluster_gmm previous", prev.means.shape(), (k, z.cols())));
        }
    }
    let dim = z.cols();
    let mut means = Matrix::zeros(k, dim);
    let mut variances = vec![SIGMA_FLOOR; k];
    for c in 0..k {
        let mut weight = 0.0;
        let mut acc = vec![0.0; dim];
        for (i, zi) in z.row_iter().enumerate() {
            let w = y[(i, c)];
            weight += w;
            for (a, &zv) in acc.iter_mut().zip(zi) {
                *a += w * zv;
            }
        }
        let n = norm(&acc);
        let fallback = || match previous {
            Some(prev) => prev.means.row(c).to_vec(),
            None => random_unit(dim, seed, c),
        };
        if weight < EMPTY_CLUSTER_WEIGHT || n < 1e-12 {
            means.row_mut(c).copy_from_slice(&fallback());
            continue;
        }
        let mu: Vec<f64> = acc.iter().map(|a| a / n).collect();
        let mut spread = 0.0;
        for (i, zi) in z.row_iter().enumerate() {
            let d2: f64 = zi.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum();
            spread += y[(i, c)] * d2;
        }
        variances[c] = (spread / weight / dim as f64).max(SIGMA_FLOOR);
        means.row_mut(c).copy_from_slice(&mu);
    }
    Ok(ClusterGmm { means, variances })
}

/// `χ_ik = softmax_k(z_i·μ_k / σ_k)`.
pub fn cluster_posterior(z: &Matrix, gmm: &ClusterGmm) -> Result<Matrix> {
    if z.cols() != gmm.means.cols() {
        return Err(Error::dim("cluster_posterior", z.shape(), gmm.means.shape()));
    }
    let mut logits = z.matmul_t(&gmm.means)?;
    for r in 0..logits.rows() {
        for (l, s) in logits.row_mut(r).iter_mut().zip(&gmm.variances) {
            *l /= s;
        }
    }
    Ok(softmax_rows(&logits))
}

/// `χ_{i,q_i}` with `q_i = argmax_k y_ik` (ties to the lowest index). Scores
/// that underflow to zero are lifted to the smallest positive `f64`.
pub fn clean_score(chi: &Matrix, y: &Matrix) -> Result<Vec<f64>> {
    if chi.shape() != y.shape() {
        return Err(Error::dim("clean_score", chi.shape(), y.shape()));
    }
    Ok(y.row_iter()
        .enumerate()
        .map(|(i, yi)| chi[(i, argmax(yi))].max(f64::MIN_POSITIVE))
        .collect())
}

/// Two 1-D Gaussians over clean scores; component 1 has the higher mean and
/// stands for clean samples.
#[derive(Clone, Debug, PartialEq)]
pub struct CleanGmm2 {
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub weights: [f64; 2],
    /// Set when the scores carry no separable structure (a near-constant
    /// range, or two components that do not beat one Gaussian under BIC);
    /// every sample is then treated as clean.
    pub degenerate: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// EM for a two-component 1-D mixture, initialized at the 10th/90th
/// percentiles with the overall variance and equal weights.
pub fn fit_two_component_gmm(scores: &[f64], max_iters: usize, tol: f64) -> Result<CleanGmm2> {
    if scores.len() < 2 {
        return Err(Error::Contract(format!(
            "two-component fit needs at least 2 scores, got {}",
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("clean score {bad}")));
    }
    let n = scores.len() as f64;
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;

    let mut fit = CleanGmm2 {
        means: [percentile(&sorted, 0.1), percentile(&sorted, 0.9)],
        variances: [var.max(SCORE_VARIANCE_FLOOR); 2],
        weights: [0.5, 0.5],
        degenerate: false,
        iterations: 0,
        log_likelihood: f64::NEG_INFINITY,
    };
    if sorted[sorted.len() - 1] - sorted[0] < DEGENERATE_RANGE {
        fit.degenerate = true;
        return Ok(fit);
    }

    let mut resp = vec![[0.0; 2]; scores.len()];
    let mut prev_ll = f64::NEG_INFINITY;
    for iter in 1..=max_iters {
        // E-step
        let mut ll = 0.0;
        for (r, &s) in resp.iter_mut().zip(scores) {
            let a = fit.weights[0].ln() + log_normal(s, fit.means[0], fit.variances[0]);
            let b = fit.weights[1].ln() + log_normal(s, fit.means[1], fit.variances[1]);
            let total = log_sum_exp2(a, b);
            *r = [(a - total).exp(), (b - total).exp()];
            ll += total;
        }
        // M-step
        for c in 0..2 {
            let mass: f64 = resp.iter().map(|r| r[c]).sum();
            if mass < 1e-12 {
                continue;
            }
            let m = resp.iter().zip(scores).map(|(r, s)| r[c] * s).sum::<f64>() / mass;
            let v = resp
                .iter()
                .zip(scores)
                .map(|(r, s)| r[c] * (s - m) * (s - m))
                .sum::<f64>()
                / mass;
            fit.means[c] = m;
            fit.variances[c] = v.max(SCORE_VARIANCE_FLOOR);
            fit.weights[c] = mass / n;
        }
        let total_w = fit.weights[0] + fit.weights[1];
        fit.weights = [fit.weights[0] / total_w, fit.weights[1] / total_w];
        fit.iterations = iter;
        fit.log_likelihood = ll;
        if (ll - prev_ll).abs() < tol {
            break;
        }
        prev_ll = ll;
    }

    if fit.means[0] > fit.means[1] {
        fit.means.swap(0, 1);
        fit.variances.swap(0, 1);
        fit.weights.swap(0, 1);
    }
    fit.log_likelihood = scores
        .iter()
        .map(|&s| {
            log_sum_exp2(
                fit.weights[0].ln() + log_normal(s, fit.means[0], fit.variances[0]),
                fit.weights[1].ln() + log_normal(s, fit.means[1], fit.variances[1]),
            )
        })
        .sum();
    // BIC: five free parameters against two for a single Gaussian.
    let single: f64 = scores
        .iter()
        .map(|&s| log_normal(s, mean, var.max(SCORE_VARIANCE_FLOOR)))
        .sum();
    if 2.0 * (fit.log_likelihood - single) <= 3.0 * n.ln() {
        fit.degenerate = true;
    }
    Ok(fit)
}

/// Posterior responsibility of the clean (higher-mean) component.
fn clean_posterior(s: f64, gmm: &CleanGmm2) -> f64 {
    let a = gmm.weights[0].ln() + log_normal(s, gmm.means[0], gmm.variances[0]);
    let b = gmm.weights[1].ln() + log_normal(s, gmm.means[1], gmm.variances[1]);
    (b - log_sum_exp2(a, b)).exp()
}

/// Clean probability `φ_i` for every score.
///
/// With unequal variances the wider component wins both tails, so the raw
/// posterior turns back down above the clean mean (or up below the noisy
/// mean). The log-odds is quadratic in the score, and past its stationary
/// point on the affected side the posterior is held at its extreme value.
/// The result is non-decreasing in the score.
pub fn clean_probability(scores: &[f64], gmm: &CleanGmm2) -> Vec<f64> {
    if gmm.degenerate {
        return vec![1.0; scores.len()];
    }
    let [m0, m1] = gmm.means;
    let [v0, v1] = gmm.variances;
    // Stationary point of the log-odds; absent when the variances agree.
    let curvature = 1.0 / v0 - 1.0 / v1;
    let turn = (curvature != 0.0).then(|| (m0 / v0 - m1 / v1) / curvature);
    scores
        .iter()
        .map(|&s| {
            let at = match turn {
                Some(t) if v0 > v1 && s > m1 && s > t && t >= m1 => t,
                Some(t) if v1 > v0 && s < m0 && s < t && t <= m0 => t,
                _ => s,
            };
            clean_posterior(at, gmm).clamp(0.0, 1.0)
        })
        .collect()
}

/// Everything the E-step computes for one view.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewIdentification {
    pub gmm: ClusterGmm,
    pub scores: Vec<f64>,
    pub separator: CleanGmm2,
    pub phi: Vec<f64>,
}

/// Runs the whole identification chain for one view.
pub fn identify_view(
    z: &Matrix,
    y: &Matrix,
    previous: Option<&ClusterGmm>,
    seed: u64,
) -> Result<ViewIdentification> {
    let gmm = update_cluster_gmm(z, y, previous, seed)?;
    let chi = cluster_posterior(z, &gmm)?;
    let scores = clean_score(&chi, y)?;
    let separator = fit_two_component_gmm(&scores, 100, 1e-6)?;
    let phi = clean_probability(&scores, &separator);
    Ok(ViewIdentification {
        gmm,
        scores,
        separator,
        phi,
    })
}

/// CSV rows `index,score,phi[,corrupted]` with a header line.
pub fn diagnostics_csv(scores: &[f64], phi: &[f64], corrupted: Option<&[bool]>) -> String {
    let mut out = String::from(if corrupted.is_some() {
        "index,score,phi,corrupted\n"
    } else {
        "index,score,phi\n"
    });
    for (i, (s, p)) in scores.iter().zip(phi).enumerate() {
        match corrupted {
            Some(mask) => out.push_str(&format!("{i},{s},{p},{}\n", u8::from(mask[i]))),
            None => out.push_str(&format!("{i},{s},{p}\n")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m<const C: usize>(rows: &[[f64; C]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn one_hot_predictions_give_per_cluster_means() {
        let z = m(&[[1.0, 0.0], [0.0, 1.0]]);
        let y = m(&[[1.0, 0.0], [0.0, 1.0]]);
        let g = update_cluster_gmm(&z, &y, None, 0).unwrap();
        assert_eq!(g.means.row(0), &[1.0, 0.0]);
        assert_eq!(g.means.row(1), &[0.0, 1.0]);
        // single point equal to its mean has zero spread
        assert_eq!(g.variances, vec![SIGMA_FLOOR, SIGMA_FLOOR]);
    }

    #[test]
    fn uniform_predictions_average_then_normalize() {
        let z = m(&[[1.0, 0.0], [0.0, 1.0]]);
        let y = m(&[[0.5, 0.5], [0.5, 0.5]]);
        let g = update_cluster_gmm(&z, &y, None, 0).unwrap();
        for k in 0..2 {
            assert!((g.means[(k, 0)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            assert!((g.means[(k, 1)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
        // ‖z − μ‖² = 2 − √2 for both points, over dim 2
        let expected = (2.0 - 2f64.sqrt()) / 2.0;
        assert!((g.variances[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_cluster_keeps_previous_mean() {
        let z = m(&[[1.0, 0.0], [0.0, 1.0]]);
        let y = m(&[[1.0, 0.0], [1.0, 0.0]]);
        let first = update_cluster_gmm(&z, &y, None, 3).unwrap();
        assert!((norm(first.means.row(1)) - 1.0).abs() < 1e-12);
        assert_eq!(first, update_cluster_gmm(&z, &y, None, 3).unwrap());
        let prev = ClusterGmm {
            means: m(&[[1.0, 0.0], [0.6, 0.8]]),
            variances: vec![0.1, 0.1],
        };
        let g = update_cluster_gmm(&z, &y, Some(&prev), 3).unwrap();
        assert_eq!(g.means.row(1), &[0.6, 0.8]);
        assert_eq!(g.variances[1], SIGMA_FLOOR);
    }

    #[test]
    fn wrong_cluster_count_is_a_dimension_error() {
        let z = m(&[[1.0, 0.0]]);
        let prev = ClusterGmm {
            means: m(&[[1.0, 0.0], [0.0, 1.0]]),
            variances: vec![1.0, 1.0],
        };
        let y = m(&[[0.2, 0.3, 0.5]]);
        assert!(matches!(
            update_cluster_gmm(&z, &y, Some(&prev), 0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn posterior_examples() {
        let gmm = ClusterGmm {
            means: m(&[[1.0, 0.0], [0.0, 1.0]]),
            variances: vec![1.0, 1.0],
        };
        let chi = cluster_posterior(&m(&[[1.0, 0.0]]), &gmm).unwrap();
        assert!((chi[(0, 0)] - 0.7311).abs() < 1e-4);
        assert!((chi[(0, 1)] - 0.2689).abs() < 1e-4);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let chi = cluster_posterior(&m(&[[h, h]]), &gmm).unwrap();
        assert!((chi[(0, 0)] - 0.5).abs() < 1e-15);

        let z = m(&[[0.8, 0.6], [0.28, 0.96]]);
        let sharp = cluster_posterior(&z, &gmm).unwrap();
        let soft = cluster_posterior(
            &z,
            &ClusterGmm {
                means: gmm.means.clone(),
                variances: vec![10.0, 10.0],
            },
        )
        .unwrap();
        assert_eq!(sharp.argmax_rows(), soft.argmax_rows());
        for i in 0..2 {
            assert!((soft[(i, 0)] - 0.5).abs() < (sharp[(i, 0)] - 0.5).abs());
        }
    }

    #[test]
    fn clean_score_examples() {
        let chi = m(&[[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]]);
        let y = m(&[[0.7, 0.3], [0.6, 0.4], [0.1, 0.9]]);
        assert_eq!(clean_score(&chi, &y).unwrap(), vec![0.9, 0.2, 0.5]);
        // ties go to the lowest class
        let s = clean_score(&m(&[[0.3, 0.7]]), &m(&[[0.5, 0.5]])).unwrap();
        assert_eq!(s, vec![0.3]);
    }

    #[test]
    fn two_component_fit_separates_halves() {
        let fit = fit_two_component_gmm(&[0.05, 0.1, 0.9, 0.95], 100, 1e-6).unwrap();
        assert!(!fit.degenerate);
        assert!((fit.means[0] - 0.075).abs() < 0.02, "{fit:?}");
        assert!((fit.means[1] - 0.925).abs() < 0.02, "{fit:?}");
        assert!((fit.weights[0] + fit.weights[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unimodal_scores_are_degenerate() {
        let mut rng = stream_rng_at(4, Stream::Noise, 0);
        let scores: Vec<f64> = (0..500)
            .map(|_| 0.5 + 0.05 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let fit = fit_two_component_gmm(&scores, 200, 1e-9).unwrap();
        assert!(fit.degenerate, "{fit:?}");
        assert!(clean_probability(&scores, &fit).iter().all(|&p| p == 1.0));
    }

    #[test]
    fn labeling_ignores_input_order() {
        let a = fit_two_component_gmm(&[0.9, 0.95, 0.05, 0.1], 100, 1e-6).unwrap();
        let b = fit_two_component_gmm(&[0.05, 0.1, 0.9, 0.95], 100, 1e-6).unwrap();
        assert!(a.means[1] > a.means[0]);
        assert!((a.means[1] - b.means[1]).abs() < 1e-12);
    }

    #[test]
    fn constant_scores_are_degenerate() {
        let fit = fit_two_component_gmm(&[0.4; 5], 100, 1e-6).unwrap();
        assert!(fit.degenerate);
        assert_eq!(clean_probability(&[0.4; 5], &fit), vec![1.0; 5]);
        assert!(fit_two_component_gmm(&[0.4], 100, 1e-6).is_err());
    }

    fn symmetric(var: f64) -> CleanGmm2 {
        CleanGmm2 {
            means: [0.075, 0.925],
            variances: [var, var],
            weights: [0.5, 0.5],
            degenerate: false,
            iterations: 0,
            log_likelihood: 0.0,
        }
    }

    #[test]
    fn clean_probability_examples() {
        let g = symmetric(0.01);
        let phi = clean_probability(&[0.925, 0.075, 0.5], &g);
        assert!(phi[0] > 0.99);
        assert!(phi[1] < 0.01);
        assert!((phi[2] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn tails_stay_monotone_with_unequal_variances() {
        let g = CleanGmm2 {
            means: [0.3, 0.95],
            variances: [0.05, 0.0005],
            weights: [0.3, 0.7],
            degenerate: false,
            iterations: 0,
            log_likelihood: 0.0,
        };
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let phi = clean_probability(&grid, &g);
        assert!(phi[100] >= phi[95]);
        assert!(phi[0] <= phi[30]);
    }
}
