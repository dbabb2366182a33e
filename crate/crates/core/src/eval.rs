//! Final cluster assignment and clustering metrics.

use std::fmt;

use crate::error::{Error, Result};
use crate::math::{argmax, Matrix};
use crate::networks::ModelBundle;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    pub fused_soft: Matrix,
    pub per_view_soft: Vec<Matrix>,
}

/// How per-view soft predictions are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fusion {
    /// Unweighted mean over views.
    #[default]
    Mean,
    /// Each view's row weighted by its clean probability, then renormalized.
    CleanWeighted,
}

/// Fuses per-view predictions and takes the row-wise argmax.
///
/// `clean` supplies one probability vector per view and is only read by
/// [`Fusion::CleanWeighted`]; rows whose weights all vanish fall back to the
/// plain mean.
pub fn fuse_predictions(per_view_soft: Vec<Matrix>, fusion: Fusion, clean: Option<&[Vec<f64>]>) -> Result<ClusterResult> {
    let first = per_view_soft
        .first()
        .ok_or_else(|| Error::Contract("no views to fuse".into()))?;
    let (n, k) = first.shape();
    for m in &per_view_soft {
        if m.shape() != (n, k) {
            return Err(Error::dim("fuse_predictions", m.shape(), (n, k)));
        }
    }
    let weights = match (fusion, clean) {
        (Fusion::Mean, _) => None,
        (Fusion::CleanWeighted, Some(c)) => {
            if c.len() != per_view_soft.len() || c.iter().any(|p| p.len() != n) {
                return Err(Error::Contract("clean probabilities do not match the views".into()));
            }
            Some(c)
        }
        (Fusion::CleanWeighted, None) => {
            return Err(Error::Contract("clean-weighted fusion needs clean probabilities".into()))
        }
    };
    let views = per_view_soft.len() as f64;
    let mut fused = Matrix::zeros(n, k);
    for i in 0..n {
        let total_w: f64 = weights.map_or(0.0, |w| w.iter().map(|p| p[i]).sum());
        let row = fused.row_mut(i);
        for (v, m) in per_view_soft.iter().enumerate() {
            let w = match weights {
                Some(ws) if total_w > 0.0 => ws[v][i] / total_w,
                _ => 1.0 / views,
            };
            for (f, &p) in row.iter_mut().zip(m.row(i)) {
                *f += w * p;
            }
        }
    }
    let assignments = fused.row_iter().map(argmax).collect();
    Ok(ClusterResult {
        assignments,
        fused_soft: fused,
        per_view_soft,
    })
}

/// Classifies every sample in every view and fuses the predictions.
pub fn assign_clusters(
    model: &ModelBundle,
    views: &[Matrix],
    fusion: Fusion,
    clean: Option<&[Vec<f64>]>,
) -> Result<ClusterResult> {
    if views.len() != model.num_views() {
        return Err(Error::Contract(format!(
            "{} input views for a {}-view model",
            views.len(),
            model.num_views()
        )));
    }
    let per_view = model
        .views
        .iter()
        .zip(views)
        .map(|(m, x)| m.classify(&m.encode(x)?))
        .collect::<Result<Vec<_>>>()?;
    fuse_predictions(per_view, fusion, clean)
}

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Returns `perm` with `perm[row] = column` and the total cost.
pub fn hungarian(cost: &Matrix) -> Result<(Vec<usize>, f64)> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(Error::Contract(format!(
            "hungarian needs a square matrix, got {}x{}",
            cost.rows(),
            cost.cols()
        )));
    }
    if !cost.is_finite() {
        return Err(Error::NonFinite("hungarian cost matrix".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    // Potentials-based O(n³) formulation with 1-based bookkeeping; index 0
    // is a virtual column used as the augmenting path root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = matched_row[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r0 - 1, col - 1)] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[matched_row[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            matched_row[col0] = matched_row[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for col in 1..=n {
        perm[matched_row[col] - 1] = col - 1;
    }
    let total = perm.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum();
    Ok((perm, total))
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// `table[p][t]` counts samples predicted `p` with truth `t`.
pub fn contingency(pred: &[usize], truth: &[usize]) -> Vec<Vec<usize>> {
    let kp = pred.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        table[p][t] += 1;
    }
    table
}

fn check_range(labels: &[usize], k: usize) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Contract(format!("label {bad} outside [0, {k})")));
    }
    Ok(())
}

/// Best fraction of matched labels over all one-to-one label maps.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    check_lengths(pred, truth)?;
    check_range(pred, k)?;
    check_range(truth, k)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut cost = Matrix::zeros(k, k);
    for (&p, &t) in pred.iter().zip(truth) {
        cost[(p, t)] -= 1.0;
    }
    let (_, total) = hungarian(&cost)?;
    Ok(-total / pred.len() as f64)
}

/// Enumerates all `k!` label maps; intended as a test oracle for `k <= 6`.
pub fn brute_force_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if k > 6 {
        return Err(Error::Contract(format!("brute force accuracy limited to k <= 6, got {k}")));
    }
    check_lengths(pred, truth)?;
    check_range(pred, k)?;
    check_range(truth, k)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        let hits = pred.iter().zip(truth).filter(|(&a, &b)| p[a] == b).count();
        best = best.max(hits);
    });
    Ok(best as f64 / pred.len() as f64)
}

fn permute(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the arithmetic mean of both entropies.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let n = pred.len() as f64;
    let table = contingency(pred, truth);
    let row_sums: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let kt = table.first().map_or(0, Vec::len);
    let col_sums: Vec<usize> = (0..kt).map(|t| table.iter().map(|r| r[t]).sum()).collect();
    let hp = entropy(row_sums.iter().copied(), n);
    let ht = entropy(col_sums.iter().copied(), n);
    if hp == 0.0 && ht == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (p, row) in table.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (row_sums[p] as f64 * col_sums[t] as f64)).ln();
            }
        }
    }
    Ok((mi / ((hp + ht) / 2.0)).clamp(0.0, 1.0))
}

/// Share of samples that carry their predicted cluster's majority label.
pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let majority: usize = contingency(pred, truth)
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(majority as f64 / pred.len() as f64)
}

/// Area under the ROC curve of `scores` for `positives`, with ties counted
/// as one half. Returns 0.5 when either class is empty.
pub fn auroc(scores: &[f64], positives: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    // Average ranks over tie groups (Mann-Whitney U).
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&o| positives[o]).count() as f64 * avg_rank;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub acc: f64,
    pub nmi: f64,
    pub pur: f64,
}

pub fn evaluate(pred: &[usize], truth: &[usize], k: usize) -> Result<Metrics> {
    let k = k
        .max(pred.iter().max().map_or(0, |m| m + 1))
        .max(truth.iter().max().map_or(0, |m| m + 1));
    Ok(Metrics {
        acc: clustering_accuracy(pred, truth, k)?,
        nmi: nmi(pred, truth)?,
        pur: purity(pred, truth)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub dataset: String,
    pub noise_ratio: f64,
    pub seed: u64,
    pub ablation: String,
    pub metrics: Metrics,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "dataset,noise_ratio,seed,ablation,acc,nmi,pur";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.dataset,
            self.noise_ratio,
            self.seed,
            self.ablation,
            self.metrics.acc,
            self.metrics.nmi,
            self.metrics.pur
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} noise={} seed={} [{}]: ACC {:.4} NMI {:.4} PUR {:.4}",
            self.dataset,
            self.noise_ratio,
            self.seed,
            self.ablation,
            self.metrics.acc,
            self.metrics.nmi,
            self.metrics.pur
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m<const C: usize>(rows: &[[f64; C]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn fusion_examples() {
        let single = fuse_predictions(vec![m(&[[0.3, 0.7], [0.9, 0.1]])], Fusion::Mean, None).unwrap();
        assert_eq!(single.assignments, vec![1, 0]);

        let a = m(&[[0.2, 0.5, 0.3]]);
        let same = fuse_predictions(vec![a.clone(), a.clone()], Fusion::Mean, None).unwrap();
        assert_eq!(same.fused_soft, a);

        let r = fuse_predictions(vec![m(&[[0.6, 0.4]]), m(&[[0.2, 0.8]])], Fusion::Mean, None).unwrap();
        assert!((r.fused_soft[(0, 0)] - 0.4).abs() < 1e-15);
        assert!((r.fused_soft[(0, 1)] - 0.6).abs() < 1e-15);
        assert_eq!(r.assignments, vec![1]);

        let tie = fuse_predictions(vec![m(&[[0.5, 0.5]])], Fusion::Mean, None).unwrap();
        assert_eq!(tie.assignments, vec![0]);
    }

    #[test]
    fn clean_weighted_fusion_prefers_trusted_view() {
        let views = vec![m(&[[0.9, 0.1]]), m(&[[0.0, 1.0]]), m(&[[0.0, 1.0]])];
        let clean = vec![vec![1.0], vec![0.0], vec![0.0]];
        let r = fuse_predictions(views.clone(), Fusion::CleanWeighted, Some(&clean)).unwrap();
        assert_eq!(r.assignments, vec![0]);
        assert_eq!(fuse_predictions(views.clone(), Fusion::Mean, None).unwrap().assignments, vec![1]);
        assert!(fuse_predictions(views, Fusion::CleanWeighted, None).is_err());
    }

    #[test]
    fn hungarian_examples() {
        let id = m(&[[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]);
        assert_eq!(hungarian(&id).unwrap(), (vec![0, 1, 2], 0.0));
        let c = m(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]);
        assert_eq!(hungarian(&c).unwrap().1, 5.0);
        assert!(hungarian(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0], 2).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 0, 0, 1], &[0, 0, 1, 1], 2).unwrap(), 0.75);
        assert_eq!(clustering_accuracy(&[0, 0, 0, 0], &[0, 1, 0, 1], 2).unwrap(), 0.5);
        assert!(clustering_accuracy(&[0, 1], &[0], 2).is_err());
        assert_eq!(brute_force_accuracy(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        assert_eq!(brute_force_accuracy(&[0, 0, 0], &[0, 0, 0], 1).unwrap(), 1.0);
        assert!(brute_force_accuracy(&[0], &[0], 7).is_err());
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 1, 1, 2], &[2, 0, 0, 1]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert!(nmi(&[0], &[]).is_err());
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        // clusters {A, A, B} and {B, B}
        assert_eq!(purity(&[0, 0, 0, 1, 1], &[0, 0, 1, 1, 1]).unwrap(), 0.8);
        assert_eq!(purity(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]), 1.0);
        assert_eq!(auroc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]), 0.0);
        assert_eq!(auroc(&[0.5, 0.5, 0.5, 0.5], &[false, true, false, true]), 0.5);
        // binary scores: AUROC equals balanced accuracy
        let a = auroc(&[1.0, 0.0, 1.0, 1.0], &[true, false, false, true]);
        assert!((a - 0.75).abs() < 1e-12);
    }

    #[test]
    fn report_row() {
        let r = MetricsReport {
            dataset: "synth".into(),
            noise_ratio: 0.3,
            seed: 4,
            ablation: "full".into(),
            metrics: Metrics { acc: 1.0, nmi: 0.5, pur: 0.75 },
        };
        assert_eq!(r.csv_row(), "synth,0.3,4,full,1,0.5,0.75");
    }
}
