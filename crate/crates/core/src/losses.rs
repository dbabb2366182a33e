//! Training objectives and their analytic gradients.
//!
//! Every loss that feeds the optimizer has a `*_with_grad` variant that
//! returns the value together with gradients with respect to the network
//! outputs it consumes (predictions, projected embeddings, reconstructions).

use crate::error::{Error, Result};
use crate::math::{dot, Matrix};
use crate::par;

/// Probabilities below this are clamped inside the logarithm.
pub const PROB_CLAMP: f64 = 1e-12;
/// Default gap kept between a similarity and 1 inside `log(1 − s)`.
pub const DEFAULT_SIMILARITY_CLAMP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub recon: f64,
    pub rectify: f64,
    pub contrastive: f64,
    pub total: f64,
    pub selected_pair_count: usize,
}

/// `total = recon + α·rectify + β·contrastive`.
pub fn total_loss(recon: f64, rectify: f64, contrastive: f64, alpha: f64, beta: f64, selected_pair_count: usize) -> LossBreakdown {
    LossBreakdown {
        recon,
        rectify,
        contrastive,
        total: recon + alpha * rectify + beta * contrastive,
        selected_pair_count,
    }
}

/// Per-sample blend `m_i = φ_i·y_i^v + (1 − φ_i)·y_i^1`, used as a fixed
/// target (no gradient flows through it).
pub fn mix_predictions(y_view: &Matrix, y_anchor: &Matrix, phi: &[f64]) -> Result<Matrix> {
    if y_view.shape() != y_anchor.shape() {
        return Err(Error::dim("mix_predictions", y_view.shape(), y_anchor.shape()));
    }
    if phi.len() != y_view.rows() {
        return Err(Error::dim("mix_predictions phi", (phi.len(), 1), y_view.shape()));
    }
    let mut out = Matrix::zeros(y_view.rows(), y_view.cols());
    for (i, &p) in phi.iter().enumerate() {
        for ((o, &a), &b) in out.row_mut(i).iter_mut().zip(y_view.row(i)).zip(y_anchor.row(i)) {
            *o = p * a + (1.0 - p) * b;
        }
    }
    Ok(out)
}

fn check_rectify(targets: &[Matrix], preds: &[Matrix]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Contract(
            "rectification needs at least two views (one noisy view besides the anchor)".into(),
        ));
    }
    if targets.len() != preds.len() {
        return Err(Error::Contract(format!(
            "{} rectification targets for {} prediction matrices",
            targets.len(),
            preds.len()
        )));
    }
    for (t, p) in targets.iter().zip(preds) {
        if t.shape() != p.shape() {
            return Err(Error::dim("rectification_loss", t.shape(), p.shape()));
        }
    }
    Ok(())
}

/// Cross-entropy of predictions against mixed targets for views 2..V,
/// averaged over samples and over views.
pub fn rectification_loss(targets: &[Matrix], preds: &[Matrix]) -> Result<f64> {
    Ok(rectification_loss_with_grad(targets, preds)?.0)
}

/// Loss and `∂L/∂y` per view.
pub fn rectification_loss_with_grad(targets: &[Matrix], preds: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
    check_rectify(targets, preds)?;
    let views = targets.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(preds.len());
    for (t, y) in targets.iter().zip(preds) {
        let n = y.rows().max(1) as f64;
        let scale = 1.0 / (n * views);
        let mut g = Matrix::zeros(y.rows(), y.cols());
        let mut view_loss = 0.0;
        for ((gv, &m), &p) in g
            .as_mut_slice()
            .iter_mut()
            .zip(t.as_slice())
            .zip(y.as_slice())
        {
            view_loss -= m * p.max(PROB_CLAMP).ln();
            if p > PROB_CLAMP {
                *gv = -m / p * scale;
            }
        }
        loss += view_loss * scale;
        grads.push(g);
    }
    Ok((loss, grads))
}

/// Dot product of unit vectors clamped to [−1, 1].
pub fn pair_similarity(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}

#[derive(Clone, Debug)]
pub struct ContrastiveOutput {
    pub loss: f64,
    pub selected_pair_count: usize,
    /// `∂L/∂Z` per view.
    pub grads: Vec<Matrix>,
}

fn check_contrastive(z: &[Matrix], y: &[Matrix], tau: f64) -> Result<()> {
    if z.len() != y.len() || z.len() < 2 {
        return Err(Error::Contract(format!(
            "contrastive loss needs matching views (>= 2), got {} embeddings and {} predictions",
            z.len(),
            y.len()
        )));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Contract(format!("threshold τ = {tau} outside (0, 1)")));
    }
    let b = z[0].rows();
    for (zv, yv) in z.iter().zip(y) {
        if zv.rows() != b || yv.rows() != b {
            return Err(Error::dim("contrastive_loss", zv.shape(), yv.shape()));
        }
    }
    Ok(())
}

/// Threshold-gated cross-view attraction over one batch.
///
/// For every ordered view pair `(m, n)` and every sample pair `(i, j)`
/// (including `i = j`) with `y_i^m · y_j^n ≥ τ`, the pair contributes
/// `log(1 − s(Z_i^m, Z_j^n)) + log(1 − s(Z_j^m, Z_i^n))`, with `s` capped at
/// `1 − clamp`. The sum is divided by `V(V − 1)` and by the number of
/// selected pairs. Predictions only gate; gradients flow into `Z`.
pub fn contrastive_loss(z: &[Matrix], y: &[Matrix], tau: f64, clamp: f64) -> Result<ContrastiveOutput> {
    check_contrastive(z, y, tau)?;
    let v = z.len();
    let b = z[0].rows();
    let cap = 1.0 - clamp;
    let f = |s: f64| (1.0 - s.clamp(-1.0, cap)).ln();
    let df = |s: f64| if s > -1.0 && s < cap { -1.0 / (1.0 - s) } else { 0.0 };

    // Each (m, n, i, j) term appears once as the "first" similarity and once
    // as the "second" one of (m, n, j, i); with w = gate(i,j) + gate(j,i)
    // the sum collapses to Σ_{m≠n} Σ_ij w^{mn}_ij f(Z_i^m · Z_j^n), and the
    // gradient on row i of view m is 2 Σ_{n≠m} Σ_j w^{mn}_ij f'(·) Z_j^n.
    struct RowOut {
        loss: f64,
        selected: usize,
        grad: Vec<f64>,
    }
    let rows: Vec<Vec<RowOut>> = par::map_range(v, |m| {
        (0..b)
            .map(|i| {
                let zi = z[m].row(i);
                let yi = y[m].row(i);
                let mut out = RowOut {
                    loss: 0.0,
                    selected: 0,
                    grad: vec![0.0; zi.len()],
                };
                for n in (0..v).filter(|&n| n != m) {
                    let yin = y[n].row(i);
                    for j in 0..b {
                        let forward = dot(yi, y[n].row(j)) >= tau;
                        let backward = dot(y[m].row(j), yin) >= tau;
                        let w = u8::from(forward) + u8::from(backward);
                        out.selected += usize::from(forward);
                        if w == 0 {
                            continue;
                        }
                        let zj = z[n].row(j);
                        let s = dot(zi, zj);
                        let w = f64::from(w);
                        out.loss += w * f(s);
                        let d = 2.0 * w * df(s);
                        if d != 0.0 {
                            for (g, &zv) in out.grad.iter_mut().zip(zj) {
                                *g += d * zv;
                            }
                        }
                    }
                }
                out
            })
            .collect()
    });

    let selected: usize = rows.iter().flatten().map(|r| r.selected).sum();
    let mut grads: Vec<Matrix> = z.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
    if selected == 0 {
        return Ok(ContrastiveOutput {
            loss: 0.0,
            selected_pair_count: 0,
            grads,
        });
    }
    let scale = 1.0 / ((v * (v - 1)) as f64 * selected as f64);
    let mut total = 0.0;
    for (m, view_rows) in rows.iter().enumerate() {
        for (i, r) in view_rows.iter().enumerate() {
            total += r.loss;
            for (g, &d) in grads[m].row_mut(i).iter_mut().zip(&r.grad) {
                *g = d * scale;
            }
        }
    }
    Ok(ContrastiveOutput {
        loss: total * scale,
        selected_pair_count: selected,
        grads,
    })
}

/// How many ordered cross-view pairs pass the gate, and how many of those
/// join two samples with the same ground-truth label.
pub fn pair_selection_stats(y: &[Matrix], labels: &[usize], tau: f64) -> (usize, usize) {
    let v = y.len();
    let b = labels.len();
    let mut selected = 0;
    let mut same = 0;
    for m in 0..v {
        for n in (0..v).filter(|&n| n != m) {
            for i in 0..b {
                for j in 0..b {
                    if dot(y[m].row(i), y[n].row(j)) >= tau {
                        selected += 1;
                        same += usize::from(labels[i] == labels[j]);
                    }
                }
            }
        }
    }
    (selected, same)
}

fn check_recon(x: &[Matrix], x_hat: &[Matrix]) -> Result<()> {
    if x.len() != x_hat.len() {
        return Err(Error::Contract(format!(
            "{} inputs for {} reconstructions",
            x.len(),
            x_hat.len()
        )));
    }
    for (a, b) in x.iter().zip(x_hat) {
        if a.shape() != b.shape() {
            return Err(Error::dim("reconstruction_loss", a.shape(), b.shape()));
        }
    }
    Ok(())
}

/// `Σ_v mean_i ‖x_i^v − x̂_i^v‖²`.
pub fn reconstruction_loss(x: &[Matrix], x_hat: &[Matrix]) -> Result<f64> {
    check_recon(x, x_hat)?;
    Ok(x.iter()
        .zip(x_hat)
        .map(|(a, b)| {
            let n = a.rows().max(1) as f64;
            let sq: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| (p - q) * (p - q)).sum();
            sq / n
        })
        .sum())
}

/// Loss and `∂L/∂x̂` per view.
pub fn reconstruction_loss_with_grad(x: &[Matrix], x_hat: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
    let loss = reconstruction_loss(x, x_hat)?;
    let grads = x
        .iter()
        .zip(x_hat)
        .map(|(a, b)| {
            let n = a.rows().max(1) as f64;
            let mut g = b.sub(a).expect("shapes checked");
            g.scale(2.0 / n);
            g
        })
        .collect();
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::central_difference;

    fn m<const C: usize>(rows: &[[f64; C]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    /// Literal quadruple loop over (m, n, i, j) with both similarity terms.
    fn contrastive_oracle(z: &[Matrix], y: &[Matrix], tau: f64, clamp: f64) -> (f64, usize) {
        let v = z.len();
        let b = z[0].rows();
        let f = |s: f64| (1.0 - s.clamp(-1.0, 1.0 - clamp)).ln();
        let mut total = 0.0;
        let mut count = 0;
        for mm in 0..v {
            for nn in 0..v {
                if mm == nn {
                    continue;
                }
                for i in 0..b {
                    for j in 0..b {
                        let gate: f64 = y[mm].row(i).iter().zip(y[nn].row(j)).map(|(a, c)| a * c).sum();
                        if gate >= tau {
                            count += 1;
                            let s1: f64 = z[mm].row(i).iter().zip(z[nn].row(j)).map(|(a, c)| a * c).sum();
                            let s2: f64 = z[mm].row(j).iter().zip(z[nn].row(i)).map(|(a, c)| a * c).sum();
                            total += f(s1) + f(s2);
                        }
                    }
                }
            }
        }
        if count == 0 {
            return (0.0, 0);
        }
        (total / (v * (v - 1)) as f64 / count as f64, count)
    }

    fn unit_rows(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = crate::rng::stream_rng(seed, crate::rng::Stream::Synth);
        let raw = crate::math::layers::glorot_uniform(rows, cols, &mut rng);
        crate::math::l2_normalize_rows(&raw).0
    }

    fn prob_rows(rows: usize, cols: usize, seed: u64, sharpness: f64) -> Matrix {
        let mut rng = crate::rng::stream_rng(seed, crate::rng::Stream::Init);
        let raw = crate::math::layers::glorot_uniform(rows, cols, &mut rng).map(|v| v * sharpness);
        crate::math::softmax_rows(&raw)
    }

    #[test]
    fn mix_examples() {
        let yv = m(&[[0.2, 0.8]]);
        let y1 = m(&[[0.6, 0.4]]);
        assert_eq!(mix_predictions(&yv, &y1, &[1.0]).unwrap(), yv);
        assert_eq!(mix_predictions(&yv, &y1, &[0.0]).unwrap(), y1);
        let half = mix_predictions(&yv, &y1, &[0.5]).unwrap();
        assert!((half[(0, 0)] - 0.4).abs() < 1e-15 && (half[(0, 1)] - 0.6).abs() < 1e-15);
        assert!(mix_predictions(&yv, &m(&[[1.0, 0.0, 0.0]]), &[0.5]).is_err());
    }

    #[test]
    fn rectification_examples() {
        let one_hot = m(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(rectification_loss(std::slice::from_ref(&one_hot), std::slice::from_ref(&one_hot)).unwrap(), 0.0);
        let half = m(&[[0.5, 0.5]]);
        let l = rectification_loss(std::slice::from_ref(&half), std::slice::from_ref(&half)).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let l = rectification_loss(&[m(&[[1.0, 0.0]])], &[m(&[[0.0, 1.0]])]).unwrap();
        assert!(l.is_finite() && l <= -(1e-12f64).ln() + 1e-9);
        assert!(rectification_loss(&[], &[]).is_err());
    }

    #[test]
    fn rectification_grad_matches_finite_differences() {
        let t = vec![prob_rows(3, 4, 1, 2.0), prob_rows(3, 4, 2, 2.0)];
        let y = vec![prob_rows(3, 4, 3, 2.0), prob_rows(3, 4, 4, 2.0)];
        let (_, grads) = rectification_loss_with_grad(&t, &y).unwrap();
        for v in 0..2 {
            for idx in 0..12 {
                let numeric = central_difference(
                    |h| {
                        let mut yp = y.clone();
                        yp[v].as_mut_slice()[idx] += h;
                        rectification_loss(&t, &yp).unwrap()
                    },
                    1e-6,
                );
                let a = grads[v].as_slice()[idx];
                assert!((a - numeric).abs() <= 1e-4 * a.abs().max(1e-6), "{a} vs {numeric}");
            }
        }
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(pair_similarity(&[0.6, 0.8], &[0.6, 0.8]), 1.0);
        assert_eq!(pair_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(pair_similarity(&[1.0, 0.0], &[-1.0, 0.0]), -1.0);
    }

    #[test]
    fn contrastive_selects_nothing_below_threshold() {
        let z = vec![unit_rows(4, 3, 1), unit_rows(4, 3, 2)];
        let y = vec![Matrix::filled(4, 3, 1.0 / 3.0), Matrix::filled(4, 3, 1.0 / 3.0)];
        let out = contrastive_loss(&z, &y, 0.8, DEFAULT_SIMILARITY_CLAMP).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.selected_pair_count, 0);
        assert!(out.grads.iter().all(|g| g.as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn contrastive_single_pair_cases() {
        // one sample, two views: only (m,n) = (0,1) and (1,0) with i = j = 0
        let y = vec![m(&[[1.0, 0.0]]), m(&[[1.0, 0.0]])];
        let orth = vec![m(&[[1.0, 0.0]]), m(&[[0.0, 1.0]])];
        let out = contrastive_loss(&orth, &y, 0.5, DEFAULT_SIMILARITY_CLAMP).unwrap();
        assert_eq!(out.selected_pair_count, 2);
        assert_eq!(out.loss, 0.0);

        let h = 0.75f64.sqrt();
        let half = vec![m(&[[1.0, 0.0]]), m(&[[0.5, h]])];
        let out = contrastive_loss(&half, &y, 0.5, DEFAULT_SIMILARITY_CLAMP).unwrap();
        // each ordered pair contributes 2·ln(0.5); two ordered pairs, divided
        // by V(V−1) = 2 and by 2 selected pairs
        let per_pair = 2.0 * 0.5f64.ln();
        assert!((per_pair + 1.3863).abs() < 1e-4);
        assert!((out.loss - per_pair / 2.0).abs() < 1e-12);
    }

    #[test]
    fn contrastive_matches_literal_loop() {
        for seed in 0..20 {
            let v = 2 + (seed as usize % 3);
            let z: Vec<Matrix> = (0..v).map(|k| unit_rows(5, 4, seed * 10 + k as u64)).collect();
            let y: Vec<Matrix> = (0..v).map(|k| prob_rows(5, 3, seed * 10 + k as u64, 6.0)).collect();
            for tau in [0.2, 0.4, 0.6, 0.8] {
                let out = contrastive_loss(&z, &y, tau, DEFAULT_SIMILARITY_CLAMP).unwrap();
                let (loss, count) = contrastive_oracle(&z, &y, tau, DEFAULT_SIMILARITY_CLAMP);
                assert_eq!(out.selected_pair_count, count);
                assert!((out.loss - loss).abs() < 1e-12, "{} vs {loss}", out.loss);
            }
        }
    }

    #[test]
    fn contrastive_grad_matches_finite_differences() {
        let z = vec![unit_rows(4, 3, 5), unit_rows(4, 3, 6), unit_rows(4, 3, 7)];
        let y = vec![prob_rows(4, 2, 1, 4.0), prob_rows(4, 2, 2, 4.0), prob_rows(4, 2, 3, 4.0)];
        let out = contrastive_loss(&z, &y, 0.4, DEFAULT_SIMILARITY_CLAMP).unwrap();
        assert!(out.selected_pair_count > 0);
        for v in 0..3 {
            for idx in 0..12 {
                let numeric = central_difference(
                    |h| {
                        let mut zp = z.clone();
                        zp[v].as_mut_slice()[idx] += h;
                        contrastive_oracle(&zp, &y, 0.4, DEFAULT_SIMILARITY_CLAMP).0
                    },
                    1e-6,
                );
                let a = out.grads[v].as_slice()[idx];
                assert!((a - numeric).abs() <= 1e-4 * a.abs().max(1e-6), "{a} vs {numeric}");
            }
        }
    }

    #[test]
    fn reconstruction_examples() {
        let x = vec![m(&[[1.0, 0.0]])];
        assert_eq!(reconstruction_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(reconstruction_loss(&x, &[m(&[[0.0, 0.0]])]).unwrap(), 1.0);
        let a = reconstruction_loss(&x, &[m(&[[0.5, 0.25]])]).unwrap();
        let b = reconstruction_loss(&x, &[m(&[[0.0, 0.5]])]).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12);
        assert!(reconstruction_loss(&x, &[m(&[[0.0]])]).is_err());
    }

    #[test]
    fn total_examples() {
        let t = total_loss(1.5, 3.0, -2.0, 0.0, 0.0, 0);
        assert_eq!(t.total, 1.5);
        let t = total_loss(1.0, 2.0, -1.0, 1.0, 1.0, 4);
        assert_eq!(t.total, 2.0);
        assert_eq!(t.selected_pair_count, 4);
    }
}
