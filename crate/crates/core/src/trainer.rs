//! Autoencoder pretraining followed by alternating identification (E) and
//! gradient (M) epochs.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::data::{minibatch_iter, MultiViewDataset};
use crate::error::{Error, Result};
use crate::eval::{assign_clusters, hungarian, ClusterResult, Fusion};
use crate::kmeans::{kmeans, KMeans};
use crate::losses::{
    contrastive_loss, mix_predictions, reconstruction_loss_with_grad, rectification_loss_with_grad,
    total_loss, LossBreakdown, DEFAULT_SIMILARITY_CLAMP,
};
use crate::math::{adam_step, AdamState, Matrix, Parameterized};
use crate::networks::{Architecture, HeadGrads, ModelBundle, ViewForward, ViewModel};
use crate::noise_gmm::{identify_view, ViewIdentification};
use crate::par;

/// Which loss terms are switched off.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Ablation {
    #[default]
    Full,
    /// No identification and rectification.
    NoDr,
    /// No contrastive term.
    NoCon,
    /// Reconstruction only.
    NoDrCon,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::NoDr, Ablation::NoCon, Ablation::NoDrCon];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoDr => "no_dr",
            Ablation::NoCon => "no_con",
            Ablation::NoDrCon => "no_dr_con",
        }
    }

    pub fn rectification(self) -> bool {
        matches!(self, Ablation::Full | Ablation::NoCon)
    }

    pub fn contrastive(self) -> bool {
        matches!(self, Ablation::Full | Ablation::NoDr)
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| Error::InvalidValue {
                key: "ablation".into(),
                msg: format!("`{s}` is not one of full, no_dr, no_con, no_dr_con"),
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub learning_rate: f64,
    pub pretrain_epochs: usize,
    pub train_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub ablation: Ablation,
    pub architecture: Architecture,
    pub similarity_clamp: f64,
    /// Seed the classifier heads from k-means on the pretrained latents.
    pub init_heads: bool,
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub fusion: Fusion,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            tau: 0.8,
            learning_rate: 1e-4,
            pretrain_epochs: 100,
            train_epochs: 400,
            batch_size: 128,
            seed: 0,
            ablation: Ablation::Full,
            architecture: Architecture::default(),
            similarity_clamp: DEFAULT_SIMILARITY_CLAMP,
            init_heads: true,
            checkpoint_every: 50,
            checkpoint_dir: None,
            fusion: Fusion::Mean,
        }
    }
}

fn invalid(key: &str, msg: String) -> Error {
    Error::InvalidValue { key: key.into(), msg }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid("tau", format!("{} is outside (0, 1)", self.tau)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("lr", format!("{} must be positive", self.learning_rate)));
        }
        for (key, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() {
                return Err(invalid(key, format!("{v} is not finite")));
            }
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be at least 1".into()));
        }
        if !(self.similarity_clamp > 0.0 && self.similarity_clamp < 1.0) {
            return Err(invalid("similarity_clamp", format!("{} is outside (0, 1)", self.similarity_clamp)));
        }
        let a = self.architecture;
        if a.hidden == 0 || a.latent == 0 || a.projection == 0 {
            return Err(invalid("architecture", "layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn objective(&self) -> Objective {
        Objective {
            alpha: self.alpha,
            beta: self.beta,
            tau: self.tau,
            similarity_clamp: self.similarity_clamp,
            rectification: self.ablation.rectification(),
            contrastive: self.ablation.contrastive(),
        }
    }
}

/// The loss terms and weights used for one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub similarity_clamp: f64,
    pub rectification: bool,
    pub contrastive: bool,
}

impl Objective {
    pub fn reconstruction_only() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            tau: 0.8,
            similarity_clamp: DEFAULT_SIMILARITY_CLAMP,
            rectification: false,
            contrastive: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Train,
}

/// Loss summary of one epoch: per-term batch means, summed selected pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based, counting pretraining epochs.
    pub epoch: usize,
    pub phase: Phase,
    pub loss: LossBreakdown,
    pub mean_phi: Vec<f64>,
}

impl EpochRecord {
    pub fn log_header(num_views: usize) -> String {
        let mut s = String::from("epoch\trecon\trectify\tcontrastive\ttotal\tselected_pairs");
        for v in 1..=num_views {
            s.push_str(&format!("\tmean_phi_view{v}"));
        }
        s
    }

    pub fn log_line(&self) -> String {
        let l = &self.loss;
        let mut s = format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.epoch, l.recon, l.rectify, l.contrastive, l.total, l.selected_pair_count
        );
        for p in &self.mean_phi {
            s.push_str(&format!("\t{p}"));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub model: ModelBundle,
    /// One entry per parameter, in [`Parameterized`] order.
    pub optimizer: Vec<AdamState>,
    pub identification: Vec<Option<ViewIdentification>>,
    /// Clean probability per view and sample; all ones until an E-step runs.
    pub phi: Vec<Vec<f64>>,
    /// Completed epochs, pretraining included.
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
    /// Non-fatal conditions worth surfacing (degenerate fits and the like).
    pub events: Vec<String>,
}

impl TrainState {
    pub fn new(dataset: &MultiViewDataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = ModelBundle::new(
            &dataset.view_dims(),
            dataset.num_clusters,
            config.architecture,
            config.seed,
        );
        let optimizer = model
            .parameters()
            .iter()
            .map(|p| AdamState::for_parameter(p, config.learning_rate))
            .collect();
        let v = dataset.num_views();
        Ok(Self {
            model,
            optimizer,
            identification: vec![None; v],
            phi: vec![vec![1.0; dataset.num_samples()]; v],
            epoch: 0,
            history: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn train_log(&self) -> String {
        let mut s = EpochRecord::log_header(self.model.num_views());
        s.push('\n');
        for r in &self.history {
            s.push_str(&r.log_line());
            s.push('\n');
        }
        s
    }

    fn optimizer_step(&mut self) -> Result<()> {
        for (p, s) in self.model.parameters_mut().into_iter().zip(&mut self.optimizer) {
            adam_step(p, s)?;
        }
        Ok(())
    }

    fn mean_phi(&self) -> Vec<f64> {
        self.phi
            .iter()
            .map(|p| p.iter().sum::<f64>() / p.len().max(1) as f64)
            .collect()
    }
}

fn forward_all(model: &ModelBundle, inputs: &[Matrix]) -> Result<Vec<ViewForward>> {
    if inputs.len() != model.num_views() {
        return Err(Error::Contract(format!(
            "{} input views for a {}-view model",
            inputs.len(),
            model.num_views()
        )));
    }
    par::map_range(inputs.len(), |v| model.views[v].forward(&inputs[v]))
        .into_iter()
        .collect()
}

fn backward_all(model: &mut ModelBundle, caches: &[ViewForward], grads: &[HeadGrads]) -> Result<()> {
    let mut jobs: Vec<(&mut ViewModel, Result<()>)> =
        model.views.iter_mut().map(|m| (m, Ok(()))).collect();
    par::for_each_mut(&mut jobs, |v, (m, r)| *r = m.backward(&caches[v], &grads[v]));
    jobs.into_iter().try_for_each(|(_, r)| r)
}

fn scaled(mut m: Matrix, s: f64) -> Matrix {
    if s != 1.0 {
        m.scale(s);
    }
    m
}

/// Loss of one batch, accumulating parameter gradients when `backward` is
/// set. `phi[v]` holds the clean probabilities of the batch rows of view `v`.
///
/// Terms with zero weight contribute no gradient at all, so a zero-weight
/// objective follows exactly the same trajectory as reconstruction alone.
pub fn batch_objective(
    model: &mut ModelBundle,
    inputs: &[Matrix],
    phi: &[Vec<f64>],
    objective: &Objective,
    backward: bool,
) -> Result<LossBreakdown> {
    let caches = forward_all(model, inputs)?;
    let v = caches.len();
    let x: Vec<Matrix> = inputs.to_vec();
    let x_hat: Vec<Matrix> = caches.iter().map(|c| c.x_hat.clone()).collect();
    let (recon, recon_grads) = reconstruction_loss_with_grad(&x, &x_hat)?;

    let (rectify, rect_grads) = if objective.rectification && v >= 2 {
        if phi.len() != v {
            return Err(Error::Contract(format!("{} clean-probability vectors for {v} views", phi.len())));
        }
        let anchor = &caches[0].y;
        let targets = (1..v)
            .map(|k| mix_predictions(&caches[k].y, anchor, &phi[k]))
            .collect::<Result<Vec<_>>>()?;
        let preds: Vec<Matrix> = caches[1..].iter().map(|c| c.y.clone()).collect();
        let (l, g) = rectification_loss_with_grad(&targets, &preds)?;
        (l, Some(g))
    } else {
        (0.0, None)
    };

    let (contrastive, con_grads, selected) = if objective.contrastive {
        let z: Vec<Matrix> = caches.iter().map(|c| c.projection.z.clone()).collect();
        let y: Vec<Matrix> = caches.iter().map(|c| c.y.clone()).collect();
        let out = contrastive_loss(&z, &y, objective.tau, objective.similarity_clamp)?;
        (out.loss, Some(out.grads), out.selected_pair_count)
    } else {
        (0.0, None, 0)
    };

    let breakdown = total_loss(recon, rectify, contrastive, objective.alpha, objective.beta, selected);
    if !breakdown.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss (recon {recon}, rectify {rectify}, contrastive {contrastive})"
        )));
    }
    if !backward {
        return Ok(breakdown);
    }

    let mut rect_grads = rect_grads.filter(|_| objective.alpha != 0.0).map(Vec::into_iter);
    let mut con_grads = con_grads
        .filter(|_| objective.beta != 0.0 && selected > 0)
        .map(Vec::into_iter);
    let grads: Vec<HeadGrads> = recon_grads
        .into_iter()
        .enumerate()
        .map(|(k, g)| HeadGrads {
            x_hat: Some(g),
            z: con_grads.as_mut().and_then(Iterator::next).map(|g| scaled(g, objective.beta)),
            y: if k == 0 {
                None
            } else {
                rect_grads.as_mut().and_then(Iterator::next).map(|g| scaled(g, objective.alpha))
            },
        })
        .collect();
    backward_all(model, &caches, &grads)?;
    Ok(breakdown)
}

fn run_epoch(
    state: &mut TrainState,
    dataset: &MultiViewDataset,
    config: &TrainConfig,
    objective: &Objective,
    phase: Phase,
) -> Result<LossBreakdown> {
    let batches = minibatch_iter(dataset.num_samples(), config.batch_size, config.seed, state.epoch as u64);
    let mut sum = LossBreakdown::default();
    for (b, batch) in batches.iter().enumerate() {
        let inputs: Vec<Matrix> = dataset.views.iter().map(|x| x.select_rows(batch)).collect();
        let phi: Vec<Vec<f64>> = state
            .phi
            .iter()
            .map(|p| batch.iter().map(|&i| p[i]).collect())
            .collect();
        state.model.zero_grad();
        let l = batch_objective(&mut state.model, &inputs, &phi, objective, true).map_err(|e| match e {
            Error::NonFinite(msg) => Error::NonFinite(format!("epoch {}, batch {b}: {msg}", state.epoch + 1)),
            other => other,
        })?;
        state.optimizer_step()?;
        sum.recon += l.recon;
        sum.rectify += l.rectify;
        sum.contrastive += l.contrastive;
        sum.total += l.total;
        sum.selected_pair_count += l.selected_pair_count;
    }
    let n = batches.len().max(1) as f64;
    let mean = LossBreakdown {
        recon: sum.recon / n,
        rectify: sum.rectify / n,
        contrastive: sum.contrastive / n,
        total: sum.total / n,
        selected_pair_count: sum.selected_pair_count,
    };
    state.epoch += 1;
    let record = EpochRecord {
        epoch: state.epoch,
        phase,
        loss: mean,
        mean_phi: state.mean_phi(),
    };
    state.history.push(record);
    Ok(mean)
}

/// Reconstruction-only training for `config.pretrain_epochs` epochs.
pub fn pretrain(state: &mut TrainState, dataset: &MultiViewDataset, config: &TrainConfig) -> Result<()> {
    let objective = Objective::reconstruction_only();
    for _ in 0..config.pretrain_epochs {
        run_epoch(state, dataset, config, &objective, Phase::Pretrain)?;
    }
    Ok(())
}

/// k-means restarts per view when seeding the heads; the lowest inertia wins.
pub const KMEANS_RESTARTS: usize = 10;

/// Sets every classifier head to a nearest-centroid softmax over k-means
/// clusters of its view's latent codes.
///
/// Cluster ids of views 2..V are matched to those of view 1 by maximum
/// overlap, so the heads agree on what cluster `k` means. The head computes
/// `softmax_k(−‖e − c_k‖² / 2σ²)`, the posterior of an equal-weight
/// isotropic mixture, with `σ²` the per-coordinate k-means variance.
pub fn initialize_classifiers(state: &mut TrainState, dataset: &MultiViewDataset, config: &TrainConfig) -> Result<()> {
    let k = dataset.num_clusters;
    let latents = par::map_range(dataset.num_views(), |v| state.model.views[v].encode(&dataset.views[v]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let fits = par::map_range(latents.len(), |v| {
        let mut best: Option<KMeans> = None;
        for r in 0..KMEANS_RESTARTS {
            let fit = kmeans(&latents[v], k, config.seed, (v * KMEANS_RESTARTS + r) as u64, 100)?;
            if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
                best = Some(fit);
            }
        }
        Ok(best.expect("at least one restart"))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let anchor = &fits[0].assignments;
    for (v, fit) in fits.iter().enumerate() {
        let perm = if v == 0 {
            (0..k).collect()
        } else {
            let mut cost = Matrix::zeros(k, k);
            for (&a, &b) in fit.assignments.iter().zip(anchor) {
                cost[(a, b)] -= 1.0;
            }
            hungarian(&cost)?.0
        };
        let n = dataset.num_samples().max(1) as f64;
        let dim = fit.centroids.cols().max(1) as f64;
        let temperature = (2.0 * fit.inertia / (n * dim)).max(1e-12);
        let head = &mut state.model.views[v].classifier;
        for (c, &target) in perm.iter().enumerate() {
            let centroid = fit.centroids.row(c);
            for (d, &cv) in centroid.iter().enumerate() {
                head.weight.value[(d, target)] = 2.0 * cv / temperature;
            }
            head.bias.value[(0, target)] = -centroid.iter().map(|x| x * x).sum::<f64>() / temperature;
        }
    }
    Ok(())
}

/// Refreshes the cluster mixtures and clean probabilities of every view
/// from a full-dataset forward pass. Network parameters are not touched.
pub fn e_step(state: &mut TrainState, dataset: &MultiViewDataset, config: &TrainConfig) -> Result<()> {
    if !config.ablation.rectification() {
        for p in &mut state.phi {
            p.fill(1.0);
        }
        return Ok(());
    }
    let epoch = state.epoch as u64;
    let model = &state.model;
    let previous = &state.identification;
    let results = par::map_range(dataset.num_views(), |v| {
        let view = &model.views[v];
        let e = view.encode(&dataset.views[v])?;
        let z = view.project(&e)?.z;
        let y = view.classify(&e)?;
        let seed = config.seed ^ (epoch << 8 | v as u64);
        identify_view(&z, &y, previous[v].as_ref().map(|i| &i.gmm), seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    for (v, id) in results.into_iter().enumerate() {
        if id.separator.degenerate {
            state.events.push(format!(
                "epoch {}: clean scores of view {} are degenerate; treating all samples as clean",
                state.epoch + 1,
                v + 1
            ));
        }
        state.phi[v] = id.phi.clone();
        state.identification[v] = Some(id);
    }
    Ok(())
}

/// One pass over shuffled minibatches of the full objective with the
/// current clean probabilities held fixed.
pub fn m_step_epoch(state: &mut TrainState, dataset: &MultiViewDataset, config: &TrainConfig) -> Result<LossBreakdown> {
    run_epoch(state, dataset, config, &config.objective(), Phase::Train)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub result: ClusterResult,
}

/// Pretraining, head initialization, then `train_epochs` E/M rounds.
pub fn train(dataset: &MultiViewDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let mut state = TrainState::new(dataset, config)?;
    pretrain(&mut state, dataset, config)?;
    if config.init_heads {
        initialize_classifiers(&mut state, dataset, config)?;
    }
    for e in 0..config.train_epochs {
        e_step(&mut state, dataset, config)?;
        m_step_epoch(&mut state, dataset, config)?;
        if let Some(dir) = &config.checkpoint_dir {
            if config.checkpoint_every > 0 && (e + 1) % config.checkpoint_every == 0 {
                state
                    .model
                    .save_checkpoint(dir.join(format!("checkpoint_epoch{}.bin", e + 1)))?;
            }
        }
    }
    let result = assign_clusters(&state.model, &dataset.views, config.fusion, Some(&state.phi))?;
    Ok(TrainOutcome { state, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_blobs, zscore_normalize, SynthSpec};

    fn tiny() -> MultiViewDataset {
        zscore_normalize(&synth_blobs(&SynthSpec::new(24, 3, 2, 5, 6.0, 2)).unwrap())
    }

    fn quick(seed: u64) -> TrainConfig {
        TrainConfig {
            pretrain_epochs: 2,
            train_epochs: 2,
            batch_size: 10,
            seed,
            architecture: Architecture { hidden: 8, latent: 4, projection: 4 },
            learning_rate: 1e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.alpha, c.beta, c.tau, c.learning_rate), (1.0, 1.0, 0.8, 1e-4));
        assert_eq!((c.pretrain_epochs, c.train_epochs, c.batch_size), (100, 400, 128));
        assert_eq!(c.ablation, Ablation::Full);
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig { tau: 1.0, ..TrainConfig::default() },
            TrainConfig { tau: 0.0, ..TrainConfig::default() },
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn ablation_parsing() {
        for a in Ablation::ALL {
            assert_eq!(a.as_str().parse::<Ablation>().unwrap(), a);
        }
        assert_eq!("no-dr-con".parse::<Ablation>().unwrap(), Ablation::NoDrCon);
        assert!("none".parse::<Ablation>().is_err());
    }

    #[test]
    fn zero_pretrain_epochs_leave_parameters_alone() {
        let d = tiny();
        let c = TrainConfig { pretrain_epochs: 0, ..quick(1) };
        let mut s = TrainState::new(&d, &c).unwrap();
        let before = s.model.clone();
        pretrain(&mut s, &d, &c).unwrap();
        assert_eq!(s.model, before);
    }

    #[test]
    fn e_step_is_pure_and_ablation_aware() {
        let d = tiny();
        let c = quick(3);
        let mut s = TrainState::new(&d, &c).unwrap();
        pretrain(&mut s, &d, &c).unwrap();
        initialize_classifiers(&mut s, &d, &c).unwrap();
        let model = s.model.clone();
        e_step(&mut s, &d, &c).unwrap();
        let first = (s.phi.clone(), s.identification.clone());
        e_step(&mut s, &d, &c).unwrap();
        assert_eq!(s.model, model);
        assert_eq!(s.phi, first.0);
        assert_eq!(
            s.identification.iter().map(|i| i.as_ref().map(|i| i.phi.clone())).collect::<Vec<_>>(),
            first.1.iter().map(|i| i.as_ref().map(|i| i.phi.clone())).collect::<Vec<_>>()
        );

        let c = TrainConfig { ablation: Ablation::NoDr, ..c };
        e_step(&mut s, &d, &c).unwrap();
        assert!(s.phi.iter().flatten().all(|&p| p == 1.0));
    }

    #[test]
    fn no_con_never_reports_contrastive_loss() {
        let d = tiny();
        let c = TrainConfig { ablation: Ablation::NoCon, ..quick(4) };
        let out = train(&d, &c).unwrap();
        assert!(out
            .state
            .history
            .iter()
            .all(|r| r.loss.contrastive == 0.0 && r.loss.selected_pair_count == 0));
    }

    #[test]
    fn training_is_deterministic() {
        let d = tiny();
        let a = train(&d, &quick(5)).unwrap();
        let b = train(&d, &quick(5)).unwrap();
        assert_eq!(a.state.model, b.state.model);
        assert_eq!(a.result, b.result);
        assert_eq!(a.state.train_log(), b.state.train_log());
    }

    #[test]
    fn log_has_one_line_per_epoch() {
        let d = tiny();
        let out = train(&d, &quick(6)).unwrap();
        let log = out.state.train_log();
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines.len(), 1 + 4);
        assert!(lines[0].starts_with("epoch\trecon"));
        assert_eq!(lines[1].split('\t').count(), 6 + 2);
    }

    #[test]
    fn checkpoints_every_interval() {
        let dir = tempfile::tempdir().unwrap();
        let d = tiny();
        let c = TrainConfig {
            train_epochs: 4,
            checkpoint_every: 2,
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..quick(7)
        };
        let out = train(&d, &c).unwrap();
        assert!(dir.path().join("checkpoint_epoch2.bin").exists());
        let last = ModelBundle::load_checkpoint(dir.path().join("checkpoint_epoch4.bin")).unwrap();
        assert_eq!(last.named_parameters(), out.state.model.named_parameters());
        assert!(!dir.path().join("checkpoint_epoch3.bin").exists());
    }
}
