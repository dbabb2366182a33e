use rmvc::data::{inject_noise, synth_blobs, zscore_normalize, MultiViewDataset, NoiseSpec, SynthSpec};
use rmvc::eval::auroc;
use rmvc::math::Matrix;
use rmvc::networks::Architecture;
use rmvc::trainer::{
    batch_objective, e_step, initialize_classifiers, m_step_epoch, pretrain, train, Ablation, Objective, TrainConfig,
    TrainState,
};

fn blobs(n: usize, sep: f64, seed: u64) -> MultiViewDataset {
    zscore_normalize(&synth_blobs(&SynthSpec::new(n, 3, 3, 64, sep, seed)).unwrap())
}

fn noisy_blobs(seed: u64) -> (MultiViewDataset, Vec<Vec<bool>>) {
    let clean = synth_blobs(&SynthSpec::new(300, 3, 3, 64, 8.0, 0)).unwrap();
    let (noisy, mask) = inject_noise(&clean, &NoiseSpec::new(0.3, seed)).unwrap();
    (zscore_normalize(&noisy), mask.per_view)
}

fn small_arch() -> Architecture {
    Architecture {
        hidden: 32,
        latent: 8,
        projection: 8,
    }
}

fn full_batch_total(state: &mut TrainState, d: &MultiViewDataset, objective: &Objective) -> f64 {
    batch_objective(&mut state.model, &d.views, &state.phi, objective, false)
        .unwrap()
        .total
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[test]
fn pretraining_lowers_reconstruction_epoch_by_epoch() {
    let mut monotone = 0;
    for seed in 0..10 {
        let d = blobs(300, 10.0, seed);
        let c = TrainConfig {
            pretrain_epochs: 10,
            seed,
            ..TrainConfig::default()
        };
        let mut s = TrainState::new(&d, &c).unwrap();
        pretrain(&mut s, &d, &c).unwrap();
        let recon: Vec<f64> = s.history.iter().map(|r| r.loss.recon).collect();
        if recon.windows(2).all(|w| w[1] < w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 9, "monotone in only {monotone}/10 seeds");
}

#[test]
fn training_ends_below_its_starting_reconstruction() {
    let mut lower = 0;
    for seed in 0..10 {
        let d = blobs(300, 8.0, seed);
        let c = TrainConfig {
            pretrain_epochs: 5,
            train_epochs: 5,
            seed,
            ..TrainConfig::default()
        };
        let out = train(&d, &c).unwrap();
        let h = &out.state.history;
        if h.last().unwrap().loss.recon < h[0].loss.recon {
            lower += 1;
        }
    }
    assert!(lower >= 9, "lower in only {lower}/10 seeds");
}

#[test]
fn one_small_step_on_a_single_batch_descends() {
    let mut descended = 0;
    for seed in 0..10 {
        let d = blobs(60, 8.0, seed);
        let c = TrainConfig {
            pretrain_epochs: 20,
            learning_rate: 1e-5,
            seed,
            ..TrainConfig::default()
        };
        let mut s = TrainState::new(&d, &c).unwrap();
        pretrain(&mut s, &d, &c).unwrap();
        initialize_classifiers(&mut s, &d, &c).unwrap();
        e_step(&mut s, &d, &c).unwrap();
        let objective = c.objective();
        let before = full_batch_total(&mut s, &d, &objective);
        m_step_epoch(&mut s, &d, &c).unwrap();
        let after = full_batch_total(&mut s, &d, &objective);
        if after < before {
            descended += 1;
        }
    }
    assert!(descended >= 9, "descended in only {descended}/10 seeds");
}

#[test]
fn zero_weights_reduce_to_reconstruction() {
    let d = blobs(90, 8.0, 4);
    let base = TrainConfig {
        pretrain_epochs: 3,
        train_epochs: 4,
        seed: 4,
        ..TrainConfig::default()
    };
    let zero = train(&d, &TrainConfig { alpha: 0.0, beta: 0.0, ..base.clone() }).unwrap();
    let none = train(&d, &TrainConfig { ablation: Ablation::NoDrCon, ..base.clone() }).unwrap();
    let pure = {
        let c = TrainConfig {
            pretrain_epochs: 7,
            train_epochs: 0,
            ..base.clone()
        };
        let mut s = TrainState::new(&d, &c).unwrap();
        pretrain(&mut s, &d, &c).unwrap();
        s.model
    };
    let recon = |m: &rmvc::networks::ModelBundle| -> Vec<(String, Matrix)> {
        m.named_parameters()
            .into_iter()
            .filter(|(name, _)| !name.contains("classifier"))
            .map(|(n, p)| (n, p.clone()))
            .collect()
    };
    assert_eq!(recon(&none.state.model), recon(&pure));
    assert_eq!(recon(&zero.state.model), recon(&pure));
    for (a, b) in zero.state.history.iter().zip(&none.state.history) {
        assert_eq!(a.loss.recon, b.loss.recon);
    }
}

#[test]
fn corrupted_rows_get_lower_clean_probability() {
    let mut wins = 0;
    for seed in 0..3 {
        let (d, mask) = noisy_blobs(seed);
        let c = TrainConfig {
            train_epochs: 5,
            seed,
            ..TrainConfig::default()
        };
        let mut s = TrainState::new(&d, &c).unwrap();
        pretrain(&mut s, &d, &c).unwrap();
        initialize_classifiers(&mut s, &d, &c).unwrap();
        e_step(&mut s, &d, &c).unwrap();
        let mean = |v: usize, want: bool| {
            let xs: Vec<f64> = (0..300).filter(|&i| mask[v][i] == want).map(|i| s.phi[v][i]).collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        if (1..3).all(|v| mean(v, true) < mean(v, false)) {
            wins += 1;
        }
    }
    assert_eq!(wins, 3);
}

#[test]
fn detector_after_five_rounds() {
    let mut scores = Vec::new();
    for seed in 0..5 {
        let (d, mask) = noisy_blobs(seed);
        let c = TrainConfig {
            train_epochs: 5,
            seed,
            ..TrainConfig::default()
        };
        let out = train(&d, &c).unwrap();
        let (mut calls, mut truth) = (Vec::new(), Vec::new());
        for (phi, noisy) in out.state.phi.iter().zip(&mask).skip(1) {
            calls.extend(phi.iter().map(|&p| if p < 0.5 { 1.0 } else { 0.0 }));
            truth.extend_from_slice(noisy);
        }
        scores.push(auroc(&calls, &truth));
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    assert!(mean >= 0.8, "mean AUROC {mean:.3}, per seed {scores:.3?}");
}

fn no_nan_over_seeds(train_epochs: usize) {
    for seed in 0..10 {
        let (d, _) = noisy_blobs(seed);
        let c = TrainConfig {
            train_epochs,
            seed,
            ..TrainConfig::default()
        };
        let out = train(&d, &c).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(out.state.history.iter().all(|r| r.loss.total.is_finite()), "seed {seed}");
        assert!(out.result.fused_soft.is_finite(), "seed {seed}");
    }
}

#[test]
fn stays_finite_over_ten_seeds() {
    no_nan_over_seeds(10);
}

#[test]
#[ignore = "full-length schedule, about seven minutes"]
fn stays_finite_over_ten_seeds_full_schedule() {
    no_nan_over_seeds(TrainConfig::default().train_epochs);
}

#[test]
fn same_seed_same_parameters() {
    let d = blobs(60, 8.0, 1);
    let c = TrainConfig {
        pretrain_epochs: 2,
        train_epochs: 3,
        batch_size: 16,
        architecture: small_arch(),
        seed: 9,
        ..TrainConfig::default()
    };
    let a = train(&d, &c).unwrap();
    let b = train(&d, &c).unwrap();
    assert_eq!(a.state.model.to_checkpoint_bytes(), b.state.model.to_checkpoint_bytes());
    assert_eq!(a.result.assignments, b.result.assignments);
}

/// Frozen from a run of this build; the sequential build must produce the
/// same bytes.
const GOLDEN_CHECKSUM: u64 = 0x58b8_8855_0ba5_7d7e;

#[test]
fn parameters_match_the_golden_checksum() {
    let (d, _) = noisy_blobs(2);
    let c = TrainConfig {
        pretrain_epochs: 3,
        train_epochs: 4,
        batch_size: 64,
        architecture: small_arch(),
        seed: 2,
        ..TrainConfig::default()
    };
    let out = train(&d, &c).unwrap();
    let sum = fnv1a(&out.state.model.to_checkpoint_bytes());
    assert_eq!(sum, GOLDEN_CHECKSUM, "checksum {sum:#018x} (parallel build: {})", rmvc::par::is_parallel());
}
