//! Experiment specification and its flat `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! dataset = data/uci-digit
//! noise_ratio = 0.3
//! tau = 0.8
//! ablation = no_con
//! ```
//!
//! Every training and noise field has a key; [`KEYS`] lists them all.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{NoiseModel, NoiseSpec, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::Fusion;
use crate::trainer::TrainConfig;

/// The noise ratios swept when none are given.
pub const DEFAULT_RATIOS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Directory(PathBuf),
    Synthetic(SynthSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub noise: NoiseSpec,
    /// Draw noise from the run seed (`seed + r`) instead of `noise.seed`.
    pub noise_follows_run_seed: bool,
    pub train: TrainConfig,
    pub repeats: usize,
    pub out_dir: PathBuf,
    /// Standardize every feature column after noise injection.
    pub normalize: bool,
    pub ratios: Vec<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic(SynthSpec::new(300, 3, 3, 64, 8.0, 0)),
            noise: NoiseSpec::new(0.0, 0),
            noise_follows_run_seed: true,
            train: TrainConfig::default(),
            repeats: 10,
            out_dir: PathBuf::from("results"),
            normalize: true,
            ratios: DEFAULT_RATIOS.to_vec(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "dataset",
    "synth_samples",
    "synth_clusters",
    "synth_views",
    "synth_dim",
    "synth_separation",
    "synth_seed",
    "noise_ratio",
    "noise_seed",
    "corrupted_views",
    "allow_first_view",
    "noise_model",
    "ratios",
    "alpha",
    "beta",
    "tau",
    "lr",
    "pretrain_epochs",
    "epochs",
    "batch_size",
    "seed",
    "ablation",
    "hidden",
    "latent",
    "projection",
    "similarity_clamp",
    "init_heads",
    "checkpoint_every",
    "fusion",
    "repeats",
    "out",
    "normalize",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| Error::InvalidValue {
        key: key.into(),
        msg: format!("`{value}`: {e}"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidValue {
            key: key.into(),
            msg: format!("`{value}` is not a boolean"),
        }),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl ExperimentSpec {
    fn synth_mut(&mut self, key: &str) -> Result<&mut SynthSpec> {
        match &mut self.source {
            DataSource::Synthetic(s) => Ok(s),
            DataSource::Directory(_) => Err(Error::InvalidValue {
                key: key.into(),
                msg: "synthetic settings conflict with `dataset`".into(),
            }),
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let t = &mut self.train;
        match key {
            "dataset" => self.source = DataSource::Directory(PathBuf::from(value)),
            "synth_samples" => self.synth_mut(key)?.num_samples = parse(key, value)?,
            "synth_clusters" => self.synth_mut(key)?.num_clusters = parse(key, value)?,
            "synth_views" => {
                let v: usize = parse(key, value)?;
                let s = self.synth_mut(key)?;
                let d = s.dims.first().copied().unwrap_or(1);
                s.num_views = v;
                s.dims = vec![d; v];
            }
            "synth_dim" => {
                let d: usize = parse(key, value)?;
                let s = self.synth_mut(key)?;
                s.dims = vec![d; s.num_views];
            }
            "synth_separation" => self.synth_mut(key)?.separation = parse(key, value)?,
            "synth_seed" => self.synth_mut(key)?.seed = parse(key, value)?,
            "noise_ratio" => {
                let r: f64 = parse(key, value)?;
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::InvalidValue {
                        key: key.into(),
                        msg: format!("{r} is outside [0, 1]"),
                    });
                }
                self.noise.ratio = r;
            }
            "noise_seed" => {
                self.noise.seed = parse(key, value)?;
                self.noise_follows_run_seed = false;
            }
            "corrupted_views" => {
                let one_based: Vec<usize> = parse_list(key, value)?;
                if one_based.contains(&0) {
                    return Err(Error::InvalidValue {
                        key: key.into(),
                        msg: "views are numbered from 1".into(),
                    });
                }
                self.noise.corrupted_views = Some(one_based.into_iter().map(|v| v - 1).collect());
            }
            "allow_first_view" => self.noise.allow_first_view = parse_bool(key, value)?,
            "noise_model" => {
                self.noise.model = match value {
                    "gaussian_replace" => NoiseModel::GaussianReplace,
                    _ => {
                        return Err(Error::InvalidValue {
                            key: key.into(),
                            msg: format!("unknown noise model `{value}` (expected gaussian_replace)"),
                        })
                    }
                }
            }
            "ratios" => {
                let ratios: Vec<f64> = parse_list(key, value)?;
                if let Some(bad) = ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                    return Err(Error::InvalidValue {
                        key: key.into(),
                        msg: format!("{bad} is outside [0, 1]"),
                    });
                }
                self.ratios = ratios;
            }
            "alpha" => t.alpha = parse(key, value)?,
            "beta" => t.beta = parse(key, value)?,
            "tau" => t.tau = parse(key, value)?,
            "lr" | "learning_rate" => t.learning_rate = parse(key, value)?,
            "pretrain_epochs" => t.pretrain_epochs = parse(key, value)?,
            "epochs" | "train_epochs" => t.train_epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "ablation" => t.ablation = value.parse()?,
            "hidden" => t.architecture.hidden = parse(key, value)?,
            "latent" => t.architecture.latent = parse(key, value)?,
            "projection" => t.architecture.projection = parse(key, value)?,
            "similarity_clamp" => t.similarity_clamp = parse(key, value)?,
            "init_heads" => t.init_heads = parse_bool(key, value)?,
            "checkpoint_every" => t.checkpoint_every = parse(key, value)?,
            "fusion" => {
                t.fusion = match value {
                    "mean" => Fusion::Mean,
                    "clean_weighted" => Fusion::CleanWeighted,
                    _ => {
                        return Err(Error::InvalidValue {
                            key: key.into(),
                            msg: format!("unknown fusion `{value}` (expected mean or clean_weighted)"),
                        })
                    }
                }
            }
            "repeats" => self.repeats = parse(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "normalize" => self.normalize = parse_bool(key, value)?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies every setting in a config file's text.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (row, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: row + 1,
                    col: 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidValue {
                key: "repeats".into(),
                msg: "must be at least 1".into(),
            });
        }
        self.train.validate()
    }
}
