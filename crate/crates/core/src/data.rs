//! Multi-view datasets: CSV directory I/O, synthetic blobs, noise injection,
//! standardization and minibatching.
//!
//! On disk a dataset is a directory holding `view_1.csv … view_V.csv`
//! (headerless, comma separated, one sample per row), an optional
//! `labels.csv` with one integer per row, and an optional `meta.txt` with
//! `clusters=<K>` and `name=<text>` lines.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::rng::{stream_rng, stream_rng_at, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<Matrix>,
    pub labels: Option<Vec<usize>>,
    pub num_clusters: usize,
    pub name: String,
}

impl MultiViewDataset {
    pub fn new(
        views: Vec<Matrix>,
        labels: Option<Vec<usize>>,
        num_clusters: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        if views.len() < 2 {
            return Err(Error::Contract(format!(
                "a multi-view dataset needs at least 2 views, got {}",
                views.len()
            )));
        }
        let n = views[0].rows();
        for (v, m) in views.iter().enumerate() {
            if m.rows() != n {
                return Err(Error::Contract(format!(
                    "view {} has {} rows but view 1 has {n}",
                    v + 1,
                    m.rows()
                )));
            }
            if !m.is_finite() {
                return Err(Error::NonFinite(format!("view {} contains NaN/Inf", v + 1)));
            }
        }
        if num_clusters == 0 {
            return Err(Error::Contract("number of clusters must be positive".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::Contract(format!(
                    "{} labels for {n} samples",
                    labels.len()
                )));
            }
            if let Some(bad) = labels.iter().find(|&&l| l >= num_clusters) {
                return Err(Error::Contract(format!(
                    "label {bad} outside [0, {num_clusters})"
                )));
            }
        }
        Ok(Self {
            views,
            labels,
            num_clusters,
            name: name.into(),
        })
    }

    pub fn num_samples(&self) -> usize {
        self.views[0].rows()
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_csv_matrix(path: &Path) -> Result<Matrix> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(c, cell)| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        row: r + 1,
                        col: c + 1,
                        msg: format!("`{cell}` is not a finite decimal number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    col: row.len(),
                    msg: format!("expected {} columns", first.len()),
                });
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

/// Reads one non-negative integer per line.
pub fn parse_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(r, l)| {
            let cell = l.trim();
            cell.parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: r + 1,
                col: 1,
                msg: format!("`{cell}` is not a non-negative integer label"),
            })
        })
        .collect()
}

#[derive(Default)]
struct Meta {
    clusters: Option<usize>,
    name: Option<String>,
}

fn parse_meta(path: &Path) -> Result<Meta> {
    let mut meta = Meta::default();
    for (r, line) in read_text(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: r + 1,
                col: 1,
                msg: "expected key=value".into(),
            });
        };
        match key.trim() {
            "clusters" => {
                meta.clusters = Some(value.trim().parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    col: key.len() + 2,
                    msg: format!("`{}` is not a cluster count", value.trim()),
                })?)
            }
            "name" => meta.name = Some(value.trim().to_string()),
            _ => {}
        }
    }
    Ok(meta)
}

pub fn view_path(dir: &Path, view: usize) -> PathBuf {
    dir.join(format!("view_{}.csv", view + 1))
}

/// Loads a dataset directory (see the module docs for the layout).
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<MultiViewDataset> {
    let dir = dir.as_ref();
    let mut paths = Vec::new();
    while view_path(dir, paths.len()).is_file() {
        paths.push(view_path(dir, paths.len()));
    }
    if paths.len() < 2 {
        return Err(Error::Load(format!(
            "{} holds {} view file(s); need view_1.csv and view_2.csv at least",
            dir.display(),
            paths.len()
        )));
    }
    let views = paths
        .iter()
        .map(|p| parse_csv_matrix(p))
        .collect::<Result<Vec<_>>>()?;
    let n = views[0].rows();
    for (p, m) in paths.iter().zip(&views).skip(1) {
        if m.rows() != n {
            return Err(Error::Load(format!(
                "row count mismatch: {} has {n} rows, {} has {}",
                paths[0].display(),
                p.display(),
                m.rows()
            )));
        }
    }

    let labels_path = dir.join("labels.csv");
    let labels = if labels_path.is_file() {
        let labels = parse_labels(&labels_path)?;
        if labels.len() != n {
            return Err(Error::Load(format!(
                "row count mismatch: {} has {n} rows, {} has {}",
                paths[0].display(),
                labels_path.display(),
                labels.len()
            )));
        }
        Some(labels)
    } else {
        None
    };

    let meta_path = dir.join("meta.txt");
    let meta = if meta_path.is_file() {
        parse_meta(&meta_path)?
    } else {
        Meta::default()
    };
    let clusters = match (meta.clusters, &labels) {
        (Some(k), _) => k,
        (None, Some(l)) => l.iter().max().map_or(1, |m| m + 1),
        (None, None) => {
            return Err(Error::Load(format!(
                "{}: no meta.txt `clusters=` line and no labels to infer it from",
                dir.display()
            )))
        }
    };
    let name = meta.name.unwrap_or_else(|| {
        dir.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    MultiViewDataset::new(views, labels, clusters, name)
}

/// Writes `matrix` as headerless CSV. `f64` Display is shortest-round-trip,
/// so [`load_dataset`] recovers every value bit for bit.
pub fn matrix_to_csv(matrix: &Matrix) -> String {
    let mut out = String::with_capacity(matrix.rows() * matrix.cols() * 12);
    for row in matrix.row_iter() {
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(dataset: &MultiViewDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (v, m) in dataset.views.iter().enumerate() {
        crate::io::write_atomic(view_path(dir, v), matrix_to_csv(m).as_bytes())?;
    }
    if let Some(labels) = &dataset.labels {
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        crate::io::write_atomic(dir.join("labels.csv"), text.as_bytes())?;
    }
    let meta = format!("clusters={}\nname={}\n", dataset.num_clusters, dataset.name);
    crate::io::write_atomic(dir.join("meta.txt"), meta.as_bytes())
}

/// Parameters of [`synth_blobs`].
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub num_samples: usize,
    pub num_clusters: usize,
    pub num_views: usize,
    pub dims: Vec<usize>,
    pub separation: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(num_samples: usize, num_clusters: usize, num_views: usize, dim: usize, separation: f64, seed: u64) -> Self {
        Self {
            num_samples,
            num_clusters,
            num_views,
            dims: vec![dim; num_views],
            separation,
            seed,
        }
    }
}

/// Gaussian blobs: per view, cluster centers ~ separation·N(0, I) and
/// samples = center + N(0, I). Sample `i` belongs to cluster `i mod K`.
pub fn synth_blobs(spec: &SynthSpec) -> Result<MultiViewDataset> {
    if spec.num_samples == 0 || spec.num_clusters == 0 || spec.num_views == 0 {
        return Err(Error::Contract("synth_blobs counts must be positive".into()));
    }
    if spec.dims.len() != spec.num_views || spec.dims.contains(&0) {
        return Err(Error::Contract(format!(
            "synth_blobs needs {} positive view dims, got {:?}",
            spec.num_views, spec.dims
        )));
    }
    let labels: Vec<usize> = (0..spec.num_samples).map(|i| i % spec.num_clusters).collect();
    let mut rng = stream_rng(spec.seed, Stream::Synth);
    let mut views = Vec::with_capacity(spec.num_views);
    for &dim in &spec.dims {
        let centers: Vec<Vec<f64>> = (0..spec.num_clusters)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        spec.separation * z
                    })
                    .collect()
            })
            .collect();
        let mut m = Matrix::zeros(spec.num_samples, dim);
        for (i, &label) in labels.iter().enumerate() {
            for (x, &c) in m.row_mut(i).iter_mut().zip(&centers[label]) {
                let e: f64 = StandardNormal.sample(&mut rng);
                *x = c + e;
            }
        }
        views.push(m);
    }
    MultiViewDataset::new(
        views,
        Some(labels),
        spec.num_clusters,
        format!("blobs-n{}-k{}-v{}", spec.num_samples, spec.num_clusters, spec.num_views),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoiseModel {
    /// Replace whole rows with Gaussian noise matching the view's per-feature
    /// mean and standard deviation.
    #[default]
    GaussianReplace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub ratio: f64,
    pub seed: u64,
    /// Zero-based view indices; `None` means every view but the first.
    pub corrupted_views: Option<Vec<usize>>,
    /// Required to corrupt view 0, the clean anchor for rectification.
    pub allow_first_view: bool,
    pub model: NoiseModel,
}

impl NoiseSpec {
    pub fn new(ratio: f64, seed: u64) -> Self {
        Self {
            ratio,
            seed,
            corrupted_views: None,
            allow_first_view: false,
            model: NoiseModel::GaussianReplace,
        }
    }

    pub fn resolved_views(&self, num_views: usize) -> Result<Vec<usize>> {
        let views = self
            .corrupted_views
            .clone()
            .unwrap_or_else(|| (1..num_views).collect());
        for &v in &views {
            if v >= num_views {
                return Err(Error::Contract(format!(
                    "corrupted view {} does not exist (dataset has {num_views})",
                    v + 1
                )));
            }
            if v == 0 && !self.allow_first_view {
                return Err(Error::Contract(
                    "view 1 is the clean anchor; corrupting it requires allow_first_view".into(),
                ));
            }
        }
        Ok(views)
    }
}

/// Rows replaced by noise, per view.
#[derive(Clone, Debug, PartialEq)]
pub struct CorruptionMask {
    pub per_view: Vec<Vec<bool>>,
}

impl CorruptionMask {
    pub fn clean(num_views: usize, num_samples: usize) -> Self {
        Self {
            per_view: vec![vec![false; num_samples]; num_views],
        }
    }

    pub fn count(&self, view: usize) -> usize {
        self.per_view[view].iter().filter(|&&b| b).count()
    }

    /// True where any view of the sample was corrupted.
    pub fn any_view(&self) -> Vec<bool> {
        let n = self.per_view.first().map_or(0, Vec::len);
        (0..n)
            .map(|i| self.per_view.iter().any(|m| m[i]))
            .collect()
    }
}

/// Number of rows corrupted per view: `round(ratio · N)`.
pub fn corrupted_count(ratio: f64, num_samples: usize) -> usize {
    ((ratio * num_samples as f64).round() as usize).min(num_samples)
}

/// Replaces a seeded sample of `round(ratio·N)` rows in every corrupted view.
///
/// One row sample is drawn and shared by all corrupted views, so a corrupted
/// sample is noisy in every view except the clean anchor.
pub fn inject_noise(
    dataset: &MultiViewDataset,
    spec: &NoiseSpec,
) -> Result<(MultiViewDataset, CorruptionMask)> {
    if !(0.0..=1.0).contains(&spec.ratio) {
        return Err(Error::Contract(format!("noise ratio {} outside [0, 1]", spec.ratio)));
    }
    let views = spec.resolved_views(dataset.num_views())?;
    let n = dataset.num_samples();
    let count = corrupted_count(spec.ratio, n);
    let mut mask = CorruptionMask::clean(dataset.num_views(), n);
    let mut out = dataset.clone();
    if count == 0 || views.is_empty() {
        return Ok((out, mask));
    }

    let mut rng = stream_rng(spec.seed, Stream::Noise);
    let mut rows = sample(&mut rng, n, count).into_vec();
    rows.sort_unstable();

    for &v in &views {
        let (means, stds) = column_stats(&dataset.views[v]);
        let mut view_rng = stream_rng_at(spec.seed, Stream::Noise, v as u64 + 1);
        let m = &mut out.views[v];
        for &r in &rows {
            mask.per_view[v][r] = true;
            for ((x, &mu), &sd) in m.row_mut(r).iter_mut().zip(&means).zip(&stds) {
                let e: f64 = StandardNormal.sample(&mut view_rng);
                *x = mu + sd * e;
            }
        }
    }
    out.name = format!("{}+noise{}", dataset.name, spec.ratio);
    Ok((out, mask))
}

/// Per-column mean and population standard deviation.
pub fn column_stats(m: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows().max(1) as f64;
    let means: Vec<f64> = m.column_sums().into_iter().map(|s| s / n).collect();
    let mut vars = vec![0.0; m.cols()];
    for row in m.row_iter() {
        for ((acc, &x), &mu) in vars.iter_mut().zip(row).zip(&means) {
            *acc += (x - mu) * (x - mu);
        }
    }
    let stds = vars.into_iter().map(|v| (v / n).sqrt()).collect();
    (means, stds)
}

/// Columns with standard deviation below this are mapped to zero.
const MIN_STD: f64 = 1e-12;

/// Standardizes every column of every view to mean 0, population std 1.
pub fn zscore_normalize(dataset: &MultiViewDataset) -> MultiViewDataset {
    let mut out = dataset.clone();
    for m in &mut out.views {
        let (means, stds) = column_stats(m);
        let cols = m.cols();
        for r in 0..m.rows() {
            for c in 0..cols {
                let x = &mut m[(r, c)];
                *x = if stds[c] < MIN_STD {
                    0.0
                } else {
                    (*x - means[c]) / stds[c]
                };
            }
        }
    }
    out
}

/// Seeded per-epoch permutation of `0..num_samples`, chunked into batches.
/// The last batch may be short.
pub fn minibatch_iter(num_samples: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..num_samples).collect();
    let mut rng = stream_rng_at(seed, Stream::Minibatch, epoch);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
