//! Repeated runs, noise sweeps and ablations with CSV / markdown output.
//!
//! Layout of an output directory written by [`run`]:
//!
//! ```text
//! runs.csv          one row per repeat
//! summary.csv       mean and sample standard deviation over repeats
//! table.md          the summary as a markdown table
//! seed<s>/          per-repeat artifacts: train.log, assignments.csv,
//!                   embeddings_view<v>.csv, phi_view<v>.csv, model.bin and
//!                   periodic checkpoint_epoch<e>.bin files
//! ```
//!
//! [`sweep`] and [`ablate`] nest one such directory per noise ratio or
//! variant and add top-level `runs.csv`, `summary.csv` and `table.md`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{DataSource, ExperimentSpec};
use crate::data::{inject_noise, load_dataset, matrix_to_csv, synth_blobs, zscore_normalize, CorruptionMask, MultiViewDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricsReport};
use crate::io::write_atomic;
use crate::noise_gmm::diagnostics_csv;
use crate::par;
use crate::trainer::{train, Ablation, TrainOutcome};

/// A noisy, optionally standardized dataset plus the rows that were hit.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub dataset: MultiViewDataset,
    pub mask: CorruptionMask,
}

pub fn load_source(source: &DataSource) -> Result<MultiViewDataset> {
    match source {
        DataSource::Directory(dir) => load_dataset(dir),
        DataSource::Synthetic(s) => synth_blobs(s),
    }
}

/// Injects noise at `ratio` and standardizes, for one run seed.
pub fn prepare(clean: &MultiViewDataset, spec: &ExperimentSpec, ratio: f64, run_seed: u64) -> Result<PreparedData> {
    let mut noise = spec.noise.clone();
    noise.ratio = ratio;
    if spec.noise_follows_run_seed {
        noise.seed = run_seed;
    }
    let (noisy, mask) = inject_noise(clean, &noise)?;
    let dataset = if spec.normalize { zscore_normalize(&noisy) } else { noisy };
    Ok(PreparedData { dataset, mask })
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub report: MetricsReport,
    pub outcome: TrainOutcome,
    pub data: PreparedData,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_run_files(dir: &Path, art: &RunArtifacts) -> Result<()> {
    let state = &art.outcome.state;
    write_atomic(dir.join("train.log"), state.train_log().as_bytes())?;
    let assignments: String = art
        .outcome
        .result
        .assignments
        .iter()
        .map(|a| format!("{a}\n"))
        .collect();
    write_atomic(dir.join("assignments.csv"), assignments.as_bytes())?;
    for (v, view) in state.model.views.iter().enumerate() {
        let z = view.project(&view.encode(&art.data.dataset.views[v])?)?.z;
        write_atomic(dir.join(format!("embeddings_view{}.csv", v + 1)), matrix_to_csv(&z).as_bytes())?;
        let mask = Some(art.data.mask.per_view[v].as_slice());
        let text = match &state.identification[v] {
            Some(id) => diagnostics_csv(&id.scores, &id.phi, mask),
            None => {
                let nan = vec![f64::NAN; state.phi[v].len()];
                diagnostics_csv(&nan, &state.phi[v], mask)
            }
        };
        write_atomic(dir.join(format!("phi_view{}.csv", v + 1)), text.as_bytes())?;
    }
    state.model.save_checkpoint(dir.join("model.bin"))
}

/// Trains once at `ratio` with `seed`; writes per-run files into `dir`.
pub fn run_once(
    clean: &MultiViewDataset,
    spec: &ExperimentSpec,
    ratio: f64,
    seed: u64,
    dir: Option<&Path>,
) -> Result<RunArtifacts> {
    let labels = clean
        .labels
        .as_ref()
        .ok_or_else(|| Error::Load(format!("{} has no labels; metrics need ground truth", clean.name)))?;
    let data = prepare(clean, spec, ratio, seed)?;
    let mut config = spec.train.clone();
    config.seed = seed;
    if let Some(d) = dir {
        create_dir(d)?;
        config.checkpoint_dir = Some(d.to_path_buf());
    }
    let outcome = train(&data.dataset, &config)?;
    let metrics = evaluate(&outcome.result.assignments, labels, clean.num_clusters)?;
    let art = RunArtifacts {
        report: MetricsReport {
            dataset: clean.name.clone(),
            noise_ratio: ratio,
            seed,
            ablation: config.ablation.to_string(),
            metrics,
        },
        outcome,
        data,
    };
    if let Some(d) = dir {
        write_run_files(d, &art)?;
    }
    Ok(art)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }

    /// Percent with two decimals, e.g. `93.95 ± 0.12`.
    pub fn percent(&self) -> String {
        format!("{:.2} ± {:.2}", 100.0 * self.mean, 100.0 * self.std)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub dataset: String,
    pub noise_ratio: f64,
    pub ablation: String,
    pub runs: usize,
    pub acc: MeanStd,
    pub nmi: MeanStd,
    pub pur: MeanStd,
}

impl Summary {
    pub const CSV_HEADER: &'static str = "dataset,noise_ratio,ablation,runs,acc_mean,acc_std,nmi_mean,nmi_std,pur_mean,pur_std";

    pub fn from_reports(reports: &[MetricsReport]) -> Option<Self> {
        let first = reports.first()?;
        let pick = |f: fn(&MetricsReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            dataset: first.dataset.clone(),
            noise_ratio: first.noise_ratio,
            ablation: first.ablation.clone(),
            runs: reports.len(),
            acc: pick(|r| r.metrics.acc),
            nmi: pick(|r| r.metrics.nmi),
            pur: pick(|r| r.metrics.pur),
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.noise_ratio,
            self.ablation,
            self.runs,
            self.acc.mean,
            self.acc.std,
            self.nmi.mean,
            self.nmi.std,
            self.pur.mean,
            self.pur.std
        )
    }
}

/// A failed repeat: noise ratio, seed and the error message.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub noise_ratio: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub reports: Vec<MetricsReport>,
    pub summary: Option<Summary>,
    pub failures: Vec<Failure>,
}

fn runs_csv(reports: &[MetricsReport]) -> String {
    let mut s = format!("{}\n", MetricsReport::CSV_HEADER);
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn summary_csv<'a>(summaries: impl Iterator<Item = &'a Summary>) -> String {
    let mut s = format!("{}\n", Summary::CSV_HEADER);
    for sm in summaries {
        s.push_str(&sm.csv_row());
        s.push('\n');
    }
    s
}

fn markdown_table(first_column: &str, rows: &[(String, Option<&Summary>)]) -> String {
    let mut s = format!("| {first_column} | ACC | NMI | PUR |\n|---|---|---|---|\n");
    for (label, summary) in rows {
        match summary {
            Some(sm) => s.push_str(&format!(
                "| {label} | {} | {} | {} |\n",
                sm.acc.percent(),
                sm.nmi.percent(),
                sm.pur.percent()
            )),
            None => s.push_str(&format!("| {label} | failed | failed | failed |\n")),
        }
    }
    s
}

fn execute_repeats(clean: &MultiViewDataset, spec: &ExperimentSpec, ratio: f64, dir: &Path) -> BatchOutcome {
    let base = spec.train.seed;
    let results = par::map_range(spec.repeats, |r| {
        let seed = base.wrapping_add(r as u64);
        let run_dir = dir.join(format!("seed{seed}"));
        (seed, run_once(clean, spec, ratio, seed, Some(&run_dir)).map(|a| a.report))
    });
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (seed, res) in results {
        match res {
            Ok(r) => reports.push(r),
            Err(e) => failures.push(Failure {
                noise_ratio: ratio,
                seed,
                message: e.to_string(),
            }),
        }
    }
    let summary = Summary::from_reports(&reports);
    BatchOutcome {
        reports,
        summary,
        failures,
    }
}

fn write_batch(dir: &Path, outcome: &BatchOutcome, first_column: &str, label: String) -> Result<()> {
    write_atomic(dir.join("runs.csv"), runs_csv(&outcome.reports).as_bytes())?;
    write_atomic(dir.join("summary.csv"), summary_csv(outcome.summary.iter()).as_bytes())?;
    let table = markdown_table(first_column, &[(label, outcome.summary.as_ref())]);
    write_atomic(dir.join("table.md"), table.as_bytes())
}

fn ratio_label(r: f64) -> String {
    format!("{}%", (r * 100.0 * 100.0).round() / 100.0)
}

/// Repeats one configuration with seeds `seed, seed + 1, …`.
pub fn run(spec: &ExperimentSpec) -> Result<BatchOutcome> {
    spec.validate()?;
    let clean = load_source(&spec.source)?;
    create_dir(&spec.out_dir)?;
    let outcome = execute_repeats(&clean, spec, spec.noise.ratio, &spec.out_dir);
    write_batch(&spec.out_dir, &outcome, "noise ratio", ratio_label(spec.noise.ratio))?;
    Ok(outcome)
}

fn write_collection(
    out: &Path,
    first_column: &str,
    batches: &[(String, BatchOutcome)],
) -> Result<()> {
    let reports: Vec<MetricsReport> = batches.iter().flat_map(|(_, b)| b.reports.clone()).collect();
    write_atomic(out.join("runs.csv"), runs_csv(&reports).as_bytes())?;
    write_atomic(
        out.join("summary.csv"),
        summary_csv(batches.iter().filter_map(|(_, b)| b.summary.as_ref())).as_bytes(),
    )?;
    let rows: Vec<(String, Option<&Summary>)> = batches
        .iter()
        .map(|(label, b)| (label.clone(), b.summary.as_ref()))
        .collect();
    write_atomic(out.join("table.md"), markdown_table(first_column, &rows).as_bytes())
}

/// One [`run`] per noise ratio, in the given order.
pub fn sweep(spec: &ExperimentSpec) -> Result<Vec<(f64, BatchOutcome)>> {
    spec.validate()?;
    if let Some(bad) = spec.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InvalidValue {
            key: "ratios".into(),
            msg: format!("{bad} is outside [0, 1]"),
        });
    }
    let clean = load_source(&spec.source)?;
    create_dir(&spec.out_dir)?;
    let mut batches = Vec::new();
    for &ratio in &spec.ratios {
        let dir = spec.out_dir.join(format!("ratio_{ratio}"));
        create_dir(&dir)?;
        let outcome = execute_repeats(&clean, spec, ratio, &dir);
        write_batch(&dir, &outcome, "noise ratio", ratio_label(ratio))?;
        batches.push((ratio_label(ratio), outcome));
    }
    write_collection(&spec.out_dir, "noise ratio", &batches)?;
    Ok(spec.ratios.iter().copied().zip(batches.into_iter().map(|(_, b)| b)).collect())
}

/// Runs all four ablation variants under identical seeds.
pub fn ablate(spec: &ExperimentSpec) -> Result<Vec<(Ablation, BatchOutcome)>> {
    spec.validate()?;
    let clean = load_source(&spec.source)?;
    create_dir(&spec.out_dir)?;
    let mut batches = Vec::new();
    for ablation in Ablation::ALL {
        let mut variant = spec.clone();
        variant.train.ablation = ablation;
        let dir: PathBuf = spec.out_dir.join(ablation.as_str());
        create_dir(&dir)?;
        let outcome = execute_repeats(&clean, &variant, spec.noise.ratio, &dir);
        write_batch(&dir, &outcome, "variant", ablation.to_string())?;
        batches.push((ablation.to_string(), outcome));
    }
    write_collection(&spec.out_dir, "variant", &batches)?;
    Ok(Ablation::ALL.into_iter().zip(batches.into_iter().map(|(_, b)| b)).collect())
}
