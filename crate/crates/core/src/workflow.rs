//! End-to-end operations shared by the command line and the HTTP service:
//! dataset generation, training, cross-validated evaluation, paced stream
//! replay and scattering microbenchmarks.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::filterbank::{build_filter_bank, FilterBankConfig};
use crate::pipeline::{
    confusion_stats, cross_validate, fit_pipeline, ConfusionMatrix, Decision, FeatureLayout, PipelineModel,
    PipelineParams,
};
use crate::reduction::LabeledDataset;
use crate::scattering::{ScatteringTransform, SignalFrame};
use crate::storage::{self, load_manifest, LoadedManifest, Manifest, ManifestEntry, MANIFEST_SCHEMA};
use crate::synthgen::{default_signatures, generate_frame, generate_frames, sample_rng, RadarProfile};
use crate::timing::{percentile, FrameTiming, Stopwatch, TimingReport, STAGES};

pub const REPORT_SCHEMA: u32 = 1;

pub fn transform_for(filter: &FilterBankConfig) -> Result<ScatteringTransform> {
    Ok(ScatteringTransform::new(build_filter_bank(filter)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub manifest: PathBuf,
    pub frames: usize,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    /// SHA-256 of the manifest document.
    pub manifest_digest: String,
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}

/// Writes the synthetic dataset described by `cfg` under `out_dir`: one frame
/// file per sample plus `manifest.json` with paths relative to `out_dir`.
pub fn generate(cfg: &RunConfig, out_dir: &Path) -> Result<GenerateSummary> {
    cfg.validate()?;
    let synth = cfg.synth_config()?;
    let frames = generate_frames(&synth, cfg.seed)?;
    let class_names = synth.class_names();

    let frame_dir = out_dir.join("frames");
    std::fs::create_dir_all(&frame_dir).map_err(|e| Error::io(&frame_dir, e))?;
    let mut entries = Vec::with_capacity(frames.len());
    let mut class_counts = vec![0; class_names.len()];
    for (i, lf) in frames.iter().enumerate() {
        let rel = format!("frames/{:02}-{}-{i:06}.wstf", lf.label, slug(&class_names[lf.label]));
        storage::write_frame(&lf.frame, out_dir.join(&rel))?;
        class_counts[lf.label] += 1;
        entries.push(ManifestEntry {
            path: rel,
            class_name: class_names[lf.label].clone(),
            split_hint: None,
        });
    }
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        class_names: class_names.clone(),
        profile: Some(synth.profile.name.clone()),
        seed: Some(cfg.seed),
        entries,
    };
    let path = out_dir.join("manifest.json");
    storage::write_manifest(&manifest, &path)?;
    let manifest_digest = hex::encode(Sha256::digest(storage::manifest_to_json(&manifest).as_bytes()));
    Ok(GenerateSummary {
        manifest: path,
        frames: frames.len(),
        class_names,
        class_counts,
        manifest_digest,
    })
}

/// Reads every frame of a manifest and computes its scattering features.
pub fn load_dataset(
    loaded: &LoadedManifest,
    transform: &ScatteringTransform,
) -> Result<(LabeledDataset, FeatureLayout)> {
    let entries = &loaded.manifest.entries;
    if entries.is_empty() {
        return Err(Error::TooFewSamples("manifest has no entries".into()));
    }
    let frames: Vec<SignalFrame> = entries
        .par_iter()
        .map(|e| storage::read_frame(loaded.frame_path(e)))
        .collect::<Result<_>>()?;
    let channels = frames[0].channels;
    if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.channels != channels) {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} channels, the first frame has {channels}",
            entries[i].path, f.channels
        )));
    }
    let layout = FeatureLayout::for_transform(transform, channels);
    let mut features = DMatrix::<f64>::zeros(frames.len(), layout.dim());
    for (i, frame) in frames.iter().enumerate() {
        let row = transform.scatter_frame(frame)?;
        for (j, v) in row.into_iter().enumerate() {
            features[(i, j)] = v;
        }
    }
    let labels = entries.iter().map(|e| loaded.manifest.label_of(e)).collect();
    let ds = LabeledDataset::new(features, labels, loaded.manifest.class_names.clone())?;
    Ok((ds, layout))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub samples: usize,
    pub input_dim: usize,
    pub projected_dim: usize,
    pub class_names: Vec<String>,
    pub model_digest: String,
    pub config_digest: String,
}

impl TrainSummary {
    pub fn for_model(model: &PipelineModel, samples: usize) -> Self {
        TrainSummary {
            samples,
            input_dim: model.input_dim(),
            projected_dim: model.projected_dim(),
            class_names: model.class_names().to_vec(),
            model_digest: model.model_digest(),
            config_digest: model.config_digest.clone(),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "trained on {} frames: {} features -> {} projected dims\nclasses: {}\nmodel digest {}\n",
            self.samples,
            self.input_dim,
            self.projected_dim,
            self.class_names.join(", "),
            self.model_digest
        )
    }
}

/// Fits the full pipeline on every frame of the manifest.
pub fn train(cfg: &RunConfig, manifest: &Path) -> Result<(PipelineModel, TrainSummary)> {
    cfg.pipeline.validate()?;
    let filter = cfg.filter_config()?;
    let transform = transform_for(&filter)?;
    let loaded = load_manifest(manifest)?;
    let (ds, layout) = load_dataset(&loaded, &transform)?;
    let model = fit_pipeline(&ds, &filter, layout, &cfg.pipeline)?;
    let summary = TrainSummary::for_model(&model, ds.num_samples());
    Ok((model, summary))
}

/// Machine-readable cross-validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema: u32,
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub percent: Vec<Vec<f64>>,
    pub diag_mean: f64,
    pub diag_std: f64,
    pub k: usize,
    pub seed: u64,
}

impl EvaluationReport {
    pub fn from_confusion(cm: &ConfusionMatrix, k: usize, seed: u64) -> Result<Self> {
        let stats = confusion_stats(cm)?;
        Ok(EvaluationReport {
            schema: REPORT_SCHEMA,
            class_names: cm.class_names.clone(),
            counts: cm.counts.clone(),
            percent: stats.percent,
            diag_mean: stats.diag_mean,
            diag_std: stats.diag_std,
            k,
            seed,
        })
    }

    /// Row-normalized confusion matrix in integer percent (true class per
    /// row, predicted class per column) followed by the diagonal summary.
    pub fn render(&self) -> String {
        let labels: Vec<String> = self
            .class_names
            .iter()
            .enumerate()
            .map(|(i, name)| format!("{i:>2} {name}"))
            .collect();
        let width = labels.iter().map(|l| l.chars().count()).chain([9]).max().unwrap_or(9);
        let mut out = String::new();
        let _ = write!(out, "{:<width$} |", "true\\pred");
        for j in 0..labels.len() {
            let _ = write!(out, " {j:>4}");
        }
        out.push('\n');
        out.push_str(&"-".repeat(width + 2 + 5 * labels.len()));
        out.push('\n');
        for (label, row) in labels.iter().zip(&self.percent) {
            let _ = write!(out, "{label:<width$} |");
            for v in row {
                let _ = write!(out, " {:>4}", v.round() as i64);
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "diag mean ± std: {:.2} ± {:.2}  ({}-fold, seed {})",
            self.diag_mean, self.diag_std, self.k, self.seed
        );
        out
    }
}

pub fn evaluate_dataset(
    ds: &LabeledDataset,
    filter: &FilterBankConfig,
    layout: FeatureLayout,
    params: &PipelineParams,
    k: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let cm = cross_validate(ds, k, seed, filter, layout, params)?;
    EvaluationReport::from_confusion(&cm, k, seed)
}

/// Stratified k-fold cross-validation over the frames of a manifest.
pub fn evaluate(cfg: &RunConfig, manifest: &Path) -> Result<EvaluationReport> {
    cfg.pipeline.validate()?;
    let filter = cfg.filter_config()?;
    let transform = transform_for(&filter)?;
    let loaded = load_manifest(manifest)?;
    let (ds, layout) = load_dataset(&loaded, &transform)?;
    evaluate_dataset(&ds, &filter, layout, &cfg.pipeline, cfg.k, cfg.seed)
}

/// Reads and classifies one frame file; `acquire` is the file load time.
pub fn classify_path(
    model: &PipelineModel,
    transform: &ScatteringTransform,
    path: &Path,
) -> Result<(Decision, FrameTiming)> {
    let mut watch = Stopwatch::start();
    let frame = storage::read_frame(path)?;
    let acquire = watch.lap();
    let (decision, mut timing) = model.classify_frame(&frame, transform)?;
    timing.acquire = acquire;
    timing.total += acquire;
    Ok((decision, timing))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamOptions {
    pub rate_hz: f64,
    /// Replay length in seconds; `None` replays the manifest once.
    pub duration_s: Option<f64>,
    /// Sleep between iterations to hold the target rate.
    pub pace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub rate_hz: f64,
    pub period_ms: f64,
    pub frames: usize,
    pub elapsed_s: f64,
    pub achieved_hz: f64,
    pub overruns: usize,
    pub correct: usize,
    pub timing: TimingReport,
}

impl StreamReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>10} {:>10} {:>10}",
            "stage", "median ms", "p5 ms", "p95 ms"
        );
        for stage in STAGES {
            match self.timing.summary(stage) {
                Some(s) => {
                    let _ = writeln!(out, "{stage:<10} {:>10.3} {:>10.3} {:>10.3}", s.median, s.p5, s.p95);
                }
                None => {
                    let _ = writeln!(out, "{stage:<10} {:>10} {:>10} {:>10}", "-", "-", "-");
                }
            }
        }
        let _ = writeln!(
            out,
            "{} frames in {:.2} s: {:.2} Hz achieved (target {:.2} Hz), {} overruns of {:.1} ms, {} correct",
            self.frames, self.elapsed_s, self.achieved_hz, self.rate_hz, self.overruns, self.period_ms, self.correct
        );
        out
    }
}

/// Replays manifest frames in order at `rate_hz`, classifying each one.
/// An iteration overruns when its total latency exceeds the period.
pub fn stream(
    model: &PipelineModel,
    transform: &ScatteringTransform,
    loaded: &LoadedManifest,
    opts: StreamOptions,
) -> Result<StreamReport> {
    if !(opts.rate_hz > 0.0) || !opts.rate_hz.is_finite() {
        return Err(Error::Config(format!("rate must be > 0 Hz, got {}", opts.rate_hz)));
    }
    model.check_transform(transform)?;
    let entries = &loaded.manifest.entries;
    let iterations = match opts.duration_s {
        Some(d) if d.is_finite() && d >= 0.0 => (d * opts.rate_hz).floor() as usize,
        Some(d) => return Err(Error::Config(format!("duration must be >= 0 s, got {d}"))),
        None => entries.len(),
    };
    if iterations > 0 && entries.is_empty() {
        return Err(Error::TooFewSamples("manifest has no frames to replay".into()));
    }
    let period = Duration::from_secs_f64(1.0 / opts.rate_hz);
    let mut timing = TimingReport::default();
    let mut correct = 0;
    let start = Instant::now();
    for i in 0..iterations {
        if opts.pace {
            let due = start + period * i as u32;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let entry = &entries[i % entries.len()];
        let (decision, t) = classify_path(model, transform, &loaded.frame_path(entry))?;
        if decision.class_name == entry.class_name {
            correct += 1;
        }
        timing.push(t);
    }
    let elapsed_s = start.elapsed().as_secs_f64();
    let period_ms = 1e3 / opts.rate_hz;
    Ok(StreamReport {
        rate_hz: opts.rate_hz,
        period_ms,
        frames: iterations,
        elapsed_s,
        achieved_hz: if elapsed_s > 0.0 {
            iterations as f64 / elapsed_s
        } else {
            0.0
        },
        overruns: timing.overruns(period_ms),
        correct,
        timing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub profile: String,
    pub channels: usize,
    pub samples: usize,
    pub features: usize,
    pub reps: usize,
    pub median_ms: f64,
    pub p5_ms: f64,
    pub p95_ms: f64,
    pub per_channel_ms: f64,
    /// Every repetition produced bit-identical features.
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, profile: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.profile == profile)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>10} {:>5} {:>11} {:>9} {:>9} {:>13}",
            "profile", "channels", "samples", "features", "reps", "median ms", "p5 ms", "p95 ms", "ms/channel"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>8} {:>10} {:>5} {:>11.3} {:>9.3} {:>9.3} {:>13.4}",
                r.profile, r.channels, r.samples, r.features, r.reps, r.median_ms, r.p5_ms, r.p95_ms, r.per_channel_ms
            );
        }
        if let [a, b, ..] = self.rows.as_slice() {
            let _ = writeln!(
                out,
                "{} frame / ({} per-channel x {}) = {:.2}",
                b.profile,
                a.profile,
                a.channels,
                b.median_ms / (a.per_channel_ms * a.channels as f64)
            );
        }
        out
    }
}

/// Times `scatter_frame` on one synthetic frame per profile, using the
/// default bank for the profile's frame length.
pub fn bench(profiles: &[RadarProfile], reps: usize, seed: u64) -> Result<BenchReport> {
    let reps = reps.max(1);
    let signature = default_signatures(2, seed, 1.0)?.remove(1);
    let mut rows = Vec::with_capacity(profiles.len());
    for profile in profiles {
        profile.validate()?;
        let filter = FilterBankConfig::default_for(profile.samples.next_power_of_two().max(16))?;
        let transform = transform_for(&filter)?;
        let jitter = crate::synthgen::Jitter::for_averaging_scale(filter.averaging_scale);
        let frame = generate_frame(&signature, profile, 0.25, jitter, &mut sample_rng(seed, 0))?;
        let reference = transform.scatter_frame(&frame)?;
        let mut times = Vec::with_capacity(reps);
        let mut deterministic = true;
        for _ in 0..reps {
            let watch = Stopwatch::start();
            let features = transform.scatter_frame(&frame)?;
            times.push(watch.elapsed());
            deterministic &= features == reference;
        }
        let median = percentile(&times, 50.0).unwrap_or(0.0);
        rows.push(BenchRow {
            profile: profile.name.clone(),
            channels: profile.channels,
            samples: profile.samples,
            features: reference.len(),
            reps,
            median_ms: median,
            p5_ms: percentile(&times, 5.0).unwrap_or(0.0),
            p95_ms: percentile(&times, 95.0).unwrap_or(0.0),
            per_channel_ms: median / profile.channels as f64,
            deterministic,
        });
    }
    Ok(BenchReport { rows })
}
