//! `wst`: generate synthetic radar datasets, train and evaluate the
//! scattering → SR → LDA pipeline, classify frames, replay streams and
//! benchmark the transform. Train/evaluate/classify/stream run in-process
//! unless `--server URL` points them at a running `wst serve`.

mod remote;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wst_core::config::RunConfig;
use wst_core::storage::{digest_warning, load_manifest, load_model, save_model};
use wst_core::synthgen::RadarProfile;
use wst_core::timing::STAGES;
use wst_core::workflow::{self, StreamOptions};

#[derive(Debug, Parser)]
#[command(name = "wst", version, about = "Scattering-feature radar material classifier")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command; each overrides the matching config key.
#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Primary output: dataset directory, model file, report or timing log.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Stream replay rate in Hz.
    #[arg(long, global = true, default_value_t = 20.0)]
    rate: f64,
    /// Radar profile: cm40, mm400, or NAME-SAMPLES such as cm40-1024.
    #[arg(long, global = true)]
    profile: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset (frame files + manifest.json).
    Generate {
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        samples_per_class: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Fit the pipeline on every frame of a manifest and save the model.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_name = "URL")]
        server: Option<String>,
    },
    /// Stratified k-fold cross-validation; prints the confusion matrix and
    /// writes the JSON report.
    Evaluate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_name = "URL")]
        server: Option<String>,
    },
    /// Classify one frame file.
    Classify {
        frame: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_name = "URL")]
        server: Option<String>,
    },
    /// Replay manifest frames at `--rate` and report per-stage latency.
    Stream {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Seconds to run; default replays the manifest once.
        #[arg(long)]
        duration: Option<f64>,
        /// Run flat out instead of sleeping to the target rate.
        #[arg(long)]
        no_pace: bool,
        #[arg(long, value_name = "URL")]
        server: Option<String>,
    },
    /// Time scatter_frame per profile (cm40 and mm400 unless --profile).
    Bench {
        #[arg(long, default_value_t = 30)]
        reps: usize,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Model to load at startup.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

/// Error with a stable code, printed as one `CODE: message` line.
#[derive(Debug)]
pub struct CliError {
    code: String,
    message: String,
}

impl CliError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        CliError {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "{}: {one_line}", self.code)
    }
}

impl From<wst_core::Error> for CliError {
    fn from(e: wst_core::Error) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<wst_client::ClientError> for CliError {
    fn from(e: wst_client::ClientError) -> Self {
        let message = match &e {
            wst_client::ClientError::Api { message, .. } => message.clone(),
            other => other.to_string(),
        };
        CliError::new(e.code(), message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::new("E_USAGE", first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(k) = common.k {
        cfg.k = k;
    }
    if let Some(profile) = &common.profile {
        cfg.profile = profile.clone();
    }
    Ok(cfg)
}

fn manifest_path(flag: Option<PathBuf>, cfg: &RunConfig) -> CliResult<PathBuf> {
    flag.or_else(|| cfg.paths.manifest.clone())
        .ok_or_else(|| CliError::new("E_CONFIG", "no manifest given (use --manifest or paths.manifest)"))
}

fn model_path(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.paths.model.clone())
        .unwrap_or_else(|| PathBuf::from("model.json"))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::new("E_SCHEMA", e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| wst_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let common = cli.common;
    match cli.command {
        Command::Generate {
            classes,
            samples_per_class,
            noise,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(c) = classes {
                cfg.synth.classes = c;
            }
            if let Some(s) = samples_per_class {
                cfg.synth.samples_per_class = s;
            }
            if let Some(n) = noise {
                cfg.synth.noise_std = n;
            }
            let out = common
                .out
                .clone()
                .or_else(|| cfg.paths.out.clone())
                .unwrap_or_else(|| PathBuf::from("data"));
            let summary = workflow::generate(&cfg, &out)?;
            let width = summary.class_names.iter().map(|n| n.len()).max().unwrap_or(0);
            for (name, count) in summary.class_names.iter().zip(&summary.class_counts) {
                println!("{name:<width$} {count:>6}");
            }
            println!("{} frames -> {}", summary.frames, summary.manifest.display());
            println!("manifest digest {}", summary.manifest_digest);
        }
        Command::Train { manifest, server } => {
            let cfg = load_config(&common)?;
            let manifest = manifest_path(manifest, &cfg)?;
            if let Some(url) = server {
                let summary = remote::runtime()?.block_on(wst_client::Client::new(url).train(&manifest, &cfg))?;
                print!("{}", summary.render());
                return Ok(());
            }
            let (model, summary) = workflow::train(&cfg, &manifest)?;
            let out = model_path(common.out, &cfg);
            save_model(&model, &out)?;
            print!("{}", summary.render());
            println!("model written to {}", out.display());
        }
        Command::Evaluate { manifest, server } => {
            let cfg = load_config(&common)?;
            let manifest = manifest_path(manifest, &cfg)?;
            let report = match server {
                Some(url) => remote::runtime()?.block_on(wst_client::Client::new(url).evaluate(&manifest, &cfg))?,
                None => workflow::evaluate(&cfg, &manifest)?,
            };
            print!("{}", report.render());
            let out = common.out.unwrap_or_else(|| PathBuf::from("report.json"));
            write_json(&out, &report)?;
            println!("report written to {}", out.display());
        }
        Command::Classify { frame, model, server } => {
            if let Some(url) = server {
                return remote::classify(&url, &frame);
            }
            let cfg = load_config(&common)?;
            let model = load_model(model_path(model, &cfg))?;
            if let Some(filter) = &cfg.filter_bank {
                if let Some(w) = digest_warning(&model, filter) {
                    eprintln!("warning: {w}");
                }
            }
            let transform = workflow::transform_for(&model.filter_config)?;
            let (decision, timing) = workflow::classify_path(&model, &transform, &frame)?;
            print_decision(&decision, &timing);
        }
        Command::Stream {
            manifest,
            model,
            duration,
            no_pace,
            server,
        } => {
            let cfg = load_config(&common)?;
            let loaded = load_manifest(manifest_path(manifest, &cfg)?)?;
            let opts = StreamOptions {
                rate_hz: common.rate,
                duration_s: duration,
                pace: !no_pace,
            };
            let report = match server {
                Some(url) => remote::stream(&url, &loaded, opts)?,
                None => {
                    let model = load_model(model_path(model, &cfg))?;
                    let transform = workflow::transform_for(&model.filter_config)?;
                    workflow::stream(&model, &transform, &loaded, opts)?
                }
            };
            print!("{}", report.render());
            if let Some(out) = &common.out {
                write_json(out, &report)?;
                println!("per-iteration timings written to {}", out.display());
            }
        }
        Command::Bench { reps } => {
            let seed = load_config(&common)?.seed;
            let profiles = match &common.profile {
                Some(name) => vec![RadarProfile::builtin(name)?],
                None => vec![RadarProfile::cm40(), RadarProfile::mm400()],
            };
            let report = workflow::bench(&profiles, reps, seed)?;
            print!("{}", report.render());
            if let Some(out) = &common.out {
                write_json(out, &report)?;
            }
        }
        Command::Serve { listen, model } => remote::serve(&listen, model.as_deref())?,
    }
    Ok(())
}

pub fn print_decision(decision: &wst_core::pipeline::Decision, timing: &wst_core::timing::FrameTiming) {
    println!("class {} {}", decision.class_index, decision.class_name);
    let posteriors: Vec<String> = decision.posteriors.iter().map(|p| format!("{p:.4}")).collect();
    println!("posteriors {}", posteriors.join(" "));
    let stages: Vec<String> = STAGES
        .iter()
        .map(|s| format!("{s}={:.3}", timing.stage(s).unwrap_or(0.0)))
        .collect();
    println!("timing ms {}", stages.join(" "));
}
