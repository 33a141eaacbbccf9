//! Commands that talk to (or are) the HTTP service.

use std::path::Path;
use std::time::{Duration, Instant};

use wst_client::Client;
use wst_core::storage::{load_model, read_frame, LoadedManifest};
use wst_core::timing::{Stopwatch, TimingReport};
use wst_core::workflow::{StreamOptions, StreamReport};
use wst_server::AppState;

use crate::{print_decision, CliError, CliResult};

pub fn runtime() -> CliResult<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().map_err(|e| CliError::new("E_RUNTIME", e.to_string()))
}

pub fn serve(listen: &str, model: Option<&Path>) -> CliResult<()> {
    let state = AppState::new();
    if let Some(path) = model {
        state.install(load_model(path)?)?;
    }
    runtime()?.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| CliError::new("E_IO", format!("cannot listen on {listen}: {e}")))?;
        let addr = listener
            .local_addr()
            .map_err(|e| CliError::new("E_IO", e.to_string()))?;
        println!("listening on http://{addr}");
        wst_server::serve(listener, state)
            .await
            .map_err(|e| CliError::new("E_IO", e.to_string()))
    })
}

/// Reads the frame locally and sends it to the service's active model.
pub fn classify(url: &str, frame: &Path) -> CliResult<()> {
    let mut watch = Stopwatch::start();
    let frame = read_frame(frame)?;
    let acquire = watch.lap();
    let resp = runtime()?.block_on(Client::new(url).classify_frame(&frame))?;
    let mut timing = resp.timing;
    timing.acquire = acquire;
    timing.total = watch.elapsed();
    print_decision(&resp.decision, &timing);
    Ok(())
}

/// Paced replay against the service. `acquire` is the local file read and
/// `total` the full round trip; the other stages are as measured remotely.
pub fn stream(url: &str, loaded: &LoadedManifest, opts: StreamOptions) -> CliResult<StreamReport> {
    if !(opts.rate_hz.is_finite() && opts.rate_hz > 0.0) {
        return Err(CliError::new(
            "E_CONFIG",
            format!("rate must be > 0 Hz, got {}", opts.rate_hz),
        ));
    }
    let entries = &loaded.manifest.entries;
    let iterations = match opts.duration_s {
        Some(d) if d.is_finite() && d >= 0.0 => (d * opts.rate_hz).floor() as usize,
        Some(d) => return Err(CliError::new("E_CONFIG", format!("duration must be >= 0 s, got {d}"))),
        None => entries.len(),
    };
    if iterations > 0 && entries.is_empty() {
        return Err(CliError::new("E_TOO_FEW_SAMPLES", "manifest has no frames to replay"));
    }
    let client = Client::new(url);
    let period = Duration::from_secs_f64(1.0 / opts.rate_hz);
    runtime()?.block_on(async {
        let mut timing = TimingReport::default();
        let mut correct = 0;
        let start = Instant::now();
        for i in 0..iterations {
            if opts.pace {
                tokio::time::sleep_until((start + period * i as u32).into()).await;
            }
            let entry = &entries[i % entries.len()];
            let mut watch = Stopwatch::start();
            let frame = read_frame(loaded.frame_path(entry))?;
            let acquire = watch.lap();
            let resp = client.classify_frame(&frame).await?;
            let mut t = resp.timing;
            t.acquire = acquire;
            t.total = watch.elapsed();
            if resp.decision.class_name == entry.class_name {
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
    })
}
