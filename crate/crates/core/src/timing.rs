//! Per-stage latency records and summary statistics.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub const STAGES: [&str; 6] = ["acquire", "wst", "normalize", "project", "classify", "total"];

/// Wall-clock stage durations of one processed frame, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTiming {
    pub acquire: f64,
    pub wst: f64,
    pub normalize: f64,
    pub project: f64,
    pub classify: f64,
    pub total: f64,
}

impl FrameTiming {
    pub fn stage(&self, name: &str) -> Option<f64> {
        Some(match name {
            "acquire" => self.acquire,
            "wst" => self.wst,
            "normalize" => self.normalize,
            "project" => self.project,
            "classify" => self.classify,
            "total" => self.total,
            _ => return None,
        })
    }

    pub fn max_stage(&self) -> f64 {
        [self.acquire, self.wst, self.normalize, self.project, self.classify]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Monotonic lap timer.
#[derive(Debug)]
pub struct Stopwatch {
    start: Instant,
    lap: Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        let now = Instant::now();
        Stopwatch { start: now, lap: now }
    }

    /// Milliseconds since the previous lap (or start).
    pub fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let ms = millis(now - self.lap);
        self.lap = now;
        ms
    }

    pub fn elapsed(&self) -> f64 {
        millis(self.start.elapsed())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub iterations: Vec<FrameTiming>,
}

impl TimingReport {
    pub fn push(&mut self, t: FrameTiming) {
        self.iterations.push(t);
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn stage_values(&self, stage: &str) -> Vec<f64> {
        self.iterations.iter().filter_map(|t| t.stage(stage)).collect()
    }

    pub fn summary(&self, stage: &str) -> Option<StageSummary> {
        let values = self.stage_values(stage);
        Some(StageSummary {
            median: percentile(&values, 50.0)?,
            p5: percentile(&values, 5.0)?,
            p95: percentile(&values, 95.0)?,
        })
    }

    /// Iterations whose total latency exceeded `period_ms`.
    pub fn overruns(&self, period_ms: f64) -> usize {
        self.iterations.iter().filter(|t| t.total > period_ms).count()
    }
}

/// Linearly interpolated percentile (`q` in `[0, 100]`); `None` when empty.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    percentile(values, 50.0)
}
