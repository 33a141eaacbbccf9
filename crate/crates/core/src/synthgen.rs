//! Labeled synthetic multi-channel frames standing in for the two radar units.
//!
//! Each material is a damped resonance with a per-channel phase progression.
//! Placement randomness is modeled by a per-frame onset delay and per-channel
//! gains; measurement noise is white and Gaussian.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::reduction::LabeledDataset;
use crate::scattering::{ScatteringTransform, SignalFrame};

/// Upper end of the band in which resonances are placed, cycles per sample.
pub const RESONANCE_BAND: f64 = 0.4;
/// Amplitude scale of the low-reflection "Air" class relative to the
/// reference amplitude of 1.
pub const AIR_SCALE: f64 = 0.05;

const MATERIAL_NAMES: [&str; 11] = [
    "River-Pebbles",
    "Gravel-Pebbles",
    "Sugar",
    "Salt",
    "Flour",
    "Broad-Beans",
    "Chickpeas",
    "Top-Soil",
    "Oats",
    "White-Rice",
    "Brown-Rice",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadarProfile {
    pub name: String,
    pub channels: usize,
    pub samples: usize,
}

impl RadarProfile {
    /// 40 Tx/Rx pair signals of 8192 samples.
    pub fn cm40() -> Self {
        RadarProfile {
            name: "cm40".into(),
            channels: 40,
            samples: 8192,
        }
    }

    /// 400 Tx/Rx pair signals; 1024 samples per signal.
    pub fn mm400() -> Self {
        RadarProfile {
            name: "mm400".into(),
            channels: 400,
            samples: 1024,
        }
    }

    /// Built-in profile by name. `cm40-1024` style names keep the channel
    /// count of the base profile and override the frame length.
    pub fn builtin(name: &str) -> Result<Self> {
        let (base, samples) = match name.split_once('-') {
            Some((b, s)) => {
                let s: usize = s
                    .parse()
                    .map_err(|_| Error::Config(format!("bad sample count in profile {name:?}")))?;
                (b, Some(s))
            }
            None => (name, None),
        };
        let mut profile = match base {
            "cm40" => Self::cm40(),
            "mm400" => Self::mm400(),
            _ => return Err(Error::Config(format!("unknown radar profile {name:?}"))),
        };
        if let Some(s) = samples {
            profile = profile.with_samples(s);
        }
        Ok(profile)
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.name = format!("{}-{samples}", self.name.split('-').next().unwrap_or(&self.name));
        self.samples = samples;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels < 1 || self.samples < 2 {
            return Err(Error::Config(format!(
                "profile {} needs >= 1 channel and >= 2 samples",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSignature {
    pub class_name: String,
    pub resonant_freqs: Vec<f64>,
    pub resonant_amps: Vec<f64>,
    /// Exponential envelope rate per sample.
    pub decay: f64,
    /// Phase advance per channel index, radians.
    pub spectral_tilt: f64,
}

impl MaterialSignature {
    pub fn validate(&self) -> Result<()> {
        if self.resonant_freqs.is_empty() || self.resonant_freqs.len() != self.resonant_amps.len() {
            return Err(Error::Config(format!(
                "signature {:?} needs equal-length, non-empty frequency and amplitude lists",
                self.class_name
            )));
        }
        if self.resonant_freqs.iter().any(|&f| !(f > 0.0 && f < 0.5)) {
            return Err(Error::Config(format!(
                "signature {:?} has a frequency outside (0, 0.5)",
                self.class_name
            )));
        }
        if self.resonant_amps.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Config(format!(
                "signature {:?} has a non-positive amplitude",
                self.class_name
            )));
        }
        if !(self.decay > 0.0) || !self.spectral_tilt.is_finite() {
            return Err(Error::Config(format!(
                "signature {:?} needs a positive decay and finite tilt",
                self.class_name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Onset delay drawn uniformly from `[0, max_delay]` samples.
    pub max_delay: f64,
    /// Channel gains drawn uniformly from `[1 - gain_spread, 1 + gain_spread]`.
    pub gain_spread: f64,
}

impl Jitter {
    pub const NONE: Jitter = Jitter {
        max_delay: 0.0,
        gain_spread: 0.0,
    };

    /// Delay up to `T/4` and ±20 % gain.
    pub fn for_averaging_scale(averaging_scale: usize) -> Self {
        Jitter {
            max_delay: averaging_scale as f64 / 4.0,
            gain_spread: 0.2,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.max_delay >= 0.0) || !(0.0..1.0).contains(&self.gain_spread) {
            return Err(Error::Config(format!("invalid jitter {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub profile: RadarProfile,
    pub signatures: Vec<MaterialSignature>,
    pub samples_per_class: usize,
    pub noise_std: f64,
    pub jitter: Jitter,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.jitter.validate()?;
        if self.signatures.len() < 2 {
            return Err(Error::Config("need at least two signatures".into()));
        }
        for s in &self.signatures {
            s.validate()?;
        }
        let mut names: Vec<&str> = self.signatures.iter().map(|s| s.class_name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("signature class names must be unique".into()));
        }
        if self.samples_per_class < 2 {
            return Err(Error::Config(format!(
                "samples_per_class must be >= 2, got {}",
                self.samples_per_class
            )));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::Config(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        self.signatures.iter().map(|s| s.class_name.clone()).collect()
    }
}

/// Name of class `k` out of `c`: class 0 is "Air", then the material list.
pub fn class_name(k: usize) -> String {
    match k {
        0 => "Air".to_string(),
        k if k <= MATERIAL_NAMES.len() => MATERIAL_NAMES[k - 1].to_string(),
        k => format!("Material-{k}"),
    }
}

/// Draws `c` single-resonance signatures whose frequencies are pairwise at
/// least `separation * 0.4 / c` apart inside `(0, 0.4)`.
pub fn default_signatures(c: usize, seed: u64, separation: f64) -> Result<Vec<MaterialSignature>> {
    if c < 2 {
        return Err(Error::Config(format!("need at least two classes, got {c}")));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::InfeasibleSeparation { classes: c, separation });
    }
    let gap = separation * RESONANCE_BAND / c as f64;
    let slack = RESONANCE_BAND - (c - 1) as f64 * gap;
    if !(slack > 0.0) {
        return Err(Error::InfeasibleSeparation { classes: c, separation });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // With slack s, the unused room is split into c+1 random pieces so the
    // ladder sits strictly inside the band.
    let mut pieces: Vec<f64> = (0..=c).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = pieces.iter().sum();
    pieces.iter_mut().for_each(|p| *p *= slack / total);
    let mut freqs = Vec::with_capacity(c);
    let mut f = 0.0;
    for piece in pieces.iter().take(c) {
        f += piece;
        freqs.push(f);
        f += gap;
    }
    let mut order: Vec<usize> = (0..c).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);

    Ok((0..c)
        .map(|k| {
            let amp = rng.random_range(0.6..1.0);
            let decay = rng.random_range(0.002..0.01);
            let tilt = rng.random_range(-PI..PI);
            MaterialSignature {
                class_name: class_name(k),
                resonant_freqs: vec![freqs[order[k]]],
                resonant_amps: vec![if k == 0 { amp * AIR_SCALE } else { amp }],
                decay,
                spectral_tilt: tilt,
            }
        })
        .collect())
}

/// Noise-free damped resonance sum for one channel, onset at `delay` samples.
pub fn resonance(sig: &MaterialSignature, channel: usize, samples: usize, delay: f64, gain: f64) -> Vec<f64> {
    let phase = sig.spectral_tilt * channel as f64;
    (0..samples)
        .map(|t| {
            let dt = t as f64 - delay;
            if dt < 0.0 {
                return 0.0;
            }
            let envelope = (-sig.decay * dt).exp();
            sig.resonant_freqs
                .iter()
                .zip(&sig.resonant_amps)
                .map(|(&f, &a)| a * gain * (2.0 * PI * f * dt + phase).cos() * envelope)
                .sum()
        })
        .collect()
}

pub fn generate_frame(
    sig: &MaterialSignature,
    profile: &RadarProfile,
    noise_std: f64,
    jitter: Jitter,
    rng: &mut ChaCha8Rng,
) -> Result<SignalFrame> {
    let delay = if jitter.max_delay > 0.0 {
        rng.random_range(0.0..=jitter.max_delay)
    } else {
        0.0
    };
    let gains: Vec<f64> = (0..profile.channels)
        .map(|_| {
            if jitter.gain_spread > 0.0 {
                rng.random_range(1.0 - jitter.gain_spread..=1.0 + jitter.gain_spread)
            } else {
                1.0
            }
        })
        .collect();
    let noise = if noise_std > 0.0 {
        Some(Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let mut data = Vec::with_capacity(profile.channels * profile.samples);
    for (ch, &gain) in gains.iter().enumerate() {
        let mut row = resonance(sig, ch, profile.samples, delay, gain);
        if let Some(dist) = &noise {
            row.iter_mut().for_each(|v| *v += dist.sample(rng));
        }
        data.extend(row);
    }
    SignalFrame::new(profile.channels, profile.samples, profile.name.clone(), data)
}

/// RNG for sample `index` of a dataset generated with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub label: usize,
    pub frame: SignalFrame,
}

/// `samples_per_class` frames per class, class-major. Each frame draws from
/// its own stream so generation order does not affect the output.
pub fn generate_frames(cfg: &SynthConfig, seed: u64) -> Result<Vec<LabeledFrame>> {
    cfg.validate()?;
    let spc = cfg.samples_per_class;
    (0..cfg.signatures.len() * spc)
        .into_par_iter()
        .map(|index| {
            let label = index / spc;
            let mut rng = sample_rng(seed, index as u64);
            let frame = generate_frame(
                &cfg.signatures[label],
                &cfg.profile,
                cfg.noise_std,
                cfg.jitter,
                &mut rng,
            )?;
            Ok(LabeledFrame { label, frame })
        })
        .collect()
}

/// Scattering features for each frame, one row per frame.
pub fn featurize(frames: &[LabeledFrame], transform: &ScatteringTransform) -> Result<DMatrix<f64>> {
    let d = frames.first().map_or(0, |f| transform.feature_len(f.frame.channels));
    let mut features = DMatrix::<f64>::zeros(frames.len(), d);
    for (i, lf) in frames.iter().enumerate() {
        let row = transform.scatter_frame(&lf.frame)?;
        if row.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "frame {i} produced {} features, expected {d}",
                row.len()
            )));
        }
        for (j, v) in row.into_iter().enumerate() {
            features[(i, j)] = v;
        }
    }
    Ok(features)
}

pub fn generate_dataset(
    cfg: &SynthConfig,
    transform: &ScatteringTransform,
    seed: u64,
) -> Result<(LabeledDataset, Vec<LabeledFrame>)> {
    let n = transform.bank().signal_len();
    if cfg.profile.samples > n {
        return Err(Error::Config(format!(
            "profile {} has {} samples but the bank holds {n}",
            cfg.profile.name, cfg.profile.samples
        )));
    }
    let frames = generate_frames(cfg, seed)?;
    let features = featurize(&frames, transform)?;
    let labels = frames.iter().map(|f| f.label).collect();
    let ds = LabeledDataset::new(features, labels, cfg.class_names())?;
    Ok((ds, frames))
}

/// Hash of the features, labels and class names of a dataset.
pub fn dataset_digest(ds: &LabeledDataset) -> String {
    let mut h = Sha256::new();
    h.update((ds.num_samples() as u64).to_le_bytes());
    h.update((ds.num_features() as u64).to_le_bytes());
    for v in ds.features().iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    for &l in ds.labels() {
        h.update((l as u64).to_le_bytes());
    }
    for name in ds.class_names() {
        h.update(name.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_gap(sigs: &[MaterialSignature]) -> f64 {
        let mut fs: Vec<f64> = sigs.iter().flat_map(|s| s.resonant_freqs.clone()).collect();
        fs.sort_by(f64::total_cmp);
        fs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn two_classes_are_spaced() {
        let sigs = default_signatures(2, 1, 1.0).unwrap();
        assert_eq!(sigs.len(), 2);
        assert!(min_gap(&sigs) >= 0.2 - 1e-12);
        assert_eq!(sigs[0].class_name, "Air");
    }

    #[test]
    fn signatures_are_deterministic() {
        assert_eq!(
            default_signatures(5, 42, 0.8).unwrap(),
            default_signatures(5, 42, 0.8).unwrap()
        );
        assert_ne!(
            default_signatures(5, 42, 0.8).unwrap(),
            default_signatures(5, 43, 0.8).unwrap()
        );
    }

    #[test]
    fn infeasible_separation() {
        assert!(matches!(
            default_signatures(4, 0, 2.0),
            Err(Error::InfeasibleSeparation { .. })
        ));
        assert!(matches!(default_signatures(1, 0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn noiseless_frame_is_closed_form() {
        let sig = MaterialSignature {
            class_name: "x".into(),
            resonant_freqs: vec![0.1],
            resonant_amps: vec![0.7],
            decay: 0.01,
            spectral_tilt: 0.3,
        };
        let profile = RadarProfile {
            name: "t".into(),
            channels: 3,
            samples: 64,
        };
        let mut rng = sample_rng(1, 0);
        let frame = generate_frame(&sig, &profile, 0.0, Jitter::NONE, &mut rng).unwrap();
        for ch in 0..3 {
            for (t, &v) in frame.channel(ch).iter().enumerate() {
                let t = t as f64;
                let expected = 0.7 * (2.0 * PI * 0.1 * t + 0.3 * ch as f64).cos() * (-0.01 * t).exp();
                assert!((v - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn air_frames_are_weak() {
        let sigs = default_signatures(12, 7, 1.0).unwrap();
        let profile = RadarProfile::cm40().with_samples(256);
        let mut rng = sample_rng(7, 3);
        let frame = generate_frame(&sigs[0], &profile, 0.0, Jitter::NONE, &mut rng).unwrap();
        let max = frame.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max <= AIR_SCALE * 1.0);
    }

    #[test]
    fn profiles() {
        assert_eq!(RadarProfile::builtin("cm40").unwrap(), RadarProfile::cm40());
        let p = RadarProfile::builtin("mm400").unwrap();
        assert_eq!((p.channels, p.samples), (400, 1024));
        let s = RadarProfile::builtin("cm40-1024").unwrap();
        assert_eq!((s.name.as_str(), s.channels, s.samples), ("cm40-1024", 40, 1024));
        assert!(RadarProfile::builtin("xband").is_err());
    }

    #[test]
    fn frames_are_reproducible_per_index() {
        let sigs = default_signatures(3, 5, 1.0).unwrap();
        let cfg = SynthConfig {
            profile: RadarProfile {
                name: "t".into(),
                channels: 2,
                samples: 64,
            },
            signatures: sigs,
            samples_per_class: 3,
            noise_std: 0.1,
            jitter: Jitter::for_averaging_scale(16),
        };
        let a = generate_frames(&cfg, 9).unwrap();
        let b = generate_frames(&cfg, 9).unwrap();
        assert_eq!(a, b);
        let mut rng = sample_rng(9, 4);
        let single = generate_frame(&cfg.signatures[1], &cfg.profile, 0.1, cfg.jitter, &mut rng).unwrap();
        assert_eq!(a[4].frame, single);
        assert_eq!(a.iter().filter(|f| f.label == 2).count(), 3);
    }

    #[test]
    fn config_validation() {
        let sigs = default_signatures(2, 5, 1.0).unwrap();
        let mut cfg = SynthConfig {
            profile: RadarProfile::mm400(),
            signatures: sigs.clone(),
            samples_per_class: 1,
            noise_std: 0.0,
            jitter: Jitter::NONE,
        };
        assert!(cfg.validate().is_err());
        cfg.samples_per_class = 2;
        cfg.validate().unwrap();
        cfg.signatures[1].class_name = sigs[0].class_name.clone();
        assert!(cfg.validate().is_err());
    }
}
