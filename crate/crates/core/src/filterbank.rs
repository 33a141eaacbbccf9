//! Dilated analytic wavelet filter banks and the Gaussian averaging filter.
//!
//! All filters live in the frequency domain on the `N`-point DFT grid. Bin `k`
//! maps to the signed frequency `k/N` for `k < N/2` and `(k - N)/N` otherwise,
//! in cycles per sample. Wavelets are analytic: they vanish on the non-positive
//! half of the spectrum, including the DC and Nyquist bins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Center frequency of the highest wavelet, in cycles per sample.
pub const MAX_CENTER_FREQ: f64 = 0.4;

/// Relative frequency width of the smooth DC-suppression factor applied to each
/// wavelet. Small enough that the factor is flat (to ~1e-14) at the center.
const DC_NOTCH_WIDTH: f64 = 1.0 / 8.0;

/// Tolerance used when checking the Littlewood-Paley bound.
pub const LP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FilterBankConfig {
    /// Frame length `N` (power of two).
    pub signal_len: usize,
    /// Filters per octave, one entry per scattering order.
    pub q_factors: Vec<u32>,
    /// Number of octaves `J` spanned by every layer.
    pub num_octaves: u32,
    /// Averaging window `T` in samples (power of two, `T <= N`).
    pub averaging_scale: usize,
    /// Maximal scattering order `l`.
    pub max_order: usize,
}

impl FilterBankConfig {
    /// Default bank for frames of `signal_len` samples: `Q = [8, 1]`,
    /// `T = N/8`, `l = 2` and `J = log2(N/T) + 2`, reduced until every filter
    /// is resolvable on the DFT grid.
    pub fn default_for(signal_len: usize) -> Result<Self> {
        if !signal_len.is_power_of_two() || signal_len < 16 {
            return Err(Error::Config(format!(
                "default bank needs a power-of-two frame length >= 16, got {signal_len}"
            )));
        }
        let averaging_scale = signal_len / 8;
        let q_factors = vec![8, 1];
        let mut num_octaves = signal_len.trailing_zeros() - averaging_scale.trailing_zeros() + 2;
        while num_octaves > 1 {
            let cfg = FilterBankConfig {
                signal_len,
                q_factors: q_factors.clone(),
                num_octaves,
                averaging_scale,
                max_order: 2,
            };
            if cfg.validate().is_ok() && cfg.check_resolvable().is_ok() {
                return Ok(cfg);
            }
            num_octaves -= 1;
        }
        Ok(FilterBankConfig {
            signal_len,
            q_factors,
            num_octaves,
            averaging_scale,
            max_order: 2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.signal_len;
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "signal_len must be a power of two >= 2, got {n}"
            )));
        }
        let t = self.averaging_scale;
        if t < 2 || !t.is_power_of_two() {
            return Err(Error::Config(format!(
                "averaging_scale must be a power of two >= 2, got {t}"
            )));
        }
        if t > n {
            return Err(Error::Config(format!("averaging_scale {t} exceeds signal_len {n}")));
        }
        if self.max_order < 1 {
            return Err(Error::Config("max_order must be at least 1".into()));
        }
        if self.q_factors.len() != self.max_order {
            return Err(Error::Config(format!(
                "expected {} quality factors, got {}",
                self.max_order,
                self.q_factors.len()
            )));
        }
        if let Some(pos) = self.q_factors.iter().position(|&q| q == 0) {
            return Err(Error::Config(format!("quality factor {} is zero", pos + 1)));
        }
        if self.num_octaves < 1 {
            return Err(Error::Config("num_octaves must be at least 1".into()));
        }
        if self.num_octaves >= usize::BITS || (1usize << self.num_octaves) > n {
            return Err(Error::Config(format!(
                "2^{} octaves do not fit a frame of {n} samples",
                self.num_octaves
            )));
        }
        Ok(())
    }

    fn check_resolvable(&self) -> Result<()> {
        let bin = 1.0 / self.signal_len as f64;
        for (m, &q) in self.q_factors.iter().enumerate() {
            let lowest = center_frequency(self.num_octaves - 1, q - 1, q);
            let width = fwhm(wavelet_sigma(lowest, q));
            if width < bin {
                return Err(Error::DegenerateBank(format!(
                    "layer {} filter at {lowest:.6} cycles/sample has bandwidth {width:.3e} < one bin ({bin:.3e})",
                    m + 1
                )));
            }
        }
        Ok(())
    }

    /// Number of averaged output samples per scattering path, `2N/T`.
    pub fn output_len(&self) -> usize {
        2 * self.signal_len / self.averaging_scale
    }

    /// Decimation step applied to averaged sequences, `T/2`.
    pub fn decimation(&self) -> usize {
        self.averaging_scale / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandpassFilter {
    pub center_freq: f64,
    pub spectrum: Vec<f64>,
    pub octave_index: u32,
    pub chroma_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub config: FilterBankConfig,
    /// One list of filters per order, each sorted by descending center frequency.
    pub layers: Vec<Vec<BandpassFilter>>,
    pub lowpass_spectrum: Vec<f64>,
    /// Gain applied to each layer's wavelets to enforce the Littlewood-Paley bound.
    pub layer_gains: Vec<f64>,
}

/// `f_max * 2^-(j + chroma/Q)`.
pub fn center_frequency(octave: u32, chroma: u32, q: u32) -> f64 {
    MAX_CENTER_FREQ * (-(octave as f64 + chroma as f64 / q as f64)).exp2()
}

/// Gaussian width (in cycles per sample) of a wavelet centered at `center`.
pub fn wavelet_sigma(center: f64, q: u32) -> f64 {
    center * (1.0 / 3.0f64).min(0.6 / q as f64)
}

fn fwhm(sigma: f64) -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * sigma
}

/// Standard deviation in cycles per sample of the averaging filter whose
/// time-domain full width at half maximum is `averaging_scale` samples.
pub fn lowpass_sigma(averaging_scale: usize) -> f64 {
    let sigma_time = averaging_scale as f64 / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    1.0 / (2.0 * std::f64::consts::PI * sigma_time)
}

/// Signed frequency of DFT bin `k` on an `n`-point grid.
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

/// Unnormalized analytic wavelet response at signed frequency `freq`.
pub fn wavelet_response(freq: f64, center: f64, sigma: f64) -> f64 {
    if freq <= 0.0 {
        return 0.0;
    }
    let notch = center * DC_NOTCH_WIDTH;
    let gauss = (-(freq - center).powi(2) / (2.0 * sigma * sigma)).exp();
    let dc_suppression = -(-(freq * freq) / (2.0 * notch * notch)).exp_m1();
    gauss * dc_suppression
}

pub fn lowpass_response(freq: f64, sigma: f64) -> f64 {
    (-(freq * freq) / (2.0 * sigma * sigma)).exp()
}

pub fn build_filter_bank(config: &FilterBankConfig) -> Result<FilterBank> {
    config.validate()?;
    config.check_resolvable()?;
    let n = config.signal_len;

    let phi_sigma = lowpass_sigma(config.averaging_scale);
    let lowpass_spectrum: Vec<f64> = (0..n)
        .map(|k| lowpass_response(bin_frequency(k, n), phi_sigma))
        .collect();

    let mut layers = Vec::with_capacity(config.max_order);
    let mut layer_gains = Vec::with_capacity(config.max_order);
    for &q in &config.q_factors {
        let mut filters = Vec::with_capacity((config.num_octaves * q) as usize);
        for octave in 0..config.num_octaves {
            for chroma in 0..q {
                let center = center_frequency(octave, chroma, q);
                let sigma = wavelet_sigma(center, q);
                let spectrum = (0..n)
                    .map(|k| wavelet_response(bin_frequency(k, n), center, sigma))
                    .collect();
                filters.push(BandpassFilter {
                    center_freq: center,
                    spectrum,
                    octave_index: octave,
                    chroma_index: chroma,
                });
            }
        }
        let gain = lp_gain(&lowpass_spectrum, &filters);
        if gain < 1.0 {
            for f in &mut filters {
                f.spectrum.iter_mut().for_each(|v| *v *= gain);
            }
        }
        layers.push(filters);
        layer_gains.push(gain.min(1.0));
    }

    Ok(FilterBank {
        config: config.clone(),
        layers,
        lowpass_spectrum,
        layer_gains,
    })
}

/// Largest gain `g <= 1` such that `phi^2 + g^2 * sum(psi^2) <= 1` on every bin.
fn lp_gain(lowpass: &[f64], filters: &[BandpassFilter]) -> f64 {
    let mut worst = f64::INFINITY;
    for (k, &phi) in lowpass.iter().enumerate() {
        let band: f64 = filters.iter().map(|f| f.spectrum[k].powi(2)).sum();
        if band > 0.0 && phi * phi + band > 1.0 {
            worst = worst.min((1.0 - phi * phi).max(0.0) / band);
        }
    }
    if worst.is_finite() {
        worst.sqrt()
    } else {
        1.0
    }
}

impl FilterBank {
    /// Filters of scattering order `order` (1-based).
    pub fn layer(&self, order: usize) -> Result<&[BandpassFilter]> {
        if order == 0 || order > self.layers.len() {
            return Err(Error::Index {
                index: order,
                valid: format!("1..={}", self.layers.len()),
            });
        }
        Ok(&self.layers[order - 1])
    }

    pub fn signal_len(&self) -> usize {
        self.config.signal_len
    }
}

/// Per-bin `phi^2 + sum(psi^2)` for one layer of the bank.
pub fn littlewood_paley_profile(bank: &FilterBank, order: usize) -> Result<Vec<f64>> {
    let filters = bank.layer(order)?;
    Ok(lp_sum(&bank.lowpass_spectrum, filters))
}

fn lp_sum(lowpass: &[f64], filters: &[BandpassFilter]) -> Vec<f64> {
    lowpass
        .iter()
        .enumerate()
        .map(|(k, &phi)| phi * phi + filters.iter().map(|f| f.spectrum[k].powi(2)).sum::<f64>())
        .collect()
}
