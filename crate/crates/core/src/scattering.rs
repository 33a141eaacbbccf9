//! Time scattering transform: wavelet convolution, complex modulus and
//! Gaussian averaging iterated up to the bank's maximal order.
//!
//! Convolutions are circular and computed in the frequency domain. Averaged
//! sequences are sampled every `T/2` samples by periodizing the averaged
//! spectrum onto a `2N/T`-point grid, which equals exact decimation of the
//! full-resolution output.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;

/// One multi-channel acquisition, stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFrame {
    pub channels: usize,
    pub samples: usize,
    pub profile_id: String,
    data: Vec<f64>,
}

impl SignalFrame {
    pub fn new(channels: usize, samples: usize, profile_id: impl Into<String>, data: Vec<f64>) -> Result<Self> {
        if channels < 1 {
            return Err(Error::InvalidFrame("frame needs at least one channel".into()));
        }
        if samples < 2 {
            return Err(Error::InvalidFrame(format!(
                "frame needs at least two samples, got {samples}"
            )));
        }
        if data.len() != channels * samples {
            return Err(Error::LengthMismatch {
                expected: channels * samples,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidFrame(format!(
                "non-finite sample at channel {}, index {}",
                pos / samples,
                pos % samples
            )));
        }
        Ok(SignalFrame {
            channels,
            samples,
            profile_id: profile_id.into(),
            data,
        })
    }

    pub fn from_channels(profile_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let samples = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != samples) {
            return Err(Error::LengthMismatch {
                expected: samples,
                actual: bad.len(),
            });
        }
        Self::new(rows.len(), samples, profile_id, rows.concat())
    }

    pub fn zeros(channels: usize, samples: usize, profile_id: impl Into<String>) -> Result<Self> {
        Self::new(channels, samples, profile_id, vec![0.0; channels * samples])
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.data[index * self.samples..(index + 1) * self.samples]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Center frequencies `(λ1, ..., λm)` of one scattering path; empty for order zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringPath {
    pub lambdas: Vec<f64>,
}

impl ScatteringPath {
    pub fn order(&self) -> usize {
        self.lambdas.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringFeatures {
    pub paths: Vec<ScatteringPath>,
    /// One averaged, decimated sequence per path.
    pub coefficients: Vec<Vec<f64>>,
    pub frame_channels: usize,
}

impl ScatteringFeatures {
    pub fn flatten(&self) -> Vec<f64> {
        self.coefficients.concat()
    }
}

#[derive(Debug, Clone)]
struct PathNode {
    /// Index into the bank layer of the last wavelet in the path.
    filter: usize,
    /// Index of the parent path, `None` for order-1 paths.
    parent: Option<usize>,
}

/// Paths with frequency-decreasing wavelet indices, order by order.
fn path_tree(bank: &FilterBank) -> Vec<Vec<PathNode>> {
    let mut orders: Vec<Vec<PathNode>> = Vec::with_capacity(bank.layers.len());
    let mut last_lambda: Vec<f64> = Vec::new();
    for (m, layer) in bank.layers.iter().enumerate() {
        let mut nodes = Vec::new();
        let mut lambdas = Vec::new();
        if m == 0 {
            for (i, f) in layer.iter().enumerate() {
                nodes.push(PathNode {
                    filter: i,
                    parent: None,
                });
                lambdas.push(f.center_freq);
            }
        } else {
            for (p, &parent_lambda) in last_lambda.iter().enumerate() {
                for (i, f) in layer.iter().enumerate() {
                    if f.center_freq < parent_lambda {
                        nodes.push(PathNode {
                            filter: i,
                            parent: Some(p),
                        });
                        lambdas.push(f.center_freq);
                    }
                }
            }
        }
        orders.push(nodes);
        last_lambda = lambdas;
    }
    orders
}

/// Deterministic path list: the empty path, then order-1 paths by descending
/// `λ1`, then frequency-decreasing order-2 paths in lexicographic descending
/// order, and so on up to the maximal order.
pub fn enumerate_paths(bank: &FilterBank) -> Vec<ScatteringPath> {
    let tree = path_tree(bank);
    let mut out = vec![ScatteringPath { lambdas: vec![] }];
    let mut previous: Vec<Vec<f64>> = Vec::new();
    for (m, nodes) in tree.iter().enumerate() {
        let current: Vec<Vec<f64>> = nodes
            .iter()
            .map(|node| {
                let mut lambdas = node.parent.map_or_else(Vec::new, |p| previous[p].clone());
                lambdas.push(bank.layers[m][node.filter].center_freq);
                lambdas
            })
            .collect();
        out.extend(current.iter().map(|l| ScatteringPath { lambdas: l.clone() }));
        previous = current;
    }
    out
}

/// Planned transform for one filter bank. Cheap to share across threads.
#[derive(Clone)]
pub struct ScatteringTransform {
    bank: Arc<FilterBank>,
    tree: Arc<Vec<Vec<PathNode>>>,
    paths: Arc<Vec<ScatteringPath>>,
    /// Per layer and filter, the half-open range of bins where the filter is non-zero.
    supports: Arc<Vec<Vec<(usize, usize)>>>,
    /// Non-zero lowpass bins as `(bin, folded bin, gain)`.
    lowpass_taps: Arc<Vec<(usize, usize, f64)>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    ifft_out: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ScatteringTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScatteringTransform")
            .field("config", &self.bank.config)
            .field("paths", &self.paths.len())
            .finish()
    }
}

/// Reusable buffers for one thread's worth of transforms.
struct Workspace {
    buf: Vec<Complex64>,
    folded: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

fn support(spectrum: &[f64]) -> (usize, usize) {
    match spectrum.iter().position(|&v| v != 0.0) {
        Some(lo) => {
            let hi = spectrum.iter().rposition(|&v| v != 0.0).map_or(lo, |i| i + 1);
            (lo, hi)
        }
        None => (0, 0),
    }
}

impl ScatteringTransform {
    pub fn new(bank: FilterBank) -> Self {
        let n = bank.signal_len();
        let out_len = bank.config.output_len();
        let mut planner = FftPlanner::new();
        let tree = path_tree(&bank);
        let paths = enumerate_paths(&bank);
        let supports = bank
            .layers
            .iter()
            .map(|layer| layer.iter().map(|f| support(&f.spectrum)).collect())
            .collect();
        let lowpass_taps = bank
            .lowpass_spectrum
            .iter()
            .enumerate()
            .filter(|(_, &h)| h != 0.0)
            .map(|(k, &h)| (k, k % out_len, h))
            .collect();
        ScatteringTransform {
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
            ifft_out: planner.plan_fft_inverse(out_len),
            tree: Arc::new(tree),
            paths: Arc::new(paths),
            supports: Arc::new(supports),
            lowpass_taps: Arc::new(lowpass_taps),
            bank: Arc::new(bank),
        }
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn paths(&self) -> &[ScatteringPath] {
        &self.paths
    }

    /// Feature count produced per channel.
    pub fn channel_feature_len(&self) -> usize {
        self.paths.len() * self.bank.config.output_len()
    }

    pub fn feature_len(&self, channels: usize) -> usize {
        channels * self.channel_feature_len()
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        let n = self.bank.signal_len();
        if x.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn workspace(&self) -> Workspace {
        let n = self.bank.signal_len();
        let scratch_len = [&self.fft, &self.ifft, &self.ifft_out]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Workspace {
            buf: vec![Complex64::new(0.0, 0.0); n],
            folded: vec![Complex64::new(0.0, 0.0); self.bank.config.output_len()],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    fn forward(&self, x: &[f64], ws: &mut Workspace) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.process_with_scratch(&mut out, &mut ws.scratch);
        out
    }

    /// Spectra of two real sequences from a single complex transform.
    fn forward_pair(&self, a: &[f64], b: &[f64], ws: &mut Workspace) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = a.len();
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&re, &im)| Complex64::new(re, im)).collect();
        self.fft.process_with_scratch(&mut z, &mut ws.scratch);
        let mut fa = Vec::with_capacity(n);
        let mut fb = Vec::with_capacity(n);
        for k in 0..n {
            let zk = z[k];
            let zc = z[(n - k) % n].conj();
            fa.push((zk + zc) * 0.5);
            let d = zk - zc;
            fb.push(Complex64::new(d.im * 0.5, -d.re * 0.5));
        }
        (fa, fb)
    }

    /// `|IFFT(spectrum * filter)|` for filter `index` of `layer` (0-based).
    fn modulus(&self, spectrum: &[Complex64], layer: usize, index: usize, ws: &mut Workspace) -> Vec<f64> {
        let n = spectrum.len();
        let filter = &self.bank.layers[layer][index].spectrum;
        let (lo, hi) = self.supports[layer][index];
        ws.buf.fill(Complex64::new(0.0, 0.0));
        for k in lo..hi {
            ws.buf[k] = spectrum[k] * filter[k];
        }
        self.ifft.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        let scale = 1.0 / n as f64;
        ws.buf
            .iter()
            .map(|c| (c.re * c.re + c.im * c.im).sqrt() * scale)
            .collect()
    }

    /// Lowpass-filtered sequence sampled every `T/2` samples.
    fn average(&self, spectrum: &[Complex64], ws: &mut Workspace) -> Vec<f64> {
        let n = spectrum.len();
        ws.folded.fill(Complex64::new(0.0, 0.0));
        for &(k, slot, h) in self.lowpass_taps.iter() {
            ws.folded[slot] += spectrum[k] * h;
        }
        self.ifft_out.process_with_scratch(&mut ws.folded, &mut ws.scratch);
        let scale = 1.0 / n as f64;
        ws.folded.iter().map(|c| c.re * scale).collect()
    }

    /// `|x ⋆ ψ_λ|` for every wavelet of scattering order `order` (1-based).
    pub fn scalogram(&self, x: &[f64], order: usize) -> Result<Vec<Vec<f64>>> {
        self.check_len(x)?;
        let filters = self.bank.layer(order)?;
        let mut ws = self.workspace();
        let spectrum = self.forward(x, &mut ws);
        Ok((0..filters.len())
            .map(|i| self.modulus(&spectrum, order - 1, i, &mut ws))
            .collect())
    }

    pub fn scatter(&self, x: &[f64]) -> Result<ScatteringFeatures> {
        self.check_len(x)?;
        let coefficients = self.scatter_rows(x);
        Ok(ScatteringFeatures {
            paths: self.paths.as_ref().clone(),
            coefficients,
            frame_channels: 1,
        })
    }

    fn scatter_rows(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let max_order = self.tree.len();
        let mut ws = self.workspace();
        let mut rows = Vec::with_capacity(self.paths.len());
        let input = self.forward(x, &mut ws);
        rows.push(self.average(&input, &mut ws));

        let mut parents: Vec<Vec<Complex64>> = vec![input];
        for (m, nodes) in self.tree.iter().enumerate() {
            let keep = m + 1 < max_order;
            let mut next = Vec::with_capacity(if keep { nodes.len() } else { 0 });
            for pair in nodes.chunks(2) {
                let u: Vec<Vec<f64>> = pair
                    .iter()
                    .map(|node| self.modulus(&parents[node.parent.unwrap_or(0)], m, node.filter, &mut ws))
                    .collect();
                let spectra = match u.as_slice() {
                    [a, b] => {
                        let (fa, fb) = self.forward_pair(a, b, &mut ws);
                        vec![fa, fb]
                    }
                    [a] => vec![self.forward(a, &mut ws)],
                    _ => unreachable!(),
                };
                for u_hat in spectra {
                    rows.push(self.average(&u_hat, &mut ws));
                    if keep {
                        next.push(u_hat);
                    }
                }
            }
            parents = next;
        }
        rows
    }

    /// Scatters each channel independently (zero-padding to `N`) and
    /// concatenates the flattened per-channel blocks in channel order.
    pub fn scatter_frame(&self, frame: &SignalFrame) -> Result<Vec<f64>> {
        let n = self.bank.signal_len();
        if frame.samples > n {
            return Err(Error::FrameTooLong {
                samples: frame.samples,
                max: n,
            });
        }
        let blocks: Vec<Vec<f64>> = (0..frame.channels)
            .into_par_iter()
            .map(|c| {
                let mut x = frame.channel(c).to_vec();
                x.resize(n, 0.0);
                self.scatter_rows(&x).concat()
            })
            .collect();
        Ok(blocks.concat())
    }
}

/// `|x ⋆ ψ_λ|` for every wavelet of `order`. Plans a transform per call;
/// prefer [`ScatteringTransform`] for repeated use.
pub fn scalogram(x: &[f64], bank: &FilterBank, order: usize) -> Result<Vec<Vec<f64>>> {
    ScatteringTransform::new(bank.clone()).scalogram(x, order)
}

pub fn scatter(x: &[f64], bank: &FilterBank) -> Result<ScatteringFeatures> {
    ScatteringTransform::new(bank.clone()).scatter(x)
}

pub fn scatter_frame(frame: &SignalFrame, bank: &FilterBank) -> Result<Vec<f64>> {
    ScatteringTransform::new(bank.clone()).scatter_frame(frame)
}

/// Elementwise `log(1 + x/eps)` on every coefficient of order one or higher.
/// Order-zero blocks (the first `out_len` values of each channel block) are
/// left untouched since they may be negative.
pub fn log_compress(features: &mut [f64], channel_len: usize, out_len: usize, eps: f64) {
    for block in features.chunks_mut(channel_len) {
        for v in &mut block[out_len..] {
            *v = (*v / eps).ln_1p();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::{build_filter_bank, FilterBankConfig};

    fn bank(n: usize, q: &[u32], j: u32, t: usize) -> FilterBank {
        build_filter_bank(&FilterBankConfig {
            signal_len: n,
            q_factors: q.to_vec(),
            num_octaves: j,
            averaging_scale: t,
            max_order: q.len(),
        })
        .unwrap()
    }

    #[test]
    fn zero_signal_scalogram_is_zero() {
        let b = bank(64, &[1], 3, 16);
        let s = scalogram(&[0.0; 64], &b, 1).unwrap();
        assert!(s.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_signal_is_killed_by_wavelets() {
        let b = bank(64, &[2], 3, 16);
        let c = 3.5;
        let s = scalogram(&[c; 64], &b, 1).unwrap();
        for row in s {
            assert!(row.iter().all(|&v| v <= c * 1e-6));
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let b = bank(64, &[1], 3, 16);
        assert!(matches!(
            scatter(&[0.0; 32], &b),
            Err(Error::LengthMismatch {
                expected: 64,
                actual: 32
            })
        ));
        assert!(matches!(
            scalogram(&[0.0; 65], &b, 1),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn path_counts_order_one() {
        let b = bank(64, &[1], 4, 16);
        assert_eq!(enumerate_paths(&b).len(), 5);
    }

    #[test]
    fn order_two_paths_strictly_decrease() {
        let b = bank(64, &[1, 1], 3, 16);
        let paths = enumerate_paths(&b);
        let second: Vec<_> = paths.iter().filter(|p| p.order() == 2).collect();
        let pairs: Vec<(f64, f64)> = second.iter().map(|p| (p.lambdas[0], p.lambdas[1])).collect();
        assert_eq!(pairs, vec![(0.4, 0.2), (0.4, 0.1), (0.2, 0.1)]);
        assert_eq!(paths.len(), 1 + 3 + 3);
    }

    #[test]
    fn frame_longer_than_bank_is_rejected() {
        let b = bank(64, &[1], 3, 16);
        let f = SignalFrame::zeros(2, 65, "t").unwrap();
        assert!(matches!(
            scatter_frame(&f, &b),
            Err(Error::FrameTooLong { samples: 65, max: 64 })
        ));
    }

    #[test]
    fn short_frames_are_zero_padded() {
        let b = bank(64, &[1, 1], 3, 16);
        let data: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let frame = SignalFrame::new(1, 40, "t", data.clone()).unwrap();
        let mut padded = data;
        padded.resize(64, 0.0);
        assert_eq!(
            scatter_frame(&frame, &b).unwrap(),
            scatter(&padded, &b).unwrap().flatten()
        );
    }

    #[test]
    fn frame_validation() {
        assert!(SignalFrame::new(0, 4, "t", vec![]).is_err());
        assert!(SignalFrame::new(1, 1, "t", vec![0.0]).is_err());
        assert!(SignalFrame::new(1, 2, "t", vec![0.0, f64::NAN]).is_err());
        assert!(SignalFrame::new(1, 2, "t", vec![0.0]).is_err());
    }

    #[test]
    fn log_compress_skips_order_zero() {
        let mut v = vec![-1.0, -2.0, 1.0, 3.0, -1.0, -2.0, 1.0, 3.0];
        log_compress(&mut v, 4, 2, 1.0);
        assert_eq!(v[0], -1.0);
        assert_eq!(v[2], 2f64.ln());
        assert_eq!(v[4], -1.0);
        assert_eq!(v[7], 4f64.ln());
    }
}
