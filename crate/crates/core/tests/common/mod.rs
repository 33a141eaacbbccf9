//! Brute-force reference implementations used as test oracles. Nothing here
//! calls into the crate's numeric code: filters are re-evaluated from their
//! closed forms, time-domain kernels come from a direct O(N²) inverse DFT and
//! every convolution is an O(N²) circular sum.

#![allow(dead_code)]

use std::f64::consts::{LN_2, PI};

#[derive(Clone, Copy, Debug)]
pub struct C {
    pub re: f64,
    pub im: f64,
}

impl C {
    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
}

pub struct OracleBank {
    pub n: usize,
    pub t: usize,
    /// Per layer: (center frequency, spectrum) in descending center order.
    pub layers: Vec<Vec<(f64, Vec<f64>)>>,
    pub lowpass: Vec<f64>,
}

fn signed_freq(k: usize, n: usize) -> f64 {
    let f = k as f64 / n as f64;
    if k >= n / 2 {
        f - 1.0
    } else {
        f
    }
}

pub fn oracle_wavelet(freq: f64, center: f64, q: u32) -> f64 {
    if freq <= 0.0 {
        return 0.0;
    }
    let sigma = center
        * if q <= 1 {
            1.0 / 3.0
        } else {
            (0.6 / q as f64).min(1.0 / 3.0)
        };
    let notch = center / 8.0;
    let bell = (-0.5 * ((freq - center) / sigma).powi(2)).exp();
    bell * (1.0 - (-0.5 * (freq / notch).powi(2)).exp())
}

pub fn oracle_lowpass(freq: f64, t: usize) -> f64 {
    let sigma_t = t as f64 / (2.0 * (2.0 * LN_2).sqrt());
    let sigma_f = 1.0 / (2.0 * PI * sigma_t);
    (-0.5 * (freq / sigma_f).powi(2)).exp()
}

pub fn oracle_bank(n: usize, qs: &[u32], octaves: u32, t: usize) -> OracleBank {
    let lowpass: Vec<f64> = (0..n).map(|k| oracle_lowpass(signed_freq(k, n), t)).collect();
    let mut layers = Vec::new();
    for &q in qs {
        let mut filters = Vec::new();
        for idx in 0..octaves * q {
            let center = 0.4 * 2f64.powf(-(idx as f64) / q as f64);
            let spec: Vec<f64> = (0..n).map(|k| oracle_wavelet(signed_freq(k, n), center, q)).collect();
            filters.push((center, spec));
        }
        // Enforce phi² + g² Σψ² ≤ 1 bin by bin with the largest admissible g ≤ 1.
        let mut g2 = 1.0f64;
        for k in 0..n {
            let s: f64 = filters.iter().map(|(_, sp)| sp[k] * sp[k]).sum();
            let p2 = lowpass[k] * lowpass[k];
            if s > 0.0 && p2 + s > 1.0 {
                g2 = g2.min((1.0 - p2).max(0.0) / s);
            }
        }
        let g = g2.sqrt();
        if g < 1.0 {
            for (_, sp) in &mut filters {
                for v in sp.iter_mut() {
                    *v *= g;
                }
            }
        }
        layers.push(filters);
    }
    OracleBank { n, t, layers, lowpass }
}

/// Direct inverse DFT of a real spectrum.
pub fn kernel(spectrum: &[f64]) -> Vec<C> {
    let n = spectrum.len();
    (0..n)
        .map(|t| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (k, &h) in spectrum.iter().enumerate() {
                let a = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += h * a.cos();
                im += h * a.sin();
            }
            C {
                re: re / n as f64,
                im: im / n as f64,
            }
        })
        .collect()
}

/// Circular convolution of a real sequence with a complex kernel.
pub fn circ_conv(x: &[f64], h: &[C]) -> Vec<C> {
    let n = x.len();
    (0..n)
        .map(|t| {
            let mut re = 0.0;
            let mut im = 0.0;
            for s in 0..n {
                let k = h[(t + n - s) % n];
                re += x[s] * k.re;
                im += x[s] * k.im;
            }
            C { re, im }
        })
        .collect()
}

pub fn modulus_conv(x: &[f64], h: &[C]) -> Vec<f64> {
    circ_conv(x, h).into_iter().map(C::abs).collect()
}

pub fn average(x: &[f64], phi: &[C], t: usize) -> Vec<f64> {
    circ_conv(x, phi).into_iter().step_by(t / 2).map(|c| c.re).collect()
}

/// Full scattering cascade with frequency-decreasing paths, rows in
/// order-major, lexicographic-descending path order.
pub fn brute_force_scatter(x: &[f64], bank: &OracleBank) -> Vec<Vec<f64>> {
    let phi = kernel(&bank.lowpass);
    let psi: Vec<Vec<(f64, Vec<C>)>> = bank
        .layers
        .iter()
        .map(|layer| layer.iter().map(|(c, s)| (*c, kernel(s))).collect())
        .collect();

    let mut rows = vec![average(x, &phi, bank.t)];
    // (last lambda, U signal) of the previous order, in path order.
    let mut frontier: Vec<(f64, Vec<f64>)> = vec![(f64::INFINITY, x.to_vec())];
    for layer in &psi {
        let mut next = Vec::new();
        for (parent_lambda, u) in &frontier {
            for (lambda, h) in layer {
                if lambda < parent_lambda {
                    let child = modulus_conv(u, h);
                    rows.push(average(&child, &phi, bank.t));
                    next.push((*lambda, child));
                }
            }
        }
        frontier = next;
    }
    rows
}

/// Deterministic xorshift stream for test signals.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn signal(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform(-1.0, 1.0)).collect()
    }

    /// Sum of random sinusoids with frequencies inside `[lo, hi]`.
    pub fn band_limited(&mut self, n: usize, lo: f64, hi: f64, tones: usize) -> Vec<f64> {
        let params: Vec<(f64, f64, f64)> = (0..tones)
            .map(|_| {
                (
                    self.uniform(lo, hi),
                    self.uniform(0.0, 2.0 * PI),
                    self.uniform(0.2, 1.0),
                )
            })
            .collect();
        (0..n)
            .map(|t| {
                params
                    .iter()
                    .map(|(f, p, a)| a * (2.0 * PI * f * t as f64 + p).cos())
                    .sum()
            })
            .collect()
    }
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
