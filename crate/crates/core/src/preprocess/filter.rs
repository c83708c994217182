//! Butterworth band-pass design as a cascade of second-order sections.
//!
//! The analog low-pass prototype of order `n` has poles on the unit circle in
//! the left half plane. The low-pass to band-pass substitution
//! `s -> (s^2 + w0^2) / (B s)` turns each prototype pole into two band-pass
//! poles, and the bilinear transform (with both edges prewarped) maps them
//! into the z-plane. The result is a `2n`-th order filter realized as `n`
//! biquads, each with one zero at `z = 1` and one at `z = -1`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
}

impl Default for FilterSpec {
    /// Order 5, 1 to 20 Hz.
    fn default() -> Self {
        FilterSpec {
            low_hz: 1.0,
            high_hz: 20.0,
            order: 5,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidConfig("filter order must be positive".into()));
        }
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid sample rate {fs}")));
        }
        if !(0.0 < self.low_hz && self.low_hz < self.high_hz && self.high_hz < fs / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "band edges must satisfy 0 < low ({}) < high ({}) < fs/2 ({})",
                self.low_hz,
                self.high_hz,
                fs / 2.0
            )));
        }
        Ok(())
    }
}

/// `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// `[a1, a2]`; `a0` is 1.
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }

    pub fn poles(&self) -> [Complex64; 2] {
        // roots of z^2 + a1 z + a2
        let disc = Complex64::new(self.a[0] * self.a[0] - 4.0 * self.a[1], 0.0).sqrt();
        [(-self.a[0] + disc) / 2.0, (-self.a[0] - disc) / 2.0]
    }
}

/// Cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub sample_rate: f64,
}

impl SosFilter {
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.sample_rate);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    /// Causal filtering with zero initial conditions (transposed direct form II).
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in out.iter_mut() {
                let x = *v;
                let y = s.b[0] * x + z1;
                z1 = s.b[1] * x - s.a[0] * y + z2;
                z2 = s.b[2] * x - s.a[1] * y;
                *v = y;
            }
        }
        out
    }
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = 2.0 * fs;
    (k + s) / (k - s)
}

/// Denominator `[a1, a2]` of `(1 - p z^-1)(1 - q z^-1)`.
fn denominator(p: Complex64, q: Complex64) -> [f64; 2] {
    [-(p + q).re, (p * q).re]
}

pub fn design_butterworth_bandpass(spec: &FilterSpec, fs: f64) -> Result<SosFilter> {
    spec.validate(fs)?;
    let n = spec.order;
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let (lo, hi) = (warp(spec.low_hz), warp(spec.high_hz));
    let bw = hi - lo;
    let w0_sq = lo * hi;

    let bandpass_pair = |p: Complex64| {
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0_sq).sqrt();
        ((pb + disc) / 2.0, (pb - disc) / 2.0)
    };

    let mut denominators = Vec::with_capacity(n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        if 2 * k + 1 == n {
            // real prototype pole at s = -1: one section from the real quadratic
            let (s1, s2) = bandpass_pair(Complex64::new(-1.0, 0.0));
            denominators.push(denominator(bilinear(s1, fs), bilinear(s2, fs)));
        } else if 2 * k + 1 < n {
            // upper half plane; its conjugate partner yields the conjugate poles
            let (s1, s2) = bandpass_pair(Complex64::from_polar(1.0, theta));
            for s in [s1, s2] {
                let z = bilinear(s, fs);
                denominators.push(denominator(z, z.conj()));
            }
        }
    }

    // unit gain at the digital image of the analog center frequency
    let center = 2.0 * (w0_sq.sqrt() / (2.0 * fs)).atan();
    let z_inv = Complex64::from_polar(1.0, -center);
    let sections = denominators
        .into_iter()
        .map(|a| {
            let unscaled = Biquad { b: [1.0, 0.0, -1.0], a };
            let g = 1.0 / unscaled.response(z_inv).norm();
            Biquad { b: [g, 0.0, -g], a }
        })
        .collect();

    Ok(SosFilter {
        sections,
        sample_rate: fs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_band_filter(fs: f64) -> SosFilter {
        design_butterworth_bandpass(&FilterSpec::default(), fs).unwrap()
    }

    #[test]
    fn five_sections_for_order_five() {
        let f = default_band_filter(512.0);
        assert_eq!(f.sections.len(), 5);
        assert_eq!(f.poles().len(), 10);
    }

    #[test]
    fn magnitude_at_band_center_and_edges() {
        let f = default_band_filter(512.0);
        let center = (1.0f64 * 20.0).sqrt();
        assert!(f.magnitude_db(center).abs() < 0.1, "{}", f.magnitude_db(center));
        for edge in [1.0, 20.0] {
            let db = f.magnitude_db(edge);
            assert!((db + 3.0).abs() <= 0.5, "{edge} Hz: {db} dB");
        }
    }

    #[test]
    fn rejection_at_dc_and_nyquist() {
        let f = default_band_filter(512.0);
        assert!(f.magnitude_db(0.0) < -60.0);
        assert!(f.magnitude_db(256.0) < -60.0);
    }

    #[test]
    fn stable_at_supported_rates() {
        for fs in [128.0, 256.0, 512.0, 1024.0] {
            let f = default_band_filter(fs);
            for p in f.poles() {
                assert!(p.norm() < 1.0, "fs {fs}: pole {p}");
            }
        }
    }

    #[test]
    fn rejects_bad_edges() {
        let bad = FilterSpec { low_hz: 1.0, high_hz: 70.0, order: 5 };
        assert!(design_butterworth_bandpass(&bad, 128.0).is_err());
        let bad = FilterSpec { low_hz: 0.0, high_hz: 20.0, order: 5 };
        assert!(design_butterworth_bandpass(&bad, 128.0).is_err());
        let bad = FilterSpec { low_hz: 20.0, high_hz: 10.0, order: 5 };
        assert!(design_butterworth_bandpass(&bad, 128.0).is_err());
        let bad = FilterSpec { low_hz: 1.0, high_hz: 20.0, order: 0 };
        assert!(design_butterworth_bandpass(&bad, 128.0).is_err());
    }

    #[test]
    fn even_orders_work() {
        let spec = FilterSpec { low_hz: 2.0, high_hz: 30.0, order: 4 };
        let f = design_butterworth_bandpass(&spec, 256.0).unwrap();
        assert_eq!(f.sections.len(), 4);
        assert!((f.magnitude_db(2.0) + 3.0).abs() < 0.5);
        assert!((f.magnitude_db(30.0) + 3.0).abs() < 0.5);
    }

    fn steady_state_amplitude(f: &SosFilter, freq: f64) -> f64 {
        let fs = f.sample_rate;
        let n = (fs * 20.0) as usize;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect();
        let y = f.apply(&x);
        y[n / 2..].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn sine_passband_and_stopband() {
        let f = default_band_filter(512.0);
        let expected_10 = f.response(10.0).norm();
        let a10 = steady_state_amplitude(&f, 10.0);
        assert!((a10 - 1.0).abs() < 0.05, "{a10}");
        assert!((a10 - expected_10).abs() < 1e-3);
        let a50 = steady_state_amplitude(&f, 50.0);
        assert!(a50 < 0.1, "{a50}");
    }

    #[test]
    fn zero_in_zero_out() {
        let f = default_band_filter(128.0);
        assert!(f.apply(&[0.0; 300]).iter().all(|&v| v == 0.0));
    }
}
