//! Synthetic ERP sessions.
//!
//! Non-target trials are spatially colored, temporally white Gaussian noise.
//! Target trials add `amplitude * pattern ⊗ bump(t - latency)` where the bump
//! is a unit-height Gaussian of the configured width. Flashes come in
//! repetitions of 12 with 2 targets at random positions.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classifier::FLASHES_PER_REPETITION;
use crate::erp_cov::{Label, Trial};
use crate::error::{Error, Result};
use crate::preprocess::{epoch_length, ContinuousRecording, Trigger};
use crate::spd::{SpdMatrix, SymmetricMatrix};

pub const TARGETS_PER_REPETITION: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub channels: usize,
    pub sample_rate: f64,
    pub window_s: f64,
    pub erp_amplitude: f64,
    pub erp_latency_ms: f64,
    /// Standard deviation of the Gaussian bump.
    pub erp_width_ms: f64,
    pub spatial_pattern: DVector<f64>,
    pub noise_covariance: SpdMatrix,
    pub repetitions: usize,
    /// Stimulus onset spacing in continuous recordings.
    pub isi_ms: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Unit-variance noise with correlation `rho^|i-j|` between channels and
    /// a smooth spatial pattern peaking at 1 in the middle channels.
    pub fn standard(channels: usize, seed: u64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidConfig("channels must be positive".into()));
        }
        Ok(SynthConfig {
            channels,
            sample_rate: 128.0,
            window_s: 1.0,
            erp_amplitude: 1.0,
            erp_latency_ms: 300.0,
            erp_width_ms: 50.0,
            spatial_pattern: default_pattern(channels),
            noise_covariance: correlated_noise(channels, 0.5)?,
            repetitions: 50,
            isi_ms: 1250.0,
            seed,
        })
    }

    pub fn samples(&self) -> Result<usize> {
        epoch_length(self.window_s, self.sample_rate)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.channels == 0 {
            return bad("channels must be positive".into());
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return bad(format!("invalid sample rate {}", self.sample_rate));
        }
        self.samples()?;
        if !self.erp_amplitude.is_finite() || !self.erp_latency_ms.is_finite() || !self.erp_width_ms.is_finite() {
            return bad("ERP parameters must be finite".into());
        }
        if !(self.erp_width_ms > 0.0) || self.erp_latency_ms < 0.0 {
            return bad("ERP width must be positive and latency non-negative".into());
        }
        if self.erp_latency_ms + self.erp_width_ms > self.window_s * 1000.0 {
            return bad(format!(
                "ERP latency {} ms + width {} ms does not fit in a {} s epoch",
                self.erp_latency_ms, self.erp_width_ms, self.window_s
            ));
        }
        if self.spatial_pattern.len() != self.channels || self.spatial_pattern.iter().any(|v| !v.is_finite()) {
            return bad(format!("spatial pattern must have {} finite entries", self.channels));
        }
        if self.noise_covariance.dim() != self.channels {
            return bad(format!("noise covariance must be {0}x{0}", self.channels));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be positive".into());
        }
        if !(self.isi_ms > 0.0) {
            return bad("isi_ms must be positive".into());
        }
        Ok(())
    }

    /// Subject whose sources are mixed by `m`: pattern `m p`, noise `m N m^T`.
    pub fn mixed(&self, m: &DMatrix<f64>) -> Result<SynthConfig> {
        if m.shape() != (self.channels, self.channels) {
            return Err(Error::dims(format!("{0}x{0} mixing", self.channels), format!("{}x{}", m.nrows(), m.ncols())));
        }
        Ok(SynthConfig {
            spatial_pattern: m * &self.spatial_pattern,
            noise_covariance: self.noise_covariance.congruence(&m.transpose())?,
            ..self.clone()
        })
    }

    /// ERP time course (unit height) sampled on the epoch grid.
    pub fn waveform(&self) -> Result<DVector<f64>> {
        let n = self.samples()?;
        let centre = self.erp_latency_ms * self.sample_rate / 1000.0;
        let width = self.erp_width_ms * self.sample_rate / 1000.0;
        Ok(DVector::from_fn(n, |t, _| (-0.5 * ((t as f64 - centre) / width).powi(2)).exp()))
    }

    fn planted(&self) -> Result<DMatrix<f64>> {
        Ok(&self.spatial_pattern * self.waveform()?.transpose() * self.erp_amplitude)
    }
}

/// Gaussian profile across channel index with unit peak.
pub fn default_pattern(channels: usize) -> DVector<f64> {
    let centre = (channels as f64 - 1.0) / 2.0;
    let spread = (channels as f64 / 3.0).max(1.0);
    DVector::from_fn(channels, |c, _| (-0.5 * ((c as f64 - centre) / spread).powi(2)).exp())
}

/// Unit diagonal, `rho^|i-j|` off the diagonal.
pub fn correlated_noise(channels: usize, rho: f64) -> Result<SpdMatrix> {
    let m = DMatrix::from_fn(channels, channels, |i, j| rho.powi((i as i32 - j as i32).abs()));
    SpdMatrix::from_symmetric(SymmetricMatrix::symmetrized(m))
}

/// `I + strength * G` with `G` standard normal, seeded. Used with
/// [`SynthConfig::mixed`] to derive a second subject from a first.
pub fn random_mixing(channels: usize, strength: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::<f64>::identity(channels, channels)
        + DMatrix::<f64>::from_fn(channels, channels, |_, _| strength * Distribution::<f64>::sample(&StandardNormal, &mut rng))
}

/// Labels of one repetition: 2 targets at random positions among 12.
fn repetition_labels(rng: &mut ChaCha8Rng) -> [Label; FLASHES_PER_REPETITION] {
    let mut labels = [Label::NonTarget; FLASHES_PER_REPETITION];
    for i in sample(rng, FLASHES_PER_REPETITION, TARGETS_PER_REPETITION) {
        labels[i] = Label::Target;
    }
    labels
}

fn colored_noise(rng: &mut ChaCha8Rng, mixing: &DMatrix<f64>, len: usize) -> DMatrix<f64> {
    let white = DMatrix::<f64>::from_fn(mixing.ncols(), len, |_, _| StandardNormal.sample(rng));
    mixing * white
}

/// `repetitions x 12` trials in presentation order; deterministic in `seed`.
pub fn generate_session(cfg: &SynthConfig) -> Result<Vec<Trial>> {
    cfg.validate()?;
    let n = cfg.samples()?;
    let planted = cfg.planted()?;
    let mixing = cfg.noise_covariance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trials = Vec::with_capacity(cfg.repetitions * FLASHES_PER_REPETITION);
    for r in 0..cfg.repetitions {
        for (k, label) in repetition_labels(&mut rng).into_iter().enumerate() {
            let mut data = colored_noise(&mut rng, &mixing, n);
            if label == Label::Target {
                data += &planted;
            }
            let id = (r * FLASHES_PER_REPETITION + k) as i64;
            trials.push(Trial::new(data, label, id, cfg.sample_rate)?);
        }
    }
    Ok(trials)
}

/// Continuous recording with one trigger every `isi_ms`, starting half a
/// second in. Targets carry the ERP at `trigger + latency`.
pub fn generate_recording(cfg: &SynthConfig) -> Result<ContinuousRecording> {
    cfg.validate()?;
    let n = cfg.samples()?;
    let isi = (cfg.isi_ms * cfg.sample_rate / 1000.0).round() as usize;
    let lead = (0.5 * cfg.sample_rate).round() as usize;
    let flashes = cfg.repetitions * FLASHES_PER_REPETITION;
    let len = lead + flashes * isi.max(1) + n + lead;
    let mixing = cfg.noise_covariance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut triggers = Vec::with_capacity(flashes);
    for r in 0..cfg.repetitions {
        for (k, label) in repetition_labels(&mut rng).into_iter().enumerate() {
            triggers.push(Trigger::new(lead + (r * FLASHES_PER_REPETITION + k) * isi, label));
        }
    }
    let mut data = colored_noise(&mut rng, &mixing, len);
    let planted = cfg.planted()?;
    for t in triggers.iter().filter(|t| t.label == Label::Target) {
        let mut window = data.columns_mut(t.index, n);
        window += &planted;
    }
    ContinuousRecording::new(data, cfg.sample_rate, triggers)
}
