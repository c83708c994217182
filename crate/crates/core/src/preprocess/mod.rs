//! From continuous recordings and triggers to labeled epochs.
//!
//! The pipeline is band-pass filter (causal, at the acquisition rate), then
//! integer decimation, then fixed-length epochs starting at each trigger.
//! Trigger perturbation helpers shift or jitter trigger positions for
//! robustness experiments.

pub mod filter;

use log::warn;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

pub use filter::{design_butterworth_bandpass, Biquad, FilterSpec, SosFilter};

use crate::erp_cov::{Label, Trial};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trigger {
    pub index: usize,
    pub label: Label,
}

impl Trigger {
    pub fn new(index: usize, label: Label) -> Self {
        Trigger { index, label }
    }
}

/// `channels x samples` signal plus stimulus triggers.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRecording {
    data: DMatrix<f64>,
    sample_rate: f64,
    triggers: Vec<Trigger>,
}

impl ContinuousRecording {
    /// Triggers must be strictly increasing and inside the recording.
    pub fn new(data: DMatrix<f64>, sample_rate: f64, triggers: Vec<Trigger>) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::Domain(format!("invalid sample rate {sample_rate}")));
        }
        if data.nrows() == 0 {
            return Err(Error::Domain("recording has no channels".into()));
        }
        let len = data.ncols();
        for (i, t) in triggers.iter().enumerate() {
            if t.index >= len {
                return Err(Error::Domain(format!(
                    "trigger {i} at sample {} is past the end of the recording ({len} samples)",
                    t.index
                )));
            }
            if i > 0 && t.index <= triggers[i - 1].index {
                return Err(Error::Domain(format!(
                    "trigger {i} at sample {} is not after the previous trigger",
                    t.index
                )));
            }
        }
        Ok(ContinuousRecording {
            data,
            sample_rate,
            triggers,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn triggers(&self) -> &[Trigger] {
        &self.triggers
    }
}

/// Filters every channel independently; same length, same triggers.
pub fn filter_signal(rec: &ContinuousRecording, filt: &SosFilter) -> ContinuousRecording {
    let rows: Vec<Vec<f64>> = (0..rec.channels())
        .into_par_iter()
        .map(|c| {
            let row: Vec<f64> = rec.data.row(c).iter().copied().collect();
            filt.apply(&row)
        })
        .collect();
    let data = DMatrix::from_fn(rec.channels(), rec.len(), |c, t| rows[c][t]);
    ContinuousRecording {
        data,
        sample_rate: rec.sample_rate,
        triggers: rec.triggers.clone(),
    }
}

/// Integer decimation factor from `source` to `target` Hz.
pub fn decimation_factor(source: f64, target: f64) -> Result<usize> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::InvalidConfig(format!("invalid target rate {target}")));
    }
    let ratio = source / target;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio {
        return Err(Error::InvalidConfig(format!(
            "sample rate {source} Hz is not an integer multiple of {target} Hz"
        )));
    }
    Ok(k as usize)
}

/// Keeps every k-th sample; trigger indices become `floor(index / k)`.
pub fn downsample(rec: &ContinuousRecording, target_hz: f64) -> Result<ContinuousRecording> {
    let k = decimation_factor(rec.sample_rate, target_hz)?;
    if k == 1 {
        return Ok(rec.clone());
    }
    let len = rec.len().div_ceil(k);
    let data = DMatrix::from_fn(rec.channels(), len, |c, t| rec.data[(c, t * k)]);
    let triggers = rec
        .triggers
        .iter()
        .map(|t| Trigger::new(t.index / k, t.label))
        .collect();
    ContinuousRecording::new(data, rec.sample_rate / k as f64, triggers)
}

/// Epochs plus the number of triggers that had no room for a full window.
#[derive(Debug, Clone, Default)]
pub struct Epochs {
    pub trials: Vec<Trial>,
    pub skipped: usize,
}

/// Samples per epoch for a window in seconds.
pub fn epoch_length(window_s: f64, sample_rate: f64) -> Result<usize> {
    let n = (window_s * sample_rate).round();
    if !(n >= 2.0) || !n.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "epoch window {window_s} s at {sample_rate} Hz gives fewer than 2 samples"
        )));
    }
    Ok(n as usize)
}

/// One mean-centered trial per trigger of the recording.
pub fn epoch(rec: &ContinuousRecording, window_s: f64) -> Result<Epochs> {
    epoch_at(rec, &rec.triggers, window_s)
}

/// Epochs `rec` at arbitrary triggers (possibly perturbed copies of its own).
/// Trials come out in trigger-index order; ties keep their input order.
/// `trial_id` is the trigger's position in `triggers`.
pub fn epoch_at(rec: &ContinuousRecording, triggers: &[Trigger], window_s: f64) -> Result<Epochs> {
    let n = epoch_length(window_s, rec.sample_rate)?;
    let mut order: Vec<usize> = (0..triggers.len()).collect();
    order.sort_by_key(|&i| triggers[i].index);
    let mut out = Epochs::default();
    for i in order {
        let t = triggers[i];
        if t.index + n > rec.len() {
            out.skipped += 1;
            continue;
        }
        let mut data = rec.data.columns(t.index, n).into_owned();
        for mut row in data.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
        out.trials.push(Trial::new(data, t.label, i as i64, rec.sample_rate)?);
    }
    if out.skipped > 0 {
        warn!("{} trigger(s) too close to the end of the recording were skipped", out.skipped);
    }
    Ok(out)
}

fn shift(index: usize, by: i64, len: usize) -> Option<usize> {
    let moved = index as i64 + by;
    (moved >= 0 && (moved as usize) < len).then_some(moved as usize)
}

/// Shifts every trigger by `round(delay_ms * fs / 1000)` samples, dropping
/// those that leave `[0, len)`.
pub fn inject_latency(triggers: &[Trigger], delay_ms: f64, fs: f64, len: usize) -> Vec<Trigger> {
    let by = (delay_ms * fs / 1000.0).round() as i64;
    triggers
        .iter()
        .filter_map(|t| shift(t.index, by, len).map(|index| Trigger::new(index, t.label)))
        .collect()
}

/// Independent zero-mean normal shift per trigger (std in milliseconds),
/// rounded to whole samples. Output is sorted by index; out-of-range
/// triggers are dropped.
pub fn inject_jitter(triggers: &[Trigger], std_ms: f64, fs: f64, len: usize, seed: u64) -> Result<Vec<Trigger>> {
    if !(std_ms >= 0.0) || !std_ms.is_finite() {
        return Err(Error::InvalidConfig(format!("jitter std must be >= 0, got {std_ms}")));
    }
    if std_ms == 0.0 {
        return Ok(triggers.to_vec());
    }
    let normal = Normal::new(0.0, std_ms * fs / 1000.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Trigger> = triggers
        .iter()
        .filter_map(|t| {
            let by = normal.sample(&mut rng).round() as i64;
            shift(t.index, by, len).map(|index| Trigger::new(index, t.label))
        })
        .collect();
    out.sort_by_key(|t| t.index);
    Ok(out)
}

/// Settings of the full filter, decimate, epoch chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub filter: FilterSpec,
    pub target_hz: f64,
    pub window_s: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            filter: FilterSpec::default(),
            target_hz: 128.0,
            window_s: 1.0,
        }
    }
}

/// Filter at the acquisition rate and decimate; triggers are carried along.
pub fn condition(rec: &ContinuousRecording, cfg: &PipelineConfig) -> Result<ContinuousRecording> {
    let filt = design_butterworth_bandpass(&cfg.filter, rec.sample_rate)?;
    downsample(&filter_signal(rec, &filt), cfg.target_hz)
}

pub fn preprocess(rec: &ContinuousRecording, cfg: &PipelineConfig) -> Result<Epochs> {
    epoch(&condition(rec, cfg)?, cfg.window_s)
}
