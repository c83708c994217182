//! Epoch archive: a fixed header followed by one record per trial.
//!
//! ```text
//! offset  size      field
//! 0       5         magic "ERPA1"
//! 5       2         version (u16) = 1
//! 7       4         channels C (u32)
//! 11      4         samples N (u32)
//! 15      8         sample rate in Hz (f64)
//! 23      8         trial count (u64)
//! 31      ...       records, each:
//!           1         label byte (0 nontarget, 1 target, 2 unknown)
//!           8         trial id (i64)
//!           8*C*N     samples (f64), row-major: channel 0 first
//! ```
//!
//! A continuous recording is stored as an archive holding exactly one
//! record whose `N` is the recording length; its triggers live in a
//! separate text file.

use std::fs;
use std::path::Path;

use crate::erp_cov::{Label, Trial};
use crate::error::{Error, Result};
use crate::preprocess::{ContinuousRecording, Trigger};

use super::{put_matrix, triggers, ByteReader};

pub const ARCHIVE_MAGIC: &[u8; 5] = b"ERPA1";
pub const ARCHIVE_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 31;

/// Trials sharing one shape and one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochArchive {
    channels: usize,
    samples: usize,
    sample_rate: f64,
    trials: Vec<Trial>,
}

impl EpochArchive {
    pub fn new(channels: usize, samples: usize, sample_rate: f64, trials: Vec<Trial>) -> Result<Self> {
        if channels == 0 || samples < 2 {
            return Err(Error::Domain(format!("invalid archive shape {channels}x{samples}")));
        }
        if channels > u32::MAX as usize || samples > u32::MAX as usize {
            return Err(Error::Domain(format!("archive shape {channels}x{samples} exceeds the format")));
        }
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::Domain(format!("invalid sample rate {sample_rate}")));
        }
        for (i, t) in trials.iter().enumerate() {
            if (t.channels(), t.samples()) != (channels, samples) {
                return Err(Error::dims(
                    format!("{channels}x{samples} trials"),
                    format!("trial {i} of shape {}x{}", t.channels(), t.samples()),
                ));
            }
            if t.sample_rate != sample_rate {
                return Err(Error::Domain(format!(
                    "trial {i} sampled at {} Hz in a {sample_rate} Hz archive",
                    t.sample_rate
                )));
            }
        }
        Ok(EpochArchive {
            channels,
            samples,
            sample_rate,
            trials,
        })
    }

    /// Shape and rate taken from the first trial.
    pub fn from_trials(trials: Vec<Trial>) -> Result<Self> {
        let first = trials
            .first()
            .ok_or_else(|| Error::Domain("cannot infer archive shape from zero trials".into()))?;
        let (c, n, fs) = (first.channels(), first.samples(), first.sample_rate);
        Self::new(c, n, fs, trials)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn into_trials(self) -> Vec<Trial> {
        self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.trials.iter().filter(|t| t.label == label).count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let record = 9 + 8 * self.channels * self.samples;
        let mut out = Vec::with_capacity(HEADER_LEN + record * self.trials.len());
        out.extend_from_slice(ARCHIVE_MAGIC);
        out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        out.extend_from_slice(&(self.samples as u32).to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&(self.trials.len() as u64).to_le_bytes());
        for t in &self.trials {
            out.push(t.label.to_byte());
            out.extend_from_slice(&t.trial_id.to_le_bytes());
            put_matrix(&mut out, t.data());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic = r.take(5, "archive header")?;
        if magic != ARCHIVE_MAGIC {
            return Err(Error::Format(format!("not an epoch archive (magic {magic:?})")));
        }
        let version = r.u16("archive version")?;
        if version != ARCHIVE_VERSION {
            return Err(Error::Format(format!("unsupported archive version {version}")));
        }
        let channels = r.u32("archive channels")? as usize;
        let samples = r.u32("archive samples")? as usize;
        let sample_rate = r.f64("archive sample rate")?;
        let count = r.u64("archive trial count")?;
        if channels == 0 || samples < 2 || !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::Format(format!(
                "invalid archive header: {channels} channels, {samples} samples, {sample_rate} Hz"
            )));
        }
        let record = 9 + 8 * channels as u64 * samples as u64;
        if count.checked_mul(record) != Some(r.remaining() as u64) {
            return Err(Error::Format(format!(
                "archive header declares {count} trial(s) of {record} bytes but {} bytes follow",
                r.remaining()
            )));
        }
        let mut trials = Vec::with_capacity(count as usize);
        for i in 0..count {
            let what = format!("record {i}");
            let byte = r.u8(&what)?;
            let label = Label::from_byte(byte)
                .ok_or_else(|| Error::Format(format!("record {i}: invalid label byte {byte}")))?;
            let trial_id = r.i64(&what)?;
            let data = r.matrix(channels, samples, &what)?;
            trials.push(Trial::new(data, label, trial_id, sample_rate)?);
        }
        r.finish("archive")?;
        Self::new(channels, samples, sample_rate, trials)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path)?).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Writes the signal as a one-record archive and the triggers as text.
pub fn write_recording(rec: &ContinuousRecording, signal: impl AsRef<Path>, trigger_file: impl AsRef<Path>) -> Result<()> {
    let whole = Trial::new(rec.data().clone(), Label::Unknown, 0, rec.sample_rate())?;
    EpochArchive::new(rec.channels(), rec.len(), rec.sample_rate(), vec![whole])?.write(signal)?;
    triggers::write_triggers(rec.triggers(), trigger_file)
}

pub fn read_recording(signal: impl AsRef<Path>, trigger_file: impl AsRef<Path>) -> Result<ContinuousRecording> {
    let signal = signal.as_ref();
    let archive = EpochArchive::read(signal)?;
    if archive.len() != 1 {
        return Err(Error::Format(format!(
            "{}: a recording holds exactly one record, found {}",
            signal.display(),
            archive.len()
        )));
    }
    let fs = archive.sample_rate();
    let data = archive.into_trials().pop().expect("one record").data().clone();
    let trig: Vec<Trigger> = triggers::read_triggers(trigger_file)?;
    ContinuousRecording::new(data, fs, trig).map_err(|e| match e {
        Error::Domain(msg) => Error::Format(msg),
        other => other,
    })
}
