//! Model file.
//!
//! ```text
//! offset  size          field
//! 0       6             magic "ERPMDM"
//! 6       2             format version (u16) = 1
//! 8       4             channels C (u32)
//! 12      4             samples N (u32)
//! 16      8             trials averaged into the prototype (u64)
//! 24      8             shrinkage (f64)
//! 32      1             shrinkage target (0 = scaled identity)
//! 33      1             adaptation schedule (0 = linear by trial count, 1 = fixed)
//! 34      8             n_full (as f64) or fixed alpha
//! 42      8*C*N         prototype, row-major
//! ...     8*(2C)^2      target class mean, row-major
//! ...     8*(2C)^2      non-target class mean, row-major
//! ...     4             metadata length L (u32)
//! ...     L             metadata, UTF-8 `key=value` lines
//! ```
//!
//! Everything before the metadata length is the payload; two models are
//! equivalent iff their payloads are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::classifier::{AlphaSchedule, MdmModel};
use crate::erp_cov::{ErpPrototype, EstimatorConfig, ShrinkageTarget};
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

use super::{put_matrix, ByteReader};

pub const MODEL_MAGIC: &[u8; 6] = b"ERPMDM";
pub const MODEL_VERSION: u16 = 1;
const FIXED_HEADER: usize = 42;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: MdmModel,
    /// Default schedule for adapting this model to a new subject.
    pub schedule: AlphaSchedule,
    pub metadata: BTreeMap<String, String>,
}

/// Payload size for a model with `channels x samples` trials.
pub fn payload_len(channels: usize, samples: usize) -> usize {
    let dim = 2 * channels;
    FIXED_HEADER + 8 * (channels * samples + 2 * dim * dim)
}

impl ModelFile {
    pub fn new(model: MdmModel, schedule: AlphaSchedule) -> Self {
        ModelFile {
            model,
            schedule,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn payload_len(&self) -> usize {
        payload_len(self.model.channels(), self.model.samples())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let (c, n) = (m.channels(), m.samples());
        if c > u32::MAX as usize || n > u32::MAX as usize {
            return Err(Error::Domain(format!("model shape {c}x{n} exceeds the format")));
        }
        let mut out = Vec::with_capacity(payload_len(c, n) + 256);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(c as u32).to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&(m.prototype().n_averaged as u64).to_le_bytes());
        out.extend_from_slice(&m.estimator().shrinkage.to_le_bytes());
        out.push(match m.estimator().target {
            ShrinkageTarget::ScaledIdentity => 0,
        });
        let (kind, param) = match self.schedule {
            AlphaSchedule::LinearByTrialCount { n_full } => (0u8, n_full as f64),
            AlphaSchedule::Fixed(a) => (1u8, a),
        };
        out.push(kind);
        out.extend_from_slice(&param.to_le_bytes());
        put_matrix(&mut out, &m.prototype().data);
        put_matrix(&mut out, m.mean_target().as_matrix());
        put_matrix(&mut out, m.mean_nontarget().as_matrix());
        debug_assert_eq!(out.len(), payload_len(c, n));
        let mut meta = String::new();
        for (k, v) in &self.metadata {
            if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::Domain(format!("metadata entry `{k}` cannot be encoded")));
            }
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic = r.take(6, "model header")?;
        if magic != MODEL_MAGIC {
            return Err(Error::Format(format!("not a model file (magic {magic:?})")));
        }
        let version = r.u16("model version")?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let c = r.u32("model channels")? as usize;
        let n = r.u32("model samples")? as usize;
        if c == 0 || n < 2 {
            return Err(Error::Format(format!("invalid model shape {c}x{n}")));
        }
        let n_averaged = r.u64("prototype count")? as usize;
        let shrinkage = r.f64("shrinkage")?;
        let target = match r.u8("shrinkage target")? {
            0 => ShrinkageTarget::ScaledIdentity,
            b => return Err(Error::Format(format!("unknown shrinkage target code {b}"))),
        };
        let kind = r.u8("schedule kind")?;
        let param = r.f64("schedule parameter")?;
        let schedule = match kind {
            0 if param >= 1.0 && param.fract() == 0.0 && param <= usize::MAX as f64 => {
                AlphaSchedule::LinearByTrialCount { n_full: param as usize }
            }
            1 => AlphaSchedule::Fixed(param),
            _ => return Err(Error::Format(format!("invalid schedule ({kind}, {param})"))),
        };
        schedule.validate().map_err(|e| Error::Format(e.to_string()))?;
        let dim = 2 * c;
        let prototype = r.matrix(c, n, "prototype")?;
        let mean_t = r.matrix(dim, dim, "target mean")?;
        let mean_n = r.matrix(dim, dim, "non-target mean")?;
        let len = r.u32("metadata length")? as usize;
        let meta_bytes = r.take(len, "metadata")?;
        r.finish("model")?;
        let text = std::str::from_utf8(meta_bytes).map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        let mut metadata = BTreeMap::new();
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("metadata line without `=`: `{line}`")))?;
            metadata.insert(k.to_string(), v.to_string());
        }
        let spd = |m, what: &str| SpdMatrix::new(m).map_err(|e| Error::Format(format!("{what}: {e}")));
        let estimator = EstimatorConfig { shrinkage, target };
        estimator.validate().map_err(|e| Error::Format(e.to_string()))?;
        let model = MdmModel::new(
            ErpPrototype {
                data: prototype,
                n_averaged,
            },
            spd(mean_t, "target mean")?,
            spd(mean_n, "non-target mean")?,
            estimator,
        )?;
        Ok(ModelFile {
            model,
            schedule,
            metadata,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::train;
    use crate::eval::synth::{generate_session, SynthConfig};
    use crate::spd::MeanConfig;

    fn model() -> MdmModel {
        let mut cfg = SynthConfig::standard(3, 5).unwrap();
        cfg.repetitions = 4;
        let trials = generate_session(&cfg).unwrap();
        train(&trials, &EstimatorConfig::new(0.05).unwrap(), &MeanConfig::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let file = ModelFile::new(model(), AlphaSchedule::Fixed(0.25)).with_meta("origin", "unit test");
        let bytes = file.to_bytes().unwrap();
        assert_eq!(&bytes[..6], b"ERPMDM");
        let back = ModelFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        let trials = generate_session(&SynthConfig::standard(3, 6).unwrap()).unwrap();
        for t in trials.iter().take(24) {
            assert_eq!(file.model.score(t).unwrap().to_bits(), back.model.score(t).unwrap().to_bits());
        }
    }

    #[test]
    fn payload_excludes_metadata() {
        let a = ModelFile::new(model(), AlphaSchedule::default());
        let b = a.clone().with_meta("note", "different");
        let (ba, bb) = (a.to_bytes().unwrap(), b.to_bytes().unwrap());
        let p = a.payload_len();
        assert_eq!(p, payload_len(3, 128));
        assert_eq!(ba[..p], bb[..p]);
        assert_ne!(ba, bb);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let bytes = ModelFile::new(model(), AlphaSchedule::default()).to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[2] = 0;
        assert!(matches!(ModelFile::from_bytes(&bad), Err(Error::Format(_))));
        assert!(matches!(ModelFile::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(ModelFile::from_bytes(&extra), Err(Error::Format(_))));
        let mut asym = bytes.clone();
        // first off-diagonal entry of the target mean
        let off = FIXED_HEADER + 8 * 3 * 128 + 8;
        asym[off + 7] ^= 0x40;
        assert!(matches!(ModelFile::from_bytes(&asym), Err(Error::Format(_))));
    }
}
