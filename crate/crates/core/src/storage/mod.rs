//! On-disk formats: the epoch archive, the model file, and trigger lists.
//!
//! Binary formats are little-endian with IEEE-754 64-bit floats. Matrices are
//! stored row-major.

pub mod archive;
pub mod model;
pub mod triggers;

pub use archive::{read_recording, write_recording, EpochArchive};
pub use model::{ModelFile, MODEL_MAGIC, MODEL_VERSION};
pub use triggers::{parse_triggers, read_triggers, write_triggers};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Bounds-checked little-endian reader; every failure is a format error
/// carrying the name of the field being read.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!(
                "{what}: truncated at byte {} (need {n}, have {})",
                self.pos,
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const K: usize>(&mut self, what: &str) -> Result<[u8; K]> {
        Ok(self.take(K, what)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    pub(crate) fn i64(&mut self, what: &str) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array(what)?))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    pub(crate) fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
        let bytes = self.take(checked_len(rows, cols, what)?, what)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    }

    pub(crate) fn finish(&self, what: &str) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Format(format!(
                "{what}: {} unexpected trailing byte(s) at offset {}",
                self.remaining(),
                self.pos
            )));
        }
        Ok(())
    }
}

fn checked_len(rows: usize, cols: usize, what: &str) -> Result<usize> {
    rows.checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("{what}: size {rows}x{cols} overflows")))
}

pub(crate) fn put_matrix(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    out.reserve(m.len() * 8);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
}
