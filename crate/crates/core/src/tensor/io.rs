//! `.dt1` binary tensor files.
//!
//! Layout: the 6 magic bytes `DTEN1\0`, one `u8` order `d`, `d` little-endian
//! `u64` dims, then `∏ dims` little-endian `f64` entries in column-major order.

use std::fs;
use std::path::Path;

use super::DenseTensor;
use crate::error::{Error, Result};

pub const DT1_MAGIC: &[u8; 6] = b"DTEN1\0";

impl DenseTensor {
    pub fn to_dt1_bytes(&self) -> Result<Vec<u8>> {
        let order = u8::try_from(self.order())
            .map_err(|_| Error::Format(format!("order {} does not fit in a u8", self.order())))?;
        let mut out = Vec::with_capacity(7 + 8 * self.order() + 8 * self.len());
        out.extend_from_slice(DT1_MAGIC);
        out.push(order);
        for &d in self.dims() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in self.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_dt1_bytes(bytes: &[u8]) -> Result<DenseTensor> {
        let rest = bytes
            .strip_prefix(DT1_MAGIC.as_slice())
            .ok_or_else(|| Error::Format("missing DTEN1 magic".into()))?;
        let (&order, mut rest) = rest
            .split_first()
            .ok_or_else(|| Error::Format("truncated header".into()))?;
        let mut dims = Vec::with_capacity(order as usize);
        for _ in 0..order {
            let (head, tail) = take8(rest, "dims")?;
            let d = u64::from_le_bytes(head);
            dims.push(
                usize::try_from(d)
                    .map_err(|_| Error::Format(format!("dimension {d} too large")))?,
            );
            rest = tail;
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("entry count overflows".into()))?;
        let expected = count
            .checked_mul(8)
            .ok_or_else(|| Error::Format("entry count overflows".into()))?;
        if rest.len() != expected {
            return Err(Error::Format(format!(
                "expected {} bytes of entries for dims {:?}, found {}",
                expected,
                dims,
                rest.len()
            )));
        }
        let data = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        DenseTensor::new(dims, data)
    }
}

fn take8<'a>(bytes: &'a [u8], what: &str) -> Result<([u8; 8], &'a [u8])> {
    if bytes.len() < 8 {
        return Err(Error::Format(format!("truncated {what}")));
    }
    let (head, tail) = bytes.split_at(8);
    Ok((head.try_into().expect("8 bytes"), tail))
}

pub fn read_dt1(path: impl AsRef<Path>) -> Result<DenseTensor> {
    DenseTensor::from_dt1_bytes(&fs::read(path)?)
}

pub fn write_dt1(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    fs::write(path, t.to_dt1_bytes()?)?;
    Ok(())
}
