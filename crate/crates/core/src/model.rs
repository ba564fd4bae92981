//! Binary model files.
//!
//! Little-endian layout:
//!
//! ```text
//! "RIPM" | version u32 | block_size u32 | ref_len u32 | block_len u32 | k u32
//! provenance u8 | lambda f64 | iterations_trained u32
//! k x { label_len u16 | label utf-8 | block_len*ref_len f64, row-major }
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::designed::{PredictorMatrix, PredictorSet, Provenance};
use crate::error::{Error, Result};
use crate::geometry::BlockGeometry;

pub const MAGIC: &[u8; 4] = b"RIPM";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_model<W: Write>(set: &PredictorSet, mut w: W) -> Result<()> {
    let g = set.geometry();
    w.write_all(MAGIC)?;
    for v in [
        FORMAT_VERSION,
        g.block_size() as u32,
        g.ref_len() as u32,
        g.block_len() as u32,
        set.len() as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&[set.provenance().code()])?;
    w.write_all(&set.lambda().to_le_bytes())?;
    w.write_all(&set.iterations_trained().to_le_bytes())?;
    for mode in set.modes() {
        let label = mode.label.as_bytes();
        let len = u16::try_from(label.len())
            .map_err(|_| Error::InconsistentModel(format!("label of mode {} too long", mode.mode_id)))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(label)?;
        let mut buf = Vec::with_capacity(mode.matrix.len() * 8);
        for r in 0..mode.matrix.nrows() {
            for c in 0..mode.matrix.ncols() {
                buf.extend_from_slice(&mode.matrix[(r, c)].to_le_bytes());
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Truncated);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_model(bytes: &[u8]) -> Result<PredictorSet> {
    let mut cur = Cursor { bytes };
    if cur.take(4).map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let block_size = cur.u32()? as usize;
    let ref_len = cur.u32()? as usize;
    let block_len = cur.u32()? as usize;
    let k = cur.u32()? as usize;
    let geometry = BlockGeometry::new(block_size)
        .map_err(|_| Error::InconsistentModel(format!("block size {block_size}")))?;
    if ref_len != geometry.ref_len() || block_len != geometry.block_len() {
        return Err(Error::InconsistentModel(format!(
            "block size {block_size} implies {}x{} matrices, header says {block_len}x{ref_len}",
            geometry.block_len(),
            geometry.ref_len()
        )));
    }
    let code = cur.u8()?;
    let provenance = Provenance::from_code(code)
        .ok_or_else(|| Error::InconsistentModel(format!("unknown provenance {code}")))?;
    let lambda = cur.f64()?;
    let iterations_trained = cur.u32()?;

    let mut modes = Vec::with_capacity(k.min(1024));
    for p in 0..k {
        if cur.bytes.is_empty() {
            return Err(Error::InconsistentModel(format!(
                "header declares {k} modes, file holds {p}"
            )));
        }
        let len = cur.u16()? as usize;
        let label = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::InconsistentModel(format!("label of mode {p} is not UTF-8")))?
            .to_owned();
        let raw = cur.take(block_len * ref_len * 8)?;
        let mut values = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
        let mut matrix = DMatrix::zeros(block_len, ref_len);
        for r in 0..block_len {
            for c in 0..ref_len {
                matrix[(r, c)] = values.next().unwrap();
            }
        }
        modes.push(PredictorMatrix::new(label, matrix));
    }
    if !cur.bytes.is_empty() {
        return Err(Error::InconsistentModel(format!(
            "{} trailing bytes after {k} modes",
            cur.bytes.len()
        )));
    }
    PredictorSet::new(geometry, modes, provenance, lambda, iterations_trained)
}

pub fn save_model(set: &PredictorSet, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_model(set, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PredictorSet> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_model(&bytes)
}
