//! EMV1 reader and writer.
//!
//! Layout: `"EMV1"`, one dtype byte, then `D`, `H`, `W` as little-endian
//! `u64`, then the raw little-endian payload in x-fastest order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AnyVolume, DType, Volume, Voxel};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMV1";
pub const HEADER_LEN: usize = 29;

const WRITE_BLOCK: usize = 1 << 16;

pub fn load_volume(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let file = File::open(path.as_ref())?;
    read_volume(BufReader::new(file))
}

pub fn save_volume(volume: &AnyVolume, path: impl AsRef<Path>) -> Result<()> {
    volume.save(path)
}

pub fn read_volume(mut reader: impl Read) -> Result<AnyVolume> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        let n = reader.read(&mut header[filled..])?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    if filled < 4 || &header[..4] != MAGIC {
        return Err(Error::Format("missing EMV1 magic".into()));
    }
    if filled < HEADER_LEN {
        return Err(Error::Format(format!(
            "header truncated after {filled} of {HEADER_LEN} bytes"
        )));
    }
    let dtype = DType::from_code(header[4])?;
    let mut dims = [0usize; 3];
    for (axis, dim) in dims.iter_mut().enumerate() {
        let at = 5 + axis * 8;
        let raw = u64::from_le_bytes(header[at..at + 8].try_into().unwrap());
        *dim = usize::try_from(raw)
            .map_err(|_| Error::Format(format!("dimension {raw} exceeds address space")))?;
    }
    let expected = dims
        .iter()
        .try_fold(dtype.size() as u64, |acc, &d| acc.checked_mul(d as u64))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;

    let mut payload = Vec::new();
    // One extra byte so trailing garbage is detected.
    reader.take(expected + 1).read_to_end(&mut payload)?;
    if payload.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: payload.len() as u64,
        });
    }

    Ok(match dtype {
        DType::U8 => AnyVolume::U8(Volume::new(dims, payload)?),
        DType::U16 => AnyVolume::U16(decode(dims, &payload)?),
        DType::U32 => AnyVolume::U32(decode(dims, &payload)?),
        DType::U64 => AnyVolume::U64(decode(dims, &payload)?),
        DType::F32 => AnyVolume::F32(decode(dims, &payload)?),
    })
}

fn decode<T: Voxel>(dims: [usize; 3], payload: &[u8]) -> Result<Volume<T>> {
    let data = payload
        .chunks_exact(T::DTYPE.size())
        .map(T::read_le)
        .collect();
    Volume::new(dims, data)
}

pub(super) fn save_typed<T: Voxel>(volume: &Volume<T>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_volume(volume, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_volume<T: Voxel>(volume: &Volume<T>, mut out: impl Write) -> Result<()> {
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.push(T::DTYPE.code());
    for d in volume.dims() {
        header.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.write_all(&header)?;

    let mut buf = Vec::with_capacity(WRITE_BLOCK * T::DTYPE.size());
    for block in volume.as_slice().chunks(WRITE_BLOCK) {
        buf.clear();
        for &v in block {
            v.write_le(&mut buf);
        }
        out.write_all(&buf)?;
    }
    Ok(())
}
