//! Binary tensor files.
//!
//! ```text
//! offset  size     field
//! 0       4        magic "TU1T"
//! 4       4        version, u32 little-endian (currently 1)
//! 8       1        scalar kind: 0 = real, 1 = complex
//! 9       1        order h (1..=8)
//! 10      8*h      extents, u64 little-endian
//! ...     8*N*c    entries as little-endian IEEE-754 f64, row-major
//!                  (last mode fastest); complex entries are stored as
//!                  interleaved (re, im) pairs, so c = 2, otherwise c = 1
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{AnyTensor, ComplexTensor, RealTensor, MAX_ORDER};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TU1T";
pub const VERSION: u32 = 1;

pub fn write_tensor<W: Write>(mut w: W, t: &AnyTensor) -> Result<()> {
    let shape = t.shape();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let kind: u8 = match t {
        AnyTensor::Real(_) => 0,
        AnyTensor::Complex(_) => 1,
    };
    w.write_all(&[kind, shape.len() as u8])?;
    for &n in shape {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    match t {
        AnyTensor::Real(t) => {
            for x in t.data() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        AnyTensor::Complex(t) => {
            for z in t.data() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated file".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<AnyTensor> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [kind, order] = read_array::<2, _>(&mut r)?;
    let order = order as usize;
    if order == 0 || order > MAX_ORDER {
        return Err(Error::Format(format!("unsupported order {order}")));
    }
    let mut shape = Vec::with_capacity(order);
    for _ in 0..order {
        let n = u64::from_le_bytes(read_array(&mut r)?);
        shape.push(usize::try_from(n).map_err(|_| Error::Format("extent overflow".into()))?);
    }
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::Format("size overflow".into()))?;
    let mut next = || -> Result<f64> { Ok(f64::from_le_bytes(read_array(&mut r)?)) };
    let t = match kind {
        0 => {
            let data = (0..len).map(|_| next()).collect::<Result<Vec<_>>>()?;
            AnyTensor::Real(RealTensor::new(shape, data)?)
        }
        1 => {
            let data = (0..len)
                .map(|_| Ok(Complex64::new(next()?, next()?)))
                .collect::<Result<Vec<_>>>()?;
            AnyTensor::Complex(ComplexTensor::new(shape, data)?)
        }
        k => return Err(Error::Format(format!("unknown scalar kind {k}"))),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes".into()));
    }
    Ok(t)
}

pub fn save(path: impl AsRef<Path>, t: &AnyTensor) -> Result<()> {
    write_tensor(BufWriter::new(File::create(path)?), t)
}

pub fn load(path: impl AsRef<Path>) -> Result<AnyTensor> {
    read_tensor(BufReader::new(File::open(path)?))
}
