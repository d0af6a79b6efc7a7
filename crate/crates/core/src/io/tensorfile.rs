//! Fixed-layout little-endian tensor container.
//!
//! Layout: `b"KIEB"`, version `u16`, dtype `u8`, ndim `u8`, `ndim` dims as
//! `u32`, then the row-major payload (complex values as interleaved
//! real/imaginary pairs).

use std::io::Write;
use std::path::Path;

use num_complex::{Complex, Complex64};

use crate::complex::{ComplexTensor, RealImage};
use crate::error::{Error, Result};
use crate::mri::SamplingMask;

pub const MAGIC: &[u8; 4] = b"KIEB";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Real32 = 0,
    Real64 = 1,
    Complex64 = 2,
    Complex128 = 3,
}

impl DType {
    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => DType::Real32,
            1 => DType::Real64,
            2 => DType::Complex64,
            3 => DType::Complex128,
            _ => return Err(Error::Format(format!("unknown dtype code {code}"))),
        })
    }

    pub fn element_size(&self) -> usize {
        match self {
            DType::Real32 => 4,
            DType::Real64 | DType::Complex64 => 8,
            DType::Complex128 => 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Real32(Vec<f32>),
    Real64(Vec<f64>),
    Complex64(Vec<Complex<f32>>),
    Complex128(Vec<Complex64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::Real32(_) => DType::Real32,
            TensorData::Real64(_) => DType::Real64,
            TensorData::Complex64(_) => DType::Complex64,
            TensorData::Complex128(_) => DType::Complex128,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::Real32(v) => v.len(),
            TensorData::Real64(v) => v.len(),
            TensorData::Complex64(v) => v.len(),
            TensorData::Complex128(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    dims: Vec<usize>,
    data: TensorData,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.len() > u8::MAX as usize {
            return Err(Error::Format(format!("{} dimensions exceed the format limit", dims.len())));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Format(format!("dimension in {dims:?} exceeds u32")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("{} elements for dims {dims:?}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dt = self.dtype();
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + dt.element_size() * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(dt as u8);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::Real32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::Real64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::Complex64(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            TensorData::Complex128(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
        out
    }

    /// Parses one tensor from the front of `bytes`; returns it and the
    /// number of bytes consumed.
    pub fn parse_prefix(bytes: &[u8]) -> Result<(Self, usize)> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not a KIEB tensor file".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported tensor file version {version}")));
        }
        let dt = DType::from_code(r.u8()?)?;
        let ndim = r.u8()? as usize;
        let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Format("dimension product overflows".into()))?;
        let payload = r.take(
            n.checked_mul(dt.element_size())
                .ok_or_else(|| Error::Format("payload size overflows".into()))?,
        )?;
        let data = match dt {
            DType::Real32 => TensorData::Real32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(arr(c))).collect()),
            DType::Real64 => TensorData::Real64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(arr(c))).collect()),
            DType::Complex64 => TensorData::Complex64(
                payload
                    .chunks_exact(8)
                    .map(|c| Complex::new(f32::from_le_bytes(arr(&c[..4])), f32::from_le_bytes(arr(&c[4..]))))
                    .collect(),
            ),
            DType::Complex128 => TensorData::Complex128(
                payload
                    .chunks_exact(16)
                    .map(|c| Complex64::new(f64::from_le_bytes(arr(&c[..8])), f64::from_le_bytes(arr(&c[8..]))))
                    .collect(),
            ),
        };
        let used = r.pos;
        Ok((Self::new(dims, data)?, used))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (t, used) = Self::parse_prefix(bytes)?;
        if used != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after tensor payload", bytes.len() - used)));
        }
        Ok(t)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn from_image(img: &RealImage) -> Self {
        Self {
            dims: vec![img.height(), img.width()],
            data: TensorData::Real64(img.data().to_vec()),
        }
    }

    pub fn from_complex(t: &ComplexTensor) -> Self {
        Self {
            dims: vec![t.planes(), t.height(), t.width()],
            data: TensorData::Complex128(t.data().to_vec()),
        }
    }

    pub fn from_mask(m: &SamplingMask) -> Self {
        Self {
            dims: vec![m.height(), m.width()],
            data: TensorData::Real32(m.pattern().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()),
        }
    }

    fn trailing_2d(&self, what: &str) -> Result<(usize, usize)> {
        match self.dims[..] {
            [h, w] => Ok((h, w)),
            [1, h, w] => Ok((h, w)),
            _ => Err(Error::Format(format!("{what} needs dims [h, w], got {:?}", self.dims))),
        }
    }

    /// Real image; accepts `[h, w]` or `[1, h, w]` real tensors.
    pub fn to_image(&self) -> Result<RealImage> {
        let (h, w) = self.trailing_2d("image")?;
        let data = match &self.data {
            TensorData::Real64(v) => v.clone(),
            TensorData::Real32(v) => v.iter().map(|&x| x as f64).collect(),
            _ => return Err(Error::Format("image tensor must be real".into())),
        };
        RealImage::new(h, w, data)
    }

    /// Complex stack; accepts `[planes, h, w]` or `[h, w]` tensors of any
    /// dtype.
    pub fn to_complex(&self) -> Result<ComplexTensor> {
        let (p, h, w) = match self.dims[..] {
            [p, h, w] => (p, h, w),
            [h, w] => (1, h, w),
            _ => return Err(Error::Format(format!("complex stack needs 2 or 3 dims, got {:?}", self.dims))),
        };
        let data = match &self.data {
            TensorData::Complex128(v) => v.clone(),
            TensorData::Complex64(v) => v.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect(),
            TensorData::Real64(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            TensorData::Real32(v) => v.iter().map(|&x| Complex64::new(x as f64, 0.0)).collect(),
        };
        ComplexTensor::new(p, h, w, data)
    }

    /// Binary mask; every entry must be exactly 0 or 1.
    pub fn to_mask(&self) -> Result<SamplingMask> {
        let (h, w) = self.trailing_2d("mask")?;
        let vals: Vec<f64> = match &self.data {
            TensorData::Real32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::Real64(v) => v.clone(),
            _ => return Err(Error::Format("mask tensor must be real".into())),
        };
        if vals.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Format("mask entries must be 0 or 1".into()));
        }
        SamplingMask::from_pattern(h, w, vals.iter().map(|&v| v == 1.0).collect())
    }
}

fn arr<const N: usize>(c: &[u8]) -> [u8; N] {
    c.try_into().expect("chunk length fixed by chunks_exact")
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(arr(self.take(2)?)))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(arr(self.take(4)?)))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(arr(self.take(8)?)))
    }

    pub(crate) fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
