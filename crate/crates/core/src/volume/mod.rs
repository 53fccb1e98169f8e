//! Dense 3D volumes, the EMV1 file format, and chunk grids.
//!
//! Voxels are stored flat with x varying fastest:
//! `index = (z * H + y) * W + x`. A whole z-slice is therefore one
//! contiguous run of `H * W` values.

mod chunks;
mod io;

use std::fmt::Debug;

pub use chunks::{iter_chunks, ChunkGrid, ChunkRegion, VolumeView};
pub use io::{load_volume, read_volume, save_volume, write_volume, HEADER_LEN, MAGIC};

use crate::{Error, Result};

/// On-disk element type. The discriminant is the EMV1 dtype code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DType {
    U8 = 0,
    U16 = 1,
    U32 = 2,
    U64 = 3,
    F32 = 4,
}

impl DType {
    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => DType::U8,
            1 => DType::U16,
            2 => DType::U32,
            3 => DType::U64,
            4 => DType::F32,
            other => return Err(Error::UnsupportedDtype(other)),
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::U32 => 4,
            DType::U64 => 8,
            DType::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::U8 => "u8",
            DType::U16 => "u16",
            DType::U32 => "u32",
            DType::U64 => "u64",
            DType::F32 => "f32",
        }
    }
}

/// A scalar type that can live in a [`Volume`].
pub trait Voxel: Copy + Default + PartialEq + PartialOrd + Debug + Send + Sync + 'static {
    const DTYPE: DType;

    fn write_le(self, out: &mut Vec<u8>);
    /// `bytes.len()` is exactly `DTYPE.size()`.
    fn read_le(bytes: &[u8]) -> Self;
    fn to_f64(self) -> f64;
    /// Rounds and clamps into the representable range.
    fn from_f64_saturating(v: f64) -> Self;

    fn wrap(v: Volume<Self>) -> AnyVolume;
    fn unwrap_any(v: AnyVolume) -> std::result::Result<Volume<Self>, AnyVolume>;
}

macro_rules! int_voxel {
    ($t:ty, $dt:ident) => {
        impl Voxel for $t {
            const DTYPE: DType = DType::$dt;

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            fn read_le(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("voxel width"))
            }

            fn to_f64(self) -> f64 {
                self as f64
            }

            fn from_f64_saturating(v: f64) -> Self {
                // `as` saturates and maps NaN to 0.
                v.round() as $t
            }

            fn wrap(v: Volume<Self>) -> AnyVolume {
                AnyVolume::$dt(v)
            }

            fn unwrap_any(v: AnyVolume) -> std::result::Result<Volume<Self>, AnyVolume> {
                match v {
                    AnyVolume::$dt(v) => Ok(v),
                    other => Err(other),
                }
            }
        }
    };
}

int_voxel!(u8, U8);
int_voxel!(u16, U16);
int_voxel!(u32, U32);
int_voxel!(u64, U64);

impl Voxel for f32 {
    const DTYPE: DType = DType::F32;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("voxel width"))
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn from_f64_saturating(v: f64) -> Self {
        v as f32
    }

    fn wrap(v: Volume<Self>) -> AnyVolume {
        AnyVolume::F32(v)
    }

    fn unwrap_any(v: AnyVolume) -> std::result::Result<Volume<Self>, AnyVolume> {
        match v {
            AnyVolume::F32(v) => Ok(v),
            other => Err(other),
        }
    }
}

/// Dense 3D grid of voxels with dims `[D, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    dims: [usize; 3],
    data: Vec<T>,
    voxel_size: Option<[f64; 3]>,
}

impl<T: Voxel> Volume<T> {
    pub fn new(dims: [usize; 3], data: Vec<T>) -> Result<Self> {
        let expected = voxel_count(dims)?;
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "volume {dims:?} needs {expected} voxels, got {}",
                data.len()
            )));
        }
        Ok(Self {
            dims,
            data,
            voxel_size: None,
        })
    }

    pub fn filled(dims: [usize; 3], value: T) -> Self {
        let n = voxel_count(dims).expect("volume dims overflow");
        Self {
            dims,
            data: vec![value; n],
            voxel_size: None,
        }
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self::filled(dims, T::default())
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let [d, h, w] = dims;
        let mut data = Vec::with_capacity(d * h * w);
        for z in 0..d {
            for y in 0..h {
                for x in 0..w {
                    data.push(f(z, y, x));
                }
            }
        }
        Self {
            dims,
            data,
            voxel_size: None,
        }
    }

    /// Physical voxel spacing in nm as `(z, y, x)`. Metadata only; not stored in EMV1.
    pub fn with_voxel_size(mut self, nm: [f64; 3]) -> Self {
        self.voxel_size = Some(nm);
        self
    }

    pub fn voxel_size(&self) -> Option<[f64; 3]> {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dtype(&self) -> DType {
        T::DTYPE
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[2] + x
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> T {
        self.data[self.index(z, y, x)]
    }

    #[inline]
    pub fn set(&mut self, z: usize, y: usize, x: usize, value: T) {
        let i = self.index(z, y, x);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// The contiguous `H * W` run of slice `z`.
    pub fn slice_z(&self, z: usize) -> &[T] {
        let plane = self.dims[1] * self.dims[2];
        &self.data[z * plane..(z + 1) * plane]
    }

    pub fn slice_z_mut(&mut self, z: usize) -> &mut [T] {
        let plane = self.dims[1] * self.dims[2];
        &mut self.data[z * plane..(z + 1) * plane]
    }

    pub fn map<U: Voxel>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
            voxel_size: self.voxel_size,
        }
    }

    pub fn ensure_same_dims<U>(&self, other: &Volume<U>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        Ok(())
    }

    pub fn into_any(self) -> AnyVolume {
        T::wrap(self)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        io::save_typed(self, path.as_ref())
    }

    /// Load a file that must hold exactly this dtype.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let any = load_volume(path)?;
        let found = any.dtype();
        T::unwrap_any(any).map_err(|_| {
            Error::Format(format!(
                "expected a {} volume, file holds {}",
                T::DTYPE.name(),
                found.name()
            ))
        })
    }
}

impl Volume<f32> {
    /// Fails unless every voxel lies in `[0, 1]`.
    pub fn check_probability(&self) -> Result<()> {
        if let Some((i, v)) = self
            .data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Domain(format!(
                "voxel {i} holds {v}, outside the probability range [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn load_probability(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let v = Self::load(path)?;
        v.check_probability()?;
        Ok(v)
    }
}

/// A volume whose dtype is only known at runtime (what a file holds).
#[derive(Debug, Clone, PartialEq)]
pub enum AnyVolume {
    U8(Volume<u8>),
    U16(Volume<u16>),
    U32(Volume<u32>),
    U64(Volume<u64>),
    F32(Volume<f32>),
}

macro_rules! each_any {
    ($self:expr, $v:ident => $body:expr) => {
        match $self {
            AnyVolume::U8($v) => $body,
            AnyVolume::U16($v) => $body,
            AnyVolume::U32($v) => $body,
            AnyVolume::U64($v) => $body,
            AnyVolume::F32($v) => $body,
        }
    };
}

impl AnyVolume {
    pub fn dims(&self) -> [usize; 3] {
        each_any!(self, v => v.dims())
    }

    pub fn dtype(&self) -> DType {
        each_any!(self, v => v.dtype())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        each_any!(self, v => v.save(path))
    }

    /// Integer volumes widened to `u32`; `u64` values must fit.
    pub fn into_u32(self) -> Result<Volume<u32>> {
        match self {
            AnyVolume::U8(v) => Ok(v.map(u32::from)),
            AnyVolume::U16(v) => Ok(v.map(u32::from)),
            AnyVolume::U32(v) => Ok(v),
            AnyVolume::U64(v) => {
                if v.as_slice().iter().any(|&l| l > u64::from(u32::MAX)) {
                    return Err(Error::LabelOverflow(
                        "u64 label volume holds values above u32::MAX".into(),
                    ));
                }
                Ok(v.map(|l| l as u32))
            }
            AnyVolume::F32(_) => Err(Error::Format(
                "expected an integer volume, file holds f32".into(),
            )),
        }
    }

    /// Integer volumes narrowed to `u8`, rejecting anything outside `{0, 1}`.
    pub fn into_binary(self) -> Result<Volume<u8>> {
        let v = self.into_u32()?;
        if let Some(bad) = v.as_slice().iter().find(|&&x| x > 1) {
            return Err(Error::Domain(format!(
                "binary mask holds value {bad}, expected 0 or 1"
            )));
        }
        Ok(v.map(|x| x as u8))
    }
}

fn voxel_count(dims: [usize; 3]) -> Result<usize> {
    dims[0]
        .checked_mul(dims[1])
        .and_then(|n| n.checked_mul(dims[2]))
        .ok_or_else(|| Error::InvalidArgument(format!("volume dims {dims:?} overflow")))
}
