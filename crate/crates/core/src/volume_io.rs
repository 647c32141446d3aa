//! NIfTI-1 single-file reading and writing.
//!
//! Voxel data is kept in its on-disk type so that a write/read cycle is
//! bit-exact; [`Volume::value`] and [`Volume::scaled`] apply
//! `scl_slope`/`scl_inter`. The slice axis is always the third dimension.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::mask::Mask3D;

const HEADER_SIZE: usize = 348;
const NIFTI2_HEADER_SIZE: i32 = 540;
const VOX_OFFSET: usize = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("bad magic bytes {0:?} (expected \"n+1\\0\")")]
    BadMagic([u8; 4]),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(&'static str),
    #[error("truncated file: need {needed} bytes, have {available}")]
    TruncatedFile { needed: usize, available: usize },
    #[error("volume is not 3D: dims {0:?}")]
    Not3D(Vec<i64>),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("label volume contains non-integer or negative value {0}")]
    BadLabelValue(f64),
}

/// On-disk voxel type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    U8,
    I16,
    I32,
    U16,
    F32,
    F64,
}

impl DataType {
    pub const ALL: [DataType; 6] = [
        DataType::U8,
        DataType::I16,
        DataType::I32,
        DataType::U16,
        DataType::F32,
        DataType::F64,
    ];

    pub fn code(self) -> i16 {
        match self {
            DataType::U8 => 2,
            DataType::I16 => 4,
            DataType::I32 => 8,
            DataType::F32 => 16,
            DataType::F64 => 64,
            DataType::U16 => 512,
        }
    }

    pub fn from_code(code: i16) -> Result<Self, NiftiError> {
        Ok(match code {
            2 => DataType::U8,
            4 => DataType::I16,
            8 => DataType::I32,
            16 => DataType::F32,
            64 => DataType::F64,
            512 => DataType::U16,
            other => return Err(NiftiError::UnsupportedDatatype(other)),
        })
    }

    pub fn bytes_per_voxel(self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 | DataType::U16 => 2,
            DataType::I32 | DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }

    /// Lower-case name used on the backend wire (`"int16"`, `"float32"`, ...).
    pub fn name(self) -> &'static str {
        match self {
            DataType::U8 => "uint8",
            DataType::I16 => "int16",
            DataType::I32 => "int32",
            DataType::U16 => "uint16",
            DataType::F32 => "float32",
            DataType::F64 => "float64",
        }
    }
}

/// Voxel storage in the file's native type, x fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    I32(Vec<i32>),
    U16(Vec<u16>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl VoxelData {
    pub fn datatype(&self) -> DataType {
        match self {
            VoxelData::U8(_) => DataType::U8,
            VoxelData::I16(_) => DataType::I16,
            VoxelData::I32(_) => DataType::I32,
            VoxelData::U16(_) => DataType::U16,
            VoxelData::F32(_) => DataType::F32,
            VoxelData::F64(_) => DataType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VoxelData::U8(v) => v.len(),
            VoxelData::I16(v) => v.len(),
            VoxelData::I32(v) => v.len(),
            VoxelData::U16(v) => v.len(),
            VoxelData::F32(v) => v.len(),
            VoxelData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stored (unscaled) value at linear index `i`.
    pub fn raw(&self, i: usize) -> f64 {
        match self {
            VoxelData::U8(v) => f64::from(v[i]),
            VoxelData::I16(v) => f64::from(v[i]),
            VoxelData::I32(v) => f64::from(v[i]),
            VoxelData::U16(v) => f64::from(v[i]),
            VoxelData::F32(v) => f64::from(v[i]),
            VoxelData::F64(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub shape: [usize; 3],
    pub spacing: [f32; 3],
    pub data: VoxelData,
    pub scl_slope: f32,
    pub scl_inter: f32,
}

impl Volume {
    pub fn new(shape: [usize; 3], spacing: [f32; 3], data: VoxelData) -> Result<Self, NiftiError> {
        let volume = Volume {
            shape,
            spacing,
            data,
            scl_slope: 0.0,
            scl_inter: 0.0,
        };
        volume.validate()?;
        Ok(volume)
    }

    pub fn validate(&self) -> Result<(), NiftiError> {
        if self.shape.contains(&0) {
            return Err(NiftiError::InvalidVolume(format!(
                "shape {:?} has a zero dimension",
                self.shape
            )));
        }
        if self.shape.iter().any(|&n| n > i16::MAX as usize) {
            return Err(NiftiError::InvalidVolume(format!(
                "shape {:?} exceeds NIfTI-1 limits",
                self.shape
            )));
        }
        if self.spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(NiftiError::InvalidVolume(format!(
                "spacing {:?} must be positive",
                self.spacing
            )));
        }
        if self.data.len() != self.voxel_count() {
            return Err(NiftiError::InvalidVolume(format!(
                "data length {} does not match shape {:?}",
                self.data.len(),
                self.shape
            )));
        }
        Ok(())
    }

    pub fn datatype(&self) -> DataType {
        self.data.datatype()
    }

    pub fn voxel_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.shape[0] * (y + self.shape[1] * z)
    }

    fn scale(&self, raw: f64) -> f64 {
        if self.scl_slope != 0.0 && self.scl_slope.is_finite() {
            raw * f64::from(self.scl_slope) + f64::from(self.scl_inter)
        } else {
            raw
        }
    }

    /// Scaled value at voxel `(x, y, z)`.
    pub fn value(&self, x: usize, y: usize, z: usize) -> f64 {
        self.scale(self.data.raw(self.index(x, y, z)))
    }

    /// All scaled values in storage order.
    pub fn scaled(&self) -> Vec<f64> {
        (0..self.data.len()).map(|i| self.scale(self.data.raw(i))).collect()
    }
}

/// Integer label map with the same geometry as its image.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    pub shape: [usize; 3],
    pub spacing: [f32; 3],
    /// Labels in storage order (x fastest).
    pub labels: Vec<u32>,
}

impl LabelVolume {
    pub fn from_volume(volume: &Volume) -> Result<Self, NiftiError> {
        let labels = volume
            .scaled()
            .into_iter()
            .map(|v| {
                if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                    Ok(v as u32)
                } else {
                    Err(NiftiError::BadLabelValue(v))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LabelVolume {
            shape: volume.shape,
            spacing: volume.spacing,
            labels,
        })
    }

    pub fn label(&self, x: usize, y: usize, z: usize) -> u32 {
        self.labels[x + self.shape[0] * (y + self.shape[1] * z)]
    }
}

/// Foreground mask of one label id. An absent label yields an empty mask.
pub fn binarize_label(labels: &LabelVolume, label_id: u32) -> Mask3D {
    let [nx, ny, nz] = labels.shape;
    let mut mask = Mask3D::new([nx, ny, nz]);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if labels.label(x, y, z) == label_id {
                    mask.set(x, y, z, true);
                }
            }
        }
    }
    mask
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume, NiftiError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| NiftiError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_nifti(&bytes).map_err(|e| match e {
        NiftiError::Io { source, .. } => NiftiError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parse a NIfTI-1 image from memory; gzip input is detected by its magic bytes.
pub fn decode_nifti(bytes: &[u8]) -> Result<Volume, NiftiError> {
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        let mut raw = Vec::new();
        MultiGzDecoder::new(bytes)
            .read_to_end(&mut raw)
            .map_err(|source| NiftiError::Io {
                path: PathBuf::new(),
                source,
            })?;
        return decode_raw(&raw);
    }
    decode_raw(bytes)
}

struct Fields<'a> {
    bytes: &'a [u8],
    swap: bool,
}

impl Fields<'_> {
    fn i16(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        if self.swap {
            i16::from_be_bytes(b)
        } else {
            i16::from_le_bytes(b)
        }
    }

    fn f32(&self, off: usize) -> f32 {
        let b: [u8; 4] = self.bytes[off..off + 4].try_into().unwrap();
        if self.swap {
            f32::from_be_bytes(b)
        } else {
            f32::from_le_bytes(b)
        }
    }
}

fn decode_raw(bytes: &[u8]) -> Result<Volume, NiftiError> {
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::TruncatedFile {
            needed: HEADER_SIZE,
            available: bytes.len(),
        });
    }
    let le_sizeof = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if le_sizeof == NIFTI2_HEADER_SIZE || le_sizeof.swap_bytes() == NIFTI2_HEADER_SIZE {
        return Err(NiftiError::UnsupportedFormat("NIfTI-2 headers are not supported"));
    }

    // dim[0] must lie in 1..=7 in the file's byte order.
    let dim0 = i16::from_le_bytes([bytes[40], bytes[41]]);
    let swap = !(1..=7).contains(&dim0);
    let f = Fields { bytes, swap };
    if !(1..=7).contains(&f.i16(40)) {
        return Err(NiftiError::InvalidHeader(format!(
            "dim[0] = {} in either byte order",
            dim0
        )));
    }

    let magic: [u8; 4] = bytes[344..348].try_into().unwrap();
    if &magic == MAGIC_PAIR {
        return Err(NiftiError::UnsupportedFormat(
            "header/image file pairs (.hdr/.img) are not supported",
        ));
    }
    if &magic != MAGIC_SINGLE {
        return Err(NiftiError::BadMagic(magic));
    }

    let ndim = f.i16(40) as usize;
    let dims: Vec<i64> = (1..=7).map(|i| i64::from(f.i16(40 + 2 * i))).collect();
    let used = &dims[..ndim];
    if used.iter().any(|&d| d < 1) {
        return Err(NiftiError::InvalidHeader(format!(
            "non-positive dimension in {:?}",
            used
        )));
    }
    if used.iter().skip(3).any(|&d| d != 1) {
        return Err(NiftiError::Not3D(used.to_vec()));
    }
    let mut shape = [1usize; 3];
    for (i, &d) in used.iter().take(3).enumerate() {
        shape[i] = d as usize;
    }

    let datatype = DataType::from_code(f.i16(70))?;
    let mut spacing = [1.0f32; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        let v = f.f32(76 + 4 * (i + 1)).abs();
        if v.is_finite() && v > 0.0 {
            *s = v;
        }
    }
    let vox_offset = f.f32(108);
    if !vox_offset.is_finite() || vox_offset < HEADER_SIZE as f32 {
        return Err(NiftiError::InvalidHeader(format!("vox_offset {}", vox_offset)));
    }
    let vox_offset = vox_offset as usize;
    let scl_slope = f.f32(112);
    let scl_inter = f.f32(116);

    let count = shape.iter().product::<usize>();
    let needed = vox_offset + count * datatype.bytes_per_voxel();
    if bytes.len() < needed {
        return Err(NiftiError::TruncatedFile {
            needed,
            available: bytes.len(),
        });
    }
    let raw = &bytes[vox_offset..needed];
    let data = decode_voxels(raw, datatype, swap);

    Ok(Volume {
        shape,
        spacing,
        data,
        scl_slope: if scl_slope.is_finite() { scl_slope } else { 0.0 },
        scl_inter: if scl_inter.is_finite() { scl_inter } else { 0.0 },
    })
}

macro_rules! decode_as {
    ($raw:expr, $ty:ty, $swap:expr) => {{
        const N: usize = std::mem::size_of::<$ty>();
        $raw.chunks_exact(N)
            .map(|c| {
                let b: [u8; N] = c.try_into().unwrap();
                if $swap {
                    <$ty>::from_be_bytes(b)
                } else {
                    <$ty>::from_le_bytes(b)
                }
            })
            .collect::<Vec<$ty>>()
    }};
}

fn decode_voxels(raw: &[u8], datatype: DataType, swap: bool) -> VoxelData {
    match datatype {
        DataType::U8 => VoxelData::U8(raw.to_vec()),
        DataType::I16 => VoxelData::I16(decode_as!(raw, i16, swap)),
        DataType::I32 => VoxelData::I32(decode_as!(raw, i32, swap)),
        DataType::U16 => VoxelData::U16(decode_as!(raw, u16, swap)),
        DataType::F32 => VoxelData::F32(decode_as!(raw, f32, swap)),
        DataType::F64 => VoxelData::F64(decode_as!(raw, f64, swap)),
    }
}

/// Serialize to an uncompressed little-endian single-file NIfTI-1 image.
pub fn encode_nifti(volume: &Volume) -> Result<Vec<u8>, NiftiError> {
    volume.validate()?;
    let datatype = volume.datatype();
    let mut out = vec![0u8; VOX_OFFSET];
    let put_i16 = |out: &mut Vec<u8>, off: usize, v: i16| out[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_i32 = |out: &mut Vec<u8>, off: usize, v: i32| out[off..off + 4].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |out: &mut Vec<u8>, off: usize, v: f32| out[off..off + 4].copy_from_slice(&v.to_le_bytes());

    put_i32(&mut out, 0, HEADER_SIZE as i32);
    out[38] = b'r'; // regular
    put_i16(&mut out, 40, 3);
    for i in 0..7 {
        let d = if i < 3 { volume.shape[i] as i16 } else { 1 };
        put_i16(&mut out, 42 + 2 * i, d);
    }
    put_i16(&mut out, 70, datatype.code());
    put_i16(&mut out, 72, (datatype.bytes_per_voxel() * 8) as i16);
    put_f32(&mut out, 76, 1.0); // qfac
    for i in 0..3 {
        put_f32(&mut out, 80 + 4 * i, volume.spacing[i]);
    }
    for i in 3..7 {
        put_f32(&mut out, 80 + 4 * i, 1.0);
    }
    put_f32(&mut out, 108, VOX_OFFSET as f32);
    put_f32(&mut out, 112, volume.scl_slope);
    put_f32(&mut out, 116, volume.scl_inter);
    out[123] = 2; // xyzt_units: millimetres
    out[344..348].copy_from_slice(MAGIC_SINGLE);
    // bytes 348..352 stay zero: no extensions

    out.reserve(volume.voxel_count() * datatype.bytes_per_voxel());
    match &volume.data {
        VoxelData::U8(v) => out.extend_from_slice(v),
        VoxelData::I16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VoxelData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VoxelData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VoxelData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VoxelData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    Ok(out)
}

/// Write a volume; paths ending in `.gz` are gzip-compressed.
pub fn write_nifti(volume: &Volume, path: impl AsRef<Path>) -> Result<(), NiftiError> {
    let path = path.as_ref();
    let bytes = encode_nifti(volume)?;
    let io_err = |source| NiftiError::Io {
        path: path.to_path_buf(),
        source,
    };
    let gz = path.extension().map(|e| e.eq_ignore_ascii_case("gz")).unwrap_or(false);
    if gz {
        let file = fs::File::create(path).map_err(io_err)?;
        let mut enc = GzEncoder::new(std::io::BufWriter::new(file), Compression::default());
        enc.write_all(&bytes).map_err(io_err)?;
        enc.finish().map_err(io_err)?.flush().map_err(io_err)?;
    } else {
        fs::write(path, &bytes).map_err(io_err)?;
    }
    Ok(())
}
