//! Minimal single-file NIfTI-1 reader/writer.
//!
//! Scope: magic "n+1\0" only (the two-file ".hdr/.img" pair is rejected),
//! datatypes uint8/int16/int32/float32/float64, gzip detected by its 2-byte
//! prefix on read and by a ".gz" suffix on write. Both endiannesses are read
//! (byte order detected from the dim[0] range); files are always written
//! little-endian. Orientation fields (qform/sform) are carried through
//! verbatim but never interpreted.
//!
//! Vector fields are stored as 5-D images with dim = (nx, ny, nz, 1, 3) and
//! component order x, y, z. Component values use the displacement-field
//! convention: for transformation-kind fields the file holds offsets from
//! the identity map, with the semantic kind tagged in `intent_name`. This
//! keeps write -> read round trips bit-exact for every kind.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::fields::{FieldKind, Grid3, ScalarKind, ScalarVolume, VectorField};

pub const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";
const INTENT_VECTOR: i16 = 1007;

pub const DT_UINT8: i16 = 2;
pub const DT_INT16: i16 = 4;
pub const DT_INT32: i16 = 8;
pub const DT_FLOAT32: i16 = 16;
pub const DT_FLOAT64: i16 = 64;

fn datatype_size(code: i16) -> Result<usize> {
    match code {
        DT_UINT8 => Ok(1),
        DT_INT16 => Ok(2),
        DT_INT32 => Ok(4),
        DT_FLOAT32 => Ok(4),
        DT_FLOAT64 => Ok(8),
        other => Err(Error::UnsupportedDatatype(other)),
    }
}

/// Parsed header fields this crate cares about, plus the orientation block
/// carried through untouched.
#[derive(Debug, Clone)]
pub struct NiftiHeaderView {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub intent_code: i16,
    pub intent_name: [u8; 16],
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub little_endian: bool,
}

impl NiftiHeaderView {
    pub fn ndim(&self) -> usize {
        self.dim[0] as usize
    }

    /// Image dimensions dim[1..=ndim].
    pub fn shape(&self) -> Vec<usize> {
        (1..=self.ndim()).map(|i| self.dim[i] as usize).collect()
    }

    fn element_count(&self) -> Result<usize> {
        let mut n = 1usize;
        for i in 1..=self.ndim() {
            n = n
                .checked_mul(self.dim[i] as usize)
                .ok_or_else(|| Error::InvalidHeader("dimension product overflows".into()))?;
        }
        Ok(n)
    }

    fn intent_name_str(&self) -> &str {
        let end = self.intent_name.iter().position(|&b| b == 0).unwrap_or(16);
        std::str::from_utf8(&self.intent_name[..end]).unwrap_or("")
    }

    /// Spacing from pixdim; non-positive or non-finite entries fall back to
    /// 1.0 (files with zeroed pixdim are common in the wild).
    fn spacing(&self, axis: usize) -> f64 {
        let p = self.pixdim[axis] as f64;
        if p.is_finite() && p > 0.0 {
            p
        } else {
            1.0
        }
    }
}

struct Raw {
    header: NiftiHeaderView,
    data: Vec<f64>,
}

// -------------------------------------------------------------------------
// byte-level helpers

fn rd_i16(buf: &[u8], off: usize, le: bool) -> i16 {
    let b = [buf[off], buf[off + 1]];
    if le { i16::from_le_bytes(b) } else { i16::from_be_bytes(b) }
}

fn rd_i32(buf: &[u8], off: usize, le: bool) -> i32 {
    let b = [buf[off], buf[off + 1], buf[off + 2], buf[off + 3]];
    if le { i32::from_le_bytes(b) } else { i32::from_be_bytes(b) }
}

fn rd_f32(buf: &[u8], off: usize, le: bool) -> f32 {
    f32::from_bits(rd_i32(buf, off, le) as u32)
}

fn wr_i16(buf: &mut [u8], off: usize, v: i16) {
    buf[off..off + 2].copy_from_slice(&v.to_le_bytes());
}

fn wr_i32(buf: &mut [u8], off: usize, v: i32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn wr_f32(buf: &mut [u8], off: usize, v: f32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

// -------------------------------------------------------------------------
// header parse / encode

fn parse_header(buf: &[u8]) -> Result<NiftiHeaderView> {
    if buf.len() < HEADER_SIZE {
        return Err(Error::InvalidHeader(format!(
            "file too short for a header: {} bytes",
            buf.len()
        )));
    }
    // Byte order from the dim[0] range: a valid ndim is 1..=7 in exactly one
    // of the two readings unless the file is garbage.
    let le = match (rd_i16(buf, 40, true), rd_i16(buf, 40, false)) {
        (d, _) if (1..=7).contains(&d) => true,
        (_, d) if (1..=7).contains(&d) => false,
        (d, _) => {
            return Err(Error::InvalidHeader(format!("dim[0] out of range: {d}")));
        }
    };
    let sizeof_hdr = rd_i32(buf, 0, le);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(Error::InvalidHeader(format!("sizeof_hdr is {sizeof_hdr}, expected 348")));
    }
    let magic: [u8; 4] = buf[344..348].try_into().unwrap();
    if &magic == MAGIC_PAIR {
        return Err(Error::UnsupportedFormat(
            "two-file NIfTI (.hdr/.img) is not supported".into(),
        ));
    }
    if &magic != MAGIC_SINGLE {
        return Err(Error::BadMagic(magic));
    }

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = rd_i16(buf, 40 + 2 * i, le);
    }
    let ndim = dim[0] as usize;
    for (i, &d) in dim.iter().enumerate().skip(1).take(ndim) {
        if d < 1 {
            return Err(Error::InvalidHeader(format!("dim[{i}] = {d} is not positive")));
        }
    }
    let datatype = rd_i16(buf, 70, le);
    let elem = datatype_size(datatype)?;
    let bitpix = rd_i16(buf, 72, le);
    if bitpix as usize != elem * 8 {
        return Err(Error::InvalidHeader(format!(
            "bitpix {bitpix} inconsistent with datatype {datatype}"
        )));
    }
    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = rd_f32(buf, 76 + 4 * i, le);
    }
    let vox_offset = rd_f32(buf, 108, le);
    if !vox_offset.is_finite() || vox_offset < HEADER_SIZE as f32 {
        return Err(Error::InvalidHeader(format!("vox_offset {vox_offset} before header end")));
    }
    let mut intent_name = [0u8; 16];
    intent_name.copy_from_slice(&buf[328..344]);

    Ok(NiftiHeaderView {
        dim,
        datatype,
        bitpix,
        pixdim,
        vox_offset,
        scl_slope: rd_f32(buf, 112, le),
        scl_inter: rd_f32(buf, 116, le),
        intent_code: rd_i16(buf, 68, le),
        intent_name,
        qform_code: rd_i16(buf, 252, le),
        sform_code: rd_i16(buf, 254, le),
        quatern: [rd_f32(buf, 256, le), rd_f32(buf, 260, le), rd_f32(buf, 264, le)],
        qoffset: [rd_f32(buf, 268, le), rd_f32(buf, 272, le), rd_f32(buf, 276, le)],
        srow: [
            [rd_f32(buf, 280, le), rd_f32(buf, 284, le), rd_f32(buf, 288, le), rd_f32(buf, 292, le)],
            [rd_f32(buf, 296, le), rd_f32(buf, 300, le), rd_f32(buf, 304, le), rd_f32(buf, 308, le)],
            [rd_f32(buf, 312, le), rd_f32(buf, 316, le), rd_f32(buf, 320, le), rd_f32(buf, 324, le)],
        ],
        little_endian: le,
    })
}

fn encode_header(h: &NiftiHeaderView) -> Vec<u8> {
    let mut buf = vec![0u8; HEADER_SIZE];
    wr_i32(&mut buf, 0, HEADER_SIZE as i32);
    buf[38] = b'r'; // legacy "regular" byte, conventionally set
    for (i, d) in h.dim.iter().enumerate() {
        wr_i16(&mut buf, 40 + 2 * i, *d);
    }
    wr_i16(&mut buf, 68, h.intent_code);
    wr_i16(&mut buf, 70, h.datatype);
    wr_i16(&mut buf, 72, h.bitpix);
    for (i, p) in h.pixdim.iter().enumerate() {
        wr_f32(&mut buf, 76 + 4 * i, *p);
    }
    wr_f32(&mut buf, 108, h.vox_offset);
    wr_f32(&mut buf, 112, h.scl_slope);
    wr_f32(&mut buf, 116, h.scl_inter);
    buf[123] = 2; // xyzt_units: millimetres
    wr_i16(&mut buf, 252, h.qform_code);
    wr_i16(&mut buf, 254, h.sform_code);
    for (i, q) in h.quatern.iter().enumerate() {
        wr_f32(&mut buf, 256 + 4 * i, *q);
    }
    for (i, q) in h.qoffset.iter().enumerate() {
        wr_f32(&mut buf, 268 + 4 * i, *q);
    }
    for (r, row) in h.srow.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            wr_f32(&mut buf, 280 + 16 * r + 4 * c, *v);
        }
    }
    buf[328..344].copy_from_slice(&h.intent_name);
    buf[344..348].copy_from_slice(MAGIC_SINGLE);
    buf
}

fn default_header(grid: &Grid3) -> NiftiHeaderView {
    let (sx, sy, sz) = grid.spacing();
    NiftiHeaderView {
        dim: [3, grid.nx() as i16, grid.ny() as i16, grid.nz() as i16, 1, 1, 1, 1],
        datatype: DT_FLOAT32,
        bitpix: 32,
        pixdim: [1.0, sx as f32, sy as f32, sz as f32, 0.0, 0.0, 0.0, 0.0],
        vox_offset: VOX_OFFSET as f32,
        scl_slope: 1.0,
        scl_inter: 0.0,
        intent_code: 0,
        intent_name: [0; 16],
        qform_code: 0,
        sform_code: 1,
        quatern: [0.0; 3],
        qoffset: [0.0; 3],
        srow: [
            [sx as f32, 0.0, 0.0, 0.0],
            [0.0, sy as f32, 0.0, 0.0],
            [0.0, 0.0, sz as f32, 0.0],
        ],
        little_endian: true,
    }
}

fn set_intent_name(h: &mut NiftiHeaderView, name: &str) {
    h.intent_name = [0; 16];
    let bytes = name.as_bytes();
    let n = bytes.len().min(15);
    h.intent_name[..n].copy_from_slice(&bytes[..n]);
}

// -------------------------------------------------------------------------
// whole-file read / write

fn read_file_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn write_file_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let gz = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("gz"))
        .unwrap_or(false);
    if gz {
        use std::io::Write;
        let file = std::fs::File::create(path)?;
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?;
        Ok(())
    } else {
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

fn read_raw(path: &Path) -> Result<Raw> {
    let bytes = read_file_bytes(path)?;
    let header = parse_header(&bytes)?;
    let count = header.element_count()?;
    let elem = datatype_size(header.datatype)?;
    let payload_len = count
        .checked_mul(elem)
        .ok_or_else(|| Error::InvalidHeader("payload size overflows".into()))?;
    let start = header.vox_offset as usize;
    let available = bytes.len().saturating_sub(start);
    if available < payload_len {
        return Err(Error::TruncatedPayload { expected: payload_len, got: available });
    }
    let payload = &bytes[start..start + payload_len];
    let le = header.little_endian;

    let mut data = vec![0f64; count];
    match header.datatype {
        DT_UINT8 => {
            for (i, v) in data.iter_mut().enumerate() {
                *v = payload[i] as f64;
            }
        }
        DT_INT16 => {
            for (i, v) in data.iter_mut().enumerate() {
                *v = rd_i16(payload, 2 * i, le) as f64;
            }
        }
        DT_INT32 => {
            for (i, v) in data.iter_mut().enumerate() {
                *v = rd_i32(payload, 4 * i, le) as f64;
            }
        }
        DT_FLOAT32 => {
            for (i, v) in data.iter_mut().enumerate() {
                *v = rd_f32(payload, 4 * i, le) as f64;
            }
        }
        DT_FLOAT64 => {
            for (i, v) in data.iter_mut().enumerate() {
                let off = 8 * i;
                let b: [u8; 8] = payload[off..off + 8].try_into().unwrap();
                let bits = if le { u64::from_le_bytes(b) } else { u64::from_be_bytes(b) };
                *v = f64::from_bits(bits);
            }
        }
        other => return Err(Error::UnsupportedDatatype(other)),
    }

    // scl_slope == 0 means "no scaling" per the format; skip the identity
    // transform entirely so raw values survive bit-for-bit.
    let slope = if header.scl_slope == 0.0 { 1.0 } else { header.scl_slope as f64 };
    let inter = header.scl_inter as f64;
    if slope != 1.0 || inter != 0.0 {
        for v in &mut data {
            *v = slope * *v + inter;
        }
    }
    Ok(Raw { header, data })
}

fn encode_payload(data: &[f64], datatype: i16) -> Result<Vec<u8>> {
    let elem = datatype_size(datatype)?;
    let mut out = Vec::with_capacity(data.len() * elem);
    match datatype {
        DT_FLOAT32 => {
            for &v in data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        DT_FLOAT64 => {
            for &v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        DT_INT32 => {
            for &v in data {
                if v < i32::MIN as f64 || v > i32::MAX as f64 {
                    return Err(Error::InvalidArgument(format!(
                        "value {v} does not fit the int32 on-disk type"
                    )));
                }
                out.extend_from_slice(&(v as i32).to_le_bytes());
            }
        }
        other => return Err(Error::UnsupportedDatatype(other)),
    }
    Ok(out)
}

fn write_raw(path: &Path, header: &NiftiHeaderView, data: &[f64]) -> Result<()> {
    let mut bytes = encode_header(header);
    bytes.extend_from_slice(&[0u8; 4]); // no header extensions
    debug_assert_eq!(bytes.len(), VOX_OFFSET);
    bytes.extend_from_slice(&encode_payload(data, header.datatype)?);
    write_file_bytes(path, &bytes)
}

// -------------------------------------------------------------------------
// public volume API

/// Options for [`write_volume_with`].
#[derive(Debug, Clone, Default)]
pub struct WriteOptions {
    /// Store float64 instead of the float32 default (labels always go as
    /// int32 regardless).
    pub float64: bool,
    /// Copy the orientation block (qform/sform) from a previously read
    /// header instead of writing the identity-like default.
    pub orientation_from: Option<NiftiHeaderView>,
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    read_volume_with_header(path).map(|(v, _)| v)
}

pub fn read_volume_with_header(
    path: impl AsRef<Path>,
) -> Result<(ScalarVolume, NiftiHeaderView)> {
    let raw = read_raw(path.as_ref())?;
    let h = &raw.header;
    let ndim = h.ndim();
    if !(3..=5).contains(&ndim) || (4..=ndim).any(|i| h.dim[i] != 1) {
        return Err(Error::InvalidHeader(format!(
            "expected a 3-D volume, got dims {:?}",
            h.shape()
        )));
    }
    let grid = Grid3::with_spacing(
        h.dim[1] as usize,
        h.dim[2] as usize,
        h.dim[3] as usize,
        h.spacing(1),
        h.spacing(2),
        h.spacing(3),
    )
    .map_err(|e| Error::InvalidHeader(e.to_string()))?;
    let kind = match h.intent_name_str() {
        "label" => ScalarKind::Label,
        "jacobian" => ScalarKind::Jacobian,
        _ => ScalarKind::Intensity,
    };
    let vol = ScalarVolume::new(grid, kind, raw.data)?;
    Ok((vol, raw.header))
}

pub fn write_volume(vol: &ScalarVolume, path: impl AsRef<Path>) -> Result<()> {
    write_volume_with(vol, path, &WriteOptions::default())
}

pub fn write_volume_with(
    vol: &ScalarVolume,
    path: impl AsRef<Path>,
    opts: &WriteOptions,
) -> Result<()> {
    let mut h = default_header(vol.grid());
    if let Some(src) = &opts.orientation_from {
        h.qform_code = src.qform_code;
        h.sform_code = src.sform_code;
        h.quatern = src.quatern;
        h.qoffset = src.qoffset;
        h.srow = src.srow;
        h.pixdim[0] = src.pixdim[0];
    }
    h.datatype = match vol.kind() {
        ScalarKind::Label => DT_INT32,
        _ if opts.float64 => DT_FLOAT64,
        _ => DT_FLOAT32,
    };
    h.bitpix = (datatype_size(h.datatype)? * 8) as i16;
    set_intent_name(&mut h, vol.kind().name());
    write_raw(path.as_ref(), &h, vol.data())
}

// -------------------------------------------------------------------------
// public field API

fn kind_from_name(name: &str) -> FieldKind {
    match name {
        "transformation" => FieldKind::Transformation,
        "velocity" => FieldKind::Velocity,
        "curl" => FieldKind::Curl,
        // External displacement fields won't carry a tag; default to the
        // convention the layout implies.
        _ => FieldKind::Displacement,
    }
}

pub fn read_field(path: impl AsRef<Path>) -> Result<VectorField> {
    read_field_with_header(path).map(|(f, _)| f)
}

pub fn read_field_with_header(
    path: impl AsRef<Path>,
) -> Result<(VectorField, NiftiHeaderView)> {
    let raw = read_raw(path.as_ref())?;
    let h = &raw.header;
    if h.ndim() != 5 {
        return Err(Error::InvalidHeader(format!(
            "expected a 5-D vector field, got {} dims",
            h.ndim()
        )));
    }
    if h.dim[4] != 1 || h.dim[5] != 3 {
        return Err(Error::InvalidHeader(format!(
            "vector fields need dim = (nx, ny, nz, 1, 3), got trailing ({}, {})",
            h.dim[4], h.dim[5]
        )));
    }
    let grid = Grid3::with_spacing(
        h.dim[1] as usize,
        h.dim[2] as usize,
        h.dim[3] as usize,
        h.spacing(1),
        h.spacing(2),
        h.spacing(3),
    )
    .map_err(|e| Error::InvalidHeader(e.to_string()))?;
    let n = grid.len();
    let mut data = vec![[0.0; 3]; n];
    for c in 0..3 {
        let block = &raw.data[c * n..(c + 1) * n];
        for (v, &b) in data.iter_mut().zip(block) {
            v[c] = b;
        }
    }
    let kind = kind_from_name(h.intent_name_str());
    Ok((VectorField::from_raw(grid, kind, data)?, raw.header))
}

/// Write a field as float64 (fields are the precision-critical currency of
/// the pipeline; see [`FieldWriteOptions`] to downcast).
pub fn write_field(field: &VectorField, path: impl AsRef<Path>) -> Result<()> {
    write_field_with(field, path, &FieldWriteOptions::default())
}

#[derive(Debug, Clone)]
pub struct FieldWriteOptions {
    pub float64: bool,
}

impl Default for FieldWriteOptions {
    fn default() -> Self {
        Self { float64: true }
    }
}

pub fn write_field_with(
    field: &VectorField,
    path: impl AsRef<Path>,
    opts: &FieldWriteOptions,
) -> Result<()> {
    let grid = field.grid();
    let mut h = default_header(grid);
    h.dim = [5, grid.nx() as i16, grid.ny() as i16, grid.nz() as i16, 1, 3, 1, 1];
    h.datatype = if opts.float64 { DT_FLOAT64 } else { DT_FLOAT32 };
    h.bitpix = (datatype_size(h.datatype)? * 8) as i16;
    h.intent_code = INTENT_VECTOR;
    set_intent_name(&mut h, field.kind().name());
    let n = grid.len();
    let mut flat = vec![0f64; 3 * n];
    for c in 0..3 {
        for (i, v) in field.raw().iter().enumerate() {
            flat[c * n + i] = v[c];
        }
    }
    write_raw(path.as_ref(), &h, &flat)
}

// -------------------------------------------------------------------------
// multi-channel stacks (4-D), used by the feature export

pub(crate) fn write_stack_nd(
    grid: &Grid3,
    channels: &[&[f64]],
    path: &Path,
) -> Result<()> {
    let mut h = default_header(grid);
    h.dim = [4, grid.nx() as i16, grid.ny() as i16, grid.nz() as i16, channels.len() as i16, 1, 1, 1];
    h.datatype = DT_FLOAT32;
    h.bitpix = 32;
    set_intent_name(&mut h, "featurestack");
    let n = grid.len();
    let mut flat = Vec::with_capacity(n * channels.len());
    for ch in channels {
        if ch.len() != n {
            return Err(Error::InvalidArgument("channel length mismatch".into()));
        }
        flat.extend_from_slice(ch);
    }
    write_raw(path, &h, &flat)
}

pub(crate) fn read_stack_nd(path: &Path) -> Result<(Grid3, Vec<Vec<f64>>)> {
    let raw = read_raw(path)?;
    let h = &raw.header;
    if h.ndim() != 4 {
        return Err(Error::InvalidHeader(format!(
            "expected a 4-D stack, got {} dims",
            h.ndim()
        )));
    }
    let grid = Grid3::with_spacing(
        h.dim[1] as usize,
        h.dim[2] as usize,
        h.dim[3] as usize,
        h.spacing(1),
        h.spacing(2),
        h.spacing(3),
    )
    .map_err(|e| Error::InvalidHeader(e.to_string()))?;
    let n = grid.len();
    let nch = h.dim[4] as usize;
    let channels = (0..nch).map(|c| raw.data[c * n..(c + 1) * n].to_vec()).collect();
    Ok((grid, channels))
}
