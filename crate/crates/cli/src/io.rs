//! File formats: binary PGM (P5) frames, `frame_0001.pgm` sequences with
//! optional raw `f32` sidecars, and CTGE exposure files.
//!
//! CTGE layout (little-endian):
//!
//! | offset | size   | field                         |
//! |--------|--------|-------------------------------|
//! | 0      | 4      | magic `CTGE`                  |
//! | 4      | 2      | version (1)                   |
//! | 6      | 4      | side `m`                      |
//! | 10     | 4·m²   | `f32` values, row-major       |
//! | end-4  | 4      | CRC32 of every preceding byte |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("no frames named frame_0001.pgm in {0}")]
    NoFrames(PathBuf),
    #[error("{path}: frame is {actual:?}, expected {expected:?}")]
    FrameShape {
        path: PathBuf,
        expected: (usize, usize),
        actual: (usize, usize),
    },
}

pub type IoResult<T> = std::result::Result<T, IoError>;

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> IoResult<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.map_err(fs_err(path))
}

pub fn create_dir(path: &Path) -> IoResult<()> {
    fs::create_dir_all(path).map_err(fs_err(path))
}

fn read(path: &Path) -> IoResult<Vec<u8>> {
    fs::read(path).map_err(fs_err(path))
}

/// Bit depth of a written PGM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

impl PgmDepth {
    fn maxval(self) -> u32 {
        match self {
            PgmDepth::Eight => 255,
            PgmDepth::Sixteen => 65535,
        }
    }
}

/// Normalized `[0, 1]` image; values are clamped before quantization.
pub fn encode_pgm(image: &Array2<f64>, depth: PgmDepth) -> Vec<u8> {
    let (h, w) = image.dim();
    let maxval = depth.maxval();
    let mut out = format!("P5\n{w} {h}\n{maxval}\n").into_bytes();
    for &v in image.iter() {
        let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        let q = (v * maxval as f64).round() as u32;
        match depth {
            PgmDepth::Eight => out.push(q as u8),
            PgmDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

fn header_token(bytes: &[u8], pos: &mut usize) -> Option<u32> {
    loop {
        match bytes.get(*pos)? {
            b'#' => {
                while *bytes.get(*pos)? != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|c| c.is_ascii_digit()) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

/// Decodes a P5 image to `value / maxval`.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> IoResult<Array2<f64>> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(format_err(path, "not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2;
    let mut field = |name: &str| {
        header_token(bytes, &mut pos).ok_or_else(|| format_err(path, format!("bad {name}")))
    };
    let w = field("width")? as usize;
    let h = field("height")? as usize;
    let maxval = field("maxval")?;
    if !(1..=65535).contains(&maxval) {
        return Err(format_err(path, format!("maxval {maxval} out of range")));
    }
    if !bytes.get(pos).is_some_and(|c| c.is_ascii_whitespace()) {
        return Err(format_err(path, "missing whitespace after header"));
    }
    let data = &bytes[pos + 1..];
    let bpp = if maxval < 256 { 1 } else { 2 };
    if data.len() < w * h * bpp {
        return Err(format_err(
            path,
            format!("truncated: {} bytes of pixel data, need {}", data.len(), w * h * bpp),
        ));
    }
    let scale = maxval as f64;
    let values = (0..w * h).map(|i| {
        let q = if bpp == 1 {
            data[i] as u32
        } else {
            u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as u32
        };
        q.min(maxval) as f64 / scale
    });
    Ok(Array2::from_shape_vec((h, w), values.collect()).expect("w*h values"))
}

pub fn read_pgm(path: &Path) -> IoResult<Array2<f64>> {
    decode_pgm(&read(path)?, path)
}

pub fn write_pgm(path: &Path, image: &Array2<f64>, depth: PgmDepth) -> IoResult<()> {
    write_atomic(path, &encode_pgm(image, depth))
}

pub fn frame_name(k: usize, ext: &str) -> String {
    format!("frame_{:04}.{ext}", k + 1)
}

/// Reads `frame_0001.pgm`, `frame_0002.pgm`, ... until the first gap. A
/// `frame_XXXX.f32` sidecar with the right length replaces the quantized
/// PGM values.
pub fn read_sequence(dir: &Path) -> IoResult<Array3<f64>> {
    let mut frames: Vec<Array2<f64>> = Vec::new();
    loop {
        let path = dir.join(frame_name(frames.len(), "pgm"));
        if !path.exists() {
            break;
        }
        let mut img = read_pgm(&path)?;
        let side = dir.join(frame_name(frames.len(), "f32"));
        if side.exists() {
            img = read_f32_frame(&side, img.dim())?;
        }
        if let Some(first) = frames.first() {
            if first.dim() != img.dim() {
                return Err(IoError::FrameShape {
                    path,
                    expected: first.dim(),
                    actual: img.dim(),
                });
            }
        }
        frames.push(img);
    }
    let Some(first) = frames.first() else {
        return Err(IoError::NoFrames(dir.to_path_buf()));
    };
    let (h, w) = first.dim();
    let mut out = Array3::zeros((frames.len(), h, w));
    for (mut dst, f) in out.outer_iter_mut().zip(&frames) {
        dst.assign(f);
    }
    Ok(out)
}

/// Writes every frame as PGM, plus raw `f32` sidecars when `sidecar` is set.
pub fn write_sequence(
    dir: &Path,
    frames: &Array3<f64>,
    depth: PgmDepth,
    sidecar: bool,
) -> IoResult<()> {
    create_dir(dir)?;
    for (k, f) in frames.outer_iter().enumerate() {
        let f = f.to_owned();
        write_pgm(&dir.join(frame_name(k, "pgm")), &f, depth)?;
        if sidecar {
            write_atomic(&dir.join(frame_name(k, "f32")), &encode_f32(f.iter().copied()))?;
        }
    }
    Ok(())
}

fn encode_f32(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| (v as f32).to_le_bytes()).collect()
}

fn decode_f32(bytes: &[u8]) -> impl Iterator<Item = f64> + '_ {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
}

/// Headerless little-endian `f32` frame of a known shape.
pub fn read_f32_frame(path: &Path, dim: (usize, usize)) -> IoResult<Array2<f64>> {
    let bytes = read(path)?;
    if bytes.len() != 4 * dim.0 * dim.1 {
        return Err(format_err(
            path,
            format!("{} bytes, expected {} for {dim:?}", bytes.len(), 4 * dim.0 * dim.1),
        ));
    }
    Ok(Array2::from_shape_vec(dim, decode_f32(&bytes).collect()).expect("length checked"))
}

const CTGE_MAGIC: &[u8; 4] = b"CTGE";
const CTGE_VERSION: u16 = 1;
const CTGE_HEADER: usize = 10;

pub fn encode_exposure(values: &Array2<f64>) -> Vec<u8> {
    let (h, w) = values.dim();
    assert_eq!(h, w, "exposure must be square");
    let mut out = Vec::with_capacity(CTGE_HEADER + 4 * h * w + 4);
    out.extend_from_slice(CTGE_MAGIC);
    out.extend_from_slice(&CTGE_VERSION.to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend(encode_f32(values.iter().copied()));
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_exposure(bytes: &[u8], path: &Path) -> IoResult<Array2<f64>> {
    if bytes.len() < CTGE_HEADER + 4 {
        return Err(format_err(path, "truncated exposure header"));
    }
    if &bytes[..4] != CTGE_MAGIC {
        return Err(format_err(path, "not an exposure file (bad magic)"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CTGE_VERSION {
        return Err(format_err(path, format!("unsupported exposure version {version}")));
    }
    let m = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let expected = m
        .checked_mul(m)
        .and_then(|p| p.checked_mul(4))
        .and_then(|p| p.checked_add(CTGE_HEADER + 4));
    if expected != Some(bytes.len()) {
        return Err(format_err(
            path,
            format!("length {} does not match side {m}", bytes.len()),
        ));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(format_err(path, "checksum mismatch"));
    }
    let values: Vec<f64> = decode_f32(&body[CTGE_HEADER..]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(format_err(path, "non-finite exposure value"));
    }
    Ok(Array2::from_shape_vec((m, m), values).expect("length checked"))
}

pub fn read_exposure(path: &Path) -> IoResult<Array2<f64>> {
    decode_exposure(&read(path)?, path)
}

pub fn write_exposure(path: &Path, values: &Array2<f64>) -> IoResult<()> {
    write_atomic(path, &encode_exposure(values))
}
