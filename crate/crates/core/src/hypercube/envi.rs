//! ENVI header + raw binary cube I/O.
//!
//! Cubes are written as 32-bit little-endian floats (data type 4). Reading
//! also accepts data type 5 (f64) and big-endian payloads.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use super::{CubeError, HyperCube};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum EnviError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("header does not start with the ENVI magic line")]
    MissingMagic,
    #[error("header key `{0}` is required but missing")]
    MissingKey(&'static str),
    #[error("header key `{0}` appears more than once")]
    DuplicateKey(String),
    #[error("header key `{key}` has invalid value `{value}`")]
    InvalidValue { key: String, value: String },
    #[error("unterminated `{{` block for header key `{0}`")]
    Unterminated(String),
    #[error("unsupported ENVI data type {0} (supported: 4 = f32, 5 = f64)")]
    UnsupportedDataType(u32),
    #[error("no raw data file found next to {0}")]
    MissingData(PathBuf),
    #[error("raw payload holds {actual} bytes but the header declares {expected}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error(transparent)]
    Cube(#[from] CubeError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EnviError + '_ {
    move |source| EnviError::Io { path: path.to_path_buf(), source }
}

/// On-disk sample ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interleave {
    /// band sequential
    #[default]
    Bsq,
    /// band interleaved by line
    Bil,
    /// band interleaved by pixel
    Bip,
}

impl Interleave {
    pub const ALL: [Interleave; 3] = [Interleave::Bsq, Interleave::Bil, Interleave::Bip];

    /// Flat on-disk offset (in samples) of `(x, y, band)`.
    #[inline]
    fn offset(self, x: usize, y: usize, b: usize, samples: usize, lines: usize, bands: usize) -> usize {
        match self {
            Interleave::Bsq => (b * lines + y) * samples + x,
            Interleave::Bil => (y * bands + b) * samples + x,
            Interleave::Bip => (y * samples + x) * bands + b,
        }
    }
}

impl fmt::Display for Interleave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interleave::Bsq => "bsq",
            Interleave::Bil => "bil",
            Interleave::Bip => "bip",
        })
    }
}

impl FromStr for Interleave {
    type Err = EnviError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bsq" => Ok(Interleave::Bsq),
            "bil" => Ok(Interleave::Bil),
            "bip" => Ok(Interleave::Bip),
            _ => Err(EnviError::InvalidValue { key: "interleave".into(), value: s.into() }),
        }
    }
}

/// Parsed subset of an ENVI header.
#[derive(Debug, Clone, PartialEq)]
pub struct EnviHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub header_offset: u64,
    pub data_type: u32,
    pub interleave: Interleave,
    pub big_endian: bool,
    pub wavelength: Vec<f64>,
}

impl EnviHeader {
    fn bytes_per_sample(&self) -> usize {
        if self.data_type == 5 {
            8
        } else {
            4
        }
    }

    pub fn parse(text: &str) -> Result<Self, EnviError> {
        let fields = parse_fields(text)?;
        let get = |key: &'static str| fields.get(key).ok_or(EnviError::MissingKey(key));
        let number = |key: &'static str| -> Result<usize, EnviError> {
            let v = get(key)?;
            v.trim().parse().map_err(|_| EnviError::InvalidValue { key: key.into(), value: v.clone() })
        };
        let samples = number("samples")?;
        let lines = number("lines")?;
        let bands = number("bands")?;
        let data_type = number("data type")? as u32;
        if data_type != 4 && data_type != 5 {
            return Err(EnviError::UnsupportedDataType(data_type));
        }
        let header_offset = match fields.get("header offset") {
            Some(_) => number("header offset")? as u64,
            None => 0,
        };
        let big_endian = match fields.get("byte order") {
            Some(_) => match number("byte order")? {
                0 => false,
                1 => true,
                _ => {
                    return Err(EnviError::InvalidValue {
                        key: "byte order".into(),
                        value: fields["byte order"].clone(),
                    })
                }
            },
            None => false,
        };
        let interleave: Interleave = get("interleave")?.parse()?;
        let raw = get("wavelength")?;
        let wavelength = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| EnviError::InvalidValue { key: "wavelength".into(), value: s.into() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { samples, lines, bands, header_offset, data_type, interleave, big_endian, wavelength })
    }

    pub fn render(&self) -> String {
        let wl: Vec<String> = self.wavelength.iter().map(|w| format!("{w}")).collect();
        format!(
            "ENVI\n\
             description = {{hsi-acs cube}}\n\
             samples = {}\n\
             lines = {}\n\
             bands = {}\n\
             header offset = {}\n\
             file type = ENVI Standard\n\
             data type = {}\n\
             interleave = {}\n\
             byte order = {}\n\
             wavelength units = cm-1\n\
             wavelength = {{{}}}\n",
            self.samples,
            self.lines,
            self.bands,
            self.header_offset,
            self.data_type,
            self.interleave,
            u8::from(self.big_endian),
            wl.join(", ")
        )
    }
}

/// Splits `key = value` lines; `{...}` values may span lines. Keys are lowercased.
fn parse_fields(text: &str) -> Result<BTreeMap<String, String>, EnviError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first.trim() == "ENVI" => {}
        _ => return Err(EnviError::MissingMagic),
    }
    let mut fields = BTreeMap::new();
    while let Some(line) = lines.next() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let key = key.trim().to_ascii_lowercase();
        let mut value = value.trim().to_string();
        if let Some(rest) = value.strip_prefix('{') {
            let mut body = rest.to_string();
            while !body.contains('}') {
                match lines.next() {
                    Some(next) => {
                        body.push(' ');
                        body.push_str(next.trim());
                    }
                    None => return Err(EnviError::Unterminated(key)),
                }
            }
            let end = body.find('}').expect("closing brace present");
            value = body[..end].trim().to_string();
        }
        if fields.insert(key.clone(), value).is_some() {
            return Err(EnviError::DuplicateKey(key));
        }
    }
    Ok(fields)
}

fn data_candidates(header_path: &Path) -> Vec<PathBuf> {
    let stem = header_path.with_extension("");
    let mut out = vec![stem.with_extension("img"), stem.with_extension("raw"), stem.with_extension("dat")];
    // `cube.img.hdr` style headers point at `cube.img`
    if stem != header_path {
        out.push(stem);
    }
    out
}

/// Data file written next to a header by [`save_envi`].
pub fn data_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("img")
}

/// Loads a cube, normalizing any interleave to the in-memory band-major layout.
pub fn load_envi<T: Real>(header_path: impl AsRef<Path>) -> Result<HyperCube<T>, EnviError> {
    let header_path = header_path.as_ref();
    let text = fs::read_to_string(header_path).map_err(io_err(header_path))?;
    let header = EnviHeader::parse(&text)?;
    if header.wavelength.len() != header.bands {
        return Err(CubeError::AxisLength { expected: header.bands, actual: header.wavelength.len() }.into());
    }
    let data_file = data_candidates(header_path)
        .into_iter()
        .find(|p| p.is_file())
        .ok_or_else(|| EnviError::MissingData(header_path.to_path_buf()))?;
    let bytes = fs::read(&data_file).map_err(io_err(&data_file))?;

    let (samples, lines, bands) = (header.samples, header.lines, header.bands);
    let count = samples * lines * bands;
    let width = header.bytes_per_sample();
    let expected = (count * width) as u64;
    let available = (bytes.len() as u64).saturating_sub(header.header_offset);
    if available != expected {
        return Err(EnviError::SizeMismatch { expected, actual: available });
    }
    let payload = &bytes[header.header_offset as usize..];
    let sample = |i: usize| -> T {
        let raw = &payload[i * width..(i + 1) * width];
        match (header.data_type, header.big_endian) {
            (4, false) => T::from_f32_exact(f32::from_le_bytes(raw.try_into().expect("4 bytes"))),
            (4, true) => T::from_f32_exact(f32::from_be_bytes(raw.try_into().expect("4 bytes"))),
            (_, false) => T::lit(f64::from_le_bytes(raw.try_into().expect("8 bytes"))),
            (_, true) => T::lit(f64::from_be_bytes(raw.try_into().expect("8 bytes"))),
        }
    };

    let mut values = Vec::with_capacity(count);
    for b in 0..bands {
        for y in 0..lines {
            for x in 0..samples {
                values.push(sample(header.interleave.offset(x, y, b, samples, lines, bands)));
            }
        }
    }
    let wavenumbers = header.wavelength.iter().map(|&w| T::lit(w)).collect();
    Ok(HyperCube::new(samples, lines, wavenumbers, values)?)
}

/// Writes `<path>.hdr` and `<path>.img` (f32, little-endian) and returns the header path.
///
/// `path` may be given with or without the `.hdr` extension.
pub fn save_envi<T: Real>(
    cube: &HyperCube<T>,
    path: impl AsRef<Path>,
    interleave: Interleave,
) -> Result<PathBuf, EnviError> {
    let path = path.as_ref();
    let header_path =
        if path.extension().is_some_and(|e| e == "hdr") { path.to_path_buf() } else { path.with_extension("hdr") };
    let (samples, lines, bands) = (cube.width(), cube.height(), cube.bands());
    let header = EnviHeader {
        samples,
        lines,
        bands,
        header_offset: 0,
        data_type: 4,
        interleave,
        big_endian: false,
        wavelength: cube.wavenumbers().iter().map(|w| w.as_f64()).collect(),
    };
    fs::write(&header_path, header.render()).map_err(io_err(&header_path))?;

    let mut disk = vec![0f32; samples * lines * bands];
    for b in 0..bands {
        for y in 0..lines {
            for x in 0..samples {
                disk[interleave.offset(x, y, b, samples, lines, bands)] = cube.get(x, y, b).as_f32();
            }
        }
    }
    let raw_path = data_path(&header_path);
    let file = fs::File::create(&raw_path).map_err(io_err(&raw_path))?;
    let mut out = BufWriter::new(file);
    for v in disk {
        out.write_all(&v.to_le_bytes()).map_err(io_err(&raw_path))?;
    }
    out.flush().map_err(io_err(&raw_path))?;
    Ok(header_path)
}
