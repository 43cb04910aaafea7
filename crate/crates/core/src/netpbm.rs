//! Binary netpbm rasters: PGM (P5) grayscale and PPM (P6) color, 8-bit.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetpbmError {
    #[error("expected magic {expected}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported maxval {0} (must be 1..=255)")]
    Maxval(u32),
    #[error("pixel data truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer does not match {width}x{height}");
        Self { width, height, pixels }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major `[r, g, b]` triples.
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer does not match {width}x{height}");
        Self { width, height, pixels }
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().flatten());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, NetpbmError> {
    let (header, data) = parse_header(bytes, "P5")?;
    let pixels = scale_samples(take(data, header.width * header.height)?, header.maxval);
    Ok(GrayImage::new(header.width, header.height, pixels))
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, NetpbmError> {
    let (header, data) = parse_header(bytes, "P6")?;
    let samples = scale_samples(take(data, 3 * header.width * header.height)?, header.maxval);
    let pixels = samples.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(RgbImage::new(header.width, header.height, pixels))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage, NetpbmError> {
    decode_pgm(&read(path.as_ref())?)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage, NetpbmError> {
    decode_ppm(&read(path.as_ref())?)
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), NetpbmError> {
    write(path.as_ref(), &encode_pgm(img))
}

pub fn write_ppm(img: &RgbImage, path: impl AsRef<Path>) -> Result<(), NetpbmError> {
    write(path.as_ref(), &encode_ppm(img))
}

fn read(path: &Path) -> Result<Vec<u8>, NetpbmError> {
    fs::read(path).map_err(|source| NetpbmError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), NetpbmError> {
    fs::write(path, bytes).map_err(|source| NetpbmError::Io { path: path.display().to_string(), source })
}

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
}

fn parse_header<'a>(bytes: &'a [u8], magic: &'static str) -> Result<(Header, &'a [u8]), NetpbmError> {
    if bytes.len() < 2 || &bytes[..2] != magic.as_bytes() {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(NetpbmError::BadMagic { expected: magic, found });
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        // whitespace and `#` comments may separate header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(NetpbmError::BadHeader(format!("expected a number at byte {start}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text.parse().map_err(|_| NetpbmError::BadHeader(format!("number {text} out of range")))?;
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(NetpbmError::BadHeader("missing whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(NetpbmError::Maxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(NetpbmError::BadHeader(format!("empty image {width}x{height}")));
    }
    Ok((Header { width: width as usize, height: height as usize, maxval }, &bytes[pos..]))
}

fn take(data: &[u8], needed: usize) -> Result<&[u8], NetpbmError> {
    data.get(..needed).ok_or(NetpbmError::Truncated { needed, available: data.len() })
}

fn scale_samples(samples: &[u8], maxval: u32) -> Vec<u8> {
    if maxval == 255 {
        return samples.to_vec();
    }
    samples
        .iter()
        .map(|&s| ((u32::from(s).min(maxval) * 255 + maxval / 2) / maxval) as u8)
        .collect()
}
