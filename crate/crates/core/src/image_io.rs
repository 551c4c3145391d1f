//! Raster and flow-field types, plus PNG / binary PPM / Middlebury `.flo` codecs.
//!
//! Images are kept as 64-bit float RGB in the 8-bit range `[0, 255]`, stored
//! interleaved and row-major: sample `c` of pixel `(x, y)` lives at
//! `3 * (y * width + x) + c`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};

/// Number of colour channels carried by [`ImageF`].
pub const CHANNELS: usize = 3;

/// Magic float at the start of every Middlebury `.flo` file.
pub const FLO_MAGIC: f32 = 202021.25;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Floating-point RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageF {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * CHANNELS {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} RGB image needs {} samples, got {}",
                width,
                height,
                width * height * CHANNELS,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample {bad}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height * CHANNELS])
    }

    /// Builds an image by evaluating `f(x, y)` for each pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = CHANNELS * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn same_dims(&self, other: &ImageF) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Samples quantized the way [`save_image`] writes them.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }
}

/// Clamp to `[0, 255]`, then round half up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 255.0) + 0.5).floor() as u8
}

/// Dense per-pixel displacement field, `u` horizontal and `v` vertical, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "flow dimensions must be positive, got {width}x{height}"
            )));
        }
        let n = width * height;
        if u.len() != n || v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} flow needs {n} entries per component, got u={} v={}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(&v).any(|d| !d.is_finite()) {
            return Err(Error::InvalidInput("non-finite flow vector".into()));
        }
        Ok(Self {
            width,
            height,
            u,
            v,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Displacement `(u, v)` at pixel `(x, y)`.
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }
}

/// Zero displacement everywhere: positions stay on the pixel grid.
pub fn identity_flow(width: usize, height: usize) -> Result<FlowField> {
    let n = width * height;
    FlowField::new(width, height, vec![0.0; n], vec![0.0; n])
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads a PNG or binary PPM (P6, maxval 255). The format is sniffed from the
/// file contents, not the extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageF> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(path, &bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(path, &bytes)
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_owned(),
        })
    }
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<ImageF> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        Error::Corrupt {
            path: path.to_owned(),
            reason: e.to_string(),
        }
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageF::from_bytes(w as usize, h as usize, rgb.as_raw())
}

fn decode_ppm(path: &Path, bytes: &[u8]) -> Result<ImageF> {
    let corrupt = |reason: &str| Error::Corrupt {
        path: path.to_owned(),
        reason: reason.to_owned(),
    };

    // Header: magic, width, height, maxval, separated by whitespace with
    // optional '#' comments, then exactly one whitespace byte before the raster.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(corrupt("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt("expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| corrupt("header field out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(corrupt("missing separator after header")),
    }

    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat {
            path: path.to_owned(),
        });
    }
    if width == 0 || height == 0 {
        return Err(corrupt("zero image dimension"));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(CHANNELS))
        .ok_or_else(|| corrupt("image dimensions overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(corrupt(&format!(
            "raster has {} bytes, expected {expected}",
            raster.len()
        )));
    }
    ImageF::from_bytes(width, height, &raster[..expected])
}

/// Writes an 8-bit PNG or P6 PPM, chosen by the file extension.
pub fn save_image(img: &ImageF, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let bytes = img.to_bytes();
    let encoded = match ext.as_deref() {
        Some("png") => {
            let mut out = Vec::new();
            PngEncoder::new(&mut out)
                .write_image(
                    &bytes,
                    img.width as u32,
                    img.height as u32,
                    ExtendedColorType::Rgb8,
                )
                .map_err(|e| Error::Io {
                    path: path.to_owned(),
                    source: std::io::Error::other(e),
                })?;
            out
        }
        Some("ppm") => {
            let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
            out.extend_from_slice(&bytes);
            out
        }
        _ => {
            return Err(Error::UnsupportedFormat {
                path: path.to_owned(),
            })
        }
    };
    fs::write(path, encoded).map_err(|e| Error::io(path, e))
}

/// Reads a Middlebury `.flo` file.
pub fn load_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    decode_flo(path, &bytes)
}

fn decode_flo(path: &Path, bytes: &[u8]) -> Result<FlowField> {
    let word = |i: usize| -> Option<[u8; 4]> { bytes.get(4 * i..4 * i + 4)?.try_into().ok() };
    let header_truncated = || Error::Truncated {
        path: path.to_owned(),
        expected: 12,
        found: bytes.len(),
    };

    let magic = f32::from_le_bytes(word(0).ok_or_else(header_truncated)?);
    if magic != FLO_MAGIC {
        return Err(Error::BadFloMagic {
            path: path.to_owned(),
            found: magic,
        });
    }
    let width = i32::from_le_bytes(word(1).ok_or_else(header_truncated)?);
    let height = i32::from_le_bytes(word(2).ok_or_else(header_truncated)?);
    if width <= 0 || height <= 0 {
        return Err(Error::NonPositiveDimensions {
            path: path.to_owned(),
            width: width.into(),
            height: height.into(),
        });
    }
    let (width, height) = (width as usize, height as usize);
    let n = width * height;
    let expected = 12 + 8 * n;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_owned(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Corrupt {
            path: path.to_owned(),
            reason: format!("{} trailing bytes", bytes.len() - expected),
        });
    }

    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        u.push(f64::from(f32::from_le_bytes(word(3 + 2 * i).unwrap())));
        v.push(f64::from(f32::from_le_bytes(word(4 + 2 * i).unwrap())));
    }
    FlowField::new(width, height, u, v).map_err(|e| Error::Corrupt {
        path: path.to_owned(),
        reason: e.to_string(),
    })
}

/// Serializes a flow field as Middlebury `.flo`. Components are narrowed to `f32`.
pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * flow.u.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for (u, v) in flow.u.iter().zip(&flow.v) {
        out.extend_from_slice(&(*u as f32).to_le_bytes());
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_flo(flow))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
