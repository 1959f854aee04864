//! PGM (P2 ASCII / P5 binary) grayscale I/O.
//!
//! Files written with a value scale carry a `# value-scale <s>` comment so that
//! real-valued images survive the integer quantization of the format: a pixel
//! `v` is stored as `round(v * s)` and read back as `stored / s`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

const SCALE_TAG: &str = "value-scale";

/// A decoded PGM file.
#[derive(Debug, Clone, PartialEq)]
pub struct PgmFile {
    /// Raw stored sample values.
    pub image: Image,
    pub maxval: u16,
    pub value_scale: Option<f64>,
}

impl PgmFile {
    /// Image in working units: raw values divided by `scale`, or by the
    /// file's own value-scale comment when `scale` is `None`.
    pub fn working_image(&self, scale: Option<f64>) -> Result<Image> {
        let s = scale.or(self.value_scale).unwrap_or(1.0);
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Config(format!("value scale must be positive, got {s}")));
        }
        if s == 1.0 {
            return Ok(self.image.clone());
        }
        self.image.map_clamped(|v| v / s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmOptions {
    pub maxval: u16,
    pub value_scale: Option<f64>,
}

impl Default for PgmOptions {
    fn default() -> Self {
        Self {
            maxval: 255,
            value_scale: None,
        }
    }
}

impl PgmOptions {
    pub fn sixteen_bit() -> Self {
        Self {
            maxval: u16::MAX,
            value_scale: None,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.value_scale = Some(scale);
        self
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    Ok(read_pgm_file(path)?.image)
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<PgmFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_pgm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    write_pgm_with(img, path, &PgmOptions::default())
}

pub fn write_pgm_with(img: &Image, path: impl AsRef<Path>, opts: &PgmOptions) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(img, opts)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    value_scale: Option<f64>,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments, picking up a value-scale tag if present.
    fn skip_ws(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                let start = self.pos + 1;
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
                let comment = String::from_utf8_lossy(&self.bytes[start..self.pos]);
                let mut words = comment.split_whitespace();
                if words.next() == Some(SCALE_TAG) {
                    if let Some(s) = words.next().and_then(|w| w.parse::<f64>().ok()) {
                        if s.is_finite() && s > 0.0 {
                            self.value_scale = Some(s);
                        }
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pgm(if self.pos >= self.bytes.len() {
                format!("unexpected end of data reading {what}")
            } else {
                format!("expected {what}")
            }));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm(format!("{what} out of range")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<PgmFile> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        Some(m) => {
            return Err(Error::Pgm(format!(
                "unsupported magic number {:?}",
                String::from_utf8_lossy(m)
            )))
        }
        None => return Err(Error::Pgm("file too short".into())),
    };
    let mut cur = Cursor {
        bytes,
        pos: 2,
        value_scale: None,
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > u16::MAX as u32 {
        return Err(Error::Pgm(format!("maxval {maxval} not in 1..=65535")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Pgm("image dimensions overflow".into()))?;

    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(Error::Pgm("missing whitespace after maxval".into()));
        }
        let raster = &bytes[cur.pos + 1..];
        let bps = if maxval > 255 { 2 } else { 1 };
        if raster.len() < n * bps {
            return Err(Error::Pgm(format!(
                "truncated raster: need {} bytes, have {}",
                n * bps,
                raster.len()
            )));
        }
        for i in 0..n {
            let v = if bps == 1 {
                raster[i] as u32
            } else {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as u32
            };
            if v > maxval {
                return Err(Error::Pgm(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64);
        }
    } else {
        for _ in 0..n {
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(Error::Pgm(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64);
        }
    }
    Ok(PgmFile {
        image: Image::new(width, height, data)?,
        maxval: maxval as u16,
        value_scale: cur.value_scale,
    })
}

/// Encodes as P5. Values are multiplied by the value scale (if any), rounded
/// and clamped to `[0, maxval]`.
pub fn encode(img: &Image, opts: &PgmOptions) -> Result<Vec<u8>> {
    if opts.maxval == 0 {
        return Err(Error::Config("maxval must be positive".into()));
    }
    let scale = match opts.value_scale {
        Some(s) if !(s.is_finite() && s > 0.0) => {
            return Err(Error::Config(format!("value scale must be positive, got {s}")))
        }
        Some(s) => s,
        None => 1.0,
    };
    let mut out = b"P5\n".to_vec();
    if let Some(s) = opts.value_scale {
        out.extend_from_slice(format!("# {SCALE_TAG} {s:e}\n").as_bytes());
    }
    out.extend_from_slice(format!("{} {}\n{}\n", img.width(), img.height(), opts.maxval).as_bytes());
    let maxval = opts.maxval as f64;
    let quantize = |v: f64| (v * scale).round().clamp(0.0, maxval) as u16;
    if opts.maxval > 255 {
        for &v in img.data() {
            out.extend_from_slice(&quantize(v).to_be_bytes());
        }
    } else {
        out.extend(img.data().iter().map(|&v| quantize(v) as u8));
    }
    Ok(out)
}
