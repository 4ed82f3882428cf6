//! Depth providers.
//!
//! Geometry only needs a positive depth per pixel, so depth can come from a
//! 16-bit PNG in millimetres, a raw little-endian `f32` raster, or a synthetic
//! constant or plane.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::cloud::DepthMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthMode {
    /// 16-bit grayscale PNG, depth = raw / 1000.
    File16,
    /// Raw row-major little-endian `f32`, no header.
    File32,
    Constant(f64),
    /// `depth = a * u + b * v + c` at each pixel center.
    Plane {
        a: f64,
        b: f64,
        c: f64,
    },
}

impl DepthMode {
    /// File extension of per-image depth files, if this mode reads any.
    pub fn extension(&self) -> Option<&'static str> {
        match self {
            DepthMode::File16 => Some("png"),
            DepthMode::File32 => Some("f32"),
            _ => None,
        }
    }
}

impl fmt::Display for DepthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepthMode::File16 => write!(f, "file16"),
            DepthMode::File32 => write!(f, "file32"),
            DepthMode::Constant(c) => write!(f, "constant:{c}"),
            DepthMode::Plane { a, b, c } => write!(f, "plane:{a},{b},{c}"),
        }
    }
}

impl FromStr for DepthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {v:?} in depth mode {s:?}")))
        };
        match s.split_once(':') {
            None if s == "file16" => Ok(DepthMode::File16),
            None if s == "file32" => Ok(DepthMode::File32),
            Some(("constant", v)) => Ok(DepthMode::Constant(parse(v)?)),
            Some(("plane", v)) => {
                let parts: Vec<&str> = v.split(',').collect();
                let [a, b, c] = parts.as_slice() else {
                    return Err(Error::invalid(format!("plane needs a,b,c, got {v:?}")));
                };
                Ok(DepthMode::Plane {
                    a: parse(a)?,
                    b: parse(b)?,
                    c: parse(c)?,
                })
            }
            _ => Err(Error::invalid(format!(
                "unknown depth mode {s:?} (expected file16, file32, constant:<v> or plane:<a,b,c>)"
            ))),
        }
    }
}

/// Produces a `width x height` depth map. File modes read `path`.
pub fn load_depth(path: Option<&Path>, mode: DepthMode, width: usize, height: usize) -> Result<DepthMap> {
    let need_path = || path.ok_or_else(|| Error::invalid(format!("depth mode {mode} needs a file")));
    match mode {
        DepthMode::Constant(c) => DepthMap::constant(width, height, c),
        DepthMode::Plane { a, b, c } => {
            let mut values = Vec::with_capacity(width * height);
            for y in 0..height {
                for x in 0..width {
                    values.push(a * (x as f64 + 0.5) + b * (y as f64 + 0.5) + c);
                }
            }
            DepthMap::new(width, height, values)
        }
        DepthMode::File16 => {
            let path = need_path()?;
            let img = image::open(path)
                .map_err(|source| Error::Image {
                    path: path.to_path_buf(),
                    source,
                })?
                .into_luma16();
            let (w, h) = img.dimensions();
            if (w as usize, h as usize) != (width, height) {
                return Err(Error::mismatch(
                    format!("depth {width}x{height}"),
                    format!("{w}x{h}"),
                ));
            }
            let values = img
                .into_raw()
                .into_iter()
                .map(|v| f64::from(v) / 1000.0)
                .collect();
            DepthMap::new(width, height, values)
        }
        DepthMode::File32 => {
            let path = need_path()?;
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            if bytes.len() != width * height * 4 {
                return Err(Error::mismatch(
                    format!("{} bytes for {width}x{height} f32 depth", width * height * 4),
                    bytes.len(),
                ));
            }
            let values = bytes
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
                .collect();
            DepthMap::new(width, height, values)
        }
    }
}

/// Writes a depth map as a 16-bit millimetre PNG.
pub fn save_depth16(depth: &DepthMap, path: &Path) -> Result<()> {
    let raw: Vec<u16> = depth
        .values()
        .iter()
        .map(|d| (d * 1000.0).round().clamp(0.0, 65535.0) as u16)
        .collect();
    let img =
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(depth.width() as u32, depth.height() as u32, raw)
            .ok_or_else(|| Error::invalid("depth buffer size mismatch"))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}
