//! Feature stacks and the weighted feature-space distance.
//!
//! Container layout (all little-endian):
//!
//! ```text
//! u32 layer_count
//! layer_count x (u32 height, u32 width, u32 channels)
//! for each layer: height * width * channels f32, row-major (h, w, c)
//! for each layer: channels f32 weights
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// One layer of channel-normalized activations with its channel weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayer {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl FeatureLayer {
    /// Checks sizes and that every location's channel vector has unit norm.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("feature layer dimensions must be positive"));
        }
        if values.len() != height * width * channels {
            return Err(Error::mismatch(height * width * channels, values.len()));
        }
        if weights.len() != channels {
            return Err(Error::mismatch(format!("{channels} weights"), weights.len()));
        }
        for (loc, v) in values.chunks_exact(channels).enumerate() {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::invalid(format!(
                    "feature vector at ({}, {}) has norm {norm}",
                    loc / width,
                    loc % width
                )));
            }
        }
        Ok(FeatureLayer {
            height,
            width,
            channels,
            values,
            weights,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn same_shape(&self, other: &FeatureLayer) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub layers: Vec<FeatureLayer>,
}

impl FeatureStack {
    pub fn new(layers: Vec<FeatureLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("feature stack needs at least one layer"));
        }
        Ok(FeatureStack { layers })
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            for d in [l.height, l.width, l.channels] {
                out.write_all(&(d as u32).to_le_bytes())?;
            }
        }
        for l in &self.layers {
            for &v in &l.values {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        for l in &self.layers {
            for &v in &l.weights {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut read_u32 = |what: &str| -> Result<usize> {
            let mut b = [0u8; 4];
            input
                .read_exact(&mut b)
                .map_err(|e| Error::invalid(format!("truncated feature container ({what}): {e}")))?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        let count = read_u32("layer count")?;
        let mut dims = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            dims.push((read_u32("height")?, read_u32("width")?, read_u32("channels")?));
        }

        let mut read_f32s = |n: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; n * 4];
            input
                .read_exact(&mut bytes)
                .map_err(|e| Error::invalid(format!("truncated feature container: {e}")))?;
            Ok(bytes
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
                .collect())
        };
        let mut values = Vec::with_capacity(count);
        for &(h, w, c) in &dims {
            values.push(read_f32s(h * w * c)?);
        }
        let mut layers = Vec::with_capacity(count);
        for (&(h, w, c), v) in dims.iter().zip(values) {
            layers.push(FeatureLayer::new(h, w, c, v, read_f32s(c)?)?);
        }
        FeatureStack::new(layers)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        FeatureStack::read_from(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// `sum_l 1/(H_l W_l) sum_{h,w} || w_l * (y_l[h,w] - y0_l[h,w]) ||^2`.
///
/// Channel weights come from `x`.
pub fn perceptual_distance(x: &FeatureStack, x0: &FeatureStack) -> Result<f64> {
    if x.layers.len() != x0.layers.len() {
        return Err(Error::mismatch(
            format!("{} layers", x.layers.len()),
            x0.layers.len(),
        ));
    }
    let mut total = 0.0;
    for (l, (a, b)) in x.layers.iter().zip(&x0.layers).enumerate() {
        if !a.same_shape(b) {
            return Err(Error::mismatch(
                format!("layer {l}: {}x{}x{}", a.height, a.width, a.channels),
                format!("{}x{}x{}", b.height, b.width, b.channels),
            ));
        }
        let layer_sum: f64 = a
            .values
            .chunks_exact(a.channels)
            .zip(b.values.chunks_exact(b.channels))
            .map(|(ya, yb)| {
                ya.iter()
                    .zip(yb)
                    .zip(&a.weights)
                    .map(|((p, q), w)| {
                        let d = w * (p - q);
                        d * d
                    })
                    .sum::<f64>()
            })
            .sum();
        total += layer_sum / (a.height * a.width) as f64;
    }
    Ok(total)
}
