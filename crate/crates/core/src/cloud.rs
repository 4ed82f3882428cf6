//! Lifting images into payload point clouds and tagging points with the
//! bounding boxes they belong to.

use crate::camera::{unproject, CameraIntrinsics, Point25D, Point3D};
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Per-pixel depth in scene units, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    /// Validates that every value is finite and strictly positive.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::mismatch(
                format!("{} depth values for {width}x{height}", width * height),
                values.len(),
            ));
        }
        if let Some(i) = values.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::BadDepth {
                x: i % width,
                y: i / width,
                value: values[i],
            });
        }
        Ok(DepthMap {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        DepthMap::new(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Axis-aligned box in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub category: u32,
    /// Ordinal of the box within its image; the value stored in point marks.
    pub index: u32,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, category: u32, index: u32) -> Self {
        BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
            category,
            index,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed containment test.
    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x_min && u <= self.x_max && v >= self.y_min && v <= self.y_max
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(Error::invalid(format!("malformed box {self:?}")));
        }
        Ok(())
    }
}

/// Placement of an `cols x rows` sample grid over a `width x height` image.
///
/// Sample column `i` reads pixel column `floor((i + 0.5) * width / cols)`;
/// rows likewise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleGrid {
    pub cols: usize,
    pub rows: usize,
    pub width: usize,
    pub height: usize,
}

impl SampleGrid {
    /// `s x s` samples.
    pub fn square(s: usize, width: usize, height: usize) -> Self {
        SampleGrid {
            cols: s,
            rows: s,
            width,
            height,
        }
    }

    /// One sample per pixel.
    pub fn dense(width: usize, height: usize) -> Self {
        SampleGrid {
            cols: width,
            rows: height,
            width,
            height,
        }
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn pixel_x(&self, i: usize) -> usize {
        ((2 * i + 1) * self.width) / (2 * self.cols)
    }

    #[inline]
    pub fn pixel_y(&self, j: usize) -> usize {
        ((2 * j + 1) * self.height) / (2 * self.rows)
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("cannot sample an empty image"));
        }
        if self.cols == 0 || self.rows == 0 || self.cols > self.width || self.rows > self.height {
            return Err(Error::invalid(format!(
                "sample grid {}x{} does not fit a {}x{} image",
                self.cols, self.rows, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Sample column whose pixel center is nearest to `u`.
    fn nearest_col(&self, u: f64) -> usize {
        nearest_index(self.cols, u, |i| self.pixel_x(i) as f64 + 0.5)
    }

    fn nearest_row(&self, v: f64) -> usize {
        nearest_index(self.rows, v, |j| self.pixel_y(j) as f64 + 0.5)
    }
}

fn nearest_index(n: usize, target: f64, center: impl Fn(usize) -> f64) -> usize {
    (0..n)
        .min_by(|&a, &b| (center(a) - target).abs().total_cmp(&(center(b) - target).abs()))
        .unwrap_or(0)
}

/// 3D points carrying payload vectors and box marks.
///
/// Stored column-wise: `payloads` holds `len() * channels` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadPointCloud {
    positions: Vec<Point3D>,
    payloads: Vec<f64>,
    channels: usize,
    marks: Vec<Vec<u32>>,
    sources: Vec<[u32; 2]>,
    grid: Option<SampleGrid>,
}

impl PayloadPointCloud {
    /// A free-standing cloud with no source grid. Marks start empty.
    pub fn from_parts(positions: Vec<Point3D>, payloads: Vec<f64>, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("payload must have at least one channel"));
        }
        if payloads.len() != positions.len() * channels {
            return Err(Error::mismatch(
                format!("{} payload values", positions.len() * channels),
                payloads.len(),
            ));
        }
        if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("point positions must be finite"));
        }
        let n = positions.len();
        Ok(PayloadPointCloud {
            positions,
            payloads,
            channels,
            marks: vec![Vec::new(); n],
            sources: Vec::new(),
            grid: None,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn positions(&self) -> &[Point3D] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [Point3D] {
        &mut self.positions
    }

    pub fn payloads(&self) -> &[f64] {
        &self.payloads
    }

    pub fn payloads_mut(&mut self) -> &mut [f64] {
        &mut self.payloads
    }

    #[inline]
    pub fn payload(&self, i: usize) -> &[f64] {
        &self.payloads[i * self.channels..(i + 1) * self.channels]
    }

    pub fn marks(&self, i: usize) -> &[u32] {
        &self.marks[i]
    }

    /// Adds mark `index` to point `i`, keeping marks sorted and unique.
    pub fn add_mark(&mut self, i: usize, index: u32) {
        let marks = &mut self.marks[i];
        if let Err(pos) = marks.binary_search(&index) {
            marks.insert(pos, index);
        }
    }

    /// Source pixel of point `i` when the cloud was lifted from an image.
    pub fn source_pixel(&self, i: usize) -> Option<[u32; 2]> {
        self.sources.get(i).copied()
    }

    pub fn grid(&self) -> Option<&SampleGrid> {
        self.grid.as_ref()
    }

    /// Tags every grid point whose source pixel center lies inside a box with
    /// that box's index.
    ///
    /// When a box contains no sample center (it is thinner than the grid
    /// spacing), each of its corners that falls inside the image is snapped to
    /// the nearest sample instead. Boxes left with no mark at all are reported
    /// as unmarkable.
    pub fn mark_boxes(&mut self, boxes: &[BoundingBox]) -> Result<MarkReport> {
        let grid = self
            .grid
            .ok_or_else(|| Error::invalid("mark_boxes needs a cloud lifted from an image"))?;
        for b in boxes {
            b.validate()?;
        }

        let col_u: Vec<f64> = (0..grid.cols).map(|i| grid.pixel_x(i) as f64 + 0.5).collect();
        let row_v: Vec<f64> = (0..grid.rows).map(|j| grid.pixel_y(j) as f64 + 0.5).collect();

        let mut report = MarkReport::default();
        for b in boxes {
            let cols: Vec<usize> = (0..grid.cols)
                .filter(|&i| col_u[i] >= b.x_min && col_u[i] <= b.x_max)
                .collect();
            let rows: Vec<usize> = (0..grid.rows)
                .filter(|&j| row_v[j] >= b.y_min && row_v[j] <= b.y_max)
                .collect();

            let mut count = 0usize;
            if !cols.is_empty() && !rows.is_empty() {
                for &j in &rows {
                    for &i in &cols {
                        self.add_mark(j * grid.cols + i, b.index);
                        count += 1;
                    }
                }
            } else {
                let (w, h) = (grid.width as f64, grid.height as f64);
                let mut snapped: Vec<usize> = [
                    (b.x_min, b.y_min),
                    (b.x_max, b.y_min),
                    (b.x_min, b.y_max),
                    (b.x_max, b.y_max),
                ]
                .iter()
                .filter(|(u, v)| *u >= 0.0 && *u <= w && *v >= 0.0 && *v <= h)
                .map(|&(u, v)| grid.nearest_row(v) * grid.cols + grid.nearest_col(u))
                .collect();
                snapped.sort_unstable();
                snapped.dedup();
                for &p in &snapped {
                    self.add_mark(p, b.index);
                }
                count = snapped.len();
            }

            if count == 0 {
                report.unmarkable.push(b.index);
            }
            report.marked.push((b.index, count));
        }
        Ok(report)
    }
}

/// Outcome of [`PayloadPointCloud::mark_boxes`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkReport {
    /// `(box index, number of points marked)` in input order.
    pub marked: Vec<(u32, usize)>,
    /// Boxes for which no sample could be marked.
    pub unmarkable: Vec<u32>,
}

/// Lifts `image` into a point cloud with one point per grid sample.
///
/// Points are ordered row-major over the grid. Each point sits at the
/// unprojection of its source pixel center and carries that pixel's channels
/// as payload.
pub fn lift_image(
    image: &Raster,
    depth: &DepthMap,
    k: &CameraIntrinsics,
    grid: SampleGrid,
) -> Result<PayloadPointCloud> {
    if image.is_empty() {
        return Err(Error::invalid("cannot lift an empty image"));
    }
    if image.width() != depth.width() || image.height() != depth.height() {
        return Err(Error::mismatch(
            format!("depth {}x{}", image.width(), image.height()),
            format!("{}x{}", depth.width(), depth.height()),
        ));
    }
    if grid.width != image.width() || grid.height != image.height() {
        return Err(Error::mismatch(
            format!("grid over {}x{}", image.width(), image.height()),
            format!("{}x{}", grid.width, grid.height),
        ));
    }
    grid.validate()?;

    let n = grid.len();
    let channels = image.channels();
    let mut positions = Vec::with_capacity(n);
    let mut payloads = Vec::with_capacity(n * channels);
    let mut sources = Vec::with_capacity(n);
    for j in 0..grid.rows {
        let y = grid.pixel_y(j);
        for i in 0..grid.cols {
            let x = grid.pixel_x(i);
            let d = depth.at(x, y);
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::BadDepth { x, y, value: d });
            }
            positions.push(unproject(Point25D::new(x as f64 + 0.5, y as f64 + 0.5, d), k)?);
            payloads.extend_from_slice(image.pixel(x, y));
            sources.push([x as u32, y as u32]);
        }
    }

    Ok(PayloadPointCloud {
        positions,
        payloads,
        channels,
        marks: vec![Vec::new(); n],
        sources,
        grid: Some(grid),
    })
}
