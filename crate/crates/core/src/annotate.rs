//! Recovering bounding boxes in a target view from reprojected marked points.
//!
//! A box becomes the min/max hull of its surviving marked points, clipped to
//! the palette. Boxes whose marks were all culled, that end up outside the
//! frame, or that keep too little visible support are dropped with a reason.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::camera::{project, world_to_camera, CameraIntrinsics, RigidPose};
use crate::cloud::{BoundingBox, PayloadPointCloud};
use crate::error::{Error, Result};

/// Marked-point projections of one source box.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkTrack {
    pub category: u32,
    /// Number of points carrying this box's mark before projection.
    pub total: usize,
    /// Target-view `(u, v)` of every marked point in front of the camera.
    pub positions: Vec<(f64, f64)>,
}

/// Target-view positions of surviving marked points, keyed by box index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectedMarkSet {
    pub tracks: BTreeMap<u32, MarkTrack>,
}

impl ProjectedMarkSet {
    /// Projects every marked point of `cloud` into the view of `pose`.
    ///
    /// Every box in `boxes` gets a track, even one without marks.
    pub fn project(
        cloud: &PayloadPointCloud,
        boxes: &[BoundingBox],
        pose: &RigidPose,
        k: &CameraIntrinsics,
    ) -> Self {
        let mut tracks: BTreeMap<u32, MarkTrack> = boxes
            .iter()
            .map(|b| {
                (
                    b.index,
                    MarkTrack {
                        category: b.category,
                        total: 0,
                        positions: Vec::new(),
                    },
                )
            })
            .collect();

        for (i, p) in cloud.positions().iter().enumerate() {
            let marks = cloud.marks(i);
            if marks.is_empty() {
                continue;
            }
            let projected = project(&world_to_camera(p, pose), k);
            for m in marks {
                if let Some(track) = tracks.get_mut(m) {
                    track.total += 1;
                    if let Some(q) = projected {
                        track.positions.push((q.u, q.v));
                    }
                }
            }
        }
        ProjectedMarkSet { tracks }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    AllPointsCulled,
    BelowVisibility,
    BelowMinArea,
    FullyOutOfFrame,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::AllPointsCulled => "all-points-culled",
            DropReason::BelowVisibility => "below-visibility",
            DropReason::BelowMinArea => "below-min-area",
            DropReason::FullyOutOfFrame => "fully-out-of-frame",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferThresholds {
    /// Minimum fraction of a box's marks that must land inside the frame.
    pub min_visibility: f64,
    /// Minimum clipped area in px^2.
    pub min_area: f64,
}

impl Default for TransferThresholds {
    fn default() -> Self {
        TransferThresholds {
            min_visibility: 0.25,
            min_area: 4.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransferReport {
    pub kept: Vec<BoundingBox>,
    pub dropped: Vec<(u32, DropReason)>,
}

/// Unclipped min/max hull of a set of pixel positions.
pub fn hull(positions: &[(f64, f64)]) -> Option<[f64; 4]> {
    let (&(u0, v0), rest) = positions.split_first()?;
    let mut b = [u0, v0, u0, v0];
    for &(u, v) in rest {
        b[0] = b[0].min(u);
        b[1] = b[1].min(v);
        b[2] = b[2].max(u);
        b[3] = b[3].max(v);
    }
    Some(b)
}

/// Applies the min/max rule per box, clips to `[0, width] x [0, height]` and
/// filters by visibility and area.
pub fn recover_boxes(
    marks: &ProjectedMarkSet,
    width: usize,
    height: usize,
    thresholds: &TransferThresholds,
) -> Result<TransferReport> {
    if !(0.0..=1.0).contains(&thresholds.min_visibility) {
        return Err(Error::invalid("min_visibility must lie in [0, 1]"));
    }
    if thresholds.min_area.is_nan() || thresholds.min_area < 0.0 {
        return Err(Error::invalid("min_area must be non-negative"));
    }
    let (w, h) = (width as f64, height as f64);
    let mut report = TransferReport::default();

    for (&index, track) in &marks.tracks {
        let Some([x0, y0, x1, y1]) = hull(&track.positions) else {
            report.dropped.push((index, DropReason::AllPointsCulled));
            continue;
        };
        let (cx0, cy0, cx1, cy1) = (x0.max(0.0), y0.max(0.0), x1.min(w), y1.min(h));
        if cx0 > cx1 || cy0 > cy1 {
            report.dropped.push((index, DropReason::FullyOutOfFrame));
            continue;
        }

        let in_frame = track
            .positions
            .iter()
            .filter(|(u, v)| *u >= 0.0 && *u <= w && *v >= 0.0 && *v <= h)
            .count();
        let visibility = if track.total == 0 {
            0.0
        } else {
            in_frame as f64 / track.total as f64
        };
        if visibility < thresholds.min_visibility {
            report.dropped.push((index, DropReason::BelowVisibility));
            continue;
        }
        if (cx1 - cx0) * (cy1 - cy0) < thresholds.min_area {
            report.dropped.push((index, DropReason::BelowMinArea));
            continue;
        }
        report
            .kept
            .push(BoundingBox::new(cx0, cy0, cx1, cy1, track.category, index));
    }
    Ok(report)
}
