use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::RigidPose;
use crate::error::{Error, Result};

/// A named target view: axis-angle rotation (radians) plus translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSpec {
    pub label: String,
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

impl PoseSpec {
    pub fn to_pose(&self) -> Result<RigidPose> {
        if self
            .rotation
            .iter()
            .chain(&self.translation)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid(format!(
                "pose {:?} has non-finite components",
                self.label
            )));
        }
        RigidPose::from_vectors(self.rotation, self.translation)
    }
}

/// Names accepted by [`load_poses`] for the built-in presets.
pub const PRESET_NAMES: &[&str] = &["paper-presets", "presets"];

/// Four small tilts sharing a forward translation of 0.3.
pub fn baseline_presets() -> Vec<PoseSpec> {
    let t = [0.0, 0.0, 0.3];
    [
        ("preset-1", [-0.1, -0.15, 0.0]),
        ("preset-2", [0.1, -0.15, 0.0]),
        ("preset-3", [-0.1, 0.15, 0.0]),
        ("preset-4", [0.1, 0.15, 0.0]),
    ]
    .into_iter()
    .map(|(label, rotation)| PoseSpec {
        label: label.to_string(),
        rotation,
        translation: t,
    })
    .collect()
}

/// Parses a JSON list of `{label, rotation, translation}` entries.
pub fn parse_poses(json: &str) -> Result<Vec<PoseSpec>> {
    let poses: Vec<PoseSpec> =
        serde_json::from_str(json).map_err(|e| Error::invalid(format!("bad pose list: {e}")))?;
    for p in &poses {
        p.to_pose()?;
    }
    let mut labels: Vec<&str> = poses.iter().map(|p| p.label.as_str()).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("pose labels must be unique"));
    }
    Ok(poses)
}

/// Resolves a preset name or reads a pose file.
pub fn load_poses(arg: &str) -> Result<Vec<PoseSpec>> {
    if PRESET_NAMES.contains(&arg) {
        return Ok(baseline_presets());
    }
    let path = Path::new(arg);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(&text)
}
