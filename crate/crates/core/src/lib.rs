//! Novel-view data augmentation for object detection.
//!
//! An annotated image plus a depth map is lifted into a point cloud, each
//! point tagged with the boxes it falls in. The cloud is moved into a new
//! camera, splatted onto a target palette with a differentiable soft
//! rasterizer, and the boxes are recovered from where their tagged points
//! land.
//!
//! ```text
//! image + depth --lift_image--> cloud --mark_boxes--> marked cloud
//!                                   |
//!                  pose --world_to_camera/project--> splat --> rendered view
//!                                   \--ProjectedMarkSet--> recover_boxes --> boxes
//! ```
//!
//! Modules:
//!
//! - [`camera`]: pinhole unprojection/projection and axis-angle poses
//! - [`cloud`]: depth maps, payload point clouds, box marking
//! - [`splat`]: the soft splatting renderer and its analytic gradients
//! - [`annotate`]: box recovery in the target view
//! - [`heatmap`]: Gaussian center heatmaps and keypoint-aware mixup
//! - [`metrics`]: PSNR, SSIM and feature-stack distance
//! - [`pipeline`]: dataset I/O and the batch augmentation driver
//!
//! Runnable walkthroughs live under `crates/core/examples/`:
//!
//! ```bash
//! cargo run -p viewaug --example camera_roundtrip
//! cargo run -p viewaug --example render_novel_view
//! cargo run -p viewaug --example transfer_boxes
//! cargo run -p viewaug --example splat_gradients
//! cargo run -p viewaug --example heatmap_mixup
//! cargo run -p viewaug --example quality_metrics
//! cargo run -p viewaug --example augment_dataset
//! ```

pub mod annotate;
pub mod camera;
pub mod cloud;
pub mod error;
pub mod heatmap;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod splat;

pub use annotate::{recover_boxes, DropReason, ProjectedMarkSet, TransferReport, TransferThresholds};
pub use camera::{
    project, rotation_from_vector, unproject, world_to_camera, CameraIntrinsics, Point25D, Point3D,
    Projection, RigidPose,
};
pub use cloud::{lift_image, BoundingBox, DepthMap, PayloadPointCloud, SampleGrid};
pub use error::{Error, Result};
pub use raster::Raster;
pub use splat::{splat, splat_gradients, Cotangent, Palette, SplatConfig, SplatGradients};
