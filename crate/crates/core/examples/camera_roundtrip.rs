//! Lifts a few pixels to 3D, moves them into a rotated camera and projects
//! them back.
//!
//! cargo run -p viewaug --example camera_roundtrip

use viewaug::pipeline::baseline_presets;
use viewaug::{project, unproject, world_to_camera, CameraIntrinsics, Point25D, RigidPose};

fn main() -> viewaug::Result<()> {
    let k = CameraIntrinsics::normalized(640, 480);
    println!(
        "intrinsics: fx={} fy={} cx={} cy={}",
        k.fx(),
        k.fy(),
        k.cx(),
        k.cy()
    );

    let pixels = [(0.5, 0.5, 2.0), (320.0, 240.0, 1.0), (600.25, 410.75, 3.5)];
    for &(u, v, d) in &pixels {
        let p = unproject(Point25D::new(u, v, d), &k)?;
        let back = project(&p, &k).expect("point is in front of the camera");
        println!(
            "({u:>7.2}, {v:>7.2}, d={d}) -> X=({:+.4}, {:+.4}, {:.4}) -> ({:.12}, {:.12})",
            p.x, p.y, p.z, back.u, back.v
        );
    }

    println!();
    for spec in baseline_presets() {
        let pose: RigidPose = spec.to_pose()?;
        let p = unproject(Point25D::new(320.0, 240.0, 1.0), &k)?;
        let q = world_to_camera(&p, &pose);
        match project(&q, &k) {
            Some(px) => println!(
                "{:<9} image center lands at ({:.2}, {:.2}), depth {:.3}",
                spec.label, px.u, px.v, px.depth
            ),
            None => println!("{:<9} image center is behind the camera", spec.label),
        }
        let r = pose.rotation();
        println!("          det(R) = {:.15}", r.determinant());
    }
    Ok(())
}
