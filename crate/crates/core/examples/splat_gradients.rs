//! Backpropagates an image-space loss through the splatting renderer and
//! checks one point against finite differences.
//!
//! cargo run -p viewaug --example splat_gradients

use viewaug::{
    splat, splat_gradients, CameraIntrinsics, Cotangent, PayloadPointCloud, Point3D, RigidPose, SplatConfig,
};

fn loss(
    cloud: &PayloadPointCloud,
    k: &CameraIntrinsics,
    cfg: &SplatConfig,
    target: f64,
) -> viewaug::Result<f64> {
    let pal = splat(cloud, &RigidPose::identity(), k, cfg)?;
    Ok(pal
        .payload
        .data()
        .iter()
        .map(|v| 0.5 * (v - target) * (v - target))
        .sum())
}

fn main() -> viewaug::Result<()> {
    let (w, h) = (12, 12);
    let k = CameraIntrinsics::normalized(w, h);
    let cfg = SplatConfig {
        k_nearest: 4,
        radius: 2.5,
        ..SplatConfig::desk(w, h)
    };

    let pixels = [
        (3.3, 4.1, 2.0, 0.9),
        (5.7, 6.2, 2.5, 0.2),
        (8.1, 3.6, 3.0, 0.6),
        (6.4, 8.8, 2.2, 0.4),
    ];
    let positions = pixels
        .iter()
        .map(|&(u, v, z, _)| Point3D::new(z * (u - k.cx()) / k.fx(), z * (v - k.cy()) / k.fy(), z))
        .collect();
    let payloads = pixels.iter().map(|p| p.3).collect();
    let cloud = PayloadPointCloud::from_parts(positions, payloads, 1)?;

    // d loss / d output = output - target
    let target = 0.5;
    let pal = splat(&cloud, &RigidPose::identity(), &k, &cfg)?;
    let mut upstream = Cotangent::zeros(w, h, 1);
    for (g, v) in upstream.payload.data_mut().iter_mut().zip(pal.payload.data()) {
        *g = v - target;
    }
    let grads = splat_gradients(&cloud, &RigidPose::identity(), &k, &cfg, &upstream)?;
    println!("loss = {:.6}", loss(&cloud, &k, &cfg, target)?);
    for (i, (g, c)) in grads.positions.iter().zip(&grads.payloads).enumerate() {
        println!(
            "point {i}: dL/dX = ({:+.6}, {:+.6}, {:+.6})  dL/dc = {:+.6}",
            g.x, g.y, g.z, c
        );
    }

    let hstep = 1e-5;
    for axis in 0..3 {
        let mut plus = cloud.clone();
        plus.positions_mut()[0].coords[axis] += hstep;
        let mut minus = cloud.clone();
        minus.positions_mut()[0].coords[axis] -= hstep;
        let numeric = (loss(&plus, &k, &cfg, target)? - loss(&minus, &k, &cfg, target)?) / (2.0 * hstep);
        println!(
            "point 0 axis {axis}: analytic {:+.8}  numeric {:+.8}",
            grads.positions[0][axis], numeric
        );
    }
    Ok(())
}
