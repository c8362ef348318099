//! A single binary collision: deflection frame, post-collision velocities
//! and the conserved pair quantities.

use kacsim::geometry::{angle_between, build_frame, deflection_distance, post_collide};
use kacsim::Velocity;

fn main() -> kacsim::Result<()> {
    let v = Velocity::new(1.0, 0.5, -0.2);
    let w = Velocity::new(-0.8, 0.1, 0.4);
    let frame = build_frame(v - w)?;
    println!("axis {}  i {}  j {}", frame.axis, frame.i, frame.j);
    println!("{:>8} {:>8} {:>28} {:>12} {:>12}", "theta", "phi", "v'", "|v'-v|", "theta(z,s)");
    for &(theta, phi) in &[(0.0, 0.0), (0.3, 1.0), (1.5, 2.0), (std::f64::consts::PI, 0.5)] {
        let sigma = frame.sigma(theta, phi);
        let (vp, wp) = post_collide(v, w, sigma);
        let dp = (vp + wp) - (v + w);
        let de = vp.norm_sq() + wp.norm_sq() - v.norm_sq() - w.norm_sq();
        assert!(dp.norm() < 1e-14 && de.abs() < 1e-14);
        println!(
            "{theta:>8.3} {phi:>8.3} {:>28} {:>12.6} {:>12.6}",
            vp.to_string(),
            (vp - v).norm(),
            angle_between(v - w, sigma)
        );
        assert!(((vp - v).norm() - deflection_distance(v, w, theta)).abs() < 1e-12);
    }
    Ok(())
}
