use std::f64::consts::PI;

use prosep::analysis::{psm_truncation_errors, rotation_bound, MotionBoundSpec};
use prosep::phantom::{truth_movie, Ellipse, MotionSpec, PhantomSpec, Trajectory};

/// Smooth off-centre blobs rotating by up to `theta_max`.
fn rotating_errors(theta_max: f64) -> Vec<f64> {
    let blob = |x: f64, y: f64, r: f64, v: f64| Ellipse {
        center: [x, y],
        semi_axes: [r, r * 0.7],
        rotation: 0.3,
        intensity: v,
    };
    let spec = PhantomSpec {
        ellipses: vec![
            blob(6.0, 2.0, 5.0, 1.0),
            blob(-5.0, -4.0, 4.0, 0.6),
            blob(0.0, 8.0, 3.0, 0.8),
        ],
        width: 48,
        pixel_size: 1.0,
        edge_width: 6.0,
    };
    let motion = MotionSpec {
        rotation: Trajectory::RaisedCosine {
            amplitude: theta_max,
        },
        ..MotionSpec::default()
    };
    psm_truncation_errors(&truth_movie(&spec, &motion, 64).unwrap(), 6)
}

#[test]
fn truncation_error_follows_bound_ordering() {
    let small = rotating_errors(PI / 32.0);
    let large = rotating_errors(PI / 8.0);
    for errs in [&small, &large] {
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errs:?}");
    }
    let spec = |theta_max| MotionBoundSpec {
        bandwidth: 0.5,
        c_max: 0.0,
        support_radius: 24.0,
        theta_max,
        psm_order: 2,
    };
    // A larger rotation has a larger bound, and a larger measured error.
    assert!(rotation_bound(&spec(PI / 32.0)) < rotation_bound(&spec(PI / 8.0)));
    for k in 0..=4 {
        assert!(
            small[k] <= large[k],
            "K = {k}: {} vs {}",
            small[k],
            large[k]
        );
    }
}
