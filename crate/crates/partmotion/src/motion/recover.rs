//! Global joint-position recovery from the frame features.
//!
//! Conventions (fixed, matching the synthetic generator):
//! - heading angle integrates the stored rotational velocity with
//!   `theta[0] = 0`, `theta[t] = theta[t-1] + rotvel[t-1]`;
//! - the stored planar velocity of frame t-1 is the pelvis displacement
//!   from frame t-1 to t, expressed in frame t's heading frame;
//! - local joint positions share the pelvis XZ origin and heading frame,
//!   but their Y is already world height;
//! - rotation about +Y acts on (x, z) as
//!   `x' = cos(theta) x + sin(theta) z`, `z' = -sin(theta) x + cos(theta) z`.

use super::layout::FeatureLayout;
use super::{MotionSequence, JOINT_COUNT};

fn rotate_y(theta: f32, x: f32, z: f32) -> (f32, f32) {
    let (s, c) = theta.sin_cos();
    (c * x + s * z, -s * x + c * z)
}

/// Recovers world-frame joint positions, shape frames x 22 x 3 (row-major).
pub fn recover_global_positions(m: &MotionSequence) -> Vec<f32> {
    let n = m.num_frames();
    let mut out = vec![0.0f32; n * JOINT_COUNT * 3];

    let mut theta = 0.0f32;
    let mut px = 0.0f32;
    let mut pz = 0.0f32;
    for t in 0..n {
        if t > 0 {
            let prev = m.frame(t - 1);
            theta += prev[0];
            let (dx, dz) = rotate_y(theta, prev[1], prev[2]);
            px += dx;
            pz += dz;
        }
        let row = m.frame(t);
        let py = row[3];

        let base = t * JOINT_COUNT * 3;
        out[base] = px;
        out[base + 1] = py;
        out[base + 2] = pz;
        for j in 1..JOINT_COUNT {
            let cols = FeatureLayout::position_cols(j);
            let (lx, ly, lz) = (row[cols.start], row[cols.start + 1], row[cols.start + 2]);
            let (wx, wz) = rotate_y(theta, lx, lz);
            out[base + j * 3] = wx + px;
            out[base + j * 3 + 1] = ly;
            out[base + j * 3 + 2] = wz + pz;
        }
    }
    out
}

/// Convenience accessor into the output of [`recover_global_positions`].
pub fn joint_at(positions: &[f32], frame: usize, joint: usize) -> [f32; 3] {
    let base = (frame * JOINT_COUNT + joint) * 3;
    [positions[base], positions[base + 1], positions[base + 2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_velocities_keep_pelvis_fixed() {
        let mut m = MotionSequence::zeros(10);
        for t in 0..10 {
            m.frame_mut(t)[3] = 0.9; // constant height
        }
        let pos = recover_global_positions(&m);
        for t in 0..10 {
            assert_eq!(joint_at(&pos, t, 0), [0.0, 0.9, 0.0]);
        }
    }

    #[test]
    fn constant_planar_velocity_advances_uniformly() {
        // v = 1 m/s forward at 20 fps -> 0.05 m per frame along local z.
        let step = 0.05f32;
        let mut m = MotionSequence::zeros(8);
        for t in 0..8 {
            m.frame_mut(t)[2] = step;
        }
        let pos = recover_global_positions(&m);
        for t in 0..8 {
            let p = joint_at(&pos, t, 0);
            assert!((p[2] - step * t as f32).abs() < 1e-6);
            assert!(p[0].abs() < 1e-6);
        }
    }

    #[test]
    fn constant_turn_rate_traces_circular_arc() {
        let omega = 0.12f32;
        let step = 0.05f32;
        let n = 50;
        let mut m = MotionSequence::zeros(n);
        for t in 0..n {
            let row = m.frame_mut(t);
            row[0] = omega;
            row[2] = step;
        }
        let pos = recover_global_positions(&m);

        // Closed-form oracle in f64: with (x, z) as the complex number
        // x + i z, the per-frame rotation is multiplication by e^{-i omega},
        // so p_T = d * e^{-i w} (1 - e^{-i w T}) / (1 - e^{-i w}) with d = i*step.
        let w = omega as f64;
        let d = (0.0f64, step as f64); // complex: 0 + i*step
        let cis = |a: f64| (a.cos(), a.sin());
        let cmul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
        let csub = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0, a.1 - b.1);
        let cdiv = |a: (f64, f64), b: (f64, f64)| {
            let den = b.0 * b.0 + b.1 * b.1;
            ((a.0 * b.0 + a.1 * b.1) / den, (a.1 * b.0 - a.0 * b.1) / den)
        };
        for t in 1..n {
            let e1 = cis(-w);
            let et = cis(-w * t as f64);
            let num = cmul(cmul(d, e1), csub((1.0, 0.0), et));
            let expect = cdiv(num, csub((1.0, 0.0), e1));
            let p = joint_at(&pos, t, 0);
            assert!(
                (p[0] as f64 - expect.0).abs() < 1e-4 && (p[2] as f64 - expect.1).abs() < 1e-4,
                "frame {t}: got ({}, {}), oracle ({}, {})",
                p[0],
                p[2],
                expect.0,
                expect.1
            );
        }
    }

    #[test]
    fn local_positions_follow_heading() {
        // A joint 1 m along local z, heading rotated 90 degrees in one step.
        let mut m = MotionSequence::zeros(2);
        m.frame_mut(0)[0] = std::f32::consts::FRAC_PI_2;
        for t in 0..2 {
            let cols = FeatureLayout::position_cols(1);
            m.frame_mut(t)[cols.start + 2] = 1.0;
        }
        let pos = recover_global_positions(&m);
        assert!((joint_at(&pos, 0, 1)[2] - 1.0).abs() < 1e-6);
        // After rotating by +pi/2 about Y, local +z maps to +x.
        let p = joint_at(&pos, 1, 1);
        assert!((p[0] - 1.0).abs() < 1e-6, "{p:?}");
        assert!(p[2].abs() < 1e-6, "{p:?}");
    }
}
