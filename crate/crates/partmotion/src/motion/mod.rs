//! The 263-feature frame layout, the six-part body decomposition, global
//! joint recovery, and motion file formats.
//!
//! Frame layout (per frame, 263 columns):
//!
//! | columns   | contents                                            |
//! |-----------|-----------------------------------------------------|
//! | 0..4      | root: rotational velocity, planar velocity x/z, height |
//! | 4..67     | local positions of joints 1..21 (3 each)            |
//! | 67..193   | 6d rotations of joints 1..21 (6 each)               |
//! | 193..259  | velocities of joints 0..21 (3 each)                 |
//! | 259..263  | foot contacts: left ankle/toe, right ankle/toe      |
//!
//! The skeleton is the 22-joint chain used by the feature source this
//! layout mirrors: 0 pelvis, 1/2 hips, 3 spine1, 4/5 knees, 6 spine2,
//! 7/8 ankles, 9 spine3, 10/11 feet, 12 neck, 13/14 collars, 15 head,
//! 16/17 shoulders, 18/19 elbows, 20/21 wrists (left before right).

mod layout;
mod mbin;
mod recover;

pub use layout::{
    merge, part_columns, partition, BodyPartSet, FeatureLayout, PartId, ALL_PARTS, FEATURE_DIM,
    PART_WIDTHS,
};
pub use mbin::{
    export_anim_json, import_raw_features, read_mbin, write_mbin, MotionIoError,
};
pub use recover::{joint_at, recover_global_positions};

use serde::{Deserialize, Serialize};

/// Frames per second implied by the layout; used by metrics.
pub const FPS: f32 = 20.0;

/// Number of skeleton joints.
pub const JOINT_COUNT: usize = 22;

#[derive(Debug, thiserror::Error)]
pub enum MotionError {
    #[error("frame width {got} != {FEATURE_DIM}")]
    BadWidth { got: usize },
    #[error("motion must have at least one frame")]
    Empty,
    #[error("part {part:?} missing from set")]
    MissingPart { part: PartId },
    #[error("part {part:?} has {got} frames, expected {expected}")]
    FrameMismatch {
        part: PartId,
        got: usize,
        expected: usize,
    },
    #[error("part {part:?} stream width {got} != {expected}")]
    PartWidth {
        part: PartId,
        got: usize,
        expected: usize,
    },
}

/// A motion clip: `frames` rows of [`FEATURE_DIM`] features at [`FPS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSequence {
    frames: Vec<f32>,
    num_frames: usize,
}

impl MotionSequence {
    pub fn new(num_frames: usize, frames: Vec<f32>) -> Result<Self, MotionError> {
        if num_frames == 0 {
            return Err(MotionError::Empty);
        }
        if frames.len() != num_frames * FEATURE_DIM {
            return Err(MotionError::BadWidth {
                got: if num_frames > 0 { frames.len() / num_frames } else { 0 },
            });
        }
        Ok(MotionSequence { frames, num_frames })
    }

    pub fn zeros(num_frames: usize) -> Self {
        MotionSequence {
            frames: vec![0.0; num_frames * FEATURE_DIM],
            num_frames,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        &self.frames[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]
    }

    pub fn frame_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.frames[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]
    }

    pub fn data(&self) -> &[f32] {
        &self.frames
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.frames
    }
}

/// One diagnostic from [`validate_layout`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFinding {
    pub frame: usize,
    pub column: usize,
    pub message: String,
}

/// Pure report: non-finite values and contact bits outside [0, 1].
pub fn validate_layout(m: &MotionSequence) -> Vec<LayoutFinding> {
    let mut findings = Vec::new();
    let contacts = FeatureLayout::default().foot_contacts;
    for f in 0..m.num_frames() {
        let row = m.frame(f);
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                findings.push(LayoutFinding {
                    frame: f,
                    column: c,
                    message: format!("non-finite value {v}"),
                });
            } else if contacts.contains(&c) && !(0.0..=1.0).contains(&v) {
                findings.push(LayoutFinding {
                    frame: f,
                    column: c,
                    message: format!("contact bit {v} outside [0, 1]"),
                });
            }
        }
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_motion_has_empty_report() {
        let m = MotionSequence::zeros(4);
        assert!(validate_layout(&m).is_empty());
    }

    #[test]
    fn one_nan_yields_one_finding() {
        let mut m = MotionSequence::zeros(4);
        m.frame_mut(2)[100] = f32::NAN;
        let report = validate_layout(&m);
        assert_eq!(report.len(), 1);
        assert_eq!((report[0].frame, report[0].column), (2, 100));
    }

    #[test]
    fn contact_out_of_range_yields_range_finding() {
        let mut m = MotionSequence::zeros(2);
        m.frame_mut(0)[259] = 2.0;
        let report = validate_layout(&m);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("contact"));
    }

    #[test]
    fn wrong_width_rejected() {
        assert!(MotionSequence::new(2, vec![0.0; 2 * FEATURE_DIM - 1]).is_err());
        assert!(MotionSequence::new(0, vec![]).is_err());
    }
}
