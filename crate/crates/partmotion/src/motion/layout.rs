//! Column assignment between the 263-feature frame and the six body parts.
//!
//! The assignment is a fixed bijection; changing it is a format-version
//! bump for every serialized artifact that depends on it.

use serde::{Deserialize, Serialize};

use super::{MotionError, MotionSequence};

/// Total features per frame.
pub const FEATURE_DIM: usize = 263;

/// The six body parts. Enum order follows the tokenization convention
/// (arms, legs, backbone, root); prompt answers use their own label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartId {
    RightArm,
    LeftArm,
    RightLeg,
    LeftLeg,
    Backbone,
    Root,
}

pub const ALL_PARTS: [PartId; 6] = [
    PartId::RightArm,
    PartId::LeftArm,
    PartId::RightLeg,
    PartId::LeftLeg,
    PartId::Backbone,
    PartId::Root,
];

impl PartId {
    pub fn index(self) -> usize {
        match self {
            PartId::RightArm => 0,
            PartId::LeftArm => 1,
            PartId::RightLeg => 2,
            PartId::LeftLeg => 3,
            PartId::Backbone => 4,
            PartId::Root => 5,
        }
    }

    /// Short tag used in token surface forms and sentinels.
    pub fn tag(self) -> &'static str {
        match self {
            PartId::RightArm => "ra",
            PartId::LeftArm => "la",
            PartId::RightLeg => "rl",
            PartId::LeftLeg => "ll",
            PartId::Backbone => "bb",
            PartId::Root => "rt",
        }
    }

    /// Prefix of this part's motion-token surface forms.
    pub fn token_prefix(self) -> &'static str {
        match self {
            PartId::RightArm => "right_arm",
            PartId::LeftArm => "left_arm",
            PartId::RightLeg => "right_leg",
            PartId::LeftLeg => "left_leg",
            PartId::Backbone => "backbone",
            PartId::Root => "root",
        }
    }

    /// Human-readable label used by prompt answers.
    pub fn label(self) -> &'static str {
        match self {
            PartId::RightArm => "Right Arm",
            PartId::LeftArm => "Left Arm",
            PartId::RightLeg => "Right Leg",
            PartId::LeftLeg => "Left Leg",
            PartId::Backbone => "Backbone",
            PartId::Root => "Root",
        }
    }

    /// Joints owned by this part (empty for Root, which owns the root
    /// scalars and the pelvis velocity instead).
    pub fn joints(self) -> &'static [usize] {
        match self {
            PartId::LeftLeg => &[1, 4, 7, 10],
            PartId::RightLeg => &[2, 5, 8, 11],
            PartId::Backbone => &[3, 6, 9, 12, 15],
            PartId::LeftArm => &[13, 16, 18, 20],
            PartId::RightArm => &[14, 17, 19, 21],
            PartId::Root => &[],
        }
    }
}

/// Per-part stream widths, indexed by [`PartId::index`].
pub const PART_WIDTHS: [usize; 6] = [48, 48, 50, 50, 60, 7];

/// Named slices over the 263 columns.
#[derive(Debug, Clone)]
pub struct FeatureLayout {
    pub root_scalars: std::ops::Range<usize>,
    pub local_positions: std::ops::Range<usize>,
    pub rotations: std::ops::Range<usize>,
    pub velocities: std::ops::Range<usize>,
    pub foot_contacts: std::ops::Range<usize>,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        FeatureLayout {
            root_scalars: 0..4,
            local_positions: 4..67,
            rotations: 67..193,
            velocities: 193..259,
            foot_contacts: 259..263,
        }
    }
}

impl FeatureLayout {
    pub fn position_cols(joint: usize) -> std::ops::Range<usize> {
        debug_assert!((1..22).contains(&joint));
        let base = 4 + (joint - 1) * 3;
        base..base + 3
    }

    pub fn rotation_cols(joint: usize) -> std::ops::Range<usize> {
        debug_assert!((1..22).contains(&joint));
        let base = 67 + (joint - 1) * 6;
        base..base + 6
    }

    pub fn velocity_cols(joint: usize) -> std::ops::Range<usize> {
        debug_assert!(joint < 22);
        let base = 193 + joint * 3;
        base..base + 3
    }
}

/// Source columns of a part's stream, in stream order.
///
/// Non-root parts concatenate, per joint in ascending index: local position
/// (3), rotation (6), velocity (3); legs then append their two contact bits
/// (ankle, toe). Root takes the four root scalars plus the pelvis velocity.
pub fn part_columns(part: PartId) -> Vec<usize> {
    let mut cols = Vec::with_capacity(PART_WIDTHS[part.index()]);
    match part {
        PartId::Root => {
            cols.extend(0..4);
            cols.extend(FeatureLayout::velocity_cols(0));
        }
        _ => {
            for &j in part.joints() {
                cols.extend(FeatureLayout::position_cols(j));
                cols.extend(FeatureLayout::rotation_cols(j));
                cols.extend(FeatureLayout::velocity_cols(j));
            }
            match part {
                PartId::LeftLeg => cols.extend([259, 260]),
                PartId::RightLeg => cols.extend([261, 262]),
                _ => {}
            }
        }
    }
    debug_assert_eq!(cols.len(), PART_WIDTHS[part.index()]);
    cols
}

/// The six per-part motion streams of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPartSet {
    num_frames: usize,
    streams: [Vec<f32>; 6],
}

impl BodyPartSet {
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn width(part: PartId) -> usize {
        PART_WIDTHS[part.index()]
    }

    /// Row-major frames x width stream for one part.
    pub fn stream(&self, part: PartId) -> &[f32] {
        &self.streams[part.index()]
    }

    pub fn from_streams(
        num_frames: usize,
        mut parts: Vec<(PartId, Vec<f32>)>,
    ) -> Result<Self, MotionError> {
        let mut streams: [Option<Vec<f32>>; 6] = Default::default();
        for (part, stream) in parts.drain(..) {
            let width = PART_WIDTHS[part.index()];
            if stream.len() != num_frames * width {
                if stream.len() % width == 0 {
                    return Err(MotionError::FrameMismatch {
                        part,
                        got: stream.len() / width,
                        expected: num_frames,
                    });
                }
                return Err(MotionError::PartWidth {
                    part,
                    got: stream.len() / num_frames.max(1),
                    expected: width,
                });
            }
            streams[part.index()] = Some(stream);
        }
        let mut out: [Vec<f32>; 6] = Default::default();
        for part in ALL_PARTS {
            out[part.index()] = streams[part.index()]
                .take()
                .ok_or(MotionError::MissingPart { part })?;
        }
        Ok(BodyPartSet {
            num_frames,
            streams: out,
        })
    }
}

/// Splits a motion into the six part streams. Exact inverse of [`merge`].
pub fn partition(m: &MotionSequence) -> BodyPartSet {
    let n = m.num_frames();
    let mut streams: [Vec<f32>; 6] = Default::default();
    for part in ALL_PARTS {
        let cols = part_columns(part);
        let mut stream = Vec::with_capacity(n * cols.len());
        for f in 0..n {
            let row = m.frame(f);
            stream.extend(cols.iter().map(|&c| row[c]));
        }
        streams[part.index()] = stream;
    }
    BodyPartSet {
        num_frames: n,
        streams,
    }
}

/// Reassembles a motion from six part streams. Exact inverse of [`partition`].
pub fn merge(parts: &BodyPartSet) -> Result<MotionSequence, MotionError> {
    let n = parts.num_frames;
    if n == 0 {
        return Err(MotionError::Empty);
    }
    let mut m = MotionSequence::zeros(n);
    for part in ALL_PARTS {
        let cols = part_columns(part);
        let width = cols.len();
        let stream = &parts.streams[part.index()];
        if stream.len() != n * width {
            return Err(MotionError::FrameMismatch {
                part,
                got: stream.len() / width,
                expected: n,
            });
        }
        for f in 0..n {
            let row = m.frame_mut(f);
            for (i, &c) in cols.iter().enumerate() {
                row[c] = stream[f * width + i];
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn widths_sum_to_feature_dim() {
        assert_eq!(PART_WIDTHS.iter().sum::<usize>(), FEATURE_DIM);
        assert_eq!(PART_WIDTHS[PartId::LeftLeg.index()], 50);
        assert_eq!(PART_WIDTHS[PartId::RightLeg.index()], 50);
        assert_eq!(PART_WIDTHS[PartId::LeftArm.index()], 48);
        assert_eq!(PART_WIDTHS[PartId::RightArm.index()], 48);
        assert_eq!(PART_WIDTHS[PartId::Backbone.index()], 60);
        assert_eq!(PART_WIDTHS[PartId::Root.index()], 7);
    }

    #[test]
    fn column_assignment_is_a_bijection() {
        let mut seen = vec![false; FEATURE_DIM];
        for part in ALL_PARTS {
            for c in part_columns(part) {
                assert!(!seen[c], "column {c} assigned twice");
                seen[c] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn partition_merge_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 7;
        let data: Vec<f32> = (0..n * FEATURE_DIM).map(|_| rng.gen::<f32>()).collect();
        let m = MotionSequence::new(n, data).unwrap();
        let back = merge(&partition(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn sentinel_frame_traces_every_column_once() {
        // Give each column a unique value and check it lands in the
        // documented slot of exactly one part stream.
        let mut m = MotionSequence::zeros(1);
        for c in 0..FEATURE_DIM {
            m.frame_mut(0)[c] = c as f32 + 1000.0;
        }
        let parts = partition(&m);
        let mut seen = vec![0usize; FEATURE_DIM];
        for part in ALL_PARTS {
            let cols = part_columns(part);
            let stream = parts.stream(part);
            for (slot, &col) in cols.iter().enumerate() {
                assert_eq!(stream[slot], col as f32 + 1000.0);
                seen[col] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn merge_rejects_missing_part() {
        let m = MotionSequence::zeros(3);
        let parts = partition(&m);
        let subset: Vec<(PartId, Vec<f32>)> = ALL_PARTS
            .iter()
            .take(5)
            .map(|&p| (p, parts.stream(p).to_vec()))
            .collect();
        assert!(matches!(
            BodyPartSet::from_streams(3, subset),
            Err(MotionError::MissingPart { .. })
        ));
    }

    #[test]
    fn merge_rejects_frame_mismatch() {
        let m = MotionSequence::zeros(3);
        let parts = partition(&m);
        let mut bad: Vec<(PartId, Vec<f32>)> = ALL_PARTS
            .iter()
            .map(|&p| (p, parts.stream(p).to_vec()))
            .collect();
        let width = PART_WIDTHS[bad[2].0.index()];
        bad[2].1.truncate(width * 2);
        assert!(BodyPartSet::from_streams(3, bad).is_err());
    }
}
