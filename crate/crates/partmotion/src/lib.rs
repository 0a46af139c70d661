//! Body-part-centric stylized motion generation at desk scale.
//!
//! The crate is organized around a small number of subsystems:
//!
//! - [`tensor`]: a dense f32 tensor kernel with define-by-run reverse-mode
//!   differentiation and an Adam optimizer. Everything trainable in this
//!   crate runs on it.
//! - [`motion`]: the 263-feature frame layout, the six-body-part partition
//!   and its inverse, global joint recovery, and motion file formats.
//! - [`vq`]: six part-specific VQ-VAEs turning part motion streams into
//!   discrete token sequences and back.
//! - [`vocab`]: a unified token space over subword text tokens, per-part
//!   motion tokens, and special sentinels, plus prompt templates and the
//!   strict answer grammar.
//! - [`lm`]: a toy encoder-decoder sequence model over the unified
//!   vocabulary with pre-training and instruction-style training tasks.
//! - [`corpus`]: a procedural generator of (motion, global text, part texts)
//!   triplets, dataset persistence, and splits.
//! - [`pipeline`]: the reason -> compose -> generate workflow over a local
//!   model or an external chat-completion service, with a deterministic
//!   rule-based composer.
//! - [`metrics`]: FS-Ratio, SRA, MM Dist, and R-Precision with in-repo
//!   trained evaluator models.

pub mod corpus;
pub mod lm;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod tensor;
pub mod vocab;
pub mod vq;
