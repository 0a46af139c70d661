//! Unified text + motion token space.
//!
//! Token id layout (dense, no gaps):
//! - specials: `<pad>`, `<bos>`, `<eos>`, then `<som_*>` / `<eom_*>` per part;
//! - text pieces: 256 byte-fallback tokens plus learned merges;
//! - motion tokens: one per (part, code index), surface `left_arm_17` style,
//!   K per part in the canonical part order.
//!
//! `id -> token` and `token -> id` are mutual inverses over the whole
//! inventory; motion-token ranges are disjoint from text ids and from each
//! other per part.

mod bpe;
mod template;

pub use bpe::{Bpe, MergeRule};
pub use template::{
    parse_answer, parse_answer_text, render_answer_motions, render_answer_texts,
    render_motion_sections, render_prompt, render_text_sections, AnswerKind, ParsedAnswer,
    PromptField, PromptTemplate, PINNED_TEMPLATES_SHA256, TEMPLATES_ASSET,
};

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::motion::{PartId, ALL_PARTS};

/// Fixed label order of prompt answers (differs from the canonical
/// tokenization part order).
pub const ANSWER_ORDER: [PartId; 6] = [
    PartId::Root,
    PartId::Backbone,
    PartId::LeftArm,
    PartId::RightArm,
    PartId::LeftLeg,
    PartId::RightLeg,
];

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("token id {id} out of range (vocab size {size})")]
    IdOutOfRange { id: u32, size: usize },
    #[error("rendered prompt is {got} tokens, over the {max} limit")]
    OverLength { got: usize, max: usize },
    #[error("missing template field {0}")]
    MissingField(&'static str),
    #[error("parse error at {part:?}: {msg}")]
    Parse { part: PartId, msg: String },
    #[error("answer is missing the terminating period")]
    MissingTerminator,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad vocabulary file: {0}")]
    BadFile(String),
}

/// Special token ids.
pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
const SPECIAL_COUNT: u32 = 3 + 12;

/// Start-of-motion sentinel for a part.
pub fn som(part: PartId) -> u32 {
    3 + 2 * part.index() as u32
}

/// End-of-motion sentinel for a part.
pub fn eom(part: PartId) -> u32 {
    4 + 2 * part.index() as u32
}

fn special_surface(id: u32) -> String {
    match id {
        PAD => "<pad>".into(),
        BOS => "<bos>".into(),
        EOS => "<eos>".into(),
        _ => {
            let part = ALL_PARTS[((id - 3) / 2) as usize];
            if (id - 3) % 2 == 0 {
                format!("<som_{}>", part.tag())
            } else {
                format!("<eom_{}>", part.tag())
            }
        }
    }
}

/// Inclusive-exclusive id ranges per token class.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TokenRanges {
    pub specials: (u32, u32),
    pub text: (u32, u32),
    pub motion: (u32, u32),
}

/// The unified vocabulary.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    bpe: Bpe,
    codebook_size: usize,
    tokens: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds the vocabulary: trains the subword inventory on the corpus,
    /// then appends 6 * K motion tokens and the specials.
    pub fn build(corpus: &[String], codebook_size: usize, merges: usize) -> Result<Self, VocabError> {
        if corpus.is_empty() {
            return Err(VocabError::EmptyCorpus);
        }
        let normalized: Vec<String> = corpus.iter().map(|s| normalize_text(s)).collect();
        let bpe = Bpe::train(&normalized, merges);
        Ok(Self::assemble(bpe, codebook_size))
    }

    fn assemble(bpe: Bpe, codebook_size: usize) -> Self {
        let mut tokens = Vec::new();
        let mut lookup: HashMap<String, u32> = HashMap::new();
        let push = |tokens: &mut Vec<String>, lookup: &mut HashMap<String, u32>, s: String| {
            let prev = lookup.insert(s.clone(), tokens.len() as u32);
            debug_assert!(prev.is_none(), "surface collision: {s}");
            tokens.push(s);
        };
        for id in 0..SPECIAL_COUNT {
            push(&mut tokens, &mut lookup, special_surface(id));
        }
        for piece in 0..bpe.piece_count() as u32 {
            push(
                &mut tokens,
                &mut lookup,
                piece_surface(bpe.piece_bytes(piece)),
            );
        }
        for part in ALL_PARTS {
            for idx in 0..codebook_size {
                push(
                    &mut tokens,
                    &mut lookup,
                    format!("{}_{}", part.token_prefix(), idx),
                );
            }
        }
        Vocabulary {
            bpe,
            codebook_size,
            tokens,
            lookup,
        }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn ranges(&self) -> TokenRanges {
        let text_base = SPECIAL_COUNT;
        let motion_base = text_base + self.bpe.piece_count() as u32;
        TokenRanges {
            specials: (0, text_base),
            text: (text_base, motion_base),
            motion: (motion_base, motion_base + (6 * self.codebook_size) as u32),
        }
    }

    fn text_base(&self) -> u32 {
        SPECIAL_COUNT
    }

    fn motion_base(&self) -> u32 {
        SPECIAL_COUNT + self.bpe.piece_count() as u32
    }

    /// Reserved id of a motion token.
    pub fn motion_token(&self, part: PartId, index: usize) -> u32 {
        debug_assert!(index < self.codebook_size);
        self.motion_base() + (part.index() * self.codebook_size + index) as u32
    }

    /// Inverse of [`Vocabulary::motion_token`]; `None` for non-motion ids.
    pub fn motion_token_info(&self, id: u32) -> Option<(PartId, usize)> {
        let base = self.motion_base();
        if id < base || id >= base + (6 * self.codebook_size) as u32 {
            return None;
        }
        let off = (id - base) as usize;
        Some((ALL_PARTS[off / self.codebook_size], off % self.codebook_size))
    }

    pub fn id_to_token(&self, id: u32) -> Result<&str, VocabError> {
        self.tokens
            .get(id as usize)
            .map(|s| s.as_str())
            .ok_or(VocabError::IdOutOfRange {
                id,
                size: self.tokens.len(),
            })
    }

    pub fn token_to_id(&self, token: &str) -> Option<u32> {
        self.lookup.get(token).copied()
    }

    /// Encodes text. Reserved surfaces (specials, sentinels, motion tokens)
    /// map to their single ids; everything else goes through the subword
    /// inventory with byte fallback.
    pub fn encode_text(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        let bytes = text.as_bytes();
        let mut plain_start = 0usize;
        let mut i = 0usize;
        while i < bytes.len() {
            let reserved = self.match_reserved(text, i);
            if let Some((id, len)) = reserved {
                if plain_start < i {
                    self.encode_plain(&text[plain_start..i], &mut out);
                }
                out.push(id);
                i += len;
                plain_start = i;
            } else {
                i += utf8_len(bytes[i]);
            }
        }
        if plain_start < bytes.len() {
            self.encode_plain(&text[plain_start..], &mut out);
        }
        out
    }

    fn encode_plain(&self, text: &str, out: &mut Vec<u32>) {
        let base = self.text_base();
        out.extend(self.bpe.encode(text).into_iter().map(|p| p + base));
    }

    /// Attempts to match a reserved surface at byte offset `i`. Motion
    /// tokens only match on word boundaries.
    fn match_reserved(&self, text: &str, i: usize) -> Option<(u32, usize)> {
        let rest = &text[i..];
        let bytes = text.as_bytes();
        if rest.starts_with('<') {
            for id in 0..SPECIAL_COUNT {
                let surf = &self.tokens[id as usize];
                if rest.starts_with(surf.as_str()) {
                    return Some((id, surf.len()));
                }
            }
            return None;
        }
        // Word boundary check for motion-token surfaces.
        if i > 0 && is_word_byte(bytes[i - 1]) {
            return None;
        }
        for part in ALL_PARTS {
            let prefix = part.token_prefix();
            if !rest.starts_with(prefix) {
                continue;
            }
            let after = &rest[prefix.len()..];
            if !after.starts_with('_') {
                continue;
            }
            let digits: String = after[1..].chars().take_while(|c| c.is_ascii_digit()).collect();
            if digits.is_empty() {
                continue;
            }
            let total = prefix.len() + 1 + digits.len();
            let next = rest.as_bytes().get(total).copied();
            if next.is_some_and(is_word_byte) {
                continue;
            }
            if let Ok(idx) = digits.parse::<usize>() {
                if idx < self.codebook_size {
                    return Some((self.motion_token(part, idx), total));
                }
            }
        }
        None
    }

    /// Decodes ids back to text.
    pub fn decode_text(&self, ids: &[u32]) -> Result<String, VocabError> {
        let text_base = self.text_base();
        let motion_base = self.motion_base();
        let mut out = String::new();
        let mut byte_buf: Vec<u8> = Vec::new();
        for &id in ids {
            if id as usize >= self.tokens.len() {
                return Err(VocabError::IdOutOfRange {
                    id,
                    size: self.tokens.len(),
                });
            }
            if id >= text_base && id < motion_base {
                byte_buf.extend_from_slice(self.bpe.piece_bytes(id - text_base));
            } else {
                if !byte_buf.is_empty() {
                    out.push_str(&String::from_utf8_lossy(&byte_buf));
                    byte_buf.clear();
                }
                out.push_str(&self.tokens[id as usize]);
            }
        }
        if !byte_buf.is_empty() {
            out.push_str(&String::from_utf8_lossy(&byte_buf));
        }
        Ok(out)
    }

    /// Writes the vocabulary file: version, ordered token list, class
    /// ranges, merge rules.
    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        let doc = VocabFile {
            format_version: 1,
            codebook_size: self.codebook_size,
            ranges: self.ranges(),
            merges: self.bpe.merges().to_vec(),
            tokens: self.tokens.clone(),
        };
        let json = serde_json::to_string(&doc).map_err(|e| VocabError::BadFile(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        let json = std::fs::read_to_string(path)?;
        let doc: VocabFile =
            serde_json::from_str(&json).map_err(|e| VocabError::BadFile(e.to_string()))?;
        if doc.format_version != 1 {
            return Err(VocabError::BadFile(format!(
                "unsupported version {}",
                doc.format_version
            )));
        }
        let bpe = Bpe::from_merges(doc.merges);
        let vocab = Self::assemble(bpe, doc.codebook_size);
        if vocab.tokens != doc.tokens {
            return Err(VocabError::BadFile(
                "token list does not match merges".into(),
            ));
        }
        Ok(vocab)
    }
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    format_version: u32,
    codebook_size: usize,
    ranges: TokenRanges,
    merges: Vec<MergeRule>,
    tokens: Vec<String>,
}

/// Surface of a text piece. Pieces that are not clean printable UTF-8, or
/// that would collide with special/motion surfaces, use a byte escape.
fn piece_surface(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s)
            if !s.is_empty()
                && !s.starts_with('<')
                && !looks_like_motion_token(s)
                && s.chars().all(|c| !c.is_control()) =>
        {
            s.to_string()
        }
        _ => bytes.iter().map(|b| format!("<0x{b:02X}>")).collect(),
    }
}

fn looks_like_motion_token(s: &str) -> bool {
    ALL_PARTS.iter().any(|p| {
        s.strip_prefix(p.token_prefix())
            .and_then(|rest| rest.strip_prefix('_'))
            .is_some_and(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
    })
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b >= 0xF0 => 4,
        b if b >= 0xE0 => 3,
        b if b >= 0xC0 => 2,
        _ => 1,
    }
}

/// Whitespace normalization applied before encoding: runs of whitespace
/// collapse to single spaces, leading/trailing whitespace is stripped.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_vocab() -> Vocabulary {
        let corpus = vec![
            "a person walks forward at a steady pace".to_string(),
            "the right arm swings while the left arm stays still".to_string(),
            "the legs step in rhythm and the spine stays upright".to_string(),
        ];
        Vocabulary::build(&corpus, 512, 100).unwrap()
    }

    #[test]
    fn motion_token_block_size() {
        let v = small_vocab();
        let r = v.ranges();
        assert_eq!(r.motion.1 - r.motion.0, 3072);
    }

    #[test]
    fn corpus_sentences_round_trip() {
        let v = small_vocab();
        for s in [
            "a person walks forward at a steady pace",
            "the right arm swings while the left arm stays still",
            "completely novel words survive byte fallback",
        ] {
            let ids = v.encode_text(s);
            assert_eq!(v.decode_text(&ids).unwrap(), s);
        }
    }

    #[test]
    fn no_surface_collisions() {
        let v = small_vocab();
        let mut seen = std::collections::HashSet::new();
        for id in 0..v.size() as u32 {
            let tok = v.id_to_token(id).unwrap();
            assert!(seen.insert(tok.to_string()), "duplicate surface {tok}");
        }
    }

    #[test]
    fn id_token_maps_are_mutual_inverses() {
        let v = small_vocab();
        for id in 0..v.size() as u32 {
            let tok = v.id_to_token(id).unwrap();
            assert_eq!(v.token_to_id(tok), Some(id), "id {id} surface {tok}");
        }
    }

    #[test]
    fn empty_string_encodes_to_nothing() {
        let v = small_vocab();
        assert!(v.encode_text("").is_empty());
        assert_eq!(v.decode_text(&[]).unwrap(), "");
    }

    #[test]
    fn motion_surface_form_gets_reserved_id() {
        let v = small_vocab();
        let ids = v.encode_text("left_arm_17");
        assert_eq!(ids, vec![v.motion_token(PartId::LeftArm, 17)]);
        // Out-of-range indices are plain text.
        let ids = v.encode_text("left_arm_9999");
        assert!(ids.len() > 1);
        assert_eq!(v.decode_text(&ids).unwrap(), "left_arm_9999");
    }

    #[test]
    fn motion_tokens_need_word_boundaries() {
        let v = small_vocab();
        let ids = v.encode_text("xleft_arm_17");
        assert!(!ids.contains(&v.motion_token(PartId::LeftArm, 17)));
        let ids = v.encode_text("left_arm_17x");
        assert!(!ids.contains(&v.motion_token(PartId::LeftArm, 17)));
    }

    #[test]
    fn sentinels_encode_to_single_ids() {
        let v = small_vocab();
        let ids = v.encode_text("<som_la> left_arm_3 <eom_la>");
        assert_eq!(
            ids,
            vec![
                som(PartId::LeftArm),
                v.token_to_id(" ").unwrap(),
                v.motion_token(PartId::LeftArm, 3),
                v.token_to_id(" ").unwrap(),
                eom(PartId::LeftArm),
            ]
        );
    }

    #[test]
    fn out_of_range_id_is_an_error() {
        let v = small_vocab();
        let bad = v.size() as u32;
        assert!(matches!(
            v.decode_text(&[bad]),
            Err(VocabError::IdOutOfRange { .. })
        ));
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(
            Vocabulary::build(&[], 512, 10),
            Err(VocabError::EmptyCorpus)
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.json");
        let v = small_vocab();
        v.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(loaded.size(), v.size());
        let text = "the right arm swings";
        assert_eq!(loaded.encode_text(text), v.encode_text(text));
    }

    #[test]
    fn normalization_collapses_whitespace() {
        assert_eq!(normalize_text("  a\tb \n c \n"), "a b c");
    }
}
