//! Byte-fallback merge-based subword tokenizer.
//!
//! Texts are pre-tokenized into segments (an optional leading space plus a
//! run of non-space bytes); merges are learned within segments and never
//! cross them. The base inventory is all 256 byte values, so any string
//! round-trips exactly regardless of the learned merges.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// A learned merge: the pair of existing piece ids and the resulting piece.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRule {
    pub left: u32,
    pub right: u32,
}

/// Subword inventory: 256 byte pieces plus one piece per merge.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Bpe {
    merges: Vec<MergeRule>,
    /// Byte content of every piece, indexed by piece id.
    pieces: Vec<Vec<u8>>,
}

impl Bpe {
    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn merges(&self) -> &[MergeRule] {
        &self.merges
    }

    pub fn piece_bytes(&self, id: u32) -> &[u8] {
        &self.pieces[id as usize]
    }

    /// Learns up to `max_merges` merges from the corpus.
    pub fn train(corpus: &[String], max_merges: usize) -> Self {
        let mut bpe = Bpe {
            merges: Vec::new(),
            pieces: (0..=255u8).map(|b| vec![b]).collect(),
        };
        // Work on unique segments weighted by frequency.
        let mut seg_counts: HashMap<Vec<u8>, usize> = HashMap::new();
        for text in corpus {
            for seg in segments(text) {
                *seg_counts.entry(seg.as_bytes().to_vec()).or_default() += 1;
            }
        }
        let mut words: Vec<(Vec<u32>, usize)> = seg_counts
            .into_iter()
            .map(|(bytes, count)| (bytes.iter().map(|&b| b as u32).collect(), count))
            .collect();
        words.sort(); // deterministic order independent of hash state

        for _ in 0..max_merges {
            let mut pair_counts: HashMap<(u32, u32), usize> = HashMap::new();
            for (word, count) in &words {
                for pair in word.windows(2) {
                    *pair_counts.entry((pair[0], pair[1])).or_default() += count;
                }
            }
            // Most frequent pair; ties break to the smallest pair ids.
            let Some((&pair, &count)) = pair_counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            else {
                break;
            };
            if count < 2 {
                break;
            }
            let new_id = bpe.pieces.len() as u32;
            let mut merged_bytes = bpe.pieces[pair.0 as usize].clone();
            merged_bytes.extend_from_slice(&bpe.pieces[pair.1 as usize]);
            bpe.pieces.push(merged_bytes);
            bpe.merges.push(MergeRule {
                left: pair.0,
                right: pair.1,
            });
            for (word, _) in words.iter_mut() {
                apply_merge(word, pair, new_id);
            }
        }
        bpe
    }

    /// Rebuilds the piece table from a merge list (for deserialization).
    pub fn from_merges(merges: Vec<MergeRule>) -> Self {
        let mut pieces: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        for rule in &merges {
            let mut bytes = pieces[rule.left as usize].clone();
            bytes.extend_from_slice(&pieces[rule.right as usize]);
            pieces.push(bytes);
        }
        Bpe { merges, pieces }
    }

    /// Encodes text into piece ids (byte fallback guarantees totality).
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for seg in segments(text) {
            let mut word: Vec<u32> = seg.bytes().map(|b| b as u32).collect();
            for (rank, rule) in self.merges.iter().enumerate() {
                let new_id = 256 + rank as u32;
                apply_merge(&mut word, (rule.left, rule.right), new_id);
            }
            out.extend(word);
        }
        out
    }

    /// Decodes piece ids back to text. Invalid UTF-8 cannot arise from ids
    /// produced by [`Bpe::encode`] on valid input.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut bytes = Vec::new();
        for &id in ids {
            bytes.extend_from_slice(&self.pieces[id as usize]);
        }
        String::from_utf8_lossy(&bytes).into_owned()
    }
}

fn apply_merge(word: &mut Vec<u32>, pair: (u32, u32), new_id: u32) {
    let mut i = 0;
    while i + 1 < word.len() {
        if word[i] == pair.0 && word[i + 1] == pair.1 {
            word[i] = new_id;
            word.remove(i + 1);
        } else {
            i += 1;
        }
    }
}

/// Splits text into segments of (optional single leading space + non-space
/// run). Runs of spaces become single-space segments.
fn segments(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch == ' ' {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            current.push(' ');
        } else {
            current.push(ch);
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}
