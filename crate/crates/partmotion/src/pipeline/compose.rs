//! Deterministic rule-based composition of content and style part texts.

use serde::{Deserialize, Serialize};

use crate::motion::{PartId, ALL_PARTS};

use super::PartTexts;

/// Per-part resolution policy when content and style both speak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Affinity {
    ContentWins,
    StyleWins,
    /// Content clause joined to the style clause with a connective.
    Blend,
}

/// Affinity per part, indexed by [`PartId::index`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffinityTable {
    pub by_part: [Affinity; 6],
}

impl AffinityTable {
    pub fn uniform(a: Affinity) -> Self {
        AffinityTable { by_part: [a; 6] }
    }

    pub fn get(&self, part: PartId) -> Affinity {
        self.by_part[part.index()]
    }

    pub fn set(&mut self, part: PartId, a: Affinity) {
        self.by_part[part.index()] = a;
    }
}

impl Default for AffinityTable {
    /// Styles mostly live in the upper body; locomotion content lives in
    /// the legs and root, where both aspects should survive.
    fn default() -> Self {
        let mut t = AffinityTable::uniform(Affinity::Blend);
        t.set(PartId::LeftArm, Affinity::StyleWins);
        t.set(PartId::RightArm, Affinity::StyleWins);
        t.set(PartId::Backbone, Affinity::StyleWins);
        t
    }
}

const BLEND_CONNECTIVE: &str = ", while ";

/// Pure table application: per-part selection or concatenation.
pub fn rule_compose(content: &PartTexts, style: &PartTexts, affinity: &AffinityTable) -> PartTexts {
    PartTexts::from_fn(|part| match affinity.get(part) {
        Affinity::ContentWins => content.get(part).to_string(),
        Affinity::StyleWins => style.get(part).to_string(),
        Affinity::Blend => format!(
            "{}{}{}",
            content.get(part),
            BLEND_CONNECTIVE,
            style.get(part)
        ),
    })
}

/// Action verbs that mark a part's content text as non-negotiable. Plain
/// locomotion phrasing ("swings", "steps") stays negotiable so styles can
/// restyle it.
const SALIENT_ACTIONS: [&str; 8] = [
    "throw", "wave", "punch", "kick", "jump", "reach", "clap", "catch",
];

fn content_is_salient(text: &str) -> bool {
    let lower = text.to_lowercase();
    SALIENT_ACTIONS.iter().any(|verb| lower.contains(verb))
}

/// Affinity actually applied by the rule backend: the base table, overridden
/// per part by degenerate cases (empty or identical texts) and by content
/// salience (a part whose content text names a deliberate action keeps it).
pub fn effective_affinity(
    content: &PartTexts,
    style: &PartTexts,
    base: &AffinityTable,
) -> AffinityTable {
    let mut out = base.clone();
    for part in ALL_PARTS {
        let c = content.get(part).trim();
        let s = style.get(part).trim();
        let choice = if s.is_empty() || c == s {
            Affinity::ContentWins
        } else if c.is_empty() {
            Affinity::StyleWins
        } else if content_is_salient(c) {
            Affinity::ContentWins
        } else {
            base.get(part)
        };
        out.set(part, choice);
    }
    out
}
