//! Prompt templates and the strict labeled-section answer grammar.
//!
//! Answers always carry the six part labels in the fixed order Root,
//! Backbone, Left Arm, Right Arm, Left Leg, Right Leg, comma-separated and
//! terminated by a single period. Section contents must not contain a
//! `, <Label>: ` marker of a later section; the renderer's callers own that
//! constraint.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::motion::{PartId, ALL_PARTS};

use super::{normalize_text, VocabError, Vocabulary, ANSWER_ORDER};

/// The template strings, shipped verbatim; tests pin this asset's hash.
pub const TEMPLATES_ASSET: &str = include_str!("../../assets/templates.txt");

/// SHA-256 of [`TEMPLATES_ASSET`]; recorded in provenance and pinned by tests.
pub const PINNED_TEMPLATES_SHA256: &str =
    "1e36dda6903b63bff12080da324a52320af0b7b2d365ed1813018054dde35a82";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptTemplate {
    /// Body-part texts from a global text or tokenized motion.
    Reason,
    /// Instruction-style variant of Reason for global texts.
    GlobalToParts,
    /// Conflict-free unification of content and style part texts.
    Compose,
    /// Body-part motion tokens from unified part texts.
    Generate,
}

impl PromptTemplate {
    fn key(self) -> &'static str {
        match self {
            PromptTemplate::Reason => "reason",
            PromptTemplate::GlobalToParts => "global_to_parts",
            PromptTemplate::Compose => "compose",
            PromptTemplate::Generate => "generate",
        }
    }
}

/// A named placeholder value.
#[derive(Debug, Clone, Copy)]
pub struct PromptField<'a> {
    pub name: &'static str,
    pub value: &'a str,
}

fn templates() -> &'static HashMap<String, String> {
    static CACHE: OnceLock<HashMap<String, String>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut map = HashMap::new();
        let mut current: Option<String> = None;
        for line in TEMPLATES_ASSET.lines() {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.to_string());
            } else if let Some(name) = &current {
                if !line.trim().is_empty() {
                    map.insert(name.clone(), line.to_string());
                }
            }
        }
        map
    })
}

/// Renders a template to token ids: substitutes every placeholder,
/// normalizes whitespace, encodes, and enforces the input length cap.
pub fn render_prompt(
    vocab: &Vocabulary,
    template: PromptTemplate,
    fields: &[PromptField<'_>],
    max_len: usize,
) -> Result<Vec<u32>, VocabError> {
    let raw = templates()
        .get(template.key())
        .expect("template asset covers all variants");
    // Substitute placeholders left to right so field values containing
    // brace patterns are never re-scanned.
    let mut text = String::with_capacity(raw.len());
    let mut rest = raw.as_str();
    while let Some(start) = rest.find('{') {
        let end = rest[start..]
            .find('}')
            .map(|e| start + e + 1)
            .unwrap_or(rest.len());
        text.push_str(&rest[..start]);
        let name = &rest[start + 1..end - 1];
        let field = fields.iter().find(|f| f.name == name).ok_or_else(|| {
            VocabError::MissingField(match name {
                "input" => "input",
                "content" => "content",
                _ => "style",
            })
        })?;
        text.push_str(field.value);
        rest = &rest[end..];
    }
    text.push_str(rest);
    let ids = vocab.encode_text(&normalize_text(&text));
    if ids.len() > max_len {
        return Err(VocabError::OverLength {
            got: ids.len(),
            max: max_len,
        });
    }
    Ok(ids)
}

/// `Root: ..., Backbone: ..., ..., Right Leg: ...` without the terminator;
/// used when part texts are embedded inside a prompt input.
pub fn render_text_sections(texts: &[String; 6]) -> String {
    ANSWER_ORDER
        .iter()
        .map(|p| format!("{}: {}", p.label(), texts[p.index()]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Complete text answer: sections plus the terminating period.
pub fn render_answer_texts(texts: &[String; 6]) -> String {
    format!("{}.", render_text_sections(texts))
}

/// Sentinel-wrapped motion token sections, labels in answer order.
pub fn render_motion_sections(indices: &[Vec<usize>; 6]) -> String {
    ANSWER_ORDER
        .iter()
        .map(|p| {
            let body: Vec<String> = indices[p.index()]
                .iter()
                .map(|&i| format!("{}_{}", p.token_prefix(), i))
                .collect();
            if body.is_empty() {
                format!("{}: <som_{}> <eom_{}>", p.label(), p.tag(), p.tag())
            } else {
                format!(
                    "{}: <som_{}> {} <eom_{}>",
                    p.label(),
                    p.tag(),
                    body.join(" "),
                    p.tag()
                )
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Complete motion answer: sections plus the terminating period.
pub fn render_answer_motions(indices: &[Vec<usize>; 6]) -> String {
    format!("{}.", render_motion_sections(indices))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerKind {
    PartTexts,
    PartMotions,
}

/// Parsed answer, arrays indexed by [`PartId::index`].
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedAnswer {
    Texts([String; 6]),
    Motions([Vec<usize>; 6]),
}

/// Strict parse of the six labeled sections in fixed order.
pub fn parse_answer(
    vocab: &Vocabulary,
    ids: &[u32],
    kind: AnswerKind,
) -> Result<ParsedAnswer, VocabError> {
    let text = vocab.decode_text(ids)?;
    parse_answer_text(vocab, &text, kind)
}

/// String-level entry point of [`parse_answer`].
pub fn parse_answer_text(
    vocab: &Vocabulary,
    text: &str,
    kind: AnswerKind,
) -> Result<ParsedAnswer, VocabError> {
    let s = text.trim();
    let mut sections: [String; 6] = Default::default();
    let first_label = format!("{}: ", ANSWER_ORDER[0].label());
    let mut rest = s.strip_prefix(&first_label).ok_or_else(|| VocabError::Parse {
        part: ANSWER_ORDER[0],
        msg: format!("answer must start with {first_label:?}"),
    })?;
    for i in 0..6 {
        let part = ANSWER_ORDER[i];
        if i + 1 < 6 {
            let next = ANSWER_ORDER[i + 1];
            let marker = format!(", {}: ", next.label());
            let pos = rest.find(&marker).ok_or_else(|| VocabError::Parse {
                part: next,
                msg: format!("missing section {:?}", next.label()),
            })?;
            sections[part.index()] = rest[..pos].to_string();
            rest = &rest[pos + marker.len()..];
        } else {
            let content = rest.strip_suffix('.').ok_or(VocabError::MissingTerminator)?;
            sections[part.index()] = content.to_string();
        }
    }
    match kind {
        AnswerKind::PartTexts => Ok(ParsedAnswer::Texts(sections)),
        AnswerKind::PartMotions => {
            let mut out: [Vec<usize>; 6] = Default::default();
            for part in ALL_PARTS {
                out[part.index()] = parse_motion_section(vocab, part, &sections[part.index()])?;
            }
            Ok(ParsedAnswer::Motions(out))
        }
    }
}

fn parse_motion_section(
    vocab: &Vocabulary,
    part: PartId,
    content: &str,
) -> Result<Vec<usize>, VocabError> {
    let tokens: Vec<&str> = content.split_whitespace().collect();
    let som = format!("<som_{}>", part.tag());
    let eom = format!("<eom_{}>", part.tag());
    if tokens.first() != Some(&som.as_str()) {
        return Err(VocabError::Parse {
            part,
            msg: format!("section must open with {som}"),
        });
    }
    if tokens.len() < 2 || tokens.last() != Some(&eom.as_str()) {
        return Err(VocabError::Parse {
            part,
            msg: format!("unpaired sentinel: missing {eom}"),
        });
    }
    let mut indices = Vec::with_capacity(tokens.len() - 2);
    for tok in &tokens[1..tokens.len() - 1] {
        let idx = tok
            .strip_prefix(part.token_prefix())
            .and_then(|r| r.strip_prefix('_'))
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(|| VocabError::Parse {
                part,
                msg: format!("unexpected token {tok:?} in motion section"),
            })?;
        if idx >= vocab.codebook_size() {
            return Err(VocabError::Parse {
                part,
                msg: format!("code index {idx} out of range"),
            });
        }
        indices.push(idx);
    }
    Ok(indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    fn vocab() -> Vocabulary {
        let corpus = vec![
            "a person walks forward".to_string(),
            "the arms swing gently while the legs stride".to_string(),
        ];
        Vocabulary::build(&corpus, 512, 50).unwrap()
    }

    #[test]
    fn templates_asset_hash_is_pinned() {
        let mut hasher = Sha256::new();
        hasher.update(TEMPLATES_ASSET.as_bytes());
        let hash = format!("{:x}", hasher.finalize());
        // Template wording is part of the model contract; changing the
        // asset invalidates trained checkpoints.
        assert_eq!(
            hash, PINNED_TEMPLATES_SHA256,
            "templates.txt changed; retrain models and update this hash"
        );
    }

    #[test]
    fn reason_template_contains_task_prompt_and_labels() {
        let v = vocab();
        let ids = render_prompt(
            &v,
            PromptTemplate::GlobalToParts,
            &[PromptField {
                name: "input",
                value: "a person walks",
            }],
            512,
        )
        .unwrap();
        let text = v.decode_text(&ids).unwrap();
        assert!(text.contains("a person walks"));
        for part in ANSWER_ORDER {
            assert!(text.contains(part.label()), "missing {}", part.label());
        }
        let order: Vec<usize> = ANSWER_ORDER
            .iter()
            .map(|p| text.find(p.label()).unwrap())
            .collect();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(order, sorted, "labels out of order in template");
    }

    #[test]
    fn reason_template_has_literal_task_prompt() {
        let v = vocab();
        let ids = render_prompt(
            &v,
            PromptTemplate::Reason,
            &[PromptField {
                name: "input",
                value: "a person walks",
            }],
            512,
        )
        .unwrap();
        let text = v.decode_text(&ids).unwrap();
        assert!(text.contains("Reason out the body-part texts"));
    }

    #[test]
    fn generate_with_empty_texts_still_renders_six_slots() {
        let texts: [String; 6] = Default::default();
        let sections = render_text_sections(&texts);
        let v = vocab();
        let ids = render_prompt(
            &v,
            PromptTemplate::Generate,
            &[PromptField {
                name: "input",
                value: &sections,
            }],
            512,
        )
        .unwrap();
        let text = v.decode_text(&ids).unwrap();
        for part in ANSWER_ORDER {
            assert!(text.contains(&format!("{}:", part.label())));
        }
    }

    #[test]
    fn missing_field_is_an_error() {
        let v = vocab();
        let err = render_prompt(&v, PromptTemplate::Compose, &[], 512).unwrap_err();
        assert!(matches!(err, VocabError::MissingField(_)));
    }

    #[test]
    fn over_length_is_an_explicit_error() {
        let v = vocab();
        let long = "walk ".repeat(600);
        let err = render_prompt(
            &v,
            PromptTemplate::Reason,
            &[PromptField {
                name: "input",
                value: &long,
            }],
            512,
        )
        .unwrap_err();
        assert!(matches!(err, VocabError::OverLength { .. }));
    }

    #[test]
    fn text_answer_round_trip_is_field_exact() {
        let v = vocab();
        let texts: [String; 6] = [
            "the right arm swings".into(),
            "the left arm stays still".into(),
            "the right leg strides".into(),
            "the left leg follows".into(),
            "the spine leans forward".into(),
            "the root moves ahead steadily".into(),
        ];
        let answer = render_answer_texts(&texts);
        let ids = v.encode_text(&normalize_text(&answer));
        match parse_answer(&v, &ids, AnswerKind::PartTexts).unwrap() {
            ParsedAnswer::Texts(parsed) => assert_eq!(parsed, texts),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn motion_answer_round_trip_is_exact() {
        let v = vocab();
        let indices: [Vec<usize>; 6] = [
            vec![1, 2, 3],
            vec![4, 5, 6],
            vec![7, 8, 9],
            vec![10, 11, 12],
            vec![13, 14, 15],
            vec![16, 17, 511],
        ];
        let answer = render_answer_motions(&indices);
        let ids = v.encode_text(&normalize_text(&answer));
        match parse_answer(&v, &ids, AnswerKind::PartMotions).unwrap() {
            ParsedAnswer::Motions(parsed) => assert_eq!(parsed, indices),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn swapped_label_order_is_a_parse_error() {
        let v = vocab();
        let bad = "Backbone: x, Root: y, Left Arm: a, Right Arm: b, Left Leg: c, Right Leg: d.";
        let ids = v.encode_text(bad);
        assert!(parse_answer(&v, &ids, AnswerKind::PartTexts).is_err());
    }

    #[test]
    fn truncated_motion_block_names_the_part() {
        let v = vocab();
        let bad = "Root: <som_rt> root_1, Backbone: <som_bb> backbone_2 <eom_bb>, \
                   Left Arm: <som_la> <eom_la>, Right Arm: <som_ra> <eom_ra>, \
                   Left Leg: <som_ll> <eom_ll>, Right Leg: <som_rl> <eom_rl>.";
        let ids = v.encode_text(bad);
        match parse_answer(&v, &ids, AnswerKind::PartMotions) {
            Err(VocabError::Parse { part, msg }) => {
                assert_eq!(part, PartId::Root);
                assert!(msg.contains("<eom_rt>"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_code_index_is_a_parse_error() {
        let v = vocab();
        let bad = "Root: <som_rt> root_512 <eom_rt>, Backbone: <som_bb> <eom_bb>, \
                   Left Arm: <som_la> <eom_la>, Right Arm: <som_ra> <eom_ra>, \
                   Left Leg: <som_ll> <eom_ll>, Right Leg: <som_rl> <eom_rl>.";
        // root_512 is out of range for K = 512 and is not a reserved
        // surface, so it arrives at the parser as plain text.
        let ids = v.encode_text(bad);
        assert!(parse_answer(&v, &ids, AnswerKind::PartMotions).is_err());
    }

    #[test]
    fn missing_terminator_is_an_error() {
        let v = vocab();
        let bad = "Root: a, Backbone: b, Left Arm: c, Right Arm: d, Left Leg: e, Right Leg: f";
        let ids = v.encode_text(bad);
        assert!(matches!(
            parse_answer(&v, &ids, AnswerKind::PartTexts),
            Err(VocabError::MissingTerminator)
        ));
    }
}
