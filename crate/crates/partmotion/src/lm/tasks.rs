//! Builders turning annotated samples into [`TrainingTask`]s.
//!
//! Inputs render through the same templates the pipeline uses at inference
//! time, so an overfit model reproduces its training targets end to end.

use crate::vocab::{
    normalize_text, render_answer_motions, render_answer_texts, render_motion_sections,
    render_prompt, render_text_sections, PromptField, PromptTemplate, VocabError, Vocabulary, EOS,
};

use super::{LmError, TaskKind, TrainingTask};

#[derive(Debug, thiserror::Error)]
pub enum TaskBuildError {
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Lm(#[from] LmError),
}

fn answer_ids(vocab: &Vocabulary, answer: &str) -> Vec<u32> {
    let mut ids = vocab.encode_text(&normalize_text(answer));
    ids.push(EOS);
    ids
}

/// Reason template over a global text, answering with part texts.
pub fn reason_from_text(
    vocab: &Vocabulary,
    max_len: usize,
    global_text: &str,
    part_texts: &[String; 6],
) -> Result<TrainingTask, TaskBuildError> {
    let input = render_prompt(
        vocab,
        PromptTemplate::Reason,
        &[PromptField {
            name: "input",
            value: global_text,
        }],
        max_len,
    )?;
    let target = answer_ids(vocab, &render_answer_texts(part_texts));
    Ok(TrainingTask::new(TaskKind::GlobalToParts, input, target)?)
}

/// Reason template over tokenized motion, answering with part texts.
pub fn reason_from_motion(
    vocab: &Vocabulary,
    max_len: usize,
    motion_tokens: &[Vec<usize>; 6],
    part_texts: &[String; 6],
) -> Result<TrainingTask, TaskBuildError> {
    let sections = render_motion_sections(motion_tokens);
    let input = render_prompt(
        vocab,
        PromptTemplate::Reason,
        &[PromptField {
            name: "input",
            value: &sections,
        }],
        max_len,
    )?;
    let target = answer_ids(vocab, &render_answer_texts(part_texts));
    Ok(TrainingTask::new(TaskKind::MotionToText, input, target)?)
}

/// Instructed global -> parts variant.
pub fn global_to_parts(
    vocab: &Vocabulary,
    max_len: usize,
    global_text: &str,
    part_texts: &[String; 6],
) -> Result<TrainingTask, TaskBuildError> {
    let input = render_prompt(
        vocab,
        PromptTemplate::GlobalToParts,
        &[PromptField {
            name: "input",
            value: global_text,
        }],
        max_len,
    )?;
    let target = answer_ids(vocab, &render_answer_texts(part_texts));
    Ok(TrainingTask::new(TaskKind::GlobalToParts, input, target)?)
}

/// Compose template: content + style part texts -> unified part texts.
pub fn compose(
    vocab: &Vocabulary,
    max_len: usize,
    content: &[String; 6],
    style: &[String; 6],
    unified: &[String; 6],
) -> Result<TrainingTask, TaskBuildError> {
    let content_s = render_text_sections(content);
    let style_s = render_text_sections(style);
    let input = render_prompt(
        vocab,
        PromptTemplate::Compose,
        &[
            PromptField {
                name: "content",
                value: &content_s,
            },
            PromptField {
                name: "style",
                value: &style_s,
            },
        ],
        max_len,
    )?;
    let target = answer_ids(vocab, &render_answer_texts(unified));
    Ok(TrainingTask::new(TaskKind::Compose, input, target)?)
}

/// Generate template: unified part texts -> sentinel-wrapped motion tokens.
pub fn generate_motion(
    vocab: &Vocabulary,
    max_len: usize,
    unified: &[String; 6],
    motion_tokens: &[Vec<usize>; 6],
) -> Result<TrainingTask, TaskBuildError> {
    let sections = render_text_sections(unified);
    let input = render_prompt(
        vocab,
        PromptTemplate::Generate,
        &[PromptField {
            name: "input",
            value: &sections,
        }],
        max_len,
    )?;
    let target = answer_ids(vocab, &render_answer_motions(motion_tokens));
    Ok(TrainingTask::new(TaskKind::PartsToMotion, input, target)?)
}

/// Raw translation: part texts -> motion tokens (no instruction template).
pub fn text_to_motion(
    vocab: &Vocabulary,
    part_texts: &[String; 6],
    motion_tokens: &[Vec<usize>; 6],
) -> Result<TrainingTask, TaskBuildError> {
    let input = vocab.encode_text(&normalize_text(&render_text_sections(part_texts)));
    let target = answer_ids(vocab, &render_answer_motions(motion_tokens));
    Ok(TrainingTask::new(TaskKind::TextToMotion, input, target)?)
}

/// Raw translation: motion tokens -> part texts (no instruction template).
pub fn motion_to_text(
    vocab: &Vocabulary,
    motion_tokens: &[Vec<usize>; 6],
    part_texts: &[String; 6],
) -> Result<TrainingTask, TaskBuildError> {
    let input = vocab.encode_text(&normalize_text(&render_motion_sections(motion_tokens)));
    let target = answer_ids(vocab, &render_answer_texts(part_texts));
    Ok(TrainingTask::new(TaskKind::MotionToText, input, target)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{parse_answer, AnswerKind, ParsedAnswer};

    fn vocab() -> Vocabulary {
        Vocabulary::build(
            &[
                "a person walks forward swinging the arms".to_string(),
                "the legs stride and the spine stays tall".to_string(),
            ],
            512,
            60,
        )
        .unwrap()
    }

    fn texts() -> [String; 6] {
        [
            "the right arm swings".into(),
            "the left arm hangs".into(),
            "the right leg strides".into(),
            "the left leg follows".into(),
            "the spine is upright".into(),
            "the root advances".into(),
        ]
    }

    #[test]
    fn targets_end_with_eos_and_parse_back() {
        let v = vocab();
        let task = reason_from_text(&v, 512, "a person walks forward", &texts()).unwrap();
        assert_eq!(*task.target.last().unwrap(), EOS);
        let body = &task.target[..task.target.len() - 1];
        match parse_answer(&v, body, AnswerKind::PartTexts).unwrap() {
            ParsedAnswer::Texts(parsed) => assert_eq!(parsed, texts()),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn generate_task_round_trips_motion_tokens() {
        let v = vocab();
        let tokens: [Vec<usize>; 6] = [
            vec![1, 2],
            vec![3, 4],
            vec![5, 6],
            vec![7, 8],
            vec![9, 10],
            vec![11, 12],
        ];
        let task = generate_motion(&v, 512, &texts(), &tokens).unwrap();
        let body = &task.target[..task.target.len() - 1];
        match parse_answer(&v, body, AnswerKind::PartMotions).unwrap() {
            ParsedAnswer::Motions(parsed) => assert_eq!(parsed, tokens),
            _ => panic!("wrong kind"),
        }
    }
}
