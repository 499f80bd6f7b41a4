//! Cross-view language tooling: multiple-choice answer sheets, templated
//! scene descriptions, description stability metrics and the text
//! embedding client.

mod bank;
mod embed;
mod render;
mod stability;

pub use bank::{validate_sheet, AnswerSheet, Question, QuestionBank, Violation};
pub use embed::{embed_texts, mock_embedding, EmbedEndpoint, TOKEN_ENV};
pub use render::{render_description, slot_word_count, Description, Template};
pub use stability::{jaccard, stability_report, words, StabilityReport};

#[derive(Debug, thiserror::Error)]
pub enum LangError {
    #[error("answer sheet {image_id:?} is invalid: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidSheet {
        image_id: String,
        violations: Vec<Violation>,
    },
    #[error("question bank line {line}: {message}")]
    Bank { line: usize, message: String },
    #[error("template: {0}")]
    Template(String),
    #[error("corpora are not aligned: id {id:?} is missing from one side")]
    IdMismatch { id: String },
    #[error("corpus and embeddings differ in length: {texts} texts, {embeddings} embeddings")]
    LengthMismatch { texts: usize, embeddings: usize },
    #[error("embedding endpoint {url} unreachable after {attempts} attempts: {message}")]
    Unreachable {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("embedding endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("embedding endpoint returned dim {found}, expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("embedding endpoint returned {found} vectors for {expected} inputs")]
    ResponseCount { expected: usize, found: usize },
    #[error("embedding endpoint response: {0}")]
    BadResponse(String),
}

impl LangError {
    pub fn is_io(&self) -> bool {
        matches!(self, LangError::Unreachable { .. })
    }
}
