use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::bank::{validate_sheet, AnswerSheet, QuestionBank};
use super::stability::words;
use super::LangError;

const BUILTIN_TEMPLATE: &str = include_str!("../../data/description_template.txt");

/// A rendered description, keyed by the image it describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Description {
    pub image_id: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    /// Zero-based question index.
    Slot(usize),
}

/// A description template with `[Qn]` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    segments: Vec<Segment>,
}

impl Template {
    /// Parses a template; every slot `[Q1]`..`[Q30]` must appear exactly once.
    pub fn parse(text: &str) -> Result<Self, LangError> {
        let mut segments = Vec::new();
        let mut seen = [false; QuestionBank::SIZE];
        let mut rest = text;
        while let Some(start) = rest.find("[Q") {
            let Some(len) = rest[start..].find(']') else {
                return Err(LangError::Template("unterminated slot".into()));
            };
            let inner = &rest[start + 2..start + len];
            let n: usize = inner
                .parse()
                .map_err(|_| LangError::Template(format!("bad slot [Q{inner}]")))?;
            if !(1..=QuestionBank::SIZE).contains(&n) {
                return Err(LangError::Template(format!("slot [Q{n}] out of range")));
            }
            if std::mem::replace(&mut seen[n - 1], true) {
                return Err(LangError::Template(format!("slot [Q{n}] repeated")));
            }
            if start > 0 {
                segments.push(Segment::Literal(rest[..start].to_string()));
            }
            segments.push(Segment::Slot(n - 1));
            rest = &rest[start + len + 1..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Literal(rest.to_string()));
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(LangError::Template(format!("slot [Q{}] missing", missing + 1)));
        }
        Ok(Self { segments })
    }

    pub fn builtin() -> &'static Template {
        static TEMPLATE: OnceLock<Template> = OnceLock::new();
        TEMPLATE.get_or_init(|| Template::parse(BUILTIN_TEMPLATE).expect("bundled template parses"))
    }

    /// Substitutes answers verbatim. No grammatical smoothing is applied.
    pub fn fill(&self, answers: &[&str; QuestionBank::SIZE]) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot(i) => out.push_str(answers[*i]),
            }
        }
        out
    }

    /// Word count of the template with every slot left empty.
    pub fn skeleton_word_count(&self) -> usize {
        words(&self.fill(&[""; QuestionBank::SIZE])).len()
    }
}

/// Renders the scene description for a valid sheet with the bundled
/// template.
pub fn render_description(sheet: &AnswerSheet, bank: &QuestionBank) -> Result<String, LangError> {
    let violations = validate_sheet(sheet, bank);
    if !violations.is_empty() {
        return Err(LangError::InvalidSheet {
            image_id: sheet.image_id.clone(),
            violations,
        });
    }
    let answers: Vec<&str> = bank
        .questions()
        .iter()
        .map(|q| sheet.answers[&q.id].as_str())
        .collect();
    let answers: &[&str; QuestionBank::SIZE] = answers.as_slice().try_into().expect("30 answers");
    Ok(Template::builtin().fill(answers))
}

/// Summed word counts of a sheet's answers; with the template skeleton this
/// gives the rendered description's length.
pub fn slot_word_count(sheet: &AnswerSheet) -> usize {
    sheet.answers.values().map(|a| words(a).len()).sum()
}
