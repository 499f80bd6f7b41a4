use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LangError;

const BUILTIN_BANK: &str = include_str!("../../data/question_bank.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub options: Vec<String>,
}

/// The thirty multiple-choice questions answered for every image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionBank {
    questions: Vec<Question>,
}

/// Answers for one image, keyed `Q1`..`Q30`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSheet {
    pub image_id: String,
    pub answers: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Unanswered {
        question: String,
    },
    InvalidOption {
        question: String,
        answer: String,
        allowed: Vec<String>,
    },
    UnknownQuestion {
        question: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unanswered { question } => write!(f, "unanswered {question}"),
            Violation::InvalidOption {
                question,
                answer,
                allowed,
            } => write!(
                f,
                "{question}: {answer:?} is not one of [{}]",
                allowed.join("/")
            ),
            Violation::UnknownQuestion { question } => write!(f, "unknown question {question}"),
        }
    }
}

impl QuestionBank {
    pub const SIZE: usize = 30;

    /// Parses the tab-separated bank: `id<TAB>question<TAB>opt/opt/...`.
    pub fn parse(text: &str) -> Result<Self, LangError> {
        let mut questions = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| LangError::Bank {
                line: line_no,
                message: message.into(),
            };
            let mut fields = line.split('\t');
            let (Some(id), Some(text), Some(options), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(err("expected three tab-separated fields"));
            };
            let expected = format!("Q{}", questions.len() + 1);
            if id != expected {
                return Err(err(&format!("expected id {expected}, found {id}")));
            }
            let options: Vec<String> = options.split('/').map(str::to_owned).collect();
            if options.iter().any(|o| o.is_empty()) {
                return Err(err("empty option"));
            }
            questions.push(Question {
                id: id.into(),
                text: text.into(),
                options,
            });
        }
        if questions.len() != Self::SIZE {
            return Err(LangError::Bank {
                line: 0,
                message: format!("expected {} questions, found {}", Self::SIZE, questions.len()),
            });
        }
        Ok(Self { questions })
    }

    /// The bundled questionnaire.
    pub fn builtin() -> &'static QuestionBank {
        static BANK: OnceLock<QuestionBank> = OnceLock::new();
        BANK.get_or_init(|| QuestionBank::parse(BUILTIN_BANK).expect("bundled bank parses"))
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    /// A valid sheet with uniformly drawn answers.
    pub fn random_sheet<R: Rng>(&self, image_id: &str, rng: &mut R) -> AnswerSheet {
        let answers = self
            .questions
            .iter()
            .map(|q| {
                let pick = rng.random_range(0..q.options.len());
                (q.id.clone(), q.options[pick].clone())
            })
            .collect();
        AnswerSheet {
            image_id: image_id.into(),
            answers,
        }
    }
}

/// Checks completeness and that each answer is verbatim one of its
/// question's options. Violations are reported in question order.
pub fn validate_sheet(sheet: &AnswerSheet, bank: &QuestionBank) -> Vec<Violation> {
    let mut violations = Vec::new();
    for q in bank.questions() {
        match sheet.answers.get(&q.id) {
            None => violations.push(Violation::Unanswered {
                question: q.id.clone(),
            }),
            Some(answer) if !q.options.contains(answer) => {
                violations.push(Violation::InvalidOption {
                    question: q.id.clone(),
                    answer: answer.clone(),
                    allowed: q.options.clone(),
                })
            }
            Some(_) => {}
        }
    }
    for key in sheet.answers.keys() {
        if bank.question(key).is_none() {
            violations.push(Violation::UnknownQuestion {
                question: key.clone(),
            });
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_options() -> AnswerSheet {
        let bank = QuestionBank::builtin();
        AnswerSheet {
            image_id: "img".into(),
            answers: bank
                .questions()
                .iter()
                .map(|q| (q.id.clone(), q.options[0].clone()))
                .collect(),
        }
    }

    #[test]
    fn builtin_bank_shape() {
        let bank = QuestionBank::builtin();
        assert_eq!(bank.questions().len(), 30);
        assert_eq!(
            bank.question("Q1").unwrap().options,
            [
                "urban",
                "suburban",
                "rural",
                "highway",
                "industrial",
                "natural",
                "dense forestation",
                "water body",
                "mixed"
            ]
        );
        assert_eq!(bank.question("Q25").unwrap().options, ["Yes", "No"]);
        assert_eq!(bank.question("Q3").unwrap().options.len(), 13);
    }

    #[test]
    fn q1_urban_is_valid_metropolis_is_not() {
        let bank = QuestionBank::builtin();
        let mut sheet = first_options();
        sheet.answers.insert("Q1".into(), "urban".into());
        assert!(validate_sheet(&sheet, bank).is_empty());
        sheet.answers.insert("Q1".into(), "metropolis".into());
        let v = validate_sheet(&sheet, bank);
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::InvalidOption { question, answer, .. }
            if question == "Q1" && answer == "metropolis"));
    }

    #[test]
    fn missing_q30_is_unanswered() {
        let bank = QuestionBank::builtin();
        let mut sheet = first_options();
        sheet.answers.remove("Q30");
        let v = validate_sheet(&sheet, bank);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "unanswered Q30");
    }

    #[test]
    fn options_are_case_sensitive() {
        let bank = QuestionBank::builtin();
        let mut sheet = first_options();
        sheet.answers.insert("Q25".into(), "yes".into());
        assert_eq!(validate_sheet(&sheet, bank).len(), 1);
    }

    #[test]
    fn parse_rejects_short_bank() {
        assert!(QuestionBank::parse("Q1\tWhat?\ta/b\n").is_err());
        assert!(QuestionBank::parse("Q2\tWhat?\ta/b\n").is_err());
    }
}
