use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::context::{ContextMatrix, COLS, ROWS};
use super::{LexiconError, ParadigmSpec, Result, Role};
use crate::seed::rng_from;
use crate::text::normalize_key;

/// Answer-option type. Distractors are named by the constraints they break:
/// P(aradigm), S(tructure), R(ole).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorLabel {
    Correct,
    RR,
    SCRR,
    SCRS,
    PCRR,
    PSCRR,
    PSCRS,
}

/// Which of the three constraints an option violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViolationFlags {
    pub paradigm: bool,
    pub structure: bool,
    pub role: bool,
}

impl ViolationFlags {
    const fn new(paradigm: bool, structure: bool, role: bool) -> Self {
        ViolationFlags { paradigm, structure, role }
    }
}

impl ErrorLabel {
    pub const ALL: [ErrorLabel; 7] = [
        ErrorLabel::Correct,
        ErrorLabel::RR,
        ErrorLabel::SCRR,
        ErrorLabel::SCRS,
        ErrorLabel::PCRR,
        ErrorLabel::PSCRR,
        ErrorLabel::PSCRS,
    ];

    pub const fn flags(self) -> ViolationFlags {
        match self {
            ErrorLabel::Correct => ViolationFlags::new(false, false, false),
            ErrorLabel::RR => ViolationFlags::new(false, false, true),
            ErrorLabel::SCRR => ViolationFlags::new(false, true, true),
            ErrorLabel::SCRS => ViolationFlags::new(false, true, true),
            ErrorLabel::PCRR => ViolationFlags::new(true, false, true),
            ErrorLabel::PSCRR => ViolationFlags::new(true, true, true),
            ErrorLabel::PSCRS => ViolationFlags::new(true, true, true),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorLabel::Correct => "Correct",
            ErrorLabel::RR => "RR",
            ErrorLabel::SCRR => "SCRR",
            ErrorLabel::SCRS => "SCRS",
            ErrorLabel::PCRR => "PCRR",
            ErrorLabel::PSCRR => "PSCRR",
            ErrorLabel::PSCRS => "PSCRS",
        }
    }
}

impl fmt::Display for ErrorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorLabel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ErrorLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown label `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnswerOption {
    pub text: String,
    pub label: ErrorLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnswerSet {
    pub options: Vec<AnswerOption>,
    pub correct_index: usize,
}

impl AnswerSet {
    pub fn correct(&self) -> &AnswerOption {
        &self.options[self.correct_index]
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.options.len() != 7 {
            return Err(format!("expected 7 options, found {}", self.options.len()));
        }
        let labels: HashSet<_> = self.options.iter().map(|o| o.label).collect();
        if labels.len() != 7 {
            return Err("option labels are not all distinct".into());
        }
        let texts: HashSet<_> = self.options.iter().map(|o| normalize_key(&o.text)).collect();
        if texts.len() != 7 {
            return Err("option texts are not all distinct".into());
        }
        match self.options.get(self.correct_index) {
            Some(o) if o.label == ErrorLabel::Correct => Ok(()),
            _ => Err(format!("correct_index {} does not point at the Correct option", self.correct_index)),
        }
    }
}

/// Render the seven options for the blank at (2,4), then permute them with `rng_seed`.
pub fn build_answer_set(
    context: &ContextMatrix,
    spec_a: &ParadigmSpec,
    spec_b: &ParadigmSpec,
    rng_seed: u64,
) -> Result<AnswerSet> {
    if context.shape() != (ROWS, COLS) || !context.get(ROWS, COLS).is_some_and(|c| c.is_blank()) {
        return Err(LexiconError::InvalidInstance(
            "answer sets are built from Base contexts with the blank at (2,4)".into(),
        ));
    }
    let right = spec_b.intransitive_subject;
    let wrong = right.other();
    let path_b = &spec_b.location.path;
    let place_a = &spec_a.location.place;
    let rendered = [
        (ErrorLabel::Correct, spec_b.intransitive_with(right, path_b)?),
        (ErrorLabel::RR, spec_b.intransitive_with(wrong, path_b)?),
        (ErrorLabel::SCRR, spec_b.copular_with(wrong, path_b)?),
        (ErrorLabel::SCRS, spec_b.inverted_transitive()?),
        (ErrorLabel::PCRR, spec_a.intransitive_with(wrong, place_a)?),
        (ErrorLabel::PSCRR, spec_a.copular_with(wrong, place_a)?),
        (ErrorLabel::PSCRS, spec_a.inverted_transitive()?),
    ];
    let mut seen = HashSet::new();
    for (label, text) in &rendered {
        if !seen.insert(normalize_key(text)) {
            return Err(LexiconError::DegenerateParadigm(format!("{label} option `{text}` duplicates another option")));
        }
    }
    let mut options: Vec<AnswerOption> =
        rendered.into_iter().map(|(label, text)| AnswerOption { text, label }).collect();
    options.shuffle(&mut rng_from(rng_seed));
    let correct_index = options.iter().position(|o| o.label == ErrorLabel::Correct).expect("Correct option present");
    Ok(AnswerSet { options, correct_index })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptionSource {
    ParadigmA,
    ParadigmB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    Intransitive,
    Copular,
    InvertedTransitive,
}

/// One way an option text can be produced from the two paradigms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Derivation {
    pub source: OptionSource,
    pub frame: Frame,
    pub subject: Role,
    /// Subject role expected in the intransitive target frame.
    pub target_subject: Role,
}

impl Derivation {
    pub fn flags(&self) -> ViolationFlags {
        ViolationFlags {
            paradigm: self.source == OptionSource::ParadigmA,
            structure: self.frame != Frame::Intransitive,
            role: self.frame == Frame::InvertedTransitive || self.subject != self.target_subject,
        }
    }
}

/// Find every (paradigm, frame, subject) rendering that reproduces `text`.
///
/// Independent of the label assigned at generation time: it re-renders all
/// candidate frames from the two specs and compares normalized strings.
pub fn classify_option(text: &str, spec_a: &ParadigmSpec, spec_b: &ParadigmSpec) -> Vec<Derivation> {
    let key = normalize_key(text);
    let target_subject = spec_b.intransitive_subject;
    let mut found = Vec::new();
    for (source, spec) in [(OptionSource::ParadigmA, spec_a), (OptionSource::ParadigmB, spec_b)] {
        for subject in [Role::Agent, Role::Theme] {
            for pp in [&spec.location.path, &spec.location.place] {
                let candidates = [
                    (Frame::Intransitive, spec.intransitive_with(subject, pp)),
                    (Frame::Copular, spec.copular_with(subject, pp)),
                ];
                for (frame, rendered) in candidates {
                    if rendered.is_ok_and(|r| normalize_key(&r) == key) {
                        found.push(Derivation { source, frame, subject, target_subject });
                    }
                }
            }
        }
        if spec.inverted_transitive().is_ok_and(|r| normalize_key(&r) == key) {
            found.push(Derivation { source, frame: Frame::InvertedTransitive, subject: Role::Theme, target_subject });
        }
    }
    found.dedup();
    found
}

/// Violation flags recovered from the text alone, or `None` when the text is
/// not a rendering of either paradigm or its renderings disagree.
pub fn structural_flags(text: &str, spec_a: &ParadigmSpec, spec_b: &ParadigmSpec) -> Option<ViolationFlags> {
    let derivations = classify_option(text, spec_a, spec_b);
    let first = derivations.first()?.flags();
    derivations.iter().all(|d| d.flags() == first).then_some(first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::context::build_context;
    use crate::lexicon::tests::figure_one;

    fn option(set: &AnswerSet, label: ErrorLabel) -> &str {
        &set.options.iter().find(|o| o.label == label).unwrap().text
    }

    #[test]
    fn figure_one_answer_set_matches_taxonomy_examples() {
        let (a, b) = figure_one();
        let ctx = build_context(&a, &b).unwrap();
        let set = build_answer_set(&ctx, &a, &b, 1).unwrap();
        set.validate().unwrap();
        assert_eq!(option(&set, ErrorLabel::Correct), "The mat rolled into a pillow.");
        assert_eq!(option(&set, ErrorLabel::RR), "The explorer rolled into a pillow.");
        assert_eq!(option(&set, ErrorLabel::SCRR), "The explorer was into a pillow.");
        assert_eq!(option(&set, ErrorLabel::SCRS), "The mat rolled the explorer.");
        assert_eq!(option(&set, ErrorLabel::PCRR), "The man rolled in the cup.");
        assert_eq!(option(&set, ErrorLabel::PSCRR), "The man was in the cup.");
        assert_eq!(option(&set, ErrorLabel::PSCRS), "The dice rolled the man.");
    }

    #[test]
    fn table_flags() {
        let t = |p, s, r| ViolationFlags { paradigm: p, structure: s, role: r };
        assert_eq!(ErrorLabel::Correct.flags(), t(false, false, false));
        assert_eq!(ErrorLabel::RR.flags(), t(false, false, true));
        assert_eq!(ErrorLabel::SCRR.flags(), t(false, true, true));
        assert_eq!(ErrorLabel::SCRS.flags(), t(false, true, true));
        assert_eq!(ErrorLabel::PCRR.flags(), t(true, false, true));
        assert_eq!(ErrorLabel::PSCRR.flags(), t(true, true, true));
        assert_eq!(ErrorLabel::PSCRS.flags(), t(true, true, true));
    }

    #[test]
    fn structural_flags_agree_with_labels() {
        let (a, b) = figure_one();
        let ctx = build_context(&a, &b).unwrap();
        let set = build_answer_set(&ctx, &a, &b, 9).unwrap();
        for o in &set.options {
            assert_eq!(structural_flags(&o.text, &a, &b), Some(o.label.flags()), "{}", o.text);
        }
        assert_eq!(structural_flags("The cat sat on the mat.", &a, &b), None);
    }

    #[test]
    fn seeds_permute_but_keep_the_multiset() {
        let (a, b) = figure_one();
        let ctx = build_context(&a, &b).unwrap();
        let one = build_answer_set(&ctx, &a, &b, 1).unwrap();
        let two = build_answer_set(&ctx, &a, &b, 2).unwrap();
        let sorted = |s: &AnswerSet| {
            let mut v: Vec<_> = s.options.iter().map(|o| o.text.clone()).collect();
            v.sort();
            v
        };
        assert_eq!(sorted(&one), sorted(&two));
        assert_ne!(one.options, two.options);
        assert_eq!(one, build_answer_set(&ctx, &a, &b, 1).unwrap());
    }

    #[test]
    fn identical_paradigms_are_degenerate() {
        let (a, _) = figure_one();
        let ctx = build_context(&a, &a).unwrap();
        assert!(matches!(build_answer_set(&ctx, &a, &a, 0), Err(LexiconError::DegenerateParadigm(_))));
    }

    #[test]
    fn requires_base_orientation() {
        let (a, b) = figure_one();
        let ctx = build_context(&a, &b).unwrap().transpose();
        assert!(build_answer_set(&ctx, &a, &b, 0).is_err());
    }
}
