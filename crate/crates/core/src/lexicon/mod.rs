//! Lexicons, paradigm specifications and dataset generation for the
//! sentence-matrix completion task.
//!
//! A lexicon file lists, per alternation class, the verb frames plus the
//! agent, theme and location inventories. Paradigm specs are resolved from
//! a handful of lexeme choices; contexts and answer sets are rendered from
//! those specs.

mod answers;
mod context;
mod dataset;

pub use answers::{
    build_answer_set, classify_option, structural_flags, AnswerOption, AnswerSet, Derivation, ErrorLabel, Frame,
    OptionSource, ViolationFlags,
};
pub use context::{build_context, Cell, CellContent, CellRole, ContextMatrix};
pub use dataset::{
    audit_instance, build_instance, combination_space, generate_dataset, read_jsonl, split_dataset, write_jsonl,
    GenerateOptions, Instance, ParadigmLexemes, Paradigms, Split, Uniqueness,
};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::finish_sentence;

pub const DEFAULT_LEXICON: &str = include_str!("../../assets/lexicon.json");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("template `{template}` has no fillable slot {slot}")]
    TemplateSlotMissing { template: String, slot: String },
    #[error("degenerate paradigm: {0}")]
    DegenerateParadigm(String),
    #[error("lexicon exhausted: {requested} unique instances requested, only {available} combinations exist")]
    LexiconExhausted { requested: usize, available: u128 },
    #[error("bad split ratios: {0}")]
    BadRatios(String),
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error at line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, LexiconError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phenomenon {
    /// Causative/inchoative alternation ("The player rolled the ball" / "The ball rolled").
    #[serde(rename = "roll")]
    RollClass,
    /// Unspecified object alternation ("The chef baked a cake" / "The chef baked").
    #[serde(rename = "bake")]
    BakeClass,
}

impl Phenomenon {
    pub fn as_str(self) -> &'static str {
        match self {
            Phenomenon::RollClass => "roll",
            Phenomenon::BakeClass => "bake",
        }
    }
}

impl fmt::Display for Phenomenon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phenomenon {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "roll" | "rollclass" | "roll-class" => Ok(Phenomenon::RollClass),
            "bake" | "bakeclass" | "bake-class" => Ok(Phenomenon::BakeClass),
            other => Err(format!("unknown phenomenon `{other}` (expected roll|bake)")),
        }
    }
}

/// Whether both paradigms share one verb (Type I) or use two different verbs (Type II).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataType {
    #[serde(rename = "I")]
    TypeI,
    #[serde(rename = "II")]
    TypeII,
}

impl DataType {
    pub fn as_str(self) -> &'static str {
        match self {
            DataType::TypeI => "I",
            DataType::TypeII => "II",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" | "typei" | "type1" => Ok(DataType::TypeI),
            "ii" | "2" | "typeii" | "type2" => Ok(DataType::TypeII),
            other => Err(format!("unknown data type `{other}` (expected I|II)")),
        }
    }
}

/// Organization of the context grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Base,
    Shuffled,
    NoAnalogy,
    NoSoftCue,
    Transposed,
}

impl Structure {
    pub const ALL: [Structure; 5] =
        [Structure::Base, Structure::Shuffled, Structure::NoAnalogy, Structure::NoSoftCue, Structure::Transposed];

    pub fn as_str(self) -> &'static str {
        match self {
            Structure::Base => "base",
            Structure::Shuffled => "shuffled",
            Structure::NoAnalogy => "noanalogy",
            Structure::NoSoftCue => "nosoftcue",
            Structure::Transposed => "transposed",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Structure {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let lowered = s.to_ascii_lowercase().replace(['-', '_'], "");
        Structure::ALL
            .into_iter()
            .find(|st| st.as_str() == lowered)
            .ok_or_else(|| format!("unknown structure `{s}` (expected base|shuffled|noanalogy|nosoftcue|transposed)"))
    }
}

/// Which entity fills the subject slot of the intransitive frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Agent,
    Theme,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Agent => Role::Theme,
            Role::Theme => Role::Agent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbEntry {
    pub lemma: String,
    #[serde(skip, default = "default_phenomenon")]
    pub phenomenon: Phenomenon,
    /// Intransitive frame with slots `{SUBJ}` and `{PP}`; carries the inflected verb.
    pub intransitive: String,
    /// Transitive frame with slots `{SUBJ}`, `{OBJ}` and `{PP}`.
    pub transitive: String,
    /// Optional restriction of the theme inventory for this verb.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub themes: Option<Vec<String>>,
}

fn default_phenomenon() -> Phenomenon {
    Phenomenon::RollClass
}

impl VerbEntry {
    fn validate(&self) -> Result<()> {
        if self.lemma.trim().is_empty() {
            return Err(LexiconError::InvalidLexicon("empty verb lemma".into()));
        }
        check_slots(&self.intransitive, &["SUBJ", "PP"])?;
        check_slots(&self.transitive, &["SUBJ", "OBJ", "PP"])?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    /// Directional phrase used in the anchor sentences ("into a cup").
    pub path: String,
    /// Static phrase used in state cues and cross-paradigm distractors ("in the cup").
    pub place: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenomenonLexicon {
    pub intransitive_subject: Role,
    /// Action cue template; slot `{AGENT}`.
    pub cue_action: String,
    /// State cue template; slots `{THEME}` and optionally `{PLACE}`.
    pub cue_state: String,
    pub verbs: Vec<VerbEntry>,
    pub agents: Vec<String>,
    pub themes: Vec<String>,
    pub locations: Vec<Location>,
}

impl PhenomenonLexicon {
    pub fn verb(&self, lemma: &str) -> Option<&VerbEntry> {
        self.verbs.iter().find(|v| v.lemma == lemma)
    }

    /// Indices into `themes` admissible for verb `verb_idx`.
    pub fn themes_for(&self, verb_idx: usize) -> Vec<usize> {
        match &self.verbs[verb_idx].themes {
            None => (0..self.themes.len()).collect(),
            Some(list) => list.iter().filter_map(|t| self.themes.iter().position(|x| x == t)).collect(),
        }
    }

    fn validate(&self, phenomenon: Phenomenon) -> Result<()> {
        let bad = |msg: String| Err(LexiconError::InvalidLexicon(format!("{phenomenon}: {msg}")));
        if self.verbs.is_empty() {
            return bad("no verbs".into());
        }
        let mut lemmas = HashSet::new();
        for verb in &self.verbs {
            verb.validate()?;
            if !lemmas.insert(verb.lemma.as_str()) {
                return bad(format!("duplicate lemma `{}`", verb.lemma));
            }
            if let Some(list) = &verb.themes {
                for t in list {
                    if !self.themes.contains(t) {
                        return bad(format!("verb `{}` lists unknown theme `{t}`", verb.lemma));
                    }
                }
                if list.iter().collect::<HashSet<_>>().len() < 2 {
                    return bad(format!("verb `{}` needs at least two themes", verb.lemma));
                }
            }
        }
        for (name, list) in [("agents", &self.agents), ("themes", &self.themes)] {
            if list.len() < 2 {
                return bad(format!("need at least two {name}"));
            }
            if list.iter().collect::<HashSet<_>>().len() != list.len() {
                return bad(format!("duplicate entries in {name}"));
            }
            if list.iter().any(|x| x.trim().is_empty()) {
                return bad(format!("empty entry in {name}"));
            }
        }
        if let Some(shared) = self.agents.iter().find(|a| self.themes.contains(a)) {
            return bad(format!("`{shared}` is listed as both agent and theme"));
        }
        if self.locations.len() < 2 {
            return bad("need at least two locations".into());
        }
        if self.locations.iter().collect::<HashSet<_>>().len() != self.locations.len() {
            return bad("duplicate locations".into());
        }
        check_slots(&self.cue_action, &["AGENT"])?;
        if !self.cue_state.contains("{THEME}") {
            return bad("cue_state must mention {THEME}".into());
        }
        Ok(())
    }
}

/// All phenomena plus the shared copular distractor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub version: u32,
    /// Copular frame for structure-violating distractors; slots `{SUBJ}` and `{PP}`.
    pub copular_template: String,
    pub phenomena: BTreeMap<Phenomenon, PhenomenonLexicon>,
}

impl Lexicon {
    pub fn from_json(json: &str) -> Result<Self> {
        let mut lexicon: Lexicon =
            serde_json::from_str(json).map_err(|source| LexiconError::Json { line: 0, source })?;
        for (phenomenon, entry) in lexicon.phenomena.iter_mut() {
            for verb in &mut entry.verbs {
                verb.phenomenon = *phenomenon;
            }
        }
        lexicon.validate()?;
        Ok(lexicon)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The curated inventory shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn validate(&self) -> Result<()> {
        check_slots(&self.copular_template, &["SUBJ", "PP"])?;
        for (phenomenon, entry) in &self.phenomena {
            entry.validate(*phenomenon)?;
        }
        Ok(())
    }

    pub fn phenomenon(&self, phenomenon: Phenomenon) -> Result<&PhenomenonLexicon> {
        self.phenomena
            .get(&phenomenon)
            .ok_or_else(|| LexiconError::InvalidLexicon(format!("no entries for {phenomenon}")))
    }

    /// Resolve a [`ParadigmSpec`] from its lexeme choices.
    pub fn paradigm(&self, phenomenon: Phenomenon, lexemes: &ParadigmLexemes) -> Result<ParadigmSpec> {
        let entry = self.phenomenon(phenomenon)?;
        let verb = entry.verb(&lexemes.verb).ok_or_else(|| {
            LexiconError::InvalidInstance(format!("verb `{}` not in {phenomenon} lexicon", lexemes.verb))
        })?;
        let location = Location { path: lexemes.path.clone(), place: lexemes.place.clone() };
        let cue_action = finish_sentence(&fill(&entry.cue_action, &[("AGENT", &lexemes.agent)])?);
        let cue_state =
            finish_sentence(&fill(&entry.cue_state, &[("THEME", &lexemes.theme), ("PLACE", &location.place)])?);
        let spec = ParadigmSpec {
            agent: lexemes.agent.clone(),
            theme: lexemes.theme.clone(),
            verb: verb.clone(),
            cue_action,
            cue_state,
            location,
            intransitive_subject: entry.intransitive_subject,
            copular_template: self.copular_template.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// One row of the context grid: an agent/theme/verb triple and its cues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParadigmSpec {
    pub agent: String,
    pub theme: String,
    pub verb: VerbEntry,
    pub cue_action: String,
    pub cue_state: String,
    pub location: Location,
    pub intransitive_subject: Role,
    pub copular_template: String,
}

impl ParadigmSpec {
    pub fn phenomenon(&self) -> Phenomenon {
        self.verb.phenomenon
    }

    pub fn validate(&self) -> Result<()> {
        if self.agent == self.theme {
            return Err(LexiconError::DegenerateParadigm(format!("agent and theme are both `{}`", self.agent)));
        }
        self.verb.validate()
    }

    pub fn entity(&self, role: Role) -> &str {
        match role {
            Role::Agent => &self.agent,
            Role::Theme => &self.theme,
        }
    }

    /// "The explorer rolled the mat into a pillow."
    pub fn transitive_sentence(&self) -> Result<String> {
        let body =
            fill(&self.verb.transitive, &[("SUBJ", &self.agent), ("OBJ", &self.theme), ("PP", &self.location.path)])?;
        Ok(finish_sentence(&body))
    }

    /// The intransitive anchor / correct completion ("The mat rolled into a pillow.").
    pub fn intransitive_sentence(&self) -> Result<String> {
        self.intransitive_with(self.intransitive_subject, &self.location.path)
    }

    pub fn intransitive_with(&self, subject: Role, pp: &str) -> Result<String> {
        let body = fill(&self.verb.intransitive, &[("SUBJ", self.entity(subject)), ("PP", pp)])?;
        Ok(finish_sentence(&body))
    }

    pub fn copular_with(&self, subject: Role, pp: &str) -> Result<String> {
        let body = fill(&self.copular_template, &[("SUBJ", self.entity(subject)), ("PP", pp)])?;
        Ok(finish_sentence(&body))
    }

    /// Argument-inverted transitive without a PP ("The mat rolled the explorer.").
    pub fn inverted_transitive(&self) -> Result<String> {
        let body = fill(&self.verb.transitive, &[("SUBJ", &self.theme), ("OBJ", &self.agent), ("PP", "")])?;
        Ok(finish_sentence(&body))
    }
}

/// Fill `{NAME}` slots. Every given slot must occur in the template and no
/// unfilled slot may remain.
pub(crate) fn fill(template: &str, slots: &[(&str, &str)]) -> Result<String> {
    let mut out = template.to_string();
    for (name, value) in slots {
        let marker = format!("{{{name}}}");
        if !out.contains(&marker) {
            // Optional slots are tolerated only for the state cue's {PLACE}.
            if *name == "PLACE" {
                continue;
            }
            return Err(LexiconError::TemplateSlotMissing {
                template: template.to_string(),
                slot: (*name).to_string(),
            });
        }
        out = out.replace(&marker, value);
    }
    if let Some(start) = out.find('{') {
        let rest = &out[start + 1..];
        let slot = rest.split('}').next().unwrap_or(rest).to_string();
        return Err(LexiconError::TemplateSlotMissing { template: template.to_string(), slot });
    }
    Ok(out)
}

fn check_slots(template: &str, slots: &[&str]) -> Result<()> {
    for slot in slots {
        let marker = format!("{{{slot}}}");
        if template.matches(&marker).count() != 1 {
            return Err(LexiconError::TemplateSlotMissing {
                template: template.to_string(),
                slot: (*slot).to_string(),
            });
        }
    }
    // no undeclared slots
    let declared: usize = slots.len();
    if template.matches('{').count() != declared {
        return Err(LexiconError::InvalidLexicon(format!("template `{template}` has undeclared slots")));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn figure_one() -> (ParadigmSpec, ParadigmSpec) {
        let lex = Lexicon::builtin();
        let a = lex
            .paradigm(
                Phenomenon::RollClass,
                &ParadigmLexemes {
                    verb: "roll".into(),
                    agent: "the man".into(),
                    theme: "the dice".into(),
                    path: "into a cup".into(),
                    place: "in the cup".into(),
                },
            )
            .unwrap();
        let b = lex
            .paradigm(
                Phenomenon::RollClass,
                &ParadigmLexemes {
                    verb: "roll".into(),
                    agent: "the explorer".into(),
                    theme: "the mat".into(),
                    path: "into a pillow".into(),
                    place: "in the pillow".into(),
                },
            )
            .unwrap();
        (a, b)
    }

    #[test]
    fn builtin_lexicon_meets_inventory_minimums() {
        let lex = Lexicon::builtin();
        let roll = lex.phenomenon(Phenomenon::RollClass).unwrap();
        assert_eq!(roll.verbs.len(), 18);
        let lemmas: Vec<_> = roll.verbs.iter().map(|v| v.lemma.as_str()).collect();
        for expected in ["bounce", "coil", "drift", "drop", "roll", "wind", "whirl"] {
            assert!(lemmas.contains(&expected));
        }
        for entry in lex.phenomena.values() {
            assert!(entry.agents.len() >= 20);
            assert!(entry.themes.len() >= 20);
            assert!(entry.locations.len() >= 20);
        }
        assert!(roll.verbs.iter().all(|v| v.phenomenon == Phenomenon::RollClass));
    }

    #[test]
    fn figure_one_sentences() {
        let (a, b) = figure_one();
        assert_eq!(a.transitive_sentence().unwrap(), "The man rolled the dice into a cup.");
        assert_eq!(a.intransitive_sentence().unwrap(), "The dice rolled into a cup.");
        assert_eq!(a.cue_action, "The man did it.");
        assert_eq!(a.cue_state, "The dice was in the cup.");
        assert_eq!(b.intransitive_sentence().unwrap(), "The mat rolled into a pillow.");
        assert_eq!(b.inverted_transitive().unwrap(), "The mat rolled the explorer.");
        assert_eq!(b.copular_with(Role::Agent, "into a pillow").unwrap(), "The explorer was into a pillow.");
    }

    #[test]
    fn fill_rejects_missing_and_leftover_slots() {
        assert!(matches!(
            fill("{SUBJ} rolled", &[("SUBJ", "the man"), ("PP", "x")]),
            Err(LexiconError::TemplateSlotMissing { slot, .. }) if slot == "PP"
        ));
        assert!(matches!(
            fill("{SUBJ} rolled {OBJ}", &[("SUBJ", "the man")]),
            Err(LexiconError::TemplateSlotMissing { slot, .. }) if slot == "OBJ"
        ));
    }

    #[test]
    fn lexicon_validation_catches_bad_entries() {
        let mut lex = Lexicon::builtin();
        let roll = lex.phenomena.get_mut(&Phenomenon::RollClass).unwrap();
        roll.verbs[0].transitive = "{SUBJ} rolled {PP}".into();
        assert!(lex.validate().is_err());

        let mut lex = Lexicon::builtin();
        let roll = lex.phenomena.get_mut(&Phenomenon::RollClass).unwrap();
        let dup = roll.verbs[0].clone();
        roll.verbs.push(dup);
        assert!(matches!(lex.validate(), Err(LexiconError::InvalidLexicon(_))));

        let mut lex = Lexicon::builtin();
        let roll = lex.phenomena.get_mut(&Phenomenon::RollClass).unwrap();
        let theme = roll.themes[0].clone();
        roll.agents.push(theme);
        assert!(lex.validate().is_err());
    }

    #[test]
    fn agent_theme_collision_is_degenerate() {
        let lex = Lexicon::builtin();
        let err = lex
            .paradigm(
                Phenomenon::RollClass,
                &ParadigmLexemes {
                    verb: "roll".into(),
                    agent: "the mat".into(),
                    theme: "the mat".into(),
                    path: "into a cup".into(),
                    place: "in the cup".into(),
                },
            )
            .unwrap_err();
        assert!(matches!(err, LexiconError::DegenerateParadigm(_)));
    }

    #[test]
    fn enum_names_parse() {
        assert_eq!("roll".parse::<Phenomenon>().unwrap(), Phenomenon::RollClass);
        assert_eq!("II".parse::<DataType>().unwrap(), DataType::TypeII);
        assert_eq!("NoSoftCue".parse::<Structure>().unwrap(), Structure::NoSoftCue);
        assert!("sideways".parse::<Structure>().is_err());
    }
}
