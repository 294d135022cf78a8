use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::answers::{build_answer_set, structural_flags, AnswerOption, AnswerSet};
use super::context::{build_context, ContextMatrix};
use super::{DataType, Lexicon, LexiconError, Phenomenon, PhenomenonLexicon, Result, Structure};
use crate::seed::{derive_seed, derived_rng, rng_from, Tag};

/// Attempts at rejection sampling a fresh combination before falling back to
/// a scan of the remaining combination space.
const MAX_RESAMPLES: u64 = 256;

/// Lexeme choices for one paradigm; enough to re-render every sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParadigmLexemes {
    pub verb: String,
    pub agent: String,
    pub theme: String,
    pub path: String,
    pub place: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Paradigms {
    pub a: ParadigmLexemes,
    pub b: ParadigmLexemes,
}

/// One puzzle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "InstanceRecord", try_from = "InstanceRecord")]
pub struct Instance {
    pub id: String,
    pub phenomenon: Phenomenon,
    pub data_type: DataType,
    pub structure: Structure,
    pub context: ContextMatrix,
    pub answers: AnswerSet,
    pub seed: u64,
    pub lexemes: Paradigms,
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    id: String,
    phenomenon: Phenomenon,
    data_type: DataType,
    structure: Structure,
    context: ContextMatrix,
    answers: Vec<AnswerOption>,
    correct_index: usize,
    seed: u64,
    lexemes: Paradigms,
}

impl From<Instance> for InstanceRecord {
    fn from(i: Instance) -> Self {
        InstanceRecord {
            id: i.id,
            phenomenon: i.phenomenon,
            data_type: i.data_type,
            structure: i.structure,
            context: i.context,
            answers: i.answers.options,
            correct_index: i.answers.correct_index,
            seed: i.seed,
            lexemes: i.lexemes,
        }
    }
}

impl TryFrom<InstanceRecord> for Instance {
    type Error = String;
    fn try_from(r: InstanceRecord) -> std::result::Result<Self, String> {
        let instance = Instance {
            id: r.id,
            phenomenon: r.phenomenon,
            data_type: r.data_type,
            structure: r.structure,
            context: r.context,
            answers: AnswerSet { options: r.answers, correct_index: r.correct_index },
            seed: r.seed,
            lexemes: r.lexemes,
        };
        instance.validate()?;
        Ok(instance)
    }
}

impl Instance {
    pub fn validate(&self) -> std::result::Result<(), String> {
        self.answers.validate().map_err(|e| format!("{}: {e}", self.id))?;
        self.context.check_shape().map_err(|e| format!("{}: {e}", self.id))?;
        let transposed = self.context.is_transposed();
        if transposed != (self.structure == Structure::Transposed) {
            return Err(format!("{}: grid orientation does not match structure {}", self.id, self.structure));
        }
        let same_verb = self.lexemes.a.verb == self.lexemes.b.verb;
        match (self.data_type, same_verb) {
            (DataType::TypeI, false) => Err(format!("{}: Type I instance uses two verbs", self.id)),
            (DataType::TypeII, true) => Err(format!("{}: Type II instance reuses one verb", self.id)),
            _ => Ok(()),
        }
    }

    /// Every sentence the instance can feed to an encoder: context sentences
    /// followed by answer options.
    pub fn sentences(&self) -> impl Iterator<Item = &str> {
        self.context.cells().iter().filter_map(|c| c.text()).chain(self.answers.options.iter().map(|o| o.text.as_str()))
    }
}

/// Check an instance against the distractor taxonomy: seven distinct labels,
/// one Correct, and for every option the P/S/R flags recovered by
/// re-rendering its text from the recorded lexemes equal its label's flags.
pub fn audit_instance(lexicon: &Lexicon, instance: &Instance) -> std::result::Result<(), String> {
    instance.validate()?;
    let spec_a = lexicon.paradigm(instance.phenomenon, &instance.lexemes.a).map_err(|e| e.to_string())?;
    let spec_b = lexicon.paradigm(instance.phenomenon, &instance.lexemes.b).map_err(|e| e.to_string())?;
    for option in &instance.answers.options {
        match structural_flags(&option.text, &spec_a, &spec_b) {
            Some(flags) if flags == option.label.flags() => {}
            found => {
                return Err(format!(
                    "{}: option `{}` labelled {} has flags {found:?}, expected {:?}",
                    instance.id,
                    option.text,
                    option.label.as_str(),
                    option.label.flags()
                ))
            }
        }
    }
    Ok(())
}

/// Whether duplicate lexeme tuples are tolerated once the space runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Uniqueness {
    /// Fail with `LexiconExhausted` when more instances are requested than exist.
    Strict,
    /// Stay unique while possible, then allow repeats with a warning.
    Relaxed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub phenomenon: Phenomenon,
    pub data_type: DataType,
    pub count: usize,
    pub seed: u64,
    pub uniqueness: Uniqueness,
    /// Worker threads for candidate sampling; output does not depend on it.
    pub jobs: usize,
}

impl GenerateOptions {
    pub fn new(phenomenon: Phenomenon, data_type: DataType, count: usize, seed: u64) -> Self {
        GenerateOptions { phenomenon, data_type, count, seed, uniqueness: Uniqueness::Relaxed, jobs: 1 }
    }
}

/// Lexeme indices that identify an instance up to answer order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Combination {
    verbs: (usize, usize),
    agents: (usize, usize),
    themes: (usize, usize),
    locations: (usize, usize),
}

fn ordered_pairs(n: usize) -> u128 {
    (n as u128) * (n.saturating_sub(1) as u128)
}

fn verb_pairs(entry: &PhenomenonLexicon, data_type: DataType) -> Vec<(usize, usize)> {
    let n = entry.verbs.len();
    match data_type {
        DataType::TypeI => (0..n).map(|v| (v, v)).collect(),
        DataType::TypeII => (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect(),
    }
}

/// Number of distinct (verb pair, agent pair, theme pair, location pair) tuples.
pub fn combination_space(lexicon: &Lexicon, phenomenon: Phenomenon, data_type: DataType) -> Result<u128> {
    let entry = lexicon.phenomenon(phenomenon)?;
    Ok(space_of(entry, data_type))
}

fn space_of(entry: &PhenomenonLexicon, data_type: DataType) -> u128 {
    let fixed = ordered_pairs(entry.agents.len()) * ordered_pairs(entry.locations.len());
    verb_pairs(entry, data_type)
        .into_iter()
        .map(|(va, vb)| {
            let ta = entry.themes_for(va);
            let tb = entry.themes_for(vb);
            let shared = ta.iter().filter(|t| tb.contains(t)).count();
            (ta.len() * tb.len() - shared) as u128
        })
        .sum::<u128>()
        * fixed
}

fn distinct_pair<R: Rng>(rng: &mut R, n: usize) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

fn sample_combination(entry: &PhenomenonLexicon, data_type: DataType, seed: u64) -> Combination {
    let mut rng = rng_from(seed);
    let verbs = match data_type {
        DataType::TypeI => {
            let v = rng.random_range(0..entry.verbs.len());
            (v, v)
        }
        DataType::TypeII => distinct_pair(&mut rng, entry.verbs.len()),
    };
    let agents = distinct_pair(&mut rng, entry.agents.len());
    let ta = entry.themes_for(verbs.0);
    let tb = entry.themes_for(verbs.1);
    let theme_a = ta[rng.random_range(0..ta.len())];
    let rest: Vec<usize> = tb.into_iter().filter(|&t| t != theme_a).collect();
    let theme_b = rest[rng.random_range(0..rest.len())];
    let locations = distinct_pair(&mut rng, entry.locations.len());
    Combination { verbs, agents, themes: (theme_a, theme_b), locations }
}

fn for_each_combination(entry: &PhenomenonLexicon, data_type: DataType, mut f: impl FnMut(Combination)) {
    let na = entry.agents.len();
    let nl = entry.locations.len();
    for verbs in verb_pairs(entry, data_type) {
        let ta = entry.themes_for(verbs.0);
        let tb = entry.themes_for(verbs.1);
        for &theme_a in &ta {
            for &theme_b in tb.iter().filter(|&&t| t != theme_a) {
                for a0 in 0..na {
                    for a1 in (0..na).filter(|&x| x != a0) {
                        for l0 in 0..nl {
                            for l1 in (0..nl).filter(|&x| x != l0) {
                                f(Combination {
                                    verbs,
                                    agents: (a0, a1),
                                    themes: (theme_a, theme_b),
                                    locations: (l0, l1),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
}

fn lexemes_of(entry: &PhenomenonLexicon, c: &Combination) -> Paradigms {
    let side = |verb: usize, agent: usize, theme: usize, loc: usize| {
        let location = &entry.locations[loc];
        ParadigmLexemes {
            verb: entry.verbs[verb].lemma.clone(),
            agent: entry.agents[agent].clone(),
            theme: entry.themes[theme].clone(),
            path: location.path.clone(),
            place: location.place.clone(),
        }
    };
    Paradigms {
        a: side(c.verbs.0, c.agents.0, c.themes.0, c.locations.0),
        b: side(c.verbs.1, c.agents.1, c.themes.1, c.locations.1),
    }
}

/// Assemble a Base instance from lexeme choices.
pub fn build_instance(
    lexicon: &Lexicon,
    phenomenon: Phenomenon,
    data_type: DataType,
    id: String,
    seed: u64,
    option_seed: u64,
    lexemes: Paradigms,
) -> Result<Instance> {
    let spec_a = lexicon.paradigm(phenomenon, &lexemes.a)?;
    let spec_b = lexicon.paradigm(phenomenon, &lexemes.b)?;
    let context = build_context(&spec_a, &spec_b)?;
    let answers = build_answer_set(&context, &spec_a, &spec_b, option_seed)?;
    let instance = Instance { id, phenomenon, data_type, structure: Structure::Base, context, answers, seed, lexemes };
    instance.validate().map_err(LexiconError::InvalidInstance)?;
    Ok(instance)
}

/// Generate `count` Base instances. The result depends only on the lexicon and
/// the phenomenon, data type, count and seed in `opts`.
pub fn generate_dataset(lexicon: &Lexicon, opts: &GenerateOptions) -> Result<Vec<Instance>> {
    if opts.count == 0 {
        return Err(LexiconError::EmptyDataset);
    }
    let entry = lexicon.phenomenon(opts.phenomenon)?;
    if opts.data_type == DataType::TypeII && entry.verbs.len() < 2 {
        return Err(LexiconError::InvalidLexicon(format!("Type II needs at least two {} verbs", opts.phenomenon)));
    }
    let space = space_of(entry, opts.data_type);
    if opts.count as u128 > space && opts.uniqueness == Uniqueness::Strict {
        return Err(LexiconError::LexiconExhausted { requested: opts.count, available: space });
    }

    let sub_seed =
        |index: usize, attempt: u64| derive_seed(opts.seed, &[Tag::Str("instance"), index.into(), attempt.into()]);
    let first_draw = |index: usize| sample_combination(entry, opts.data_type, sub_seed(index, 0));
    let candidates: Vec<Combination> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| LexiconError::Io(std::io::Error::other(e)))?;
        pool.install(|| (0..opts.count).into_par_iter().map(first_draw).collect())
    } else {
        (0..opts.count).map(first_draw).collect()
    };

    let mut seen: HashSet<Combination> = HashSet::with_capacity(opts.count.min(1 << 20));
    let mut warned = false;
    let mut instances = Vec::with_capacity(opts.count);
    for (index, mut combo) in candidates.into_iter().enumerate() {
        let mut attempt = 0u64;
        if (seen.len() as u128) < space {
            while seen.contains(&combo) {
                attempt += 1;
                if attempt > MAX_RESAMPLES {
                    combo = scan_unseen(entry, opts.data_type, &seen, sub_seed(index, attempt));
                    break;
                }
                combo = sample_combination(entry, opts.data_type, sub_seed(index, attempt));
            }
            seen.insert(combo);
        } else if !warned {
            log::warn!("combination space of {space} exhausted at instance {index}; later instances may repeat");
            warned = true;
        }
        let id = format!("{}-{}-{}-{index:06}", opts.phenomenon, opts.data_type, opts.seed);
        let option_seed = derive_seed(opts.seed, &[Tag::Str("options"), Tag::Str(&id)]);
        instances.push(build_instance(
            lexicon,
            opts.phenomenon,
            opts.data_type,
            id,
            sub_seed(index, attempt),
            option_seed,
            lexemes_of(entry, &combo),
        )?);
    }
    Ok(instances)
}

fn scan_unseen(entry: &PhenomenonLexicon, data_type: DataType, seen: &HashSet<Combination>, seed: u64) -> Combination {
    let mut unseen = Vec::new();
    for_each_combination(entry, data_type, |c| {
        if !seen.contains(&c) {
            unseen.push(c);
        }
    });
    let pick = rng_from(seed).random_range(0..unseen.len());
    unseen[pick]
}

/// Train/validation/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle, then cut. Validation and test sizes are the rounded ratio
/// shares; train takes the remainder.
pub fn split_dataset<T>(items: Vec<T>, ratios: (f64, f64, f64), seed: u64) -> Result<Split<T>> {
    let (rt, rv, rs) = ratios;
    if [rt, rv, rs].iter().any(|r| !r.is_finite() || *r < 0.0 || *r > 1.0) {
        return Err(LexiconError::BadRatios(format!("{ratios:?}: each ratio must lie in [0, 1]")));
    }
    if ((rt + rv + rs) - 1.0).abs() > 1e-9 {
        return Err(LexiconError::BadRatios(format!("{ratios:?} sums to {}", rt + rv + rs)));
    }
    if items.is_empty() {
        return Err(LexiconError::EmptyDataset);
    }
    let n = items.len();
    let n_val = ((n as f64) * rv).round() as usize;
    let n_test = (((n as f64) * rs).round() as usize).min(n - n_val.min(n));
    let n_val = n_val.min(n);
    let n_train = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut derived_rng(seed, &[Tag::Str("split")]));
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |range: std::ops::Range<usize>| -> Vec<T> {
        order[range].iter().map(|&i| slots[i].take().expect("each index used once")).collect()
    };
    let train = take(0..n_train);
    let val = take(n_train..n_train + n_val);
    let test = take(n_train + n_val..n);
    Ok(Split { train, val, test })
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|source| LexiconError::Json { line: 0, source })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|source| LexiconError::Json { line: i + 1, source })?);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{ErrorLabel, Role};

    fn tiny_lexicon() -> Lexicon {
        let mut lex = Lexicon::builtin();
        let roll = lex.phenomena.get_mut(&Phenomenon::RollClass).unwrap();
        roll.verbs.truncate(2);
        roll.agents.truncate(2);
        roll.themes.truncate(2);
        roll.locations.truncate(2);
        lex
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let lex = Lexicon::builtin();
        let opts = GenerateOptions::new(Phenomenon::RollClass, DataType::TypeI, 50, 42);
        let a = generate_dataset(&lex, &opts).unwrap();
        let b = generate_dataset(&lex, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        for inst in &a {
            inst.validate().unwrap();
            assert_eq!(inst.lexemes.a.verb, inst.lexemes.b.verb);
            assert_eq!(inst.context.sentence_count(), 7);
        }
    }

    #[test]
    fn parallel_sampling_matches_serial() {
        let lex = Lexicon::builtin();
        let mut opts = GenerateOptions::new(Phenomenon::RollClass, DataType::TypeII, 200, 3);
        let serial = generate_dataset(&lex, &opts).unwrap();
        opts.jobs = 4;
        assert_eq!(serial, generate_dataset(&lex, &opts).unwrap());
    }

    #[test]
    fn type_two_uses_distinct_verbs() {
        let lex = Lexicon::builtin();
        let opts = GenerateOptions::new(Phenomenon::RollClass, DataType::TypeII, 100, 1);
        for inst in generate_dataset(&lex, &opts).unwrap() {
            assert_ne!(inst.lexemes.a.verb, inst.lexemes.b.verb);
        }
    }

    #[test]
    fn bake_class_subjects_are_agents_in_both_frames() {
        let lex = Lexicon::builtin();
        let bake = lex.phenomenon(Phenomenon::BakeClass).unwrap();
        let opts = GenerateOptions::new(Phenomenon::BakeClass, DataType::TypeII, 100, 7);
        let data = generate_dataset(&lex, &opts).unwrap();
        assert_eq!(data.len(), 100);
        for inst in &data {
            let spec_b = lex.paradigm(Phenomenon::BakeClass, &inst.lexemes.b).unwrap();
            assert_eq!(spec_b.intransitive_subject, Role::Agent);
            // transitive anchors of both rows and the correct completion start with an agent
            let subjects = [
                inst.context.get(1, 1).unwrap().text().unwrap(),
                inst.context.get(2, 1).unwrap().text().unwrap(),
                inst.context.get(1, 4).unwrap().text().unwrap(),
                inst.answers.correct().text.as_str(),
            ];
            for sentence in subjects {
                let lower = sentence.to_lowercase();
                assert!(
                    bake.agents.iter().any(|a| lower.starts_with(&format!("{a} "))),
                    "{sentence} does not open with an agent"
                );
            }
            assert!(inst.answers.options.iter().any(|o| o.label == ErrorLabel::RR));
        }
    }

    #[test]
    fn combinations_unique_until_exhausted() {
        let lex = tiny_lexicon();
        // 2 shared verbs x 2 ordered agent pairs x 2 theme pairs x 2 location pairs
        assert_eq!(combination_space(&lex, Phenomenon::RollClass, DataType::TypeI).unwrap(), 16);
        let mut opts = GenerateOptions::new(Phenomenon::RollClass, DataType::TypeI, 16, 5);
        let data = generate_dataset(&lex, &opts).unwrap();
        let tuples: HashSet<_> = data.iter().map(|i| i.lexemes.clone()).collect();
        assert_eq!(tuples.len(), 16);

        opts.count = 20;
        let relaxed = generate_dataset(&lex, &opts).unwrap();
        assert_eq!(relaxed.len(), 20);
        let first: HashSet<_> = relaxed[..16].iter().map(|i| i.lexemes.clone()).collect();
        assert_eq!(first.len(), 16);

        opts.uniqueness = Uniqueness::Strict;
        assert!(matches!(
            generate_dataset(&lex, &opts),
            Err(LexiconError::LexiconExhausted { requested: 20, available: 16 })
        ));
    }

    #[test]
    fn builtin_space_covers_3000_and_15000() {
        let lex = Lexicon::builtin();
        assert!(combination_space(&lex, Phenomenon::RollClass, DataType::TypeI).unwrap() > 15_000);
        assert!(combination_space(&lex, Phenomenon::RollClass, DataType::TypeII).unwrap() > 15_000);
        assert!(combination_space(&lex, Phenomenon::BakeClass, DataType::TypeII).unwrap() > 15_000);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let items: Vec<usize> = (0..3000).collect();
        let s = split_dataset(items.clone(), (0.8, 0.1, 0.1), 42).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (2400, 300, 300));
        let again = split_dataset(items.clone(), (0.8, 0.1, 0.1), 42).unwrap();
        assert_eq!(s, again);
        let mut union: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        union.sort();
        assert_eq!(union, items);

        let s = split_dataset((0..10).collect::<Vec<_>>(), (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(s.train.len(), 10);
        assert!(s.val.is_empty() && s.test.is_empty());
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(split_dataset(vec![1, 2], (0.5, 0.5, 0.5), 0), Err(LexiconError::BadRatios(_))));
        assert!(matches!(split_dataset(vec![1, 2], (1.2, -0.1, -0.1), 0), Err(LexiconError::BadRatios(_))));
        assert!(matches!(split_dataset(Vec::<u8>::new(), (0.8, 0.1, 0.1), 0), Err(LexiconError::EmptyDataset)));
        // rounding never overdraws
        let s = split_dataset(vec![1], (0.0, 0.5, 0.5), 0).unwrap();
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let lex = Lexicon::builtin();
        let data = generate_dataset(&lex, &GenerateOptions::new(Phenomenon::RollClass, DataType::TypeI, 5, 9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_jsonl(&path, &data).unwrap();
        let back: Vec<Instance> = read_jsonl(&path).unwrap();
        assert_eq!(back, data);
        let first_line = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&first_line).unwrap();
        for key in ["id", "phenomenon", "data_type", "structure", "context", "answers", "correct_index", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["context"].as_array().unwrap().len(), 8);
        assert_eq!(v["context"][7]["text"], serde_json::Value::Null);
    }
}
