//! Prompt construction, response parsing and scoring for externally run
//! language models.
//!
//! Prompts are written as JSON Lines for whatever driver talks to a model;
//! responses come back as JSON Lines keyed by instance id.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ablate::flatten;
use crate::lexicon::Instance;
use crate::seed::{derived_rng, Tag};
use crate::text::answer_form;
use crate::train::{f1_report, EvalReport, ReportMeta, TrainError};

/// Prompt template, version 1.
pub const PROMPT_TEMPLATE_V1: &str = include_str!("../assets/prompt_v1.txt");
pub const PROMPT_VERSION: u32 = 1;
/// Line prefix that introduces the final answer.
pub const ANSWER_MARKER: &str = "Final answer:";
/// Bullet that starts each answer-set line.
pub const OPTION_BULLET: &str = "* ";
/// Heading of each worked example.
pub const EXAMPLE_HEADING: &str = "### Example";

const COT_INSTRUCTION: &str =
    "Think step by step: explain how the sentences in each row relate to one another before you compare options.\n";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("shot pool has {available} instances, {needed} needed")]
    ShotPoolTooSmall { needed: usize, available: usize },
    #[error("shot instance {0} also appears in the evaluated set")]
    ShotLeak(String),
    #[error("unsupported shot count {0} (expected 0, 1 or 5)")]
    BadShots(usize),
    #[error("ids do not line up: {0}")]
    IdMismatch(String),
    #[error("bad instance {0}")]
    BadInstance(String),
    #[error("{0}")]
    Report(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, LlmError>;

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub shots: usize,
    pub cot: bool,
    /// Seeds which pool instances are used as worked examples.
    pub seed: u64,
    pub shot_pool: Vec<Instance>,
}

impl PromptSpec {
    pub fn zero_shot(cot: bool) -> Self {
        PromptSpec { shots: 0, cot, seed: 0, shot_pool: Vec::new() }
    }

    fn validate(&self) -> Result<()> {
        if ![0, 1, 5].contains(&self.shots) {
            return Err(LlmError::BadShots(self.shots));
        }
        if self.shot_pool.len() < self.shots {
            return Err(LlmError::ShotPoolTooSmall { needed: self.shots, available: self.shot_pool.len() });
        }
        Ok(())
    }
}

fn context_lines(instance: &Instance) -> Result<String> {
    let flat = flatten(&instance.context).map_err(|e| LlmError::BadInstance(format!("{}: {e}", instance.id)))?;
    let lines: Vec<String> = flat.texts().flatten().map(str::to_string).collect();
    Ok(lines.join("\n"))
}

fn option_lines(instance: &Instance) -> String {
    instance.answers.options.iter().map(|o| format!("{OPTION_BULLET}{}", o.text)).collect::<Vec<_>>().join("\n")
}

fn worked_example(k: usize, shot: &Instance) -> Result<String> {
    let correct = &shot.answers.correct().text;
    Ok(format!(
        "\n{EXAMPLE_HEADING} {k}\n\nContext:\n{}\n\nAnswer set:\n{}\n\nProvisional completion: {correct}\nHypotheses considered: the missing sentence should follow the pattern of the complete row; only one answer-set sentence does.\n{ANSWER_MARKER} {correct}\n",
        context_lines(shot)?,
        option_lines(shot)
    ))
}

/// Pool instances used as worked examples for `instance`, in display order.
pub fn select_shots<'a>(instance: &Instance, spec: &'a PromptSpec) -> Result<Vec<&'a Instance>> {
    spec.validate()?;
    if let Some(leak) = spec.shot_pool.iter().find(|s| s.id == instance.id) {
        return Err(LlmError::ShotLeak(leak.id.clone()));
    }
    let mut rng = derived_rng(spec.seed, &[Tag::Str("shots"), Tag::Str(&instance.id)]);
    Ok(sample(&mut rng, spec.shot_pool.len(), spec.shots).into_iter().map(|i| &spec.shot_pool[i]).collect())
}

/// Render the full prompt for one instance.
pub fn build_prompt(instance: &Instance, spec: &PromptSpec) -> Result<String> {
    let mut examples = String::new();
    for (k, shot) in select_shots(instance, spec)?.into_iter().enumerate() {
        examples.push_str(&worked_example(k + 1, shot)?);
    }
    Ok(PROMPT_TEMPLATE_V1
        .replace("{{COT}}", if spec.cot { COT_INSTRUCTION } else { "" })
        .replace("{{EXAMPLES}}", &examples)
        .replace("{{CONTEXT}}", &context_lines(instance)?)
        .replace("{{OPTIONS}}", &option_lines(instance)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { temperature: 0.1, max_tokens: 2046 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub prompt: String,
    pub gen_params: GenParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub id: String,
    pub response: String,
}

/// Prompts for every instance. Worked examples may not come from the
/// evaluated set.
pub fn build_prompts(instances: &[Instance], spec: &PromptSpec) -> Result<Vec<PromptRecord>> {
    let evaluated: HashSet<&str> = instances.iter().map(|i| i.id.as_str()).collect();
    if let Some(leak) = spec.shot_pool.iter().find(|s| evaluated.contains(s.id.as_str())) {
        return Err(LlmError::ShotLeak(leak.id.clone()));
    }
    instances
        .iter()
        .map(|i| {
            Ok(PromptRecord { id: i.id.clone(), prompt: build_prompt(i, spec)?, gen_params: GenParams::default() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmOutcome {
    pub id: String,
    pub response: String,
    /// Chosen option index, or `None` for ERR.
    pub resolved: Option<usize>,
}

/// The text the model gave as its final answer.
pub fn final_segment(raw: &str) -> &str {
    let lines: Vec<&str> = raw.lines().collect();
    let marker = ANSWER_MARKER.to_lowercase();
    for (i, line) in lines.iter().enumerate().rev() {
        let trimmed = line.trim_start();
        let head = trimmed.get(..ANSWER_MARKER.len()).map(str::to_lowercase);
        if head.as_deref() == Some(marker.as_str()) {
            let rest = trimmed[ANSWER_MARKER.len()..].trim();
            if !rest.is_empty() {
                return rest;
            }
            return lines[i + 1..].iter().map(|l| l.trim()).find(|l| !l.is_empty()).unwrap_or("");
        }
    }
    lines.iter().rev().map(|l| l.trim()).find(|l| !l.is_empty()).unwrap_or("")
}

/// Resolve a free-text response against the instance's options by exact match
/// after normalization. Anything else is ERR.
pub fn parse_response(id: &str, raw: &str, instance: &Instance) -> LlmOutcome {
    let answer = answer_form(final_segment(raw));
    let resolved = if answer.is_empty() {
        None
    } else {
        instance.answers.options.iter().position(|o| answer_form(&o.text) == answer)
    };
    LlmOutcome { id: id.to_string(), response: raw.to_string(), resolved }
}

/// Parse every response against the instance with the same id.
pub fn resolve_responses(responses: &[ResponseRecord], instances: &[Instance]) -> Result<Vec<LlmOutcome>> {
    let by_id = index_by_id(instances)?;
    responses
        .iter()
        .map(|r| {
            let inst = by_id.get(r.id.as_str()).ok_or_else(|| LlmError::IdMismatch(format!("unknown id {}", r.id)))?;
            Ok(parse_response(&r.id, &r.response, inst))
        })
        .collect()
}

fn index_by_id(instances: &[Instance]) -> Result<BTreeMap<&str, &Instance>> {
    let mut by_id = BTreeMap::new();
    for inst in instances {
        if by_id.insert(inst.id.as_str(), inst).is_some() {
            return Err(LlmError::IdMismatch(format!("duplicate instance id {}", inst.id)));
        }
    }
    Ok(by_id)
}

/// Score one outcome per instance. ERR outcomes count as wrong.
pub fn score_llm_run(outcomes: &[LlmOutcome], instances: &[Instance], meta: ReportMeta) -> Result<EvalReport> {
    let by_id = index_by_id(instances)?;
    let mut seen = HashSet::new();
    let mut predictions = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let inst = by_id.get(o.id.as_str()).ok_or_else(|| LlmError::IdMismatch(format!("unknown id {}", o.id)))?;
        if !seen.insert(o.id.as_str()) {
            return Err(LlmError::IdMismatch(format!("duplicate outcome for {}", o.id)));
        }
        match o.resolved {
            Some(i) if i >= inst.answers.options.len() => {
                return Err(LlmError::IdMismatch(format!("{}: option index {i} out of range", o.id)))
            }
            Some(i) => predictions.push(Some(inst.answers.options[i].label)),
            None => predictions.push(None),
        }
    }
    if let Some(missing) = by_id.keys().find(|id| !seen.contains(*id)) {
        return Err(LlmError::IdMismatch(format!("no outcome for {missing}")));
    }
    Ok(f1_report(&predictions, meta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ablate::apply_structure;
    use crate::lexicon::{generate_dataset, DataType, ErrorLabel, GenerateOptions, Lexicon, Phenomenon, Structure};

    fn data(n: usize, seed: u64) -> Vec<Instance> {
        generate_dataset(&Lexicon::builtin(), &GenerateOptions::new(Phenomenon::RollClass, DataType::TypeI, n, seed))
            .unwrap()
    }

    fn option_line_count(prompt: &str) -> usize {
        prompt.lines().filter(|l| l.starts_with(OPTION_BULLET)).count()
    }

    #[test]
    fn zero_shot_prompt_shape() {
        let inst = &data(1, 1)[0];
        let p = build_prompt(inst, &PromptSpec::zero_shot(false)).unwrap();
        assert_eq!(option_line_count(&p), 7);
        assert!(!p.contains(EXAMPLE_HEADING));
        assert!(!p.contains("step by step"));
        for o in &inst.answers.options {
            assert!(p.contains(&format!("{OPTION_BULLET}{}", o.text)));
        }
        let cot = build_prompt(inst, &PromptSpec::zero_shot(true)).unwrap();
        assert!(cot.contains("step by step"));
    }

    #[test]
    fn five_shots_precede_the_query() {
        let pool = data(20, 2);
        let inst = &data(1, 3)[0];
        let spec = PromptSpec { shots: 5, cot: false, seed: 9, shot_pool: pool };
        let p = build_prompt(inst, &spec).unwrap();
        assert_eq!(p.matches(EXAMPLE_HEADING).count(), 5);
        let query_at = p.find("### Puzzle").unwrap();
        assert!(p.rfind(EXAMPLE_HEADING).unwrap() < query_at);
        assert_eq!(option_line_count(&p), 7 * 6);
        assert_eq!(p, build_prompt(inst, &spec).unwrap());
    }

    #[test]
    fn masked_slots_are_not_displayed() {
        let inst = &data(1, 4)[0];
        let na = apply_structure(inst, Structure::NoAnalogy, 0).unwrap();
        let p = build_prompt(&na, &PromptSpec::zero_shot(false)).unwrap();
        let ctx = p.split("Context:\n").nth(1).unwrap().split("\n\nAnswer set").next().unwrap();
        assert_eq!(ctx.lines().count(), 3);
    }

    #[test]
    fn shot_errors() {
        let inst = &data(1, 5)[0];
        let small = PromptSpec { shots: 5, cot: false, seed: 0, shot_pool: data(3, 6) };
        assert!(matches!(build_prompt(inst, &small), Err(LlmError::ShotPoolTooSmall { needed: 5, available: 3 })));
        let leak = PromptSpec { shots: 1, cot: false, seed: 0, shot_pool: vec![inst.clone()] };
        assert!(matches!(build_prompt(inst, &leak), Err(LlmError::ShotLeak(_))));
    }

    #[test]
    fn prompt_does_not_mark_the_correct_option() {
        let inst = &data(1, 7)[0];
        let p = build_prompt(inst, &PromptSpec::zero_shot(false)).unwrap();
        for label in ErrorLabel::ALL {
            assert!(!p.contains(&format!("({})", label.as_str())));
        }
        assert!(!p.to_lowercase().contains("correct option"));
    }

    #[test]
    fn responses_resolve_by_exact_normalized_match() {
        let inst = &data(1, 8)[0];
        let correct = inst.answers.correct().text.clone();
        let shouted = format!("I think so.\n{ANSWER_MARKER}   {}  ", correct.to_uppercase().trim_end_matches('.'));
        assert_eq!(parse_response("x", &shouted, inst).resolved, Some(inst.answers.correct_index));
        let trailing = format!("Hypotheses: several.\n\n{correct}\n\n");
        assert_eq!(parse_response("x", &trailing, inst).resolved, Some(inst.answers.correct_index));
        assert_eq!(parse_response("x", "option d", inst).resolved, None);
        assert_eq!(parse_response("x", &format!("{ANSWER_MARKER} d"), inst).resolved, None);
        assert_eq!(parse_response("x", "", inst).resolved, None);
        // the last marker wins
        let other = &inst.answers.options[(inst.answers.correct_index + 1) % 7].text;
        let two = format!("{ANSWER_MARKER} {correct}\n{ANSWER_MARKER} {other}");
        assert_eq!(parse_response("x", &two, inst).resolved, Some((inst.answers.correct_index + 1) % 7));
    }

    #[test]
    fn figure_sentence_resolves() {
        use crate::lexicon::{build_answer_set, build_context};
        let (a, b) = crate::lexicon::tests::figure_one();
        let ctx = build_context(&a, &b).unwrap();
        let answers = build_answer_set(&ctx, &a, &b, 3).unwrap();
        let mut inst = data(1, 9).remove(0);
        inst.answers = answers;
        let out = parse_response("x", "After comparing, the answer is:\nThe mat rolled into a pillow.", &inst);
        assert_eq!(out.resolved, Some(inst.answers.correct_index));
        let out = parse_response("x", "the MAT rolled into a pillow", &inst);
        assert_eq!(out.resolved, Some(inst.answers.correct_index));
    }

    #[test]
    fn scoring_counts_err_as_wrong() {
        let insts = data(4, 10);
        let mut outcomes: Vec<LlmOutcome> = insts
            .iter()
            .map(|i| LlmOutcome { id: i.id.clone(), response: String::new(), resolved: Some(i.answers.correct_index) })
            .collect();
        let r = score_llm_run(&outcomes, &insts, ReportMeta::default()).unwrap();
        assert_eq!((r.micro_f1, r.err_rate), (1.0, 0.0));
        outcomes.iter_mut().for_each(|o| o.resolved = None);
        let r = score_llm_run(&outcomes, &insts, ReportMeta::default()).unwrap();
        assert_eq!((r.micro_f1, r.err_rate), (0.0, 1.0));
        assert!(matches!(score_llm_run(&outcomes[1..], &insts, ReportMeta::default()), Err(LlmError::IdMismatch(_))));
        let mut dup = outcomes.clone();
        dup[1].id = dup[0].id.clone();
        assert!(matches!(score_llm_run(&dup, &insts, ReportMeta::default()), Err(LlmError::IdMismatch(_))));
    }
}
