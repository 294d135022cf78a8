//! Scoring recorded language-model responses.

use blm_core::ablate::apply_structure;
use blm_core::lexicon::{
    generate_dataset, DataType, ErrorLabel, GenerateOptions, Instance, Lexicon, Phenomenon, Structure,
};
use blm_core::llm::{resolve_responses, score_llm_run, ResponseRecord, ANSWER_MARKER};
use blm_core::train::ReportMeta;
use proptest::prelude::*;

fn data(structure: Structure) -> Vec<Instance> {
    let base =
        generate_dataset(&Lexicon::builtin(), &GenerateOptions::new(Phenomenon::RollClass, DataType::TypeI, 100, 5))
            .unwrap();
    base.iter().map(|i| apply_structure(i, structure, 9).unwrap()).collect()
}

/// Responses naming the correct option for the first `correct` instances,
/// a distractor for the next `wrong`, and no option for the rest.
fn responses(instances: &[Instance], correct: usize, wrong: usize) -> Vec<ResponseRecord> {
    instances
        .iter()
        .enumerate()
        .map(|(k, inst)| {
            let answer = if k < correct {
                inst.answers.correct().text.clone()
            } else if k < correct + wrong {
                let d = inst.answers.options.iter().find(|o| o.label == ErrorLabel::ALL[1 + k % 6]).unwrap();
                d.text.clone()
            } else {
                "none of the above".to_string()
            };
            ResponseRecord {
                id: inst.id.clone(),
                response: format!("Reasoning about the rows.\n{ANSWER_MARKER} {answer}"),
            }
        })
        .collect()
}

fn score(structure: Structure, correct: usize, wrong: usize) -> blm_core::train::EvalReport {
    let set = data(structure);
    let outcomes = resolve_responses(&responses(&set, correct, wrong), &set).unwrap();
    score_llm_run(&outcomes, &set, ReportMeta { structure: Some(structure), ..ReportMeta::default() }).unwrap()
}

#[test]
fn recorded_base_and_shuffled_runs_keep_their_ordering() {
    let base = score(Structure::Base, 55, 45);
    let shuffled = score(Structure::Shuffled, 24, 70);
    assert_eq!(base.micro_f1, 0.55);
    assert_eq!(shuffled.micro_f1, 0.24);
    assert_eq!(shuffled.counts["ERR"], 6);
    assert!(base.micro_f1 > shuffled.micro_f1);
}

#[test]
fn all_correct_and_all_err() {
    let all = score(Structure::Base, 100, 0);
    assert_eq!((all.micro_f1, all.err_rate), (1.0, 0.0));
    let none = score(Structure::Base, 0, 0);
    assert_eq!((none.micro_f1, none.err_rate), (0.0, 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn micro_f1_never_exceeds_one_minus_err_rate(correct in 0usize..=100, wrong in 0usize..=100) {
        let wrong = wrong.min(100 - correct);
        let r = score(Structure::Base, correct, wrong);
        prop_assert!(r.micro_f1 <= 1.0 - r.err_rate + 1e-12);
        prop_assert_eq!(r.counts["Correct"], correct);
        prop_assert_eq!(r.counts["ERR"], 100 - correct - wrong);
    }
}
