//! F1 reports over chosen-option labels and the generalization gap.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Result, TrainError};
use crate::lexicon::{DataType, ErrorLabel, Structure};

/// Histogram key for unparseable language-model answers.
pub const ERR_KEY: &str = "ERR";

/// Histogram keys in report order: the seven labels, then ERR.
pub const COUNT_KEYS: [&str; 8] = ["Correct", "RR", "SCRR", "SCRS", "PCRR", "PSCRR", "PSCRS", ERR_KEY];

/// Where a report came from. Every field is optional so the same type serves
/// trained heads and language-model runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model: Option<String>,
    pub structure: Option<Structure>,
    pub data_type: Option<DataType>,
    pub size: Option<usize>,
    pub run: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Predicted-label histogram over [`COUNT_KEYS`].
    pub counts: BTreeMap<String, usize>,
    pub err_rate: f64,
    pub n: usize,
    pub meta: ReportMeta,
}

fn key(label: Option<ErrorLabel>) -> &'static str {
    label.map_or(ERR_KEY, ErrorLabel::as_str)
}

/// Score chosen labels against the constant gold label `Correct`; `None` is
/// an ERR outcome. Macro-F1 averages per-label F1 over labels that occur in
/// predictions or gold, ERR included.
pub fn f1_report(predictions: &[Option<ErrorLabel>], meta: ReportMeta) -> Result<EvalReport> {
    let n = predictions.len();
    if n == 0 {
        return Err(TrainError::EmptyPredictions);
    }
    let mut counts: BTreeMap<String, usize> = COUNT_KEYS.iter().map(|k| (k.to_string(), 0)).collect();
    for &p in predictions {
        *counts.get_mut(key(p)).expect("known key") += 1;
    }
    let correct = counts["Correct"];
    let mut f1_sum = 0.0;
    let mut present = 0usize;
    for k in COUNT_KEYS {
        let predicted = counts[k];
        let gold = if k == "Correct" { n } else { 0 };
        if predicted == 0 && gold == 0 {
            continue;
        }
        let tp = if k == "Correct" { correct } else { 0 };
        let (fp, fn_) = (predicted - tp, gold - tp);
        f1_sum += (2 * tp) as f64 / (2 * tp + fp + fn_) as f64;
        present += 1;
    }
    Ok(EvalReport {
        micro_f1: correct as f64 / n as f64,
        macro_f1: f1_sum / present as f64,
        err_rate: counts[ERR_KEY] as f64 / n as f64,
        counts,
        n,
        meta,
    })
}

/// Resolution at which F1 values are subtracted, so that decimal inputs such
/// as 0.9 and 0.7 produce the decimal difference 0.2.
const GAP_SCALE: f64 = 1e12;

/// Mean over models of F1(seen) − F1(unseen). Both maps are keyed by model
/// name and must cover the same non-empty set.
pub fn generalization_gap(seen: &BTreeMap<String, f64>, unseen: &BTreeMap<String, f64>) -> Result<f64> {
    if seen.is_empty() {
        return Err(TrainError::ModelSetMismatch("no models".into()));
    }
    if !seen.keys().eq(unseen.keys()) {
        let a: Vec<_> = seen.keys().collect();
        let b: Vec<_> = unseen.keys().collect();
        return Err(TrainError::ModelSetMismatch(format!("{a:?} vs {b:?}")));
    }
    let ticks = |x: f64| (x * GAP_SCALE).round() as i128;
    let total: i128 = seen.iter().map(|(m, &s)| ticks(s) - ticks(unseen[m])).sum();
    Ok(total as f64 / seen.len() as f64 / GAP_SCALE)
}

#[derive(Serialize)]
struct ReportRow<'a> {
    model: &'a str,
    structure: String,
    data_type: String,
    size: String,
    run: String,
    seed: String,
    n: usize,
    micro_f1: f64,
    macro_f1: f64,
    err_rate: f64,
    #[serde(rename = "Correct")]
    correct: usize,
    #[serde(rename = "RR")]
    rr: usize,
    #[serde(rename = "SCRR")]
    scrr: usize,
    #[serde(rename = "SCRS")]
    scrs: usize,
    #[serde(rename = "PCRR")]
    pcrr: usize,
    #[serde(rename = "PSCRR")]
    pscrr: usize,
    #[serde(rename = "PSCRS")]
    pscrs: usize,
    #[serde(rename = "ERR")]
    err: usize,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// One CSV row per report.
pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        let c = |k: &str| r.counts.get(k).copied().unwrap_or(0);
        w.serialize(ReportRow {
            model: r.meta.model.as_deref().unwrap_or(""),
            structure: opt(&r.meta.structure),
            data_type: opt(&r.meta.data_type),
            size: opt(&r.meta.size),
            run: opt(&r.meta.run),
            seed: opt(&r.meta.seed),
            n: r.n,
            micro_f1: r.micro_f1,
            macro_f1: r.macro_f1,
            err_rate: r.err_rate,
            correct: c("Correct"),
            rr: c("RR"),
            scrr: c("SCRR"),
            scrs: c("SCRS"),
            pcrr: c("PCRR"),
            pscrr: c("PSCRR"),
            pscrs: c("PSCRS"),
            err: c(ERR_KEY),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ErrorLabel::*;

    fn models(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(m, f)| (m.to_string(), *f)).collect()
    }

    #[test]
    fn all_correct_and_none_correct() {
        let r = f1_report(&[Some(Correct); 10], ReportMeta::default()).unwrap();
        assert_eq!((r.micro_f1, r.macro_f1, r.err_rate), (1.0, 1.0, 0.0));
        let r = f1_report(&[Some(RR), Some(PSCRS)], ReportMeta::default()).unwrap();
        assert_eq!(r.micro_f1, 0.0);
        assert_eq!(r.macro_f1, 0.0);
    }

    #[test]
    fn mixed_predictions_match_a_hand_built_confusion_matrix() {
        // 55 Correct, 45 over distractors: 20 RR, 15 SCRR, 10 PCRR
        let mut preds = vec![Some(Correct); 55];
        preds.extend([Some(RR)].repeat(20));
        preds.extend([Some(SCRR)].repeat(15));
        preds.extend([Some(PCRR)].repeat(10));
        let r = f1_report(&preds, ReportMeta::default()).unwrap();
        assert_eq!(r.micro_f1, 0.55);
        assert_eq!(r.counts["Correct"], 55);
        assert_eq!(r.counts["RR"], 20);
        assert_eq!(r.counts["SCRR"], 15);
        assert_eq!(r.counts["PCRR"], 10);
        assert_eq!(r.counts.values().sum::<usize>(), 100);
        // Correct: tp 55, fp 0, fn 45 -> 110/155; the three distractor labels score 0
        assert!((r.macro_f1 - (110.0 / 155.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn err_outcomes_are_counted_and_wrong() {
        let r = f1_report(&[None, None, Some(Correct), None], ReportMeta::default()).unwrap();
        assert_eq!(r.err_rate, 0.75);
        assert_eq!(r.micro_f1, 0.25);
        assert_eq!(r.counts[ERR_KEY], 3);
        assert!(f1_report(&[], ReportMeta::default()).is_err());
    }

    #[test]
    fn gap_examples() {
        let same = models(&[("cnn", 0.83), ("ffnn", 0.61)]);
        assert_eq!(generalization_gap(&same, &same).unwrap(), 0.0);
        assert_eq!(generalization_gap(&models(&[("m", 0.9)]), &models(&[("m", 0.7)])).unwrap(), 0.2);
        assert_eq!(
            generalization_gap(&models(&[("a", 0.9), ("b", 0.8)]), &models(&[("a", 0.7), ("b", 0.8)])).unwrap(),
            0.1
        );
        assert_eq!(generalization_gap(&models(&[("m", 0.7)]), &models(&[("m", 0.9)])).unwrap(), -0.2);
    }

    #[test]
    fn gap_requires_matching_models() {
        let err = generalization_gap(&models(&[("a", 0.9)]), &models(&[("b", 0.9)]));
        assert!(matches!(err, Err(TrainError::ModelSetMismatch(_))));
        assert!(generalization_gap(&BTreeMap::new(), &BTreeMap::new()).is_err());
    }

    #[test]
    fn csv_has_fixed_columns() {
        let meta =
            ReportMeta { structure: Some(Structure::Base), size: Some(100), run: Some(0), ..ReportMeta::default() };
        let r = f1_report(&[Some(Correct), Some(RR)], meta).unwrap();
        let mut out = Vec::new();
        write_reports_csv(&[r], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "model,structure,data_type,size,run,seed,n,micro_f1,macro_f1,err_rate,Correct,RR,SCRR,SCRS,PCRR,PSCRR,PSCRS,ERR"
        );
        assert_eq!(lines.next().unwrap(), ",base,,100,0,,2,0.5,0.3333333333333333,0.0,1,1,0,0,0,0,0,0");
    }
}
