//! Learning-curve sweeps over training sizes and structures.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, train, EvalReport, Example, ReportMeta, Result, TrainConfig, TrainError};
use crate::lexicon::{DataType, Structure};
use crate::seed::{derived_rng, Tag};

/// Default training-size grid.
pub const DEFAULT_SIZES: [usize; 10] = [10, 50, 100, 200, 500, 1000, 1200, 1500, 2000, 2700];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub structures: Vec<Structure>,
    pub train: TrainConfig,
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sizes: DEFAULT_SIZES.to_vec(),
            structures: vec![Structure::Base],
            train: TrainConfig::default(),
            jobs: 1,
        }
    }
}

/// Prepared train/val/test examples for one structure. Training examples
/// must be listed in the same underlying order for every structure.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub structure: Structure,
    pub reports: Vec<EvalReport>,
    pub mean_micro_f1: f64,
    pub std_micro_f1: f64,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn reports(&self) -> impl Iterator<Item = &EvalReport> {
        self.rows.iter().flat_map(|r| r.reports.iter())
    }

    pub fn row(&self, size: usize, structure: Structure) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.size == size && r.structure == structure)
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Deterministic training order; the first `t` entries form the size-`t`
/// sample, so smaller samples are prefixes of larger ones.
pub fn subsample_order(available: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..available).collect();
    order.shuffle(&mut derived_rng(seed, &[Tag::Str("subsample")]));
    order
}

/// Train `runs` models for every (size, structure) pair and evaluate each on
/// the structure's test set.
pub fn sweep(
    config: &SweepConfig,
    data: &BTreeMap<Structure, SweepCell>,
    data_type: Option<DataType>,
) -> Result<SweepResult> {
    config.train.validate()?;
    let mut available = usize::MAX;
    for s in &config.structures {
        let cell =
            data.get(s).ok_or_else(|| TrainError::InvalidConfig(format!("no data prepared for structure {s}")))?;
        available = available.min(cell.train.len());
    }
    for &size in &config.sizes {
        if size > available || size == 0 {
            return Err(TrainError::SizeExceedsData { size, available });
        }
    }
    let order = subsample_order(available, config.train.base_seed);

    let mut jobs = Vec::new();
    for &size in &config.sizes {
        for &structure in &config.structures {
            for run in 0..config.train.runs {
                jobs.push((size, structure, run));
            }
        }
    }
    let cell_job = |&(size, structure, run): &(usize, Structure, usize)| -> Result<EvalReport> {
        let cell = &data[&structure];
        let train_set: Vec<Example> = order[..size].iter().map(|&i| cell.train[i].clone()).collect();
        let seed = config.train.run_seed(run);
        let (net, _) = train(&config.train, seed, &train_set, &cell.val)?;
        let meta = ReportMeta {
            model: Some(config.train.model.to_string()),
            structure: Some(structure),
            data_type,
            size: Some(size),
            run: Some(run),
            seed: Some(seed),
        };
        evaluate(&net, &cell.test, meta)
    };
    let reports: Vec<EvalReport> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(cell_job).collect::<Result<Vec<_>>>())?
    } else {
        jobs.iter().map(cell_job).collect::<Result<Vec<_>>>()?
    };

    let mut rows = Vec::new();
    for (chunk, key) in reports.chunks(config.train.runs).zip(jobs.chunks(config.train.runs)) {
        let (size, structure, _) = key[0];
        let micro: Vec<f64> = chunk.iter().map(|r| r.micro_f1).collect();
        let macro_: Vec<f64> = chunk.iter().map(|r| r.macro_f1).collect();
        let (mean_micro_f1, std_micro_f1) = mean_std(&micro);
        let (mean_macro_f1, std_macro_f1) = mean_std(&macro_);
        rows.push(SweepRow {
            size,
            structure,
            reports: chunk.to_vec(),
            mean_micro_f1,
            std_micro_f1,
            mean_macro_f1,
            std_macro_f1,
        });
    }
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{SyntheticConfig, SyntheticTask};

    #[test]
    fn sample_std_matches_direct_computation() {
        let (m, s) = mean_std(&[0.5, 0.7, 0.9]);
        assert!((m - 0.7).abs() < 1e-15);
        assert!((s - 0.2).abs() < 1e-15);
        assert_eq!(mean_std(&[0.4]), (0.4, 0.0));
    }

    #[test]
    fn smaller_samples_are_prefixes() {
        let order = subsample_order(300, 42);
        let small: Vec<usize> = order[..10].to_vec();
        let large: Vec<usize> = order[..100].to_vec();
        assert!(small.iter().all(|i| large.contains(i)));
        assert_eq!(subsample_order(300, 42), order);
    }

    fn tiny_data() -> BTreeMap<Structure, SweepCell> {
        let task = SyntheticTask::new(SyntheticConfig { dim: 12, ..SyntheticConfig::default() });
        [Structure::Base, Structure::Shuffled]
            .into_iter()
            .map(|s| {
                let cell = SweepCell {
                    train: task.examples("train", 20, s, 1).unwrap(),
                    val: task.examples("val", 5, s, 1).unwrap(),
                    test: task.examples("test", 6, s, 1).unwrap(),
                };
                (s, cell)
            })
            .collect()
    }

    #[test]
    fn grid_counts_and_parallel_equivalence() {
        let mut config = SweepConfig {
            sizes: vec![5, 10],
            structures: vec![Structure::Base],
            train: TrainConfig { epochs: 3, dim: 12, ..TrainConfig::default() },
            jobs: 1,
        };
        let data = tiny_data();
        let serial = sweep(&config, &data, None).unwrap();
        assert_eq!(serial.rows.len(), 2);
        assert_eq!(serial.reports().count(), 6);
        for row in &serial.rows {
            let micro: Vec<f64> = row.reports.iter().map(|r| r.micro_f1).collect();
            assert_eq!(mean_std(&micro), (row.mean_micro_f1, row.std_micro_f1));
            assert!(row.std_micro_f1 >= 0.0);
        }
        config.jobs = 3;
        assert_eq!(sweep(&config, &data, None).unwrap(), serial);
    }

    #[test]
    fn oversized_requests_fail() {
        let config = SweepConfig {
            sizes: vec![21],
            train: TrainConfig { dim: 12, ..TrainConfig::default() },
            ..SweepConfig::default()
        };
        assert!(matches!(
            sweep(&config, &tiny_data(), None),
            Err(TrainError::SizeExceedsData { size: 21, available: 20 })
        ));
    }
}
