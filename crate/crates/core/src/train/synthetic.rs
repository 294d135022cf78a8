//! Oracle-constructed embedding task with a known solution.
//!
//! Context rows are unit vectors composed from a small dictionary of random
//! atoms, loosely mimicking how sentence vectors share lexical material. The
//! correct option is the mean of Base slots 5–7 plus a little noise; each
//! distractor is the same construction over three unrelated rows, so only the
//! position of the rows carries the answer.
//!
//! Two distractor constructions are available. `Random` draws each
//! distractor as an independent Gaussian vector. `ContextRows` averages three
//! of the first four context rows, so distractors share material with the
//! context and only the row positions separate them from the answer.

use rand::seq::{index::sample, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Example, Result};
use crate::ablate::slot_sources;
use crate::embed::SLOTS;
use crate::lexicon::{ErrorLabel, Structure};
use crate::seed::{derived_rng, Tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub dim: usize,
    /// Dictionary size.
    pub atoms: usize,
    /// Atoms summed into one context row.
    pub atoms_per_row: usize,
    /// Noise norm relative to the clean target norm.
    pub noise: f64,
    pub distractors: DistractorMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorMode {
    /// Independent Gaussian vectors.
    Random,
    /// Noisy means of three of Base slots 1–4.
    ContextRows,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            dim: 768,
            atoms: 64,
            atoms_per_row: 3,
            noise: 0.1,
            distractors: DistractorMode::Random,
            seed: 42,
        }
    }
}

/// Base slots whose mean is the answer.
const ANSWER_SLOTS: [usize; 3] = [4, 5, 6];

#[derive(Debug, Clone)]
struct Item {
    id: String,
    rows: Vec<Vec<f64>>,
    options: Vec<Vec<f64>>,
    labels: Vec<ErrorLabel>,
    correct_index: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    config: SyntheticConfig,
    atoms: Vec<Vec<f64>>,
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

impl SyntheticTask {
    pub fn new(config: SyntheticConfig) -> Self {
        let mut rng = derived_rng(config.seed, &[Tag::Str("atoms")]);
        let raw: Vec<Vec<f64>> = (0..config.atoms).map(|_| gaussian(&mut rng, config.dim)).collect();
        // Centre the dictionary so no fixed direction is shared by all rows.
        let mut mean = vec![0.0; config.dim];
        for a in &raw {
            mean.iter_mut().zip(a).for_each(|(m, x)| *m += x / raw.len() as f64);
        }
        let atoms = raw.into_iter().map(|a| unit(a.iter().zip(&mean).map(|(x, m)| x - m).collect())).collect();
        SyntheticTask { config, atoms }
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    /// Rows have norm sqrt(dim), i.e. components of unit scale.
    fn row(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if self.atoms.is_empty() {
            let norm = (self.config.dim as f64).sqrt();
            return unit(gaussian(rng, self.config.dim)).into_iter().map(|x| x * norm).collect();
        }
        let mut v = vec![0.0; self.config.dim];
        for a in sample(rng, self.atoms.len(), self.config.atoms_per_row.min(self.atoms.len())) {
            v.iter_mut().zip(&self.atoms[a]).for_each(|(x, y)| *x += y);
        }
        let norm = (self.config.dim as f64).sqrt();
        unit(v).into_iter().map(|x| x * norm).collect()
    }

    fn target(&self, rows: &[&Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let dim = self.config.dim;
        let mut mean = vec![0.0; dim];
        for r in rows {
            mean.iter_mut().zip(r.iter()).for_each(|(m, x)| *m += x / rows.len() as f64);
        }
        let scale = self.config.noise * mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        let noise = unit(gaussian(rng, dim));
        mean.iter().zip(noise).map(|(m, e)| m + scale * e).collect()
    }

    fn item(&self, split: &str, index: usize) -> Item {
        let mut rng = derived_rng(self.config.seed, &[Tag::Str("item"), Tag::Str(split), Tag::from(index)]);
        let rows: Vec<Vec<f64>> = (0..SLOTS).map(|_| self.row(&mut rng)).collect();
        let answer_rows: Vec<&Vec<f64>> = ANSWER_SLOTS.iter().map(|&i| &rows[i]).collect();
        let mut options = vec![(ErrorLabel::Correct, self.target(&answer_rows, &mut rng))];
        for &label in &ErrorLabel::ALL[1..] {
            let vector = match self.config.distractors {
                DistractorMode::Random => gaussian(&mut rng, self.config.dim),
                DistractorMode::ContextRows => {
                    let refs: Vec<&Vec<f64>> = sample(&mut rng, 4, 3).iter().map(|i| &rows[i]).collect();
                    self.target(&refs, &mut rng)
                }
            };
            options.push((label, vector));
        }
        options.shuffle(&mut rng);
        let correct_index = options.iter().position(|(l, _)| *l == ErrorLabel::Correct).expect("correct option");
        Item {
            id: format!("synthetic-{split}-{index:06}"),
            rows,
            labels: options.iter().map(|(l, _)| *l).collect(),
            options: options.into_iter().map(|(_, v)| v).collect(),
            correct_index,
        }
    }

    /// `n` examples of split `split` presented under `structure`. Shuffled
    /// permutations are seeded per example from `structure_seed`.
    pub fn examples(&self, split: &str, n: usize, structure: Structure, structure_seed: u64) -> Result<Vec<Example>> {
        let dim = self.config.dim;
        (0..n)
            .map(|i| {
                let item = self.item(split, i);
                let sources = slot_sources(structure, structure_seed, &item.id)?;
                let mut input = vec![0.0f32; SLOTS * dim];
                for (slot, src) in sources.iter().enumerate() {
                    if let Some(src) = src {
                        for (dst, &x) in input[slot * dim..(slot + 1) * dim].iter_mut().zip(&item.rows[*src]) {
                            *dst = x as f32;
                        }
                    }
                }
                Ok(Example {
                    id: item.id,
                    input,
                    options: item.options.iter().map(|o| o.iter().map(|&x| x as f32).collect()).collect(),
                    labels: item.labels,
                    correct_index: item.correct_index,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::choose;

    fn task() -> SyntheticTask {
        SyntheticTask::new(SyntheticConfig { dim: 32, ..SyntheticConfig::default() })
    }

    #[test]
    fn oracle_predictor_solves_base() {
        let t = task();
        let ex = t.examples("test", 200, Structure::Base, 0).unwrap();
        let mut hits = 0;
        for e in &ex {
            let pred: Vec<f64> =
                (0..32).map(|j| ANSWER_SLOTS.iter().map(|&s| e.input[s * 32 + j] as f64).sum::<f64>()).collect();
            if choose(&pred, &e.options).unwrap().0 == e.correct_index {
                hits += 1;
            }
        }
        assert!(hits >= 190, "{hits}");
    }

    #[test]
    fn examples_are_deterministic_and_labelled() {
        let a = task().examples("train", 5, Structure::Shuffled, 3).unwrap();
        let b = task().examples("train", 5, Structure::Shuffled, 3).unwrap();
        assert_eq!(a, b);
        for e in &a {
            assert_eq!(e.labels[e.correct_index], ErrorLabel::Correct);
            let mut labels = e.labels.clone();
            labels.sort();
            assert_eq!(labels, ErrorLabel::ALL.to_vec());
        }
    }

    #[test]
    fn structures_move_the_same_rows() {
        let t = task();
        let base = t.examples("val", 3, Structure::Base, 0).unwrap();
        let na = t.examples("val", 3, Structure::NoAnalogy, 0).unwrap();
        for (b, n) in base.iter().zip(&na) {
            assert!(n.input[..4 * 32].iter().all(|&x| x == 0.0));
            assert_eq!(n.input[4 * 32..], b.input[4 * 32..]);
            assert_eq!(n.options, b.options);
        }
    }

    fn oracle_hits(t: &SyntheticTask, ex: &[Example]) -> usize {
        let dim = t.config().dim;
        ex.iter()
            .filter(|e| {
                let pred: Vec<f64> =
                    (0..dim).map(|j| ANSWER_SLOTS.iter().map(|&s| e.input[s * dim + j] as f64).sum::<f64>()).collect();
                choose(&pred, &e.options).unwrap().0 == e.correct_index
            })
            .count()
    }

    #[test]
    fn oracle_predictor_solves_context_row_distractors() {
        let t = SyntheticTask::new(SyntheticConfig {
            dim: 64,
            distractors: DistractorMode::ContextRows,
            ..SyntheticConfig::default()
        });
        let ex = t.examples("test", 100, Structure::Base, 0).unwrap();
        let hits = oracle_hits(&t, &ex);
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn input_independent_predictor_stays_near_chance() {
        let t = SyntheticTask::new(SyntheticConfig { dim: 64, ..SyntheticConfig::default() });
        let train = t.examples("train", 300, Structure::Base, 0).unwrap();
        let mut constant = vec![0.0f64; 64];
        for e in &train {
            for (c, x) in constant.iter_mut().zip(&e.options[e.correct_index]) {
                *c += *x as f64;
            }
        }
        let test = t.examples("test", 300, Structure::Base, 0).unwrap();
        let hits = test.iter().filter(|e| choose(&constant, &e.options).unwrap().0 == e.correct_index).count();
        assert!(hits < 100, "{hits}");
    }
}
