//! Structure conditions for context grids.
//!
//! Masking multiplies the 2×4 grid elementwise with a 0/1 matrix; masked cells
//! stay in place as zero-content slots so every condition keeps seven input
//! slots. Transposition turns the grid into 4×2. Shuffling permutes the seven
//! sentence cells with a per-instance seed.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Cell, CellContent, CellRole, ContextMatrix, Instance, Structure};
use crate::seed::{derived_rng, Tag};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AblateError {
    #[error("instance {id} has structure {structure}, expected base")]
    NotBase { id: String, structure: Structure },
    #[error("bad grid shape: {0}")]
    ShapeError(String),
}

pub type Result<T> = std::result::Result<T, AblateError>;

/// A 2×4 keep/drop mask. Entry (2,4) is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureMask {
    entries: [[u8; 4]; 2],
}

impl StructureMask {
    /// Drops the first paradigm.
    pub const NO_ANALOGY: StructureMask = StructureMask { entries: [[0, 0, 0, 0], [1, 1, 1, 0]] };
    /// Keeps only the anchors: (1,1), (1,4), (2,1).
    pub const NO_SOFT_CUE: StructureMask = StructureMask { entries: [[1, 0, 0, 1], [1, 0, 0, 0]] };
    pub const IDENTITY: StructureMask = StructureMask { entries: [[1, 1, 1, 1], [1, 1, 1, 0]] };

    pub fn new(entries: [[u8; 4]; 2]) -> std::result::Result<Self, String> {
        if entries.iter().flatten().any(|&e| e > 1) {
            return Err("mask entries must be 0 or 1".into());
        }
        if entries[1][3] != 0 {
            return Err("mask entry (2,4) must be 0".into());
        }
        Ok(StructureMask { entries })
    }

    pub fn entries(&self) -> [[u8; 4]; 2] {
        self.entries
    }

    /// 1-based lookup.
    pub fn keeps(&self, row: usize, col: usize) -> bool {
        self.entries[row - 1][col - 1] == 1
    }

    /// Elementwise product with a Base-oriented grid. Sentence text is never
    /// edited; dropped cells become `Masked`, the blank stays blank.
    pub fn apply(&self, context: &ContextMatrix) -> Result<ContextMatrix> {
        if context.shape() != (2, 4) {
            return Err(AblateError::ShapeError(format!("masks apply to 2x4 grids, got {:?}", context.shape())));
        }
        let mut out = context.clone();
        for (i, cell) in out.cells_mut().iter_mut().enumerate() {
            let (row, col) = (i / 4 + 1, i % 4 + 1);
            if !self.keeps(row, col) && !cell.is_blank() {
                cell.content = CellContent::Masked;
            }
        }
        Ok(out)
    }
}

/// Rewrite a Base instance under `target`. The answer set is left untouched.
/// `rng_seed` only matters for `Shuffled`; each instance gets its own
/// permutation derived from the seed and its id.
pub fn apply_structure(instance: &Instance, target: Structure, rng_seed: u64) -> Result<Instance> {
    if instance.structure != Structure::Base {
        return Err(AblateError::NotBase { id: instance.id.clone(), structure: instance.structure });
    }
    instance.context.check_shape().map_err(AblateError::ShapeError)?;
    let context = transform(&instance.context, target, rng_seed, &instance.id)?;
    Ok(Instance { structure: target, context, ..instance.clone() })
}

fn transform(context: &ContextMatrix, target: Structure, rng_seed: u64, id: &str) -> Result<ContextMatrix> {
    Ok(match target {
        Structure::Base => context.clone(),
        Structure::NoAnalogy => StructureMask::NO_ANALOGY.apply(context)?,
        Structure::NoSoftCue => StructureMask::NO_SOFT_CUE.apply(context)?,
        Structure::Transposed => context.transpose(),
        Structure::Shuffled => shuffle_cells(context, rng_seed, id),
    })
}

/// For each of the seven model slots under `target`, the Base slot (0-based,
/// Base traversal order) whose sentence lands there, or `None` if masked.
/// Uses the same transformation as [`apply_structure`] on a labelled grid.
pub fn slot_sources(target: Structure, rng_seed: u64, id: &str) -> Result<[Option<usize>; 7]> {
    let cells = (0..8)
        .map(|i| Cell {
            role: CellRole::ROW_ORDER[i % 4],
            content: if i == 7 { CellContent::Blank } else { CellContent::Sentence(i.to_string()) },
        })
        .collect();
    let labelled = ContextMatrix::from_cells(2, 4, cells);
    let flat = flatten(&transform(&labelled, target, rng_seed, id)?)?;
    let mut out = [None; 7];
    for (slot, dst) in flat.slots.iter().zip(out.iter_mut()) {
        *dst = slot.text.as_ref().map(|t| t.parse().expect("labelled grid"));
    }
    Ok(out)
}

fn shuffle_cells(context: &ContextMatrix, seed: u64, id: &str) -> ContextMatrix {
    let mut out = context.clone();
    let positions: Vec<usize> = (0..out.cells().len()).filter(|&i| !out.cells()[i].is_blank()).collect();
    let mut permuted: Vec<_> = positions.iter().map(|&i| out.cells()[i].clone()).collect();
    permuted.shuffle(&mut derived_rng(seed, &[Tag::Str("shuffle"), Tag::Str(id)]));
    for (&pos, cell) in positions.iter().zip(permuted) {
        out.cells_mut()[pos] = cell;
    }
    out
}

/// One model input slot: the sentence at a grid position, or nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    /// 1-based (row, col) in the grid the slot was read from.
    pub position: (usize, usize),
    pub text: Option<String>,
}

/// The seven context slots in traversal order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblatedContext {
    pub slots: Vec<Slot>,
}

impl AblatedContext {
    pub fn texts(&self) -> impl Iterator<Item = Option<&str>> {
        self.slots.iter().map(|s| s.text.as_deref())
    }

    pub fn unmasked(&self) -> usize {
        self.slots.iter().filter(|s| s.text.is_some()).count()
    }
}

/// Row-major traversal of the grid in its own shape, skipping the blank.
pub fn flatten(context: &ContextMatrix) -> Result<AblatedContext> {
    context.check_shape().map_err(AblateError::ShapeError)?;
    let slots: Vec<Slot> = context
        .iter()
        .filter(|(_, cell)| !cell.is_blank())
        .map(|(position, cell)| Slot { position, text: cell.text().map(str::to_string) })
        .collect();
    debug_assert_eq!(slots.len(), 7);
    Ok(AblatedContext { slots })
}
