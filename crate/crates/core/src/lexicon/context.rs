use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ParadigmSpec, Result};

pub const ROWS: usize = 2;
pub const COLS: usize = 4;

/// Column roles of a paradigm row, in Base order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellRole {
    TransitiveAnchor,
    CueAction,
    CueState,
    IntransitiveAnchor,
}

impl CellRole {
    pub const ROW_ORDER: [CellRole; COLS] =
        [CellRole::TransitiveAnchor, CellRole::CueAction, CellRole::CueState, CellRole::IntransitiveAnchor];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CellContent {
    Sentence(String),
    /// Zeroed out by a structure mask.
    Masked,
    /// The cell to be completed.
    Blank,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cell {
    pub role: CellRole,
    pub content: CellContent,
}

impl Cell {
    pub fn text(&self) -> Option<&str> {
        match &self.content {
            CellContent::Sentence(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_blank(&self) -> bool {
        self.content == CellContent::Blank
    }
}

/// The context grid. Base orientation is 2×4 with the blank at (2,4);
/// a transposed grid is 4×2 with the blank at (4,2). Coordinates are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

impl ContextMatrix {
    /// Build a grid from row-major cells. Shape and blank placement are not
    /// checked here; see [`ContextMatrix::check_shape`].
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<Cell>) -> Self {
        assert_eq!(rows * cols, cells.len(), "cell count must match shape");
        ContextMatrix { rows, cols, cells }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_transposed(&self) -> bool {
        (self.rows, self.cols) == (COLS, ROWS)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [Cell] {
        &mut self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&Cell> {
        if row == 0 || col == 0 || row > self.rows || col > self.cols {
            return None;
        }
        self.cells.get((row - 1) * self.cols + (col - 1))
    }

    /// Row-major iterator of `((row, col), cell)` with 1-based coordinates.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &Cell)> {
        let cols = self.cols;
        self.cells.iter().enumerate().map(move |(i, c)| ((i / cols + 1, i % cols + 1), c))
    }

    /// Expected position of the blank for this grid's shape.
    pub fn blank_position(&self) -> (usize, usize) {
        if self.is_transposed() {
            (COLS, ROWS)
        } else {
            (ROWS, COLS)
        }
    }

    pub fn sentence_count(&self) -> usize {
        self.cells.iter().filter(|c| c.text().is_some()).count()
    }

    /// Swap rows and columns; a 2×4 grid becomes 4×2 and back.
    pub fn transpose(&self) -> ContextMatrix {
        let mut cells = Vec::with_capacity(self.cells.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                cells.push(self.cells[r * self.cols + c].clone());
            }
        }
        ContextMatrix { rows: self.cols, cols: self.rows, cells }
    }

    /// `Ok` iff the grid is 2×4 or 4×2 with exactly one blank at the
    /// shape's blank position.
    pub fn check_shape(&self) -> std::result::Result<(), String> {
        let shape = (self.rows, self.cols);
        if shape != (ROWS, COLS) && shape != (COLS, ROWS) {
            return Err(format!("grid is {}x{}, expected 2x4 or 4x2", self.rows, self.cols));
        }
        let blanks: Vec<_> = self.iter().filter(|(_, c)| c.is_blank()).map(|(p, _)| p).collect();
        match blanks.as_slice() {
            [pos] if *pos == self.blank_position() => Ok(()),
            [pos] => Err(format!("blank at {pos:?}, expected {:?}", self.blank_position())),
            other => Err(format!("expected exactly one blank, found {}", other.len())),
        }
    }
}

/// Lay out two paradigms as a Base 2×4 grid; the intransitive anchor of the
/// second paradigm is the blank.
pub fn build_context(spec_a: &ParadigmSpec, spec_b: &ParadigmSpec) -> Result<ContextMatrix> {
    spec_a.validate()?;
    spec_b.validate()?;
    if spec_a.phenomenon() != spec_b.phenomenon() {
        return Err(super::LexiconError::DegenerateParadigm(format!(
            "paradigms mix {} and {}",
            spec_a.phenomenon(),
            spec_b.phenomenon()
        )));
    }
    let mut cells = Vec::with_capacity(ROWS * COLS);
    for (row, spec) in [spec_a, spec_b].into_iter().enumerate() {
        let texts = [
            spec.transitive_sentence()?,
            spec.cue_action.clone(),
            spec.cue_state.clone(),
            spec.intransitive_sentence()?,
        ];
        for (col, (role, text)) in CellRole::ROW_ORDER.into_iter().zip(texts).enumerate() {
            let content =
                if row == ROWS - 1 && col == COLS - 1 { CellContent::Blank } else { CellContent::Sentence(text) };
            cells.push(Cell { role, content });
        }
    }
    Ok(ContextMatrix { rows: ROWS, cols: COLS, cells })
}

#[derive(Serialize, Deserialize)]
struct CellRecord {
    row: usize,
    col: usize,
    role: CellRole,
    text: Option<String>,
}

impl Serialize for ContextMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let records: Vec<CellRecord> = self
            .iter()
            .map(|((row, col), cell)| CellRecord { row, col, role: cell.role, text: cell.text().map(str::to_string) })
            .collect();
        records.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ContextMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let records = Vec::<CellRecord>::deserialize(deserializer)?;
        let rows = records.iter().map(|r| r.row).max().unwrap_or(0);
        let cols = records.iter().map(|r| r.col).max().unwrap_or(0);
        if rows * cols != records.len() || rows * cols != ROWS * COLS {
            return Err(D::Error::custom(format!("context has {} cells in a {rows}x{cols} grid", records.len())));
        }
        let blank = if (rows, cols) == (COLS, ROWS) { (COLS, ROWS) } else { (ROWS, COLS) };
        let mut cells: Vec<Option<Cell>> = vec![None; rows * cols];
        for rec in records {
            if rec.row == 0 || rec.col == 0 {
                return Err(D::Error::custom("context coordinates are 1-based"));
            }
            let content = match rec.text {
                Some(t) => CellContent::Sentence(t),
                None if (rec.row, rec.col) == blank => CellContent::Blank,
                None => CellContent::Masked,
            };
            let slot = &mut cells[(rec.row - 1) * cols + (rec.col - 1)];
            if slot.is_some() {
                return Err(D::Error::custom(format!("duplicate cell ({}, {})", rec.row, rec.col)));
            }
            *slot = Some(Cell { role: rec.role, content });
        }
        let cells = cells.into_iter().map(|c| c.expect("all cells filled")).collect();
        let matrix = ContextMatrix { rows, cols, cells };
        matrix.check_shape().map_err(D::Error::custom)?;
        Ok(matrix)
    }
}
