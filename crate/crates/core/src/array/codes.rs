use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Signed input code: magnitude `d` on the DAC bits plus a sign bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i32", try_from = "i32")]
pub struct InputCode {
    magnitude: u32,
    negative: bool,
}

impl InputCode {
    pub const ZERO: InputCode = InputCode { magnitude: 0, negative: false };

    pub fn new(magnitude: u32, negative: bool, bits: u32) -> Result<Self> {
        if magnitude >= (1u32 << bits) {
            return Err(Error::Code(format!("input magnitude {magnitude} exceeds {bits}-bit range")));
        }
        Ok(Self { magnitude, negative: negative && magnitude != 0 })
    }

    pub fn from_signed(value: i32, bits: u32) -> Result<Self> {
        Self::new(value.unsigned_abs(), value < 0, bits)
    }

    pub fn magnitude(&self) -> u32 {
        self.magnitude
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    /// `s * d` as an integer.
    pub fn signed(&self) -> i32 {
        if self.negative {
            -(self.magnitude as i32)
        } else {
            self.magnitude as i32
        }
    }

    pub fn negated(&self) -> Self {
        Self { magnitude: self.magnitude, negative: !self.negative && self.magnitude != 0 }
    }
}

impl From<InputCode> for i32 {
    fn from(c: InputCode) -> i32 {
        c.signed()
    }
}

impl TryFrom<i32> for InputCode {
    type Error = Error;
    fn try_from(v: i32) -> Result<Self> {
        // Serialized codes are range-checked against the configured width when used.
        Self::from_signed(v, 16)
    }
}

/// Summation line a cell's current is steered to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightLine {
    #[default]
    Idle,
    Positive,
    Negative,
}

/// One of the two summation lines of a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Line {
    Positive,
    Negative,
}

impl Line {
    pub const BOTH: [Line; 2] = [Line::Positive, Line::Negative];

    pub fn name(&self) -> &'static str {
        match self {
            Line::Positive => "positive",
            Line::Negative => "negative",
        }
    }
}

/// Weight magnitude plus the two sign flags (W6 routes to the positive line, W7 to the negative).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightCode {
    magnitude: u32,
    line: WeightLine,
}

impl WeightCode {
    pub const IDLE: WeightCode = WeightCode { magnitude: 0, line: WeightLine::Idle };

    pub fn new(magnitude: u32, line: WeightLine, bits: u32) -> Result<Self> {
        if magnitude >= (1u32 << bits) {
            return Err(Error::Code(format!("weight magnitude {magnitude} exceeds {bits}-bit range")));
        }
        Ok(Self { magnitude, line })
    }

    pub fn from_flags(magnitude: u32, w6: bool, w7: bool, bits: u32) -> Result<Self> {
        let line = match (w6, w7) {
            (false, false) => WeightLine::Idle,
            (true, false) => WeightLine::Positive,
            (false, true) => WeightLine::Negative,
            (true, true) => return Err(Error::Code("W6 and W7 cannot both be set".into())),
        };
        Self::new(magnitude, line, bits)
    }

    /// Zero maps to an idle cell, the sign selects the line.
    pub fn from_signed(value: i32, bits: u32) -> Result<Self> {
        let line = match value.signum() {
            0 => WeightLine::Idle,
            1 => WeightLine::Positive,
            _ => WeightLine::Negative,
        };
        Self::new(value.unsigned_abs(), line, bits)
    }

    pub fn magnitude(&self) -> u32 {
        self.magnitude
    }

    pub fn line(&self) -> WeightLine {
        self.line
    }

    pub fn w6(&self) -> bool {
        self.line == WeightLine::Positive
    }

    pub fn w7(&self) -> bool {
        self.line == WeightLine::Negative
    }

    /// Effective signed weight; idle cells count as zero whatever their magnitude.
    pub fn signed(&self) -> i32 {
        match self.line {
            WeightLine::Idle => 0,
            WeightLine::Positive => self.magnitude as i32,
            WeightLine::Negative => -(self.magnitude as i32),
        }
    }
}

/// Row-major `rows x cols` matrix of weight codes. Serialized as signed codes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "SignedCodes", try_from = "SignedCodes")]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<WeightCode>,
}

impl WeightMatrix {
    pub fn idle(rows: usize, cols: usize) -> Self {
        Self { rows, cols, cells: vec![WeightCode::IDLE; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, code: WeightCode) -> Self {
        Self { rows, cols, cells: vec![code; rows * cols] }
    }

    pub fn from_cells(rows: usize, cols: usize, cells: Vec<WeightCode>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(shape_err("rows*cols", rows * cols, cells.len()));
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn from_signed(rows: usize, cols: usize, values: &[i32], bits: u32) -> Result<Self> {
        let cells = values.iter().map(|&v| WeightCode::from_signed(v, bits)).collect::<Result<Vec<_>>>()?;
        Self::from_cells(rows, cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> WeightCode {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, code: WeightCode) {
        self.cells[row * self.cols + col] = code;
    }

    pub fn column(&self, col: usize) -> Vec<WeightCode> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn cells(&self) -> &[WeightCode] {
        &self.cells
    }

    /// New matrix whose column `k` is column `order[k]` of `self`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.cols {
            return Err(shape_err("cols", self.cols, order.len()));
        }
        let mut out = Self::idle(self.rows, self.cols);
        for (k, &src) in order.iter().enumerate() {
            for r in 0..self.rows {
                out.set(r, k, self.get(r, src));
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct SignedCodes {
    rows: usize,
    cols: usize,
    codes: Vec<i32>,
}

impl From<WeightMatrix> for SignedCodes {
    fn from(m: WeightMatrix) -> Self {
        Self { rows: m.rows, cols: m.cols, codes: m.cells.iter().map(WeightCode::signed).collect() }
    }
}

impl TryFrom<SignedCodes> for WeightMatrix {
    type Error = Error;
    fn try_from(s: SignedCodes) -> Result<Self> {
        // Range-checked against the configured width when used.
        WeightMatrix::from_signed(s.rows, s.cols, &s.codes, 16)
    }
}
