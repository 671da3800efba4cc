//! First-order, state-independent model of driver and wire resistances.
//!
//! Every cell's ladder presents the unit resistance `R_U` to its row whatever the
//! stored weight (unused branches are dumped to the bias node), so row loading is
//! known in advance. Row `j` positions see the driver resistance plus the wire
//! segments shared with all cells further down the row. The summation line drop is
//! estimated from a half-scale coherent column current.
use serde::{Deserialize, Serialize};

use crate::array::{ArrayConfig, InputCode, WeightLine, WeightMatrix};
use crate::scalar::{lit, pow2, Real};

/// Per-cell multiplicative factors applied to `V_DAC - V_BIAS`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttenuationMap<T> {
    pub rows: usize,
    pub cols: usize,
    /// Input divider factor per column position (identical for all rows).
    pub input: Vec<T>,
    /// Summation-node regulation factor per row position (identical for all columns).
    pub regulation: Vec<T>,
}

impl<T: Real> AttenuationMap<T> {
    pub fn input_factor(&self, _row: usize, col: usize) -> T {
        self.input[col]
    }

    pub fn regulation_factor(&self, row: usize, _col: usize) -> T {
        self.regulation[row]
    }

    pub fn factor(&self, row: usize, col: usize) -> T {
        self.input[col] * self.regulation[row]
    }
}

/// Builds the factors for driver resistance `r_driver` and per-pitch wire resistances.
pub fn attenuation_map<T: Real>(cfg: &ArrayConfig<T>, r_driver: T, r_x: T, r_y: T) -> AttenuationMap<T> {
    let (n, m) = (cfg.rows, cfg.cols);
    let r_u = cfg.r_unit;
    let input = (0..m)
        .map(|j| {
            // Segment k (k = 1..=j) carries the load current of the m - k cells beyond it.
            let shared = (j * m) as f64 - (j * (j + 1)) as f64 / 2.0;
            let series = r_driver * lit::<T>(m as f64) + r_x * lit::<T>(shared);
            r_u / (r_u + series)
        })
        .collect();
    let half = lit::<T>(0.5);
    let regulation = (0..n)
        .map(|i| {
            let shared = (i * n) as f64 - (i * (i + 1)) as f64 / 2.0;
            let series = r_y * lit::<T>(shared) * half;
            r_u / (r_u + series)
        })
        .collect();
    AttenuationMap { rows: n, cols: m, input, regulation }
}

/// Output current of every cell (row-major) under the first-order model, ideal otherwise.
pub fn first_order_cell_currents<T: Real>(
    cfg: &ArrayConfig<T>,
    inputs: &[InputCode],
    w: &WeightMatrix,
    map: &AttenuationMap<T>,
) -> Vec<T> {
    let mut out = Vec::with_capacity(cfg.rows * cfg.cols);
    for (r, &x) in inputs.iter().enumerate() {
        let dv = crate::array::input_dac_transfer(x, cfg, None) - cfg.v_bias;
        for c in 0..cfg.cols {
            let cell = w.get(r, c);
            let i = match cell.line() {
                WeightLine::Idle => T::zero(),
                _ => map.factor(r, c) * dv / cfg.r_unit * lit::<T>(cell.magnitude() as f64) / pow2::<T>(cfg.weight_bits),
            };
            out.push(i);
        }
    }
    out
}
