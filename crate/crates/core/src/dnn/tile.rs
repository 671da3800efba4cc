//! Mapping of layers onto array-sized weight blocks.
use serde::{Deserialize, Serialize};

use super::quant::QuantLayer;
use crate::array::{ArrayConfig, WeightMatrix};

/// One array load: a slice of layer inputs on the rows and a slice of neurons on the columns.
/// Unused rows and columns of `weights` hold idle cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub row_tile: usize,
    pub col_tile: usize,
    pub row_start: usize,
    pub row_len: usize,
    pub col_start: usize,
    pub col_len: usize,
    pub weights: WeightMatrix,
}

/// Tiles of one layer in row-tile-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileSchedule {
    pub inputs: usize,
    pub outputs: usize,
    pub row_tiles: usize,
    pub col_tiles: usize,
    pub tiles: Vec<Tile>,
}

/// Splits a layer into `ceil(inputs / N) x ceil(outputs / M)` array-shaped blocks.
pub fn tile_layer<T>(layer: &QuantLayer, cfg: &ArrayConfig<T>) -> TileSchedule {
    let (n, m) = (cfg.rows, cfg.cols);
    let row_tiles = layer.inputs.div_ceil(n);
    let col_tiles = layer.outputs.div_ceil(m);
    let mut tiles = Vec::with_capacity(row_tiles * col_tiles);
    for rt in 0..row_tiles {
        let row_start = rt * n;
        let row_len = n.min(layer.inputs - row_start);
        for ct in 0..col_tiles {
            let col_start = ct * m;
            let col_len = m.min(layer.outputs - col_start);
            let mut weights = WeightMatrix::idle(n, m);
            for r in 0..row_len {
                for c in 0..col_len {
                    weights.set(r, c, layer.weights.get(row_start + r, col_start + c));
                }
            }
            tiles.push(Tile { row_tile: rt, col_tile: ct, row_start, row_len, col_start, col_len, weights });
        }
    }
    TileSchedule { inputs: layer.inputs, outputs: layer.outputs, row_tiles, col_tiles, tiles }
}
