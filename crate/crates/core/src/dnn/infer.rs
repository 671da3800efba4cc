//! Tiled inference on the array model with host-side accumulation.
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::argmax;
use super::mnist::Dataset;
use super::quant::{Activation, QuantizedMlp};
use super::tile::{tile_layer, TileSchedule};
use crate::array::{AdcRefs, ArrayModel, InputCode, NoiseState};
use crate::bisc::CalibrationState;
use crate::error::{shape_err, Error, Result};
use crate::nonideality::{keyed_rng, RngDomain};
use crate::scalar::{lit, to_f64, Real};

/// Fractional bits of the host accumulator. Partial sums are in units of one input LSB times
/// one weight LSB; a layer's largest possible sum is `inputs * 63 * 63` (about 3.1e6 for 784
/// inputs), which needs 22 integer bits, so an `i64` with 16 fractional bits has more than
/// 20 bits of headroom even for ADC outputs at the rails.
pub const ACC_FRAC_BITS: u32 = 16;

/// Order in which the tiles of a layer are executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TileOrder {
    #[default]
    Natural,
    Reversed,
    Shuffled(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferOptions {
    /// Run every tile at `+x` and `-x` and keep half the difference, cancelling column offsets
    /// common to both polarities.
    pub chop: bool,
    /// De-map the unrounded ADC transfer value instead of the output code.
    pub high_precision: bool,
    pub order: TileOrder,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self { chop: true, high_precision: false, order: TileOrder::Natural }
    }
}

/// Host arithmetic of the quantized model with exact integer dot products (no array).
pub fn reference_logits(mlp: &QuantizedMlp, x: &[f32]) -> Result<Vec<f64>> {
    if x.len() != mlp.input_len() {
        return Err(shape_err("inputs", mlp.input_len(), x.len()));
    }
    let mut act: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    for (l, layer) in mlp.layers.iter().enumerate() {
        let codes: Vec<i64> = act.iter().map(|&a| mlp.input_code(l, a) as i64).collect();
        let max_in = ((1u32 << mlp.input_bits) - 1) as f64;
        act = (0..layer.outputs)
            .map(|o| {
                let s: i64 = codes.iter().enumerate().map(|(i, &d)| d * layer.weight(o, i).signed() as i64).sum();
                let z = s as f64 * layer.input_scale / max_in * layer.weight_scale + layer.bias[o];
                apply(layer.activation, z)
            })
            .collect();
    }
    Ok(act)
}

fn apply(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => z.max(0.0),
        Activation::Argmax => z,
    }
}

/// Accuracy of one evaluation pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub predictions: Vec<u8>,
}

/// A quantized MLP bound to an array model and calibration state.
pub struct InferenceEngine<'a, T> {
    model: &'a ArrayModel<T>,
    mlp: &'a QuantizedMlp,
    schedules: Vec<TileSchedule>,
    states: Vec<CalibrationState<T>>,
    opts: InferOptions,
}

impl<'a, T: Real> InferenceEngine<'a, T> {
    pub fn new(
        model: &'a ArrayModel<T>,
        mlp: &'a QuantizedMlp,
        cal: &CalibrationState<T>,
        opts: InferOptions,
    ) -> Result<Self> {
        mlp.validate()?;
        let cfg = model.cfg();
        if mlp.input_bits != cfg.dac_bits || mlp.weight_bits != cfg.weight_bits {
            return Err(Error::Config(format!(
                "model uses {}-bit inputs and {}-bit weights, array has {} and {}",
                mlp.input_bits, mlp.weight_bits, cfg.dac_bits, cfg.weight_bits
            )));
        }
        if cal.columns.len() != cfg.cols {
            return Err(shape_err("calibration columns", cfg.cols, cal.columns.len()));
        }
        let schedules = mlp.layers.iter().map(|l| tile_layer(l, cfg)).collect();
        let states = mlp
            .layers
            .iter()
            .map(|l| Ok(cal.with_refs(AdcRefs::centered(cfg.v_bias, lit(l.adc_half_window))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model, mlp, schedules, states, opts })
    }

    pub fn schedules(&self) -> &[TileSchedule] {
        &self.schedules
    }

    /// Output-layer values for one sample (pixels scaled to [0, 1]).
    pub fn logits(&self, x: &[f32], noise: &mut NoiseState<T>) -> Result<Vec<f64>> {
        if x.len() != self.mlp.input_len() {
            return Err(shape_err("inputs", self.mlp.input_len(), x.len()));
        }
        let cfg = self.model.cfg();
        let unit = self.model.cfg().unit_product_current();
        let acc_scale = (1u64 << ACC_FRAC_BITS) as f64;
        let max_in = ((1u32 << self.mlp.input_bits) - 1) as f64;
        let mut act: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let mut plus = vec![InputCode::ZERO; cfg.rows];
        let mut minus = vec![InputCode::ZERO; cfg.rows];
        for (l, layer) in self.mlp.layers.iter().enumerate() {
            let codes = act
                .iter()
                .map(|&a| InputCode::from_signed(self.mlp.input_code(l, a), self.mlp.input_bits))
                .collect::<Result<Vec<_>>>()?;
            let schedule = &self.schedules[l];
            let state = &self.states[l];
            let refs = &state.adc_refs;
            let mut acc = vec![0i64; layer.outputs];
            for t in self.tile_order(schedule.tiles.len(), l) {
                let tile = &schedule.tiles[t];
                let slice = &codes[tile.row_start..tile.row_start + tile.row_len];
                if slice.iter().all(|c| c.magnitude() == 0) {
                    continue;
                }
                plus.fill(InputCode::ZERO);
                plus[..tile.row_len].copy_from_slice(slice);
                let read = |s: &crate::array::ColumnSample<T>| {
                    let code = if self.opts.high_precision { s.code_value } else { lit(s.adc_code as f64) };
                    crate::array::nominal_current_from_code(code, cfg, refs)
                };
                let hi = self.model.forward(noise, &plus, &tile.weights, state)?;
                let lo = if self.opts.chop {
                    for (m, p) in minus.iter_mut().zip(&plus) {
                        *m = p.negated();
                    }
                    Some(self.model.forward(noise, &minus, &tile.weights, state)?)
                } else {
                    None
                };
                for c in 0..tile.col_len {
                    let current = match &lo {
                        Some(lo) => (read(&hi[c]) - read(&lo[c])) / lit(2.0),
                        None => read(&hi[c]),
                    };
                    let units = to_f64(current / unit);
                    acc[tile.col_start + c] += (units * acc_scale).round() as i64;
                }
            }
            act = acc
                .iter()
                .zip(&layer.bias)
                .map(|(&s, &b)| apply(layer.activation, s as f64 / acc_scale * layer.input_scale / max_in * layer.weight_scale + b))
                .collect();
        }
        Ok(act)
    }

    pub fn infer(&self, x: &[f32], noise: &mut NoiseState<T>) -> Result<usize> {
        Ok(argmax(&self.logits(x, noise)?))
    }

    /// Classifies every sample; sample `i` uses noise stream `stream_base + i`.
    pub fn evaluate(&self, data: &Dataset, stream_base: u64) -> Result<Evaluation> {
        if data.is_empty() {
            return Err(Error::Data("evaluation set is empty".into()));
        }
        let predictions = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let mut noise = self.model.noise_stream(stream_base + i as u64);
                self.infer(&data.input(i), &mut noise).map(|p| p as u8)
            })
            .collect::<Result<Vec<u8>>>()?;
        let correct = predictions.iter().enumerate().filter(|&(i, &p)| p == data.label(i)).count();
        Ok(Evaluation { correct, total: data.len(), accuracy: correct as f64 / data.len() as f64, predictions })
    }

    fn tile_order(&self, n: usize, layer: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        match self.opts.order {
            TileOrder::Natural => {}
            TileOrder::Reversed => order.reverse(),
            TileOrder::Shuffled(seed) => order.shuffle(&mut keyed_rng(seed, RngDomain::Dataset, 1, layer as u64)),
        }
        order
    }
}

/// Classifies one sample.
pub fn infer<T: Real>(
    x: &[f32],
    mlp: &QuantizedMlp,
    model: &ArrayModel<T>,
    cal: &CalibrationState<T>,
    opts: InferOptions,
    noise: &mut NoiseState<T>,
) -> Result<usize> {
    InferenceEngine::new(model, mlp, cal, opts)?.infer(x, noise)
}

/// Accuracy over a dataset.
pub fn evaluate<T: Real>(
    data: &Dataset,
    mlp: &QuantizedMlp,
    model: &ArrayModel<T>,
    cal: &CalibrationState<T>,
    opts: InferOptions,
    stream_base: u64,
) -> Result<Evaluation> {
    InferenceEngine::new(model, mlp, cal, opts)?.evaluate(data, stream_base)
}
