//! Weight quantization and per-layer range calibration.
use serde::{Deserialize, Serialize};

use super::mlp::FloatMlp;
use super::tile::tile_layer;
use crate::array::{ArrayConfig, WeightCode, WeightMatrix};
use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

/// Host-side operation applied to a layer's accumulated outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Argmax,
}

/// One layer mapped to weight codes. `weights` is `inputs x outputs`, matching the array orientation
/// (inputs drive rows, neurons occupy columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: WeightMatrix,
    /// Real weight represented by one weight LSB.
    pub weight_scale: f64,
    pub bias: Vec<f64>,
    /// Activation magnitude mapped to the full-scale input code.
    pub input_scale: f64,
    /// Half-width of the ADC window around `V_BIAS` used for this layer, in volts.
    pub adc_half_window: f64,
    pub activation: Activation,
}

impl QuantLayer {
    pub fn weight(&self, out: usize, inp: usize) -> WeightCode {
        self.weights.get(inp, out)
    }

    pub fn validate(&self, weight_bits: u32) -> Result<()> {
        if self.weights.rows() != self.inputs || self.weights.cols() != self.outputs || self.bias.len() != self.outputs {
            return Err(Error::Config(format!("layer {}x{} has inconsistent parameter shapes", self.inputs, self.outputs)));
        }
        let max = (1u32 << weight_bits) - 1;
        if self.weights.cells().iter().any(|c| c.magnitude() > max) {
            return Err(Error::Code(format!("weight code exceeds {weight_bits}-bit range")));
        }
        for (name, v) in [("weight_scale", self.weight_scale), ("input_scale", self.input_scale), ("adc_half_window", self.adc_half_window)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Data("non-finite bias".into()));
        }
        Ok(())
    }
}

/// Quantized MLP: ReLU hidden layers and an argmax output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizedMlp {
    pub input_bits: u32,
    pub weight_bits: u32,
    pub layers: Vec<QuantLayer>,
}

impl QuantizedMlp {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model has no layers".into()));
        }
        for pair in self.layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Config("consecutive layer dimensions disagree".into()));
            }
        }
        self.layers.iter().try_for_each(|l| l.validate(self.weight_bits))
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    /// Signed input code magnitude for an activation at this layer's scale.
    pub fn input_code(&self, layer: usize, a: f64) -> i32 {
        let max = ((1u32 << self.input_bits) - 1) as f64;
        let m = (a.abs() / self.layers[layer].input_scale).min(1.0) * max;
        let m = m.round() as i32;
        if a < 0.0 {
            -m
        } else {
            m
        }
    }
}

/// Symmetric per-layer quantization: `scale = max|w| / (2^B_W - 1)`, `code = round(w / scale)`.
///
/// Input scales default to 1 and ADC windows to the configured references until
/// [`calibrate_ranges`] is run.
pub fn quantize_mlp<T: Real>(model: &FloatMlp, cfg: &ArrayConfig<T>) -> Result<QuantizedMlp> {
    model.validate()?;
    cfg.validate()?;
    let max_code = cfg.weight_max_code() as f64;
    let full_window = to_f64(cfg.v_bias - cfg.v_adc_low).min(to_f64(cfg.v_adc_high - cfg.v_bias));
    let n = model.layers.len();
    let layers = model
        .layers
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let max_abs = layer.weights.iter().fold(0.0f64, |m, w| m.max(w.abs() as f64));
            if max_abs == 0.0 {
                return Err(Error::Degenerate(format!("layer {l} has only zero weights")));
            }
            let scale = max_abs / max_code;
            let mut weights = WeightMatrix::idle(layer.inputs, layer.outputs);
            for o in 0..layer.outputs {
                for i in 0..layer.inputs {
                    let code = (layer.weight(o, i) as f64 / scale).round().clamp(-max_code, max_code) as i32;
                    weights.set(i, o, WeightCode::from_signed(code, cfg.weight_bits)?);
                }
            }
            Ok(QuantLayer {
                inputs: layer.inputs,
                outputs: layer.outputs,
                weights,
                weight_scale: scale,
                bias: layer.bias.iter().map(|&b| b as f64).collect(),
                input_scale: 1.0,
                adc_half_window: full_window,
                activation: if l + 1 == n { Activation::Argmax } else { Activation::Relu },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedMlp { input_bits: cfg.dac_bits, weight_bits: cfg.weight_bits, layers })
}

/// Range calibration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeCalibration {
    /// Number of training samples inspected.
    pub samples: usize,
    /// Quantile of nominal tile output deviations that sets each ADC window.
    pub window_quantile: f64,
    /// Smallest allowed window half-width, in volts.
    pub min_half_window: f64,
}

impl Default for RangeCalibration {
    fn default() -> Self {
        Self { samples: 512, window_quantile: 0.999, min_half_window: 1e-3 }
    }
}

/// Fixes each layer's activation scale (max-abs over `inputs`; the first layer keeps the
/// pixel full scale of 1) and its ADC window from nominal tile outputs of the same samples.
pub fn calibrate_ranges<T: Real>(
    q: &mut QuantizedMlp,
    model: &FloatMlp,
    inputs: &[Vec<f32>],
    cfg: &ArrayConfig<T>,
    rc: &RangeCalibration,
) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Data("range calibration needs at least one sample".into()));
    }
    if !(rc.window_quantile > 0.0 && rc.window_quantile <= 1.0) || !(rc.min_half_window > 0.0) {
        return Err(Error::Config("window quantile must be in (0, 1] and the minimum window positive".into()));
    }
    if q.layers.len() != model.layers.len() {
        return Err(Error::Config("float and quantized models differ in depth".into()));
    }
    let traces: Vec<Vec<Vec<f32>>> = inputs.iter().map(|x| model.trace(x)).collect();
    for l in 1..q.layers.len() {
        let m = traces.iter().flat_map(|t| t[l].iter()).fold(0.0f64, |m, v| m.max(v.abs() as f64));
        q.layers[l].input_scale = if m > 0.0 { m } else { 1.0 };
    }
    q.layers[0].input_scale = 1.0;

    let volts_per_unit = to_f64(cfg.r_sa_nominal() * cfg.unit_product_current()).abs();
    let full_window = to_f64(cfg.v_bias - cfg.v_adc_low).min(to_f64(cfg.v_adc_high - cfg.v_bias));
    for l in 0..q.layers.len() {
        let layer = &q.layers[l];
        let schedule = tile_layer(layer, cfg);
        let mut deviations = Vec::new();
        for t in &traces {
            let codes: Vec<i64> = t[l].iter().map(|&a| q.input_code(l, a as f64) as i64).collect();
            for tile in &schedule.tiles {
                let slice = &codes[tile.row_start..tile.row_start + tile.row_len];
                if slice.iter().all(|&c| c == 0) {
                    continue;
                }
                for c in 0..tile.col_len {
                    let s: i64 = slice.iter().enumerate().map(|(r, &d)| d * tile.weights.get(r, c).signed() as i64).sum();
                    deviations.push(s.unsigned_abs() as f64 * volts_per_unit);
                }
            }
        }
        let half = quantile(&mut deviations, rc.window_quantile).unwrap_or(0.0);
        q.layers[l].adc_half_window = half.max(rc.min_half_window).min(full_window);
    }
    q.validate()
}

/// Empirical quantile (nearest rank).
pub fn quantile(values: &mut [f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((p * values.len() as f64).ceil() as usize).clamp(1, values.len());
    Some(values[rank - 1])
}
