//! Per-stage transfer functions of the analog chain.
use serde::{Deserialize, Serialize};

use super::codes::{InputCode, WeightCode, WeightLine};
use super::config::{AdcRefs, ArrayConfig};
use crate::bisc::CalibrationState;
use crate::error::{shape_err, Result};
use crate::nonideality::{attenuation_map, DacInl, NonidealityProfile};
use crate::scalar::{lit, pow2, Real};

/// Result of one ADC conversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcReading<T> {
    pub code: u32,
    /// Real-valued code before rounding and saturation.
    pub value: T,
    pub clipped: bool,
}

/// Input DAC output voltage for a signed code, optionally with the row's INL error.
pub fn input_dac_transfer<T: Real>(code: InputCode, cfg: &ArrayConfig<T>, inl: Option<&DacInl<T>>) -> T {
    let x = lit::<T>(code.signed() as f64) / pow2::<T>(cfg.dac_bits);
    let mut v = cfg.v_bias + cfg.polarity_sign() * x * cfg.dac_swing();
    if let Some(inl) = inl {
        v += inl.error_at(x);
    }
    v.max(cfg.v_in_low).min(cfg.v_in_high)
}

/// Current of a single weight cell as `(i_pos, i_neg)`.
pub fn mwc_current<T: Real>(v_dac: T, w: WeightCode, cfg: &ArrayConfig<T>, mismatch: T) -> (T, T) {
    let i = (v_dac - cfg.v_bias) / cfg.r_unit * lit::<T>(w.magnitude() as f64) / pow2::<T>(cfg.weight_bits)
        * (T::one() + mismatch);
    match w.line() {
        WeightLine::Idle => (T::zero(), T::zero()),
        WeightLine::Positive => (i, T::zero()),
        WeightLine::Negative => (T::zero(), i),
    }
}

/// Summed line currents of column `col`, with the profile's DAC, mismatch and parasitic errors when given.
pub fn column_currents<T: Real>(
    inputs: &[InputCode],
    weights: &[WeightCode],
    col: usize,
    cfg: &ArrayConfig<T>,
    profile: Option<&NonidealityProfile<T>>,
) -> Result<(T, T)> {
    if inputs.len() != cfg.rows {
        return Err(shape_err("inputs", cfg.rows, inputs.len()));
    }
    if weights.len() != cfg.rows {
        return Err(shape_err("weights", cfg.rows, weights.len()));
    }
    let map = profile.map(|p| attenuation_map(cfg, p.driver_resistance, p.wire_rx, p.wire_ry));
    let (mut pos, mut neg) = (T::zero(), T::zero());
    for (row, (&x, &w)) in inputs.iter().zip(weights).enumerate() {
        let (v, mismatch) = match profile {
            Some(p) => {
                let v = input_dac_transfer(x, cfg, p.dac_inl.get(row));
                let f = map.as_ref().map(|m| m.factor(row, col)).unwrap_or(T::one());
                (cfg.v_bias + f * (v - cfg.v_bias), p.mismatch(row, col))
            }
            None => (input_dac_transfer(x, cfg, None), T::zero()),
        };
        let (p, n) = mwc_current(v, w, cfg, mismatch);
        pos += p;
        neg += n;
    }
    Ok((pos, neg))
}

/// Two-stage summing amplifier: returns `(V_SA, V_X)` where `V_X` is the first stage output.
///
/// `disturbance` is added to the output (noise and drift samples drawn by the caller).
pub fn sa_output<T: Real>(
    i_pos: T,
    i_neg: T,
    cal: &CalibrationState<T>,
    col: usize,
    profile: Option<&NonidealityProfile<T>>,
    cfg: &ArrayConfig<T>,
    disturbance: T,
) -> (T, T) {
    let trim = &cal.columns[col];
    let (ap, an, bp, bn) = match profile {
        Some(p) => (p.alpha[col].pos, p.alpha[col].neg, p.beta[col].pos, p.beta[col].neg),
        None => (T::one(), T::one(), T::zero(), T::zero()),
    };
    sa_stage(i_pos, i_neg, trim.pos.r_sa, trim.neg.r_sa, trim.pos.v_cal, trim.neg.v_cal, [ap, an, bp, bn], cfg.v_bias, disturbance)
}

#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn sa_stage<T: Real>(
    i_pos: T,
    i_neg: T,
    r_pos: T,
    r_neg: T,
    v_cal_pos: T,
    v_cal_neg: T,
    [ap, an, bp, bn]: [T; 4],
    v_bias: T,
    disturbance: T,
) -> (T, T) {
    let v_x = v_cal_pos + bp + ap * r_pos * i_pos;
    let v_sa = v_cal_neg + bn - an * r_neg * i_neg + (v_x - v_bias) + disturbance;
    (v_sa, v_x)
}

/// Flash ADC conversion with ties rounded away from zero.
pub fn adc_quantize<T: Real>(
    v: T,
    refs: &AdcRefs<T>,
    cfg: &ArrayConfig<T>,
    profile: Option<&NonidealityProfile<T>>,
) -> AdcReading<T> {
    let (a, b) = profile.map(|p| (p.alpha_adc, p.beta_adc)).unwrap_or((T::one(), T::zero()));
    quantize_with(v, refs, cfg.adc_bits, a, b)
}

#[inline]
pub(crate) fn quantize_with<T: Real>(v: T, refs: &AdcRefs<T>, bits: u32, alpha_d: T, beta_d: T) -> AdcReading<T> {
    let max = pow2::<T>(bits) - T::one();
    let value = alpha_d * refs.gain(bits) * (v - refs.low) + beta_d;
    let clipped = value < T::zero() || value > max;
    let code = value.round().max(T::zero()).min(max);
    AdcReading { code: code.to_u32().unwrap_or(0), value, clipped }
}

/// `sum(s*d * signed D)` over the column.
pub fn signed_product_sum(inputs: &[InputCode], weights: &[WeightCode]) -> i64 {
    inputs.iter().zip(weights).map(|(x, w)| x.signed() as i64 * w.signed() as i64).sum()
}

/// Error-free MAC current `I_pos - I_neg` of a column.
pub fn ideal_mac_current<T: Real>(inputs: &[InputCode], weights: &[WeightCode], cfg: &ArrayConfig<T>) -> Result<T> {
    if inputs.len() != cfg.rows {
        return Err(shape_err("inputs", cfg.rows, inputs.len()));
    }
    if weights.len() != cfg.rows {
        return Err(shape_err("weights", cfg.rows, weights.len()));
    }
    Ok(cfg.unit_product_current() * lit::<T>(signed_product_sum(inputs, weights) as f64))
}

/// Nominal real-valued output code of a column: `C * (R_U/N * I_MAC + V_BIAS - V_L)`.
pub fn mac_ideal<T: Real>(
    inputs: &[InputCode],
    weights: &[WeightCode],
    cfg: &ArrayConfig<T>,
    refs: &AdcRefs<T>,
) -> Result<T> {
    let i_mac = ideal_mac_current(inputs, weights, cfg)?;
    Ok(nominal_code(i_mac, cfg, refs))
}

/// Nominal code for a given MAC current.
pub fn nominal_code<T: Real>(i_mac: T, cfg: &ArrayConfig<T>, refs: &AdcRefs<T>) -> T {
    cfg.adc_gain(refs) * (cfg.r_sa_nominal() * i_mac + cfg.v_bias - refs.low)
}

/// Inverse of the nominal chain: MAC current implied by a (possibly fractional) code.
pub fn nominal_current_from_code<T: Real>(code: T, cfg: &ArrayConfig<T>, refs: &AdcRefs<T>) -> T {
    let v = refs.low + code / cfg.adc_gain(refs);
    (v - cfg.v_bias) / cfg.r_sa_nominal()
}
