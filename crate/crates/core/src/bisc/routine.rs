use serde::{Deserialize, Serialize};

use super::fit::{
    adc_guard, compute_corrections, extract_analog_errors, least_squares_fit, reference_offset, residual_rms,
    zero_signal_code,
};
use super::state::{quantize_trims, CalibrationState, LineTrim, TrimModel};
use crate::array::{
    mac_ideal, AdcRefs, ArrayConfig, ArrayModel, InputCode, Line, NoiseState, WeightCode, WeightLine, WeightMatrix,
};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// How characterization readings are taken from the ADC.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Integer output codes, as the hardware delivers them.
    #[default]
    Quantized,
    /// Real-valued code before rounding (test-bench mode).
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiscParams {
    /// Number of test points per line.
    pub z: usize,
    /// Readings averaged per test point.
    pub repeats: usize,
    /// Fractional widening of the ADC references during characterization.
    pub guard_margin: f64,
    pub trims: TrimModel,
    /// Put the default ADC references back after calibration.
    pub restore_refs: bool,
    /// Realize targets exactly instead of rounding to the trim grids.
    pub continuous_trims: bool,
    pub readout: Readout,
}

impl Default for BiscParams {
    fn default() -> Self {
        Self {
            z: 8,
            repeats: 16,
            guard_margin: 0.05,
            trims: TrimModel::default(),
            restore_refs: true,
            continuous_trims: false,
            readout: Readout::Quantized,
        }
    }
}

impl BiscParams {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(0.0..=0.2).contains(&self.guard_margin) {
            return Err(Error::Config(format!("guard margin must lie in [0, 0.2], got {}", self.guard_margin)));
        }
        self.trims.validate()
    }
}

/// ADC gain and offset known to the host.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcParams<T> {
    pub alpha_d: T,
    pub beta_d: T,
}

impl<T: Real> AdcParams<T> {
    pub fn ideal() -> Self {
        Self { alpha_d: T::one(), beta_d: T::zero() }
    }

    pub fn of(model: &ArrayModel<T>) -> Self {
        Self { alpha_d: model.profile().alpha_adc, beta_d: model.profile().beta_adc }
    }
}

/// Stepped characterization stimulus for one line.
#[derive(Clone, Debug, PartialEq)]
pub struct TestVectors<T> {
    pub line: Line,
    /// Input code applied to every row at each point.
    pub codes: Vec<InputCode>,
    /// Full-scale weights on the selected line in every cell.
    pub weights: WeightMatrix,
    /// Nominal output code at each point.
    pub q_nom: Vec<T>,
}

impl<T> TestVectors<T> {
    pub fn inputs(&self, point: usize, rows: usize) -> Vec<InputCode> {
        vec![self.codes[point]; rows]
    }
}

/// `z` signed input codes equally spaced over the full input range.
pub fn test_codes(z: usize, dac_bits: u32) -> Result<Vec<InputCode>> {
    let max = (1i64 << dac_bits) - 1;
    if z < 2 || z as i64 > 1i64 << dac_bits {
        return Err(Error::Config(format!("test point count must lie in 2..={}, got {z}", 1i64 << dac_bits)));
    }
    (0..z)
        .map(|k| {
            let v = -max as f64 + 2.0 * max as f64 * k as f64 / (z - 1) as f64;
            InputCode::from_signed(v.round() as i32, dac_bits)
        })
        .collect()
}

pub fn build_test_vectors<T: Real>(z: usize, line: Line, cfg: &ArrayConfig<T>, refs: &AdcRefs<T>) -> Result<TestVectors<T>> {
    let codes = test_codes(z, cfg.dac_bits)?;
    let wl = match line {
        Line::Positive => WeightLine::Positive,
        Line::Negative => WeightLine::Negative,
    };
    let w = WeightCode::new(cfg.weight_max_code(), wl, cfg.weight_bits)?;
    let column = vec![w; cfg.rows];
    let q_nom = codes
        .iter()
        .map(|&c| mac_ideal(&vec![c; cfg.rows], &column, cfg, refs))
        .collect::<Result<Vec<T>>>()?;
    Ok(TestVectors { line, codes, weights: WeightMatrix::filled(cfg.rows, cfg.cols, w), q_nom })
}

/// Averaged readings of one column over a test-vector set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineMeasurement<T> {
    pub column: usize,
    pub q_nom: Vec<T>,
    /// Mean reading per point; `None` when any reading at that point clipped.
    pub q_act: Vec<Option<T>>,
    pub clipped_points: usize,
}

impl<T: Real> LineMeasurement<T> {
    /// Points that did not clip, as `(q_nom, q_act)` vectors.
    pub fn valid(&self) -> (Vec<T>, Vec<T>) {
        self.q_nom
            .iter()
            .zip(&self.q_act)
            .filter_map(|(&n, a)| a.map(|a| (n, a)))
            .unzip()
    }
}

/// Applies every test vector `repeats` times and averages per column.
pub fn characterize<T: Real>(
    model: &ArrayModel<T>,
    noise: &mut NoiseState<T>,
    state: &CalibrationState<T>,
    tv: &TestVectors<T>,
    repeats: usize,
    readout: Readout,
) -> Result<Vec<LineMeasurement<T>>> {
    let cfg = model.cfg();
    let mut out: Vec<LineMeasurement<T>> = (0..cfg.cols)
        .map(|column| LineMeasurement { column, q_nom: tv.q_nom.clone(), q_act: Vec::new(), clipped_points: 0 })
        .collect();
    for point in 0..tv.codes.len() {
        let inputs = tv.inputs(point, cfg.rows);
        let mut sums = vec![T::zero(); cfg.cols];
        let mut clipped = vec![false; cfg.cols];
        for _ in 0..repeats {
            for s in model.forward(noise, &inputs, &tv.weights, state)? {
                sums[s.column] += match readout {
                    Readout::Quantized => lit::<T>(s.adc_code as f64),
                    Readout::Continuous => s.code_value,
                };
                clipped[s.column] |= s.clipped;
            }
        }
        for (c, m) in out.iter_mut().enumerate() {
            if clipped[c] {
                m.clipped_points += 1;
                m.q_act.push(None);
            } else {
                m.q_act.push(Some(sums[c] / lit::<T>(repeats as f64)));
            }
        }
    }
    Ok(out)
}

/// Outcome of characterizing and trimming one line of one column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationResult<T> {
    pub column: usize,
    pub line: Line,
    pub g_tot: T,
    pub eps_tot: T,
    pub alpha_a: T,
    pub beta_a: T,
    pub residual_rms: T,
    pub z: usize,
    pub repeats: usize,
    pub clipped_points: usize,
    pub failed: bool,
    pub trim: LineTrim<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiscOutcome<T> {
    pub state: CalibrationState<T>,
    pub results: Vec<CharacterizationResult<T>>,
    pub warnings: Vec<String>,
}

/// True when every reading equals what an error-free line would report, so the line is
/// left at its current setting instead of being moved onto the trim grid.
fn reads_as_ideal<T: Real>(q_nom: &[T], q_act: &[T], readout: Readout) -> bool {
    let tol = lit::<T>(1e-9);
    q_nom.iter().zip(q_act).all(|(&n, &a)| {
        let expected = match readout {
            Readout::Quantized => n.round(),
            Readout::Continuous => n,
        };
        (a - expected).abs() <= tol
    })
}

/// Full self-calibration: both lines of every column, positive line first.
pub fn run_bisc<T: Real>(
    model: &ArrayModel<T>,
    noise: &mut NoiseState<T>,
    params: &BiscParams,
    adc: AdcParams<T>,
) -> Result<BiscOutcome<T>> {
    params.validate()?;
    let cfg = model.cfg();
    let default_refs = cfg.adc_refs();
    let refs = adc_guard(&default_refs, lit::<T>(params.guard_margin))?;
    let c_adc = cfg.adc_gain(&refs);
    let q0 = zero_signal_code(cfg.v_bias, &refs, cfg.adc_bits);
    let mut state = CalibrationState::nominal(cfg).with_refs(refs);
    let mut results = Vec::with_capacity(2 * cfg.cols);
    let mut warnings = Vec::new();

    for line in Line::BOTH {
        let tv = build_test_vectors(params.z, line, cfg, &refs)?;
        let measured = characterize(model, noise, &state, &tv, params.repeats, params.readout)?;
        for m in measured {
            let col = m.column;
            let (q_nom, q_act) = m.valid();
            let too_many_clipped = 2 * m.clipped_points > params.z;
            let fit = if too_many_clipped { None } else { least_squares_fit(&q_nom, &q_act).ok() };
            let current = state.columns[col].line(line).clone();
            let (fit, errs) = match fit {
                Some(f) => {
                    let eps = reference_offset(f.offset, f.gain, adc.alpha_d, q0);
                    (Some(f), Some(extract_analog_errors(f.gain, eps, adc.alpha_d, adc.beta_d, c_adc)?))
                }
                None => (None, None),
            };
            let targets = errs.and_then(|(a, b)| compute_corrections(a, b, &current).ok());
            let untouched = fit.is_some() && m.clipped_points == 0 && reads_as_ideal(&q_nom, &q_act, params.readout);
            let (trim, failed) = match targets {
                Some(_) if untouched => (LineTrim { calibrated: true, ..current.clone() }, false),
                Some(t) => {
                    let trim = quantize_trims(t, cfg, &params.trims, params.continuous_trims);
                    if trim.clamped {
                        let msg = format!("column {col} {} line: trim target out of range, clamped", line.name());
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                    (trim, false)
                }
                None => {
                    let msg = format!(
                        "column {col} {} line: calibration failed ({} of {} points clipped)",
                        line.name(),
                        m.clipped_points,
                        params.z
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                    (LineTrim::nominal(cfg), true)
                }
            };
            *state.columns[col].line_mut(line) = trim.clone();
            let nan = T::nan();
            results.push(CharacterizationResult {
                column: col,
                line,
                g_tot: fit.map(|f| f.gain).unwrap_or(nan),
                eps_tot: fit.map(|f| f.offset).unwrap_or(nan),
                alpha_a: errs.map(|e| e.0).unwrap_or(nan),
                beta_a: errs.map(|e| e.1).unwrap_or(nan),
                residual_rms: fit.map(|f| residual_rms(&q_nom, &q_act, &f)).unwrap_or(nan),
                z: params.z,
                repeats: params.repeats,
                clipped_points: m.clipped_points,
                failed,
                trim,
            });
        }
    }
    if params.restore_refs {
        state.adc_refs = default_refs;
    }
    Ok(BiscOutcome { state, results, warnings })
}
