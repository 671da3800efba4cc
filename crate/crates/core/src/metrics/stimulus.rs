use rand::Rng;
use serde::{Deserialize, Serialize};

use super::snr::{compute_snr, extract_column_errors, SnrEntry};
use crate::array::{nominal_code, AdcRefs, ArrayModel, InputCode, WeightCode, WeightLine, WeightMatrix};
use crate::bisc::{CalibrationState, LsFit};
use crate::error::{Error, Result};
use crate::nonideality::{keyed_rng, RngDomain};
use crate::scalar::{lit, to_f64, Real};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusMode {
    /// Inputs and weights drawn uniformly over valid codes, a fresh draw per instance.
    #[default]
    Uniform,
    /// Stepped inputs on full-scale weights, alternating lines (the calibration pattern).
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrStimulus {
    pub mode: StimulusMode,
    pub instances: usize,
    /// Half-width of the ADC window around `V_BIAS` used for the measurement, volts.
    /// `None` keeps the configured references.
    pub window_half_width: Option<f64>,
    pub reference: SnrReference,
}

impl Default for SnrStimulus {
    fn default() -> Self {
        Self { mode: StimulusMode::Uniform, instances: 1024, window_half_width: Some(0.2 / 6.0), reference: SnrReference::Quantized }
    }
}

impl SnrStimulus {
    pub fn refs<T: Real>(&self, model: &ArrayModel<T>) -> Result<AdcRefs<T>> {
        match self.window_half_width {
            Some(h) => AdcRefs::centered(model.cfg().v_bias, lit(h)),
            None => Ok(model.cfg().adc_refs()),
        }
    }
}

/// Nominal and measured codes of one column over the stimulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnCodes<T> {
    pub column: usize,
    pub q_nom: Vec<T>,
    pub q_act: Vec<T>,
}

/// What the measured codes are compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrReference {
    /// Output codes of an error-free array through the same ADC, so an ideal array scores `+inf`.
    #[default]
    Quantized,
    /// Unrounded nominal codes; ADC quantization noise counts as error.
    Continuous,
}

/// Applies the stimulus and returns per-column code pairs. The stimulus depends only on
/// `seed`; `noise_stream` selects the noise realization.
pub fn measure_columns<T: Real>(
    model: &ArrayModel<T>,
    state: &CalibrationState<T>,
    stimulus: &SnrStimulus,
    seed: u64,
    noise_stream: u64,
) -> Result<Vec<ColumnCodes<T>>> {
    if stimulus.instances < 2 {
        return Err(Error::Config("SNR stimulus needs at least 2 instances".into()));
    }
    let cfg = model.cfg();
    let refs = stimulus.refs(model)?;
    let st = state.with_refs(refs);
    let mut noise = model.noise_stream(noise_stream);
    let mut rng = keyed_rng(seed, RngDomain::Stimulus, stimulus.mode as u64, 0);
    let dmax = cfg.dac_max_code();
    let wmax = cfg.weight_max_code();
    let mut out: Vec<ColumnCodes<T>> = (0..cfg.cols)
        .map(|column| ColumnCodes { column, q_nom: Vec::new(), q_act: Vec::new() })
        .collect();
    let unit = cfg.unit_product_current();
    for k in 0..stimulus.instances {
        let (inputs, w) = match stimulus.mode {
            StimulusMode::Uniform => {
                let inputs = (0..cfg.rows)
                    .map(|_| InputCode::new(rng.gen_range(0..=dmax), rng.gen_bool(0.5), cfg.dac_bits))
                    .collect::<Result<Vec<_>>>()?;
                let cells = (0..cfg.rows * cfg.cols)
                    .map(|_| {
                        let m = rng.gen_range(0..=wmax);
                        let line = match rng.gen_range(0..3u8) {
                            0 => WeightLine::Idle,
                            1 => WeightLine::Positive,
                            _ => WeightLine::Negative,
                        };
                        WeightCode::new(m, line, cfg.weight_bits)
                    })
                    .collect::<Result<Vec<_>>>()?;
                (inputs, WeightMatrix::from_cells(cfg.rows, cfg.cols, cells)?)
            }
            StimulusMode::Sweep => {
                let span = 2 * dmax as usize + 1;
                let s = (k / 2 % span) as i32 - dmax as i32;
                let line = if k % 2 == 0 { WeightLine::Positive } else { WeightLine::Negative };
                let code = InputCode::from_signed(s, cfg.dac_bits)?;
                let w = WeightCode::new(wmax, line, cfg.weight_bits)?;
                (vec![code; cfg.rows], WeightMatrix::filled(cfg.rows, cfg.cols, w))
            }
        };
        let samples = model.forward(&mut noise, &inputs, &w, &st)?;
        for (c, s) in samples.iter().enumerate() {
            let sum: i64 = (0..cfg.rows).map(|r| inputs[r].signed() as i64 * w.get(r, c).signed() as i64).sum();
            let mut q_nom = nominal_code(unit * lit::<T>(sum as f64), cfg, &refs);
            if stimulus.reference == SnrReference::Quantized {
                q_nom = lit(ideal_adc_code(to_f64(q_nom), cfg.adc_max_code()));
            }
            out[c].q_nom.push(q_nom);
            out[c].q_act.push(lit::<T>(s.adc_code as f64));
        }
    }
    Ok(out)
}

/// Ideal converter output for a real-valued code: ties away from zero, clamped to the range.
fn ideal_adc_code(value: f64, max: u32) -> f64 {
    value.round().clamp(0.0, max as f64)
}

/// SNR and affine error estimate of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSnr<T> {
    pub column: usize,
    pub snr: SnrEntry<T>,
    pub fit: LsFit<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrReport<T> {
    pub columns: Vec<ColumnSnr<T>>,
}

impl<T: Real> SnrReport<T> {
    pub fn from_codes(codes: &[ColumnCodes<T>]) -> Result<Self> {
        let columns = codes
            .iter()
            .map(|c| {
                Ok(ColumnSnr {
                    column: c.column,
                    snr: compute_snr(&c.q_nom, &c.q_act)?,
                    fit: extract_column_errors(&c.q_nom, &c.q_act)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { columns })
    }

    pub fn mean_db(&self) -> T {
        mean(self.columns.iter().map(|c| c.snr.snr_db))
    }

    pub fn mean_enob(&self) -> T {
        mean(self.columns.iter().map(|c| c.snr.enob))
    }
}

fn mean<T: Real>(it: impl Iterator<Item = T>) -> T {
    let v: Vec<T> = it.collect();
    v.iter().copied().sum::<T>() / lit::<T>(v.len().max(1) as f64)
}

/// Per-column before/after comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrComparison<T> {
    pub pre: SnrReport<T>,
    pub post: SnrReport<T>,
}

impl<T: Real> SnrComparison<T> {
    pub fn gains_db(&self) -> Vec<T> {
        self.pre.columns.iter().zip(&self.post.columns).map(|(a, b)| b.snr.snr_db - a.snr.snr_db).collect()
    }

    pub fn mean_gain_db(&self) -> T {
        mean(self.gains_db().into_iter())
    }

    pub fn mean_enob_gain(&self) -> T {
        self.post.mean_enob() - self.pre.mean_enob()
    }
}

/// Measures the same stimulus under two calibration states.
pub fn compare_states<T: Real>(
    model: &ArrayModel<T>,
    pre: &CalibrationState<T>,
    post: &CalibrationState<T>,
    stimulus: &SnrStimulus,
    seed: u64,
) -> Result<SnrComparison<T>> {
    let a = measure_columns(model, pre, stimulus, seed, 1)?;
    let b = measure_columns(model, post, stimulus, seed, 2)?;
    Ok(SnrComparison { pre: SnrReport::from_codes(&a)?, post: SnrReport::from_codes(&b)? })
}
