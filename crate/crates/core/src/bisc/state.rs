use serde::{Deserialize, Serialize};

use crate::array::{AdcRefs, ArrayConfig, Line};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Resolution and range of the trim hardware.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrimModel {
    /// Number of potentiometer positions.
    pub pot_steps: u32,
    /// Potentiometer range as fractions of the nominal transresistance.
    pub pot_low: f64,
    pub pot_high: f64,
    pub cal_dac_bits: u32,
    /// Calibration DAC output range, volts.
    pub cal_dac_low: f64,
    pub cal_dac_high: f64,
}

impl Default for TrimModel {
    fn default() -> Self {
        Self { pot_steps: 128, pot_low: 0.5, pot_high: 1.5, cal_dac_bits: 6, cal_dac_low: 0.2, cal_dac_high: 0.6 }
    }
}

impl TrimModel {
    pub fn validate(&self) -> Result<()> {
        if self.pot_steps < 2 || !(self.pot_low > 0.0 && self.pot_low < self.pot_high) {
            return Err(Error::Config("potentiometer needs >= 2 steps and 0 < low < high".into()));
        }
        if !(1..=16).contains(&self.cal_dac_bits) || !(self.cal_dac_low < self.cal_dac_high) {
            return Err(Error::Config("calibration DAC needs 1..=16 bits and low < high".into()));
        }
        Ok(())
    }

    /// Potentiometer resolution in ohms for a nominal transresistance.
    pub fn pot_step<T: Real>(&self, r_nominal: T) -> T {
        r_nominal * lit::<T>((self.pot_high - self.pot_low) / (self.pot_steps - 1) as f64)
    }

    pub fn cal_dac_lsb<T: Real>(&self) -> T {
        lit::<T>((self.cal_dac_high - self.cal_dac_low) / ((1u64 << self.cal_dac_bits) - 1) as f64)
    }

    pub fn pot_value<T: Real>(&self, r_nominal: T, code: u32) -> T {
        r_nominal * lit::<T>(self.pot_low) + self.pot_step(r_nominal) * lit::<T>(code as f64)
    }

    pub fn cal_dac_value<T: Real>(&self, code: u32) -> T {
        lit::<T>(self.cal_dac_low) + self.cal_dac_lsb::<T>() * lit::<T>(code as f64)
    }
}

/// Trim setting of one summation line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineTrim<T> {
    /// Realized transresistance, ohms.
    pub r_sa: T,
    /// Realized calibration voltage, volts.
    pub v_cal: T,
    /// Potentiometer position; `None` while at the untrimmed default.
    pub pot_code: Option<u32>,
    pub cal_code: Option<u32>,
    /// Realized minus target.
    pub r_sa_residual: T,
    pub v_cal_residual: T,
    pub calibrated: bool,
    /// A target fell outside the trim range and was clamped.
    pub clamped: bool,
}

impl<T: Real> LineTrim<T> {
    pub fn nominal(cfg: &ArrayConfig<T>) -> Self {
        Self {
            r_sa: cfg.r_sa_nominal(),
            v_cal: cfg.v_bias,
            pot_code: None,
            cal_code: None,
            r_sa_residual: T::zero(),
            v_cal_residual: T::zero(),
            calibrated: false,
            clamped: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnTrim<T> {
    pub pos: LineTrim<T>,
    pub neg: LineTrim<T>,
}

impl<T> ColumnTrim<T> {
    pub fn line(&self, line: Line) -> &LineTrim<T> {
        match line {
            Line::Positive => &self.pos,
            Line::Negative => &self.neg,
        }
    }

    pub fn line_mut(&mut self, line: Line) -> &mut LineTrim<T> {
        match line {
            Line::Positive => &mut self.pos,
            Line::Negative => &mut self.neg,
        }
    }
}

/// Trim settings of every column plus the active ADC references.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState<T> {
    pub columns: Vec<ColumnTrim<T>>,
    pub adc_refs: AdcRefs<T>,
}

impl<T: Real> CalibrationState<T> {
    /// Untrimmed defaults: `R_U / N`, `V_BIAS`, default ADC references.
    pub fn nominal(cfg: &ArrayConfig<T>) -> Self {
        let line = LineTrim::nominal(cfg);
        Self {
            columns: vec![ColumnTrim { pos: line.clone(), neg: line }; cfg.cols],
            adc_refs: cfg.adc_refs(),
        }
    }

    /// Copy with different ADC references.
    pub fn with_refs(&self, refs: AdcRefs<T>) -> Self {
        Self { columns: self.columns.clone(), adc_refs: refs }
    }
}

/// Continuous correction targets for one line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrimTargets<T> {
    pub r_sa: T,
    pub v_cal: T,
}

/// Rounds targets onto the trim grids. With `continuous` the targets are realized exactly
/// (clamped to range), which models ideal trim hardware.
pub fn quantize_trims<T: Real>(
    targets: TrimTargets<T>,
    cfg: &ArrayConfig<T>,
    trims: &TrimModel,
    continuous: bool,
) -> LineTrim<T> {
    let r_nom = cfg.r_sa_nominal();
    let r_lo = trims.pot_value(r_nom, 0);
    let r_hi = trims.pot_value(r_nom, trims.pot_steps - 1);
    let v_lo = lit::<T>(trims.cal_dac_low);
    let v_hi = lit::<T>(trims.cal_dac_high);
    let clamped = !(targets.r_sa >= r_lo && targets.r_sa <= r_hi && targets.v_cal >= v_lo && targets.v_cal <= v_hi);
    let (r_sa, pot_code, v_cal, cal_code) = if continuous {
        (targets.r_sa.max(r_lo).min(r_hi), None, targets.v_cal.max(v_lo).min(v_hi), None)
    } else {
        let max_pot = (trims.pot_steps - 1) as f64;
        let k = to_f64((targets.r_sa - r_lo) / trims.pot_step(r_nom)).round().clamp(0.0, max_pot) as u32;
        let max_cal = ((1u64 << trims.cal_dac_bits) - 1) as f64;
        let c = to_f64((targets.v_cal - v_lo) / trims.cal_dac_lsb::<T>()).round().clamp(0.0, max_cal) as u32;
        (trims.pot_value(r_nom, k), Some(k), trims.cal_dac_value::<T>(c), Some(c))
    };
    LineTrim {
        r_sa,
        v_cal,
        pot_code,
        cal_code,
        r_sa_residual: r_sa - targets.r_sa,
        v_cal_residual: v_cal - targets.v_cal,
        calibrated: true,
        clamped,
    }
}
