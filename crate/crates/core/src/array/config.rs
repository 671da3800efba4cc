use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, pow2, Real};

/// Which reference a positive input code moves the DAC output toward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DacPolarity {
    /// Positive codes pull the row toward the low input reference.
    #[default]
    PositiveToLow,
    PositiveToHigh,
}

/// Low/high ADC reference voltages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcRefs<T> {
    pub low: T,
    pub high: T,
}

impl<T: Real> AdcRefs<T> {
    pub fn new(low: T, high: T) -> Result<Self> {
        if !(low < high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::Config(format!("ADC references must satisfy low < high, got ({low}, {high})")));
        }
        Ok(Self { low, high })
    }

    /// ADC conversion gain in codes per volt for a `bits`-bit converter.
    pub fn gain(&self, bits: u32) -> T {
        (pow2::<T>(bits) - T::one()) / (self.high - self.low)
    }

    /// Window of half-width `half` centered on `center`.
    pub fn centered(center: T, half: T) -> Result<Self> {
        Self::new(center - half, center + half)
    }
}

/// Static geometry, bit widths and reference voltages of the array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig<T> {
    pub rows: usize,
    pub cols: usize,
    /// Unit resistance of the R-2R ladders, ohms.
    pub r_unit: T,
    pub dac_bits: u32,
    pub weight_bits: u32,
    pub adc_bits: u32,
    pub v_in_low: T,
    pub v_in_high: T,
    pub v_bias: T,
    /// Sample-and-hold period, seconds.
    pub t_sample: T,
    /// Inference frequency, hertz.
    pub f_inference: T,
    pub v_adc_low: T,
    pub v_adc_high: T,
    pub dac_polarity: DacPolarity,
}

impl<T: Real> Default for ArrayConfig<T> {
    fn default() -> Self {
        Self {
            rows: 36,
            cols: 32,
            r_unit: lit(385e3),
            dac_bits: 6,
            weight_bits: 6,
            adc_bits: 6,
            v_in_low: lit(0.2),
            v_in_high: lit(0.6),
            v_bias: lit(0.4),
            t_sample: lit(1e-6),
            f_inference: lit(1e6),
            v_adc_low: lit(0.2),
            v_adc_high: lit(0.6),
            dac_polarity: DacPolarity::PositiveToLow,
        }
    }
}

impl<T: Real> ArrayConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.rows == 0 || self.cols == 0 {
            return bad(format!("array must have at least one row and column, got {}x{}", self.rows, self.cols));
        }
        for (name, b) in [("dac_bits", self.dac_bits), ("weight_bits", self.weight_bits), ("adc_bits", self.adc_bits)] {
            if !(1..=16).contains(&b) {
                return bad(format!("{name} must be in 1..=16, got {b}"));
            }
        }
        if !(self.r_unit > T::zero()) {
            return bad(format!("r_unit must be positive, got {}", self.r_unit));
        }
        if !(self.v_in_low < self.v_bias && self.v_bias < self.v_in_high) {
            return bad("input references must satisfy v_in_low < v_bias < v_in_high".into());
        }
        let mid = (self.v_in_low + self.v_in_high) / lit(2.0);
        if (self.v_bias - mid).abs() > lit::<T>(1e-6) * (self.v_in_high - self.v_in_low) {
            return bad(format!("v_bias must sit midway between the input references ({mid})"));
        }
        if !(self.t_sample > T::zero() && self.f_inference > T::zero()) {
            return bad("timing parameters must be positive".into());
        }
        AdcRefs::new(self.v_adc_low, self.v_adc_high)?;
        Ok(())
    }

    pub fn adc_refs(&self) -> AdcRefs<T> {
        AdcRefs { low: self.v_adc_low, high: self.v_adc_high }
    }

    /// Nominal summing-amplifier transresistance `R_U / N`.
    pub fn r_sa_nominal(&self) -> T {
        self.r_unit / lit(self.rows as f64)
    }

    pub fn dac_max_code(&self) -> u32 {
        (1u32 << self.dac_bits) - 1
    }

    pub fn weight_max_code(&self) -> u32 {
        (1u32 << self.weight_bits) - 1
    }

    pub fn adc_max_code(&self) -> u32 {
        (1u32 << self.adc_bits) - 1
    }

    /// Codes per volt at the given references.
    pub fn adc_gain(&self, refs: &AdcRefs<T>) -> T {
        refs.gain(self.adc_bits)
    }

    /// Sign applied to `s * d` so that the DAC moves toward the configured reference.
    pub fn polarity_sign(&self) -> T {
        match self.dac_polarity {
            DacPolarity::PositiveToLow => -T::one(),
            DacPolarity::PositiveToHigh => T::one(),
        }
    }

    /// Volts of DAC deviation per unit of `s * d / 2^B_D`.
    pub fn dac_swing(&self) -> T {
        self.v_bias - self.v_in_low
    }

    /// Current per unit of `s * d * D` through one cell: `swing / (R_U * 2^B_D * 2^B_W)` with polarity.
    pub fn unit_product_current(&self) -> T {
        self.polarity_sign() * self.dac_swing()
            / (self.r_unit * pow2::<T>(self.dac_bits) * pow2::<T>(self.weight_bits))
    }
}
