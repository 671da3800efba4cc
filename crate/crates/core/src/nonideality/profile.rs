use serde::{Deserialize, Serialize};

use super::rng::FieldStream;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Clamped normal distribution: `clamp(mean + std * z, min, max)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dist {
    pub mean: f64,
    #[serde(default)]
    pub std: f64,
    #[serde(default = "neg_inf")]
    pub min: f64,
    #[serde(default = "pos_inf")]
    pub max: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

impl Dist {
    pub const fn fixed(value: f64) -> Self {
        Self { mean: value, std: 0.0, min: f64::NEG_INFINITY, max: f64::INFINITY }
    }

    pub const fn normal(mean: f64, std: f64, min: f64, max: f64) -> Self {
        Self { mean, std, min, max }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.mean.is_finite() || !self.std.is_finite() || self.std < 0.0 {
            return Err(Error::Config(format!("{name}: mean must be finite and std >= 0")));
        }
        if !(self.min <= self.max) || self.mean < self.min || self.mean > self.max {
            return Err(Error::Config(format!("{name}: need min <= mean <= max")));
        }
        Ok(())
    }

    fn draw(&self, stream: &mut FieldStream, index: u64) -> f64 {
        if self.std == 0.0 {
            return self.mean;
        }
        (self.mean + self.std * stream.normal(index)).clamp(self.min, self.max)
    }
}

/// Distributions for every field of a [`NonidealityProfile`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSpec {
    /// Summing-amplifier gain error of the positive line, per column.
    pub alpha_pos: Dist,
    pub alpha_neg: Dist,
    /// Summing-amplifier offset of each line, volts, per column.
    pub beta_pos: Dist,
    pub beta_neg: Dist,
    /// ADC gain error (shared converter).
    pub alpha_adc: Dist,
    /// ADC offset, codes.
    pub beta_adc: Dist,
    /// Input driver output resistance, ohms.
    pub driver_resistance: Dist,
    /// Row wire resistance per cell pitch, ohms.
    pub wire_rx: Dist,
    /// Column wire resistance per cell pitch, ohms.
    pub wire_ry: Dist,
    /// Relative conductance error of each cell.
    pub cell_mismatch: Dist,
    /// Per-row DAC INL amplitude, volts.
    pub dac_inl: Dist,
    /// Output-referred noise, volts RMS.
    pub noise_rms: Dist,
    /// Offset random-walk step per inference, volts RMS.
    pub drift_rate: Dist,
}

impl ProfileSpec {
    /// Every error source disabled.
    pub fn ideal() -> Self {
        Self {
            alpha_pos: Dist::fixed(1.0),
            alpha_neg: Dist::fixed(1.0),
            beta_pos: Dist::fixed(0.0),
            beta_neg: Dist::fixed(0.0),
            alpha_adc: Dist::fixed(1.0),
            beta_adc: Dist::fixed(0.0),
            driver_resistance: Dist::fixed(0.0),
            wire_rx: Dist::fixed(0.0),
            wire_ry: Dist::fixed(0.0),
            cell_mismatch: Dist::fixed(0.0),
            dac_inl: Dist::fixed(0.0),
            noise_rms: Dist::fixed(0.0),
            drift_rate: Dist::fixed(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha_pos", &self.alpha_pos),
            ("alpha_neg", &self.alpha_neg),
            ("beta_pos", &self.beta_pos),
            ("beta_neg", &self.beta_neg),
            ("alpha_adc", &self.alpha_adc),
            ("beta_adc", &self.beta_adc),
            ("driver_resistance", &self.driver_resistance),
            ("wire_rx", &self.wire_rx),
            ("wire_ry", &self.wire_ry),
            ("cell_mismatch", &self.cell_mismatch),
            ("dac_inl", &self.dac_inl),
            ("noise_rms", &self.noise_rms),
            ("drift_rate", &self.drift_rate),
        ];
        for (name, d) in fields {
            d.validate(name)?;
        }
        for (name, d) in [("alpha_pos", &self.alpha_pos), ("alpha_neg", &self.alpha_neg), ("alpha_adc", &self.alpha_adc)] {
            if !(d.min > 0.0 || (d.std == 0.0 && d.mean > 0.0)) {
                return Err(Error::Config(format!("{name}: bounds must keep the gain positive")));
            }
        }
        for (name, d) in [
            ("driver_resistance", &self.driver_resistance),
            ("wire_rx", &self.wire_rx),
            ("wire_ry", &self.wire_ry),
            ("dac_inl", &self.dac_inl),
            ("noise_rms", &self.noise_rms),
            ("drift_rate", &self.drift_rate),
        ] {
            if !(d.min >= 0.0 || (d.std == 0.0 && d.mean >= 0.0)) {
                return Err(Error::Config(format!("{name}: bounds must keep the value non-negative")));
            }
        }
        if !(self.cell_mismatch.min > -1.0 || (self.cell_mismatch.std == 0.0 && self.cell_mismatch.mean > -1.0)) {
            return Err(Error::Config("cell_mismatch: bounds must keep conductances positive".into()));
        }
        Ok(())
    }
}

impl Default for ProfileSpec {
    /// Error magnitudes that put the uncalibrated array in the 12-18 dB compute-SNR regime.
    fn default() -> Self {
        Self {
            alpha_pos: Dist::normal(0.85, 0.02, 0.5, 1.5),
            alpha_neg: Dist::normal(1.13, 0.02, 0.5, 1.5),
            beta_pos: Dist::normal(0.0, 0.0045, -0.05, 0.05),
            beta_neg: Dist::normal(0.0, 0.0045, -0.05, 0.05),
            alpha_adc: Dist::fixed(1.0),
            beta_adc: Dist::fixed(0.0),
            driver_resistance: Dist::fixed(200.0),
            wire_rx: Dist::fixed(2.0),
            wire_ry: Dist::fixed(2.0),
            cell_mismatch: Dist::normal(0.0, 0.065, -0.4, 0.4),
            dac_inl: Dist::fixed(0.0),
            noise_rms: Dist::fixed(3e-4),
            drift_rate: Dist::fixed(0.0),
        }
    }
}

/// A value per summation line.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinePair<T> {
    pub pos: T,
    pub neg: T,
}

/// Smooth per-row DAC nonlinearity: `amplitude * ((1 - |h|) sin(pi x) + h sin(2 pi x))`
/// for normalized signed code `x`, so its magnitude never exceeds `amplitude`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DacInl<T> {
    pub amplitude: T,
    pub harmonic: T,
}

impl<T: Real> DacInl<T> {
    pub fn error_at(&self, x: T) -> T {
        if self.amplitude == T::zero() {
            return T::zero();
        }
        let pi = lit::<T>(std::f64::consts::PI);
        self.amplitude * ((T::one() - self.harmonic.abs()) * (pi * x).sin() + self.harmonic * (lit::<T>(2.0) * pi * x).sin())
    }
}

/// Sampled error parameters of one array instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonidealityProfile<T> {
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    /// Per-column line gains.
    pub alpha: Vec<LinePair<T>>,
    /// Per-column line offsets, volts.
    pub beta: Vec<LinePair<T>>,
    pub alpha_adc: T,
    /// ADC offset in codes.
    pub beta_adc: T,
    pub driver_resistance: T,
    pub wire_rx: T,
    pub wire_ry: T,
    /// Row-major relative conductance errors; empty means none.
    pub cell_mismatch: Vec<T>,
    /// Per-row DAC INL; empty means none.
    pub dac_inl: Vec<DacInl<T>>,
    pub noise_rms: T,
    pub drift_rate: T,
}

#[repr(u64)]
enum Field {
    AlphaPos = 1,
    AlphaNeg,
    BetaPos,
    BetaNeg,
    AlphaAdc,
    BetaAdc,
    DriverResistance,
    WireRx,
    WireRy,
    CellMismatch,
    DacInl,
    DacInlShape,
    NoiseRms,
    DriftRate,
}

impl<T: Real> NonidealityProfile<T> {
    pub fn ideal(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            seed: 0,
            alpha: vec![LinePair { pos: T::one(), neg: T::one() }; cols],
            beta: vec![LinePair::default(); cols],
            alpha_adc: T::one(),
            beta_adc: T::zero(),
            driver_resistance: T::zero(),
            wire_rx: T::zero(),
            wire_ry: T::zero(),
            cell_mismatch: Vec::new(),
            dac_inl: Vec::new(),
            noise_rms: T::zero(),
            drift_rate: T::zero(),
        }
    }

    pub fn mismatch(&self, row: usize, col: usize) -> T {
        self.cell_mismatch.get(row * self.cols + col).copied().unwrap_or(T::zero())
    }

    pub fn is_ideal(&self) -> bool {
        let one = |x: T| x == T::one();
        let zero = |x: T| x == T::zero();
        self.alpha.iter().all(|a| one(a.pos) && one(a.neg))
            && self.beta.iter().all(|b| zero(b.pos) && zero(b.neg))
            && one(self.alpha_adc)
            && zero(self.beta_adc)
            && zero(self.driver_resistance)
            && zero(self.wire_rx)
            && zero(self.wire_ry)
            && self.cell_mismatch.iter().all(|&m| zero(m))
            && self.dac_inl.iter().all(|d| zero(d.amplitude))
            && zero(self.noise_rms)
            && zero(self.drift_rate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.cols || self.beta.len() != self.cols {
            return Err(Error::Config("profile gain/offset vectors must have one entry per column".into()));
        }
        if !self.cell_mismatch.is_empty() && self.cell_mismatch.len() != self.rows * self.cols {
            return Err(Error::Config("cell mismatch must be empty or rows*cols long".into()));
        }
        if !self.dac_inl.is_empty() && self.dac_inl.len() != self.rows {
            return Err(Error::Config("DAC INL must be empty or one entry per row".into()));
        }
        let pos = |x: T| x > T::zero();
        let nonneg = |x: T| x >= T::zero();
        if !self.alpha.iter().all(|a| pos(a.pos) && pos(a.neg)) || !pos(self.alpha_adc) {
            return Err(Error::Config("gains must be positive".into()));
        }
        if ![self.driver_resistance, self.wire_rx, self.wire_ry, self.noise_rms, self.drift_rate]
            .into_iter()
            .all(nonneg)
        {
            return Err(Error::Config("resistances and noise levels must be non-negative".into()));
        }
        if !self.cell_mismatch.iter().all(|&m| m > -T::one()) {
            return Err(Error::Config("cell mismatch must keep conductances positive".into()));
        }
        Ok(())
    }

    /// Deterministic text form; [`Self::restore`] reproduces the profile exactly.
    pub fn dump(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn restore(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::Data(format!("profile: {e}")))?;
        p.validate()?;
        Ok(p)
    }
}

/// Draws a profile for a `rows x cols` array. Every value is addressed by `(seed, field, index)`.
pub fn sample_profile<T: Real>(spec: &ProfileSpec, rows: usize, cols: usize, seed: u64) -> Result<NonidealityProfile<T>> {
    spec.validate()?;
    let scalar = |d: &Dist, f: Field| lit::<T>(d.draw(&mut FieldStream::new(seed, f as u64), 0));
    let per = |d: &Dist, f: Field, n: usize| -> Vec<T> {
        let mut s = FieldStream::new(seed, f as u64);
        (0..n).map(|i| lit::<T>(d.draw(&mut s, i as u64))).collect()
    };
    let ap = per(&spec.alpha_pos, Field::AlphaPos, cols);
    let an = per(&spec.alpha_neg, Field::AlphaNeg, cols);
    let bp = per(&spec.beta_pos, Field::BetaPos, cols);
    let bn = per(&spec.beta_neg, Field::BetaNeg, cols);
    let cell_mismatch = if spec.cell_mismatch == Dist::fixed(0.0) {
        Vec::new()
    } else {
        per(&spec.cell_mismatch, Field::CellMismatch, rows * cols)
    };
    let dac_inl = if spec.dac_inl == Dist::fixed(0.0) {
        Vec::new()
    } else {
        let amp = per(&spec.dac_inl, Field::DacInl, rows);
        let mut shape = FieldStream::new(seed, Field::DacInlShape as u64);
        amp.into_iter()
            .enumerate()
            .map(|(i, amplitude)| DacInl { amplitude, harmonic: lit::<T>(2.0 * shape.uniform(i as u64) - 1.0) })
            .collect()
    };
    let profile = NonidealityProfile {
        rows,
        cols,
        seed,
        alpha: ap.into_iter().zip(an).map(|(pos, neg)| LinePair { pos, neg }).collect(),
        beta: bp.into_iter().zip(bn).map(|(pos, neg)| LinePair { pos, neg }).collect(),
        alpha_adc: scalar(&spec.alpha_adc, Field::AlphaAdc),
        beta_adc: scalar(&spec.beta_adc, Field::BetaAdc),
        driver_resistance: scalar(&spec.driver_resistance, Field::DriverResistance),
        wire_rx: scalar(&spec.wire_rx, Field::WireRx),
        wire_ry: scalar(&spec.wire_ry, Field::WireRy),
        cell_mismatch,
        dac_inl,
        noise_rms: scalar(&spec.noise_rms, Field::NoiseRms),
        drift_rate: scalar(&spec.drift_rate, Field::DriftRate),
    };
    profile.validate()?;
    Ok(profile)
}
