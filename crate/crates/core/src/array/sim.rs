use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::codes::{InputCode, WeightLine, WeightMatrix};
use super::config::ArrayConfig;
use super::ops::{input_dac_transfer, quantize_with, sa_stage};
use crate::bisc::CalibrationState;
use crate::error::{shape_err, Error, Result};
use crate::nonideality::{attenuation_map, keyed_rng, NonidealityProfile, RngDomain};
use crate::scalar::{lit, pow2, Real};

/// Which readout a sample belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleLine {
    Positive,
    Negative,
    Combined,
}

/// One column's output for one inference cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSample<T> {
    pub column: usize,
    pub line: SampleLine,
    pub v_sa: T,
    pub v_x: T,
    pub adc_code: u32,
    /// Real-valued code before rounding.
    pub code_value: T,
    pub clipped: bool,
}

/// Array configuration and sampled error profile with per-cell factors precomputed.
#[derive(Clone, Debug)]
pub struct ArrayModel<T> {
    cfg: ArrayConfig<T>,
    profile: NonidealityProfile<T>,
    cell_gain: Vec<T>,
    dac_dev: Vec<T>,
}

/// Per-stream noise generators and drift accumulators, one per column.
#[derive(Clone, Debug)]
pub struct NoiseState<T> {
    rngs: Vec<ChaCha8Rng>,
    drift: Vec<T>,
    sigma: T,
    drift_rate: T,
}

impl<T: Real> NoiseState<T> {
    fn next(&mut self, col: usize) -> T {
        if self.sigma == T::zero() && self.drift_rate == T::zero() {
            return T::zero();
        }
        let rng = &mut self.rngs[col];
        let mut out = T::zero();
        if self.drift_rate > T::zero() {
            let step: f64 = rng.sample(StandardNormal);
            self.drift[col] += self.drift_rate * lit::<T>(step);
            out += self.drift[col];
        }
        if self.sigma > T::zero() {
            let z: f64 = rng.sample(StandardNormal);
            out += self.sigma * lit::<T>(z);
        }
        out
    }

    /// Current accumulated drift of a column.
    pub fn drift(&self, col: usize) -> T {
        self.drift[col]
    }
}

impl<T: Real> ArrayModel<T> {
    pub fn new(cfg: ArrayConfig<T>, profile: NonidealityProfile<T>) -> Result<Self> {
        cfg.validate()?;
        if profile.rows != cfg.rows || profile.cols != cfg.cols {
            return Err(Error::Shape {
                expected: format!("{}x{} profile", cfg.rows, cfg.cols),
                got: format!("{}x{}", profile.rows, profile.cols),
            });
        }
        profile.validate()?;
        let map = attenuation_map(&cfg, profile.driver_resistance, profile.wire_rx, profile.wire_ry);
        let mut cell_gain = Vec::with_capacity(cfg.rows * cfg.cols);
        for r in 0..cfg.rows {
            for c in 0..cfg.cols {
                cell_gain.push(map.factor(r, c) * (T::one() + profile.mismatch(r, c)));
            }
        }
        let max = cfg.dac_max_code() as i32;
        let width = (2 * max + 1) as usize;
        let mut dac_dev = Vec::with_capacity(cfg.rows * width);
        for r in 0..cfg.rows {
            for s in -max..=max {
                let code = InputCode::from_signed(s, cfg.dac_bits)?;
                dac_dev.push(input_dac_transfer(code, &cfg, profile.dac_inl.get(r)) - cfg.v_bias);
            }
        }
        Ok(Self { cfg, profile, cell_gain, dac_dev })
    }

    /// Model with every error source switched off.
    pub fn ideal(cfg: ArrayConfig<T>) -> Result<Self> {
        let profile = NonidealityProfile::ideal(cfg.rows, cfg.cols);
        Self::new(cfg, profile)
    }

    pub fn cfg(&self) -> &ArrayConfig<T> {
        &self.cfg
    }

    pub fn profile(&self) -> &NonidealityProfile<T> {
        &self.profile
    }

    /// Fresh noise state; distinct `stream` values give independent noise sequences.
    pub fn noise_stream(&self, stream: u64) -> NoiseState<T> {
        let rngs = (0..self.cfg.cols)
            .map(|c| keyed_rng(self.profile.seed, RngDomain::Noise, stream, c as u64))
            .collect();
        NoiseState {
            rngs,
            drift: vec![T::zero(); self.cfg.cols],
            sigma: self.profile.noise_rms,
            drift_rate: self.profile.drift_rate,
        }
    }

    fn check(&self, inputs: &[InputCode], w: &WeightMatrix, cal: &CalibrationState<T>) -> Result<()> {
        let cfg = &self.cfg;
        if inputs.len() != cfg.rows {
            return Err(shape_err("inputs", cfg.rows, inputs.len()));
        }
        if w.rows() != cfg.rows || w.cols() != cfg.cols {
            return Err(Error::Shape {
                expected: format!("{}x{} weights", cfg.rows, cfg.cols),
                got: format!("{}x{}", w.rows(), w.cols()),
            });
        }
        if cal.columns.len() != cfg.cols {
            return Err(shape_err("calibration columns", cfg.cols, cal.columns.len()));
        }
        if let Some(x) = inputs.iter().find(|x| x.magnitude() > cfg.dac_max_code()) {
            return Err(Error::Code(format!("input magnitude {} exceeds {}-bit range", x.magnitude(), cfg.dac_bits)));
        }
        if let Some(c) = w.cells().iter().find(|c| c.magnitude() > cfg.weight_max_code()) {
            return Err(Error::Code(format!("weight magnitude {} exceeds {}-bit range", c.magnitude(), cfg.weight_bits)));
        }
        Ok(())
    }

    /// Line currents `(I_pos, I_neg)` of every column.
    pub fn line_currents(&self, inputs: &[InputCode], w: &WeightMatrix) -> Vec<(T, T)> {
        let cfg = &self.cfg;
        let (rows, cols) = (cfg.rows, cfg.cols);
        let max = cfg.dac_max_code() as i32;
        let width = (2 * max + 1) as usize;
        let mut pos = vec![T::zero(); cols];
        let mut neg = vec![T::zero(); cols];
        for r in 0..rows {
            let s = inputs[r].signed();
            if s == 0 && self.profile.dac_inl.is_empty() {
                continue;
            }
            let dev = self.dac_dev[r * width + (s + max) as usize];
            if dev == T::zero() {
                continue;
            }
            let gains = &self.cell_gain[r * cols..(r + 1) * cols];
            let cells = &w.cells()[r * cols..(r + 1) * cols];
            for c in 0..cols {
                let cell = cells[c];
                let contrib = dev * lit::<T>(cell.magnitude() as f64) * gains[c];
                match cell.line() {
                    WeightLine::Idle => {}
                    WeightLine::Positive => pos[c] += contrib,
                    WeightLine::Negative => neg[c] += contrib,
                }
            }
        }
        let scale = T::one() / (cfg.r_unit * pow2::<T>(cfg.weight_bits));
        pos.into_iter().zip(neg).map(|(p, n)| (p * scale, n * scale)).collect()
    }

    /// One inference cycle over the whole array.
    pub fn forward(
        &self,
        noise: &mut NoiseState<T>,
        inputs: &[InputCode],
        w: &WeightMatrix,
        cal: &CalibrationState<T>,
    ) -> Result<Vec<ColumnSample<T>>> {
        self.check(inputs, w, cal)?;
        let currents = self.line_currents(inputs, w);
        let p = &self.profile;
        let out = currents
            .into_iter()
            .enumerate()
            .map(|(c, (i_pos, i_neg))| {
                let trim = &cal.columns[c];
                let errs = [p.alpha[c].pos, p.alpha[c].neg, p.beta[c].pos, p.beta[c].neg];
                let (v_sa, v_x) = sa_stage(
                    i_pos,
                    i_neg,
                    trim.pos.r_sa,
                    trim.neg.r_sa,
                    trim.pos.v_cal,
                    trim.neg.v_cal,
                    errs,
                    self.cfg.v_bias,
                    noise.next(c),
                );
                let reading = quantize_with(v_sa, &cal.adc_refs, self.cfg.adc_bits, p.alpha_adc, p.beta_adc);
                ColumnSample {
                    column: c,
                    line: SampleLine::Combined,
                    v_sa,
                    v_x,
                    adc_code: reading.code,
                    code_value: reading.value,
                    clipped: reading.clipped,
                }
            })
            .collect();
        Ok(out)
    }
}
