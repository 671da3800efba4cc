use serde::{Deserialize, Serialize};

use super::state::{LineTrim, TrimTargets};
use crate::array::AdcRefs;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Affine fit `Q_act ~ gain * Q_nom + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsFit<T> {
    pub gain: T,
    pub offset: T,
}

/// Closed-form least-squares gain and offset over `Z` paired points.
pub fn least_squares_fit<T: Real>(q_nom: &[T], q_act: &[T]) -> Result<LsFit<T>> {
    if q_nom.len() != q_act.len() {
        return Err(Error::Shape { expected: format!("{} actual codes", q_nom.len()), got: q_act.len().to_string() });
    }
    if q_nom.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 test points, got {}", q_nom.len())));
    }
    let z = lit::<T>(q_nom.len() as f64);
    let (mut sn, mut sa, mut snn, mut sna) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (&n, &a) in q_nom.iter().zip(q_act) {
        sn += n;
        sa += a;
        snn += n * n;
        sna += n * a;
    }
    let den = z * snn - sn * sn;
    let scale = z * snn;
    if !(den.abs() > scale * T::epsilon() * lit::<T>(16.0)) {
        return Err(Error::Degenerate("nominal codes have zero variance".into()));
    }
    let gain = (z * sna - sn * sa) / den;
    let offset = (sa - gain * sn) / z;
    Ok(LsFit { gain, offset })
}

/// Root-mean-square of the fit residuals.
pub fn residual_rms<T: Real>(q_nom: &[T], q_act: &[T], fit: &LsFit<T>) -> T {
    if q_nom.is_empty() {
        return T::zero();
    }
    let ss: T = q_nom.iter().zip(q_act).map(|(&n, &a)| (a - fit.gain * n - fit.offset).powi(2)).sum();
    (ss / lit::<T>(q_nom.len() as f64)).sqrt()
}

/// Analog gain and offset (volts) from the fitted totals and the known ADC errors.
pub fn extract_analog_errors<T: Real>(g_tot: T, eps_tot: T, alpha_d: T, beta_d: T, c_adc: T) -> Result<(T, T)> {
    if !(alpha_d > T::zero()) {
        return Err(Error::Config(format!("ADC gain must be positive, got {alpha_d}")));
    }
    Ok((g_tot / alpha_d, (eps_tot - beta_d) / (alpha_d * c_adc)))
}

/// Moves the fitted offset from the zero-code origin to the zero-signal origin.
///
/// The fit measures offset at `Q_nom = 0`, but the nominal chain sits at
/// `q0 = C (V_BIAS - V_L)` when no current flows. The gain error acting on that
/// pedestal is not an analog offset, so it is removed before extraction.
pub fn reference_offset<T: Real>(eps_tot: T, g_tot: T, alpha_d: T, q0: T) -> T {
    eps_tot + (g_tot - alpha_d) * q0
}

/// Code of the nominal chain at zero MAC current.
pub fn zero_signal_code<T: Real>(v_bias: T, refs: &AdcRefs<T>, bits: u32) -> T {
    refs.gain(bits) * (v_bias - refs.low)
}

/// Continuous trim targets that cancel the extracted errors.
pub fn compute_corrections<T: Real>(alpha_a: T, beta_a: T, current: &LineTrim<T>) -> Result<TrimTargets<T>> {
    if !(alpha_a > T::zero()) {
        return Err(Error::Degenerate(format!("extracted gain must be positive, got {alpha_a}")));
    }
    Ok(TrimTargets { r_sa: current.r_sa / alpha_a, v_cal: current.v_cal - beta_a })
}

/// Widens the references for characterization: low by `1 - margin`, high by `1 + margin`.
pub fn adc_guard<T: Real>(refs: &AdcRefs<T>, margin: T) -> Result<AdcRefs<T>> {
    if !(margin >= T::zero() && margin <= lit::<T>(0.2)) {
        return Err(Error::Config(format!("guard margin must lie in [0, 0.2], got {margin}")));
    }
    AdcRefs::new(refs.low * (T::one() - margin), refs.high * (T::one() + margin))
}
