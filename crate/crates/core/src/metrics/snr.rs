use serde::{Deserialize, Serialize};

use crate::bisc::{least_squares_fit, LsFit};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Compute-SNR statistics of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrEntry<T> {
    /// `var(Q_nom) / var(e)`; `+inf` when the error has no variance.
    pub snr_linear: T,
    pub snr_db: T,
    pub enob: T,
    /// Mean of `e = Q_nom - Q_act`, codes.
    pub err_mean: T,
    /// Population standard deviation of `e`, codes.
    pub err_std: T,
    /// Diagnostic only: `var(Q_nom) / mean(e^2)` in dB, which also penalizes constant offsets.
    pub mse_snr_db: T,
}

/// Population (divide-by-n) mean and variance, two-pass.
pub fn mean_var<T: Real>(x: &[T]) -> (T, T) {
    let n = lit::<T>(x.len() as f64);
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, var)
}

pub fn to_db<T: Real>(linear: T) -> T {
    lit::<T>(10.0) * linear.log10()
}

pub fn enob_from_db<T: Real>(db: T) -> T {
    (db - lit(1.76)) / lit(6.02)
}

pub fn db_from_enob<T: Real>(enob: T) -> T {
    enob * lit(6.02) + lit(1.76)
}

/// Per-column SNR of actual codes against nominal codes.
pub fn compute_snr<T: Real>(q_nom: &[T], q_act: &[T]) -> Result<SnrEntry<T>> {
    if q_nom.len() != q_act.len() {
        return Err(Error::Shape { expected: format!("{} actual codes", q_nom.len()), got: q_act.len().to_string() });
    }
    if q_nom.len() < 2 {
        return Err(Error::Degenerate("SNR needs at least two samples".into()));
    }
    let (_, var_nom) = mean_var(q_nom);
    if !(var_nom > T::zero()) {
        return Err(Error::Degenerate("nominal codes have zero variance".into()));
    }
    let e: Vec<T> = q_nom.iter().zip(q_act).map(|(&n, &a)| n - a).collect();
    let (err_mean, var_e) = mean_var(&e);
    let snr_linear = if var_e > T::zero() { var_nom / var_e } else { T::infinity() };
    let snr_db = to_db(snr_linear);
    let ms = e.iter().map(|&v| v * v).sum::<T>() / lit::<T>(e.len() as f64);
    let mse_snr_db = if ms > T::zero() { to_db(var_nom / ms) } else { T::infinity() };
    Ok(SnrEntry { snr_linear, snr_db, enob: enob_from_db(snr_db), err_mean, err_std: var_e.sqrt(), mse_snr_db })
}

/// Gain and offset of actual versus nominal codes, as in the calibration fit.
pub fn extract_column_errors<T: Real>(q_nom: &[T], q_act: &[T]) -> Result<LsFit<T>> {
    least_squares_fit(q_nom, q_act)
}
