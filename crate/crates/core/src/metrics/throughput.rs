use crate::array::ArrayConfig;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Normalized throughput in 1b-GOPS: `2 N M * (B_D + 1)(B_W + 1) * f_inf`, counting the sign bits.
pub fn throughput_1b_gops<T: Real>(cfg: &ArrayConfig<T>) -> T {
    let ops = lit::<T>(2.0 * cfg.rows as f64 * cfg.cols as f64);
    let bits = lit::<T>(((cfg.dac_bits + 1) * (cfg.weight_bits + 1)) as f64);
    ops * bits * cfg.f_inference / lit(1e9)
}

/// Normalized efficiency in 1b-TOPS/W.
pub fn energy_efficiency<T: Real>(throughput_1b_gops: T, power_watts: T) -> Result<T> {
    if !(power_watts > T::zero()) {
        return Err(Error::Config(format!("power must be positive, got {power_watts}")));
    }
    Ok(throughput_1b_gops / power_watts / lit(1e3))
}

/// Average power of one inference per sample-and-hold period.
pub fn power_from_energy<T: Real>(energy_per_inference_j: T, cfg: &ArrayConfig<T>) -> T {
    energy_per_inference_j * cfg.f_inference
}
