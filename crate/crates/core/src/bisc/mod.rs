//! Built-in self-calibration: least-squares characterization and trim of each column.
mod fit;
mod routine;
mod state;

pub use fit::{
    adc_guard, compute_corrections, extract_analog_errors, least_squares_fit, reference_offset, residual_rms,
    zero_signal_code, LsFit,
};
pub use routine::{
    build_test_vectors, characterize, run_bisc, test_codes, AdcParams, BiscOutcome, BiscParams,
    CharacterizationResult, LineMeasurement, Readout, TestVectors,
};
pub use state::{quantize_trims, CalibrationState, ColumnTrim, LineTrim, TrimModel, TrimTargets};
