//! Compute SNR, ENOB and normalized throughput/efficiency.
mod snr;
mod stimulus;
mod throughput;

pub use snr::{compute_snr, db_from_enob, enob_from_db, extract_column_errors, mean_var, to_db, SnrEntry};
pub use stimulus::{
    compare_states, measure_columns, ColumnCodes, ColumnSnr, SnrComparison, SnrReference, SnrReport, SnrStimulus,
    StimulusMode,
};
pub use throughput::{energy_efficiency, power_from_energy, throughput_1b_gops};
