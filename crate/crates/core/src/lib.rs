//! Behavioral simulator of a resistive R-2R MDAC compute-in-memory array.
//!
//! The model covers the signed input DACs, the weight cells, the two-stage summing
//! amplifiers and the flash ADC, with seeded analog error profiles. On top of it sit
//! a least-squares self-calibration routine, compute-SNR metrics, a quantized MLP
//! harness and a resistor technology calculator.
//!
//! All numeric code is generic over [`Real`]; the aliases below fix it to `f64`.
pub mod array;
pub mod bisc;
pub mod dnn;
mod error;
pub mod metrics;
pub mod nonideality;
mod scalar;
pub mod techproj;

pub use error::{Error, Result};
pub use scalar::{lit, to_f64, Real};

pub type ArrayConfig = array::ArrayConfig<f64>;
pub type AdcRefs = array::AdcRefs<f64>;
pub type ArrayModel = array::ArrayModel<f64>;
pub type ColumnSample = array::ColumnSample<f64>;
pub type NonidealityProfile = nonideality::NonidealityProfile<f64>;
pub type CalibrationState = bisc::CalibrationState<f64>;
pub type CharacterizationResult = bisc::CharacterizationResult<f64>;
pub type SnrReport = metrics::SnrReport<f64>;
pub type SnrEntry = metrics::SnrEntry<f64>;
pub type TechSpec = techproj::TechSpec<f64>;

pub type ArrayConfigF32 = array::ArrayConfig<f32>;
pub type ArrayModelF32 = array::ArrayModel<f32>;
pub type CalibrationStateF32 = bisc::CalibrationState<f32>;
