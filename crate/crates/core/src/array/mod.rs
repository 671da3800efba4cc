//! Forward model of the array: input DACs, weight cells, summing amplifiers and the ADC.
mod codes;
mod config;
mod ops;
mod sim;

pub use codes::{InputCode, Line, WeightCode, WeightLine, WeightMatrix};
pub use config::{AdcRefs, ArrayConfig, DacPolarity};
pub use ops::{
    adc_quantize, column_currents, ideal_mac_current, input_dac_transfer, mac_ideal, mwc_current, nominal_code,
    nominal_current_from_code, sa_output, signed_product_sum, AdcReading,
};
pub use sim::{ArrayModel, ColumnSample, NoiseState, SampleLine};
