//! Unit current and area/power projections for alternative resistor technologies.
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// One resistor technology option for the weight cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct TechSpec<T> {
    pub name: String,
    /// Unit resistance, ohms.
    pub r_unit: T,
    /// Weight-cell area at 1-bit and 6-bit resolution, square micrometres.
    pub area_1bit: T,
    pub area_6bit: T,
    /// Operating voltage across the ladder, volts.
    #[serde(default = "one_volt")]
    pub v_op: T,
    /// Array `[rows, cols]` projected into the baseline footprint, when one is stated.
    #[serde(default)]
    pub projected_array: Option<[usize; 2]>,
}

fn one_volt<T: Real>() -> T {
    T::one()
}

impl<T: Real> TechSpec<T> {
    pub fn new(name: &str, r_unit: f64, area_1bit: f64, area_6bit: f64) -> Self {
        Self {
            name: name.to_string(),
            r_unit: lit(r_unit),
            area_1bit: lit(area_1bit),
            area_6bit: lit(area_6bit),
            v_op: T::one(),
            projected_array: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_unit > T::zero()) || !(self.v_op > T::zero()) {
            return Err(Error::Config(format!("{}: r_unit and v_op must be positive", self.name)));
        }
        if !(self.area_1bit > T::zero() && self.area_1bit <= self.area_6bit) {
            return Err(Error::Config(format!("{}: need 0 < area_1bit <= area_6bit", self.name)));
        }
        Ok(())
    }
}

/// Polysilicon baseline plus the three projected technologies.
pub fn builtin_techs<T: Real>() -> Vec<TechSpec<T>> {
    let mut poly = TechSpec::new("Polysilicon", 0.385e6, 17.0, 120.0);
    poly.projected_array = Some([36, 32]);
    let mut mor = TechSpec::new("MOR", 7e6, 1.0, 8.0);
    mor.projected_array = Some([128, 128]);
    let mut wox = TechSpec::new("WOx", 28e6, 1.0, 8.0);
    wox.projected_array = Some([128, 128]);
    let rram = TechSpec::new("RRAM", 0.03e6, 0.05, 0.4);
    vec![poly, mor, wox, rram]
}

/// Current drawn by one weight cell at the operating voltage.
pub fn unit_current<T: Real>(spec: &TechSpec<T>) -> T {
    spec.v_op / spec.r_unit
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Improvement<T> {
    /// Baseline unit current over this technology's unit current.
    pub power: T,
    /// Cells per footprint relative to the baseline array.
    pub area: T,
    /// Baseline 6-bit cell area over this technology's 6-bit cell area.
    pub area_ratio_6bit: T,
}

/// Improvement factors relative to `baseline`.
///
/// The area factor counts cells of the projected array against the baseline array when the
/// spec states a projected array, and falls back to the 6-bit cell area ratio otherwise.
pub fn improvement_factors<T: Real>(spec: &TechSpec<T>, baseline: &TechSpec<T>) -> Result<Improvement<T>> {
    spec.validate()?;
    baseline.validate()?;
    let power = unit_current(baseline) / unit_current(spec);
    let area_ratio_6bit = baseline.area_6bit / spec.area_6bit;
    let area = match (spec.projected_array, baseline.projected_array) {
        (Some([r, c]), Some([br, bc])) => {
            let footprint = lit::<T>((br * bc) as f64) * baseline.area_6bit;
            let needed = lit::<T>((r * c) as f64) * spec.area_6bit;
            if needed > footprint {
                return Err(Error::Config(format!(
                    "{}: projected {r}x{c} array needs {needed} um^2, footprint is {footprint} um^2",
                    spec.name
                )));
            }
            lit::<T>((r * c) as f64) / lit::<T>((br * bc) as f64)
        }
        _ => area_ratio_6bit,
    };
    Ok(Improvement { power, area, area_ratio_6bit })
}

/// Rounds to `digits` significant figures.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits as i32 - 1 - mag);
    (x * scale).round() / scale
}
