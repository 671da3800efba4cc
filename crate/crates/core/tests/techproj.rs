use approx::assert_relative_eq;
use cimsim_core::techproj::{builtin_techs, improvement_factors, round_sig, unit_current};
use cimsim_core::TechSpec;
use proptest::prelude::*;

fn tech(name: &str) -> TechSpec {
    builtin_techs::<f64>().into_iter().find(|t| t.name == name).unwrap()
}

#[test]
fn unit_currents() {
    assert_eq!(round_sig(unit_current(&tech("Polysilicon")) * 1e6, 2), 2.6);
    assert_eq!(round_sig(unit_current(&tech("WOx")) * 1e9, 2), 36.0);
    assert_eq!(round_sig(unit_current(&tech("RRAM")) * 1e6, 2), 33.0);
    assert_relative_eq!(unit_current(&tech("MOR")), 1.0 / 7e6, max_relative = 1e-15);
}

#[test]
fn improvement_examples() {
    let base = tech("Polysilicon");
    let mor = improvement_factors(&tech("MOR"), &base).unwrap();
    assert_eq!(mor.area.round(), 14.0);
    assert_relative_eq!(mor.power, 7e6 / 0.385e6, max_relative = 1e-12);
    assert_eq!(mor.area_ratio_6bit, 15.0);
    let wox = improvement_factors(&tech("WOx"), &base).unwrap();
    assert_eq!(round_sig(wox.power, 1), 70.0);
    let rram = improvement_factors(&tech("RRAM"), &base).unwrap();
    assert_eq!(round_sig(rram.power, 1), 0.08);
    assert!(rram.power < 1.0);
}

#[test]
fn baseline_against_itself_is_unity() {
    let base = tech("Polysilicon");
    let f = improvement_factors(&base, &base).unwrap();
    assert_eq!((f.power, f.area, f.area_ratio_6bit), (1.0, 1.0, 1.0));
}

#[test]
fn custom_specs_fall_back_to_cell_area_ratio() {
    let base = tech("Polysilicon");
    let spec = TechSpec::new("custom", 1e6, 2.0, 12.0);
    let f = improvement_factors(&spec, &base).unwrap();
    assert_eq!(f.area, 10.0);
    assert_relative_eq!(f.power, 1e6 / 0.385e6, max_relative = 1e-12);
}

#[test]
fn invalid_specs_are_rejected() {
    let base = tech("Polysilicon");
    assert!(improvement_factors(&TechSpec::new("bad", 0.0, 1.0, 2.0), &base).is_err());
    assert!(improvement_factors(&TechSpec::new("bad", 1e6, 3.0, 2.0), &base).is_err());
    let mut oversized = tech("MOR");
    oversized.area_6bit = 100.0;
    assert!(improvement_factors(&oversized, &base).is_err());
}

#[test]
fn significant_figure_rounding() {
    assert_eq!(round_sig(0.142857, 2), 0.14);
    assert_eq!(round_sig(72.7, 1), 70.0);
    assert_eq!(round_sig(0.0779, 1), 0.08);
    assert_eq!(round_sig(0.0, 3), 0.0);
    assert_eq!(round_sig(-25.97, 2), -26.0);
}

proptest! {
    #[test]
    fn power_factor_grows_with_unit_resistance(r in 1e3f64..1e9, k in 1.001f64..10.0) {
        let base = tech("Polysilicon");
        let lo = improvement_factors(&TechSpec::new("a", r, 1.0, 2.0), &base).unwrap();
        let hi = improvement_factors(&TechSpec::new("b", r * k, 1.0, 2.0), &base).unwrap();
        prop_assert!(hi.power > lo.power);
    }
}
