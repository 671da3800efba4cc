//! Quick oracle checks bundled with the binary.
use cimsim_core::array::{input_dac_transfer, InputCode, WeightCode, WeightMatrix};
use cimsim_core::bisc::{least_squares_fit, run_bisc, AdcParams, BiscParams, Readout};
use cimsim_core::metrics::{compute_snr, energy_efficiency, power_from_energy, throughput_1b_gops};
use cimsim_core::nonideality::{attenuation_map, first_order_cell_currents, nodal_oracle, sample_profile, NodalProblem, ProfileSpec};
use cimsim_core::techproj::{builtin_techs, unit_current};
use cimsim_core::{ArrayConfig, ArrayModel};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

pub fn run_selftest() -> Vec<Check> {
    let cfg = ArrayConfig::default();
    let mut out = Vec::new();

    let v = input_dac_transfer(InputCode::from_signed(32, 6).expect("valid"), &cfg, None);
    out.push(check("dac transfer +32 -> 0.3 V", (v - 0.3).abs() < 1e-12, format!("{v}")));

    let fit = least_squares_fit::<f64>(&[10.0, 20.0, 30.0], &[21.0, 41.0, 61.0]);
    let ok = matches!(fit, Ok(f) if (f.gain - 2.0).abs() < 1e-12 && (f.offset - 1.0).abs() < 1e-12);
    out.push(check("least squares (2, 1)", ok, format!("{fit:?}")));

    let q_nom: Vec<f64> = (0..64).map(f64::from).collect();
    let e = 3.4125f64.sqrt();
    let q_act: Vec<f64> = q_nom.iter().enumerate().map(|(i, q)| q + if i % 2 == 0 { e } else { -e }).collect();
    let snr = compute_snr(&q_nom, &q_act);
    let ok = matches!(&snr, Ok(s) if (s.snr_db - 20.0).abs() < 1e-9);
    out.push(check("snr 20 dB", ok, format!("{:?}", snr.map(|s| s.snr_db))));

    let gops = throughput_1b_gops(&cfg);
    out.push(check("throughput 113 1b-GOPS", (gops / 113.0 - 1.0).abs() < 0.01, format!("{gops:.2}")));
    let eff = energy_efficiency(gops, power_from_energy(16.9e-9, &cfg)).unwrap_or(f64::NAN);
    out.push(check("efficiency 6.65 1b-TOPS/W", (eff / 6.65 - 1.0).abs() < 0.02, format!("{eff:.3}")));

    let currents: Vec<f64> = builtin_techs::<f64>().iter().map(unit_current).collect();
    let ok = (currents[0] * 1e6 - 2.6).abs() < 0.05 && (currents[2] * 1e9 - 36.0).abs() < 0.5;
    out.push(check("unit currents", ok, format!("{currents:?}")));

    let small = ArrayConfig { rows: 4, cols: 4, ..Default::default() };
    let inputs: Vec<InputCode> = [63, -20, 5, -63].iter().map(|&d| InputCode::from_signed(d, 6).expect("valid")).collect();
    let cells: Vec<i32> = (0..16).map(|k| (k * 17 % 127) - 63).collect();
    let w = WeightMatrix::from_signed(4, 4, &cells, 6).expect("valid");
    let sol = nodal_oracle(&NodalProblem::from_state(&small, &inputs, &w, 200.0, 2.0, 2.0));
    let fo = first_order_cell_currents(&small, &inputs, &w, &attenuation_map(&small, 200.0, 2.0, 2.0));
    let ok = match &sol {
        Ok(s) => {
            let floor = 0.01 * (small.v_bias - small.v_in_low) / small.r_unit;
            s.max_residual < 1e-9
                && fo.iter().zip(&s.cell_currents).all(|(a, b)| (a - b).abs() <= 0.02 * b.abs().max(floor))
        }
        Err(_) => false,
    };
    out.push(check("parasitics vs nodal solve", ok, format!("residual {:?}", sol.map(|s| s.max_residual))));

    let mut spec = ProfileSpec::default();
    spec.noise_rms = cimsim_core::nonideality::Dist::fixed(0.0);
    spec.cell_mismatch = cimsim_core::nonideality::Dist::fixed(0.0);
    spec.driver_resistance = cimsim_core::nonideality::Dist::fixed(0.0);
    spec.wire_rx = cimsim_core::nonideality::Dist::fixed(0.0);
    spec.wire_ry = cimsim_core::nonideality::Dist::fixed(0.0);
    let ok = sample_profile(&spec, cfg.rows, cfg.cols, 7)
        .and_then(|p| ArrayModel::new(cfg.clone(), p))
        .and_then(|m| {
            let params = BiscParams { continuous_trims: true, readout: Readout::Continuous, ..Default::default() };
            let mut noise = m.noise_stream(0);
            let out = run_bisc(&m, &mut noise, &params, AdcParams::of(&m))?;
            let full = WeightMatrix::filled(cfg.rows, cfg.cols, WeightCode::from_signed(63, 6)?);
            let x = vec![InputCode::from_signed(-40, 6)?; cfg.rows];
            let s = m.forward(&mut noise, &x, &full, &out.state)?;
            let nom = cimsim_core::array::mac_ideal(&x, &full.column(0), &cfg, &cfg.adc_refs())?;
            let a = AdcParams::of(&m);
            Ok(s.iter().all(|c| ((c.code_value - a.beta_d) / a.alpha_d - nom).abs() < 1e-6))
        })
        .unwrap_or(false);
    out.push(check("calibration exactness", ok, String::new()));
    out
}
