use approx::assert_relative_eq;
use cimsim_core::array::Line;
use cimsim_core::bisc::{build_test_vectors, characterize, run_bisc, AdcParams, BiscParams, Readout};
use cimsim_core::metrics::{
    compare_states, compute_snr, db_from_enob, energy_efficiency, enob_from_db, extract_column_errors, mean_var,
    measure_columns, power_from_energy, throughput_1b_gops, SnrReference, SnrStimulus, StimulusMode,
};
use cimsim_core::nonideality::{sample_profile, ProfileSpec};
use cimsim_core::{ArrayConfig, ArrayModel, CalibrationState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ramp() -> Vec<f64> {
    (0..64).map(f64::from).collect()
}

/// Zero-mean sequence with population variance exactly `var`.
fn white(n: usize, var: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let m = raw.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = raw.iter().map(|x| x - m).collect();
    let v = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    centered.iter().map(|x| x * (var / v).sqrt()).collect()
}

#[test]
fn exact_match_is_infinite_snr() {
    let q = ramp();
    let s = compute_snr(&q, &q).unwrap();
    assert!(s.snr_linear.is_infinite() && s.snr_db.is_infinite() && s.snr_db > 0.0);
    assert_eq!(s.err_mean, 0.0);
}

#[test]
fn constant_offset_is_infinite_snr_with_mean_error() {
    let q = ramp();
    let shifted: Vec<f64> = q.iter().map(|v| v + 1.5).collect();
    let s = compute_snr(&q, &shifted).unwrap();
    assert!(s.snr_linear.is_infinite());
    assert_eq!(s.err_mean, -1.5);
    assert!(s.mse_snr_db.is_finite());
}

#[test]
fn twenty_db_example() {
    let q = ramp();
    assert_relative_eq!(mean_var(&q).1, 341.25, epsilon = 1e-12);
    let e = white(64, 3.4125, 1);
    let act: Vec<f64> = q.iter().zip(&e).map(|(n, e)| n - e).collect();
    let s = compute_snr(&q, &act).unwrap();
    assert_relative_eq!(s.snr_linear, 100.0, max_relative = 1e-9);
    assert_relative_eq!(s.snr_db, 20.0, epsilon = 1e-9);
    assert_relative_eq!(s.enob, 3.03, epsilon = 5e-3);
}

#[test]
fn snr_rejects_bad_input() {
    assert!(compute_snr(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(compute_snr(&[1.0], &[1.0]).is_err());
    assert!(compute_snr(&[1.0, 2.0], &[1.0]).is_err());
}

#[test]
fn enob_round_trip() {
    for db in [-3.0f64, 0.0, 12.5, 20.0, 37.9] {
        assert!((db_from_enob(enob_from_db(db)) - db).abs() < 1e-12);
    }
    assert_relative_eq!(enob_from_db(1.76), 0.0, epsilon = 1e-15);
}

#[test]
fn column_errors_of_ideal_array() {
    let c = ArrayConfig::default();
    let model = ArrayModel::ideal(c.clone()).unwrap();
    let stim = SnrStimulus { reference: SnrReference::Continuous, ..SnrStimulus::default() };
    let cols = measure_columns(&model, &CalibrationState::nominal(&c), &stim, 3, 0).unwrap();
    for col in &cols {
        let f = extract_column_errors(&col.q_nom, &col.q_nom).unwrap();
        assert_relative_eq!(f.gain, 1.0, epsilon = 1e-12);
        assert!(f.offset.abs() < 1e-10);
    }
}

#[test]
fn ideal_array_scores_infinite_snr() {
    let c = ArrayConfig::default();
    let model = ArrayModel::ideal(c.clone()).unwrap();
    let st = CalibrationState::nominal(&c);
    let cmp = compare_states(&model, &st, &st, &SnrStimulus::default(), 9).unwrap();
    assert!(cmp.pre.columns.iter().chain(&cmp.post.columns).all(|c| c.snr.snr_db == f64::INFINITY));
}

#[test]
fn throughput_examples() {
    let c = ArrayConfig::default();
    let t = throughput_1b_gops(&c);
    assert_relative_eq!(t, 2304.0 * 49.0 * 1e6 / 1e9, max_relative = 1e-12);
    assert_eq!(t.round(), 113.0);
    let tiny = ArrayConfig { rows: 1, cols: 1, dac_bits: 0, weight_bits: 0, f_inference: 1.0, ..c.clone() };
    assert_relative_eq!(throughput_1b_gops(&tiny) * 1e9, 2.0, epsilon = 1e-12);
    let doubled = ArrayConfig { f_inference: 2e6, ..c };
    assert_relative_eq!(throughput_1b_gops(&doubled), 2.0 * t, max_relative = 1e-15);
}

#[test]
fn efficiency_examples() {
    let c = ArrayConfig::default();
    let t = throughput_1b_gops(&c);
    let p = power_from_energy(16.9e-9, &c);
    assert_relative_eq!(p, 16.9e-3, max_relative = 1e-12);
    let e = energy_efficiency(t, p).unwrap();
    assert!((e - 6.65).abs() / 6.65 < 0.015, "{e}");
    assert_eq!(energy_efficiency(0.0, p).unwrap(), 0.0);
    assert_relative_eq!(energy_efficiency(t, p / 2.0).unwrap(), 2.0 * e, max_relative = 1e-12);
    assert!(energy_efficiency(t, 0.0).is_err());
}

#[test]
fn calibration_shrinks_every_column_error() {
    let c = ArrayConfig::default();
    for seed in 1..=4 {
        shrinks_on_profile(&c, seed);
    }
}

fn shrinks_on_profile(c: &ArrayConfig, seed: u64) {
    let prof = sample_profile(&ProfileSpec::default(), 36, 32, seed).unwrap();
    let model = ArrayModel::new(c.clone(), prof).unwrap();
    let out = run_bisc(&model, &mut model.noise_stream(0), &BiscParams::default(), AdcParams::of(&model)).unwrap();
    let nominal = CalibrationState::nominal(c);
    for line in Line::BOTH {
        let tv = build_test_vectors::<f64>(8, line, c, &c.adc_refs()).unwrap();
        let pre = characterize(&model, &mut model.noise_stream(10), &nominal, &tv, 16, Readout::Continuous).unwrap();
        let post = characterize(&model, &mut model.noise_stream(11), &out.state, &tv, 16, Readout::Continuous).unwrap();
        for (a, b) in pre.iter().zip(&post) {
            let (n, q) = a.valid();
            let before = extract_column_errors(&n, &q).unwrap();
            let (n, q) = b.valid();
            let after = extract_column_errors(&n, &q).unwrap();
            assert!((after.gain - 1.0).abs() < (before.gain - 1.0).abs(), "seed {seed} column {} {:?}", a.column, line);
            assert!(after.offset.abs() < before.offset.abs(), "seed {seed} column {} {:?}", a.column, line);
        }
    }
}

#[test]
fn sweep_stimulus_is_supported() {
    let c = ArrayConfig::default();
    let model = ArrayModel::ideal(c.clone()).unwrap();
    let stim = SnrStimulus { mode: StimulusMode::Sweep, instances: 254, ..SnrStimulus::default() };
    let cols = measure_columns(&model, &CalibrationState::nominal(&c), &stim, 0, 0).unwrap();
    assert_eq!(cols[0].q_nom.len(), 254);
    assert!(mean_var(&cols[0].q_nom).1 > 0.0);
    assert!(measure_columns(&model, &CalibrationState::nominal(&c), &SnrStimulus { instances: 1, ..stim }, 0, 0).is_err());
}

proptest! {
    #[test]
    fn snr_ignores_constant_shift(seed in any::<u64>(), shift in -20.0f64..20.0) {
        let q = ramp();
        let e = white(64, 2.0, seed);
        let act: Vec<f64> = q.iter().zip(&e).map(|(n, e)| n - e).collect();
        let moved: Vec<f64> = act.iter().map(|a| a + shift).collect();
        let a = compute_snr(&q, &act).unwrap();
        let b = compute_snr(&q, &moved).unwrap();
        prop_assert!((a.snr_linear - b.snr_linear).abs() <= 1e-9 * a.snr_linear);
    }

    #[test]
    fn snr_scales_with_error_squared(seed in any::<u64>(), k in 0.1f64..10.0) {
        let q = ramp();
        let e = white(64, 1.0, seed);
        let act: Vec<f64> = q.iter().zip(&e).map(|(n, e)| n - e).collect();
        let scaled: Vec<f64> = q.iter().zip(&e).map(|(n, e)| n - k * e).collect();
        let a = compute_snr(&q, &act).unwrap();
        let b = compute_snr(&q, &scaled).unwrap();
        prop_assert!((b.snr_linear * k * k - a.snr_linear).abs() <= 1e-9 * a.snr_linear);
    }

    #[test]
    fn enob_formula_round_trips(db in -50.0f64..100.0) {
        prop_assert!((enob_from_db(db_from_enob(db)) - db).abs() < 1e-12);
        prop_assert!((db_from_enob(enob_from_db(db)) - db).abs() < 1e-12);
    }
}
