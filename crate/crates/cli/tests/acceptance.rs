//! One PASS/FAIL line per acceptance criterion. Criteria known to be unreachable are listed
//! in `EXPECTED_FAIL`; the run exits non-zero on any other failure and on an expected failure
//! that starts passing.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use cimsim_cli::bundle::read_document;
use cimsim_cli::{run_scenario, RunPlan, Scenario};
use cimsim_core::array::{InputCode, Line, WeightMatrix};
use cimsim_core::bisc::{build_test_vectors, least_squares_fit, run_bisc, AdcParams, BiscParams, Readout};
use cimsim_core::metrics::{energy_efficiency, power_from_energy, throughput_1b_gops};
use cimsim_core::nonideality::{
    attenuation_map, first_order_cell_currents, nodal_oracle, LinePair, NodalProblem, ProfileSpec,
};
use cimsim_core::techproj::{builtin_techs, improvement_factors, round_sig, unit_current};
use cimsim_core::{ArrayConfig, ArrayModel, NonidealityProfile, TechSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const EXPECTED_FAIL: &[&str] = &["6.mor_unit_current", "6.mor_power_factor"];

struct Tally {
    unexpected: Vec<String>,
}

impl Tally {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        let expected_fail = EXPECTED_FAIL.contains(&id);
        if pass == expected_fail {
            self.unexpected.push(id.to_string());
        }
    }

    fn timed(&mut self, id: &str, elapsed: Duration, limit: Duration) {
        self.check(id, elapsed < limit, format!("{:.2} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()));
    }
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn summary(dir: &Path) -> Value {
    read_document(&dir.join("report.json"), Some("report")).unwrap().payload["summary"].clone()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn calibration_exactness(t: &mut Tally) {
    let cfg = ArrayConfig::default();
    let params = BiscParams { repeats: 1, continuous_trims: true, readout: Readout::Continuous, ..BiscParams::default() };
    let vectors: Vec<_> =
        Line::BOTH.iter().map(|&l| build_test_vectors::<f64>(params.z, l, &cfg, &cfg.adc_refs()).unwrap()).collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failed_lines = 0;
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = NonidealityProfile::ideal(cfg.rows, cfg.cols);
        for c in 0..cfg.cols {
            p.alpha[c] = LinePair { pos: rng.gen_range(0.8..=1.2), neg: rng.gen_range(0.8..=1.2) };
            p.beta[c] = LinePair { pos: rng.gen_range(-0.03..=0.03), neg: rng.gen_range(-0.03..=0.03) };
        }
        p.alpha_adc = rng.gen_range(0.95..=1.05);
        p.beta_adc = rng.gen_range(-2.0..=2.0);
        let model = ArrayModel::new(cfg.clone(), p).unwrap();
        let adc = AdcParams::of(&model);
        let out = run_bisc(&model, &mut model.noise_stream(0), &params, adc).unwrap();
        failed_lines += out.results.iter().filter(|r| r.failed).count();
        for tv in &vectors {
            for (k, &q_nom) in tv.q_nom.iter().enumerate() {
                let samples = model
                    .forward(&mut model.noise_stream(0), &tv.inputs(k, cfg.rows), &tv.weights, &out.state)
                    .unwrap();
                for s in samples {
                    worst = worst.max(((s.code_value - adc.beta_d) / adc.alpha_d - q_nom).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    t.check(
        "1.linear_inversion",
        worst <= 1e-6 && failed_lines == 0,
        format!("500 profiles, worst test-point error {worst:.2e} codes (limit 1e-6), {failed_lines} failed lines"),
    );
    t.timed("1.runtime", elapsed, Duration::from_secs(10));
}

/// Least-squares line through the points by QR of the design matrix `[q, 1]`.
fn regression_oracle(q_nom: &[f64], q_act: &[f64]) -> (f64, f64) {
    let n = q_nom.len();
    let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { q_nom[i] } else { 1.0 });
    let b = DVector::from_column_slice(q_act);
    let qr = a.qr();
    let rhs = qr.q().transpose() * b;
    let x = qr.r().solve_upper_triangular(&rhs).unwrap();
    (x[0], x[1])
}

fn least_squares(t: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut worst_exact = 0.0f64;
    for _ in 0..1000 {
        let z = rng.gen_range(2..=64);
        let gain: f64 = rng.gen_range(0.5..1.5);
        let offset: f64 = rng.gen_range(-10.0..10.0);
        let q: Vec<f64> = (0..z).map(|_| rng.gen_range(-10.0..75.0)).collect();
        let noisy: Vec<f64> = q.iter().map(|&x| gain * x + offset + rng.gen_range(-2.0..2.0)).collect();
        let clean: Vec<f64> = q.iter().map(|&x| gain * x + offset).collect();
        let Ok(fit) = least_squares_fit(&q, &noisy) else { continue };
        let (g, e) = regression_oracle(&q, &noisy);
        worst = worst.max((fit.gain - g).abs() / g.abs().max(1.0)).max((fit.offset - e).abs() / e.abs().max(1.0));
        let exact = least_squares_fit(&q, &clean).unwrap();
        worst_exact = worst_exact.max((exact.gain - gain).abs()).max((exact.offset - offset).abs());
    }
    t.check("2.ls_vs_oracle", worst <= 1e-10, format!("1000 instances, worst deviation {worst:.2e} (limit 1e-10)"));
    t.check("2.ls_noiseless_exact", worst_exact <= 1e-10, format!("worst recovery error {worst_exact:.2e}"));
}

fn snr_and_mnist(t: &mut Tally, first: &Path, elapsed: Duration) {
    let s = summary(first);
    let snr = &s["snr"];
    let improved = snr["columns_improved"].as_u64().unwrap_or(0);
    let columns = snr["columns"].as_u64().unwrap_or(0);
    let pre = f(&snr["mean_pre_db"]);
    t.check("3.pre_snr_band", (12.0..=18.0).contains(&pre), format!("mean pre-calibration SNR {pre:.2} dB (band 12-18)"));
    t.check("3.every_column_improved", improved == columns && columns > 0, format!("{improved} of {columns} columns"));
    let gain = f(&snr["mean_gain_db"]);
    t.check("3.mean_gain", gain >= 5.0, format!("mean SNR gain {gain:.2} dB (min 5), worst {:.2} dB", f(&snr["min_gain_db"])));
    let frac = f(&snr["post_in_18_24_db_fraction"]);
    t.check(
        "3.post_band",
        frac >= 0.9,
        format!("{:.0}% of columns in 18-24 dB after calibration (min 90%), mean {:.2} dB", 100.0 * frac, f(&snr["mean_post_db"])),
    );
    let enob = f(&snr["mean_enob_gain"]);
    t.check(
        "4.enob_gain",
        (enob - 1.0).abs() <= 0.3,
        format!("mean ENOB {:.2} -> {:.2}, gain {enob:.2} bits (1 +/- 0.3)", f(&snr["mean_pre_enob"]), f(&snr["mean_post_enob"])),
    );

    let d = &s["dnn"];
    let (fl, ideal, uncal, cal) =
        (f(&d["float_accuracy"]), f(&d["ideal_accuracy"]), f(&d["uncalibrated_accuracy"]), f(&d["calibrated_accuracy"]));
    let n = d["test_images"].as_u64().unwrap_or(0);
    t.check("5.test_subset", n == 2000, format!("{n} held-out images"));
    t.check("5.float_model", fl >= 0.935, format!("float accuracy {:.2}% (min 93.5)", 100.0 * fl));
    t.check("5.ideal_array", ideal >= 0.93, format!("ideal-array accuracy {:.2}% (min 93)", 100.0 * ideal));
    t.check(
        "5.uncalibrated_drop",
        ideal - uncal >= 0.03,
        format!("uncalibrated accuracy {:.2}%, drop {:.2} points (min 3)", 100.0 * uncal, 100.0 * (ideal - uncal)),
    );
    t.check(
        "5.calibrated_recovery",
        ideal - cal <= 0.02,
        format!("calibrated accuracy {:.2}%, {:.2} points below ideal (max 2)", 100.0 * cal, 100.0 * (ideal - cal)),
    );
    t.timed("3.runtime", elapsed, Duration::from_secs(120));
    t.timed("5.runtime", elapsed, Duration::from_secs(900));
}

fn tech(name: &str) -> TechSpec {
    builtin_techs::<f64>().into_iter().find(|t| t.name == name).unwrap()
}

fn golden_numbers(t: &mut Tally) {
    let start = Instant::now();
    let cfg = ArrayConfig::default();
    let gops = throughput_1b_gops(&cfg);
    t.check("6.throughput", (gops / 113.0 - 1.0).abs() <= 0.01, format!("{gops:.3} 1b-GOPS (113 +/- 1%)"));
    let eff = energy_efficiency(gops, power_from_energy(16.9e-9, &cfg)).unwrap();
    t.check("6.efficiency", (eff / 6.65 - 1.0).abs() <= 0.02, format!("{eff:.3} 1b-TOPS/W (6.65 +/- 2%)"));

    let base = tech("Polysilicon");
    let currents = [("polysilicon", "Polysilicon", 1e6, 2.6, "uA"), ("mor", "MOR", 1e6, 0.15, "uA"), ("wox", "WOx", 1e9, 36.0, "nA"), ("rram", "RRAM", 1e6, 33.0, "uA")];
    for (id, name, scale, want, unit) in currents {
        let got = round_sig(unit_current(&tech(name)) * scale, 2);
        t.check(&format!("6.{id}_unit_current"), got == want, format!("{got} {unit} (expected {want} {unit})"));
    }
    let mor = improvement_factors(&tech("MOR"), &base).unwrap();
    let area = round_sig(mor.area, 2);
    t.check("6.mor_area_factor", area == 14.0, format!("{area}x (expected 14x)"));
    let power = round_sig(mor.power, 2);
    t.check("6.mor_power_factor", power == 17.0, format!("{power}x (expected 17x)"));
    let wox = round_sig(improvement_factors(&tech("WOx"), &base).unwrap().power, 1);
    t.check("6.wox_power_factor", wox == 70.0, format!("{wox}x (expected 70x)"));
    let rram = round_sig(improvement_factors(&tech("RRAM"), &base).unwrap().power, 1);
    t.check("6.rram_power_factor", rram == 0.08, format!("{rram}x (expected 0.08x)"));
    t.timed("6.runtime", start.elapsed(), Duration::from_secs(1));
}

fn parasitics(t: &mut Tally) {
    let spec = ProfileSpec::default();
    let (r_d, r_x, r_y) = (spec.driver_resistance.mean, spec.wire_rx.mean, spec.wire_ry.mean);
    for n in [4usize, 8] {
        let cfg = ArrayConfig { rows: n, cols: n, ..ArrayConfig::default() };
        let map = attenuation_map(&cfg, r_d, r_x, r_y);
        let i_fs = 0.2 / cfg.r_unit;
        let mut worst_ratio = 0.0f64;
        let mut worst_residual = 0.0f64;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inputs: Vec<InputCode> = (0..n).map(|_| InputCode::from_signed(rng.gen_range(-63..=63), 6).unwrap()).collect();
            let cells: Vec<i32> = (0..n * n).map(|_| rng.gen_range(-63..=63)).collect();
            let wm = WeightMatrix::from_signed(n, n, &cells, 6).unwrap();
            let sol = nodal_oracle(&NodalProblem::from_state(&cfg, &inputs, &wm, r_d, r_x, r_y)).unwrap();
            let fo = first_order_cell_currents(&cfg, &inputs, &wm, &map);
            for (a, b) in fo.iter().zip(&sol.cell_currents) {
                worst_ratio = worst_ratio.max((a - b).abs() / b.abs().max(0.01 * i_fs));
            }
            worst_residual = worst_residual.max(sol.max_residual);
        }
        t.check(
            &format!("7.first_order_{n}x{n}"),
            worst_ratio <= 0.02,
            format!("100 states, worst cell deviation {:.3}% (limit 2%)", 100.0 * worst_ratio),
        );
        t.check(
            &format!("7.kirchhoff_residual_{n}x{n}"),
            worst_residual < 1e-9,
            format!("worst residual {worst_residual:.2e} A (limit 1e-9)"),
        );
    }
}

fn bundle(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "run_meta.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(t: &mut Tally, first: &Path, sc: &Scenario) {
    let again = tempfile::tempdir().unwrap();
    run_scenario(sc, again.path(), RunPlan::FULL).unwrap();
    let (a, b) = (bundle(first), bundle(again.path()));
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    t.check(
        "8.default_rerun",
        a.len() == b.len() && differing.is_empty(),
        format!("{} artifacts compared, differing: {differing:?}", a.len()),
    );
    let ideal = Scenario::load(&scenarios().join("ideal.toml")).unwrap();
    let (x, y) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_scenario(&ideal, x.path(), RunPlan::SNR).unwrap();
    run_scenario(&ideal, y.path(), RunPlan::SNR).unwrap();
    t.check("8.ideal_rerun", bundle(x.path()) == bundle(y.path()), "ideal scenario bundle".into());
}

fn main() {
    let mut t = Tally { unexpected: Vec::new() };
    calibration_exactness(&mut t);
    least_squares(&mut t);

    let sc = Scenario::load(&scenarios().join("default.toml")).unwrap();
    let first = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let outcome = run_scenario(&sc, first.path(), RunPlan::FULL).unwrap();
    let elapsed = start.elapsed();
    assert!(outcome.failure.is_none(), "default scenario failed: {:?}", outcome.report.stages);
    snr_and_mnist(&mut t, first.path(), elapsed);

    golden_numbers(&mut t);
    parasitics(&mut t);
    determinism(&mut t, first.path(), &sc);

    if !t.unexpected.is_empty() {
        eprintln!("unexpected results: {:?}", t.unexpected);
        std::process::exit(1);
    }
    println!("acceptance: all criteria as expected");
}
