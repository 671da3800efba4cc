//! Scenario orchestration: profile, sweeps, self-calibration, SNR and the MLP evaluation.
use std::path::Path;

use anyhow::Context;
use cimsim_core::array::Line;
use cimsim_core::bisc::{adc_guard, build_test_vectors, characterize, run_bisc, AdcParams, BiscOutcome, Readout};
use cimsim_core::dnn::{
    calibrate_ranges, evaluate, load_mnist_dir, quantize_mlp, train_mlp, Dataset, FloatMlp, QuantizedMlp,
};
use cimsim_core::metrics::{compare_states, energy_efficiency, power_from_energy, throughput_1b_gops, SnrComparison};
use cimsim_core::nonideality::sample_profile;
use cimsim_core::{lit, ArrayModel, CalibrationState};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::bundle::{num, BundleWriter, Stamp};
use crate::error::Failure;
use crate::models::{load_float, model_json, FLOAT_KIND, QUANTIZED_KIND};
use crate::scenario::{DnnSection, Scenario};

/// Noise streams of the pipeline stages; the SNR comparison uses streams 1 and 2.
const STREAM_BISC: u64 = 0;
const STREAM_SWEEP_PRE: u64 = 10;
const STREAM_SWEEP_POST: u64 = 11;
const STREAM_DNN_UNCALIBRATED: u64 = 1 << 32;
const STREAM_DNN_CALIBRATED: u64 = 2 << 32;

/// Optional stages to execute after profile sampling and calibration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunPlan {
    pub sweeps: bool,
    pub snr: bool,
    pub dnn: bool,
}

impl RunPlan {
    pub const FULL: RunPlan = RunPlan { sweeps: true, snr: true, dnn: true };
    pub const CALIBRATE: RunPlan = RunPlan { sweeps: true, snr: false, dnn: false };
    pub const SNR: RunPlan = RunPlan { sweeps: false, snr: true, dnn: false };
    pub const EVALUATE: RunPlan = RunPlan { sweeps: false, snr: false, dnn: true };
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Payload of `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub status: String,
    pub stages: Vec<StageRecord>,
    pub summary: Map<String, Value>,
    pub files: Vec<String>,
}

pub struct RunOutcome {
    pub report: Report,
    pub failure: Option<Failure>,
}

#[derive(Serialize)]
struct SweepRow {
    column: usize,
    line: &'static str,
    point: usize,
    input_code: i32,
    q_nom: f64,
    q_act: Option<f64>,
}

#[derive(Serialize)]
struct BiscRow {
    column: usize,
    line: &'static str,
    g_tot: f64,
    eps_tot: f64,
    alpha_a: f64,
    beta_a: f64,
    residual_rms: f64,
    clipped_points: usize,
    failed: bool,
    pot_code: Option<u32>,
    cal_code: Option<u32>,
    r_sa: f64,
    v_cal: f64,
    clamped: bool,
}

#[derive(Serialize)]
struct SnrRow {
    column: usize,
    pre_snr_db: f64,
    post_snr_db: f64,
    gain_db: f64,
    pre_enob: f64,
    post_enob: f64,
    pre_err_mean: f64,
    post_err_mean: f64,
    pre_err_std: f64,
    post_err_std: f64,
    pre_gain: f64,
    pre_offset: f64,
    post_gain: f64,
    post_offset: f64,
    pre_mse_snr_db: f64,
    post_mse_snr_db: f64,
}

#[derive(Serialize)]
struct DnnRow {
    condition: &'static str,
    accuracy: f64,
    correct: usize,
    total: usize,
}

struct Runner<'a> {
    sc: &'a Scenario,
    out: BundleWriter,
    stages: Vec<StageRecord>,
    summary: Map<String, Value>,
}

impl Runner<'_> {
    fn stage<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> anyhow::Result<R>) -> Result<R, Failure> {
        log::info!("stage {name}");
        match f(self) {
            Ok(r) => {
                self.stages.push(StageRecord { name: name.into(), status: "ok".into(), error: None });
                Ok(r)
            }
            Err(e) => {
                let msg = format!("{e:#}");
                log::error!("stage {name} failed: {msg}");
                self.stages.push(StageRecord { name: name.into(), status: "failed".into(), error: Some(msg.clone()) });
                Err(Failure::stage(name, msg))
            }
        }
    }

    fn skip(&mut self, name: &str) {
        self.stages.push(StageRecord { name: name.into(), status: "skipped".into(), error: None });
    }
}

/// Runs the scenario into `out_dir`, writing a report even when a stage fails.
pub fn run_scenario(sc: &Scenario, out_dir: &Path, plan: RunPlan) -> Result<RunOutcome, Failure> {
    sc.validate()?;
    let stamp = Stamp { scenario_hash: sc.hash(), seed: sc.seed };
    let out = BundleWriter::create(out_dir, stamp)?;
    let mut r = Runner { sc, out, stages: Vec::new(), summary: Map::new() };
    let failure = execute(&mut r, plan).err();
    let status = if failure.is_some() { "failed" } else { "ok" };
    let mut files = r.out.files().to_vec();
    files.push("report.json".into());
    let report = Report { status: status.into(), stages: r.stages.clone(), summary: r.summary.clone(), files };
    r.out
        .json("report.json", "report", &report)
        .map_err(|e| Failure::stage("report", e))?;
    Ok(RunOutcome { report, failure })
}

fn execute(r: &mut Runner, plan: RunPlan) -> Result<(), Failure> {
    let sc = r.sc;
    let cfg = sc.array.clone();
    r.stage("metrics", |r| {
        let gops = throughput_1b_gops(&cfg);
        let power = power_from_energy(sc.metrics.energy_per_inference, &cfg);
        let eff = energy_efficiency(gops, power)?;
        r.summary.insert(
            "metrics".into(),
            json!({ "throughput_1b_gops": num(gops), "power_w": num(power), "efficiency_1b_tops_per_w": num(eff) }),
        );
        Ok(())
    })?;

    let model = r.stage("profile", |r| {
        let profile = sample_profile(&sc.profile, cfg.rows, cfg.cols, sc.seed)?;
        let model = ArrayModel::new(cfg.clone(), profile)?;
        r.out.json("profile.json", "profile", model.profile())?;
        Ok(model)
    })?;

    let nominal = CalibrationState::nominal(&cfg);
    if plan.sweeps {
        r.stage("sweep_pre", |r| sweep(r, &model, &nominal, STREAM_SWEEP_PRE, "sweep_pre.csv"))?;
    } else {
        r.skip("sweep_pre");
    }

    let bisc = r.stage("bisc", |r| {
        let mut noise = model.noise_stream(STREAM_BISC);
        let outcome = run_bisc(&model, &mut noise, &sc.bisc, AdcParams::of(&model))?;
        write_bisc(r, &outcome)?;
        Ok(outcome)
    })?;

    if plan.sweeps {
        r.stage("sweep_post", |r| sweep(r, &model, &bisc.state, STREAM_SWEEP_POST, "sweep_post.csv"))?;
    } else {
        r.skip("sweep_post");
    }

    if plan.snr {
        r.stage("snr", |r| {
            let cmp = compare_states(&model, &nominal, &bisc.state, &sc.snr, sc.seed)?;
            write_snr(r, &cmp)
        })?;
    } else {
        r.skip("snr");
    }

    match (&sc.dnn, plan.dnn) {
        (Some(d), true) => r.stage("dnn", |r| run_dnn(r, d, &model, &bisc.state))?,
        _ => r.skip("dnn"),
    }
    Ok(())
}

fn sweep(r: &mut Runner, model: &ArrayModel, state: &CalibrationState, stream: u64, name: &str) -> anyhow::Result<()> {
    let cfg = model.cfg();
    let refs = adc_guard(&cfg.adc_refs(), lit(r.sc.bisc.guard_margin))?;
    let st = state.with_refs(refs);
    let mut noise = model.noise_stream(stream);
    let mut rows = Vec::new();
    for line in Line::BOTH {
        let tv = build_test_vectors(r.sc.bisc.z, line, cfg, &refs)?;
        for m in characterize(model, &mut noise, &st, &tv, r.sc.bisc.repeats, Readout::Quantized)? {
            for (point, (&q_nom, &q_act)) in m.q_nom.iter().zip(&m.q_act).enumerate() {
                rows.push(SweepRow {
                    column: m.column,
                    line: line.name(),
                    point,
                    input_code: tv.codes[point].signed(),
                    q_nom,
                    q_act,
                });
            }
        }
    }
    r.out.csv(name, &rows)
}

fn write_bisc(r: &mut Runner, outcome: &BiscOutcome<f64>) -> anyhow::Result<()> {
    let rows: Vec<BiscRow> = outcome
        .results
        .iter()
        .map(|c| BiscRow {
            column: c.column,
            line: c.line.name(),
            g_tot: c.g_tot,
            eps_tot: c.eps_tot,
            alpha_a: c.alpha_a,
            beta_a: c.beta_a,
            residual_rms: c.residual_rms,
            clipped_points: c.clipped_points,
            failed: c.failed,
            pot_code: c.trim.pot_code,
            cal_code: c.trim.cal_code,
            r_sa: c.trim.r_sa,
            v_cal: c.trim.v_cal,
            clamped: c.trim.clamped,
        })
        .collect();
    r.out.csv("bisc.csv", &rows)?;
    r.out.json("calibration_state.json", "calibration-state", &outcome.state)?;
    let failed = outcome.results.iter().filter(|c| c.failed).count();
    let clamped = outcome.results.iter().filter(|c| c.trim.clamped).count();
    r.summary.insert(
        "bisc".into(),
        json!({ "lines": outcome.results.len(), "failed_lines": failed, "clamped_lines": clamped, "warnings": outcome.warnings }),
    );
    Ok(())
}

fn write_snr(r: &mut Runner, cmp: &SnrComparison<f64>) -> anyhow::Result<()> {
    let gains = cmp.gains_db();
    let rows: Vec<SnrRow> = cmp
        .pre
        .columns
        .iter()
        .zip(&cmp.post.columns)
        .zip(&gains)
        .map(|((a, b), &g)| SnrRow {
            column: a.column,
            pre_snr_db: a.snr.snr_db,
            post_snr_db: b.snr.snr_db,
            gain_db: g,
            pre_enob: a.snr.enob,
            post_enob: b.snr.enob,
            pre_err_mean: a.snr.err_mean,
            post_err_mean: b.snr.err_mean,
            pre_err_std: a.snr.err_std,
            post_err_std: b.snr.err_std,
            pre_gain: a.fit.gain,
            pre_offset: a.fit.offset,
            post_gain: b.fit.gain,
            post_offset: b.fit.offset,
            pre_mse_snr_db: a.snr.mse_snr_db,
            post_mse_snr_db: b.snr.mse_snr_db,
        })
        .collect();
    r.out.csv("snr.csv", &rows)?;
    let n = rows.len().max(1) as f64;
    let improved = gains.iter().filter(|&&g| g > 0.0).count();
    let in_band = rows.iter().filter(|row| (18.0..=24.0).contains(&row.post_snr_db)).count();
    let min_gain = gains.iter().copied().fold(f64::INFINITY, f64::min);
    r.summary.insert(
        "snr".into(),
        json!({
            "columns": rows.len(),
            "mean_pre_db": num(cmp.pre.mean_db()),
            "mean_post_db": num(cmp.post.mean_db()),
            "mean_gain_db": num(cmp.mean_gain_db()),
            "min_gain_db": num(min_gain),
            "mean_pre_enob": num(cmp.pre.mean_enob()),
            "mean_post_enob": num(cmp.post.mean_enob()),
            "mean_enob_gain": num(cmp.mean_enob_gain()),
            "columns_improved": improved,
            "post_in_18_24_db_fraction": num(in_band as f64 / n),
        }),
    );
    Ok(())
}

/// Float reference trained (or loaded) on the images outside the seeded held-out subset.
pub fn prepare_float(d: &DnnSection, seed: u64) -> anyhow::Result<(FloatMlp, Dataset, Dataset)> {
    let data = load_mnist_dir(&d.data_dir)?;
    let (train, test) = data.split(d.test_count, seed)?;
    let float = match &d.float_model {
        Some(p) => load_float(p)?,
        None => train_mlp(&train, 10, &d.train, seed)?,
    };
    Ok((float, train, test))
}

/// Quantizes and range-calibrates on the first training samples.
pub fn prepare_quantized(d: &DnnSection, cfg: &cimsim_core::ArrayConfig, float: &FloatMlp, train: &Dataset) -> anyhow::Result<QuantizedMlp> {
    let mut q = quantize_mlp(float, cfg)?;
    let n = d.ranges.samples.min(train.len());
    let samples: Vec<Vec<f32>> = (0..n).map(|i| train.input(i)).collect();
    calibrate_ranges(&mut q, float, &samples, cfg, &d.ranges)?;
    Ok(q)
}

fn run_dnn(r: &mut Runner, d: &DnnSection, model: &ArrayModel, cal: &CalibrationState) -> anyhow::Result<()> {
    let sc = r.sc;
    let cfg = model.cfg();
    let (float, train, test) = prepare_float(d, sc.seed).context("preparing float model")?;
    let q = prepare_quantized(d, cfg, &float, &train).context("quantizing")?;
    r.out.raw("float_model.json", model_json(FLOAT_KIND, sc.seed, &float).as_bytes())?;
    r.out.raw("quantized_model.json", model_json(QUANTIZED_KIND, sc.seed, &q).as_bytes())?;

    let ideal = ArrayModel::ideal(cfg.clone())?;
    let nominal = CalibrationState::nominal(cfg);
    let conditions = [
        ("ideal", &ideal, &nominal, 0),
        ("uncalibrated", model, &nominal, STREAM_DNN_UNCALIBRATED),
        ("calibrated", model, cal, STREAM_DNN_CALIBRATED),
    ];
    let float_correct = (0..test.len()).filter(|&i| float.predict(&test.input(i)) == test.label(i) as usize).count();
    let mut rows = vec![DnnRow {
        condition: "float",
        accuracy: float_correct as f64 / test.len() as f64,
        correct: float_correct,
        total: test.len(),
    }];
    for (name, m, state, stream) in conditions {
        let e = evaluate(&test, &q, m, state, d.infer.clone(), stream)?;
        log::info!("{name}: {:.2}%", 100.0 * e.accuracy);
        rows.push(DnnRow { condition: name, accuracy: e.accuracy, correct: e.correct, total: e.total });
    }
    r.out.csv("dnn.csv", &rows)?;
    let mut s = Map::new();
    s.insert("test_images".into(), json!(test.len()));
    for row in &rows {
        s.insert(format!("{}_accuracy", row.condition), num(row.accuracy));
    }
    r.summary.insert("dnn".into(), Value::Object(s));
    Ok(())
}
