use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cimsim_core::bisc::{run_bisc, AdcParams};
use cimsim_core::dnn::{argmax, load_mnist_dir, train_mlp, InferOptions, InferenceEngine, TrainConfig};
use cimsim_core::nonideality::sample_profile;
use cimsim_core::techproj::{builtin_techs, improvement_factors, round_sig, unit_current};
use cimsim_core::{ArrayConfig, ArrayModel, CalibrationState, TechSpec};
use cimsim_cli::bundle::{read_document, write_sidecar, Stamp};
use cimsim_cli::models::{load_float, load_quantized, save_model, FLOAT_KIND, QUANTIZED_KIND};
use cimsim_cli::run::{prepare_quantized, run_scenario, RunPlan};
use cimsim_cli::scenario::{DnnSection, Scenario};
use cimsim_cli::selftest::run_selftest;
use cimsim_cli::Failure;
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "cimsim", version, about = "Resistive compute-in-memory array simulator")]
struct Cli {
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full scenario: profile, sweeps, calibration, SNR and optional MLP evaluation.
    Simulate(ScenarioArgs),
    /// Sample the profile and run self-calibration with before/after sweeps.
    Calibrate(ScenarioArgs),
    /// Compare per-column SNR before and after calibration.
    Snr(ScenarioArgs),
    /// Evaluate the quantized MLP under ideal, uncalibrated and calibrated conditions.
    Evaluate(ScenarioArgs),
    /// Train the float reference MLP.
    TrainRef {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        test_count: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
    },
    /// Quantize a float model and calibrate its activation and ADC ranges.
    Quantize {
        #[arg(long)]
        float: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        test_count: usize,
    },
    /// Classify one image of the dataset.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        index: usize,
        /// Scenario supplying the array and error profile; an ideal array otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Condition::Calibrated)]
        condition: Condition,
    },
    /// Print unit currents and improvement factors of resistor technologies.
    Extrapolate {
        /// TOML file with `[[tech]]` entries; the first entry is the baseline.
        #[arg(long)]
        techs: Option<PathBuf>,
    },
    /// Validate a report bundle and print its summary.
    Report { path: PathBuf },
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(clap::Args)]
struct ScenarioArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the scenario's.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Condition {
    Uncalibrated,
    Calibrated,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TechFile {
    tech: Vec<TechSpec>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

fn stage<E: std::fmt::Display>(name: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::stage(name, e)
}

fn run_plan(args: ScenarioArgs, plan: RunPlan, command: &str) -> Result<(), Failure> {
    let sc = Scenario::load(&args.config)?;
    if plan == RunPlan::EVALUATE && sc.dnn.is_none() {
        return Err(Failure::config("scenario has no [dnn] section"));
    }
    let out = args.out.unwrap_or_else(|| sc.output_dir.clone());
    let outcome = run_scenario(&sc, &out, plan)?;
    let stamp = Stamp { scenario_hash: sc.hash(), seed: sc.seed };
    write_sidecar(&out, &stamp, command).map_err(stage("report"))?;
    print_summary(&serde_json::Value::Object(outcome.report.summary.clone()));
    println!("bundle written to {}", out.display());
    match outcome.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn print_summary(summary: &serde_json::Value) {
    if let Some(map) = summary.as_object() {
        for (section, values) in map {
            println!("[{section}]");
            if let Some(obj) = values.as_object() {
                for (k, v) in obj {
                    println!("  {k} = {v}");
                }
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate(a) => run_plan(a, RunPlan::FULL, "simulate"),
        Command::Calibrate(a) => run_plan(a, RunPlan::CALIBRATE, "calibrate"),
        Command::Snr(a) => run_plan(a, RunPlan::SNR, "snr"),
        Command::Evaluate(a) => run_plan(a, RunPlan::EVALUATE, "evaluate"),
        Command::TrainRef { data, out, seed, test_count, epochs } => {
            let ds = load_mnist_dir(&data).map_err(|e| Failure::config(e.to_string()))?;
            let (train, test) = ds.split(test_count, seed).map_err(|e| Failure::config(e.to_string()))?;
            let cfg = TrainConfig { epochs, ..Default::default() };
            let model = train_mlp(&train, 10, &cfg, seed).map_err(stage("train"))?;
            println!("float test accuracy: {:.2}% on {} images", 100.0 * model.accuracy(&test), test.len());
            save_model(&out, FLOAT_KIND, seed, &model)
        }
        Command::Quantize { float, data, out, seed, test_count } => {
            let model = load_float(&float)?;
            let ds = load_mnist_dir(&data).map_err(|e| Failure::config(e.to_string()))?;
            let (train, _) = ds.split(test_count, seed).map_err(|e| Failure::config(e.to_string()))?;
            let section = dnn_section(&data, test_count);
            let q = prepare_quantized(&section, &ArrayConfig::default(), &model, &train).map_err(stage("quantize"))?;
            for (l, layer) in q.layers.iter().enumerate() {
                println!(
                    "layer {l}: {}x{} weight scale {:.4e} input scale {:.4} ADC half-window {:.2} mV",
                    layer.inputs,
                    layer.outputs,
                    layer.weight_scale,
                    layer.input_scale,
                    1e3 * layer.adc_half_window
                );
            }
            save_model(&out, QUANTIZED_KIND, seed, &q)
        }
        Command::Infer { model, data, index, config, condition } => infer_one(&model, &data, index, config.as_deref(), condition),
        Command::Extrapolate { techs } => extrapolate(techs.as_deref()),
        Command::Report { path } => {
            let file = if path.is_dir() { path.join("report.json") } else { path };
            let doc = read_document(&file, Some("report"))?;
            println!("scenario {} seed {}", doc.scenario_hash, doc.seed);
            println!("status: {}", doc.payload.get("status").and_then(|s| s.as_str()).unwrap_or("unknown"));
            if let Some(summary) = doc.payload.get("summary") {
                print_summary(summary);
            }
            Ok(())
        }
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Failure::stage("selftest", "one or more checks failed"))
            }
        }
    }
}

fn dnn_section(data: &Path, test_count: usize) -> DnnSection {
    DnnSection {
        data_dir: data.to_path_buf(),
        test_count,
        float_model: None,
        train: TrainConfig::default(),
        ranges: Default::default(),
        infer: InferOptions::default(),
    }
}

fn infer_one(model: &Path, data: &Path, index: usize, config: Option<&Path>, condition: Condition) -> Result<(), Failure> {
    let q = load_quantized(model)?;
    let ds = load_mnist_dir(data).map_err(|e| Failure::config(e.to_string()))?;
    if index >= ds.len() {
        return Err(Failure::config(format!("index {index} out of range for {} images", ds.len())));
    }
    let (array, cal, options) = match config {
        None => {
            let cfg = ArrayConfig::default();
            let cal = CalibrationState::nominal(&cfg);
            (ArrayModel::ideal(cfg).map_err(|e| Failure::config(e.to_string()))?, cal, InferOptions::default())
        }
        Some(p) => {
            let sc = Scenario::load(p)?;
            let profile = sample_profile(&sc.profile, sc.array.rows, sc.array.cols, sc.seed).map_err(stage("profile"))?;
            let array = ArrayModel::new(sc.array.clone(), profile).map_err(stage("profile"))?;
            let cal = match condition {
                Condition::Uncalibrated => CalibrationState::nominal(&sc.array),
                Condition::Calibrated => {
                    let mut noise = array.noise_stream(0);
                    run_bisc(&array, &mut noise, &sc.bisc, AdcParams::of(&array)).map_err(stage("bisc"))?.state
                }
            };
            let options = sc.dnn.map(|d| d.infer).unwrap_or_default();
            (array, cal, options)
        }
    };
    let engine = InferenceEngine::new(&array, &q, &cal, options).map_err(|e| Failure::config(e.to_string()))?;
    let mut noise = array.noise_stream(index as u64);
    let logits = engine.logits(&ds.input(index), &mut noise).map_err(stage("infer"))?;
    println!("image {index}: label {} predicted {}", ds.label(index), argmax(&logits));
    println!("logits: {}", logits.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" "));
    Ok(())
}

fn extrapolate(path: Option<&Path>) -> Result<(), Failure> {
    let techs: Vec<TechSpec> = match path {
        None => builtin_techs(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            let file: TechFile = toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            file.tech
        }
    };
    let baseline = techs.first().ok_or_else(|| Failure::config("no technologies given"))?;
    println!("{:<12} {:>10} {:>14} {:>10} {:>10} {:>12}", "technology", "R_U (MOhm)", "I_unit (A)", "area x", "power x", "6b area x");
    for t in &techs {
        let f = improvement_factors(t, baseline).map_err(|e| Failure::config(e.to_string()))?;
        println!(
            "{:<12} {:>10} {:>14} {:>10} {:>10} {:>12}",
            t.name,
            t.r_unit / 1e6,
            format!("{:.2e}", round_sig(unit_current(t), 2)),
            round_sig(f.area, 2),
            round_sig(f.power, 2),
            round_sig(f.area_ratio_6bit, 2)
        );
    }
    Ok(())
}
