use std::path::PathBuf;
use std::sync::OnceLock;

use cimsim_core::array::WeightLine;
use cimsim_core::bisc::{run_bisc, AdcParams, BiscParams};
use cimsim_core::dnn::{
    argmax, calibrate_ranges, evaluate, load_mnist_dir, parse_idx_images, parse_idx_labels, quantize_mlp,
    reference_logits, tile_layer, train_mlp, Dataset, DenseLayer, FloatMlp, InferOptions, InferenceEngine, QuantizedMlp,
    RangeCalibration, TileOrder, TrainConfig,
};
use cimsim_core::nonideality::{sample_profile, ProfileSpec};
use cimsim_core::{ArrayConfig, ArrayModel, CalibrationState, NonidealityProfile};
use proptest::prelude::*;

const SEED: u64 = 1;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

struct Fixture {
    float: FloatMlp,
    quantized: QuantizedMlp,
    test: Dataset,
}

/// Float reference trained on the held-in images and its range-calibrated quantized copy.
fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = load_mnist_dir(&data_dir()).unwrap();
        let (train, test) = data.split(2000, SEED).unwrap();
        let float = train_mlp(&train, 10, &TrainConfig::default(), SEED).unwrap();
        let cfg = ArrayConfig::default();
        let mut quantized = quantize_mlp(&float, &cfg).unwrap();
        let samples: Vec<Vec<f32>> = (0..512).map(|i| train.input(i)).collect();
        calibrate_ranges(&mut quantized, &float, &samples, &cfg, &RangeCalibration::default()).unwrap();
        Fixture { float, quantized, test }
    })
}

fn idx_images(n: u32, h: u32, w: u32, pixels: &[u8]) -> Vec<u8> {
    let mut buf = vec![0, 0, 8, 3];
    for v in [n, h, w] {
        buf.extend_from_slice(&v.to_be_bytes());
    }
    buf.extend_from_slice(pixels);
    buf
}

fn tiny_model(weights: Vec<f32>, inputs: usize, outputs: usize) -> FloatMlp {
    FloatMlp { layers: vec![DenseLayer { inputs, outputs, weights, bias: vec![0.0; outputs] }] }
}

#[test]
fn test_set_header() {
    let d = load_mnist_dir(&data_dir()).unwrap();
    assert_eq!((d.len(), d.height, d.width), (10000, 28, 28));
    assert!((0..d.len()).all(|i| d.label(i) < 10));
    assert_eq!(d.image(9999).len(), 784);
}

#[test]
fn idx_parsing_and_errors() {
    let buf = idx_images(2, 2, 3, &[0, 1, 2, 3, 4, 5, 250, 251, 252, 253, 254, 255]);
    let (n, h, w, px) = parse_idx_images(&buf).unwrap();
    assert_eq!((n, h, w), (2, 2, 3));
    assert_eq!(px[6], 250);

    let mut bad = buf.clone();
    bad[3] = 1;
    assert!(parse_idx_images(&bad).is_err());
    assert!(parse_idx_images(&buf[..buf.len() - 1]).is_err());
    assert!(parse_idx_images(&buf[..6]).is_err());

    let mut labels = vec![0, 0, 8, 1, 0, 0, 0, 3, 7, 2, 9];
    assert_eq!(parse_idx_labels(&labels).unwrap(), vec![7, 2, 9]);
    labels.pop();
    assert!(parse_idx_labels(&labels).is_err());
    assert!(parse_idx_labels(&buf).is_err());
}

#[test]
fn subsets_are_seeded() {
    let d = load_mnist_dir(&data_dir()).unwrap();
    assert!(d.subset(0, 3).unwrap().is_empty());
    let a = d.subset_indices(2000, 3).unwrap();
    assert_eq!(a, d.subset_indices(2000, 3).unwrap());
    assert_ne!(a, d.subset_indices(2000, 4).unwrap());
    let mut sorted = a.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 2000);
    assert!(d.subset_indices(10001, 3).is_err());
    let (rest, held) = d.split(2000, 3).unwrap();
    assert_eq!((rest.len(), held.len()), (8000, 2000));
}

#[test]
fn input_pixels_are_normalized() {
    let d = Dataset::new(1, 2, vec![0, 255], vec![4]).unwrap();
    assert_eq!(d.input(0), vec![0.0, 1.0]);
    assert!(Dataset::new(1, 2, vec![0], vec![4]).is_err());
}

#[test]
fn weight_quantization_anchors() {
    let m = tiny_model(vec![0.0, 0.5, -1.0, 0.25, 1.0, -0.3], 3, 2);
    let q = quantize_mlp(&m, &ArrayConfig::default()).unwrap();
    let l = &q.layers[0];
    assert_eq!(l.weight(0, 0).line(), WeightLine::Idle);
    assert_eq!(l.weight(0, 0).magnitude(), 0);
    let top = l.weight(1, 1);
    assert_eq!((top.magnitude(), top.w6(), top.w7()), (63, true, false));
    let bottom = l.weight(0, 2);
    assert_eq!((bottom.magnitude(), bottom.w6(), bottom.w7()), (63, false, true));
    assert!((l.weight_scale - 1.0 / 63.0).abs() < 1e-15);
    for o in 0..2 {
        for i in 0..3 {
            let deq = l.weight(o, i).signed() as f64 * l.weight_scale;
            assert!((deq - m.layers[0].weight(o, i) as f64).abs() <= l.weight_scale / 2.0 + 1e-9);
        }
    }
}

#[test]
fn all_zero_layer_is_rejected() {
    let m = tiny_model(vec![0.0; 6], 3, 2);
    assert!(quantize_mlp(&m, &ArrayConfig::default()).is_err());
}

#[test]
fn trained_model_dequantizes_within_half_step() {
    let f = fixture();
    for (fl, ql) in f.float.layers.iter().zip(&f.quantized.layers) {
        assert!(ql.weight_scale > 0.0);
        for o in 0..fl.outputs {
            for i in 0..fl.inputs {
                let deq = ql.weight(o, i).signed() as f64 * ql.weight_scale;
                assert!((deq - fl.weight(o, i) as f64).abs() <= ql.weight_scale / 2.0 + 1e-9);
            }
        }
    }
}

#[test]
fn hidden_layer_tiling() {
    let m = FloatMlp::init(&[784, 72, 10], 5).unwrap();
    let q = quantize_mlp(&m, &ArrayConfig::default()).unwrap();
    let s = tile_layer(&q.layers[0], &ArrayConfig::default());
    assert_eq!((s.row_tiles, s.col_tiles, s.tiles.len()), (22, 3, 66));
    let last = s.tiles.iter().filter(|t| t.row_tile == 21).map(|t| t.row_len).collect::<Vec<_>>();
    assert_eq!(last, vec![28, 28, 28]);
    let widths = s.tiles.iter().filter(|t| t.row_tile == 0).map(|t| t.col_len).collect::<Vec<_>>();
    assert_eq!(widths, vec![32, 32, 8]);
    let out = tile_layer(&q.layers[1], &ArrayConfig::default());
    assert_eq!((out.row_tiles, out.col_tiles), (2, 1));
}

#[test]
fn small_layer_is_one_tile() {
    let m = FloatMlp::init(&[20, 5], 2).unwrap();
    let q = quantize_mlp(&m, &ArrayConfig::default()).unwrap();
    assert_eq!(tile_layer(&q.layers[0], &ArrayConfig::default()).tiles.len(), 1);
}

#[test]
fn padded_cells_draw_no_current() {
    let cfg = ArrayConfig::default();
    let m = FloatMlp::init(&[784, 72, 10], 6).unwrap();
    let q = quantize_mlp(&m, &cfg).unwrap();
    let s = tile_layer(&q.layers[0], &cfg);
    let model = ArrayModel::ideal(cfg.clone()).unwrap();
    let tile = s.tiles.iter().find(|t| t.row_len < 36 && t.col_len < 32).unwrap();
    let driven: Vec<_> = (0..36).map(|r| cimsim_core::array::InputCode::from_signed(r as i32 - 17, 6).unwrap()).collect();
    let mut real_rows_only = driven.clone();
    for x in real_rows_only.iter_mut().skip(tile.row_len) {
        *x = cimsim_core::array::InputCode::ZERO;
    }
    let a = model.line_currents(&driven, &tile.weights);
    let b = model.line_currents(&real_rows_only, &tile.weights);
    assert_eq!(a, b);
    assert!(a[tile.col_len..].iter().all(|&(p, n)| p == 0.0 && n == 0.0));
}

#[test]
fn zero_image_matches_host_oracle() {
    let f = fixture();
    let cfg = ArrayConfig::default();
    let model = ArrayModel::ideal(cfg.clone()).unwrap();
    let cal = CalibrationState::nominal(&cfg);
    let zero = vec![0.0f32; 784];
    let host = reference_logits(&f.quantized, &zero).unwrap();
    let hidden: Vec<f64> = f.quantized.layers[0].bias.iter().map(|b| b.max(0.0)).collect();
    assert!(hidden.iter().any(|&h| h > 0.0));
    let engine = InferenceEngine::new(&model, &f.quantized, &cal, InferOptions::default()).unwrap();
    let got = engine.logits(&zero, &mut model.noise_stream(0)).unwrap();
    assert_eq!(argmax(&got), argmax(&host));
    let hp = InferenceEngine::new(&model, &f.quantized, &cal, InferOptions { high_precision: true, ..Default::default() }).unwrap();
    let precise = hp.logits(&zero, &mut model.noise_stream(0)).unwrap();
    for (a, b) in precise.iter().zip(&host) {
        assert!((a - b).abs() < 1e-3 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn high_precision_ideal_array_follows_float_model() {
    let f = fixture();
    let cfg = ArrayConfig::default();
    let model = ArrayModel::ideal(cfg.clone()).unwrap();
    let opts = InferOptions { high_precision: true, ..Default::default() };
    let sample = f.test.subset(500, 9).unwrap();
    let e = evaluate(&sample, &f.quantized, &model, &CalibrationState::nominal(&cfg), opts, 0).unwrap();
    let agree = (0..500).filter(|&i| e.predictions[i] as usize == f.float.predict(&sample.input(i))).count();
    assert!(agree >= 495, "{agree} / 500");
}

#[test]
fn tile_order_does_not_change_results() {
    let f = fixture();
    let cfg = ArrayConfig::default();
    let mut spec = ProfileSpec::default();
    spec.noise_rms = cimsim_core::nonideality::Dist::fixed(0.0);
    let prof: NonidealityProfile = sample_profile(&spec, 36, 32, 4).unwrap();
    let model = ArrayModel::new(cfg.clone(), prof).unwrap();
    let cal = CalibrationState::nominal(&cfg);
    let sample = f.test.subset(100, 2).unwrap();
    let run = |order| {
        let engine = InferenceEngine::new(&model, &f.quantized, &cal, InferOptions { order, ..Default::default() }).unwrap();
        (0..sample.len()).map(|i| engine.logits(&sample.input(i), &mut model.noise_stream(0)).unwrap()).collect::<Vec<_>>()
    };
    let natural = run(TileOrder::Natural);
    assert_eq!(natural, run(TileOrder::Reversed));
    assert_eq!(natural, run(TileOrder::Shuffled(17)));
}

#[test]
fn mismatched_array_is_rejected() {
    let f = fixture();
    let cfg = ArrayConfig { dac_bits: 5, ..ArrayConfig::default() };
    let model = ArrayModel::ideal(cfg.clone()).unwrap();
    assert!(InferenceEngine::new(&model, &f.quantized, &CalibrationState::nominal(&cfg), InferOptions::default()).is_err());
}

#[test]
fn calibration_recovers_accuracy_monotonically() {
    let f = fixture();
    let cfg = ArrayConfig::default();
    let sample = f.test.subset(1000, 11).unwrap();
    let opts = InferOptions::default();
    let nominal = CalibrationState::nominal(&cfg);
    let ideal_model = ArrayModel::ideal(cfg.clone()).unwrap();
    let ideal = evaluate(&sample, &f.quantized, &ideal_model, &nominal, opts.clone(), 0).unwrap().accuracy;
    let prof = sample_profile(&ProfileSpec::default(), 36, 32, SEED).unwrap();
    let model = ArrayModel::new(cfg.clone(), prof).unwrap();
    let bisc = run_bisc(&model, &mut model.noise_stream(0), &BiscParams::default(), AdcParams::of(&model)).unwrap();
    let uncal = evaluate(&sample, &f.quantized, &model, &nominal, opts.clone(), 1 << 32).unwrap().accuracy;
    let cal = evaluate(&sample, &f.quantized, &model, &bisc.state, opts, 2 << 32).unwrap().accuracy;
    assert!(cal >= uncal, "calibrated {cal} < uncalibrated {uncal}");
    assert!(cal <= ideal + 0.005, "calibrated {cal} > ideal {ideal} + 0.5 points");
}

#[test]
fn evaluation_is_deterministic() {
    let f = fixture();
    let cfg = ArrayConfig::default();
    let prof = sample_profile(&ProfileSpec::default(), 36, 32, 2).unwrap();
    let model = ArrayModel::new(cfg.clone(), prof).unwrap();
    let sample = f.test.subset(200, 1).unwrap();
    let nominal = CalibrationState::nominal(&cfg);
    let a = evaluate(&sample, &f.quantized, &model, &nominal, InferOptions::default(), 5).unwrap();
    let b = evaluate(&sample, &f.quantized, &model, &nominal, InferOptions::default(), 5).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tiles_partition_the_layer(inputs in 1usize..200, outputs in 1usize..100, seed in any::<u64>()) {
        let cfg = ArrayConfig::default();
        let m = FloatMlp::init(&[inputs, outputs], seed).unwrap();
        let q = quantize_mlp(&m, &cfg).unwrap();
        let s = tile_layer(&q.layers[0], &cfg);
        let mut covered = vec![0u32; inputs * outputs];
        for t in &s.tiles {
            prop_assert!(t.row_len <= 36 && t.col_len <= 32 && t.row_len > 0 && t.col_len > 0);
            for r in 0..36 {
                for c in 0..32 {
                    let inside = r < t.row_len && c < t.col_len;
                    if inside {
                        let (i, o) = (t.row_start + r, t.col_start + c);
                        covered[o * inputs + i] += 1;
                        prop_assert_eq!(t.weights.get(r, c), q.layers[0].weight(o, i));
                    } else {
                        prop_assert_eq!(t.weights.get(r, c).line(), WeightLine::Idle);
                    }
                }
            }
        }
        prop_assert!(covered.iter().all(|&n| n == 1));
    }
}
