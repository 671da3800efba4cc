//! Quantized MLP harness: data loading, float reference training, quantization, tiling
//! and inference on the array model.
mod infer;
mod mlp;
mod mnist;
mod quant;
mod tile;

pub use infer::{evaluate, infer, reference_logits, Evaluation, InferOptions, InferenceEngine, TileOrder, ACC_FRAC_BITS};
pub use mlp::{argmax, train_mlp, DenseLayer, FloatMlp, TrainConfig};
pub use mnist::{load_mnist, load_mnist_dir, parse_idx_images, parse_idx_labels, Dataset};
pub use quant::{calibrate_ranges, quantile, quantize_mlp, Activation, QuantLayer, QuantizedMlp, RangeCalibration};
pub use tile::{tile_layer, Tile, TileSchedule};
