//! Sine-activated implicit neural representations (SIREN) for images, with
//! post-training quantization by uniform, stochastic-rounding, k-means and
//! Hadamard-rotated (DHQ) quantizers, plus an integer W8A8 inference path.

pub mod analysis;
pub mod config;
pub mod costmodel;
pub mod error;
pub mod hadamard;
pub mod imageio;
pub mod linalg;
pub mod model;
pub mod qinfer;
pub mod quant;
pub mod report;
pub mod trainer;

pub use error::{Error, Result};
pub use linalg::{Matrix, Rng};

use imageio::ImageBuffer;
use model::{init_siren, SirenConfig, SirenModel};
use trainer::{make_grid_dataset, TrainConfig};

/// Initializes from `train.seed` and fits `image`; the canonical recipe shared by
/// the CLI and the acceptance suite.
pub fn fit_image(
    image: &ImageBuffer,
    siren: &SirenConfig,
    train: &TrainConfig,
    observer: impl FnMut(usize, &SirenModel, f64) -> Result<()>,
) -> Result<(SirenModel, Vec<f64>)> {
    let cfg = SirenConfig { in_dim: 2, out_dim: image.channels(), ..*siren };
    let model = init_siren(&cfg, &mut Rng::new(train.seed).split("init"))?;
    trainer::train_with(model, &make_grid_dataset(image), train, observer)
}
