//! Coordinate-grid datasets, MSE backpropagation through the sine layers, and Adam.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::imageio::ImageBuffer;
use crate::linalg::{gemm_into, Matrix, Rng, Trans};
use crate::model::SirenModel;

/// Rows processed per gradient block; bounds scratch memory at full-batch sizes.
const BLOCK_ROWS: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchSize {
    Full,
    Rows(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: BatchSize,
    pub seed: u64,
    /// Snapshot period for [`train_with`] observers; 0 disables snapshots.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: BatchSize::Full,
            seed: 7,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !in_unit(self.adam_beta1) || !in_unit(self.adam_beta2) {
            return Err(Error::Config("Adam betas must lie in (0, 1)".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::Config("learning rate and epsilon must be positive".into()));
        }
        if self.batch_size == BatchSize::Rows(0) {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Pixel-center coordinates and normalized targets for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `N × 2`, rows are `(y, x)` in `[-1, 1]`, row-major pixel order.
    pub coords: Matrix,
    /// `N × C`, samples mapped to `[-1, 1]`.
    pub targets: Matrix,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

/// Grid position `i` of `n` mapped so the end points land on `±1`.
pub fn grid_coordinate(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

pub fn coordinate_grid(width: usize, height: usize) -> Matrix {
    Matrix::from_fn(width * height, 2, |r, c| {
        if c == 0 {
            grid_coordinate(r / width, height)
        } else {
            grid_coordinate(r % width, width)
        }
    })
}

pub fn normalize_sample(p: u8) -> f64 {
    p as f64 / 127.5 - 1.0
}

pub fn denormalize_sample(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

pub fn make_grid_dataset(image: &ImageBuffer) -> Dataset {
    let (w, h, c) = (image.width(), image.height(), image.channels());
    let targets = Matrix::new(w * h, c, image.pixels().iter().map(|&p| normalize_sample(p)).collect())
        .expect("image buffers are never empty");
    Dataset { coords: coordinate_grid(w, h), targets, width: w, height: h, channels: c }
}

/// Per-layer parameter gradients, laid out like the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &SirenModel) -> Self {
        Self {
            weights: model.layers().iter().map(|l| Matrix::zeros(l.out_dim(), l.in_dim())).collect(),
            biases: model.layers().iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }
}

/// Mean squared error over every sample and channel, with its exact gradient.
///
/// Rows are processed in fixed blocks in order, so the reduction and hence the
/// result are bit-reproducible.
pub fn mse_loss_and_grads(model: &SirenModel, coords: &Matrix, targets: &Matrix) -> Result<(f64, Gradients)> {
    if coords.rows() != targets.rows() {
        return Err(shape_err!("{} coordinates but {} targets", coords.rows(), targets.rows()));
    }
    if coords.cols() != model.in_dim() || targets.cols() != model.out_dim() {
        return Err(shape_err!(
            "model is {}->{}, batch is {}->{}",
            model.in_dim(),
            model.out_dim(),
            coords.cols(),
            targets.cols()
        ));
    }
    let n = coords.rows();
    let norm = 1.0 / (n * targets.cols()) as f64;
    let mut grads = Gradients::zeros_like(model);
    let mut loss = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK_ROWS).min(n);
        loss +=
            block_backward(model, &row_block(coords, start, end), &row_block(targets, start, end), norm, &mut grads)?;
        start = end;
    }
    Ok((loss * norm, grads))
}

fn row_block(m: &Matrix, start: usize, end: usize) -> Matrix {
    let c = m.cols();
    Matrix::new(end - start, c, m.as_slice()[start * c..end * c].to_vec()).unwrap()
}

/// Accumulates one block's gradients and returns its summed squared error.
fn block_backward(model: &SirenModel, x: &Matrix, t: &Matrix, norm: f64, grads: &mut Gradients) -> Result<f64> {
    let layers = model.layers();
    // inputs[k] feeds layer k; slopes[k] holds ω·cos(ω·z) for sine layers
    let mut inputs = Vec::with_capacity(layers.len());
    let mut slopes: Vec<Option<Matrix>> = Vec::with_capacity(layers.len());
    let mut a = x.clone();
    for layer in layers {
        let mut z = layer.affine(&a)?;
        if layer.apply_sine {
            let w = layer.omega;
            let mut slope = Matrix::zeros(z.rows(), z.cols());
            for (zv, sv) in z.as_mut_slice().iter_mut().zip(slope.as_mut_slice()) {
                let (s, c) = (w * *zv).sin_cos();
                *zv = s;
                *sv = w * c;
            }
            slopes.push(Some(slope));
        } else {
            slopes.push(None);
        }
        inputs.push(a);
        a = z;
    }
    let mut sse = 0.0;
    let mut delta = a;
    for (d, &target) in delta.as_mut_slice().iter_mut().zip(t.as_slice()) {
        let r = *d - target;
        sse += r * r;
        *d = 2.0 * r * norm;
    }
    for k in (0..layers.len()).rev() {
        if let Some(slope) = &slopes[k] {
            for (d, s) in delta.as_mut_slice().iter_mut().zip(slope.as_slice()) {
                *d *= s;
            }
        }
        gemm_into(1.0, &delta, Trans::Yes, &inputs[k], Trans::No, 1.0, &mut grads.weights[k])?;
        let db = &mut grads.biases[k];
        for r in 0..delta.rows() {
            for (g, v) in db.iter_mut().zip(delta.row(r)) {
                *g += v;
            }
        }
        if k > 0 {
            let mut prev = Matrix::zeros(delta.rows(), layers[k].in_dim());
            gemm_into(1.0, &delta, Trans::No, &layers[k].weight, Trans::No, 0.0, &mut prev)?;
            delta = prev;
        }
    }
    Ok(sse)
}

/// Adam with bias correction, one moment pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(model: &SirenModel, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            step: 0,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }

    pub fn step(&mut self, model: &mut SirenModel, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        };
        for (k, layer) in model.layers_mut().iter_mut().enumerate() {
            update(
                layer.weight.as_mut_slice(),
                grads.weights[k].as_slice(),
                self.m.weights[k].as_mut_slice(),
                self.v.weights[k].as_mut_slice(),
            );
            update(&mut layer.bias, &grads.biases[k], &mut self.m.biases[k], &mut self.v.biases[k]);
        }
    }
}

pub fn train(model: SirenModel, data: &Dataset, cfg: &TrainConfig) -> Result<(SirenModel, Vec<f64>)> {
    train_with(model, data, cfg, |_, _, _| Ok(()))
}

/// Like [`train`], calling `observer(iteration, model, loss)` after every
/// `checkpoint_every` updates.
pub fn train_with(
    mut model: SirenModel,
    data: &Dataset,
    cfg: &TrainConfig,
    mut observer: impl FnMut(usize, &SirenModel, f64) -> Result<()>,
) -> Result<(SirenModel, Vec<f64>)> {
    cfg.validate()?;
    if model.in_dim() != data.coords.cols() || model.out_dim() != data.targets.cols() {
        return Err(shape_err!(
            "model is {}->{}, data is {}->{}",
            model.in_dim(),
            model.out_dim(),
            data.coords.cols(),
            data.targets.cols()
        ));
    }
    let mut adam = Adam::new(&model, cfg);
    let mut batch_rng = Rng::new(cfg.seed).split("batches");
    let mut curve = Vec::with_capacity(cfg.iterations);
    let n = data.coords.rows();
    for it in 0..cfg.iterations {
        let (loss, grads) = match cfg.batch_size {
            BatchSize::Rows(b) if b < n => {
                let idx: Vec<usize> = (0..b).map(|_| batch_rng.below(n)).collect();
                let gather = |m: &Matrix| {
                    Matrix::new(b, m.cols(), idx.iter().flat_map(|&i| m.row(i).iter().copied()).collect()).unwrap()
                };
                mse_loss_and_grads(&model, &gather(&data.coords), &gather(&data.targets))?
            }
            _ => mse_loss_and_grads(&model, &data.coords, &data.targets)?,
        };
        if !loss.is_finite() {
            return Err(Error::Training(format!("loss became {loss} at iteration {it}")));
        }
        adam.step(&mut model, &grads);
        curve.push(loss);
        if cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 {
            observer(it + 1, &model, loss)?;
        }
    }
    Ok((model, curve))
}
