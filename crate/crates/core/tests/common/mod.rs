#![allow(dead_code)]

use std::path::PathBuf;

use dhq::analysis::MomentStats;
use dhq::hadamard::{rotate_rows, transform_2d, unrotate_rows, HadamardPlan};
use dhq::imageio::{read_image, ImageBuffer};
use dhq::linalg::{gemm, Trans};
use dhq::model::{init_siren, SirenConfig, SirenModel};
use dhq::trainer::{mse_loss_and_grads, TrainConfig};
use dhq::{Matrix, Rng};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn cameraman() -> ImageBuffer {
    read_image(data_dir().join("cameraman.pgm")).expect("bundled image")
}

/// The bundled cameraman checkpoint, or a fresh fit with the default recipe
/// when `DHQ_RETRAIN` is set.
pub fn cameraman_model() -> SirenModel {
    if std::env::var_os("DHQ_RETRAIN").is_some() {
        let (m, _) =
            dhq::fit_image(&cameraman(), &SirenConfig::default(), &TrainConfig::default(), |_, _, _| Ok(())).unwrap();
        return m;
    }
    SirenModel::load(data_dir().join("cameraman_siren.ckpt")).expect("bundled checkpoint")
}

pub fn kurtosis(v: &[f64]) -> f64 {
    MomentStats::from_values(v).unwrap().excess_kurtosis
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn small_net(seed: u64) -> SirenModel {
    let mut rng = Rng::new(seed);
    let cfg = SirenConfig {
        hidden_dim: 3 + rng.below(6),
        num_hidden_layers: 1 + rng.below(2),
        out_dim: if rng.below(2) == 0 { 1 } else { 3 },
        ..SirenConfig::default()
    };
    let mut m = init_siren(&cfg, &mut rng).unwrap();
    // nonzero biases so their gradients are exercised too
    for l in m.layers_mut() {
        l.bias.iter_mut().for_each(|b| *b = rng.uniform_range(-0.1, 0.1));
    }
    m
}

fn loss(model: &SirenModel, x: &Matrix, t: &Matrix) -> f64 {
    let y = model.forward(x).unwrap();
    y.as_slice().iter().zip(t.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.as_slice().len() as f64
}

/// Worst relative gap between analytic and central-difference gradients.
///
/// Entries whose true gradient is tiny (below `1e-7` in both estimates) are
/// compared absolutely instead, since their relative error is pure roundoff.
pub fn gradient_check(seed: u64, h: f64) -> f64 {
    let model = small_net(seed);
    let mut rng = Rng::new(seed).split("batch");
    let n = 6 + rng.below(10);
    let x = rng.uniform_matrix(n, 2, -1.0, 1.0);
    let t = rng.uniform_matrix(n, model.out_dim(), -1.0, 1.0);
    let (_, g) = mse_loss_and_grads(&model, &x, &t).unwrap();
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, perturb: &mut dyn FnMut(f64) -> f64| {
        let fd = (perturb(h) - perturb(-h)) / (2.0 * h);
        let scale = analytic.abs().max(fd.abs());
        let err = if scale < 1e-7 { (analytic - fd).abs() } else { (analytic - fd).abs() / scale };
        worst = worst.max(err);
    };
    for k in 0..model.layers().len() {
        let (rows, cols) = model.layers()[k].weight.shape();
        for i in 0..rows {
            for j in 0..cols {
                check(g.weights[k].get(i, j), &mut |d| {
                    let mut m = model.clone();
                    let w = &mut m.layers_mut()[k].weight;
                    w.set(i, j, w.get(i, j) + d);
                    loss(&m, &x, &t)
                });
            }
            check(g.biases[k][i], &mut |d| {
                let mut m = model.clone();
                m.layers_mut()[k].bias[i] += d;
                loss(&m, &x, &t)
            });
        }
    }
    worst
}

/// Triple loop of `x·wᵀ` in 64-bit integers.
pub fn scalar_int_oracle(x: &[i32], n: usize, w: &[i32], m: usize, k: usize) -> Vec<i64> {
    let mut out = vec![0i64; n * m];
    for r in 0..n {
        for o in 0..m {
            let mut acc = 0i64;
            for i in 0..k {
                acc += x[r * k + i] as i64 * w[o * k + i] as i64;
            }
            out[r * m + o] = acc;
        }
    }
    out
}

/// The rotated layer pipeline with every quantizer replaced by the identity.
pub fn rotated_forward(model: &SirenModel, coords: &Matrix) -> Matrix {
    let mut x = coords.clone();
    for l in model.layers() {
        let rp = HadamardPlan::new(l.out_dim()).unwrap();
        let cp = HadamardPlan::new(l.in_dim()).unwrap();
        let w = transform_2d(&l.weight, &rp, &cp).unwrap();
        let xr = rotate_rows(&x, &cp).unwrap();
        let mut y = unrotate_rows(&gemm(&xr, Trans::No, &w, Trans::Yes).unwrap(), &rp).unwrap();
        for r in 0..y.rows() {
            y.row_mut(r).iter_mut().zip(&l.bias).for_each(|(v, b)| *v += b);
        }
        x = l.activate(&y);
    }
    x
}
