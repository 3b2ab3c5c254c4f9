//! Quantization-noise regressions on the bundled cameraman checkpoint, and
//! the linear head in every precision mode.

mod common;

use dhq::analysis::psnr;
use dhq::imageio::ImageBuffer;
use dhq::model::SirenModel;
use dhq::qinfer::{Mode, QuantizedModel};
use dhq::quant::{QuantConfig, Scheme};
use dhq::trainer::make_grid_dataset;

fn score(model: &SirenModel, img: &ImageBuffer, scheme: Scheme, wb: u32, ab: u32) -> f64 {
    let cfg = QuantConfig { scheme, weight_bits: wb, act_bits: ab, ..QuantConfig::default() };
    let q = QuantizedModel::quantize(model, &cfg, Some(&make_grid_dataset(img)), 7).unwrap();
    psnr(img, &q.reconstruct_image(img.width(), img.height(), 1).unwrap()).unwrap()
}

#[test]
fn fewer_bits_cost_fidelity_on_the_bundled_checkpoint() {
    let img = common::cameraman();
    let model = common::cameraman_model();
    let mut bad = Vec::new();
    for scheme in Scheme::ALL {
        let w8a32 = score(&model, &img, scheme, 8, 32);
        let w8a8 = score(&model, &img, scheme, 8, 8);
        let w12a12 = score(&model, &img, scheme, 12, 12);
        println!("{scheme}: W8A32 {w8a32:.3}  W8A8 {w8a8:.3}  W12A12 {w12a12:.3}");
        if w8a32 < w8a8 - 0.5 {
            bad.push(format!("{scheme}: W8A32 {w8a32:.3} < W8A8 {w8a8:.3} - 0.5"));
        }
        if w12a12 < w8a8 {
            bad.push(format!("{scheme}: 12-bit {w12a12:.3} < 8-bit {w8a8:.3}"));
        }
    }
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn linear_head_is_kept_in_every_mode() {
    let mut model = common::small_net(4);
    // scale the head so outputs leave [-1, 1]; a stray sine would fold them back
    let last = model.layers_mut().last_mut().unwrap();
    last.weight = last.weight.map(|w| w * 40.0);
    let img = ImageBuffer::filled(7, 6, model.out_dim(), 10).unwrap();
    let data = make_grid_dataset(&img);
    let exact = model.forward(&data.coords).unwrap();
    let peak = exact.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak > 1.5, "{peak}");
    for (wb, ab) in [(32, 32), (8, 32), (8, 8)] {
        for scheme in Scheme::ALL {
            let cfg = QuantConfig { scheme, weight_bits: wb, act_bits: ab, ..QuantConfig::default() };
            let q = QuantizedModel::quantize(&model, &cfg, Some(&data), 1).unwrap();
            assert!(!q.layers().last().unwrap().apply_sine);
            let out = q.infer(&data.coords).unwrap();
            let got = out.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((got - peak).abs() < 0.1 * peak, "{:?} {scheme}: {got} vs {peak}", Mode::for_config(&cfg));
        }
    }
}
