//! Distribution statistics for weights and activations, and PSNR/SSIM.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::hadamard::{transform_2d, HadamardPlan};
use crate::imageio::ImageBuffer;
use crate::model::SirenModel;
use crate::trainer::Dataset;

/// Reported PSNR for identical images, and the ceiling for every other value.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const DEFAULT_BINS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    /// Fourth standardized moment minus 3.
    pub excess_kurtosis: f64,
    pub min: f64,
    pub max: f64,
}

impl MomentStats {
    /// Sample standard deviation uses `n − 1`; skewness and kurtosis use the
    /// population central moments.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::Data(format!("moments need at least 2 samples, got {n}")));
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in values {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
            min = min.min(v);
            max = max.max(v);
        }
        let std = (m2 / (nf - 1.0)).sqrt();
        let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
        let (skewness, excess_kurtosis) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
        Ok(Self { n, mean, std, skewness, excess_kurtosis, min, max })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub source_label: String,
    /// `counts.len() + 1` strictly increasing edges.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    /// Uniform bins over the observed range; a constant input gets a unit-wide range.
    pub fn from_values(label: impl Into<String>, values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 || values.is_empty() {
            return Err(Error::Data("histogram needs values and at least one bin".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("histogram input contains non-finite values".into()));
        }
        let (mut lo, mut hi) =
            values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let mut bin_edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
        bin_edges.push(hi);
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Ok(Self { source_label: label.into(), bin_edges, counts, total: values.len() as u64 })
    }

    /// Fraction of samples in bins whose centers satisfy `pred`.
    pub fn mass_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        let hit: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(i, _)| pred(0.5 * (self.bin_edges[*i] + self.bin_edges[*i + 1])))
            .map(|(_, c)| c)
            .sum();
        hit as f64 / self.total as f64
    }
}

/// Count of `|v| > outer` over count of `|v| < inner`: large for U-shaped data.
pub fn edge_to_center_ratio(values: &[f64], inner: f64, outer: f64) -> f64 {
    let edge = values.iter().filter(|v| v.abs() > outer).count();
    let center = values.iter().filter(|v| v.abs() < inner).count();
    edge as f64 / center.max(1) as f64
}

/// One tensor's distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub histogram: Histogram,
    pub moments: MomentStats,
}

impl Distribution {
    pub fn from_values(label: &str, values: &[f64], bins: usize) -> Result<Self> {
        Ok(Self { histogram: Histogram::from_values(label, values, bins)?, moments: MomentStats::from_values(values)? })
    }
}

/// Weight (and optionally Hadamard-domain weight) and post-activation
/// distributions for every layer, over the full coordinate grid.
///
/// Labels are `layer{k}.weight`, `layer{k}.weight.post_hadamard` and
/// `layer{k}.activation` with `k` counted from 1.
pub fn collect_distributions(
    model: &SirenModel,
    data: &Dataset,
    with_hadamard: bool,
) -> Result<BTreeMap<String, Distribution>> {
    let mut out = BTreeMap::new();
    let mut x = data.coords.clone();
    for (k, layer) in model.layers().iter().enumerate() {
        let name = format!("layer{}", k + 1);
        let w = &layer.weight;
        let label = format!("{name}.weight");
        out.insert(label.clone(), Distribution::from_values(&label, w.as_slice(), DEFAULT_BINS)?);
        if with_hadamard {
            let rp = HadamardPlan::new(w.rows())?;
            let cp = HadamardPlan::new(w.cols())?;
            let t = transform_2d(w, &rp, &cp)?;
            let label = format!("{name}.weight.post_hadamard");
            out.insert(label.clone(), Distribution::from_values(&label, t.as_slice(), DEFAULT_BINS)?);
        }
        x = layer.activate(&layer.affine(&x)?);
        let label = format!("{name}.activation");
        out.insert(label.clone(), Distribution::from_values(&label, x.as_slice(), DEFAULT_BINS)?);
    }
    Ok(out)
}

pub fn histograms_csv(dists: &[&Distribution]) -> String {
    let mut s = String::from("label,bin_left,bin_right,count\n");
    for d in dists {
        let h = &d.histogram;
        for (i, c) in h.counts.iter().enumerate() {
            writeln!(s, "{},{:e},{:e},{}", h.source_label, h.bin_edges[i], h.bin_edges[i + 1], c).unwrap();
        }
    }
    s
}

pub fn moments_csv(dists: &BTreeMap<String, Distribution>) -> String {
    let mut s = String::from("label,n,mean,std,skewness,excess_kurtosis,min,max\n");
    for (label, d) in dists {
        let m = &d.moments;
        writeln!(
            s,
            "{label},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            m.n, m.mean, m.std, m.skewness, m.excess_kurtosis, m.min, m.max
        )
        .unwrap();
    }
    s
}

fn check_same_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if (a.width(), a.height(), a.channels()) != (b.width(), b.height(), b.channels()) {
        return Err(shape_err!(
            "images differ: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        ));
    }
    Ok(())
}

pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_dims(a, b)?;
    let sse: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sse / a.pixels().len() as f64)
}

/// `10·log10(255²/MSE)` over all channels, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" filtering: output is `(h − 10) × (w − 10)`.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let k = gaussian_kernel();
    let c1 = (SSIM_K1 * 255.0).powi(2);
    let c2 = (SSIM_K2 * 255.0).powi(2);
    let product = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(a, w, h, &k);
    let mu_b = filter_valid(b, w, h, &k);
    let aa = filter_valid(&product(a, a), w, h, &k);
    let bb = filter_valid(&product(b, b), w, h, &k);
    let ab = filter_valid(&product(a, b), w, h, &k);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / mu_a.len() as f64
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), K₁ = 0.01, K₂ = 0.03,
/// L = 255, evaluated at every fully contained window position. Color images
/// average the per-channel values.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Domain(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}")));
    }
    let c = a.channels();
    let sum: f64 = (0..c).map(|ch| ssim_plane(&a.plane(ch), &b.plane(ch), w, h)).sum();
    Ok(sum / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn random_image(w: usize, h: usize, c: usize, seed: u64) -> ImageBuffer {
        let mut rng = Rng::new(seed);
        ImageBuffer::new(w, h, c, (0..w * h * c).map(|_| rng.below(256) as u8).collect()).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let a = random_image(16, 16, 1, 1);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let black = ImageBuffer::filled(8, 8, 1, 0).unwrap();
        let white = ImageBuffer::filled(8, 8, 1, 255).unwrap();
        assert!(psnr(&black, &white).unwrap().abs() < 1e-12);
        let g = ImageBuffer::filled(8, 8, 3, 100).unwrap();
        let g1 = ImageBuffer::filled(8, 8, 3, 101).unwrap();
        assert!((psnr(&g, &g1).unwrap() - 48.130_803_608_679_1).abs() < 1e-9);
        let b = random_image(16, 16, 1, 2);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!(psnr(&a, &random_image(16, 8, 1, 1)).is_err());
    }

    #[test]
    fn ssim_examples() {
        for c in [1, 3] {
            let a = random_image(24, 20, c, 3);
            assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        }
        // checkerboard texture and its negative
        let px: Vec<u8> = (0..32 * 32).map(|i| if ((i % 32) + i / 32) % 2 == 0 { 20 } else { 235 }).collect();
        let tex = ImageBuffer::new(32, 32, 1, px.clone()).unwrap();
        let neg = ImageBuffer::new(32, 32, 1, px.iter().map(|p| 255 - p).collect()).unwrap();
        let s = ssim(&tex, &neg).unwrap();
        assert!(s < 0.2, "{s}");
        let noisy = random_image(32, 32, 1, 4);
        let s = ssim(&random_image(32, 32, 1, 5), &noisy).unwrap();
        assert!((-1.0..=1.0).contains(&s));
        assert!(matches!(ssim(&random_image(10, 30, 1, 0), &random_image(10, 30, 1, 1)), Err(Error::Domain(_))));
    }

    #[test]
    fn ssim_window_weights_sum_to_one() {
        let k = gaussian_kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[10]);
    }

    #[test]
    fn closed_form_moments() {
        let m = MomentStats::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(m.skewness.abs() < 1e-15);
        // population m4/m2² for {±0.5, ±1.5}: m2 = 1.25, m4 = 2.5625
        assert!((m.excess_kurtosis - (2.5625 / 1.5625 - 3.0)).abs() < 1e-12);
        assert_eq!((m.min, m.max), (1.0, 4.0));
        assert!(MomentStats::from_values(&[1.0]).is_err());
        let c = MomentStats::from_values(&[2.0; 5]).unwrap();
        assert_eq!((c.std, c.excess_kurtosis), (0.0, 0.0));
    }

    #[test]
    fn normal_moments_on_a_million_samples() {
        let mut rng = Rng::new(2024);
        let v: Vec<f64> = (0..1_000_000).map(|_| rng.normal()).collect();
        let m = MomentStats::from_values(&v).unwrap();
        assert!(m.mean.abs() < 0.01);
        assert!((m.std - 1.0).abs() < 0.01);
        assert!(m.skewness.abs() < 0.02);
        assert!(m.excess_kurtosis.abs() < 0.05, "{}", m.excess_kurtosis);
    }

    #[test]
    fn histogram_edges_and_counts() {
        let v = [0.0, 0.1, 0.5, 1.0, 1.0];
        let h = Histogram::from_values("x", &v, 4).unwrap();
        assert_eq!(h.counts, vec![2, 0, 1, 2]);
        assert!(h.bin_edges.windows(2).all(|e| e[0] < e[1]));
        assert_eq!(*h.bin_edges.last().unwrap(), 1.0);
        let c = Histogram::from_values("c", &[3.0; 4], 8).unwrap();
        assert_eq!(c.counts.iter().sum::<u64>(), 4);
        assert!(Histogram::from_values("n", &[f64::NAN, 1.0], 2).is_err());
    }

    #[test]
    fn edge_ratio_separates_shapes() {
        let mut rng = Rng::new(1);
        let arcsine: Vec<f64> = (0..10_000).map(|_| (std::f64::consts::PI * rng.uniform()).cos()).collect();
        let normal: Vec<f64> = (0..10_000).map(|_| 0.3 * rng.normal()).collect();
        assert!(edge_to_center_ratio(&arcsine, 0.2, 0.8) > 2.0);
        assert!(edge_to_center_ratio(&normal, 0.2, 0.8) < 0.5);
    }

    #[test]
    fn csv_layout() {
        let d = Distribution::from_values("layer1.weight", &[0.0, 1.0, 2.0], 2).unwrap();
        let s = histograms_csv(&[&d]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "label,bin_left,bin_right,count");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("layer1.weight,"));
        let mut map = BTreeMap::new();
        map.insert("layer1.weight".to_string(), d);
        assert!(moments_csv(&map).lines().nth(1).unwrap().starts_with("layer1.weight,3,"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn histogram_conserves_counts(v in proptest::collection::vec(-1e3f64..1e3, 1..400), bins in 1usize..300) {
                let h = Histogram::from_values("p", &v, bins).unwrap();
                prop_assert_eq!(h.counts.iter().sum::<u64>(), v.len() as u64);
                prop_assert_eq!(h.total, v.len() as u64);
                prop_assert!(h.bin_edges.windows(2).all(|e| e[0] < e[1]));
            }
        }
    }
}
