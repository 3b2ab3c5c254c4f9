//! Quantized inference in three configurations: W32A32 (the float model),
//! W8A32 (dequantized weights, float compute) and W8A8 (integer matmul on
//! quantized weights and activations, in the Hadamard domain for DHQ).
//!
//! A W8A8 layer computes, for each input row `x`:
//!
//! ```text
//! x′  = Ĥₙ·pad(x)                 float, skipped unless DHQ
//! u   = affine codes of x′        calibrated range, act_bits
//! acc = Σᵢ q_w[o,i]·u[i]          integer
//! p   = s_w·(s_x·acc + x_min·Σᵢ q_w[o,i])
//! y   = crop(Ĥₘ·p) + b            then sine, in float
//! ```
//!
//! where `q_w` are the symmetric codes of `Ĥₘ·W·Ĥₙ`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::hadamard::{rotate_rows, unrotate_rows, HadamardPlan};
use crate::imageio::ImageBuffer;
use crate::linalg::{gemm, Matrix, Rng, Trans};
use crate::model::{put_f64, put_u32, ByteReader, SirenLayer, SirenModel};
use crate::quant::{
    check_bits, quantize_weight, Codes, QuantConfig, QuantizedTensor, RangeMode, Rounding, Scheme, UniformGrid,
    FULL_PRECISION_BITS,
};
use crate::trainer::{coordinate_grid, denormalize_sample, Dataset};

/// Rows processed per block during calibration and W8A8 inference.
const BLOCK_ROWS: usize = 4096;
/// Largest inner dimension the integer kernel accepts.
pub const MAX_INNER_DIM: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Float weights and activations.
    W32A32,
    /// Quantized weights, float activations.
    W8A32,
    /// Quantized weights and activations.
    W8A8,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::W32A32, Mode::W8A32, Mode::W8A8];

    pub fn for_config(cfg: &QuantConfig) -> Mode {
        match (cfg.quantizes_weights(), cfg.quantizes_activations()) {
            (false, _) => Mode::W32A32,
            (true, false) => Mode::W8A32,
            (true, true) => Mode::W8A8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::W32A32 => "W32A32",
            Mode::W8A32 => "W8A32",
            Mode::W8A8 => "W8A8",
        }
    }

    fn tag(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

/// Integer accumulator width for a dot product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Accumulator {
    I32,
    I64,
}

impl Accumulator {
    /// Narrowest accumulator that cannot overflow for `k` products of codes
    /// bounded by `max_w` and `max_x` in magnitude.
    pub fn for_operands(k: usize, max_w: i64, max_x: i64) -> Result<Self> {
        if k > MAX_INNER_DIM {
            return Err(Error::Config(format!("inner dimension {k} exceeds {MAX_INNER_DIM}")));
        }
        let bound = (k as i128) * (max_w as i128) * (max_x as i128);
        Ok(if bound <= i32::MAX as i128 { Accumulator::I32 } else { Accumulator::I64 })
    }
}

/// `acc[r, o] = Σᵢ x[r, i]·w[o, i]` over row-major `x` (`n × k`) and `w` (`m × k`).
pub fn int_matmul(x: &[i32], n: usize, w: &[i32], m: usize, k: usize, acc: Accumulator) -> Result<Vec<i64>> {
    if x.len() != n * k || w.len() != m * k {
        return Err(shape_err!("integer matmul buffers do not match {n}x{k} · ({m}x{k})ᵀ"));
    }
    let mut out = vec![0i64; n * m];
    if k == 0 {
        return Ok(out);
    }
    for (xr, orow) in x.chunks_exact(k).zip(out.chunks_exact_mut(m)) {
        for (wr, o) in w.chunks_exact(k).zip(orow.iter_mut()) {
            *o = match acc {
                Accumulator::I32 => dot_i32(xr, wr) as i64,
                Accumulator::I64 => xr.iter().zip(wr).map(|(&a, &b)| a as i64 * b as i64).sum(),
            };
        }
    }
    Ok(out)
}

#[inline]
fn dot_i32(a: &[i32], b: &[i32]) -> i32 {
    // eight independent lanes so the compiler keeps the loop vectorized
    let mut lanes = [0i32; 8];
    let (ac, ar) = a.split_at(a.len() / 8 * 8);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(8).zip(bc.chunks_exact(8)) {
        for l in 0..8 {
            lanes[l] += x[l] * y[l];
        }
    }
    let tail: i32 = ar.iter().zip(br).map(|(&x, &y)| x * y).sum();
    lanes.iter().sum::<i32>() + tail
}

/// Activation quantizer for one layer input.
#[derive(Clone, Debug, PartialEq)]
pub struct ActQuant {
    pub grid: UniformGrid,
    /// Rotation applied to the input before quantizing (DHQ only).
    pub rotation: Option<HadamardPlan>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerWeight {
    Float(Matrix),
    Quantized(QuantizedTensor),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedLayer {
    pub weight: LayerWeight,
    pub bias: Vec<f64>,
    pub apply_sine: bool,
    pub omega: f64,
    out_dim: usize,
    in_dim: usize,
    /// Integer-path constants: `Σᵢ q_w[o, i]` per payload row.
    code_row_sums: Vec<i64>,
}

impl QuantizedLayer {
    fn new(weight: LayerWeight, bias: Vec<f64>, apply_sine: bool, omega: f64) -> Result<Self> {
        let (out_dim, in_dim) = match &weight {
            LayerWeight::Float(w) => w.shape(),
            LayerWeight::Quantized(q) => q.logical_shape(),
        };
        if bias.len() != out_dim {
            return Err(shape_err!("bias has {} entries for {out_dim} outputs", bias.len()));
        }
        let code_row_sums = match &weight {
            LayerWeight::Quantized(q) => {
                let cols = q.shape().1;
                q.values().chunks_exact(cols).map(|r| r.iter().map(|&v| v as i64).sum()).collect()
            }
            LayerWeight::Float(_) => Vec::new(),
        };
        Ok(Self { weight, bias, apply_sine, omega, out_dim, in_dim, code_row_sums })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn tensor(&self) -> Option<&QuantizedTensor> {
        match &self.weight {
            LayerWeight::Quantized(q) => Some(q),
            LayerWeight::Float(_) => None,
        }
    }

    /// Weight matrix in the original domain (dequantized if needed).
    pub fn effective_weight(&self) -> Result<Matrix> {
        match &self.weight {
            LayerWeight::Float(w) => Ok(w.clone()),
            LayerWeight::Quantized(q) => crate::quant::dequantize(q),
        }
    }

    fn activate(&self, z: &mut Matrix) {
        if self.apply_sine {
            let w = self.omega;
            z.as_mut_slice().iter_mut().for_each(|v| *v = (w * *v).sin());
        }
    }

    fn add_bias(&self, z: &mut Matrix) {
        let b = &self.bias;
        for r in 0..z.rows() {
            z.row_mut(r).iter_mut().zip(b).for_each(|(v, &bb)| *v += bb);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedModel {
    layers: Vec<QuantizedLayer>,
    config: QuantConfig,
    mode: Mode,
    /// Per-layer input quantizers; present iff mode is W8A8.
    act_quant: Option<Vec<ActQuant>>,
    /// Quantizer for the final layer's output (W8A8 only).
    output_quant: Option<UniformGrid>,
    seed: u64,
    /// Float model with the effective weights, for the float modes.
    float_model: SirenModel,
}

/// Activation ranges gathered by [`calibrate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub inputs: Vec<ActQuant>,
    pub output: UniformGrid,
}

fn block_range(m: &Matrix, lo: &mut f64, hi: &mut f64) {
    for &v in m.as_slice() {
        *lo = lo.min(v);
        *hi = hi.max(v);
    }
}

/// Fixes activation ranges on the full grid.
///
/// Inputs of layers after a sine are bounded by `[−1, 1]` without looking at
/// data. Rotated inputs (DHQ), the first layer's coordinates and the final
/// output use min/max over `data`.
pub fn calibrate(model: &SirenModel, data: &Dataset, cfg: &QuantConfig) -> Result<Calibration> {
    cfg.validate()?;
    if !cfg.quantizes_activations() {
        return Err(Error::Config("calibration needs quantized activations".into()));
    }
    let bits = cfg.act_bits;
    let rotate = cfg.scheme == Scheme::Dhq;
    let layers = model.layers();
    let plans: Vec<HadamardPlan> = layers.iter().map(|l| HadamardPlan::new(l.in_dim())).collect::<Result<_>>()?;
    let n_in = layers.len();
    let mut lo = vec![f64::INFINITY; n_in + 1];
    let mut hi = vec![f64::NEG_INFINITY; n_in + 1];
    let n = data.coords.rows();
    for start in (0..n).step_by(BLOCK_ROWS) {
        let rows = BLOCK_ROWS.min(n - start);
        let mut x = Matrix::from_fn(rows, data.coords.cols(), |r, c| data.coords.get(start + r, c));
        for (k, layer) in layers.iter().enumerate() {
            let analytic = k > 0 && layers[k - 1].apply_sine && !rotate;
            if !analytic {
                if rotate {
                    block_range(&rotate_rows(&x, &plans[k])?, &mut lo[k], &mut hi[k]);
                } else {
                    block_range(&x, &mut lo[k], &mut hi[k]);
                }
            }
            x = layer.activate(&layer.affine(&x)?);
        }
        block_range(&x, &mut lo[n_in], &mut hi[n_in]);
    }
    let inputs = (0..n_in)
        .map(|k| {
            let analytic = k > 0 && layers[k - 1].apply_sine && !rotate;
            let (a, b) = if analytic { (-1.0, 1.0) } else { (lo[k], hi[k]) };
            ActQuant {
                grid: UniformGrid::from_range(a, b, bits, RangeMode::Affine),
                rotation: rotate.then_some(plans[k]),
            }
        })
        .collect();
    let output = UniformGrid::from_range(lo[n_in], hi[n_in], bits, RangeMode::Affine);
    if !(output.lo.is_finite() && output.hi.is_finite()) {
        return Err(Error::Data("calibration produced a non-finite range".into()));
    }
    Ok(Calibration { inputs, output })
}

impl QuantizedModel {
    /// Quantizes `model`'s weights per `cfg` and, for W8A8, calibrates
    /// activation ranges on `data`. `seed` drives stochastic rounding.
    pub fn quantize(model: &SirenModel, cfg: &QuantConfig, data: Option<&Dataset>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mode = Mode::for_config(cfg);
        let mut rng = Rng::new(seed).split("weights");
        let layers = model
            .layers()
            .iter()
            .map(|l| {
                let weight = if cfg.quantizes_weights() {
                    LayerWeight::Quantized(quantize_weight(&l.weight, cfg, &mut rng)?)
                } else {
                    LayerWeight::Float(l.weight.clone())
                };
                QuantizedLayer::new(weight, l.bias.clone(), l.apply_sine, l.omega)
            })
            .collect::<Result<Vec<_>>>()?;
        let (act_quant, output_quant) = if mode == Mode::W8A8 {
            let data = data.ok_or_else(|| Error::Config("W8A8 needs a calibration dataset".into()))?;
            let c = calibrate(model, data, cfg)?;
            (Some(c.inputs), Some(c.output))
        } else {
            (None, None)
        };
        Self::assemble(layers, cfg.clone(), mode, act_quant, output_quant, seed)
    }

    fn assemble(
        layers: Vec<QuantizedLayer>,
        config: QuantConfig,
        mode: Mode,
        act_quant: Option<Vec<ActQuant>>,
        output_quant: Option<UniformGrid>,
        seed: u64,
    ) -> Result<Self> {
        if (mode == Mode::W8A8) != act_quant.is_some() || act_quant.is_some() != output_quant.is_some() {
            return Err(Error::Config("activation calibration must be present exactly for W8A8".into()));
        }
        if let Some(a) = &act_quant {
            if a.len() != layers.len() {
                return Err(Error::Config("one activation quantizer per layer is required".into()));
            }
        }
        let float_layers = layers
            .iter()
            .map(|l| SirenLayer::new(l.effective_weight()?, l.bias.clone(), l.apply_sine, l.omega))
            .collect::<Result<Vec<_>>>()?;
        let float_model = SirenModel::new(float_layers)?;
        Ok(Self { layers, config, mode, act_quant, output_quant, seed, float_model })
    }

    pub fn layers(&self) -> &[QuantizedLayer] {
        &self.layers
    }

    pub fn config(&self) -> &QuantConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn act_quant(&self) -> Option<&[ActQuant]> {
        self.act_quant.as_deref()
    }

    pub fn output_quant(&self) -> Option<&UniformGrid> {
        self.output_quant.as_ref()
    }

    /// Float model carrying the dequantized weights.
    pub fn effective_model(&self) -> &SirenModel {
        &self.float_model
    }

    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.out_dim, l.in_dim)).collect()
    }

    pub fn infer(&self, coords: &Matrix) -> Result<Matrix> {
        match self.mode {
            Mode::W32A32 | Mode::W8A32 => self.float_model.forward(coords),
            Mode::W8A8 => self.infer_w8a8(coords),
        }
    }

    fn infer_w8a8(&self, coords: &Matrix) -> Result<Matrix> {
        let first = &self.layers[0];
        if coords.cols() != first.in_dim {
            return Err(shape_err!("model expects {} coordinates, got {}", first.in_dim, coords.cols()));
        }
        let acts = self.act_quant.as_ref().expect("W8A8 carries calibration");
        let out_grid = self.output_quant.expect("W8A8 carries calibration");
        let mut rng = match self.config.rounding {
            Rounding::Stochastic => Some(Rng::new(self.seed).split("activations")),
            Rounding::Nearest => None,
        };
        let n = coords.rows();
        let out_dim = self.layers.last().unwrap().out_dim;
        let mut out = Vec::with_capacity(n * out_dim);
        for start in (0..n).step_by(BLOCK_ROWS) {
            let rows = BLOCK_ROWS.min(n - start);
            let mut x = Matrix::from_fn(rows, coords.cols(), |r, c| coords.get(start + r, c));
            for (layer, aq) in self.layers.iter().zip(acts) {
                x = self.layer_w8a8(layer, aq, &x, rng.as_mut())?;
            }
            // the final output passes through its own activation quantizer
            for &v in x.as_slice() {
                let q = out_grid.encode(v, self.config.rounding, rng.as_mut());
                out.push(q as f64 * out_grid.scale() + out_grid.offset());
            }
        }
        Matrix::new(n, out_dim, out)
    }

    fn layer_w8a8(
        &self,
        layer: &QuantizedLayer,
        aq: &ActQuant,
        x: &Matrix,
        mut rng: Option<&mut Rng>,
    ) -> Result<Matrix> {
        let q = layer.tensor().ok_or_else(|| Error::Config("W8A8 layer without quantized weights".into()))?;
        let xr = match &aq.rotation {
            Some(p) => rotate_rows(x, p)?,
            None => x.clone(),
        };
        let rounding = self.config.rounding;
        let codes: Vec<i32> = xr.as_slice().iter().map(|&v| aq.grid.encode(v, rounding, rng.as_deref_mut())).collect();
        let (s_x, x_min) = (aq.grid.scale(), aq.grid.offset());
        let (m, k) = q.shape();
        if xr.cols() != k {
            return Err(shape_err!("activation width {} does not match weight payload width {k}", xr.cols()));
        }
        let mut prod = match q.codes() {
            Codes::Symmetric { .. } => {
                let (_, qmax) = q.code_range();
                let (_, umax) = aq.grid.code_bounds();
                let acc = int_matmul(
                    &codes,
                    xr.rows(),
                    q.values(),
                    m,
                    k,
                    Accumulator::for_operands(k, qmax as i64, umax as i64)?,
                )?;
                let s_w = q.scale();
                let data = acc
                    .chunks_exact(m)
                    .flat_map(|row| {
                        row.iter()
                            .zip(&layer.code_row_sums)
                            .map(move |(&a, &rs)| s_w * (s_x * a as f64 + x_min * rs as f64))
                    })
                    .collect();
                Matrix::new(xr.rows(), m, data)?
            }
            // codebook weights have no integer grid: multiply dequantized values in float
            Codes::Codebook(_) | Codes::Affine { .. } => {
                let xd = Matrix::new(xr.rows(), k, codes.iter().map(|&c| c as f64 * s_x + x_min).collect())?;
                gemm(&xd, Trans::No, &q.dequantize_payload(), Trans::Yes)?
            }
        };
        if let Some((rp, _)) = q.transform() {
            prod = unrotate_rows(&prod, &rp)?;
        }
        layer.add_bias(&mut prod);
        layer.activate(&mut prod);
        Ok(prod)
    }

    /// Runs the full grid and packs the result as 8-bit pixels.
    pub fn reconstruct_image(&self, width: usize, height: usize, channels: usize) -> Result<ImageBuffer> {
        let out_dim = self.layers.last().map(|l| l.out_dim).unwrap_or(0);
        if channels != out_dim {
            return Err(shape_err!("model produces {out_dim} channels, {channels} requested"));
        }
        let out = self.infer(&coordinate_grid(width, height))?;
        ImageBuffer::new(width, height, channels, out.as_slice().iter().map(|&v| denormalize_sample(v)).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path.as_ref())?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(QMODEL_MAGIC);
        put_u32(&mut out, QMODEL_VERSION);
        out.push(self.mode.tag());
        out.push(scheme_tag(self.config.scheme));
        put_u32(&mut out, self.config.weight_bits);
        put_u32(&mut out, self.config.act_bits);
        out.push(matches!(self.config.rounding, Rounding::Stochastic) as u8);
        put_u32(&mut out, self.config.kmeans_max_iters as u32);
        put_f64(&mut out, self.config.kmeans_tol);
        out.extend_from_slice(&self.seed.to_le_bytes());
        put_u32(&mut out, self.layers.len() as u32);
        for (i, l) in self.layers.iter().enumerate() {
            put_u32(&mut out, l.out_dim as u32);
            put_u32(&mut out, l.in_dim as u32);
            out.push(l.apply_sine as u8);
            put_f64(&mut out, l.omega);
            l.bias.iter().for_each(|&b| put_f64(&mut out, b));
            match &l.weight {
                LayerWeight::Float(w) => {
                    out.push(0);
                    w.as_slice().iter().for_each(|&v| put_f64(&mut out, v));
                }
                LayerWeight::Quantized(q) => {
                    out.push(1);
                    q.encode(&mut out);
                }
            }
            match &self.act_quant {
                Some(a) => {
                    out.push(1);
                    put_grid(&mut out, &a[i].grid);
                    match &a[i].rotation {
                        Some(p) => {
                            out.push(1);
                            put_u32(&mut out, p.logical_dim() as u32);
                            put_u32(&mut out, p.padded_dim() as u32);
                        }
                        None => out.push(0),
                    }
                }
                None => out.push(0),
            }
        }
        match &self.output_quant {
            Some(g) => {
                out.push(1);
                put_grid(&mut out, g);
            }
            None => out.push(0),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(QMODEL_MAGIC.len())? != QMODEL_MAGIC {
            return Err(Error::Format("not a quantized model".into()));
        }
        let version = r.u32()?;
        if version != QMODEL_VERSION {
            return Err(Error::Format(format!("unsupported quantized model version {version}")));
        }
        let mode_tag = r.u8()?;
        let mode = Mode::ALL
            .into_iter()
            .find(|m| m.tag() == mode_tag)
            .ok_or_else(|| Error::Format(format!("unknown mode tag {mode_tag}")))?;
        let scheme_t = r.u8()?;
        let scheme = Scheme::ALL
            .into_iter()
            .find(|&s| scheme_tag(s) == scheme_t)
            .ok_or_else(|| Error::Format(format!("unknown scheme tag {scheme_t}")))?;
        let config = QuantConfig {
            scheme,
            weight_bits: r.u32()?,
            act_bits: r.u32()?,
            rounding: if r.u8()? == 1 { Rounding::Stochastic } else { Rounding::Nearest },
            kmeans_max_iters: r.u32()? as usize,
            kmeans_tol: r.f64()?,
        };
        config.validate().map_err(|e| Error::Format(e.to_string()))?;
        if Mode::for_config(&config) != mode {
            return Err(Error::Format("mode disagrees with bit widths".into()));
        }
        let seed = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let n = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n);
        let mut acts = Vec::new();
        for _ in 0..n {
            let out_dim = r.u32()? as usize;
            let in_dim = r.u32()? as usize;
            let apply_sine = r.u8()? != 0;
            let omega = r.f64()?;
            let bias = r.f64s(out_dim)?;
            let weight = match r.u8()? {
                0 => LayerWeight::Float(Matrix::new(out_dim, in_dim, r.f64s(out_dim * in_dim)?)?),
                1 => {
                    let q = QuantizedTensor::decode(&mut r)?;
                    if q.logical_shape() != (out_dim, in_dim) {
                        return Err(Error::Format("weight payload disagrees with layer shape".into()));
                    }
                    LayerWeight::Quantized(q)
                }
                t => return Err(Error::Format(format!("unknown weight kind {t}"))),
            };
            layers.push(QuantizedLayer::new(weight, bias, apply_sine, omega)?);
            if r.u8()? == 1 {
                let grid = get_grid(&mut r)?;
                let rotation = match r.u8()? {
                    0 => None,
                    _ => Some(HadamardPlan::from_parts(r.u32()? as usize, r.u32()? as usize)?),
                };
                acts.push(ActQuant { grid, rotation });
            }
        }
        let output_quant = if r.u8()? == 1 { Some(get_grid(&mut r)?) } else { None };
        r.finish()?;
        let act_quant = if acts.is_empty() { None } else { Some(acts) };
        Self::assemble(layers, config, mode, act_quant, output_quant, seed).map_err(|e| Error::Format(e.to_string()))
    }
}

const QMODEL_MAGIC: &[u8; 8] = b"DHQQUANT";
const QMODEL_VERSION: u32 = 1;

fn scheme_tag(s: Scheme) -> u8 {
    s as u8
}

fn put_grid(out: &mut Vec<u8>, g: &UniformGrid) {
    put_u32(out, g.bits);
    out.push(matches!(g.mode, RangeMode::Symmetric) as u8);
    put_f64(out, g.lo);
    put_f64(out, g.hi);
}

fn get_grid(r: &mut ByteReader<'_>) -> Result<UniformGrid> {
    let bits = r.u32()?;
    if bits == FULL_PRECISION_BITS {
        return Err(Error::Format("activation grid cannot be full precision".into()));
    }
    check_bits(bits).map_err(|e| Error::Format(e.to_string()))?;
    let mode = if r.u8()? == 1 { RangeMode::Symmetric } else { RangeMode::Affine };
    Ok(UniformGrid { bits, mode, lo: r.f64()?, hi: r.f64()? })
}
