//! Post-training quantizers: uniform (affine or symmetric, nearest or
//! stochastic rounding), 1-D k-means codebooks, and DHQ, which rotates a
//! weight matrix into the two-sided Hadamard domain before quantizing it
//! uniformly.
//!
//! Affine codes live in `[0, 2ᵇ − 1]` and dequantize as `q·s + x_min`;
//! symmetric codes live in `[−(2ᵇ⁻¹ − 1), 2ᵇ⁻¹ − 1]` and dequantize as `q·s`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::{inverse_transform_2d, transform_2d, HadamardPlan};
use crate::linalg::{Matrix, Rng};
use crate::model::{put_f64, put_u32, ByteReader};

/// Bit width that means "leave in floating point".
pub const FULL_PRECISION_BITS: u32 = 32;
pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Uniform,
    Stochastic,
    Kmeans,
    Dhq,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Uniform, Scheme::Stochastic, Scheme::Kmeans, Scheme::Dhq];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::Stochastic => "stochastic",
            Scheme::Kmeans => "kmeans",
            Scheme::Dhq => "dhq",
        }
    }

    fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(t: u8) -> Result<Self> {
        Scheme::ALL.into_iter().find(|s| s.tag() == t).ok_or_else(|| Error::Format(format!("unknown scheme tag {t}")))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}; expected uniform, stochastic, kmeans or dhq")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Round half to even.
    Nearest,
    /// Round up with probability equal to the fractional part.
    Stochastic,
}

impl FromStr for Rounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nearest" => Ok(Rounding::Nearest),
            "stochastic" => Ok(Rounding::Stochastic),
            _ => Err(Error::Config(format!("unknown rounding {s:?}"))),
        }
    }
}

/// How a uniform quantizer places its grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeMode {
    /// `[min, max]` onto `[0, 2ᵇ − 1]`.
    Affine,
    /// `[−max|x|, max|x|]` onto signed codes with zero exactly representable.
    Symmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantConfig {
    pub scheme: Scheme,
    pub weight_bits: u32,
    pub act_bits: u32,
    pub rounding: Rounding,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Dhq,
            weight_bits: 8,
            act_bits: 8,
            rounding: Rounding::Nearest,
            kmeans_max_iters: 300,
            kmeans_tol: 1e-6,
        }
    }
}

pub fn check_bits(bits: u32) -> Result<()> {
    if (MIN_BITS..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::Config(format!("bit width {bits} outside [{MIN_BITS}, {MAX_BITS}]")))
    }
}

impl QuantConfig {
    /// Bit widths must be in `[2, 16]` or exactly 32 (unquantized).
    pub fn validate(&self) -> Result<()> {
        for b in [self.weight_bits, self.act_bits] {
            if b != FULL_PRECISION_BITS {
                check_bits(b)?;
            }
        }
        if self.weight_bits == FULL_PRECISION_BITS && self.act_bits != FULL_PRECISION_BITS {
            return Err(Error::Config("activation quantization requires quantized weights".into()));
        }
        if self.kmeans_max_iters == 0 || self.kmeans_tol.is_nan() || self.kmeans_tol < 0.0 {
            return Err(Error::Config("k-means needs at least one iteration and a non-negative tolerance".into()));
        }
        Ok(())
    }

    pub fn quantizes_weights(&self) -> bool {
        self.weight_bits != FULL_PRECISION_BITS
    }

    pub fn quantizes_activations(&self) -> bool {
        self.act_bits != FULL_PRECISION_BITS
    }
}

/// How the integer payload maps back to reals.
#[derive(Clone, Debug, PartialEq)]
pub enum Codes {
    /// `value = lo·(1 − q/L) + hi·(q/L)` with `L = 2ᵇ − 1`, i.e. `q·s + lo`.
    Affine { lo: f64, hi: f64 },
    /// `value = a·(q/Q)` with `Q = 2ᵇ⁻¹ − 1`, i.e. `q·s`.
    Symmetric { max_abs: f64 },
    /// `value = codebook[q]`, codebook sorted ascending.
    Codebook(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedTensor {
    values: Vec<i32>,
    rows: usize,
    cols: usize,
    bits: u32,
    scheme: Scheme,
    codes: Codes,
    /// Row and column plans when the payload is in the Hadamard domain.
    transform: Option<(HadamardPlan, HadamardPlan)>,
}

fn affine_levels(bits: u32) -> i32 {
    (1i32 << bits) - 1
}

fn symmetric_levels(bits: u32) -> i32 {
    (1i32 << (bits - 1)) - 1
}

impl QuantizedTensor {
    pub fn values(&self) -> &[i32] {
        &self.values
    }

    /// Shape of the stored payload (padded dims for Hadamard-domain tensors).
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Shape [`dequantize`] returns.
    pub fn logical_shape(&self) -> (usize, usize) {
        match &self.transform {
            Some((r, c)) => (r.logical_dim(), c.logical_dim()),
            None => (self.rows, self.cols),
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn codes(&self) -> &Codes {
        &self.codes
    }

    pub fn codebook(&self) -> Option<&[f64]> {
        match &self.codes {
            Codes::Codebook(c) => Some(c),
            _ => None,
        }
    }

    pub fn transform(&self) -> Option<(HadamardPlan, HadamardPlan)> {
        self.transform
    }

    /// Step between adjacent codes; 1 for a degenerate range, undefined (0) for codebooks.
    pub fn scale(&self) -> f64 {
        match self.codes {
            Codes::Affine { lo, hi } => {
                if hi > lo {
                    (hi - lo) / affine_levels(self.bits) as f64
                } else {
                    1.0
                }
            }
            Codes::Symmetric { max_abs } => {
                if max_abs > 0.0 {
                    max_abs / symmetric_levels(self.bits) as f64
                } else {
                    1.0
                }
            }
            Codes::Codebook(_) => 0.0,
        }
    }

    /// Real value of code 0: `x_min` for affine, 0 otherwise.
    pub fn offset(&self) -> f64 {
        match self.codes {
            Codes::Affine { lo, .. } => lo,
            _ => 0.0,
        }
    }

    /// Lowest and highest codes this tensor may hold.
    pub fn code_range(&self) -> (i32, i32) {
        match self.codes {
            Codes::Affine { .. } | Codes::Codebook(_) => (0, affine_levels(self.bits)),
            Codes::Symmetric { .. } => (-symmetric_levels(self.bits), symmetric_levels(self.bits)),
        }
    }

    /// Payload-domain reconstruction, before any inverse transform.
    pub fn dequantize_payload(&self) -> Matrix {
        let data = self.values.iter().map(|&q| self.code_value(q)).collect();
        Matrix::new(self.rows, self.cols, data).expect("payload shape is validated on construction")
    }

    #[inline]
    pub fn code_value(&self, q: i32) -> f64 {
        match &self.codes {
            Codes::Affine { lo, hi } => {
                if hi <= lo {
                    return *lo;
                }
                let t = q as f64 / affine_levels(self.bits) as f64;
                (lo * (1.0 - t) + hi * t).clamp(*lo, *hi)
            }
            Codes::Symmetric { max_abs } => max_abs * (q as f64 / symmetric_levels(self.bits) as f64),
            Codes::Codebook(c) => c[q as usize],
        }
    }
}

fn finite_range(x: &Matrix) -> Result<(f64, f64)> {
    let (lo, hi) = x
        .as_slice()
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo > hi {
        return Err(Error::Data("tensor has no finite values".into()));
    }
    Ok((lo, hi))
}

/// A uniform grid with a fixed range, reusable across tensors (activation
/// calibration fixes the range once and then encodes every batch).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub bits: u32,
    pub mode: RangeMode,
    /// Affine: `[lo, hi]`; symmetric: `[−hi, hi]` with `lo = −hi`.
    pub lo: f64,
    pub hi: f64,
}

impl UniformGrid {
    pub fn fit(x: &Matrix, bits: u32, mode: RangeMode) -> Result<Self> {
        check_bits(bits)?;
        let (lo, hi) = finite_range(x)?;
        Ok(Self::from_range(lo, hi, bits, mode))
    }

    pub fn from_range(lo: f64, hi: f64, bits: u32, mode: RangeMode) -> Self {
        match mode {
            RangeMode::Affine => Self { bits, mode, lo, hi },
            RangeMode::Symmetric => {
                let a = lo.abs().max(hi.abs());
                Self { bits, mode, lo: -a, hi: a }
            }
        }
    }

    fn levels(&self) -> i32 {
        match self.mode {
            RangeMode::Affine => affine_levels(self.bits),
            RangeMode::Symmetric => symmetric_levels(self.bits),
        }
    }

    pub fn scale(&self) -> f64 {
        match self.mode {
            RangeMode::Affine if self.hi > self.lo => (self.hi - self.lo) / self.levels() as f64,
            RangeMode::Symmetric if self.hi > 0.0 => self.hi / self.levels() as f64,
            _ => 1.0,
        }
    }

    /// Real value of code 0.
    pub fn offset(&self) -> f64 {
        match self.mode {
            RangeMode::Affine => self.lo,
            RangeMode::Symmetric => 0.0,
        }
    }

    pub fn code_bounds(&self) -> (i32, i32) {
        match self.mode {
            RangeMode::Affine => (0, self.levels()),
            RangeMode::Symmetric => (-self.levels(), self.levels()),
        }
    }

    /// Encodes one value; NaN maps to the code of 0 (or the lowest code), infinities saturate.
    #[inline]
    pub fn encode(&self, v: f64, rounding: Rounding, rng: Option<&mut Rng>) -> i32 {
        let (qmin, qmax) = self.code_bounds();
        let degenerate = match self.mode {
            RangeMode::Affine => self.hi <= self.lo,
            RangeMode::Symmetric => self.hi <= 0.0,
        };
        if degenerate {
            return match self.mode {
                RangeMode::Affine => 0,
                RangeMode::Symmetric => 0,
            };
        }
        let t = (v - self.offset()) / self.scale();
        let t = if t.is_nan() { 0.0 } else { t.clamp(qmin as f64, qmax as f64) };
        let q = match (rounding, rng) {
            (Rounding::Stochastic, Some(rng)) => {
                let f = t.floor();
                if rng.uniform() < t - f {
                    f + 1.0
                } else {
                    f
                }
            }
            _ => t.round_ties_even(),
        };
        (q as i32).clamp(qmin, qmax)
    }

    fn codes(&self) -> Codes {
        match self.mode {
            RangeMode::Affine => Codes::Affine { lo: self.lo, hi: self.hi },
            RangeMode::Symmetric => Codes::Symmetric { max_abs: self.hi },
        }
    }

    pub fn quantize(
        &self,
        x: &Matrix,
        rounding: Rounding,
        mut rng: Option<&mut Rng>,
        scheme: Scheme,
    ) -> Result<QuantizedTensor> {
        if rounding == Rounding::Stochastic && rng.is_none() {
            return Err(Error::Config("stochastic rounding needs a random stream".into()));
        }
        let values = x.as_slice().iter().map(|&v| self.encode(v, rounding, rng.as_deref_mut())).collect();
        Ok(QuantizedTensor {
            values,
            rows: x.rows(),
            cols: x.cols(),
            bits: self.bits,
            scheme,
            codes: self.codes(),
            transform: None,
        })
    }
}

fn uniform_scheme(rounding: Rounding) -> Scheme {
    match rounding {
        Rounding::Nearest => Scheme::Uniform,
        Rounding::Stochastic => Scheme::Stochastic,
    }
}

/// Affine min/max quantizer.
pub fn quantize_uniform(x: &Matrix, bits: u32, rounding: Rounding, rng: Option<&mut Rng>) -> Result<QuantizedTensor> {
    quantize_uniform_with(x, bits, RangeMode::Affine, rounding, rng)
}

pub fn quantize_uniform_with(
    x: &Matrix,
    bits: u32,
    mode: RangeMode,
    rounding: Rounding,
    rng: Option<&mut Rng>,
) -> Result<QuantizedTensor> {
    UniformGrid::fit(x, bits, mode)?.quantize(x, rounding, rng, uniform_scheme(rounding))
}

/// Rotates `w` to `Ĥₘ·w·Ĥₙ`, then applies the affine uniform quantizer.
pub fn quantize_dhq_weight(
    w: &Matrix,
    bits: u32,
    rounding: Rounding,
    rng: Option<&mut Rng>,
) -> Result<QuantizedTensor> {
    quantize_dhq_with(w, bits, RangeMode::Affine, rounding, rng)
}

pub fn quantize_dhq_with(
    w: &Matrix,
    bits: u32,
    mode: RangeMode,
    rounding: Rounding,
    rng: Option<&mut Rng>,
) -> Result<QuantizedTensor> {
    let rp = HadamardPlan::new(w.rows())?;
    let cp = HadamardPlan::new(w.cols())?;
    let rotated = transform_2d(w, &rp, &cp)?;
    let mut q = UniformGrid::fit(&rotated, bits, mode)?.quantize(&rotated, rounding, rng, Scheme::Dhq)?;
    q.transform = Some((rp, cp));
    Ok(q)
}

pub fn dequantize(q: &QuantizedTensor) -> Result<Matrix> {
    let payload = q.dequantize_payload();
    match &q.transform {
        Some((rp, cp)) => inverse_transform_2d(&payload, rp, cp),
        None => Ok(payload),
    }
}

/// Result of 1-D Lloyd iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct KmeansFit {
    /// Sorted ascending.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Within-cluster MSE after each assignment step.
    pub mse_history: Vec<f64>,
    pub iterations: usize,
}

fn nearest_sorted(centroids: &[f64], v: f64) -> usize {
    // first centroid at or above v, or its left neighbour if that is closer
    let i = centroids.partition_point(|&c| c < v);
    if i == 0 {
        0
    } else if i == centroids.len() || v - centroids[i - 1] <= centroids[i] - v {
        i - 1
    } else {
        i
    }
}

/// Lloyd's algorithm on scalars with `k` centroids.
///
/// Centroids start at the data's `(i + ½)/k` quantiles. When the data has at
/// most `k` distinct values the codebook is those values (padded by repeating
/// the largest), which reconstructs exactly. An emptied cluster is re-seeded at
/// the worst-fit sample.
pub fn kmeans_1d(values: &[f64], k: usize, max_iters: usize, tol: f64) -> Result<KmeansFit> {
    if values.is_empty() || k == 0 {
        return Err(Error::Data("k-means needs data and at least one cluster".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("k-means input contains non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let n = values.len();
    let assign_all = |c: &[f64]| -> (Vec<usize>, f64) {
        let a: Vec<usize> = values.iter().map(|&v| nearest_sorted(c, v)).collect();
        let sse: f64 = values.iter().zip(&a).map(|(&v, &i)| (v - c[i]).powi(2)).sum();
        (a, sse / n as f64)
    };
    if distinct.len() <= k {
        let mut centroids = distinct.clone();
        centroids.resize(k, *distinct.last().unwrap());
        let (assignments, mse) = assign_all(&centroids);
        return Ok(KmeansFit { centroids, assignments, mse_history: vec![mse], iterations: 0 });
    }
    let mut centroids: Vec<f64> = (0..k).map(|i| sorted[(((i as f64 + 0.5) / k as f64) * n as f64) as usize]).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let (assignments, mse) = assign_all(&centroids);
        history.push(mse);
        if iterations == max_iters {
            return Ok(KmeansFit { centroids, assignments, mse_history: history, iterations });
        }
        iterations += 1;
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for (&v, &i) in values.iter().zip(&assignments) {
            sum[i] += v;
            count[i] += 1;
        }
        let mut next: Vec<f64> =
            (0..k).map(|i| if count[i] > 0 { sum[i] / count[i] as f64 } else { centroids[i] }).collect();
        if count.contains(&0) {
            // re-seed each empty cluster on the worst-served sample
            let mut err: Vec<(f64, usize)> =
                values.iter().zip(&assignments).enumerate().map(|(j, (&v, &i))| ((v - next[i]).abs(), j)).collect();
            err.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut worst = err.into_iter().map(|(_, j)| values[j]);
            for i in 0..k {
                if count[i] == 0 {
                    if let Some(v) = worst.find(|v| !next.contains(v)) {
                        next[i] = v;
                    }
                }
            }
        }
        next.sort_by(f64::total_cmp);
        let moved = centroids.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        centroids = next;
        if moved < tol {
            let (assignments, mse) = assign_all(&centroids);
            history.push(mse);
            return Ok(KmeansFit { centroids, assignments, mse_history: history, iterations });
        }
    }
}

/// K-means codebook quantizer with `2ᵇ` centroids.
pub fn quantize_kmeans(x: &Matrix, bits: u32, cfg: &QuantConfig) -> Result<QuantizedTensor> {
    check_bits(bits)?;
    let finite: Vec<f64> = x.as_slice().to_vec();
    let fit = kmeans_1d(&finite, 1usize << bits, cfg.kmeans_max_iters, cfg.kmeans_tol)?;
    Ok(QuantizedTensor {
        values: fit.assignments.iter().map(|&i| i as i32).collect(),
        rows: x.rows(),
        cols: x.cols(),
        bits,
        scheme: Scheme::Kmeans,
        codes: Codes::Codebook(fit.centroids),
        transform: None,
    })
}

/// Weight quantizer for one scheme: symmetric range for the uniform-grid
/// schemes, codebooks for k-means.
pub fn quantize_weight(w: &Matrix, cfg: &QuantConfig, rng: &mut Rng) -> Result<QuantizedTensor> {
    let bits = cfg.weight_bits;
    match cfg.scheme {
        Scheme::Uniform => quantize_uniform_with(w, bits, RangeMode::Symmetric, Rounding::Nearest, None),
        Scheme::Stochastic => quantize_uniform_with(w, bits, RangeMode::Symmetric, Rounding::Stochastic, Some(rng)),
        Scheme::Kmeans => quantize_kmeans(w, bits, cfg),
        Scheme::Dhq => quantize_dhq_with(w, bits, RangeMode::Symmetric, Rounding::Nearest, None),
    }
}

// --- serialization -------------------------------------------------------

fn put_plan(out: &mut Vec<u8>, p: &HadamardPlan) {
    put_u32(out, p.logical_dim() as u32);
    put_u32(out, p.padded_dim() as u32);
}

impl QuantizedTensor {
    /// Appends this tensor to a container; codes are packed to one byte when
    /// `bits ≤ 8`, two bytes otherwise.
    pub fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.scheme.tag());
        put_u32(out, self.bits);
        put_u32(out, self.rows as u32);
        put_u32(out, self.cols as u32);
        match &self.codes {
            Codes::Affine { lo, hi } => {
                out.push(0);
                put_f64(out, *lo);
                put_f64(out, *hi);
            }
            Codes::Symmetric { max_abs } => {
                out.push(1);
                put_f64(out, *max_abs);
            }
            Codes::Codebook(c) => {
                out.push(2);
                put_u32(out, c.len() as u32);
                c.iter().for_each(|&v| put_f64(out, v));
            }
        }
        match &self.transform {
            Some((r, c)) => {
                out.push(1);
                put_plan(out, r);
                put_plan(out, c);
            }
            None => out.push(0),
        }
        for &q in &self.values {
            if self.bits <= 8 {
                out.push(q as u8);
            } else {
                out.extend_from_slice(&(q as u16).to_le_bytes());
            }
        }
    }

    pub(crate) fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let scheme = Scheme::from_tag(r.u8()?)?;
        let bits = r.u32()?;
        check_bits(bits).map_err(|e| Error::Format(e.to_string()))?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let codes = match r.u8()? {
            0 => Codes::Affine { lo: r.f64()?, hi: r.f64()? },
            1 => Codes::Symmetric { max_abs: r.f64()? },
            2 => {
                let n = r.u32()? as usize;
                if n != 1usize << bits {
                    return Err(Error::Format(format!("codebook of {n} entries for {bits} bits")));
                }
                Codes::Codebook(r.f64s(n)?)
            }
            t => return Err(Error::Format(format!("unknown code layout {t}"))),
        };
        let transform = match r.u8()? {
            0 => None,
            1 => {
                let rp = HadamardPlan::from_parts(r.u32()? as usize, r.u32()? as usize)?;
                let cp = HadamardPlan::from_parts(r.u32()? as usize, r.u32()? as usize)?;
                if (rp.padded_dim(), cp.padded_dim()) != (rows, cols) {
                    return Err(Error::Format("transform plans disagree with payload shape".into()));
                }
                Some((rp, cp))
            }
            t => return Err(Error::Format(format!("unknown transform flag {t}"))),
        };
        if (scheme == Scheme::Kmeans) != matches!(codes, Codes::Codebook(_))
            || (scheme == Scheme::Dhq) != transform.is_some()
        {
            return Err(Error::Format(format!("inconsistent metadata for scheme {scheme}")));
        }
        let n = rows.checked_mul(cols).filter(|&n| n > 0).ok_or_else(|| Error::Format("bad tensor shape".into()))?;
        let signed = matches!(codes, Codes::Symmetric { .. });
        let values: Vec<i32> = if bits <= 8 {
            r.take(n)?.iter().map(|&b| if signed { b as i8 as i32 } else { b as i32 }).collect()
        } else {
            r.take(2 * n)?
                .chunks_exact(2)
                .map(|c| {
                    let u = u16::from_le_bytes([c[0], c[1]]);
                    if signed {
                        u as i16 as i32
                    } else {
                        u as i32
                    }
                })
                .collect()
        };
        let t = QuantizedTensor { values, rows, cols, bits, scheme, codes, transform };
        let (lo, hi) = t.code_range();
        if t.values.iter().any(|&q| q < lo || q > hi) {
            return Err(Error::Format("code outside its bit range".into()));
        }
        Ok(t)
    }
}
