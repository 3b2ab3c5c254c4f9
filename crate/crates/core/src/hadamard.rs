//! Sylvester Hadamard matrices and the orthonormal transforms built on them.
//!
//! Every transform here uses `Ĥₙ = Hₙ/√n`, so the two-sided map
//! `W ↦ Ĥₘ·W·Ĥₙ` is an isometry and is its own inverse (Sylvester matrices are
//! symmetric). Dimensions that are not powers of two are zero-padded up to the
//! next one; a dimension of 1 leaves that side untouched.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::Matrix;

/// Padding plan for one side of a transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HadamardPlan {
    logical_dim: usize,
    padded_dim: usize,
}

impl HadamardPlan {
    pub fn new(logical_dim: usize) -> Result<Self> {
        if logical_dim == 0 {
            return Err(Error::Domain("transform dimension must be positive".into()));
        }
        Ok(Self { logical_dim, padded_dim: logical_dim.next_power_of_two() })
    }

    /// Rebuilds a plan read back from storage, checking its invariants.
    pub fn from_parts(logical_dim: usize, padded_dim: usize) -> Result<Self> {
        let plan = Self::new(logical_dim)?;
        if plan.padded_dim != padded_dim {
            return Err(Error::Format(format!(
                "padded dimension {padded_dim} is not the next power of two above {logical_dim}"
            )));
        }
        Ok(plan)
    }

    pub fn logical_dim(&self) -> usize {
        self.logical_dim
    }

    pub fn padded_dim(&self) -> usize {
        self.padded_dim
    }

    /// Transforms in this crate are always orthonormal.
    pub fn normalized(&self) -> bool {
        true
    }

    /// True when the transform on this side is the identity (`H₁`).
    pub fn is_trivial(&self) -> bool {
        self.padded_dim == 1
    }
}

/// `Hₙ` with `H₁ = [1]` and `H₂ₙ = [[Hₙ, Hₙ], [Hₙ, −Hₙ]]`.
pub fn hadamard_matrix(n: usize) -> Result<Matrix> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Domain(format!("Hadamard order {n} is not a power of two")));
    }
    // Entry (i, j) of the Sylvester matrix is (-1)^popcount(i & j).
    Ok(Matrix::from_fn(n, n, |i, j| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 }))
}

/// In-place normalized fast Walsh–Hadamard transform: `v ← Ĥₙ·v`.
pub fn fwht_inplace(v: &mut [f64], plan: &HadamardPlan) -> Result<()> {
    if v.len() != plan.padded_dim {
        return Err(shape_err!("vector length {} != padded dimension {}", v.len(), plan.padded_dim));
    }
    fwht_unchecked(v);
    Ok(())
}

fn fwht_unchecked(v: &mut [f64]) {
    let n = v.len();
    if n == 1 {
        return;
    }
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    let s = 1.0 / (n as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= s);
}

/// Applies `Ĥ` to every row of an already padded matrix.
fn fwht_rows(m: &mut Matrix) {
    for r in 0..m.rows() {
        fwht_unchecked(m.row_mut(r));
    }
}

/// Applies `Ĥ` to every column of an already padded matrix.
fn fwht_cols(m: &mut Matrix) {
    let (rows, cols) = m.shape();
    if rows == 1 {
        return;
    }
    let mut col = vec![0.0; rows];
    let data = m.as_mut_slice();
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        fwht_unchecked(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// `Ĥₘ · pad(w) · Ĥₙ`.
pub fn transform_2d(w: &Matrix, row_plan: &HadamardPlan, col_plan: &HadamardPlan) -> Result<Matrix> {
    if w.shape() != (row_plan.logical_dim, col_plan.logical_dim) {
        return Err(shape_err!(
            "matrix is {}x{} but plans expect {}x{}",
            w.rows(),
            w.cols(),
            row_plan.logical_dim,
            col_plan.logical_dim
        ));
    }
    let mut out = w.pad(row_plan.padded_dim, col_plan.padded_dim)?;
    fwht_cols(&mut out);
    fwht_rows(&mut out);
    Ok(out)
}

/// `crop(Ĥₘᵀ · w′ · Ĥₙᵀ)` back to the plans' logical dimensions.
pub fn inverse_transform_2d(w_prime: &Matrix, row_plan: &HadamardPlan, col_plan: &HadamardPlan) -> Result<Matrix> {
    if w_prime.shape() != (row_plan.padded_dim, col_plan.padded_dim) {
        return Err(shape_err!(
            "matrix is {}x{} but plans expect padded {}x{}",
            w_prime.rows(),
            w_prime.cols(),
            row_plan.padded_dim,
            col_plan.padded_dim
        ));
    }
    let mut out = w_prime.clone();
    fwht_rows(&mut out);
    fwht_cols(&mut out);
    out.crop(row_plan.logical_dim, col_plan.logical_dim)
}

/// Rotates each row (one sample per row) of a `batch × logical` matrix into the
/// padded Hadamard domain: row `x` becomes `Ĥᵀ·pad(x)`.
pub fn rotate_rows(x: &Matrix, plan: &HadamardPlan) -> Result<Matrix> {
    if x.cols() != plan.logical_dim {
        return Err(shape_err!("rows have {} entries, plan expects {}", x.cols(), plan.logical_dim));
    }
    let mut out = x.pad(x.rows(), plan.padded_dim)?;
    fwht_rows(&mut out);
    Ok(out)
}

/// Inverse of [`rotate_rows`]: applies `Ĥ` per row and drops the padding.
pub fn unrotate_rows(x: &Matrix, plan: &HadamardPlan) -> Result<Matrix> {
    if x.cols() != plan.padded_dim {
        return Err(shape_err!("rows have {} entries, plan expects {}", x.cols(), plan.padded_dim));
    }
    let mut out = x.clone();
    fwht_rows(&mut out);
    out.crop(out.rows(), plan.logical_dim)
}
