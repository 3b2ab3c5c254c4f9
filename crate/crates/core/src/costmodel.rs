//! Analytic per-sample arithmetic and memory costs of a layer stack in each
//! precision mode. Only quantities fixed by bit widths and topology are
//! modeled; there is no latency or power estimate.

use serde::{Deserialize, Serialize};

use crate::qinfer::Mode;

/// Bytes per stored bias value (biases stay in 64-bit float).
pub const BIAS_BYTES: u64 = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSummary {
    pub mode: Mode,
    pub weight_bits: u32,
    pub act_bits: u32,
    /// Multiply-accumulates per coordinate.
    pub mac_count: u64,
    /// Weight storage including biases.
    pub weight_bytes: u64,
    pub bias_bytes: u64,
    /// One buffer at the widest layer, per coordinate.
    pub activation_buffer_bytes: u64,
    /// Fast Walsh–Hadamard additions per coordinate.
    pub transform_flops: u64,
}

impl CostSummary {
    pub fn weight_only_bytes(&self) -> u64 {
        self.weight_bytes - self.bias_bytes
    }
}

fn bits_to_bytes(bits: u64) -> u64 {
    bits.div_ceil(8)
}

fn fwht_cost(n: usize) -> u64 {
    let p = n.next_power_of_two() as u64;
    p * p.trailing_zeros() as u64
}

/// Costs at the mode's nominal widths (32 for float, 8 for quantized), with
/// DHQ rotations in W8A8.
pub fn estimate(dims: &[(usize, usize)], mode: Mode) -> CostSummary {
    let (wb, ab) = match mode {
        Mode::W32A32 => (32, 32),
        Mode::W8A32 => (8, 32),
        Mode::W8A8 => (8, 8),
    };
    estimate_with(dims, mode, wb, ab, mode == Mode::W8A8)
}

/// `dims` are `(out, in)` per layer. `rotated` charges an input rotation and
/// an output unrotation per layer; it only applies when activations are
/// quantized, since weight-only modes rotate weights offline.
pub fn estimate_with(
    dims: &[(usize, usize)],
    mode: Mode,
    weight_bits: u32,
    act_bits: u32,
    rotated: bool,
) -> CostSummary {
    let mac_count: u64 = dims.iter().map(|&(o, i)| (o * i) as u64).sum();
    let bias_bytes = dims.iter().map(|&(o, _)| o as u64 * BIAS_BYTES).sum();
    let weight_bytes = bits_to_bytes(mac_count * weight_bits as u64) + bias_bytes;
    let widest = dims.iter().flat_map(|&(o, i)| [o, i]).max().unwrap_or(0) as u64;
    let activation_buffer_bytes = bits_to_bytes(widest * act_bits as u64);
    let transform_flops =
        if rotated && mode == Mode::W8A8 { dims.iter().map(|&(o, i)| fwht_cost(i) + fwht_cost(o)).sum() } else { 0 };
    CostSummary {
        mode,
        weight_bits,
        act_bits,
        mac_count,
        weight_bytes,
        bias_bytes,
        activation_buffer_bytes,
        transform_flops,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULT_NET: [(usize, usize); 5] = [(256, 2), (256, 256), (256, 256), (256, 256), (1, 256)];

    #[test]
    fn default_net_macs() {
        for m in Mode::ALL {
            assert_eq!(estimate(&DEFAULT_NET, m).mac_count, 2 * 256 + 3 * 256 * 256 + 256);
        }
        assert_eq!(estimate(&DEFAULT_NET, Mode::W8A8).mac_count, 197_376);
    }

    #[test]
    fn eight_bit_storage_is_a_quarter() {
        let full = estimate(&DEFAULT_NET, Mode::W32A32);
        for m in [Mode::W8A32, Mode::W8A8] {
            let q = estimate(&DEFAULT_NET, m);
            assert_eq!(q.weight_only_bytes() * 4, full.weight_only_bytes());
            assert_eq!(q.weight_bytes, estimate(&DEFAULT_NET, Mode::W8A8).weight_bytes);
        }
    }

    #[test]
    fn transforms_only_with_quantized_activations() {
        assert_eq!(estimate(&DEFAULT_NET, Mode::W32A32).transform_flops, 0);
        assert_eq!(estimate(&DEFAULT_NET, Mode::W8A32).transform_flops, 0);
        // 2·1 + 256·8 for the first layer, 256·8 twice for hidden, 256·8 + 0 for the head
        assert_eq!(estimate(&DEFAULT_NET, Mode::W8A8).transform_flops, 2 + 2048 + 3 * 4096 + 2048);
        assert_eq!(estimate_with(&DEFAULT_NET, Mode::W8A8, 8, 8, false).transform_flops, 0);
    }

    #[test]
    fn buffers_follow_widest_layer() {
        assert_eq!(estimate(&DEFAULT_NET, Mode::W8A8).activation_buffer_bytes, 256);
        assert_eq!(estimate(&DEFAULT_NET, Mode::W8A32).activation_buffer_bytes, 1024);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fewer_bits_never_cost_more(
                dims in proptest::collection::vec((1usize..300, 1usize..300), 1..6),
                b in 2u32..32,
            ) {
                let hi = estimate_with(&dims, Mode::W8A8, b + 1, 8, true);
                let lo = estimate_with(&dims, Mode::W8A8, b, 8, true);
                prop_assert!(lo.weight_bytes <= hi.weight_bytes);
                prop_assert_eq!(lo.mac_count, hi.mac_count);
            }
        }
    }
}
