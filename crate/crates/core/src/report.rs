//! JSON evaluation reports. Two runs with the same configuration produce
//! identical documents except for `generated_unix`.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{psnr, ssim, MomentStats};
use crate::config::RunConfig;
use crate::costmodel::{estimate_with, CostSummary};
use crate::error::Result;
use crate::imageio::ImageBuffer;
use crate::qinfer::{Mode, QuantizedModel};
use crate::quant::{Scheme, FULL_PRECISION_BITS};
use crate::trainer::coordinate_grid;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub index: usize,
    pub out_dim: usize,
    pub in_dim: usize,
    /// Effective (dequantized) weights.
    pub weight: MomentStats,
    /// Stored payload values when they live in the Hadamard domain.
    pub payload: Option<MomentStats>,
    /// Post-activation values of the effective model over the full grid.
    pub activation: MomentStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub generated_unix: u64,
    pub seed: u64,
    pub config: RunConfig,
    pub mode: Mode,
    /// `None` for an unquantized model.
    pub scheme: Option<Scheme>,
    pub weight_bits: u32,
    pub act_bits: u32,
    pub psnr_db: f64,
    pub ssim: f64,
    pub layers: Vec<LayerReport>,
    pub cost: CostSummary,
}

impl EvalReport {
    /// Reconstructs `source`'s grid with `qmodel`; returns the report and the image.
    pub fn evaluate(qmodel: &QuantizedModel, source: &ImageBuffer, config: &RunConfig) -> Result<(Self, ImageBuffer)> {
        let recon = qmodel.reconstruct_image(source.width(), source.height(), source.channels())?;
        let psnr_db = psnr(source, &recon)?;
        let ssim_v = ssim(source, &recon)?;
        let (_, trace) = qmodel.effective_model().forward_traced(&coordinate_grid(source.width(), source.height()))?;
        let layers = qmodel
            .layers()
            .iter()
            .zip(&trace.post)
            .enumerate()
            .map(|(index, (l, post))| {
                Ok(LayerReport {
                    index,
                    out_dim: l.out_dim(),
                    in_dim: l.in_dim(),
                    weight: MomentStats::from_values(l.effective_weight()?.as_slice())?,
                    payload: match l.tensor() {
                        Some(q) if q.transform().is_some() => {
                            Some(MomentStats::from_values(q.dequantize_payload().as_slice())?)
                        }
                        _ => None,
                    },
                    activation: MomentStats::from_values(post.as_slice())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let q = qmodel.config();
        let mode = qmodel.mode();
        let scheme = (mode != Mode::W32A32).then_some(q.scheme);
        let cost = estimate_with(&qmodel.layer_dims(), mode, q.weight_bits, q.act_bits, q.scheme == Scheme::Dhq);
        let report = Self {
            format_version: REPORT_FORMAT_VERSION,
            generated_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            seed: config.seed,
            config: config.clone(),
            mode,
            scheme,
            weight_bits: if mode == Mode::W32A32 { FULL_PRECISION_BITS } else { q.weight_bits },
            act_bits: q.act_bits,
            psnr_db,
            ssim: ssim_v,
            layers,
            cost,
        };
        Ok((report, recon))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite numbers and strings") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Format(format!("report: {e}")))
    }
}
