//! Run configuration as flat `key = value` text.
//!
//! ```text
//! # comments and blank lines are ignored
//! image = data/cameraman.pgm
//! seed = 7
//! iters = 2000
//! scheme = dhq
//! wbits = 8
//! abits = 8
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SirenConfig;
use crate::quant::{QuantConfig, Rounding, Scheme};
use crate::trainer::{BatchSize, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub image: Option<PathBuf>,
    pub siren: SirenConfig,
    pub train: TrainConfig,
    pub quant: QuantConfig,
    /// Root seed; every random stream is split from it.
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            image: None,
            siren: SirenConfig::default(),
            seed: train.seed,
            train,
            quant: QuantConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Recognized keys, in the order [`RunConfig::to_text`] writes them.
pub const KEYS: &[&str] = &[
    "image",
    "out",
    "seed",
    "hidden_dim",
    "num_hidden_layers",
    "omega_first",
    "omega_hidden",
    "iters",
    "lr",
    "beta1",
    "beta2",
    "eps",
    "batch",
    "checkpoint_every",
    "scheme",
    "wbits",
    "abits",
    "rounding",
    "kmeans_max_iters",
    "kmeans_tol",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Sets one key. `seed` also becomes the training seed.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "image" => self.image = Some(PathBuf::from(value)),
            "out" => self.out_dir = PathBuf::from(value),
            "seed" => {
                self.seed = parse(key, value)?;
                self.train.seed = self.seed;
            }
            "hidden_dim" => self.siren.hidden_dim = parse(key, value)?,
            "num_hidden_layers" => self.siren.num_hidden_layers = parse(key, value)?,
            "omega_first" => self.siren.omega_first = parse(key, value)?,
            "omega_hidden" => self.siren.omega_hidden = parse(key, value)?,
            "iters" => self.train.iterations = parse(key, value)?,
            "lr" => self.train.learning_rate = parse(key, value)?,
            "beta1" => self.train.adam_beta1 = parse(key, value)?,
            "beta2" => self.train.adam_beta2 = parse(key, value)?,
            "eps" => self.train.adam_eps = parse(key, value)?,
            "batch" => {
                self.train.batch_size = if value.eq_ignore_ascii_case("full") {
                    BatchSize::Full
                } else {
                    BatchSize::Rows(parse(key, value)?)
                }
            }
            "checkpoint_every" => self.train.checkpoint_every = parse(key, value)?,
            "scheme" => self.quant.scheme = value.parse::<Scheme>()?,
            "wbits" => self.quant.weight_bits = parse(key, value)?,
            "abits" => self.quant.act_bits = parse(key, value)?,
            "rounding" => self.quant.rounding = value.parse::<Rounding>()?,
            "kmeans_max_iters" => self.quant.kmeans_max_iters = parse(key, value)?,
            "kmeans_tol" => self.quant.kmeans_tol = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.siren.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        if !(self.siren.omega_first > 0.0 && self.siren.omega_hidden > 0.0) {
            return Err(Error::Config("omegas must be positive".into()));
        }
        self.train.validate()?;
        self.quant.validate()
    }

    /// Text that [`RunConfig::parse`] reads back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let q = &self.quant;
        let t = &self.train;
        if let Some(img) = &self.image {
            writeln!(s, "image = {}", img.display()).unwrap();
        }
        writeln!(s, "out = {}", self.out_dir.display()).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "hidden_dim = {}", self.siren.hidden_dim).unwrap();
        writeln!(s, "num_hidden_layers = {}", self.siren.num_hidden_layers).unwrap();
        writeln!(s, "omega_first = {:?}", self.siren.omega_first).unwrap();
        writeln!(s, "omega_hidden = {:?}", self.siren.omega_hidden).unwrap();
        writeln!(s, "iters = {}", t.iterations).unwrap();
        writeln!(s, "lr = {:?}", t.learning_rate).unwrap();
        writeln!(s, "beta1 = {:?}", t.adam_beta1).unwrap();
        writeln!(s, "beta2 = {:?}", t.adam_beta2).unwrap();
        writeln!(s, "eps = {:?}", t.adam_eps).unwrap();
        match t.batch_size {
            BatchSize::Full => writeln!(s, "batch = full").unwrap(),
            BatchSize::Rows(n) => writeln!(s, "batch = {n}").unwrap(),
        }
        writeln!(s, "checkpoint_every = {}", t.checkpoint_every).unwrap();
        writeln!(s, "scheme = {}", q.scheme).unwrap();
        writeln!(s, "wbits = {}", q.weight_bits).unwrap();
        writeln!(s, "abits = {}", q.act_bits).unwrap();
        let r = match q.rounding {
            Rounding::Nearest => "nearest",
            Rounding::Stochastic => "stochastic",
        };
        writeln!(s, "rounding = {r}").unwrap();
        writeln!(s, "kmeans_max_iters = {}", q.kmeans_max_iters).unwrap();
        writeln!(s, "kmeans_tol = {:?}", q.kmeans_tol).unwrap();
        s
    }
}
