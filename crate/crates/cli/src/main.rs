use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dhq::analysis::{collect_distributions, histograms_csv, moments_csv, psnr, ssim};
use dhq::config::RunConfig;
use dhq::imageio::{read_image, write_image, ImageBuffer, ImageFormat};
use dhq::model::SirenModel;
use dhq::qinfer::QuantizedModel;
use dhq::quant::{QuantConfig, Rounding, Scheme, FULL_PRECISION_BITS};
use dhq::report::{EvalReport, REPORT_FORMAT_VERSION};
use dhq::trainer::make_grid_dataset;
use dhq::{Error, Result};

#[derive(Args)]
struct Common {
    /// key = value configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a SIREN to an image; writes model.ckpt and loss.csv.
    Train {
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Quantize a checkpoint; writes quantized.qmodel.
    Quantize {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        wbits: Option<u32>,
        #[arg(long)]
        abits: Option<u32>,
        #[arg(long)]
        rounding: Option<Rounding>,
        /// Image whose grid calibrates activation ranges (needed for W8A8).
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Reconstruct an image with a quantized model or checkpoint; writes report.json.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Export per-layer weight and activation histograms and moments.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also export Hadamard-domain weight distributions.
        #[arg(long)]
        hadamard: bool,
        /// Grid source for activations; a 256×256 grid when omitted.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Tabulate PSNR and SSIM of several schemes on one checkpoint.
    Compare {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        schemes: Vec<Scheme>,
        #[arg(long, default_value_t = 8)]
        bits: u32,
    },
}

#[derive(Parser)]
#[command(name = "dhq", version, about = "Train, quantize and evaluate SIREN image representations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}

fn run_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn image_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.image.as_deref().ok_or_else(|| Error::Config("--image is required (flag or config key)".into()))
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out_dir)?;
    Ok(cfg.out_dir.join(name))
}

/// One-line provenance header for CSV outputs.
fn csv_header(cfg: &RunConfig) -> String {
    format!("# format_version={REPORT_FORMAT_VERSION} seed={}\n", cfg.seed)
}

fn write_run_config(cfg: &RunConfig) -> Result<()> {
    fs::write(out_file(cfg, "run.cfg")?, cfg.to_text())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = run_config(&cli.common)?;
    match cli.command {
        Command::Train { image, iters, checkpoint_every } => {
            if let Some(p) = image {
                cfg.image = Some(p);
            }
            if let Some(n) = iters {
                cfg.train.iterations = n;
            }
            if let Some(n) = checkpoint_every {
                cfg.train.checkpoint_every = n;
            }
            cfg.validate()?;
            train(&cfg)
        }
        Command::Quantize { checkpoint, scheme, wbits, abits, rounding, image } => {
            if let Some(s) = scheme {
                cfg.quant.scheme = s;
            }
            if let Some(b) = wbits {
                cfg.quant.weight_bits = b;
            }
            if let Some(b) = abits {
                cfg.quant.act_bits = b;
            }
            if let Some(r) = rounding {
                cfg.quant.rounding = r;
            }
            if let Some(p) = image {
                cfg.image = Some(p);
            }
            // 32-bit weights leave activations unquantized too
            if cfg.quant.weight_bits == FULL_PRECISION_BITS {
                cfg.quant.act_bits = FULL_PRECISION_BITS;
            }
            cfg.validate()?;
            quantize(&cfg, &checkpoint)
        }
        Command::Eval { model, image } => {
            if let Some(p) = image {
                cfg.image = Some(p);
            }
            eval(&mut cfg, &model)
        }
        Command::Analyze { checkpoint, hadamard, image } => {
            if let Some(p) = image {
                cfg.image = Some(p);
            }
            analyze(&cfg, &checkpoint, hadamard)
        }
        Command::Compare { checkpoint, image, schemes, bits } => {
            if let Some(p) = image {
                cfg.image = Some(p);
            }
            if schemes.is_empty() {
                return Err(Error::Config("--schemes needs at least one scheme".into()));
            }
            compare(&cfg, &checkpoint, &schemes, bits)
        }
    }
}

fn train(cfg: &RunConfig) -> Result<()> {
    let img = read_image(image_path(cfg)?)?;
    let final_path = out_file(cfg, "model.ckpt")?;
    let (model, curve) = dhq::fit_image(&img, &cfg.siren, &cfg.train, |it, m, _| {
        m.save(cfg.out_dir.join(format!("model_{it:06}.ckpt")))
    })?;
    model.save(final_path)?;
    let mut csv = csv_header(cfg);
    csv.push_str("iteration,loss\n");
    for (i, l) in curve.iter().enumerate() {
        writeln!(csv, "{},{:e}", i + 1, l).unwrap();
    }
    fs::write(out_file(cfg, "loss.csv")?, csv)?;
    write_run_config(cfg)?;
    let recon = reconstruct(&model, &img)?;
    println!(
        "trained {} iterations; final loss {}; PSNR {:.4} dB; SSIM {:.4}",
        curve.len(),
        curve.last().map(|l| format!("{l:.6e}")).unwrap_or_else(|| "n/a".into()),
        psnr(&img, &recon)?,
        ssim(&img, &recon)?
    );
    Ok(())
}

fn reconstruct(model: &SirenModel, img: &ImageBuffer) -> Result<ImageBuffer> {
    let full =
        QuantConfig { weight_bits: FULL_PRECISION_BITS, act_bits: FULL_PRECISION_BITS, ..QuantConfig::default() };
    QuantizedModel::quantize(model, &full, None, 0)?.reconstruct_image(img.width(), img.height(), img.channels())
}

fn calibration_data(cfg: &RunConfig, q: &QuantConfig) -> Result<Option<dhq::trainer::Dataset>> {
    if !q.quantizes_activations() {
        return Ok(None);
    }
    let path = cfg
        .image
        .as_deref()
        .ok_or_else(|| Error::Config("activation quantization needs --image for calibration".into()))?;
    Ok(Some(make_grid_dataset(&read_image(path)?)))
}

fn quantize(cfg: &RunConfig, checkpoint: &Path) -> Result<()> {
    let model = SirenModel::load(checkpoint)?;
    let data = calibration_data(cfg, &cfg.quant)?;
    let q = QuantizedModel::quantize(&model, &cfg.quant, data.as_ref(), cfg.seed)?;
    let path = out_file(cfg, "quantized.qmodel")?;
    q.save(&path)?;
    write_run_config(cfg)?;
    println!("{} {} written to {}", q.config().scheme, q.mode(), path.display());
    Ok(())
}

/// A quantized model file, or a float checkpoint evaluated as W32A32.
fn load_any(path: &Path) -> Result<QuantizedModel> {
    match QuantizedModel::load(path) {
        Ok(q) => Ok(q),
        Err(Error::Format(_)) => {
            let model = SirenModel::load(path)?;
            let full = QuantConfig {
                weight_bits: FULL_PRECISION_BITS,
                act_bits: FULL_PRECISION_BITS,
                ..QuantConfig::default()
            };
            QuantizedModel::quantize(&model, &full, None, 0)
        }
        Err(e) => Err(e),
    }
}

fn eval(cfg: &mut RunConfig, model: &Path) -> Result<()> {
    let q = load_any(model)?;
    cfg.quant = q.config().clone();
    let img = read_image(image_path(cfg)?)?;
    let (report, recon) = EvalReport::evaluate(&q, &img, cfg)?;
    fs::write(out_file(cfg, "report.json")?, report.to_json())?;
    let ext = if recon.channels() == 1 { "pgm" } else { "ppm" };
    write_image(&recon, out_file(cfg, &format!("reconstruction.{ext}"))?, ImageFormat::Pnm)?;
    println!("{} PSNR {:.4} dB SSIM {:.4}", q.mode(), report.psnr_db, report.ssim);
    Ok(())
}

fn analyze(cfg: &RunConfig, checkpoint: &Path, hadamard: bool) -> Result<()> {
    let model = SirenModel::load(checkpoint)?;
    let img = match &cfg.image {
        Some(p) => read_image(p)?,
        None => ImageBuffer::filled(256, 256, model.out_dim(), 0)?,
    };
    let dists = collect_distributions(&model, &make_grid_dataset(&img), hadamard)?;
    for (label, d) in &dists {
        let mut csv = csv_header(cfg);
        csv.push_str(&histograms_csv(&[d]));
        fs::write(out_file(cfg, &format!("hist_{label}.csv"))?, csv)?;
    }
    let mut csv = csv_header(cfg);
    csv.push_str(&moments_csv(&dists));
    fs::write(out_file(cfg, "moments.csv")?, csv)?;
    write_run_config(cfg)?;
    println!("{:<32} {:>10} {:>10} {:>10}", "label", "std", "skewness", "kurtosis");
    for (label, d) in &dists {
        let m = &d.moments;
        println!("{label:<32} {:>10.4} {:>10.4} {:>10.4}", m.std, m.skewness, m.excess_kurtosis);
    }
    Ok(())
}

fn compare(cfg: &RunConfig, checkpoint: &Path, schemes: &[Scheme], bits: u32) -> Result<()> {
    let model = SirenModel::load(checkpoint)?;
    let img = read_image(image_path(cfg)?)?;
    let data = make_grid_dataset(&img);
    let mut rows = Vec::new();
    let full = QuantConfig { weight_bits: FULL_PRECISION_BITS, act_bits: FULL_PRECISION_BITS, ..cfg.quant.clone() };
    rows.push(("full".to_string(), full));
    for &s in schemes {
        rows.push((
            s.name().to_string(),
            QuantConfig { scheme: s, weight_bits: bits, act_bits: bits, ..cfg.quant.clone() },
        ));
    }
    let mut csv = csv_header(cfg);
    csv.push_str("method,w_bits,a_bits,psnr_db,ssim\n");
    println!("{:<12} {:>7} {:>10} {:>8}", "method", "W/A", "PSNR (dB)", "SSIM");
    for (name, qc) in rows {
        qc.validate()?;
        let q = QuantizedModel::quantize(&model, &qc, qc.quantizes_activations().then_some(&data), cfg.seed)?;
        let recon = q.reconstruct_image(img.width(), img.height(), img.channels())?;
        let (p, s) = (psnr(&img, &recon)?, ssim(&img, &recon)?);
        writeln!(csv, "{name},{},{},{p:.6},{s:.6}", qc.weight_bits, qc.act_bits).unwrap();
        println!("{name:<12} {:>7} {p:>10.2} {s:>8.4}", format!("{}/{}", qc.weight_bits, qc.act_bits));
    }
    fs::write(out_file(cfg, "compare.csv")?, csv)?;
    write_run_config(cfg)?;
    Ok(())
}
