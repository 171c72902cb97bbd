//! `train`: fit the shift predictor to paired input/ground-truth images.

use std::path::PathBuf;

use aqshift_core::loss::LossWeights;
use aqshift_core::train::{train, TrainConfig};
use aqshift_core::Error as CoreError;

use crate::checkpoint::save_checkpoint;
use crate::dataset::{load_pairs, pair_images};
use crate::error::AppError;
use crate::losslog::TrainLogger;

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Directory of degraded input images
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Directory of ground-truth images, paired with inputs by file stem
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Where to write the final checkpoint; the loss log lands next to it
    /// with a `.losses` extension
    #[arg(long)]
    pub out: PathBuf,
    /// Adam learning rate
    #[arg(long, default_value_t = 0.0000125)]
    pub lr: f64,
    /// Pixel-fidelity weight
    #[arg(long, default_value_t = 1.0)]
    pub lambda1: f64,
    /// Colorfulness weight (subtracted: more color, lower loss)
    #[arg(long, default_value_t = 0.001)]
    pub lambda2: f64,
    /// Edge-preservation weight
    #[arg(long, default_value_t = 0.0001)]
    pub lambda3: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Train on random square crops of this side instead of whole images
    #[arg(long)]
    pub patch: Option<usize>,
    /// Seed for weight initialization and crop positions
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &TrainArgs) -> Result<(), AppError> {
    println!(
        "train: data-dir={} gt-dir={} out={} lr={} lambda1={} lambda2={} lambda3={} epochs={} batch={} patch={} seed={}",
        args.data_dir.display(),
        args.gt_dir.display(),
        args.out.display(),
        args.lr,
        args.lambda1,
        args.lambda2,
        args.lambda3,
        args.epochs,
        args.batch,
        args.patch.map_or_else(|| "none".to_string(), |p| p.to_string()),
        args.seed
    );
    for (name, v) in [
        ("lr", args.lr),
        ("lambda1", args.lambda1),
        ("lambda2", args.lambda2),
        ("lambda3", args.lambda3),
    ] {
        if !v.is_finite() {
            return Err(AppError::config(format!("--{name} must be finite, got {v}")));
        }
    }

    let pairs = pair_images(&args.data_dir, &args.gt_dir)?;
    let loaded = load_pairs(&pairs);
    if loaded.is_empty() {
        return Err(AppError::data("no usable training pairs after decoding".to_string()));
    }
    println!("training on {} pairs", loaded.len());
    let dataset: Vec<_> = loaded.into_iter().map(|(_, input, gt)| (input, gt)).collect();

    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        lr: args.lr,
        weights: LossWeights {
            pixel: args.lambda1,
            colorfulness: args.lambda2,
            edge: args.lambda3,
        },
        seed: args.seed,
        checkpoint_every: 0,
        patch_size: args.patch,
    };
    let log_path = args.out.with_extension("losses");
    let mut logger = TrainLogger::create(&log_path)?;
    let (params, history) = train(&config, &dataset, None, &mut logger).map_err(|e| match e {
        CoreError::InvalidArgument(m) => AppError::config(m.to_string()),
        other => AppError::data(other.to_string()),
    })?;
    save_checkpoint(&args.out, &params)?;
    logger.finish()?;
    match history.last() {
        Some(last) => println!(
            "finished {} steps; final total loss {}; checkpoint {}",
            last.step,
            last.losses.total,
            args.out.display()
        ),
        None => println!(
            "no optimizer steps requested; checkpoint {} holds the seeded initialization",
            args.out.display()
        ),
    }
    println!("loss log {}", log_path.display());
    Ok(())
}
