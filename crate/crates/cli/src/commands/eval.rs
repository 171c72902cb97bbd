//! `eval`: score predicted images against references pair by pair.

use std::fmt::Write as _;
use std::path::PathBuf;

use aqshift_core::metrics::compare;

use crate::dataset::pair_images;
use crate::error::AppError;
use crate::io::{read_image, write_bytes_atomic};

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Directory of predicted/enhanced images
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of reference images, paired by file stem
    #[arg(long)]
    pub gt: PathBuf,
    /// Report file: one `<stem> <mse> <psnr> <ssim>` record per pair plus a
    /// final `mean` record
    #[arg(long)]
    pub report: PathBuf,
}

pub fn run(args: &EvalArgs) -> Result<(), AppError> {
    println!(
        "eval: pred={} gt={} report={}",
        args.pred.display(),
        args.gt.display(),
        args.report.display()
    );
    let pairs = pair_images(&args.pred, &args.gt)?;
    let mut records = Vec::new();
    for (stem, pred_path, gt_path) in &pairs {
        let pred = match read_image(pred_path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("warning: skipping {stem}: {e}");
                continue;
            }
        };
        let gt = match read_image(gt_path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("warning: skipping {stem}: {e}");
                continue;
            }
        };
        match compare(&pred, &gt) {
            Ok(report) => records.push((stem.clone(), report)),
            Err(e) => eprintln!("warning: skipping {stem}: {e}"),
        }
    }
    if records.is_empty() {
        return Err(AppError::data("no pairs could be evaluated".to_string()));
    }

    let n = records.len() as f64;
    // Means propagate infinities: one perfect pair pulls mean PSNR to inf.
    let mse_mean = records.iter().map(|(_, r)| r.mse).sum::<f64>() / n;
    let psnr_mean = records.iter().map(|(_, r)| r.psnr).sum::<f64>() / n;
    let ssim_mean = records.iter().map(|(_, r)| r.ssim).sum::<f64>() / n;

    let mut text = String::new();
    for (stem, r) in &records {
        writeln!(text, "{stem} {} {} {}", r.mse, r.psnr, r.ssim).expect("string write");
    }
    writeln!(text, "mean {mse_mean} {psnr_mean} {ssim_mean}").expect("string write");
    print!("{text}");
    write_bytes_atomic(&args.report, text.as_bytes())?;
    Ok(())
}
