//! `enhance`: run the full pipeline over a batch of images.

use std::fs;
use std::path::{Path, PathBuf};

use aqshift_core::enhance::{enhance, EnhancementResult};
use aqshift_core::network::NetworkParams;
use aqshift_core::ImageTensor;

use crate::checkpoint::load_checkpoint;
use crate::dataset::list_images;
use crate::error::AppError;
use crate::io::{read_image, write_bytes_atomic, write_image_atomic, OutputFormat};

#[derive(Debug, clap::Args)]
pub struct EnhanceArgs {
    /// Input image file, or a directory of PNG/JPEG images
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the enhanced PNGs (created if absent)
    #[arg(long)]
    pub output: PathBuf,
    /// Trained network checkpoint
    #[arg(long)]
    pub weights: PathBuf,
    /// Also write the color-corrected intermediate and the predicted
    /// scale/offset maps (min-max scaled, scaling recorded in a sidecar)
    #[arg(long)]
    pub dump_intermediate: bool,
}

/// Rescale a map to [0,1] for visualization; returns the image along with
/// the original minimum and maximum so the true values stay recoverable.
fn min_max_scaled(t: &ImageTensor) -> (ImageTensor, f64, f64) {
    let lo = t.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = t.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = t.clone();
    if hi > lo {
        for v in &mut out.data {
            *v = (*v - lo) / (hi - lo);
        }
    } else {
        out.data.fill(0.0);
    }
    (out, lo, hi)
}

fn write_outputs(
    stem: &str,
    out_dir: &Path,
    result: &EnhancementResult,
    dump: bool,
) -> Result<(), AppError> {
    write_image_atomic(&out_dir.join(format!("{stem}.png")), &result.output, OutputFormat::Png)?;
    if dump {
        write_image_atomic(
            &out_dir.join(format!("{stem}.corrected.png")),
            &result.corrected,
            OutputFormat::Png,
        )?;
        let (scale_vis, s_lo, s_hi) = min_max_scaled(&result.maps.scale);
        let (offset_vis, o_lo, o_hi) = min_max_scaled(&result.maps.offset);
        write_image_atomic(&out_dir.join(format!("{stem}.scale.png")), &scale_vis, OutputFormat::Png)?;
        write_image_atomic(&out_dir.join(format!("{stem}.offset.png")), &offset_vis, OutputFormat::Png)?;
        let sidecar = format!("scale {s_lo} {s_hi}\noffset {o_lo} {o_hi}\n");
        write_bytes_atomic(&out_dir.join(format!("{stem}.maps.txt")), sidecar.as_bytes())?;
    }
    Ok(())
}

fn process_one(
    stem: &str,
    path: &Path,
    out_dir: &Path,
    params: &NetworkParams,
    dump: bool,
) -> Result<(), AppError> {
    let image = read_image(path)?;
    let result = enhance(&image, params)
        .map_err(|e| AppError::data(format!("{}: {e}", path.display())))?;
    write_outputs(stem, out_dir, &result, dump)
}

pub fn run(args: &EnhanceArgs) -> Result<(), AppError> {
    println!(
        "enhance: input={} output={} weights={} dump-intermediate={}",
        args.input.display(),
        args.output.display(),
        args.weights.display(),
        args.dump_intermediate
    );
    let params = load_checkpoint(&args.weights)?;
    let inputs = list_images(&args.input)?;
    if inputs.is_empty() {
        return Err(AppError::data(format!("no inputs in {}", args.input.display())));
    }
    fs::create_dir_all(&args.output)
        .map_err(|e| AppError::data(format!("cannot create {}: {e}", args.output.display())))?;
    let mut succeeded = 0usize;
    for (stem, path) in &inputs {
        match process_one(stem, path, &args.output, &params, args.dump_intermediate) {
            Ok(()) => {
                println!("enhanced {stem}");
                succeeded += 1;
            }
            Err(e) => eprintln!("warning: {e}"),
        }
    }
    if succeeded == 0 {
        return Err(AppError::data("no inputs could be processed".to_string()));
    }
    Ok(())
}
