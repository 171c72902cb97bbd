//! `uicm`: print colorfulness scores — the raw regression-weighted value and
//! its normalized form — for each input image.

use std::path::PathBuf;

use aqshift_core::colorfulness::{uicm_loss, uicm_raw};

use crate::dataset::list_images;
use crate::error::AppError;
use crate::io::read_image;

#[derive(Debug, clap::Args)]
pub struct UicmArgs {
    /// Input image file, or a directory of PNG/JPEG images
    #[arg(long)]
    pub input: PathBuf,
}

pub fn run(args: &UicmArgs) -> Result<(), AppError> {
    println!("uicm: input={}", args.input.display());
    let inputs = list_images(&args.input)?;
    if inputs.is_empty() {
        return Err(AppError::data(format!("no inputs in {}", args.input.display())));
    }
    let mut succeeded = 0usize;
    for (stem, path) in &inputs {
        let image = match read_image(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("warning: {e}");
                continue;
            }
        };
        let raw = uicm_raw(&image);
        let normalized = uicm_loss(&image);
        match (raw, normalized) {
            (Ok(raw), Ok(normalized)) => {
                println!("{stem} {raw} {normalized}");
                succeeded += 1;
            }
            (Err(e), _) | (_, Err(e)) => eprintln!("warning: {stem}: {e}"),
        }
    }
    if succeeded == 0 {
        return Err(AppError::data("no inputs could be scored".to_string()));
    }
    Ok(())
}
