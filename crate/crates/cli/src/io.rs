//! Image file decode/encode. Decoded samples are 8-bit values scaled to
//! [0,1]; encoding quantizes by round-half-away-from-zero back to 8-bit.
//! PNG and JPEG only; grayscale is promoted to RGB by replication and alpha
//! is dropped with a warning.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use aqshift_core::ImageTensor;
use image::{DynamicImage, ImageFormat, RgbImage};

use crate::error::AppError;

/// Encoding targets. Only PNG round-trips losslessly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Png,
    Jpeg,
}

impl OutputFormat {
    fn as_image_format(self) -> ImageFormat {
        match self {
            OutputFormat::Png => ImageFormat::Png,
            OutputFormat::Jpeg => ImageFormat::Jpeg,
        }
    }
}

/// 8-bit quantization: round half away from zero, then clamp.
pub fn quantize_sample(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Decode a PNG or JPEG byte stream into a 3-channel unit-range tensor.
pub fn decode_image(bytes: &[u8]) -> Result<ImageTensor, AppError> {
    let format = image::guess_format(bytes)
        .map_err(|_| AppError::data("unrecognized image format; expected PNG or JPEG"))?;
    let name = match format {
        ImageFormat::Png => "PNG",
        ImageFormat::Jpeg => "JPEG",
        other => {
            return Err(AppError::data(format!(
                "unsupported container {other:?}; only PNG and JPEG are handled"
            )))
        }
    };
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| AppError::data(format!("{name} decode failed: {e}")))?;
    let rgb: RgbImage = match decoded {
        DynamicImage::ImageRgb8(img) => img,
        DynamicImage::ImageRgba8(img) => {
            eprintln!("warning: dropping alpha channel");
            DynamicImage::ImageRgba8(img).to_rgb8()
        }
        DynamicImage::ImageLuma8(img) => DynamicImage::ImageLuma8(img).to_rgb8(),
        DynamicImage::ImageLumaA8(img) => {
            eprintln!("warning: dropping alpha channel");
            DynamicImage::ImageLumaA8(img).to_rgb8()
        }
        other => {
            return Err(AppError::data(format!(
                "unsupported pixel format {:?}; only 8-bit RGB and grayscale are handled",
                other.color()
            )))
        }
    };
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(AppError::data("image has zero extent"));
    }
    let data = rgb.into_raw().iter().map(|&s| s as f64 / 255.0).collect();
    ImageTensor::from_data(h as usize, w as usize, 3, data)
        .map_err(|e| AppError::data(format!("decoded buffer is inconsistent: {e}")))
}

/// Encode a 3-channel tensor. Samples are expected in [0,1]; stray values
/// are clamped during quantization.
pub fn encode_image(t: &ImageTensor, format: OutputFormat) -> Result<Vec<u8>, AppError> {
    if t.channels != 3 {
        return Err(AppError::data(format!(
            "encoding expects 3 channels, got {}",
            t.channels
        )));
    }
    let bytes: Vec<u8> = t.data.iter().map(|&v| quantize_sample(v)).collect();
    let img = RgbImage::from_raw(t.width as u32, t.height as u32, bytes)
        .expect("buffer length matches dimensions by construction");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, format.as_image_format())
        .map_err(|e| AppError::data(format!("image encoding failed: {e}")))?;
    Ok(out.into_inner())
}

/// Read and decode one image file.
pub fn read_image(path: &Path) -> Result<ImageTensor, AppError> {
    let bytes = fs::read(path)
        .map_err(|e| AppError::data(format!("cannot read {}: {e}", path.display())))?;
    decode_image(&bytes).map_err(|e| AppError::data(format!("{}: {e}", path.display())))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Write bytes to a sibling temp file, then rename into place, so the final
/// path never holds a partial file.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let tmp = temp_sibling(path);
    fs::write(&tmp, bytes)
        .map_err(|e| AppError::data(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| AppError::data(format!("cannot finalize {}: {e}", path.display())))?;
    Ok(())
}

/// Encode and atomically write one image.
pub fn write_image_atomic(
    path: &Path,
    t: &ImageTensor,
    format: OutputFormat,
) -> Result<(), AppError> {
    let bytes = encode_image(t, format)?;
    write_bytes_atomic(path, &bytes)
}
