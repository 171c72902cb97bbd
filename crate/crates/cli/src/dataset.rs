//! Directory scanning and input/ground-truth pairing. Images pair by file
//! stem; listings are lexicographic so every run processes and logs in the
//! same order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aqshift_core::ImageTensor;

use crate::error::AppError;
use crate::io::read_image;

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            let e = e.to_ascii_lowercase();
            e == "png" || e == "jpg" || e == "jpeg"
        })
        .unwrap_or(false)
}

fn stem_of(path: &Path) -> Option<String> {
    path.file_stem().and_then(|s| s.to_str()).map(String::from)
}

/// Enumerate images at `path`: a single file, or every PNG/JPEG directly
/// inside a directory, keyed and sorted by stem. Duplicate stems keep the
/// lexicographically first file and warn about the rest.
pub fn list_images(path: &Path) -> Result<Vec<(String, PathBuf)>, AppError> {
    if path.is_file() {
        let stem = stem_of(path)
            .ok_or_else(|| AppError::data(format!("cannot name {}", path.display())))?;
        return Ok(vec![(stem, path.to_path_buf())]);
    }
    if !path.is_dir() {
        return Err(AppError::data(format!(
            "{} is neither a file nor a directory",
            path.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| AppError::data(format!("cannot list {}: {e}", path.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && has_image_extension(p))
        .collect();
    files.sort();
    let mut by_stem: BTreeMap<String, PathBuf> = BTreeMap::new();
    for file in files {
        let Some(stem) = stem_of(&file) else { continue };
        if by_stem.contains_key(&stem) {
            eprintln!(
                "warning: {} shares a stem with an earlier file, skipping",
                file.display()
            );
        } else {
            by_stem.insert(stem, file);
        }
    }
    Ok(by_stem.into_iter().collect())
}

/// Pair two directories by stem. Unmatched entries on either side are
/// warned about and dropped; an empty intersection is an error.
pub fn pair_images(
    inputs: &Path,
    truths: &Path,
) -> Result<Vec<(String, PathBuf, PathBuf)>, AppError> {
    let left = list_images(inputs)?;
    let right: BTreeMap<String, PathBuf> = list_images(truths)?.into_iter().collect();
    let mut pairs = Vec::new();
    for (stem, path) in left {
        match right.get(&stem) {
            Some(gt) => pairs.push((stem, path, gt.clone())),
            None => eprintln!("warning: {} has no ground-truth counterpart, skipping", path.display()),
        }
    }
    let matched: std::collections::BTreeSet<&String> =
        pairs.iter().map(|(stem, _, _)| stem).collect();
    for (stem, path) in &right {
        if !matched.contains(stem) {
            eprintln!("warning: {} has no input counterpart, skipping", path.display());
        }
    }
    if pairs.is_empty() {
        return Err(AppError::data(format!(
            "no image pairs match between {} and {}",
            inputs.display(),
            truths.display()
        )));
    }
    Ok(pairs)
}

/// Decode paired files, dropping (with a warning) pairs that fail to decode
/// or whose dimensions disagree.
pub fn load_pairs(
    pairs: &[(String, PathBuf, PathBuf)],
) -> Vec<(String, ImageTensor, ImageTensor)> {
    let mut loaded = Vec::new();
    for (stem, input_path, gt_path) in pairs {
        let input = match read_image(input_path) {
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
        if !input.same_shape(&gt) {
            eprintln!(
                "warning: skipping {stem}: input is {}x{} but ground truth is {}x{}",
                input.height, input.width, gt.height, gt.width
            );
            continue;
        }
        loaded.push((stem.clone(), input, gt));
    }
    loaded
}
