//! PNG export of label maps and band images.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageBuffer, Luma};
use thiserror::Error;

use crate::hypercube::{CubeError, Image};
use crate::phantom::LabelMap;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error("{0} classes do not fit an 8-bit raster")]
    TooManyClasses(usize),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Cube(#[from] CubeError),
}

/// Sidecar path holding class names (one per line) next to a label raster.
pub fn class_names_path(raster: &Path) -> PathBuf {
    raster.with_extension("classes.txt")
}

/// Writes labels as an 8-bit grayscale PNG plus the class-name sidecar.
pub fn save_label_map(labels: &LabelMap, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let path = path.as_ref();
    if labels.n_classes() > 256 {
        return Err(RasterError::TooManyClasses(labels.n_classes()));
    }
    let img: GrayImage = ImageBuffer::from_fn(labels.width() as u32, labels.height() as u32, |x, y| {
        Luma([labels.get(x as usize, y as usize) as u8])
    });
    img.save(path).map_err(|source| RasterError::Image { path: path.to_path_buf(), source })?;
    let names = class_names_path(path);
    let mut text = labels.class_names().join("\n");
    text.push('\n');
    fs::write(&names, text).map_err(|source| RasterError::Io { path: names, source })
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap, RasterError> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| RasterError::Image { path: path.to_path_buf(), source })?.to_luma8();
    let names_path = class_names_path(path);
    let names: Vec<String> = fs::read_to_string(&names_path)
        .map_err(|source| RasterError::Io { path: names_path, source })?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().to_string())
        .collect();
    let labels = img.pixels().map(|p| p.0[0] as usize).collect();
    LabelMap::new(img.width() as usize, img.height() as usize, labels, names)
        .map_err(|e| RasterError::Format { path: path.to_path_buf(), message: e.to_string() })
}

/// Writes an image as 16-bit grayscale scaled by its own min/max; the scale
/// goes to `<path>.scale.txt` as `min max`. Returns the `(min, max)` used.
pub fn save_band_png<T: Real>(image: &Image<T>, path: impl AsRef<Path>) -> Result<(f64, f64), RasterError> {
    let (lo, hi) = image.range();
    save_band_png_scaled(image, path, (lo.as_f64(), hi.as_f64()))?;
    Ok((lo.as_f64(), hi.as_f64()))
}

/// Like [`save_band_png`] but with an explicit `(min, max)` scale, so several
/// images can share one intensity mapping.
pub fn save_band_png_scaled<T: Real>(
    image: &Image<T>,
    path: impl AsRef<Path>,
    (lo, hi): (f64, f64),
) -> Result<(), RasterError> {
    let path = path.as_ref();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(image.width() as u32, image.height() as u32, |x, y| {
            let v = (image.get(x as usize, y as usize).as_f64() - lo) / span;
            Luma([(v.clamp(0.0, 1.0) * 65535.0).round() as u16])
        });
    img.save(path).map_err(|source| RasterError::Image { path: path.to_path_buf(), source })?;
    let scale = path.with_extension("scale.txt");
    fs::write(&scale, format!("{lo} {hi}\n")).map_err(|source| RasterError::Io { path: scale, source })
}

/// Places two images side by side (left | right) on a shared scale.
pub fn side_by_side<T: Real>(left: &Image<T>, right: &Image<T>) -> Result<Image<T>, CubeError> {
    if left.width() != right.width() || left.height() != right.height() {
        return Err(CubeError::ImageShape {
            expected_w: left.width(),
            expected_h: left.height(),
            actual_w: right.width(),
            actual_h: right.height(),
        });
    }
    let w = left.width();
    Ok(Image::from_fn(2 * w, left.height(), |x, y| if x < w { left.get(x, y) } else { right.get(x - w, y) }))
}
