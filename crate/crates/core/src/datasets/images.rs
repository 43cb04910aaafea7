use std::path::Path;

use log::warn;

use super::{intensity_to_unit, Dataset, DatasetKind};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::netpbm::{read_pgm, GrayImage};
use crate::scalar::Real;

/// Largest centered square crop.
pub fn center_crop_square(img: &GrayImage) -> GrayImage {
    let side = img.width.min(img.height);
    let x0 = (img.width - side) / 2;
    let y0 = (img.height - side) / 2;
    let pixels = (0..side).flat_map(|y| (0..side).map(move |x| (x, y))).map(|(x, y)| img.get(x0 + x, y0 + y)).collect();
    GrayImage::new(side, side, pixels)
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(src: &[f64], width: usize, height: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    assert_eq!(src.len(), width * height);
    let sample_axis = |dst: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let pos = ((dst as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, pos - lo as f64)
    };
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let (y0, y1, fy) = sample_axis(oy, height, out_h);
        for ox in 0..out_w {
            let (x0, x1, fx) = sample_axis(ox, width, out_w);
            let at = |x: usize, y: usize| src[y * width + x];
            let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
            let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

fn image_vector(img: &GrayImage, size: usize) -> Vec<f64> {
    let square = center_crop_square(img);
    let unit: Vec<f64> = square.pixels.iter().map(|&p| intensity_to_unit(p)).collect();
    resize_bilinear(&unit, square.width, square.height, size, size)
}

/// Loads every `*.pgm` in `dir` (sorted by file name), center-crops to a
/// square, resizes to `size×size` and flattens into `[-1,1]` vectors.
/// Inputs and targets are identical. Unreadable files are skipped with a
/// warning; a directory without any usable image is an error.
pub fn load_image_dir<T: Real>(dir: impl AsRef<Path>, size: usize) -> Result<Dataset<T>> {
    let dir = dir.as_ref();
    if size == 0 {
        return Err(Error::config("image size must be positive"));
    }
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::file(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();

    let mut data = Vec::new();
    let mut count = 0;
    for path in &paths {
        match read_pgm(path) {
            Ok(img) => {
                data.extend(image_vector(&img, size).into_iter().map(T::lit));
                count += 1;
            }
            Err(e) => warn!("skipping {}: {e}", path.display()),
        }
    }
    if count == 0 {
        return Err(Error::config(format!("no usable PGM images in {}", dir.display())));
    }
    let inputs = Matrix::new(count, size * size, data)?;
    Ok(Dataset { targets: inputs.clone(), inputs, kind: DatasetKind::Images, grid: Some((size, size)) })
}
