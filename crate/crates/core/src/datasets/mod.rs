//! Task datasets: synthetic generators and file loaders.
//!
//! Inputs are `N×D` matrices, targets `N×K`. Coordinates live in
//! `[-1, 1]`; targets for tanh-output tasks live in `[-1, 1]` as well.

pub mod idx;
mod images;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use images::{center_crop_square, load_image_dir, resize_bilinear};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::netpbm::GrayImage;
use crate::scalar::Real;

/// Side length of the checkerboard evaluation grid (500×500 = 250,000 points).
pub const CHECKERBOARD_GRID_SIDE: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Checkerboard,
    Parabola,
    SinCos,
    Memorization,
    Mnist,
    Images,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub inputs: Matrix<T>,
    pub targets: Matrix<T>,
    pub kind: DatasetKind,
    /// `(columns, rows)` of the sampling grid or source image, when the
    /// rows of `inputs` enumerate one row-major.
    pub grid: Option<(usize, usize)>,
}

impl<T: Real> Dataset<T> {
    fn new(inputs: Matrix<T>, targets: Matrix<T>, kind: DatasetKind, grid: Option<(usize, usize)>) -> Self {
        debug_assert_eq!(inputs.rows(), targets.rows());
        Self { inputs, targets, kind, grid }
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The first `n` samples (or all of them).
    pub fn take(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self::new(self.inputs.select_rows(indices), self.targets.select_rows(indices), self.kind, None)
    }

    /// Deterministic shuffle-split into `(train, test)` with `test_fraction`
    /// of the rows (at least one each side when `len() >= 2`).
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&test_fraction) || self.len() < 2 {
            return Err(Error::config("split needs 0 <= fraction < 1 and at least two samples"));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((self.len() as f64 * test_fraction).round() as usize).clamp(1, self.len() - 1);
        let (test, train) = order.split_at(n_test);
        Ok((self.subset(train), self.subset(test)))
    }
}

fn linspace(n: usize) -> impl Iterator<Item = f64> {
    let denom = (n.max(2) - 1) as f64;
    (0..n).map(move |i| if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / denom })
}

fn cell(v: f64, board: usize) -> usize {
    let c = ((v + 1.0) / 2.0 * board as f64).floor();
    (c.max(0.0) as usize).min(board - 1)
}

/// `+1` on even-parity cells of a `board×board` checkerboard over `[-1,1]²`,
/// `-1` otherwise. Coordinates at exactly `+1` fall into the last cell.
pub fn checkerboard_label(x: f64, y: f64, board: usize) -> f64 {
    if (cell(x, board) + cell(y, board)).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `n_train` points uniform on `[-1,1]²` labelled by the checkerboard.
pub fn gen_checkerboard<T: Real>(n_train: usize, board: usize, seed: u64) -> Result<Dataset<T>> {
    if board < 2 {
        return Err(Error::config(format!("checkerboard board must be >= 2, got {board}")));
    }
    if n_train == 0 {
        return Err(Error::config("checkerboard needs at least one training point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(f64, f64)> =
        (0..n_train).map(|_| (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))).collect();
    Ok(checkerboard_from_points(&points, board, None))
}

/// The 500×500 evaluation grid over `[-1,1]²`, endpoints included.
pub fn gen_checkerboard_testgrid<T: Real>(board: usize) -> Result<Dataset<T>> {
    if board < 2 {
        return Err(Error::config(format!("checkerboard board must be >= 2, got {board}")));
    }
    let axis: Vec<f64> = linspace(CHECKERBOARD_GRID_SIDE).collect();
    let points: Vec<(f64, f64)> = axis.iter().flat_map(|&y| axis.iter().map(move |&x| (x, y))).collect();
    Ok(checkerboard_from_points(&points, board, Some((CHECKERBOARD_GRID_SIDE, CHECKERBOARD_GRID_SIDE))))
}

fn checkerboard_from_points<T: Real>(points: &[(f64, f64)], board: usize, grid: Option<(usize, usize)>) -> Dataset<T> {
    let inputs = Matrix::from_fn(points.len(), 2, |i, j| T::lit(if j == 0 { points[i].0 } else { points[i].1 }));
    let targets = Matrix::from_fn(points.len(), 1, |i, _| T::lit(checkerboard_label(points[i].0, points[i].1, board)));
    Dataset::new(inputs, targets, DatasetKind::Checkerboard, grid)
}

/// `n` evenly spaced `x` in `[-1,1]` with target `x²`.
pub fn gen_parabola<T: Real>(n: usize) -> Result<Dataset<T>> {
    if n < 2 {
        return Err(Error::config(format!("parabola needs n >= 2, got {n}")));
    }
    let xs: Vec<f64> = linspace(n).collect();
    let inputs = Matrix::from_fn(n, 1, |i, _| T::lit(xs[i]));
    let targets = Matrix::from_fn(n, 1, |i, _| T::lit(xs[i] * xs[i]));
    Ok(Dataset::new(inputs, targets, DatasetKind::Parabola, Some((n, 1))))
}

pub fn sincos(x: f64, y: f64) -> f64 {
    (x * 10.0).sin() * (y * 5.0).cos()
}

/// `n_side×n_side` grid over `[-1,1]²` with target `sin(10x)·cos(5y)`.
pub fn gen_sincos<T: Real>(n_side: usize) -> Result<Dataset<T>> {
    if n_side < 2 {
        return Err(Error::config(format!("sincos grid needs n_side >= 2, got {n_side}")));
    }
    let axis: Vec<f64> = linspace(n_side).collect();
    let n = n_side * n_side;
    let coord = |i: usize| (axis[i % n_side], axis[i / n_side]);
    let inputs = Matrix::from_fn(n, 2, |i, j| {
        let (x, y) = coord(i);
        T::lit(if j == 0 { x } else { y })
    });
    let targets = Matrix::from_fn(n, 1, |i, _| {
        let (x, y) = coord(i);
        T::lit(sincos(x, y))
    });
    Ok(Dataset::new(inputs, targets, DatasetKind::SinCos, Some((n_side, n_side))))
}

/// Maps an 8-bit intensity onto `[-1, 1]`.
#[inline]
pub fn intensity_to_unit(v: u8) -> f64 {
    f64::from(v) / 127.5 - 1.0
}

/// Inverse of [`intensity_to_unit`]: clamps, then rounds half away from zero.
#[inline]
pub fn unit_to_intensity(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// `(x, y)` coordinates of every pixel of a `width×height` image, row-major,
/// with the corner pixels at `±1`.
pub fn pixel_grid<T: Real>(width: usize, height: usize) -> Matrix<T> {
    let xs: Vec<f64> = linspace(width).collect();
    let ys: Vec<f64> = linspace(height).collect();
    Matrix::from_fn(width * height, 2, |i, j| T::lit(if j == 0 { xs[i % width] } else { ys[i / width] }))
}

/// One sample per pixel: input `(x, y)` scaled to `[-1,1]²`, target the
/// intensity scaled to `[-1,1]`. Rows enumerate pixels row-major.
pub fn gen_memorization<T: Real>(image: &GrayImage) -> Dataset<T> {
    let (w, h) = (image.width, image.height);
    let inputs = pixel_grid(w, h);
    let targets = Matrix::from_fn(w * h, 1, |i, _| T::lit(intensity_to_unit(image.pixels[i])));
    Dataset::new(inputs, targets, DatasetKind::Memorization, Some((w, h)))
}

/// Rebuilds an image from per-pixel values in `[-1, 1]` (row-major).
pub fn values_to_image<T: Real>(values: &Matrix<T>, width: usize, height: usize) -> Result<GrayImage> {
    if values.as_slice().len() != width * height {
        return Err(Error::Shape { op: "values_to_image", left: values.shape(), right: (width * height, 1) });
    }
    Ok(GrayImage::new(width, height, values.as_slice().iter().map(|v| unit_to_intensity(v.as_f64())).collect()))
}

/// Loads an MNIST image/label pair: inputs `N×784` in `[0,1]`, targets
/// one-hot `N×10`.
pub fn load_mnist<T: Real>(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let images = idx::parse_images(&idx::read_file(images_path.as_ref())?)?;
    let labels = idx::parse_labels(&idx::read_file(labels_path.as_ref())?)?;
    mnist_from_parts(&images, &labels)
}

pub fn mnist_from_parts<T: Real>(images: &idx::IdxImages, labels: &[u8]) -> Result<Dataset<T>> {
    if images.count != labels.len() {
        return Err(idx::IdxError::CountMismatch { images: images.count, labels: labels.len() }.into());
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(idx::IdxError::LabelOutOfRange { index, label }.into());
    }
    let size = images.rows * images.cols;
    let scale = T::lit(1.0 / 255.0);
    let inputs = Matrix::new(
        images.count,
        size,
        images.pixels.iter().map(|&p| T::lit(f64::from(p)) * scale).collect(),
    )?;
    let targets = Matrix::from_fn(labels.len(), 10, |i, j| if usize::from(labels[i]) == j { T::one() } else { T::zero() });
    Ok(Dataset::new(inputs, targets, DatasetKind::Mnist, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn checkerboard_cells() {
        let b = 4;
        let c = -1.0 + 1.0 / b as f64;
        assert_eq!(checkerboard_label(c, c, b), 1.0);
        assert_eq!(checkerboard_label(c + 2.0 / b as f64, c, b), -1.0);
        assert_eq!(checkerboard_label(-1.0, -1.0, b), 1.0);
        assert_eq!(checkerboard_label(1.0, 1.0, b), 1.0);
        assert_eq!(checkerboard_label(1.0, -1.0, b), -1.0);
    }

    #[test]
    fn checkerboard_training_set() {
        let d: Dataset<f64> = gen_checkerboard(5000, 4, 1).unwrap();
        assert_eq!(d.inputs.shape(), (5000, 2));
        assert!(d.inputs.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
        for i in 0..d.len() {
            let (x, y) = (d.inputs.get(i, 0), d.inputs.get(i, 1));
            assert_eq!(d.targets.get(i, 0), checkerboard_label(x, y, 4));
        }
        assert_eq!(d, gen_checkerboard(5000, 4, 1).unwrap());
        assert!(gen_checkerboard::<f64>(10, 1, 0).is_err());
        assert!(gen_checkerboard::<f64>(0, 4, 0).is_err());
    }

    #[test]
    fn checkerboard_grid() {
        let g: Dataset<f64> = gen_checkerboard_testgrid(4).unwrap();
        assert_eq!(g.len(), 250_000);
        assert_eq!(g.grid, Some((500, 500)));
        assert_eq!((g.inputs.get(0, 0), g.inputs.get(0, 1)), (-1.0, -1.0));
        assert_eq!(g.targets.get(0, 0), 1.0);
        let positives = g.targets.as_slice().iter().filter(|&&v| v > 0.0).count();
        assert!((positives as i64 - 125_000).abs() <= 500, "{positives}");
        // a training point placed on a grid coordinate gets the grid's label
        let (x, y) = (g.inputs.get(777, 0), g.inputs.get(777, 1));
        assert_eq!(checkerboard_label(x, y, 4), g.targets.get(777, 0));
    }

    #[test]
    fn parabola_values() {
        let d: Dataset<f64> = gen_parabola(5).unwrap();
        assert_eq!(d.inputs.as_slice(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(d.targets.as_slice(), &[1.0, 0.25, 0.0, 0.25, 1.0]);
        assert!(gen_parabola::<f64>(1).is_err());
    }

    #[test]
    fn sincos_values() {
        assert_eq!(sincos(0.0, 0.0), 0.0);
        assert!((sincos(std::f64::consts::PI / 20.0, 0.0) - 1.0).abs() < 1e-15);
        let d: Dataset<f64> = gen_sincos(101).unwrap();
        assert_eq!(d.len(), 101 * 101);
        for i in [0, 57, 5000, 10200] {
            let (x, y) = (d.inputs.get(i, 0), d.inputs.get(i, 1));
            assert_eq!(d.targets.get(i, 0), (x * 10.0).sin() * (y * 5.0).cos());
        }
        assert_eq!(d.targets.get(50 * 101 + 50, 0), 0.0);
    }

    #[test]
    fn memorization_mapping_round_trips() {
        let black = GrayImage::filled(4, 3, 0);
        let d: Dataset<f64> = gen_memorization(&black);
        assert!(d.targets.as_slice().iter().all(|&v| v == -1.0));

        let img = GrayImage::new(150, 150, (0..22500).map(|i| (i * 7 % 256) as u8).collect());
        let d: Dataset<f64> = gen_memorization(&img);
        assert_eq!(d.len(), 22_500);
        assert_eq!(values_to_image(&d.targets, 150, 150).unwrap(), img);
        assert_eq!((d.inputs.get(149, 0), d.inputs.get(149, 1)), (1.0, -1.0));
    }

    #[test]
    fn intensity_rounding() {
        for v in 0..=255u8 {
            assert_eq!(unit_to_intensity(intensity_to_unit(v)), v);
        }
        assert_eq!(unit_to_intensity(0.0), 128);
        assert_eq!(unit_to_intensity(-3.0), 0);
        assert_eq!(unit_to_intensity(7.0), 255);
    }

    #[test]
    fn mnist_parts() {
        use idx::fixtures;
        let images = idx::parse_images(&fixtures::images(3, 2, 2, |i| (i * 20) as u8)).unwrap();
        let d: Dataset<f64> = mnist_from_parts(&images, &[7, 0, 9]).unwrap();
        assert_eq!(d.inputs.shape(), (3, 4));
        assert_eq!(d.targets.row(0), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((d.inputs.get(2, 3) - 220.0 / 255.0).abs() < 1e-15);
        assert!(matches!(
            mnist_from_parts::<f64>(&images, &[1, 2]),
            Err(Error::Idx(idx::IdxError::CountMismatch { images: 3, labels: 2 }))
        ));
        assert!(mnist_from_parts::<f64>(&images, &[1, 2, 10]).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let d: Dataset<f64> = gen_parabola(10).unwrap();
        let (train, test) = d.split(0.3, 1).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
        let mut all: Vec<f64> = train.inputs.as_slice().iter().chain(test.inputs.as_slice()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.inputs.as_slice());
    }

    proptest! {
        #[test]
        fn label_is_symmetric_in_axes(x in -1.0f64..=1.0, y in -1.0f64..=1.0, board in 2usize..9) {
            prop_assert_eq!(checkerboard_label(x, y, board), checkerboard_label(y, x, board));
        }
    }
}
