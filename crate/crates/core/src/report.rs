//! Raster and CSV artifacts: decision surfaces, reconstructions, activation
//! histograms and fit curves.

use std::io::Write;
use std::path::Path;

use crate::datasets::{pixel_grid, values_to_image};
use crate::error::{Error, Result};
use crate::experiments::{FitSnapshot, Histogram};
use crate::linalg::Matrix;
use crate::netpbm::{GrayImage, RgbImage};
use crate::network::Network;

pub const POSITIVE: [u8; 3] = [255, 0, 0];
pub const NEGATIVE: [u8; 3] = [0, 0, 0];

/// Centers of `resolution` equal cells spanning `[-1, 1]`.
fn pixel_centers(resolution: usize) -> Vec<f64> {
    let step = 2.0 / resolution as f64;
    (0..resolution).map(|i| -1.0 + (i as f64 + 0.5) * step).collect()
}

/// Colors each pixel of a `resolution×resolution` raster over `[-1, 1]²`
/// by the sign of `f` at the pixel center. Row 0 is the top (`y` near +1).
pub fn render_surface<F>(f: F, resolution: usize) -> Result<RgbImage>
where
    F: Fn(&Matrix<f64>) -> Result<Matrix<f64>>,
{
    if resolution == 0 {
        return Err(Error::config("resolution must be positive"));
    }
    let centers = pixel_centers(resolution);
    let mut pixels = Vec::with_capacity(resolution * resolution);
    for row in 0..resolution {
        let y = centers[resolution - 1 - row];
        let batch = Matrix::from_fn(resolution, 2, |i, j| if j == 0 { centers[i] } else { y });
        let out = f(&batch)?;
        if out.shape() != (resolution, 1) {
            return Err(Error::Shape { op: "render_surface", left: out.shape(), right: (resolution, 1) });
        }
        pixels.extend(out.as_slice().iter().map(|&v| if v >= 0.0 { POSITIVE } else { NEGATIVE }));
    }
    Ok(RgbImage::new(resolution, resolution, pixels))
}

pub fn render_decision_surface(net: &Network<f64>, resolution: usize) -> Result<RgbImage> {
    check_two_to_one(net, "render_decision_surface")?;
    render_surface(|x| net.predict(x), resolution)
}

/// Queries every pixel coordinate of a `width×height` image and maps the
/// output from `[-1, 1]` back to 0..255 (clamped, half away from zero).
pub fn render_reconstruction(net: &Network<f64>, width: usize, height: usize) -> Result<GrayImage> {
    check_two_to_one(net, "render_reconstruction")?;
    let out = net.predict(&pixel_grid(width, height))?;
    values_to_image(&out, width, height)
}

fn check_two_to_one(net: &Network<f64>, op: &'static str) -> Result<()> {
    let spec = net.spec();
    if spec.input_dim() != 2 || spec.output_dim() != 1 {
        return Err(Error::Shape { op, left: (spec.input_dim(), spec.output_dim()), right: (2, 1) });
    }
    Ok(())
}

/// Histogram CSV: `lower,upper,count`, one row per bin.
pub fn write_histogram_csv<W: Write>(mut out: W, hist: &Histogram) -> Result<()> {
    writeln!(out, "# hidden-unit output histogram: lower/upper bin edge (equal for exact levels), count")?;
    writeln!(out, "lower,upper,count")?;
    for ((lo, hi), c) in hist.bins.iter().zip(&hist.counts) {
        writeln!(out, "{lo},{hi},{c}")?;
    }
    Ok(())
}

/// Fit-curve CSV: `epoch,x,target,prediction`, one row per point per snapshot.
pub fn write_fit_curve_csv<W: Write>(mut out: W, xs: &[f64], targets: &[f64], snapshots: &[FitSnapshot]) -> Result<()> {
    writeln!(out, "# fit curve: training epoch, input x, target y, network prediction")?;
    writeln!(out, "epoch,x,target,prediction")?;
    for s in snapshots {
        if s.predictions.len() != xs.len() || targets.len() != xs.len() {
            return Err(Error::Shape { op: "fit curve", left: (s.predictions.len(), 1), right: (xs.len(), 1) });
        }
        for ((x, t), p) in xs.iter().zip(targets).zip(&s.predictions) {
            writeln!(out, "{},{x},{t},{p}", s.epoch)?;
        }
    }
    Ok(())
}

pub fn emit_histogram_csv(path: impl AsRef<Path>, hist: &Histogram) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_histogram_csv(&mut w, hist)?;
    w.flush()?;
    Ok(())
}

pub fn emit_fit_curve_csv(path: impl AsRef<Path>, xs: &[f64], targets: &[f64], snapshots: &[FitSnapshot]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_fit_curve_csv(&mut w, xs, targets, snapshots)?;
    w.flush()?;
    Ok(())
}
