//! Full-reference image quality: PSNR and single-scale SSIM.

use thiserror::Error;

use crate::raster::Image;

#[derive(Debug, Error, PartialEq)]
pub enum QualityError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
}

fn same_dims(a: &Image, b: &Image) -> Result<(), QualityError> {
    if a.width != b.width || a.height != b.height {
        return Err(QualityError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

/// `10·log10(1 / MSE)` over all channels with peak 1; `+∞` for identical
/// images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, QualityError> {
    same_dims(a, b)?;
    let n = a.data.len().max(1) as f64;
    let mse = a.data.iter().zip(&b.data).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_window(size: usize) -> Vec<f64> {
    let half = (size / 2) as f64;
    let w: Vec<f64> = (0..size).map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SIGMA * SIGMA)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of a `w × h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over the three channels with an 11×11 Gaussian window
/// (σ = 1.5), `k1 = 0.01`, `k2 = 0.03`, dynamic range 1. Images smaller
/// than the window use the largest odd window that fits.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, QualityError> {
    same_dims(a, b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w == 0 || h == 0 {
        return Ok(1.0);
    }
    let mut size = WINDOW.min(w).min(h);
    if size % 2 == 0 {
        size -= 1;
    }
    let k = gaussian_window(size);
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..3 {
        let x: Vec<f64> = a.data.iter().skip(ch).step_by(3).map(|&v| v as f64).collect();
        let y: Vec<f64> = b.data.iter().skip(ch).step_by(3).map(|&v| v as f64).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mx = filter_valid(&x, w, h, &k);
        let my = filter_valid(&y, w, h, &k);
        let sxx = filter_valid(&xx, w, h, &k);
        let syy = filter_valid(&yy, w, h, &k);
        let sxy = filter_valid(&xy, w, h, &k);
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            total += ((2.0 * ux * uy + C1) * (2.0 * cxy + C2)) / ((ux * ux + uy * uy + C1) * (vx + vy + C2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}
