use rayon::prelude::*;

use super::{tile_ranges, Image, TileGrid, TilePair};
use crate::pool::pool;
use crate::projection::Projected2D;

/// Per-sample opacity cap.
pub const ALPHA_CAP: f64 = 0.99;
/// Samples below this opacity are skipped.
pub const ALPHA_SKIP: f64 = 1.0 / 255.0;
/// A pixel stops once its transmittance falls below this.
pub const T_TERMINATE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct BlendOutput {
    pub image: Image,
    /// Per-pair `Σ α·T` over the pair's tile, aligned with the sorted pairs.
    pub kpc: Option<Vec<f64>>,
}

/// Composite one pixel (integer coordinates, sampled at the pixel centre)
/// front to back over `pairs`. Adds each pair's `α·T` to `kpc[k]` when
/// given. Returns the colour and the final transmittance.
#[inline]
pub fn blend_pixel(px: u32, py: u32, pairs: &[TilePair], projected: &[Projected2D], mut kpc: Option<&mut [f64]>) -> ([f64; 3], f64) {
    let x = px as f64 + 0.5;
    let y = py as f64 + 0.5;
    let mut c = [0.0f64; 3];
    let mut t = 1.0f64;
    for (k, pair) in pairs.iter().enumerate() {
        let g = &projected[pair.gaussian as usize];
        let dx = x - g.mean2d[0];
        let dy = y - g.mean2d[1];
        let [a, b, cc] = g.conic;
        let power = -0.5 * (a * dx * dx + cc * dy * dy) - b * dx * dy;
        if power > 0.0 {
            continue;
        }
        let alpha = (g.opacity * power.exp()).min(ALPHA_CAP);
        if alpha < ALPHA_SKIP {
            continue;
        }
        let w = alpha * t;
        for ch in 0..3 {
            c[ch] += g.color[ch] * w;
        }
        if let Some(acc) = kpc.as_deref_mut() {
            acc[k] += w;
        }
        t *= 1.0 - alpha;
        if t < T_TERMINATE {
            break;
        }
    }
    (c, t)
}

/// Blend every tile independently; identical output for any worker count.
pub fn alpha_blend(sorted: &[TilePair], projected: &[Projected2D], grid: &TileGrid, collect_kpc: bool, workers: usize) -> BlendOutput {
    let ranges = tile_ranges(sorted, grid.n_tiles());
    let tiles: Vec<(Vec<f32>, Vec<f64>)> = pool(workers).install(|| {
        (0..grid.n_tiles())
            .into_par_iter()
            .map(|tile| {
                let (x0, y0, x1, y1) = grid.tile_rect(tile as u32);
                let pairs = &sorted[ranges[tile].clone()];
                let mut pixels = vec![0f32; ((x1 - x0) * (y1 - y0) * 3) as usize];
                let mut kpc = if collect_kpc { vec![0.0; pairs.len()] } else { Vec::new() };
                if pairs.is_empty() {
                    return (pixels, kpc);
                }
                let mut o = 0;
                for py in y0..y1 {
                    for px in x0..x1 {
                        let acc = collect_kpc.then_some(kpc.as_mut_slice());
                        let (c, _) = blend_pixel(px, py, pairs, projected, acc);
                        pixels[o] = c[0] as f32;
                        pixels[o + 1] = c[1] as f32;
                        pixels[o + 2] = c[2] as f32;
                        o += 3;
                    }
                }
                (pixels, kpc)
            })
            .collect()
    });

    let mut image = Image::black(grid.width, grid.height);
    let mut kpc_all = collect_kpc.then(|| vec![0.0; sorted.len()]);
    let w = grid.width as usize;
    for (tile, (pixels, kpc)) in tiles.into_iter().enumerate() {
        let (x0, y0, x1, y1) = grid.tile_rect(tile as u32);
        let row = (x1 - x0) as usize * 3;
        for (r, py) in (y0..y1).enumerate() {
            let dst = (py as usize * w + x0 as usize) * 3;
            image.data[dst..dst + row].copy_from_slice(&pixels[r * row..(r + 1) * row]);
        }
        if let Some(all) = kpc_all.as_mut() {
            all[ranges[tile].clone()].copy_from_slice(&kpc);
        }
    }
    BlendOutput { image, kpc: kpc_all }
}
