//! Tile rasterization: footprint extents (optionally shrunk), Gaussian-tile
//! binning, key sorting, and front-to-back alpha blending.

mod blend;
mod image;
mod sort;

pub use blend::{alpha_blend, blend_pixel, BlendOutput, ALPHA_CAP, ALPHA_SKIP, T_TERMINATE};
pub use image::{quantize, Image, PpmError};
pub use sort::{depth_key, sort_pairs};

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{run_filter, FilterConfig, FilterKind};
use crate::pool::{partition, pool};
use crate::projection::{project_visible, Frustum, Projected2D, ProjectionError, SIGMA_EXTENT};
use crate::scene::{Camera, LoDTree};

pub const TILE_SIZE: u32 = 16;

/// Opacity threshold used by the fixed shrinking mode.
pub const FIXED_TAU: f64 = 1.0 / 255.0;

/// 16×16 tiling of an image; tile id = `ty·tiles_x + tx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub width: u32,
    pub height: u32,
    pub tiles_x: u32,
    pub tiles_y: u32,
}

impl TileGrid {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            tiles_x: width.div_ceil(TILE_SIZE),
            tiles_y: height.div_ceil(TILE_SIZE),
        }
    }

    pub fn n_tiles(&self) -> usize {
        self.tiles_x as usize * self.tiles_y as usize
    }

    pub fn tile_id(&self, tx: u32, ty: u32) -> u32 {
        ty * self.tiles_x + tx
    }

    /// Pixel rectangle `(x0, y0, x1, y1)` (exclusive upper bounds) of a tile,
    /// clipped to the image.
    pub fn tile_rect(&self, tile: u32) -> (u32, u32, u32, u32) {
        let tx = tile % self.tiles_x;
        let ty = tile / self.tiles_x;
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        (x0, y0, (x0 + TILE_SIZE).min(self.width), (y0 + TILE_SIZE).min(self.height))
    }

    /// Inclusive tile range `(tx0, tx1, ty0, ty1)` overlapped by the box
    /// `[mean − r, mean + r]` after clipping to the image, or `None`.
    pub fn tile_span(&self, mean: [f64; 2], r: f64) -> Option<(u32, u32, u32, u32)> {
        if !(r > 0.0) {
            return None;
        }
        let (w, h) = (self.width as f64, self.height as f64);
        let (xmin, xmax) = (mean[0] - r, mean[0] + r);
        let (ymin, ymax) = (mean[1] - r, mean[1] + r);
        if xmax < 0.0 || ymax < 0.0 || xmin >= w || ymin >= h {
            return None;
        }
        let t = TILE_SIZE as f64;
        let tx0 = (xmin.max(0.0) / t).floor() as u32;
        let ty0 = (ymin.max(0.0) / t).floor() as u32;
        let tx1 = ((xmax / t).floor() as u32).min(self.tiles_x - 1);
        let ty1 = ((ymax / t).floor() as u32).min(self.tiles_y - 1);
        Some((tx0, tx1, ty0, ty1))
    }
}

/// How a Gaussian's binning extent is derived from its footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShrinkMode {
    /// Extent `3·σ_max`.
    ThreeSigma,
    /// Radius at which opacity decays to a fixed `τ` (normally 1/255).
    Fixed(f64),
    /// Radius at which opacity decays to a calibrated, scene-adaptive `τ`.
    Adaptive(f64),
}

impl ShrinkMode {
    pub fn name(&self) -> &'static str {
        match self {
            ShrinkMode::ThreeSigma => "3sigma",
            ShrinkMode::Fixed(_) => "fixed",
            ShrinkMode::Adaptive(_) => "adaptive",
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match *self {
            ShrinkMode::ThreeSigma => None,
            ShrinkMode::Fixed(t) | ShrinkMode::Adaptive(t) => Some(t),
        }
    }
}

impl fmt::Display for ShrinkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Binning radius of a projected Gaussian.
///
/// For threshold modes the radius is where `α₀·exp(−r²/2σ_max²)` falls to
/// `τ`, i.e. `σ_max·sqrt(2·ln(α₀/τ))`, capped at `3·σ_max`; Gaussians with
/// `α₀ ≤ τ` get radius 0 and are dropped.
pub fn effective_radius(proj: &Projected2D, mode: ShrinkMode) -> f64 {
    let full = SIGMA_EXTENT * proj.sigma_max;
    match mode {
        ShrinkMode::ThreeSigma => full,
        ShrinkMode::Fixed(tau) | ShrinkMode::Adaptive(tau) => shrink_radius(proj.opacity, tau, proj.sigma_max).min(full),
    }
}

/// Unclamped decay radius `σ·sqrt(2·ln(α₀/τ))`, 0 when `α₀ ≤ τ`.
pub fn shrink_radius(alpha0: f64, tau: f64, sigma: f64) -> f64 {
    if alpha0 <= tau {
        return 0.0;
    }
    sigma * (2.0 * (alpha0 / tau).ln()).sqrt()
}

/// One Gaussian-tile key-value record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TilePair {
    pub tile: u32,
    pub depth: f32,
    /// Index into the projected-Gaussian list.
    pub gaussian: u32,
}

/// Emit one pair per tile overlapped by each Gaussian's clipped box,
/// in Gaussian order then row-major tile order.
pub fn bin_to_tiles(projected: &[Projected2D], radii: &[f64], grid: &TileGrid) -> Vec<TilePair> {
    assert_eq!(projected.len(), radii.len(), "radii must align with projected Gaussians");
    let mut out = Vec::new();
    bin_range(projected, radii, grid, 0..projected.len(), &mut out);
    out
}

fn bin_range(projected: &[Projected2D], radii: &[f64], grid: &TileGrid, range: std::ops::Range<usize>, out: &mut Vec<TilePair>) {
    for g in range {
        let p = &projected[g];
        let Some((tx0, tx1, ty0, ty1)) = grid.tile_span(p.mean2d, radii[g]) else { continue };
        let depth = p.depth as f32;
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                out.push(TilePair {
                    tile: grid.tile_id(tx, ty),
                    depth,
                    gaussian: g as u32,
                });
            }
        }
    }
}

/// Parallel binning with the same output order as [`bin_to_tiles`].
pub fn bin_to_tiles_parallel(projected: &[Projected2D], radii: &[f64], grid: &TileGrid, workers: usize) -> Vec<TilePair> {
    assert_eq!(projected.len(), radii.len(), "radii must align with projected Gaussians");
    let ranges = partition(projected.len(), workers);
    let parts: Vec<Vec<TilePair>> = pool(workers).install(|| {
        ranges
            .into_par_iter()
            .map(|r| {
                let mut v = Vec::new();
                bin_range(projected, radii, grid, r, &mut v);
                v
            })
            .collect()
    });
    parts.concat()
}

/// Start/end of each tile's run in a sorted pair list.
pub fn tile_ranges(sorted: &[TilePair], n_tiles: usize) -> Vec<std::ops::Range<usize>> {
    let mut ranges = vec![0..0; n_tiles];
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].tile;
        let start = i;
        while i < sorted.len() && sorted[i].tile == t {
            i += 1;
        }
        ranges[t as usize] = start..i;
    }
    ranges
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("shrink threshold must lie in (0,1), got {0}")]
    InvalidTau(f64),
    #[error("camera: {0}")]
    Camera(#[from] crate::scene::CameraError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub filter: FilterKind,
    pub filter_config: FilterConfig,
    pub shrink: ShrinkMode,
    /// Accumulate per-pair KPC while blending.
    pub collect_kpc: bool,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            filter: FilterKind::Parallel,
            filter_config: FilterConfig::default(),
            shrink: ShrinkMode::ThreeSigma,
            collect_kpc: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderStats {
    pub n_selected: usize,
    pub n_projected: usize,
    /// `N_P`, total emitted Gaussian-tile pairs.
    pub n_pairs: usize,
    pub passes: u32,
    pub barriers: u32,
    pub t_calc: Duration,
    pub t_sync: Duration,
    pub t_prepr: Duration,
    pub t_sort: Duration,
    pub t_alpha: Duration,
}

impl RenderStats {
    pub fn t_total(&self) -> Duration {
        self.t_calc + self.t_sync + self.t_prepr + self.t_sort + self.t_alpha
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: Image,
    pub stats: RenderStats,
    pub grid: TileGrid,
    pub projected: Vec<Projected2D>,
    /// Sorted pairs, in blending order.
    pub pairs: Vec<TilePair>,
    /// Per-pair KPC aligned with `pairs`, when requested.
    pub kpc: Option<Vec<f64>>,
}

/// Full frame: LoD filter, projection, extents, binning, sorting, blending.
pub fn render(tree: &LoDTree, cam: &Camera, settings: &RenderSettings) -> Result<RenderOutput, RenderError> {
    cam.validate()?;
    if let Some(tau) = settings.shrink.tau() {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(RenderError::InvalidTau(tau));
        }
    }
    let workers = settings.filter_config.worker_count.max(1);
    let filtered = run_filter(settings.filter, tree, cam, &settings.filter_config);

    let t_prepr = Instant::now();
    let selected = &filtered.selected;
    let frustum = Frustum::new(cam);
    let ranges = partition(selected.len(), workers);
    let parts: Vec<Result<Vec<Projected2D>, ProjectionError>> = pool(workers).install(|| {
        ranges
            .into_par_iter()
            .map(|r| {
                let mut v = Vec::with_capacity(r.len());
                for &i in &selected[r] {
                    let node = tree.node(i as usize);
                    let p = cam.world_to_camera(&node.mean_f64());
                    if !frustum.contains_sphere(&p, node.bounding_radius()) {
                        continue;
                    }
                    if let Some(proj) = project_visible(node, i, cam, &p)? {
                        v.push(proj);
                    }
                }
                Ok(v)
            })
            .collect()
    });
    let mut projected = Vec::with_capacity(selected.len());
    for part in parts {
        projected.extend(part?);
    }
    let radii: Vec<f64> = projected.iter().map(|p| effective_radius(p, settings.shrink)).collect();
    let grid = TileGrid::new(cam.width, cam.height);
    let pairs = bin_to_tiles_parallel(&projected, &radii, &grid, workers);
    let t_prepr = t_prepr.elapsed();

    let t_sort = Instant::now();
    let sorted = sort_pairs(&pairs);
    drop(pairs);
    let t_sort = t_sort.elapsed();

    let t_alpha = Instant::now();
    let blended = alpha_blend(&sorted, &projected, &grid, settings.collect_kpc, workers);
    let t_alpha = t_alpha.elapsed();

    let stats = RenderStats {
        n_selected: selected.len(),
        n_projected: projected.len(),
        n_pairs: sorted.len(),
        passes: filtered.passes,
        barriers: filtered.barriers,
        t_calc: filtered.calc_time,
        t_sync: filtered.sync_time,
        t_prepr,
        t_sort,
        t_alpha,
    };
    Ok(RenderOutput {
        image: blended.image,
        stats,
        grid,
        projected,
        pairs: sorted,
        kpc: blended.kpc,
    })
}

/// Textual shrink-mode selector as used on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShrinkKind {
    #[serde(rename = "3sigma")]
    ThreeSigma,
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "adaptive")]
    Adaptive,
}

impl std::str::FromStr for ShrinkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "3sigma" => Ok(ShrinkKind::ThreeSigma),
            "fixed" => Ok(ShrinkKind::Fixed),
            "adaptive" => Ok(ShrinkKind::Adaptive),
            other => Err(format!("unknown shrink mode `{other}` (expected 3sigma|fixed|adaptive)")),
        }
    }
}

impl ShrinkKind {
    pub fn name(self) -> &'static str {
        match self {
            ShrinkKind::ThreeSigma => "3sigma",
            ShrinkKind::Fixed => "fixed",
            ShrinkKind::Adaptive => "adaptive",
        }
    }
}
