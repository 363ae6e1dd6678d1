//! Redundancy accounting for Gaussian-tile pairs and the scene-adaptive
//! shrink threshold derived from it.
//!
//! * KPC of a pair: `Σ α·T` over the pair's tile pixels, where `T` is the
//!   transmittance just before the Gaussian at that pixel. Skipped and
//!   post-termination samples contribute nothing.
//! * GTC of a tile: mean KPC over the tile's pairs. Tiles without pairs are
//!   left out of the view average.
//! * Scene GTC: mean of the per-view averages; `τ = λ_G / scene GTC`.

mod quality;

pub use quality::{psnr, ssim, QualityError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{FilterConfig, FilterKind};
use crate::raster::{render, tile_ranges, RenderError, RenderOutput, RenderSettings, ShrinkMode, TileGrid, TilePair};
use crate::scene::{Camera, LoDTree};

/// Pairs with KPC below this are counted as redundant (`N_low`).
pub const REDUNDANT_KPC: f64 = 0.01;

/// Upper edges of the KPC histogram bins; the last bin is open.
pub const KPC_BIN_EDGES: [f64; 4] = [0.01, 0.05, 0.2, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairContribution {
    pub pair: TilePair,
    pub kpc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileStats {
    pub tile: u32,
    pub n_gs: usize,
    pub gtc: f64,
}

#[derive(Debug, Clone)]
pub struct InstrumentedRender {
    pub output: RenderOutput,
    pub contributions: Vec<PairContribution>,
    pub tiles: Vec<TileStats>,
    /// View-level GTC, `None` when no tile received a pair.
    pub view_gtc: Option<f64>,
}

/// Render through the unshrunk (3σ) pipeline while recording per-pair KPC.
pub fn instrumented_render(tree: &LoDTree, cam: &Camera, config: &FilterConfig) -> Result<InstrumentedRender, RenderError> {
    let settings = RenderSettings {
        filter: FilterKind::Parallel,
        filter_config: *config,
        shrink: ShrinkMode::ThreeSigma,
        collect_kpc: true,
    };
    instrumented_render_with(tree, cam, &settings)
}

/// Instrumented render with arbitrary settings (e.g. to measure KPC after
/// shrinking).
pub fn instrumented_render_with(tree: &LoDTree, cam: &Camera, settings: &RenderSettings) -> Result<InstrumentedRender, RenderError> {
    let settings = RenderSettings { collect_kpc: true, ..*settings };
    let output = render(tree, cam, &settings)?;
    let kpc = output.kpc.as_deref().expect("kpc requested");
    let contributions = output.pairs.iter().zip(kpc).map(|(&pair, &kpc)| PairContribution { pair, kpc }).collect();
    let tiles = tile_stats(&output.pairs, kpc, &output.grid);
    let view_gtc = view_gtc(&tiles);
    Ok(InstrumentedRender {
        output,
        contributions,
        tiles,
        view_gtc,
    })
}

/// Per-tile pair counts and GTC for tiles with at least one pair.
pub fn tile_stats(sorted: &[TilePair], kpc: &[f64], grid: &TileGrid) -> Vec<TileStats> {
    assert_eq!(sorted.len(), kpc.len());
    tile_ranges(sorted, grid.n_tiles())
        .into_iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .map(|(tile, r)| {
            let n_gs = r.len();
            let sum: f64 = kpc[r].iter().sum();
            TileStats {
                tile: tile as u32,
                n_gs,
                gtc: sum / n_gs as f64,
            }
        })
        .collect()
}

/// Mean GTC over tiles that have pairs.
pub fn view_gtc(tiles: &[TileStats]) -> Option<f64> {
    if tiles.is_empty() {
        return None;
    }
    Some(tiles.iter().map(|t| t.gtc).sum::<f64>() / tiles.len() as f64)
}

/// Pair counts in the fixed KPC bins `[0,0.01) [0.01,0.05) [0.05,0.2) [0.2,1) [1,∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KpcHistogram {
    pub counts: [u64; 5],
}

impl KpcHistogram {
    pub const LABELS: [&'static str; 5] = ["[0,0.01)", "[0.01,0.05)", "[0.05,0.2)", "[0.2,1)", "[1,inf)"];

    pub fn add(&mut self, kpc: f64) {
        let bin = KPC_BIN_EDGES.iter().position(|&e| kpc < e).unwrap_or(KPC_BIN_EDGES.len());
        self.counts[bin] += 1;
    }

    pub fn merge(&mut self, other: &KpcHistogram) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
    }

    /// Pairs with KPC < 0.01.
    pub fn n_low(&self) -> u64 {
        self.counts[0]
    }

    /// Pairs with KPC < 0.05.
    pub fn below_005(&self) -> u64 {
        self.counts[0] + self.counts[1]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn redundancy_histogram(kpcs: impl IntoIterator<Item = f64>) -> KpcHistogram {
    let mut h = KpcHistogram::default();
    for k in kpcs {
        h.add(k);
    }
    h
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("no calibration views given")]
    NoViews,
    #[error("lambda_g must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error("every view rendered to an empty tile set; scene GTC undefined")]
    Empty,
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Scene-level GTC aggregate and the shrink threshold derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Number of views rendered.
    pub views: usize,
    /// View-level GTC per view; `null` for views with no pairs.
    pub per_view_gtc: Vec<Option<f64>>,
    pub scene_gtc: f64,
    pub lambda_g: f64,
    pub tau: f64,
    pub histogram: KpcHistogram,
}

impl CalibrationReport {
    /// Aggregate per-view GTC values; views without pairs are skipped.
    pub fn from_view_gtcs(per_view_gtc: Vec<Option<f64>>, lambda_g: f64, histogram: KpcHistogram) -> Result<Self, CalibrationError> {
        if !(lambda_g > 0.0 && lambda_g.is_finite()) {
            return Err(CalibrationError::BadLambda(lambda_g));
        }
        if per_view_gtc.is_empty() {
            return Err(CalibrationError::NoViews);
        }
        let present: Vec<f64> = per_view_gtc.iter().flatten().copied().collect();
        if present.is_empty() {
            return Err(CalibrationError::Empty);
        }
        let scene_gtc = present.iter().sum::<f64>() / present.len() as f64;
        Ok(Self {
            views: per_view_gtc.len(),
            per_view_gtc,
            scene_gtc,
            lambda_g,
            tau: lambda_g / scene_gtc,
            histogram,
        })
    }
}

/// Pre-render every view through the unshrunk pipeline and derive `τ`.
pub fn calibrate(tree: &LoDTree, views: &[Camera], lambda_g: f64, config: &FilterConfig) -> Result<CalibrationReport, CalibrationError> {
    if !(lambda_g > 0.0 && lambda_g.is_finite()) {
        return Err(CalibrationError::BadLambda(lambda_g));
    }
    if views.is_empty() {
        return Err(CalibrationError::NoViews);
    }
    let mut per_view = Vec::with_capacity(views.len());
    let mut histogram = KpcHistogram::default();
    for cam in views {
        let r = instrumented_render(tree, cam, config)?;
        histogram.merge(&redundancy_histogram(r.contributions.iter().map(|c| c.kpc)));
        per_view.push(r.view_gtc);
    }
    CalibrationReport::from_view_gtcs(per_view, lambda_g, histogram)
}
