//! Tile-based software renderer for hierarchical level-of-detail
//! Gaussian-splat scenes.
//!
//! The pipeline per frame is: select a cut through the LoD tree
//! ([`filter`]), project the selected Gaussians ([`projection`]), bin their
//! (optionally shrunk) extents into 16×16 tiles, sort the Gaussian-tile
//! pairs, and alpha-blend front to back ([`raster`]). [`metrics`] measures
//! per-pair contribution and derives a scene-adaptive shrink threshold.

pub mod filter;
pub mod metrics;
pub mod pool;
pub mod projection;
pub mod raster;
pub mod scene;
pub mod tree;

pub use filter::{filter_oracle, filter_parallel, filter_serial, FilterConfig, FilterKind, FilterResult};
pub use metrics::{calibrate, instrumented_render, CalibrationReport};
pub use raster::{render, Image, RenderOutput, RenderSettings, ShrinkMode};
pub use scene::{load_scene, save_scene, validate_tree, Camera, GaussianNode, LoDTree};
pub use tree::{build_tree, generate_synthetic_scene, SyntheticSceneSpec, TreeBuildConfig};
