//! Seeded scenes and cameras shared by the CLI tests and the acceptance
//! suite.

use lodsplat::tree::{random_rotation, SyntheticSceneSpec};
use lodsplat::{build_tree, generate_synthetic_scene, Camera, GaussianNode, LoDTree, TreeBuildConfig};
use nalgebra::Vector3;
use rand::Rng;

pub const PALETTE: [[f32; 3]; 4] = [[0.9, 0.3, 0.2], [0.2, 0.7, 0.3], [0.2, 0.3, 0.9], [0.8, 0.8, 0.2]];

/// 8×8 jittered grid, `congestion` roots per cell.
pub fn grid_spec(congestion: u32, opacity_range: (f32, f32)) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        nx: 8,
        ny: 8,
        spacing: 2.0,
        scale_range: (0.3, 0.8),
        opacity_range,
        palette: PALETTE.to_vec(),
        seed: 7,
        congestion,
    }
}

pub fn grid_tree_config() -> TreeBuildConfig {
    TreeBuildConfig {
        depth: 3,
        shrink_factor: 0.5,
        children_per_node: 4,
        seed: 3,
    }
}

/// The congested grid scene as an LoD tree.
pub fn congested_tree(congestion: u32, opacity_range: (f32, f32)) -> LoDTree {
    let roots = generate_synthetic_scene(&grid_spec(congestion, opacity_range)).expect("valid spec");
    build_tree(&roots, &grid_tree_config()).expect("valid config")
}

/// Filter threshold used with the congested fixture for shrink comparisons.
pub const FIXTURE_TAU_R: f64 = 20.0;

/// `n` cameras orbiting the grid at 320×240, phase offset by `phase`.
pub fn orbit_views(n: usize, phase: f64) -> Vec<Camera> {
    (0..n)
        .map(|k| {
            let a = phase + k as f64 * 0.5;
            let eye = Vector3::new(6.0 * a.sin(), -14.0 * a.cos() - 2.0, 10.0);
            Camera::look_at(320, 240, 60.0, eye, Vector3::zeros(), Vector3::z(), 0.1, 100.0).expect("valid camera")
        })
        .collect()
}

pub fn random_root(rng: &mut impl Rng, extent: f32) -> GaussianNode {
    let mean = [rng.gen_range(-extent..extent), rng.gen_range(-extent..extent), rng.gen_range(-extent..extent)];
    let scale = [rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0)];
    let color = [rng.gen(), rng.gen(), rng.gen()];
    GaussianNode::root(mean, scale, random_rotation(rng), rng.gen_range(0.05..1.0), color)
}

/// Random tree of depth `depth` with at most roughly `max_nodes` nodes.
pub fn random_tree(rng: &mut impl Rng, depth: u32, max_nodes: usize) -> LoDTree {
    let k = loop {
        let k: u32 = rng.gen_range(1..=8);
        let per_root: usize = (0..=depth).map(|l| (k as usize).pow(l)).sum();
        if per_root <= max_nodes {
            break k;
        }
    };
    let per_root: usize = (0..=depth).map(|l| (k as usize).pow(l)).sum();
    let n_roots = rng.gen_range(1..=(max_nodes / per_root).clamp(1, 64));
    let roots: Vec<_> = (0..n_roots).map(|_| random_root(rng, 6.0)).collect();
    let cfg = TreeBuildConfig {
        depth,
        shrink_factor: rng.gen_range(0.2..=0.7),
        children_per_node: k,
        seed: rng.gen(),
    };
    build_tree(&roots, &cfg).expect("valid random tree")
}

/// Camera somewhere around the origin looking roughly toward it; some
/// views are deliberately close enough to clip the scene.
pub fn random_camera(rng: &mut impl Rng, width: u32, height: u32) -> Camera {
    loop {
        let dist = rng.gen_range(2.0..30.0);
        let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if dir.norm() < 1e-3 {
            continue;
        }
        let eye = dir.normalize() * dist;
        let target = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let up = Vector3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 1.0);
        let fov = rng.gen_range(30.0..90.0);
        if let Ok(c) = Camera::look_at(width, height, fov, eye, target, up, 0.1, rng.gen_range(10.0..60.0)) {
            return c;
        }
    }
}
