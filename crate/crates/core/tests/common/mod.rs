#![allow(dead_code)]

use lodsplat::tree::random_rotation;
use lodsplat::{build_tree, Camera, GaussianNode, LoDTree, TreeBuildConfig};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_root(rng: &mut impl Rng, extent: f32) -> GaussianNode {
    let mean = [rng.gen_range(-extent..extent), rng.gen_range(-extent..extent), rng.gen_range(-extent..extent)];
    let scale = [rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0)];
    let color = [rng.gen(), rng.gen(), rng.gen()];
    GaussianNode::root(mean, scale, random_rotation(rng), rng.gen_range(0.05..1.0), color)
}

pub fn random_tree(rng: &mut impl Rng, depth: u32, n_roots: usize, k: u32) -> LoDTree {
    let roots: Vec<_> = (0..n_roots).map(|_| random_root(rng, 5.0)).collect();
    let cfg = TreeBuildConfig {
        depth,
        shrink_factor: rng.gen_range(0.2..=0.7),
        children_per_node: k,
        seed: rng.gen(),
    };
    build_tree(&roots, &cfg).unwrap()
}

pub fn random_camera(rng: &mut impl Rng, width: u32, height: u32) -> Camera {
    loop {
        let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if dir.norm() < 1e-3 {
            continue;
        }
        let eye = dir.normalize() * rng.gen_range(2.0..25.0);
        let target = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let up = Vector3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 1.0);
        if let Ok(c) = Camera::look_at(width, height, rng.gen_range(30.0..90.0), eye, target, up, 0.1, rng.gen_range(8.0..60.0)) {
            return c;
        }
    }
}

/// Camera a few units in front of the origin, for scenes of small extent.
pub fn front_camera(rng: &mut impl Rng, width: u32, height: u32) -> Camera {
    let eye = Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-12.0..-7.0), rng.gen_range(-2.0..2.0));
    Camera::look_at(width, height, 50.0, eye, Vector3::zeros(), Vector3::z(), 0.1, 50.0).unwrap()
}

/// Single-level tree over the given roots.
pub fn flat(roots: Vec<GaussianNode>) -> LoDTree {
    let n = roots.len() as u32;
    LoDTree::from_parts(roots, vec![0, n], 0.5)
}
