mod common;

use common::{flat, front_camera, random_root, rng};
use lodsplat::metrics::{calibrate, instrumented_render, redundancy_histogram, tile_stats};
use lodsplat::tree::SyntheticSceneSpec;
use lodsplat::{build_tree, generate_synthetic_scene, Camera, FilterConfig, GaussianNode, LoDTree, TreeBuildConfig};
use nalgebra::Vector3;
use proptest::prelude::*;

fn cfg(tau_r: f64) -> FilterConfig {
    FilterConfig { tau_r, worker_count: 2 }
}

fn duplicated(roots: &[GaussianNode]) -> LoDTree {
    flat(roots.iter().flat_map(|r| [*r, *r]).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tile_kpc_sum_bounded(seed: u64, n in 1usize..80) {
        let mut r = rng(seed);
        let tree = flat((0..n).map(|_| random_root(&mut r, 2.0)).collect());
        let cam = front_camera(&mut r, 64, 48);
        let out = instrumented_render(&tree, &cam, &cfg(3.0)).unwrap();
        let kpc = out.output.kpc.as_ref().unwrap();
        for t in tile_stats(&out.output.pairs, kpc, &out.output.grid) {
            prop_assert!(t.gtc * t.n_gs as f64 <= 256.0 * (1.0 + 1e-12));
        }
        prop_assert!(kpc.iter().all(|&k| k >= 0.0));
    }

    /// Identical copies steal transmittance and double the pair count.
    #[test]
    fn duplication_lowers_view_gtc(seed: u64, n in 1usize..30) {
        let mut r = rng(seed);
        let roots: Vec<_> = (0..n).map(|_| random_root(&mut r, 2.0)).collect();
        let cam = front_camera(&mut r, 64, 48);
        let once = instrumented_render(&flat(roots.clone()), &cam, &cfg(3.0)).unwrap();
        let twice = instrumented_render(&duplicated(&roots), &cam, &cfg(3.0)).unwrap();
        if let Some(g1) = once.view_gtc {
            prop_assert!(twice.view_gtc.unwrap() < g1);
        }
    }
}

#[test]
fn occluded_gaussian_contributes_nothing() {
    // alpha is capped at 0.99, so three full-view layers drive T below the
    // termination threshold
    let wall = |z| GaussianNode::root([0.0, 0.0, z], [50.0, 50.0, 0.1], [1.0, 0.0, 0.0, 0.0], 1.0, [1.0; 3]);
    let back = GaussianNode::root([0.0, 0.0, 5.0], [0.3; 3], [1.0, 0.0, 0.0, 0.0], 0.9, [0.0, 1.0, 0.0]);
    let cam = Camera::look_at(32, 32, 40.0, Vector3::new(0.0, 0.0, -10.0), Vector3::zeros(), Vector3::y(), 0.1, 100.0).unwrap();
    let tree = flat(vec![wall(-1.0), wall(-0.5), wall(0.0), back]);
    let out = instrumented_render(&tree, &cam, &FilterConfig { tau_r: 1e9, worker_count: 1 }).unwrap();
    let back_pairs: Vec<_> = out.contributions.iter().filter(|c| out.output.projected[c.pair.gaussian as usize].node == 3).collect();
    assert!(!back_pairs.is_empty());
    assert!(back_pairs.iter().all(|c| c.kpc == 0.0));
}

fn grid_tree(congestion: u32, opacity: (f32, f32)) -> LoDTree {
    let spec = SyntheticSceneSpec {
        nx: 8,
        ny: 8,
        spacing: 2.0,
        scale_range: (0.3, 0.8),
        opacity_range: opacity,
        palette: vec![[0.9, 0.3, 0.2], [0.2, 0.7, 0.3], [0.2, 0.3, 0.9]],
        seed: 7,
        congestion,
    };
    let roots = generate_synthetic_scene(&spec).unwrap();
    build_tree(&roots, &TreeBuildConfig { depth: 3, shrink_factor: 0.5, children_per_node: 4, seed: 3 }).unwrap()
}

fn views() -> Vec<Camera> {
    (0..3)
        .map(|k| {
            let a = k as f64 * 0.5;
            Camera::look_at(320, 240, 60.0, Vector3::new(6.0 * a.sin(), -14.0 * a.cos() - 2.0, 10.0), Vector3::zeros(), Vector3::z(), 0.1, 100.0).unwrap()
        })
        .collect()
}

#[test]
fn congestion_raises_threshold() {
    let sparse = calibrate(&grid_tree(1, (0.1, 0.9)), &views(), 0.2, &cfg(20.0)).unwrap();
    let congested = calibrate(&grid_tree(4, (0.1, 0.9)), &views(), 0.2, &cfg(20.0)).unwrap();
    assert!(congested.scene_gtc < sparse.scene_gtc);
    assert!(congested.tau > sparse.tau, "{} vs {}", congested.tau, sparse.tau);
}

#[test]
fn congested_scene_is_mostly_redundant() {
    let tree = grid_tree(8, (0.6, 0.99));
    let mut total = 0;
    let mut low = 0;
    for cam in views() {
        let r = instrumented_render(&tree, &cam, &cfg(3.0)).unwrap();
        let h = redundancy_histogram(r.contributions.iter().map(|c| c.kpc));
        total += h.total();
        low += h.n_low();
    }
    let frac = low as f64 / total as f64;
    assert!(frac > 0.5, "only {frac:.3} of pairs below 0.01");
}

#[test]
fn calibration_is_deterministic() {
    let tree = grid_tree(2, (0.1, 0.9));
    let a = calibrate(&tree, &views(), 0.2, &FilterConfig { tau_r: 20.0, worker_count: 1 }).unwrap();
    let b = calibrate(&tree, &views(), 0.2, &FilterConfig { tau_r: 20.0, worker_count: 8 }).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
