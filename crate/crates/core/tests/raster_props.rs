mod common;

use common::{flat, front_camera, random_root, rng};
use lodsplat::raster::{effective_radius, sort_pairs, tile_ranges, TileGrid, TilePair, FIXED_TAU};
use lodsplat::{render, FilterConfig, FilterKind, RenderSettings, ShrinkMode};
use proptest::prelude::*;

fn settings(shrink: ShrinkMode, workers: usize) -> RenderSettings {
    RenderSettings { filter: FilterKind::Parallel, filter_config: FilterConfig { tau_r: 3.0, worker_count: workers }, shrink, collect_kpc: false }
}

/// Tiles overlapped by `[m − r, m + r]`, counted directly.
fn tiles_touched(grid: &TileGrid, mean: [f64; 2], r: f64) -> usize {
    if !(r > 0.0) {
        return 0;
    }
    let mut n = 0;
    for ty in 0..grid.tiles_y {
        for tx in 0..grid.tiles_x {
            let (x0, y0, x1, y1) = grid.tile_rect(grid.tile_id(tx, ty));
            let (x1, y1) = ((x0 + 16).max(x1), (y0 + 16).max(y1));
            let inside = mean[0] + r >= x0 as f64 && mean[0] - r < x1 as f64 && mean[1] + r >= y0 as f64 && mean[1] - r < y1 as f64;
            let on_image = mean[0] + r >= 0.0 && mean[1] + r >= 0.0 && mean[0] - r < grid.width as f64 && mean[1] - r < grid.height as f64;
            n += usize::from(inside && on_image);
        }
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pair_count_matches_footprints(seed: u64, n in 1usize..40, tau in prop::option::of(0.004f64..0.5)) {
        let mut r = rng(seed);
        let tree = flat((0..n).map(|_| random_root(&mut r, 3.0)).collect());
        let cam = front_camera(&mut r, 70, 50);
        let mode = tau.map_or(ShrinkMode::ThreeSigma, ShrinkMode::Adaptive);
        let out = render(&tree, &cam, &settings(mode, 3)).unwrap();
        let expected: usize = out.projected.iter().map(|p| tiles_touched(&out.grid, p.mean2d, effective_radius(p, mode))).sum();
        prop_assert_eq!(out.stats.n_pairs, expected);
        prop_assert_eq!(out.pairs.len(), expected);
    }

    #[test]
    fn higher_threshold_never_adds_pairs(seed: u64, n in 1usize..40, t0 in 0.002f64..0.3, step in 1.0f64..3.0) {
        let mut r = rng(seed);
        let tree = flat((0..n).map(|_| random_root(&mut r, 3.0)).collect());
        let cam = front_camera(&mut r, 64, 48);
        let three = render(&tree, &cam, &settings(ShrinkMode::ThreeSigma, 1)).unwrap();
        let lo = render(&tree, &cam, &settings(ShrinkMode::Adaptive(t0), 1)).unwrap();
        let hi = render(&tree, &cam, &settings(ShrinkMode::Adaptive((t0 * step).min(0.99)), 1)).unwrap();
        prop_assert!(three.stats.n_pairs >= lo.stats.n_pairs);
        prop_assert!(lo.stats.n_pairs >= hi.stats.n_pairs);
        for p in &three.projected {
            prop_assert!(effective_radius(p, ShrinkMode::Adaptive(t0)) >= effective_radius(p, ShrinkMode::Adaptive(t0 * step)));
        }
    }

    /// Composited colour never exceeds the opacity used up, which is at most 1.
    #[test]
    fn energy_bounded(seed: u64, n in 1usize..60) {
        let mut r = rng(seed);
        let tree = flat((0..n).map(|_| random_root(&mut r, 2.0)).collect());
        let cam = front_camera(&mut r, 48, 40);
        let out = render(&tree, &cam, &settings(ShrinkMode::ThreeSigma, 2)).unwrap();
        prop_assert!(out.image.data.iter().all(|&v| (0.0..=1.0 + 1e-6).contains(&v)));
    }

    #[test]
    fn radix_sort_matches_comparison_sort(keys in prop::collection::vec((0u32..20, 0.0f32..1e4, 0u32..1000), 0..400)) {
        let pairs: Vec<TilePair> = keys.iter().map(|&(tile, depth, gaussian)| TilePair { tile, depth, gaussian }).collect();
        let mut expected = pairs.clone();
        expected.sort_by(|a, b| a.tile.cmp(&b.tile).then(a.depth.total_cmp(&b.depth)).then(a.gaussian.cmp(&b.gaussian)));
        prop_assert_eq!(sort_pairs(&pairs), expected);
    }
}

#[test]
fn output_independent_of_worker_count() {
    let mut r = rng(21);
    let tree = flat((0..300).map(|_| random_root(&mut r, 3.0)).collect());
    let cam = front_camera(&mut r, 130, 70);
    for mode in [ShrinkMode::ThreeSigma, ShrinkMode::Fixed(FIXED_TAU), ShrinkMode::Adaptive(0.05)] {
        let a = render(&tree, &cam, &settings(mode, 1)).unwrap();
        for w in [2, 5, 8] {
            let b = render(&tree, &cam, &settings(mode, w)).unwrap();
            assert_eq!(a.image.to_ppm(), b.image.to_ppm());
            assert_eq!(a.pairs, b.pairs);
        }
    }
}

#[test]
fn tiles_partition_sorted_pairs() {
    let mut r = rng(8);
    let tree = flat((0..100).map(|_| random_root(&mut r, 3.0)).collect());
    let cam = front_camera(&mut r, 80, 64);
    let out = render(&tree, &cam, &settings(ShrinkMode::ThreeSigma, 2)).unwrap();
    let ranges = tile_ranges(&out.pairs, out.grid.n_tiles());
    assert_eq!(ranges.iter().map(|r| r.len()).sum::<usize>(), out.pairs.len());
    for (t, range) in ranges.iter().enumerate() {
        assert!(out.pairs[range.clone()].iter().all(|p| p.tile == t as u32));
        assert!(out.pairs[range.clone()].windows(2).all(|w| w[0].depth <= w[1].depth));
    }
}
