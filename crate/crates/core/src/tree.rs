//! LoD tree construction by recursive child placement, plus deterministic
//! synthetic root sets for tests and benchmarks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{validate_tree, GaussianNode, LoDTree, NodeIndex, Violation, ROOT};

/// Largest shrink factor for which every child's `3·max(s)` sphere stays
/// inside its parent's. A corner offset has length `|s|/2 ≤ (√3/2)·max(s)`,
/// so nesting needs `γ ≤ 1 − √3/6 ≈ 0.711`; 0.7 leaves slack for f32
/// rounding of child means.
pub const MAX_SHRINK_FACTOR: f32 = 0.7;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("depth must be at least 1")]
    Depth,
    #[error("shrink factor must lie in (0, {MAX_SHRINK_FACTOR}], got {0}")]
    ShrinkFactor(f32),
    #[error("children per node must lie in 1..=8, got {0}")]
    Children(u32),
    #[error("root {index} is invalid: {violations:?}")]
    Root { index: usize, violations: Vec<Violation> },
    #[error("tree would exceed the node index range")]
    Overflow,
    #[error("node index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("invalid synthetic scene spec: {0}")]
    Spec(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeBuildConfig {
    pub depth: u32,
    pub shrink_factor: f32,
    pub children_per_node: u32,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TreeBuildConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            shrink_factor: 0.5,
            children_per_node: 8,
            seed: 0,
        }
    }
}

impl TreeBuildConfig {
    pub fn validate(&self) -> Result<(), BuildError> {
        if self.depth < 1 {
            return Err(BuildError::Depth);
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor <= MAX_SHRINK_FACTOR) {
            return Err(BuildError::ShrinkFactor(self.shrink_factor));
        }
        if !(1..=8).contains(&self.children_per_node) {
            return Err(BuildError::Children(self.children_per_node));
        }
        Ok(())
    }
}

/// Corner `k` of the half-extent box: bit 0, 1, 2 select the sign of the
/// x, y, z component (set = positive).
pub fn corner_offset(scale: [f32; 3], k: usize) -> [f64; 3] {
    let mut o = [0.0; 3];
    for axis in 0..3 {
        let half = scale[axis] as f64 / 2.0;
        o[axis] = if k >> axis & 1 == 1 { half } else { -half };
    }
    o
}

fn child_of(parent: &GaussianNode, parent_index: usize, corner: usize, gamma: f32) -> GaussianNode {
    let o = corner_offset(parent.scale, corner);
    let rotated = parent.rotation_matrix() * nalgebra::Vector3::from(o);
    let mean = parent.mean_f64() + rotated;
    GaussianNode {
        mean: [mean.x as f32, mean.y as f32, mean.z as f32],
        scale: parent.scale.map(|s| gamma * s),
        rotation: parent.rotation,
        opacity: parent.opacity,
        color: parent.color,
        level: parent.level + 1,
        parent: parent_index as NodeIndex,
        leaf: false,
    }
}

/// Grow a full LoD tree of depth `config.depth` below each root.
pub fn build_tree(roots: &[GaussianNode], config: &TreeBuildConfig) -> Result<LoDTree, BuildError> {
    config.validate()?;
    for (index, root) in roots.iter().enumerate() {
        let mut r = *root;
        r.leaf = true;
        let single = LoDTree::from_parts(vec![r], vec![0, 1], config.shrink_factor);
        let violations = validate_tree(&single);
        if !violations.is_empty() {
            return Err(BuildError::Root { index, violations });
        }
    }

    let k = config.children_per_node as usize;
    let mut total: u64 = 0;
    let mut level_size = roots.len() as u64;
    for _ in 0..=config.depth {
        total = total.checked_add(level_size).ok_or(BuildError::Overflow)?;
        level_size = level_size.checked_mul(k as u64).ok_or(BuildError::Overflow)?;
    }
    if total >= ROOT as u64 {
        return Err(BuildError::Overflow);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nodes = Vec::with_capacity(total as usize);
    let mut offsets = vec![0u32];
    nodes.extend(roots.iter().map(|r| GaussianNode {
        level: 0,
        parent: ROOT,
        leaf: false,
        ..*r
    }));
    offsets.push(nodes.len() as u32);

    let mut corners: Vec<usize> = (0..8).collect();
    for _ in 0..config.depth {
        let lo = offsets[offsets.len() - 2] as usize;
        let hi = offsets[offsets.len() - 1] as usize;
        for p in lo..hi {
            if k < 8 {
                corners = sample(&mut rng, 8, k).into_vec();
                corners.sort_unstable();
            }
            let parent = nodes[p];
            for &c in &corners {
                nodes.push(child_of(&parent, p, c, config.shrink_factor));
            }
        }
        offsets.push(nodes.len() as u32);
    }
    let leaf_start = offsets[offsets.len() - 2] as usize;
    for node in &mut nodes[leaf_start..] {
        node.leaf = true;
    }
    Ok(LoDTree::from_parts(nodes, offsets, config.shrink_factor))
}

/// Ancestors of `index` from its direct parent up to its level-0 root.
pub fn ancestor_chain(tree: &LoDTree, index: usize) -> Result<Vec<usize>, BuildError> {
    if index >= tree.len() {
        return Err(BuildError::IndexOutOfRange(index));
    }
    let mut chain = Vec::with_capacity(tree.node(index).level as usize);
    let mut cur = tree.node(index).parent;
    while cur != ROOT {
        chain.push(cur as usize);
        cur = tree.node(cur as usize).parent;
    }
    Ok(chain)
}

/// Parameters of a jittered-grid synthetic root set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    pub nx: u32,
    pub ny: u32,
    pub spacing: f32,
    pub scale_range: (f32, f32),
    pub opacity_range: (f32, f32),
    pub palette: Vec<[f32; 3]>,
    #[serde(default)]
    pub seed: u64,
    /// Roots per grid cell; the extra `congestion - 1` are co-located,
    /// low-opacity overlays.
    #[serde(default = "one")]
    pub congestion: u32,
}

fn one() -> u32 {
    1
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<(), BuildError> {
        if self.nx == 0 || self.ny == 0 {
            return Err(BuildError::Spec("grid dimensions must be positive"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(BuildError::Spec("spacing must be positive"));
        }
        let (s0, s1) = self.scale_range;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return Err(BuildError::Spec("scale_range must satisfy 0 < min <= max"));
        }
        let (a0, a1) = self.opacity_range;
        if !(a0 > 0.0 && a0 <= a1 && a1 <= 1.0) {
            return Err(BuildError::Spec("opacity_range must satisfy 0 < min <= max <= 1"));
        }
        if self.palette.is_empty() || !self.palette.iter().flatten().all(|c| (0.0..=1.0).contains(c)) {
            return Err(BuildError::Spec("palette must be non-empty with channels in [0,1]"));
        }
        if self.congestion == 0 {
            return Err(BuildError::Spec("congestion must be >= 1"));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> f32 {
    let t: f64 = rng.gen();
    (lo as f64 + (hi as f64 - lo as f64) * t) as f32
}

/// Uniformly distributed unit quaternion (Shoemake), `(w, x, y, z)`.
pub fn random_rotation(rng: &mut impl Rng) -> [f32; 4] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let q = [b * (tau * u3).cos(), a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin()];
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| (v / n) as f32)
}

/// Root Gaussians on a jittered `nx × ny` grid in the z = 0 plane, centred
/// on the origin. Bit-identical for identical specs.
pub fn generate_synthetic_scene(spec: &SyntheticSceneSpec) -> Result<Vec<GaussianNode>, BuildError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (s0, s1) = spec.scale_range;
    let (a0, a1) = spec.opacity_range;
    let low_hi = a0 + 0.25 * (a1 - a0);
    let spacing = spec.spacing;
    let cx = 0.5 * (spec.nx - 1) as f32;
    let cy = 0.5 * (spec.ny - 1) as f32;
    let mut roots = Vec::with_capacity((spec.nx * spec.ny * spec.congestion) as usize);
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let jitter = 0.25 * spacing;
            let base = [
                (i as f32 - cx) * spacing + uniform(&mut rng, -jitter, jitter),
                (j as f32 - cy) * spacing + uniform(&mut rng, -jitter, jitter),
                uniform(&mut rng, -0.1 * spacing, 0.1 * spacing),
            ];
            for c in 0..spec.congestion {
                let mean = if c == 0 {
                    base
                } else {
                    let d = 0.1 * spacing;
                    base.map(|v| v + uniform(&mut rng, -d, d))
                };
                let scale = [uniform(&mut rng, s0, s1), uniform(&mut rng, s0, s1), uniform(&mut rng, s0, s1)];
                let rotation = random_rotation(&mut rng);
                let opacity = if c == 0 {
                    uniform(&mut rng, a0, a1)
                } else {
                    uniform(&mut rng, a0, low_hi)
                };
                let color = spec.palette[rng.gen_range(0..spec.palette.len())];
                roots.push(GaussianNode::root(mean, scale, rotation, opacity.clamp(a0, a1), color));
            }
        }
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_root(mean: [f32; 3], scale: [f32; 3], rotation: [f32; 4]) -> GaussianNode {
        GaussianNode::root(mean, scale, rotation, 0.6, [0.3, 0.5, 0.7])
    }

    fn spec(nx: u32, ny: u32, congestion: u32, seed: u64) -> SyntheticSceneSpec {
        SyntheticSceneSpec {
            nx,
            ny,
            spacing: 1.0,
            scale_range: (0.1, 0.3),
            opacity_range: (0.2, 0.9),
            palette: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.2, 0.2, 0.9]],
            seed,
            congestion,
        }
    }

    #[test]
    fn child_placement_identity_rotation() {
        let root = unit_root([0.0; 3], [2.0; 3], [1.0, 0.0, 0.0, 0.0]);
        let cfg = TreeBuildConfig { depth: 1, shrink_factor: 0.5, children_per_node: 8, seed: 0 };
        let t = build_tree(&[root], &cfg).unwrap();
        // corner 7 = (+,+,+)
        let c = t.node(1 + 7);
        assert_eq!(c.mean, [1.0, 1.0, 1.0]);
        assert_eq!(c.scale, [1.0, 1.0, 1.0]);
        assert_eq!(c.rotation, root.rotation);
        assert_eq!(c.color, root.color);
        assert_eq!(c.opacity, root.opacity);
        assert_eq!(c.parent, 0);
    }

    #[test]
    fn rotated_basis_offset() {
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let q = [h, 0.0, 0.0, h]; // 90 degrees about z
        let root = unit_root([0.0; 3], [2.0; 3], q);
        let r = root.rotation_matrix() * nalgebra::Vector3::new(1.0, 0.0, 0.0);
        assert!((r - nalgebra::Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-6);
        // corner 1 = (+x, -y, -z) maps to (+y, +x, -z) under the rotation.
        let cfg = TreeBuildConfig { depth: 1, ..Default::default() };
        let t = build_tree(&[root], &cfg).unwrap();
        let m = t.node(1 + 1).mean_f64();
        assert!((m - nalgebra::Vector3::new(1.0, 1.0, -1.0)).norm() < 1e-6);
    }

    #[test]
    fn node_count_585() {
        let root = unit_root([0.0; 3], [1.0; 3], [1.0, 0.0, 0.0, 0.0]);
        let cfg = TreeBuildConfig { depth: 3, ..Default::default() };
        let t = build_tree(&[root], &cfg).unwrap();
        // 1 + 8 + 64 + 512 by recursion
        let expected: usize = (0..=3).map(|l| 8usize.pow(l)).sum();
        assert_eq!(expected, 585);
        assert_eq!(t.len(), 585);
        assert_eq!(t.level_offsets(), &[0, 1, 9, 73, 585]);
        assert!(validate_tree(&t).is_empty());
        assert!(t.nodes()[73..].iter().all(|n| n.leaf));
        assert!(t.nodes()[..73].iter().all(|n| !n.leaf));
    }

    #[test]
    fn subset_children_are_seeded() {
        let root = unit_root([0.0; 3], [1.0; 3], [1.0, 0.0, 0.0, 0.0]);
        let cfg = TreeBuildConfig { depth: 2, shrink_factor: 0.5, children_per_node: 3, seed: 42 };
        let a = build_tree(&[root], &cfg).unwrap();
        let b = build_tree(&[root], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1 + 3 + 9);
        assert!(validate_tree(&a).is_empty());
        let c = build_tree(&[root], &TreeBuildConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.nodes(), c.nodes());
    }

    #[test]
    fn config_errors() {
        let root = unit_root([0.0; 3], [1.0; 3], [1.0, 0.0, 0.0, 0.0]);
        let bad = |cfg: TreeBuildConfig| build_tree(&[root], &cfg).unwrap_err();
        assert!(matches!(bad(TreeBuildConfig { depth: 0, ..Default::default() }), BuildError::Depth));
        assert!(matches!(
            bad(TreeBuildConfig { shrink_factor: 0.8, ..Default::default() }),
            BuildError::ShrinkFactor(_)
        ));
        assert!(matches!(
            bad(TreeBuildConfig { children_per_node: 9, ..Default::default() }),
            BuildError::Children(9)
        ));
        let deep = TreeBuildConfig { depth: 11, ..Default::default() };
        assert!(matches!(bad(deep), BuildError::Overflow));
        let mut broken = root;
        broken.scale[2] = -1.0;
        assert!(matches!(
            build_tree(&[broken], &TreeBuildConfig::default()),
            Err(BuildError::Root { index: 0, .. })
        ));
    }

    #[test]
    fn ancestor_chains() {
        let root = unit_root([0.0; 3], [1.0; 3], [1.0, 0.0, 0.0, 0.0]);
        let t = build_tree(&[root], &TreeBuildConfig { depth: 3, ..Default::default() }).unwrap();
        assert!(ancestor_chain(&t, 0).unwrap().is_empty());
        for i in [73usize, 100, 584] {
            let chain = ancestor_chain(&t, i).unwrap();
            assert_eq!(chain.len(), 3);
            assert_eq!(*chain.last().unwrap(), 0);
            // independent walk
            let mut walk = vec![];
            let mut cur = i;
            while t.node(cur).level > 0 {
                cur = t.node(cur).parent as usize;
                walk.push(cur);
            }
            assert_eq!(chain, walk);
            for (k, &a) in chain.iter().enumerate() {
                assert_eq!(t.node(a).level as usize, 3 - 1 - k);
            }
        }
        assert!(matches!(ancestor_chain(&t, 585), Err(BuildError::IndexOutOfRange(585))));
    }

    #[test]
    fn synthetic_counts_and_determinism() {
        assert_eq!(generate_synthetic_scene(&spec(1, 1, 1, 0)).unwrap().len(), 1);
        let a = generate_synthetic_scene(&spec(4, 3, 2, 9)).unwrap();
        let b = generate_synthetic_scene(&spec(4, 3, 2, 9)).unwrap();
        let bits = |v: &[GaussianNode]| {
            v.iter()
                .flat_map(|g| g.mean.iter().chain(&g.scale).chain(&g.rotation).chain(&g.color).chain([&g.opacity]).map(|f| f.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));

        let s = spec(16, 16, 4, 7);
        let roots = generate_synthetic_scene(&s).unwrap();
        assert_eq!(roots.len(), 1024);
        let (lo, hi) = s.opacity_range;
        assert!(roots.iter().all(|g| g.opacity >= lo && g.opacity <= hi));
        // overlays fall in the low quarter of the range
        let low_hi = lo + 0.25 * (hi - lo);
        let overlays = roots.iter().enumerate().filter(|(i, _)| i % 4 != 0);
        assert!(overlays.into_iter().all(|(_, g)| g.opacity <= low_hi));
        let tree = build_tree(&roots, &TreeBuildConfig { depth: 1, ..Default::default() }).unwrap();
        assert!(validate_tree(&tree).is_empty());
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(2, 2, 1, 0);
        s.opacity_range = (0.5, 1.5);
        assert!(generate_synthetic_scene(&s).is_err());
        let mut s = spec(2, 2, 1, 0);
        s.congestion = 0;
        assert!(generate_synthetic_scene(&s).is_err());
        let mut s = spec(2, 2, 1, 0);
        s.palette.clear();
        assert!(generate_synthetic_scene(&s).is_err());
    }
}
