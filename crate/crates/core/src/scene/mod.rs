//! Core scene types: Gaussian nodes, the level-major LoD tree, and the
//! pinhole camera.

mod camera;
mod io;
mod validate;

pub use camera::{Camera, CameraError};
pub use io::{load_scene, read_scene, save_scene, save_scene_json, write_scene, SceneError};
pub use validate::{validate_tree, Rule, Violation};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Index type used for node references inside a tree.
pub type NodeIndex = u32;

/// Parent sentinel for level-0 nodes.
pub const ROOT: NodeIndex = NodeIndex::MAX;

/// One primitive of the LoD hierarchy.
///
/// Covariance is kept factored as `R(q)·diag(s²)·R(q)ᵀ`; rotation is a
/// unit quaternion stored `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianNode {
    pub mean: [f32; 3],
    pub scale: [f32; 3],
    pub rotation: [f32; 4],
    pub opacity: f32,
    pub color: [f32; 3],
    pub level: u32,
    pub parent: NodeIndex,
    pub leaf: bool,
}

impl GaussianNode {
    /// A level-0 node with no parent, flagged as a leaf.
    pub fn root(mean: [f32; 3], scale: [f32; 3], rotation: [f32; 4], opacity: f32, color: [f32; 3]) -> Self {
        Self {
            mean,
            scale,
            rotation,
            opacity,
            color,
            level: 0,
            parent: ROOT,
            leaf: true,
        }
    }

    pub fn is_root(&self) -> bool {
        self.parent == ROOT
    }

    pub fn mean_f64(&self) -> Vector3<f64> {
        Vector3::new(self.mean[0] as f64, self.mean[1] as f64, self.mean[2] as f64)
    }

    pub fn scale_f64(&self) -> Vector3<f64> {
        Vector3::new(self.scale[0] as f64, self.scale[1] as f64, self.scale[2] as f64)
    }

    pub fn max_scale(&self) -> f64 {
        self.scale.iter().fold(f32::MIN, |a, &b| a.max(b)) as f64
    }

    /// Radius of the conservative bounding sphere, `3·max(s)`.
    pub fn bounding_radius(&self) -> f64 {
        3.0 * self.max_scale()
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        rotation_matrix(self.rotation)
    }

    /// World-space covariance `R·diag(s²)·Rᵀ`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.rotation_matrix();
        let s = self.scale_f64();
        let m = r * Matrix3::from_diagonal(&s);
        m * m.transpose()
    }
}

/// Rotation matrix of a `(w, x, y, z)` quaternion, assumed unit length.
pub fn rotation_matrix(q: [f32; 4]) -> Matrix3<f64> {
    let q = Quaternion::new(q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64);
    UnitQuaternion::new_unchecked(q).to_rotation_matrix().into_inner()
}

/// Children of every node as a CSR adjacency, derived from parent links.
#[derive(Debug, Clone, Default, PartialEq)]
struct ChildIndex {
    offsets: Vec<u32>,
    children: Vec<NodeIndex>,
    parents: Vec<NodeIndex>,
}

impl ChildIndex {
    fn build(nodes: &[GaussianNode]) -> Self {
        let n = nodes.len();
        let mut counts = vec![0u32; n + 1];
        for node in nodes {
            if (node.parent as usize) < n {
                counts[node.parent as usize + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut children = vec![0; counts[n] as usize];
        for (i, node) in nodes.iter().enumerate() {
            let p = node.parent as usize;
            if p < n {
                children[cursor[p] as usize] = i as NodeIndex;
                cursor[p] += 1;
            }
        }
        Self {
            offsets: counts,
            children,
            parents: nodes.iter().map(|g| g.parent).collect(),
        }
    }
}

/// Level-major arena of Gaussian nodes.
///
/// Nodes of level `i` occupy `level_offsets[i]..level_offsets[i + 1]`, so
/// `level_offsets` has one more entry than there are levels. The tree is
/// immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LoDTree {
    nodes: Vec<GaussianNode>,
    level_offsets: Vec<u32>,
    shrink_factor: f32,
    child_index: ChildIndex,
}

impl LoDTree {
    /// Assemble a tree from raw parts without validating them; use
    /// [`validate_tree`] to check invariants.
    pub fn from_parts(nodes: Vec<GaussianNode>, level_offsets: Vec<u32>, shrink_factor: f32) -> Self {
        let child_index = ChildIndex::build(&nodes);
        Self {
            nodes,
            level_offsets,
            shrink_factor,
            child_index,
        }
    }

    pub fn nodes(&self) -> &[GaussianNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &GaussianNode {
        &self.nodes[index]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn level_offsets(&self) -> &[u32] {
        &self.level_offsets
    }

    pub fn shrink_factor(&self) -> f32 {
        self.shrink_factor
    }

    /// Number of levels stored (`L + 1` for a tree of depth `L`).
    pub fn level_count(&self) -> usize {
        self.level_offsets.len().saturating_sub(1)
    }

    /// Maximum depth `L`; 0 for a single-level tree.
    pub fn depth(&self) -> usize {
        self.level_count().saturating_sub(1)
    }

    pub fn level_range(&self, level: usize) -> std::ops::Range<usize> {
        self.level_offsets[level] as usize..self.level_offsets[level + 1] as usize
    }

    pub fn children(&self, index: usize) -> &[NodeIndex] {
        let ci = &self.child_index;
        &ci.children[ci.offsets[index] as usize..ci.offsets[index + 1] as usize]
    }

    /// Parent links of all nodes as one contiguous array.
    pub fn parents(&self) -> &[NodeIndex] {
        &self.child_index.parents
    }

    pub fn into_nodes(self) -> Vec<GaussianNode> {
        self.nodes
    }
}
