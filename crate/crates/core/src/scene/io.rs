//! Binary (`LDGS`) and JSON scene serialization.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! "LDGS" | u32 version | u32 node count N | u32 level count | f32 gamma
//! f32 means[3N] | f32 scales[3N] | f32 quaternions[4N] (w,x,y,z)
//! f32 opacity[N] | f32 color[3N] | u32 parents[N] | u8 leaf[N]
//! u32 level_offsets[level count + 1]
//! ```
//!
//! Node levels are not stored; they are recovered from `level_offsets`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate_tree, GaussianNode, LoDTree, Violation, ROOT};

pub const MAGIC: &[u8; 4] = b"LDGS";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported scene version {0}")]
    BadVersion(u32),
    #[error("truncated scene file: {0}")]
    Truncated(&'static str),
    #[error("trailing bytes after scene data")]
    TrailingBytes,
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("array `{0}` has the wrong length")]
    Shape(&'static str),
    #[error("invalid tree: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

fn check(tree: &LoDTree) -> Result<(), SceneError> {
    let violations = validate_tree(tree);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(SceneError::Invalid(violations))
    }
}

/// Encode a valid tree in the binary format.
pub fn write_scene(tree: &LoDTree) -> Result<Vec<u8>, SceneError> {
    check(tree)?;
    let nodes = tree.nodes();
    let n = nodes.len();
    let offsets = tree.level_offsets();
    let mut buf = Vec::with_capacity(20 + n * (14 * 4 + 4 + 1) + offsets.len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(tree.level_count() as u32).to_le_bytes());
    buf.extend_from_slice(&tree.shrink_factor().to_le_bytes());

    let put_f32 = |buf: &mut Vec<u8>, get: &dyn Fn(&GaussianNode) -> &[f32]| {
        for node in nodes {
            for v in get(node) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    };
    put_f32(&mut buf, &|g| &g.mean);
    put_f32(&mut buf, &|g| &g.scale);
    put_f32(&mut buf, &|g| &g.rotation);
    put_f32(&mut buf, &|g| std::slice::from_ref(&g.opacity));
    put_f32(&mut buf, &|g| &g.color);
    for node in nodes {
        buf.extend_from_slice(&node.parent.to_le_bytes());
    }
    buf.extend(nodes.iter().map(|g| g.leaf as u8));
    for off in offsets {
        buf.extend_from_slice(&off.to_le_bytes());
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8], SceneError> {
        let end = self.pos.checked_add(len).ok_or(SceneError::Truncated(what))?;
        let out = self.bytes.get(self.pos..end).ok_or(SceneError::Truncated(what))?;
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, SceneError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, count: usize, what: &'static str) -> Result<Vec<f32>, SceneError> {
        let raw = self.take(count.checked_mul(4).ok_or(SceneError::Truncated(what))?, what)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn u32s(&mut self, count: usize, what: &'static str) -> Result<Vec<u32>, SceneError> {
        let raw = self.take(count.checked_mul(4).ok_or(SceneError::Truncated(what))?, what)?;
        Ok(raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Assign each node the level whose offset range contains it. Nodes outside
/// every range (malformed offsets) get `u32::MAX` and fail validation.
fn assign_levels(nodes: &mut [GaussianNode], offsets: &[u32]) {
    for node in nodes.iter_mut() {
        node.level = u32::MAX;
    }
    for (level, w) in offsets.windows(2).enumerate() {
        let (lo, hi) = (w[0] as usize, (w[1] as usize).min(nodes.len()));
        for node in nodes.get_mut(lo..hi.max(lo)).unwrap_or(&mut []) {
            node.level = level as u32;
        }
    }
}

fn decode_binary(bytes: &[u8]) -> Result<LoDTree, SceneError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic").map_err(|_| SceneError::BadMagic)? != MAGIC {
        return Err(SceneError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(SceneError::BadVersion(version));
    }
    let n = r.u32("node count")? as usize;
    let levels = r.u32("level count")? as usize;
    let gamma = f32::from_le_bytes(r.take(4, "gamma")?.try_into().unwrap());
    // Reject absurd counts before allocating.
    let min_body = n.saturating_mul(14 * 4 + 5).saturating_add(levels.saturating_add(1).saturating_mul(4));
    if bytes.len().saturating_sub(r.pos) < min_body {
        return Err(SceneError::Truncated("node arrays"));
    }
    let means = r.f32s(3 * n, "means")?;
    let scales = r.f32s(3 * n, "scales")?;
    let quats = r.f32s(4 * n, "quaternions")?;
    let opacity = r.f32s(n, "opacity")?;
    let color = r.f32s(3 * n, "color")?;
    let parents = r.u32s(n, "parents")?;
    let leaf = r.take(n, "leaf flags")?.to_vec();
    let offsets = r.u32s(levels + 1, "level offsets")?;
    if r.pos != bytes.len() {
        return Err(SceneError::TrailingBytes);
    }

    let mut nodes: Vec<GaussianNode> = (0..n)
        .map(|i| GaussianNode {
            mean: means[3 * i..3 * i + 3].try_into().unwrap(),
            scale: scales[3 * i..3 * i + 3].try_into().unwrap(),
            rotation: quats[4 * i..4 * i + 4].try_into().unwrap(),
            opacity: opacity[i],
            color: color[3 * i..3 * i + 3].try_into().unwrap(),
            level: 0,
            parent: parents[i],
            leaf: leaf[i] != 0,
        })
        .collect();
    assign_levels(&mut nodes, &offsets);
    let tree = LoDTree::from_parts(nodes, offsets, gamma);
    check(&tree)?;
    Ok(tree)
}

/// Structured-text form with the same field names as the binary arrays.
/// `parents` uses `null` for roots.
#[derive(Debug, Serialize, Deserialize)]
struct SceneJson {
    version: u32,
    gamma: f32,
    means: Vec<[f32; 3]>,
    scales: Vec<[f32; 3]>,
    quaternions: Vec<[f32; 4]>,
    opacity: Vec<f32>,
    color: Vec<[f32; 3]>,
    parents: Vec<Option<u32>>,
    leaf: Vec<bool>,
    level_offsets: Vec<u32>,
}

fn decode_json(bytes: &[u8]) -> Result<LoDTree, SceneError> {
    let doc: SceneJson = serde_json::from_slice(bytes)?;
    if doc.version != VERSION {
        return Err(SceneError::BadVersion(doc.version));
    }
    let n = doc.means.len();
    for (name, len) in [
        ("scales", doc.scales.len()),
        ("quaternions", doc.quaternions.len()),
        ("opacity", doc.opacity.len()),
        ("color", doc.color.len()),
        ("parents", doc.parents.len()),
        ("leaf", doc.leaf.len()),
    ] {
        if len != n {
            return Err(SceneError::Shape(name));
        }
    }
    let mut nodes: Vec<GaussianNode> = (0..n)
        .map(|i| GaussianNode {
            mean: doc.means[i],
            scale: doc.scales[i],
            rotation: doc.quaternions[i],
            opacity: doc.opacity[i],
            color: doc.color[i],
            level: 0,
            parent: doc.parents[i].unwrap_or(ROOT),
            leaf: doc.leaf[i],
        })
        .collect();
    assign_levels(&mut nodes, &doc.level_offsets);
    let tree = LoDTree::from_parts(nodes, doc.level_offsets, doc.gamma);
    check(&tree)?;
    Ok(tree)
}

/// Decode a scene from bytes, accepting either the binary or JSON form.
pub fn read_scene(bytes: &[u8]) -> Result<LoDTree, SceneError> {
    if bytes.starts_with(MAGIC) {
        return decode_binary(bytes);
    }
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'{') => decode_json(bytes),
        _ => Err(SceneError::BadMagic),
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<LoDTree, SceneError> {
    read_scene(&fs::read(path)?)
}

pub fn save_scene(tree: &LoDTree, path: impl AsRef<Path>) -> Result<(), SceneError> {
    fs::write(path, write_scene(tree)?)?;
    Ok(())
}

/// Write the JSON form, mainly for hand-editable fixtures.
pub fn save_scene_json(tree: &LoDTree, path: impl AsRef<Path>) -> Result<(), SceneError> {
    check(tree)?;
    let nodes = tree.nodes();
    let doc = SceneJson {
        version: VERSION,
        gamma: tree.shrink_factor(),
        means: nodes.iter().map(|g| g.mean).collect(),
        scales: nodes.iter().map(|g| g.scale).collect(),
        quaternions: nodes.iter().map(|g| g.rotation).collect(),
        opacity: nodes.iter().map(|g| g.opacity).collect(),
        color: nodes.iter().map(|g| g.color).collect(),
        parents: nodes.iter().map(|g| (g.parent != ROOT).then_some(g.parent)).collect(),
        leaf: nodes.iter().map(|g| g.leaf).collect(),
        level_offsets: tree.level_offsets().to_vec(),
    };
    fs::write(path, serde_json::to_vec_pretty(&doc)?)?;
    Ok(())
}
