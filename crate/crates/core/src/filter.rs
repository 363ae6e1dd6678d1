//! Per-frame LoD selection.
//!
//! A node is selected iff it is in the frustum, it qualifies (`R_2D ≤ τ_R`)
//! or is a leaf, and no internal ancestor qualifies. Three evaluators share
//! that definition:
//!
//! * [`filter_oracle`] evaluates it literally, re-walking every ancestor chain.
//! * [`filter_serial`] descends level by level from the roots with one
//!   synchronization point per level.
//! * [`filter_parallel`] runs two flat data-parallel passes over all nodes
//!   (marks, then ancestor rejection) with exactly two barriers.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pool::{partition, pool};
use crate::projection::{footprint_radius, in_frustum, project, Frustum};
use crate::scene::{Camera, LoDTree, NodeIndex, ROOT};

pub const DEFAULT_TAU_R: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Pixel-radius threshold `τ_R`; a node with `R_2D ≤ τ_R` is fine enough.
    pub tau_r: f64,
    pub worker_count: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            tau_r: DEFAULT_TAU_R,
            worker_count: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Serial,
    Parallel,
    Oracle,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Serial => "serial",
            FilterKind::Parallel => "parallel",
            FilterKind::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "serial" => Ok(FilterKind::Serial),
            "parallel" => Ok(FilterKind::Parallel),
            "oracle" => Ok(FilterKind::Oracle),
            other => Err(format!("unknown filter `{other}` (expected serial|parallel|oracle)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterResult {
    /// Selected node indices, strictly increasing.
    pub selected: Vec<NodeIndex>,
    pub passes: u32,
    pub barriers: u32,
    pub calc_time: Duration,
    pub sync_time: Duration,
}

pub fn run_filter(kind: FilterKind, tree: &LoDTree, cam: &Camera, config: &FilterConfig) -> FilterResult {
    match kind {
        FilterKind::Serial => filter_serial(tree, cam, config),
        FilterKind::Parallel => filter_parallel(tree, cam, config),
        FilterKind::Oracle => filter_oracle(tree, cam, config),
    }
}

/// `Q(n)`: in frustum and `R_2D ≤ τ_R`.
fn qualifies(tree: &LoDTree, index: usize, cam: &Camera, tau_r: f64) -> bool {
    match project(tree.node(index), index as u32, cam) {
        Ok(Some(p)) => p.radius <= tau_r,
        _ => false,
    }
}

/// Literal evaluation of the selection predicate, `O(N·L)` projections.
pub fn filter_oracle(tree: &LoDTree, cam: &Camera, config: &FilterConfig) -> FilterResult {
    let start = Instant::now();
    let tau = config.tau_r;
    let mut selected = Vec::new();
    for (i, node) in tree.nodes().iter().enumerate() {
        if !in_frustum(node, cam) {
            continue;
        }
        if !(node.leaf || qualifies(tree, i, cam, tau)) {
            continue;
        }
        let mut blocked = false;
        let mut a = node.parent;
        while a != ROOT {
            let anc = tree.node(a as usize);
            if !anc.leaf && qualifies(tree, a as usize, cam, tau) {
                blocked = true;
                break;
            }
            a = anc.parent;
        }
        if !blocked {
            selected.push(i as NodeIndex);
        }
    }
    FilterResult {
        selected,
        passes: 1,
        barriers: 0,
        calc_time: start.elapsed(),
        sync_time: Duration::ZERO,
    }
}

const IN_FRUSTUM: u8 = 1;
const CANDIDATE: u8 = 2;
/// Internal node that qualifies; suppresses every descendant.
const BLOCKS: u8 = 4;

#[inline]
fn marks_for(tree: &LoDTree, i: usize, cam: &Camera, frustum: &Frustum, tau_r: f64) -> u8 {
    let node = tree.node(i);
    let p = cam.world_to_camera(&node.mean_f64());
    if !frustum.contains_sphere(&p, node.bounding_radius()) {
        return 0;
    }
    if node.leaf {
        return IN_FRUSTUM | CANDIDATE;
    }
    match footprint_radius(node, cam, &p) {
        Some(r) if r <= tau_r => IN_FRUSTUM | CANDIDATE | BLOCKS,
        _ => IN_FRUSTUM,
    }
}

/// Level-wise descent from the roots. Each level is one pass followed by a
/// synchronization point before the next level's active set is known.
pub fn filter_serial(tree: &LoDTree, cam: &Camera, config: &FilterConfig) -> FilterResult {
    let frustum = Frustum::new(cam);
    let mut result = FilterResult::default();
    if tree.level_count() == 0 {
        result.passes = 1;
        return result;
    }
    let mut active: Vec<NodeIndex> = (tree.level_range(0).start as u32..tree.level_range(0).end as u32).collect();
    let mut next: Vec<NodeIndex> = Vec::new();
    let mut selected = Vec::new();
    while !active.is_empty() {
        let t0 = Instant::now();
        for &i in &active {
            let m = marks_for(tree, i as usize, cam, &frustum, config.tau_r);
            if m & CANDIDATE != 0 {
                selected.push(i);
            } else if m & IN_FRUSTUM != 0 {
                next.extend_from_slice(tree.children(i as usize));
            }
        }
        let t1 = Instant::now();
        std::mem::swap(&mut active, &mut next);
        next.clear();
        result.passes += 1;
        result.barriers += 1;
        result.calc_time += t1 - t0;
        result.sync_time += t1.elapsed();
    }
    if result.passes == 0 {
        // no roots at all
        result.passes = 1;
    }
    let t = Instant::now();
    selected.sort_unstable();
    result.calc_time += t.elapsed();
    result.selected = selected;
    result
}

/// Two-pass, traversal-free filter over all nodes.
pub fn filter_parallel(tree: &LoDTree, cam: &Camera, config: &FilterConfig) -> FilterResult {
    let frustum = Frustum::new(cam);
    let workers = pool(config.worker_count);
    let n = tree.len();
    let ranges = partition(n, config.worker_count.max(1));
    let tau = config.tau_r;
    let mut marks = vec![0u8; n];

    // Pass 1: per-node marks, each node written by exactly one worker.
    let t0 = Instant::now();
    let mut chunks: Vec<&mut [u8]> = Vec::with_capacity(ranges.len());
    let mut rest = marks.as_mut_slice();
    for r in &ranges {
        let (head, tail) = rest.split_at_mut(r.len());
        chunks.push(head);
        rest = tail;
    }
    let busy1: Duration = workers.install(|| {
        chunks
            .into_par_iter()
            .zip(ranges.par_iter())
            .map(|(chunk, r)| {
                let s = Instant::now();
                for (m, i) in chunk.iter_mut().zip(r.clone()) {
                    *m = marks_for(tree, i, cam, &frustum, tau);
                }
                s.elapsed()
            })
            .max()
            .unwrap_or_default()
    });
    let wall1 = t0.elapsed();

    // Pass 2: candidates walk their parent chain looking for a blocker.
    let t1 = Instant::now();
    let marks = &marks;
    let parents = tree.parents();
    let parts: Vec<(Vec<NodeIndex>, Duration)> = workers.install(|| {
        ranges
            .par_iter()
            .map(|r| {
                let s = Instant::now();
                let mut out = Vec::new();
                for i in r.clone() {
                    if marks[i] & CANDIDATE == 0 {
                        continue;
                    }
                    let mut a = parents[i];
                    let mut blocked = false;
                    while a != ROOT {
                        if marks[a as usize] & BLOCKS != 0 {
                            blocked = true;
                            break;
                        }
                        a = parents[a as usize];
                    }
                    if !blocked {
                        out.push(i as NodeIndex);
                    }
                }
                (out, s.elapsed())
            })
            .collect()
    });
    let wall2 = t1.elapsed();
    let busy2 = parts.iter().map(|p| p.1).max().unwrap_or_default();

    let t2 = Instant::now();
    let mut selected = Vec::with_capacity(parts.iter().map(|p| p.0.len()).sum());
    for (part, _) in parts {
        selected.extend(part);
    }
    let compact = t2.elapsed();

    FilterResult {
        selected,
        passes: 2,
        barriers: 2,
        calc_time: busy1 + busy2 + compact,
        sync_time: wall1.saturating_sub(busy1) + wall2.saturating_sub(busy2),
    }
}
