use std::fmt;

use super::{LoDTree, ROOT};

/// A tree invariant that a node (or the tree as a whole) can break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    FiniteFields,
    QuaternionNorm,
    ScalePositive,
    OpacityRange,
    ColorRange,
    LevelOffsets,
    LevelMatchesRange,
    RootParent,
    ParentRange,
    ParentLevel,
    LeafFlag,
    ShrinkFactor,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::FiniteFields => "fields finite",
            Rule::QuaternionNorm => "quaternion norm == 1",
            Rule::ScalePositive => "scale > 0",
            Rule::OpacityRange => "opacity in (0,1]",
            Rule::ColorRange => "color in [0,1]",
            Rule::LevelOffsets => "level offsets monotone and cover nodes",
            Rule::LevelMatchesRange => "level matches level range",
            Rule::RootParent => "parent is ROOT iff level 0",
            Rule::ParentRange => "parent in preceding level range",
            Rule::ParentLevel => "parent level == level - 1",
            Rule::LeafFlag => "leaf iff childless",
            Rule::ShrinkFactor => "shrink factor in (0,1)",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Offending node, or `None` for tree-level rules.
    pub node: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(i) => write!(f, "node {i}: {}", self.rule),
            None => write!(f, "tree: {}", self.rule),
        }
    }
}

/// Check every node and tree invariant; an empty list means the tree is
/// well formed.
pub fn validate_tree(tree: &LoDTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let nodes = tree.nodes();
    let n = nodes.len();
    let offsets = tree.level_offsets();

    let gamma = tree.shrink_factor();
    if !(gamma > 0.0 && gamma < 1.0) {
        out.push(Violation { node: None, rule: Rule::ShrinkFactor });
    }

    let offsets_ok = offsets.len() >= 2
        && offsets[0] == 0
        && *offsets.last().unwrap() as usize == n
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if !offsets_ok {
        out.push(Violation { node: None, rule: Rule::LevelOffsets });
    }

    let mut has_child = vec![false; n];
    for node in nodes {
        if (node.parent as usize) < n {
            has_child[node.parent as usize] = true;
        }
    }

    for (i, node) in nodes.iter().enumerate() {
        let mut push = |rule| out.push(Violation { node: Some(i), rule });

        let finite = node.mean.iter().chain(&node.scale).chain(&node.rotation).chain(&node.color).all(|v| v.is_finite())
            && node.opacity.is_finite();
        if !finite {
            push(Rule::FiniteFields);
        }
        let norm = node.rotation.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= 1e-6) {
            push(Rule::QuaternionNorm);
        }
        if !node.scale.iter().all(|&s| s > 0.0) {
            push(Rule::ScalePositive);
        }
        if !(node.opacity > 0.0 && node.opacity <= 1.0) {
            push(Rule::OpacityRange);
        }
        if !node.color.iter().all(|&c| (0.0..=1.0).contains(&c)) {
            push(Rule::ColorRange);
        }

        let level = node.level as usize;
        if offsets_ok {
            let in_range = level + 1 < offsets.len() && (offsets[level] as usize..offsets[level + 1] as usize).contains(&i);
            if !in_range {
                push(Rule::LevelMatchesRange);
            }
        }

        if (node.parent == ROOT) != (level == 0) {
            push(Rule::RootParent);
        } else if node.parent != ROOT {
            let p = node.parent as usize;
            if p >= n {
                push(Rule::ParentRange);
            } else {
                if nodes[p].level as usize + 1 != level {
                    push(Rule::ParentLevel);
                } else if offsets_ok && level >= 1 && level < offsets.len() {
                    let prev = offsets[level - 1] as usize..offsets[level] as usize;
                    if !prev.contains(&p) {
                        push(Rule::ParentRange);
                    }
                }
            }
        }

        if node.leaf == has_child[i] {
            push(Rule::LeafFlag);
        }
    }
    out
}
