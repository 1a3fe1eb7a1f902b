use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::Tree;

/// Which rows supply node proportions and marginalization weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverSource {
    Inbag,
    Oob,
}

impl CoverSource {
    pub fn name(self) -> &'static str {
        match self {
            CoverSource::Inbag => "inbag",
            CoverSource::Oob => "oob",
        }
    }
}

/// Per-node class-1 value and cover weight of one tree.
///
/// A node with zero weight takes its parent's value and is treated as a
/// terminal node by the Shapley computations.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeCover {
    value: Vec<f64>,
    weight: Vec<f64>,
}

impl TreeCover {
    pub fn new(tree: &Tree, source: CoverSource) -> Result<TreeCover> {
        let (value, weight): (Vec<f64>, Vec<f64>) = tree
            .nodes()
            .iter()
            .map(|n| {
                let st = &n.stats;
                let (c1, total) = match source {
                    CoverSource::Inbag => (st.class_counts_in.get(1), st.n_in),
                    CoverSource::Oob => (st.class_counts_oob.get(1), st.n_oob),
                };
                let c1 = c1.copied().unwrap_or(0);
                if total == 0 {
                    (f64::NAN, 0.0)
                } else {
                    (c1 as f64 / total as f64, total as f64)
                }
            })
            .unzip();
        TreeCover::from_values(tree, value, weight)
    }

    /// Cover from explicit node values and weights. Values of zero-weight
    /// nodes are ignored and inherited from the parent.
    pub fn from_values(tree: &Tree, mut value: Vec<f64>, weight: Vec<f64>) -> Result<TreeCover> {
        let m = tree.nodes().len();
        if value.len() != m || weight.len() != m {
            return Err(Error::InvalidParameter(format!(
                "cover needs {m} values and weights"
            )));
        }
        if weight.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("cover weights must be finite and >= 0".into()));
        }
        if weight[0] == 0.0 {
            return Err(Error::EmptyCover { tree: 0 });
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if let Some(s) = tree.node(id).split {
                for child in [s.left, s.right] {
                    if weight[child] == 0.0 {
                        value[child] = value[id];
                    }
                    stack.push(child);
                }
            }
        }
        Ok(TreeCover { value, weight })
    }

    pub fn value(&self, node: usize) -> f64 {
        self.value[node]
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.weight[node]
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn root_value(&self) -> f64 {
        self.value[0]
    }
}

/// Tree output under `cover`: the value of the leaf reached by `x`.
pub fn predict_with_cover(tree: &Tree, cover: &TreeCover, x: &[f64]) -> f64 {
    cover.value(tree.leaf(x))
}

/// Covers for every tree of a forest, with the tree index in errors.
pub fn forest_covers(trees: &[Tree], source: CoverSource) -> Result<Vec<TreeCover>> {
    trees
        .iter()
        .enumerate()
        .map(|(t, tree)| {
            TreeCover::new(tree, source).map_err(|e| match e {
                Error::EmptyCover { .. } => Error::EmptyCover { tree: t },
                other => other,
            })
        })
        .collect()
}
