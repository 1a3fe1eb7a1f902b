//! Path-dependent TreeSHAP and an exhaustive Shapley oracle.
//!
//! Both explain the cover value of the leaf reached by `x`. Features outside
//! a coalition are marginalized by descending both children in proportion to
//! their cover weights; zero-weight nodes act as terminals.

use super::cover::{CoverSource, TreeCover};
use crate::error::{Error, Result};
use crate::forest::Tree;

/// Largest feature count accepted by [`brute_force_shap`].
pub const BRUTE_FORCE_MAX_FEATURES: usize = 15;

pub fn tree_shap(tree: &Tree, x: &[f64], cover: CoverSource) -> Result<Vec<f64>> {
    let cover = TreeCover::new(tree, cover)?;
    let mut out = vec![0.0; tree.n_features()];
    ShapBuffer::new(tree).add_shap(tree, &cover, x, &mut out);
    Ok(out)
}

/// Cover-weighted mean of the terminal values: the SHAP base value.
pub fn expected_value(tree: &Tree, cover: &TreeCover) -> f64 {
    fn rec(tree: &Tree, cover: &TreeCover, id: usize) -> f64 {
        match tree.node(id).split {
            Some(s) if cover.weight(id) > 0.0 => {
                let w = cover.weight(id);
                cover.weight(s.left) / w * rec(tree, cover, s.left)
                    + cover.weight(s.right) / w * rec(tree, cover, s.right)
            }
            _ => cover.value(id),
        }
    }
    rec(tree, cover, 0)
}

#[derive(Debug, Clone, Copy, Default)]
struct PathElem {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

/// Scratch space for [`ShapBuffer::add_shap`], sized for one tree depth.
pub struct ShapBuffer {
    path: Vec<PathElem>,
}

impl ShapBuffer {
    pub fn new(tree: &Tree) -> Self {
        ShapBuffer::with_depth(tree.max_depth_reached())
    }

    pub fn with_depth(max_depth: usize) -> Self {
        let d = max_depth + 2;
        ShapBuffer {
            path: vec![PathElem::default(); d * (d + 1) / 2 + d],
        }
    }

    fn ensure(&mut self, tree: &Tree) {
        let d = tree.max_depth_reached() + 2;
        let need = d * (d + 1) / 2 + d;
        if self.path.len() < need {
            self.path.resize(need, PathElem::default());
        }
    }

    /// Add the SHAP values of `x` into `out`.
    pub fn add_shap(&mut self, tree: &Tree, cover: &TreeCover, x: &[f64], out: &mut [f64]) {
        self.ensure(tree);
        recurse(tree, cover, x, out, &mut self.path, 0, 0, 0, 0, 1.0, 1.0, NO_FEATURE);
    }
}

fn extend(path: &mut [PathElem], depth: usize, zero: f64, one: f64, feature: usize) {
    path[depth] = PathElem {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut [PathElem], depth: usize, index: usize) {
    let PathElem { one, zero, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
}

fn unwound_sum(path: &[PathElem], depth: usize, index: usize) -> f64 {
    let PathElem { one, zero, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    cover: &TreeCover,
    x: &[f64],
    out: &mut [f64],
    buf: &mut [PathElem],
    node: usize,
    parent_offset: usize,
    offset: usize,
    depth: usize,
    zero: f64,
    one: f64,
    feature: usize,
) {
    // this call's path occupies buf[offset ..= offset + depth]
    let (head, tail) = buf.split_at_mut(offset);
    let path = &mut tail[..depth + 1];
    path[..depth].copy_from_slice(&head[parent_offset..parent_offset + depth]);
    extend(path, depth, zero, one, feature);

    let split = match tree.node(node).split {
        Some(s) if cover.weight(node) > 0.0 => s,
        _ => {
            let v = cover.value(node);
            for i in 1..=depth {
                let w = unwound_sum(path, depth, i);
                let el = path[i];
                out[el.feature] += w * (el.one - el.zero) * v;
            }
            return;
        }
    };
    let (hot, cold) = if x[split.feature] <= split.threshold {
        (split.left, split.right)
    } else {
        (split.right, split.left)
    };
    let w = cover.weight(node);
    let (mut in_zero, mut in_one) = (1.0, 1.0);
    let mut depth = depth;
    if let Some(k) = (1..=depth).find(|&k| path[k].feature == split.feature) {
        in_zero = path[k].zero;
        in_one = path[k].one;
        unwind(path, depth, k);
        depth -= 1;
    }
    let child_offset = offset + path.len();
    for (child, one) in [(hot, in_one), (cold, 0.0)] {
        let zero = cover.weight(child) / w * in_zero;
        if zero == 0.0 && one == 0.0 {
            continue;
        }
        recurse(
            tree, cover, x, out, buf, child, offset, child_offset, depth + 1, zero, one,
            split.feature,
        );
    }
}

/// Exact Shapley values by enumerating every coalition of the tree's
/// features. Cost grows as `2^p`.
pub fn brute_force_shap(tree: &Tree, x: &[f64], cover: CoverSource) -> Result<Vec<f64>> {
    let cover = TreeCover::new(tree, cover)?;
    brute_force_shap_with_cover(tree, &cover, x)
}

pub fn brute_force_shap_with_cover(tree: &Tree, cover: &TreeCover, x: &[f64]) -> Result<Vec<f64>> {
    let p = tree.n_features();
    if p > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            got: p,
            max: BRUTE_FORCE_MAX_FEATURES,
        });
    }
    let values: Vec<f64> = (0..1u32 << p)
        .map(|mask| coalition_value(tree, cover, x, mask, 0))
        .collect();
    let mut fact = vec![1.0f64; p + 1];
    for i in 1..=p {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; p];
    for (k, phi_k) in phi.iter_mut().enumerate() {
        let bit = 1u32 << k;
        for mask in 0..1u32 << p {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let weight = fact[s] * fact[p - s - 1] / fact[p];
            *phi_k += weight * (values[(mask | bit) as usize] - values[mask as usize]);
        }
    }
    Ok(phi)
}

fn coalition_value(tree: &Tree, cover: &TreeCover, x: &[f64], mask: u32, id: usize) -> f64 {
    match tree.node(id).split {
        Some(s) if cover.weight(id) > 0.0 => {
            if mask & (1 << s.feature) != 0 {
                let next = if x[s.feature] <= s.threshold { s.left } else { s.right };
                coalition_value(tree, cover, x, mask, next)
            } else {
                let w = cover.weight(id);
                cover.weight(s.left) / w * coalition_value(tree, cover, x, mask, s.left)
                    + cover.weight(s.right) / w * coalition_value(tree, cover, x, mask, s.right)
            }
        }
        _ => cover.value(id),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{Node, NodeStats, SplitRecord};

    fn split(feature: usize, threshold: f64, left: usize, right: usize) -> Option<SplitRecord> {
        Some(SplitRecord { feature, threshold, left, right })
    }

    fn node(split: Option<SplitRecord>) -> Node {
        Node { split, stats: NodeStats::empty(2), depth: 0 }
    }

    fn shap(tree: &Tree, cover: &TreeCover, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; tree.n_features()];
        ShapBuffer::new(tree).add_shap(tree, cover, x, &mut out);
        out
    }

    #[test]
    fn depth_one_gives_all_to_split_feature() {
        let tree = Tree::from_parts(vec![node(split(1, 0.5, 1, 2)), node(None), node(None)], vec![], 3, 2).unwrap();
        let cover = TreeCover::from_values(&tree, vec![0.0, 0.8, 0.2], vec![4.0, 1.0, 3.0]).unwrap();
        let base = expected_value(&tree, &cover);
        assert!((base - 0.35).abs() < 1e-15);
        let phi = shap(&tree, &cover, &[0.0, 0.0, 0.0]);
        assert!((phi[1] - (0.8 - base)).abs() < 1e-15);
        assert_eq!((phi[0], phi[2]), (0.0, 0.0));
    }

    #[test]
    fn and_tree_is_symmetric() {
        // y = x0 AND x1, balanced cover
        let tree = Tree::from_parts(
            vec![
                node(split(0, 0.5, 1, 2)),
                node(None),
                node(split(1, 0.5, 3, 4)),
                node(None),
                node(None),
            ],
            vec![],
            2,
            2,
        )
        .unwrap();
        let cover = TreeCover::from_values(&tree, vec![0.25, 0.0, 0.5, 0.0, 1.0], vec![4.0, 2.0, 2.0, 1.0, 1.0]).unwrap();
        let phi = shap(&tree, &cover, &[1.0, 1.0]);
        assert!((phi[0] - phi[1]).abs() < 1e-15);
        assert!((phi[0] + phi[1] - 0.75).abs() < 1e-15);
        let bf = brute_force_shap_with_cover(&tree, &cover, &[1.0, 1.0]).unwrap();
        assert!((bf[0] - phi[0]).abs() < 1e-15);
    }

    #[test]
    fn repeated_feature_takes_everything() {
        let tree = Tree::from_parts(
            vec![
                node(split(0, 0.5, 1, 2)),
                node(split(0, 0.25, 3, 4)),
                node(None),
                node(None),
                node(None),
            ],
            vec![],
            3,
            2,
        )
        .unwrap();
        let cover = TreeCover::from_values(&tree, vec![0.0, 0.0, 0.9, 0.1, 0.6], vec![6.0, 4.0, 2.0, 1.0, 3.0]).unwrap();
        for x in [[0.1, 5.0, 5.0], [0.4, 0.0, 0.0], [0.9, 1.0, 1.0]] {
            let phi = shap(&tree, &cover, &x);
            let bf = brute_force_shap_with_cover(&tree, &cover, &x).unwrap();
            assert_eq!((phi[1], phi[2]), (0.0, 0.0));
            assert_eq!((bf[1], bf[2]), (0.0, 0.0));
            let f = predict(&tree, &cover, &x);
            assert!((phi[0] - (f - expected_value(&tree, &cover))).abs() < 1e-12);
            assert!((bf[0] - phi[0]).abs() < 1e-12);
        }
    }

    fn predict(tree: &Tree, cover: &TreeCover, x: &[f64]) -> f64 {
        super::super::cover::predict_with_cover(tree, cover, x)
    }

    #[test]
    fn single_leaf_is_zero() {
        let tree = Tree::from_parts(vec![node(None)], vec![], 2, 2).unwrap();
        let cover = TreeCover::from_values(&tree, vec![0.3], vec![5.0]).unwrap();
        assert_eq!(shap(&tree, &cover, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(brute_force_shap_with_cover(&tree, &cover, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_weight_subtree_is_terminal() {
        let tree = Tree::from_parts(
            vec![
                node(split(0, 0.5, 1, 2)),
                node(None),
                node(split(1, 0.5, 3, 4)),
                node(None),
                node(None),
            ],
            vec![],
            2,
            2,
        )
        .unwrap();
        let cover = TreeCover::from_values(&tree, vec![0.5, 0.2, 0.8, 0.0, 0.0], vec![4.0, 4.0, 0.0, 0.0, 0.0]).unwrap();
        let x = [1.0, 1.0];
        let phi = shap(&tree, &cover, &x);
        let bf = brute_force_shap_with_cover(&tree, &cover, &x).unwrap();
        assert_eq!(phi[1], 0.0);
        for k in 0..2 {
            assert!((phi[k] - bf[k]).abs() < 1e-12);
        }
        let f = predict(&tree, &cover, &x);
        assert!((phi.iter().sum::<f64>() - (f - expected_value(&tree, &cover))).abs() < 1e-12);
    }

    #[test]
    fn brute_force_rejects_wide_trees() {
        let tree = Tree::from_parts(vec![node(None)], vec![], 16, 2).unwrap();
        let cover = TreeCover::from_values(&tree, vec![0.3], vec![5.0]).unwrap();
        assert!(matches!(
            brute_force_shap_with_cover(&tree, &cover, &[0.0; 16]),
            Err(Error::TooManyFeatures { got: 16, max: 15 })
        ));
    }
}
