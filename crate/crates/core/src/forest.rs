//! Classification forests that remember which rows were inbag.
//!
//! Trees are grown on the inbag sample only. Once a tree is grown, every row
//! of the training data is routed down it: inbag rows (with their bootstrap
//! multiplicity) fill `class_counts_in`, out-of-bag rows fill
//! `class_counts_oob`. OOB rows never influence the structure.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::split::best_split;

/// Version written to and required from forest JSON documents.
pub const FOREST_SCHEMA_VERSION: u32 = 1;

/// Independent RNG stream `stream` under master seed `seed`.
pub fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    /// `n` draws with replacement.
    Bootstrap,
    /// `round(fraction * n)` rows without replacement.
    Subsample { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features sampled (without replacement) at every split.
    pub mtry: usize,
    /// Minimum inbag weight in each child.
    pub min_leaf: u64,
    pub max_depth: Option<usize>,
    pub seed: u64,
    pub sampling: Sampling,
}

impl ForestParams {
    /// Deep trees on bootstrap samples: `min_leaf = 1`, no depth cap.
    pub fn new(n_trees: usize, mtry: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            mtry,
            min_leaf: 1,
            max_depth: None,
            seed,
            sampling: Sampling::Bootstrap,
        }
    }

    pub fn with_min_leaf(mut self, min_leaf: u64) -> Self {
        self.min_leaf = min_leaf;
        self
    }

    pub fn with_max_depth(mut self, max_depth: Option<usize>) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
        }
        if self.mtry == 0 || self.mtry > p {
            return Err(Error::InvalidParameter(format!(
                "mtry must be in 1..={p}, got {}",
                self.mtry
            )));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidParameter("min_leaf must be at least 1".into()));
        }
        if let Sampling::Subsample { fraction } = self.sampling {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "subsample fraction must be in (0, 1], got {fraction}"
                )));
            }
        }
        Ok(())
    }
}

/// Inbag and out-of-bag class counts of one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStats {
    /// Inbag weight, counting bootstrap multiplicity.
    pub n_in: u64,
    pub n_oob: u64,
    pub class_counts_in: Vec<u64>,
    pub class_counts_oob: Vec<u64>,
}

impl NodeStats {
    pub fn empty(n_classes: usize) -> Self {
        NodeStats {
            n_in: 0,
            n_oob: 0,
            class_counts_in: vec![0; n_classes],
            class_counts_oob: vec![0; n_classes],
        }
    }

    /// Inbag class proportions.
    pub fn mu_in(&self) -> Vec<f64> {
        proportions(&self.class_counts_in, self.n_in)
    }

    /// OOB class proportions, `None` when no OOB row reaches the node.
    pub fn mu_oob(&self) -> Option<Vec<f64>> {
        (self.n_oob > 0).then(|| proportions(&self.class_counts_oob, self.n_oob))
    }

    pub fn p_in(&self, class: usize) -> f64 {
        self.class_counts_in[class] as f64 / self.n_in as f64
    }

    pub fn p_oob(&self, class: usize) -> Option<f64> {
        (self.n_oob > 0).then(|| self.class_counts_oob[class] as f64 / self.n_oob as f64)
    }
}

fn proportions(counts: &[u64], total: u64) -> Vec<f64> {
    let t = total as f64;
    counts.iter().map(|&c| c as f64 / t).collect()
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub split: Option<SplitRecord>,
    pub stats: NodeStats,
    pub depth: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// One fitted tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    inbag_multiplicity: Vec<u32>,
    oob_indices: Vec<usize>,
    max_depth_reached: usize,
    n_features: usize,
    n_classes: usize,
}

impl Tree {
    /// Assemble a tree from explicit nodes, checking the structural
    /// invariants. Depths are recomputed from the links.
    pub fn from_parts(
        mut nodes: Vec<Node>,
        inbag_multiplicity: Vec<u32>,
        n_features: usize,
        n_classes: usize,
    ) -> Result<Tree> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        let mut max_depth = 0;
        while let Some((id, depth)) = stack.pop() {
            if seen[id] {
                return Err(Error::InvalidParameter(format!("node {id} reachable twice")));
            }
            seen[id] = true;
            nodes[id].depth = depth;
            max_depth = max_depth.max(depth);
            let node = &nodes[id];
            if node.stats.class_counts_in.len() != n_classes
                || node.stats.class_counts_oob.len() != n_classes
            {
                return Err(Error::InvalidParameter(format!(
                    "node {id} class-count length mismatch"
                )));
            }
            if let Some(s) = node.split {
                if s.feature >= n_features || s.left >= nodes.len() || s.right >= nodes.len() {
                    return Err(Error::InvalidParameter(format!("node {id} has a bad split")));
                }
                stack.push((s.right, depth + 1));
                stack.push((s.left, depth + 1));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("unreachable nodes".into()));
        }
        let oob_indices = inbag_multiplicity
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == 0)
            .map(|(i, _)| i)
            .collect();
        Ok(Tree {
            nodes,
            inbag_multiplicity,
            oob_indices,
            max_depth_reached: max_depth,
            n_features,
            n_classes,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn inbag_multiplicity(&self) -> &[u32] {
        &self.inbag_multiplicity
    }

    pub fn oob_indices(&self) -> &[usize] {
        &self.oob_indices
    }

    pub fn is_oob(&self, row: usize) -> bool {
        self.inbag_multiplicity[row] == 0
    }

    /// `|D^(T)|`: inbag size counting multiplicity.
    pub fn inbag_size(&self) -> u64 {
        self.inbag_multiplicity.iter().map(|&m| m as u64).sum()
    }

    pub fn max_depth_reached(&self) -> usize {
        self.max_depth_reached
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn leaf(&self, x: &[f64]) -> usize {
        let mut id = 0;
        while let Some(s) = self.nodes[id].split {
            id = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        id
    }

    /// Node ids from the root to the leaf reached by `x`.
    pub fn path(&self, x: &[f64]) -> Vec<usize> {
        let mut out = vec![0];
        let mut id = 0;
        while let Some(s) = self.nodes[id].split {
            id = if x[s.feature] <= s.threshold { s.left } else { s.right };
            out.push(id);
        }
        out
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.nodes[self.leaf(x)].stats.mu_in()
    }

    /// Most probable class; ties go to the lowest class index.
    pub fn predict_class(&self, x: &[f64]) -> usize {
        let counts = &self.nodes[self.leaf(x)].stats.class_counts_in;
        argmax(counts)
    }

    /// Whether any internal node splits on `feature`.
    pub fn uses_feature(&self, feature: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| n.split.is_some_and(|s| s.feature == feature))
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Recompute every node's inbag and OOB counts by routing the rows of
    /// `data` according to this tree's inbag multiplicities.
    pub fn route_stats(&mut self, data: &Dataset) {
        for node in &mut self.nodes {
            node.stats = NodeStats::empty(self.n_classes);
        }
        let labels = data.labels();
        for i in 0..data.n() {
            let x = data.row(i);
            let m = self.inbag_multiplicity[i] as u64;
            let y = labels[i];
            let mut id = 0;
            loop {
                let st = &mut self.nodes[id].stats;
                if m > 0 {
                    st.n_in += m;
                    st.class_counts_in[y] += m;
                } else {
                    st.n_oob += 1;
                    st.class_counts_oob[y] += 1;
                }
                match self.nodes[id].split {
                    Some(s) => id = if x[s.feature] <= s.threshold { s.left } else { s.right },
                    None => break,
                }
            }
        }
    }
}

fn argmax(counts: &[u64]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// `n` draws with replacement; returns how often each row was drawn.
pub fn bootstrap_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u32> {
    let mut mult = vec![0u32; n];
    for _ in 0..n {
        mult[rng.gen_range(0..n)] += 1;
    }
    mult
}

fn subsample<R: Rng + ?Sized>(n: usize, fraction: f64, rng: &mut R) -> Vec<u32> {
    let k = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut mult = vec![0u32; n];
    for i in index::sample(rng, n, k) {
        mult[i] = 1;
    }
    mult
}

struct Grower<'a, R> {
    data: &'a Dataset,
    params: &'a ForestParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
    max_depth: usize,
}

impl<R: Rng> Grower<'_, R> {
    fn grow(&mut self, samples: Vec<(usize, u32)>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            split: None,
            stats: NodeStats::empty(self.data.n_classes()),
            depth,
        });
        self.max_depth = self.max_depth.max(depth);

        let weight: u64 = samples.iter().map(|&(_, m)| m as u64).sum();
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || weight < 2 * self.params.min_leaf {
            return id;
        }
        // kept in draw order: the first drawn feature wins a tie
        let features = index::sample(self.rng, self.data.p(), self.params.mtry).into_vec();
        let Some(split) = best_split(self.data, &samples, &features, self.params.min_leaf) else {
            return id;
        };
        let (left, right): (Vec<_>, Vec<_>) = samples
            .into_iter()
            .partition(|&(i, _)| self.data.value(i, split.feature) <= split.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id].split = Some(SplitRecord {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        });
        id
    }
}

/// Grow one tree on a fresh bootstrap (or subsample) of `data`.
pub fn fit_tree<R: Rng>(data: &Dataset, params: &ForestParams, rng: &mut R) -> Result<Tree> {
    params.validate(data.p())?;
    let multiplicity = match params.sampling {
        Sampling::Bootstrap => bootstrap_sample(data.n(), rng),
        Sampling::Subsample { fraction } => subsample(data.n(), fraction, rng),
    };
    fit_tree_on(data, params, multiplicity, rng)
}

/// Grow one tree on a given inbag multiplicity vector.
pub fn fit_tree_on<R: Rng>(
    data: &Dataset,
    params: &ForestParams,
    multiplicity: Vec<u32>,
    rng: &mut R,
) -> Result<Tree> {
    params.validate(data.p())?;
    if multiplicity.len() != data.n() {
        return Err(Error::InvalidParameter(format!(
            "multiplicity has {} entries for {} rows",
            multiplicity.len(),
            data.n()
        )));
    }
    let samples: Vec<(usize, u32)> = multiplicity
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(i, &m)| (i, m))
        .collect();
    if samples.is_empty() {
        return Err(Error::InvalidParameter("empty inbag sample".into()));
    }
    let mut grower = Grower {
        data,
        params,
        rng,
        nodes: Vec::new(),
        max_depth: 0,
    };
    grower.grow(samples, 0);
    let max_depth = grower.max_depth;
    let nodes = grower.nodes;
    let oob_indices = multiplicity
        .iter()
        .enumerate()
        .filter(|(_, &m)| m == 0)
        .map(|(i, _)| i)
        .collect();
    let mut tree = Tree {
        nodes,
        inbag_multiplicity: multiplicity,
        oob_indices,
        max_depth_reached: max_depth,
        n_features: data.p(),
        n_classes: data.n_classes(),
    };
    tree.route_stats(data);
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub n_classes: usize,
    pub p: usize,
    pub feature_names: Vec<String>,
}

impl Forest {
    /// Fit `params.n_trees` trees; tree `t` draws from stream `t` of
    /// `params.seed`, so the result does not depend on thread scheduling.
    pub fn fit(data: &Dataset, params: &ForestParams) -> Result<Forest> {
        params.validate(data.p())?;
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = derived_rng(params.seed, t as u64);
                fit_tree(data, params, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Forest {
            trees,
            params: params.clone(),
            n_classes: data.n_classes(),
            p: data.p(),
            feature_names: data.column_names().to_vec(),
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean over trees of the inbag class proportions at the leaf reached.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let st = &tree.nodes[tree.leaf(x)].stats;
            for (o, &c) in out.iter_mut().zip(&st.class_counts_in) {
                *o += c as f64 / st.n_in as f64;
            }
        }
        let t = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= t);
        out
    }

    pub fn predict_class(&self, x: &[f64]) -> usize {
        let proba = self.predict_proba(x);
        let mut best = 0;
        for (k, &v) in proba.iter().enumerate() {
            if v > proba[best] {
                best = k;
            }
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ForestDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Forest> {
        let doc: ForestDoc = serde_json::from_str(s)?;
        doc.into_forest()
    }
}

// JSON layout: flat node arrays for external auditing.

#[derive(Serialize, Deserialize)]
struct ForestDoc {
    version: u32,
    n_classes: usize,
    n_features: usize,
    feature_names: Vec<String>,
    params: ForestParams,
    trees: Vec<TreeDoc>,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    inbag_multiplicity: Vec<u32>,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    feature: Option<usize>,
    threshold: Option<f64>,
    children: Option<[usize; 2]>,
    n_in: u64,
    n_oob: u64,
    class_counts_in: Vec<u64>,
    class_counts_oob: Vec<u64>,
}

impl From<&Forest> for ForestDoc {
    fn from(f: &Forest) -> Self {
        ForestDoc {
            version: FOREST_SCHEMA_VERSION,
            n_classes: f.n_classes,
            n_features: f.p,
            feature_names: f.feature_names.clone(),
            params: f.params.clone(),
            trees: f
                .trees
                .iter()
                .map(|t| TreeDoc {
                    inbag_multiplicity: t.inbag_multiplicity.clone(),
                    nodes: t
                        .nodes
                        .iter()
                        .enumerate()
                        .map(|(id, n)| NodeDoc {
                            id,
                            feature: n.split.map(|s| s.feature),
                            threshold: n.split.map(|s| s.threshold),
                            children: n.split.map(|s| [s.left, s.right]),
                            n_in: n.stats.n_in,
                            n_oob: n.stats.n_oob,
                            class_counts_in: n.stats.class_counts_in.clone(),
                            class_counts_oob: n.stats.class_counts_oob.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl ForestDoc {
    fn into_forest(self) -> Result<Forest> {
        if self.version != FOREST_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported forest schema version {}",
                self.version
            )));
        }
        let trees = self
            .trees
            .into_iter()
            .map(|t| {
                let nodes = t
                    .nodes
                    .into_iter()
                    .enumerate()
                    .map(|(pos, n)| {
                        if n.id != pos {
                            return Err(Error::Schema(format!("node id {} at position {pos}", n.id)));
                        }
                        let split = match (n.feature, n.threshold, n.children) {
                            (Some(feature), Some(threshold), Some([left, right])) => {
                                Some(SplitRecord {
                                    feature,
                                    threshold,
                                    left,
                                    right,
                                })
                            }
                            (None, None, None) => None,
                            _ => return Err(Error::Schema(format!("node {pos} has a partial split"))),
                        };
                        Ok(Node {
                            split,
                            stats: NodeStats {
                                n_in: n.n_in,
                                n_oob: n.n_oob,
                                class_counts_in: n.class_counts_in,
                                class_counts_oob: n.class_counts_oob,
                            },
                            depth: 0,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Tree::from_parts(nodes, t.inbag_multiplicity, self.n_features, self.n_classes)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Forest {
            trees,
            params: self.params,
            n_classes: self.n_classes,
            p: self.n_features,
            feature_names: self.feature_names,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Arity;

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = derived_rng(seed, 99);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(0..10) as f64, rng.gen::<f64>(), rng.gen_range(0..3) as f64])
            .collect();
        let y = rows
            .iter()
            .map(|r| usize::from(r[0] + rng.gen_range(0.0..4.0) > 6.0))
            .collect();
        Dataset::new(
            rows,
            y,
            2,
            vec!["a".into(), "b".into(), "c".into()],
            vec![Arity::Continuous; 3],
        )
        .unwrap()
    }

    #[test]
    fn bootstrap_single_row() {
        let mut rng = derived_rng(1, 0);
        assert_eq!(bootstrap_sample(1, &mut rng), vec![1]);
    }

    #[test]
    fn bootstrap_sums_to_n_and_is_deterministic() {
        let a = bootstrap_sample(500, &mut derived_rng(5, 2));
        let b = bootstrap_sample(500, &mut derived_rng(5, 2));
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|&m| m as usize).sum::<usize>(), 500);
    }

    #[test]
    fn bootstrap_oob_fraction() {
        let n = 1000;
        let expected = (1.0 - 1.0 / n as f64).powi(n as i32);
        let mut rng = derived_rng(11, 0);
        let reps = 200;
        let mean: f64 = (0..reps)
            .map(|_| {
                let m = bootstrap_sample(n, &mut rng);
                m.iter().filter(|&&c| c == 0).count() as f64 / n as f64
            })
            .sum::<f64>()
            / reps as f64;
        assert!((expected - 0.368).abs() < 0.001);
        assert!((mean - 0.368).abs() < 0.01, "mean oob fraction {mean}");
    }

    #[test]
    fn min_leaf_n_gives_single_leaf() {
        let ds = toy(40, 1);
        let params = ForestParams::new(1, 3, 0).with_min_leaf(40);
        let tree = fit_tree(&ds, &params, &mut derived_rng(0, 0)).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        let st = &tree.node(0).stats;
        assert_eq!(st.n_in, 40);
        assert_eq!(st.n_in + 0, tree.inbag_size());
        let mult = tree.inbag_multiplicity();
        let ones: u64 = (0..40)
            .filter(|&i| ds.labels()[i] == 1)
            .map(|i| mult[i] as u64)
            .sum();
        assert_eq!(st.class_counts_in[1], ones);
    }

    #[test]
    fn separable_data_gives_stump() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let ds = Dataset::new(rows, y, 2, vec!["x".into()], vec![Arity::Continuous]).unwrap();
        let params = ForestParams::new(1, 1, 0);
        let tree = fit_tree_on(&ds, &params, vec![1; 20], &mut derived_rng(0, 0)).unwrap();
        assert_eq!(tree.nodes().len(), 3);
        assert_eq!(tree.max_depth_reached(), 1);
        let s = tree.node(0).split.unwrap();
        assert_eq!(s.threshold, 9.5);
        assert_eq!(tree.node(s.left).stats.mu_in(), vec![1.0, 0.0]);
        assert_eq!(tree.node(s.right).stats.mu_in(), vec![0.0, 1.0]);
    }

    fn check_partition(tree: &Tree) {
        for node in tree.nodes() {
            let st = &node.stats;
            assert_eq!(st.class_counts_in.iter().sum::<u64>(), st.n_in);
            assert_eq!(st.class_counts_oob.iter().sum::<u64>(), st.n_oob);
            assert_eq!(st.mu_oob().is_some(), st.n_oob >= 1);
            if let Some(s) = node.split {
                let (l, r) = (&tree.node(s.left).stats, &tree.node(s.right).stats);
                assert_eq!(l.n_in + r.n_in, st.n_in);
                assert_eq!(l.n_oob + r.n_oob, st.n_oob);
                assert!(l.n_in >= 1 && r.n_in >= 1);
            }
        }
        let leaf_oob: u64 = tree
            .nodes()
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.stats.n_oob)
            .sum();
        assert_eq!(leaf_oob as usize, tree.oob_indices().len());
        assert_eq!(tree.node(0).stats.n_in, tree.inbag_size());
    }

    #[test]
    fn partition_property_and_oob_routing() {
        let ds = toy(150, 3);
        let forest = Forest::fit(&ds, &ForestParams::new(10, 2, 4)).unwrap();
        for tree in &forest.trees {
            check_partition(tree);
            for &i in tree.oob_indices() {
                assert!(tree.is_oob(i));
            }
        }
    }

    #[test]
    fn thresholds_lie_between_inbag_values() {
        let ds = toy(120, 8);
        let forest = Forest::fit(&ds, &ForestParams::new(5, 3, 2)).unwrap();
        for tree in &forest.trees {
            for (id, node) in tree.nodes().iter().enumerate() {
                let Some(s) = node.split else { continue };
                // rows that reach this node and are inbag
                let vals: Vec<f64> = (0..ds.n())
                    .filter(|&i| tree.inbag_multiplicity()[i] > 0 && tree.path(ds.row(i)).contains(&id))
                    .map(|i| ds.value(i, s.feature))
                    .collect();
                let below = vals.iter().copied().filter(|&v| v <= s.threshold).fold(f64::MIN, f64::max);
                let above = vals.iter().copied().filter(|&v| v > s.threshold).fold(f64::MAX, f64::min);
                assert!(below < s.threshold || below == s.threshold && below < above);
                assert!(s.threshold < above);
                assert_eq!(s.threshold, below + (above - below) / 2.0);
            }
        }
    }

    #[test]
    fn greedy_split_is_optimal_over_sampled_features() {
        // with mtry = p every feature is sampled, so re-enumerate all of them
        let ds = toy(60, 21);
        let forest = Forest::fit(&ds, &ForestParams::new(3, 3, 1)).unwrap();
        for tree in &forest.trees {
            for (id, node) in tree.nodes().iter().enumerate() {
                let Some(s) = node.split else { continue };
                let samples: Vec<(usize, u32)> = (0..ds.n())
                    .filter(|&i| tree.inbag_multiplicity()[i] > 0 && tree.path(ds.row(i)).contains(&id))
                    .map(|i| (i, tree.inbag_multiplicity()[i]))
                    .collect();
                let chosen = best_split(&ds, &samples, &[s.feature], 1).unwrap();
                for f in 0..3 {
                    if let Some(other) = best_split(&ds, &samples, &[f], 1) {
                        assert!(other.decrease <= chosen.decrease + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn leaf_mu_is_inbag_label_mean_with_multiplicity() {
        let ds = toy(80, 5);
        let tree = fit_tree(&ds, &ForestParams::new(1, 2, 0), &mut derived_rng(7, 0)).unwrap();
        let mut num = vec![0u64; tree.nodes().len()];
        let mut den = vec![0u64; tree.nodes().len()];
        for i in 0..ds.n() {
            let m = tree.inbag_multiplicity()[i] as u64;
            let leaf = tree.leaf(ds.row(i));
            num[leaf] += m * ds.labels()[i] as u64;
            den[leaf] += m;
        }
        for (id, node) in tree.nodes().iter().enumerate() {
            if node.is_leaf() {
                // integer identity: counts agree exactly, so the ratio does too
                assert_eq!(node.stats.class_counts_in[1], num[id]);
                assert_eq!(node.stats.n_in, den[id]);
            }
        }
    }

    #[test]
    fn forest_is_deterministic() {
        let ds = toy(100, 2);
        let params = ForestParams::new(8, 2, 42);
        let a = Forest::fit(&ds, &params).unwrap();
        let b = Forest::fit(&ds, &params).unwrap();
        assert_eq!(a, b);
        let c = Forest::fit(&ds, &ForestParams::new(8, 2, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_leaf_prediction_is_class_proportions() {
        let ds = toy(50, 9);
        let params = ForestParams::new(1, 1, 0).with_min_leaf(1000);
        let tree = fit_tree_on(&ds, &params, vec![1; 50], &mut derived_rng(0, 0)).unwrap();
        let ones = ds.labels().iter().filter(|&&y| y == 1).count() as f64 / 50.0;
        let p = tree.predict_proba(ds.row(0));
        assert!((p[1] - ones).abs() < 1e-15);
    }

    #[test]
    fn forest_prediction_is_tree_average() {
        let ds = toy(90, 4);
        let forest = Forest::fit(&ds, &ForestParams::new(15, 2, 8)).unwrap();
        for i in 0..ds.n() {
            let x = ds.row(i);
            let p = forest.predict_proba(x);
            // recompute from the leaf counts via an independent path walk
            let mut acc = 0.0;
            for tree in &forest.trees {
                let leaf = *tree.path(x).last().unwrap();
                let st = &tree.node(leaf).stats;
                acc += st.class_counts_in[1] as f64 / st.n_in as f64;
            }
            acc /= forest.n_trees() as f64;
            assert!((p[1] - acc).abs() < 1e-12);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn subsample_has_no_repeats() {
        let ds = toy(100, 4);
        let params = ForestParams::new(2, 2, 1).with_sampling(Sampling::Subsample { fraction: 0.5 });
        let forest = Forest::fit(&ds, &params).unwrap();
        for t in &forest.trees {
            assert!(t.inbag_multiplicity().iter().all(|&m| m <= 1));
            assert_eq!(t.inbag_size(), 50);
        }
    }

    #[test]
    fn invalid_params() {
        let ds = toy(10, 1);
        assert!(Forest::fit(&ds, &ForestParams::new(0, 1, 0)).is_err());
        assert!(Forest::fit(&ds, &ForestParams::new(1, 4, 0)).is_err());
        assert!(Forest::fit(&ds, &ForestParams::new(1, 0, 0)).is_err());
        assert!(Forest::fit(&ds, &ForestParams::new(1, 1, 0).with_min_leaf(0)).is_err());
    }

    #[test]
    fn max_depth_caps_growth() {
        let ds = toy(200, 6);
        let forest = Forest::fit(&ds, &ForestParams::new(4, 3, 0).with_max_depth(Some(2))).unwrap();
        assert!(forest.trees.iter().all(|t| t.max_depth_reached() <= 2));
    }

    #[test]
    fn json_round_trip() {
        let ds = toy(60, 2);
        let forest = Forest::fit(&ds, &ForestParams::new(3, 2, 5)).unwrap();
        let json = forest.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["version"], 1);
        let node = &v["trees"][0]["nodes"][0];
        for key in ["id", "feature", "threshold", "children", "n_in", "n_oob", "class_counts_in", "class_counts_oob"] {
            assert!(node.get(key).is_some(), "missing {key}");
        }
        assert_eq!(Forest::from_json(&json).unwrap(), forest);
        let bad = json.replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(Forest::from_json(&bad).is_err());
    }
}
