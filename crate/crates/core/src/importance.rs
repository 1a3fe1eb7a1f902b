//! Global importance scores over a fitted [`Forest`].
//!
//! The penalized Gini impurity of a node blends the OOB and inbag Gini
//! impurities and adds a penalty on the gap between OOB and inbag class
//! proportions:
//!
//! ```text
//! PG(alpha, lambda) = alpha * c * G_oob + (1 - alpha) * G_in
//!                   + lambda * 1/2 * sum_d (p_oob[d] - p_in[d])^2
//! ```
//!
//! with `c = n_oob / (n_oob - 1)` when the variance correction is on and 1
//! otherwise. For two classes the penalty is `lambda * (p_oob - p_in)^2` on
//! the class-1 proportion. A feature's score is the inbag-weighted decrease
//! of this impurity over the nodes splitting on it, averaged over trees.
//! `alpha = 0, lambda = 0` is the usual MDI.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{derived_rng, Forest, NodeStats, Tree};
use crate::split::gini_from_counts;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgConfig {
    pub alpha: f64,
    pub lambda: f64,
    /// Apply `N/(N-1)` to the OOB Gini term.
    pub bias_correct: bool,
    /// Nodes (parent or either child) with fewer OOB rows contribute zero.
    pub min_oob: u64,
}

impl PgConfig {
    /// Default `min_oob`: 1 uncorrected, 2 corrected.
    pub fn new(alpha: f64, lambda: f64, bias_correct: bool) -> Result<Self> {
        let cfg = PgConfig {
            alpha,
            lambda,
            bias_correct,
            min_oob: if bias_correct { 2 } else { 1 },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_min_oob(mut self, min_oob: u64) -> Result<Self> {
        self.min_oob = min_oob;
        self.validate()?;
        Ok(self)
    }

    /// Plain inbag Gini: the MDI configuration.
    pub fn mdi() -> Self {
        PgConfig {
            alpha: 0.0,
            lambda: 0.0,
            bias_correct: false,
            min_oob: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.bias_correct && self.min_oob < 2 {
            return Err(Error::InvalidParameter(
                "bias correction needs min_oob >= 2".into(),
            ));
        }
        Ok(())
    }

    /// Whether the impurity reads OOB statistics at all.
    pub fn uses_oob(&self) -> bool {
        self.alpha > 0.0 || self.lambda > 0.0
    }

    fn required_oob(&self) -> u64 {
        if self.uses_oob() {
            self.min_oob.max(1)
        } else {
            self.min_oob
        }
    }

    /// Method name in the `pg:<alpha>:<lambda>[:corrected]` syntax.
    pub fn method_name(&self) -> String {
        let mut s = format!("pg:{}:{}", self.alpha, self.lambda);
        if self.bias_correct {
            s.push_str(":corrected");
        }
        s
    }
}

fn pg_from_counts(
    counts_in: &[u64],
    n_in: u64,
    counts_oob: &[u64],
    n_oob: u64,
    cfg: &PgConfig,
) -> f64 {
    let g_in = gini_from_counts(counts_in, n_in);
    if !cfg.uses_oob() {
        return g_in;
    }
    let g_oob = gini_from_counts(counts_oob, n_oob);
    let c = if cfg.bias_correct {
        n_oob as f64 / (n_oob as f64 - 1.0)
    } else {
        1.0
    };
    let (ni, no) = (n_in as f64, n_oob as f64);
    let gap: f64 = counts_in
        .iter()
        .zip(counts_oob)
        .map(|(&a, &b)| {
            let d = b as f64 / no - a as f64 / ni;
            d * d
        })
        .sum();
    cfg.alpha * c * g_oob + (1.0 - cfg.alpha) * g_in + cfg.lambda * 0.5 * gap
}

/// Penalized Gini impurity of one node.
pub fn penalized_impurity(stats: &NodeStats, config: &PgConfig) -> Result<f64> {
    config.validate()?;
    if stats.n_in == 0 {
        return Err(Error::InvalidParameter("node has no inbag samples".into()));
    }
    if config.uses_oob() {
        let required = config.required_oob().max(if config.bias_correct { 2 } else { 1 });
        if stats.n_oob < required {
            return Err(Error::InsufficientOob {
                node: 0,
                n_oob: stats.n_oob,
                required,
            });
        }
    }
    Ok(pg_from_counts(
        &stats.class_counts_in,
        stats.n_in,
        &stats.class_counts_oob,
        stats.n_oob,
        config,
    ))
}

/// Per-feature score vector with the method that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: String,
    pub config: serde_json::Value,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    /// `per_tree[feature][tree]`; `scores` are its row means.
    pub per_tree: Option<Vec<Vec<f64>>>,
}

impl ImportanceReport {
    pub fn new(
        method: impl Into<String>,
        config: serde_json::Value,
        feature_names: Vec<String>,
        scores: Vec<f64>,
    ) -> Self {
        ImportanceReport {
            method: method.into(),
            config,
            feature_names,
            scores,
            per_tree: None,
        }
    }

    /// Build from per-tree columns (`columns[tree][feature]`).
    pub fn from_tree_columns(
        method: impl Into<String>,
        config: serde_json::Value,
        feature_names: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Self {
        let p = feature_names.len();
        let per_tree: Vec<Vec<f64>> = (0..p)
            .map(|k| columns.iter().map(|c| c[k]).collect())
            .collect();
        let scores = per_tree
            .iter()
            .map(|row| {
                if row.is_empty() {
                    0.0
                } else {
                    row.iter().sum::<f64>() / row.len() as f64
                }
            })
            .collect();
        ImportanceReport {
            method: method.into(),
            config,
            feature_names,
            scores,
            per_tree: Some(per_tree),
        }
    }

    pub fn n_features(&self) -> usize {
        self.scores.len()
    }

    /// Standard error of each score across trees.
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        let per_tree = self.per_tree.as_ref()?;
        Some(
            per_tree
                .iter()
                .map(|row| crate::experiments::stats::mean_and_se(row).1)
                .collect(),
        )
    }

    pub fn score(&self, name: &str) -> Option<f64> {
        let k = self.feature_names.iter().position(|n| n == name)?;
        Some(self.scores[k])
    }

    /// Index of the highest score (first one on ties).
    pub fn top_feature(&self) -> usize {
        let mut best = 0;
        for (k, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = k;
            }
        }
        best
    }

    /// Scores divided by the largest score.
    pub fn scaled_to_max(&self) -> ImportanceReport {
        let max = self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out = self.clone();
        if max > 0.0 {
            out.scores.iter_mut().for_each(|s| *s /= max);
            if let Some(pt) = out.per_tree.as_mut() {
                pt.iter_mut().flatten().for_each(|s| *s /= max);
            }
        }
        out
    }

    /// Write `feature,method,score` rows with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["feature", "method", "score"])?;
        for (name, score) in self.feature_names.iter().zip(&self.scores) {
            wr.write_record([name.as_str(), self.method.as_str(), &format!("{score:e}")])?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn feature_names(forest: &Forest) -> Vec<String> {
    forest.feature_names.clone()
}

/// Which statistics stand in for the OOB side of the impurity.
#[derive(Clone, Copy)]
enum OobSide {
    Oob,
    /// Inbag counts substituted for OOB counts.
    Inbag,
}

fn tree_pg_scores(tree: &Tree, cfg: &PgConfig, side: OobSide) -> (Vec<f64>, usize) {
    let mut scores = vec![0.0; tree.n_features()];
    let total = tree.inbag_size() as f64;
    let required = cfg.required_oob();
    let mut skipped = 0;
    let oob_of = |st: &NodeStats| -> (Vec<u64>, u64) {
        match side {
            OobSide::Oob => (st.class_counts_oob.clone(), st.n_oob),
            OobSide::Inbag => (st.class_counts_in.clone(), st.n_in),
        }
    };
    let impurity = |st: &NodeStats| {
        let (co, no) = oob_of(st);
        pg_from_counts(&st.class_counts_in, st.n_in, &co, no, cfg)
    };
    for node in tree.nodes() {
        let Some(s) = node.split else { continue };
        let (t, l, r) = (&node.stats, &tree.node(s.left).stats, &tree.node(s.right).stats);
        if [t, l, r].iter().any(|st| oob_of(st).1 < required) {
            skipped += 1;
            continue;
        }
        let nt = t.n_in as f64;
        let decrease = impurity(t)
            - l.n_in as f64 / nt * impurity(l)
            - r.n_in as f64 / nt * impurity(r);
        scores[s.feature] += nt / total * decrease;
    }
    (scores, skipped)
}

fn pg_report(forest: &Forest, cfg: &PgConfig, side: OobSide, method: String) -> Result<ImportanceReport> {
    cfg.validate()?;
    let results: Vec<(Vec<f64>, usize)> = forest
        .trees
        .par_iter()
        .map(|t| tree_pg_scores(t, cfg, side))
        .collect();
    let skipped: usize = results.iter().map(|r| r.1).sum();
    if skipped > 0 {
        log::debug!("{method}: {skipped} nodes below min_oob contributed zero");
    }
    let columns = results.into_iter().map(|r| r.0).collect();
    Ok(ImportanceReport::from_tree_columns(
        method,
        serde_json::to_value(cfg)?,
        feature_names(forest),
        columns,
    ))
}

/// Penalized-Gini importance using each tree's OOB statistics.
pub fn pg_importance(forest: &Forest, config: &PgConfig) -> Result<ImportanceReport> {
    pg_report(forest, config, OobSide::Oob, config.method_name())
}

/// Penalized-Gini importance with inbag statistics standing in for OOB ones.
pub fn pg_importance_inbag_only(forest: &Forest, config: &PgConfig) -> Result<ImportanceReport> {
    pg_report(
        forest,
        config,
        OobSide::Inbag,
        format!("{}:inbag", config.method_name()),
    )
}

/// Mean decrease in (inbag) Gini impurity.
pub fn mdi(forest: &Forest) -> ImportanceReport {
    pg_report(forest, &PgConfig::mdi(), OobSide::Oob, "mdi".into())
        .expect("the MDI configuration is valid")
}

/// MDI-oob: node-wise reduction of the mean squared deviation of OOB labels
/// from the inbag node mean, computed by routing the rows of `data`.
///
/// The node quantity is `p_oob (1 - p_oob) + (p_oob - p_in)^2` on the class-1
/// proportion, i.e. half of `PG(1, 2)` for two classes.
pub fn mdi_oob(forest: &Forest, data: &Dataset) -> Result<ImportanceReport> {
    let y = data.binary_labels()?;
    let columns: Vec<Vec<f64>> = forest
        .trees
        .par_iter()
        .map(|tree| tree_mdi_oob(tree, data, &y))
        .collect();
    Ok(ImportanceReport::from_tree_columns(
        "mdi_oob",
        serde_json::json!({}),
        feature_names(forest),
        columns,
    ))
}

fn tree_mdi_oob(tree: &Tree, data: &Dataset, y: &[f64]) -> Vec<f64> {
    let m = tree.nodes().len();
    // inbag weight and class-1 weight per node, from the rows themselves
    let mut w_in = vec![0.0; m];
    let mut y_in = vec![0.0; m];
    let mut oob_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..data.n() {
        let mult = tree.inbag_multiplicity()[i] as f64;
        for id in tree.path(data.row(i)) {
            if mult > 0.0 {
                w_in[id] += mult;
                y_in[id] += mult * y[i];
            } else {
                oob_rows[id].push(i);
            }
        }
    }
    let mu_in: Vec<f64> = (0..m).map(|id| y_in[id] / w_in[id]).collect();
    let msd = |id: usize| -> f64 {
        let rows = &oob_rows[id];
        rows.iter().map(|&i| (y[i] - mu_in[id]).powi(2)).sum::<f64>() / rows.len() as f64
    };
    let total = tree.inbag_size() as f64;
    let mut scores = vec![0.0; tree.n_features()];
    for (id, node) in tree.nodes().iter().enumerate() {
        let Some(s) = node.split else { continue };
        if [id, s.left, s.right].iter().any(|&k| oob_rows[k].is_empty()) {
            continue;
        }
        let nt = w_in[id];
        let delta = msd(id) - w_in[s.left] / nt * msd(s.left) - w_in[s.right] / nt * msd(s.right);
        scores[s.feature] += nt / total * delta;
    }
    scores
}

/// OOB permutation importance (mean decrease in accuracy).
///
/// For every tree with a non-empty OOB set and every feature, the column is
/// shuffled within the tree's OOB rows and the drop in OOB accuracy recorded,
/// averaged over `n_permutations` shuffles. Trees without OOB rows are left
/// out of `per_tree`.
pub fn mda_permutation<R: Rng + ?Sized>(
    forest: &Forest,
    data: &Dataset,
    n_permutations: usize,
    rng: &mut R,
) -> Result<ImportanceReport> {
    if n_permutations == 0 {
        return Err(Error::InvalidParameter("n_permutations must be >= 1".into()));
    }
    let base_seed: u64 = rng.gen();
    let columns: Vec<Option<Vec<f64>>> = forest
        .trees
        .par_iter()
        .enumerate()
        .map(|(t, tree)| {
            let mut trng = derived_rng(base_seed, t as u64);
            tree_mda(tree, data, n_permutations, &mut trng)
        })
        .collect();
    let columns: Vec<Vec<f64>> = columns.into_iter().flatten().collect();
    Ok(ImportanceReport::from_tree_columns(
        "mda",
        serde_json::json!({ "n_permutations": n_permutations, "seed": base_seed }),
        feature_names(forest),
        columns,
    ))
}

fn leaf_with_override(tree: &Tree, x: &[f64], feature: usize, value: f64) -> usize {
    let mut id = 0;
    while let Some(s) = tree.node(id).split {
        let v = if s.feature == feature { value } else { x[s.feature] };
        id = if v <= s.threshold { s.left } else { s.right };
    }
    id
}

fn leaf_class(tree: &Tree, leaf: usize) -> usize {
    let counts = &tree.node(leaf).stats.class_counts_in;
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

fn tree_mda<R: Rng>(tree: &Tree, data: &Dataset, reps: usize, rng: &mut R) -> Option<Vec<f64>> {
    let oob = tree.oob_indices();
    if oob.is_empty() {
        return None;
    }
    let labels = data.labels();
    let n_oob = oob.len() as f64;
    let correct = oob
        .iter()
        .filter(|&&i| tree.predict_class(data.row(i)) == labels[i])
        .count() as f64;
    let base_acc = correct / n_oob;
    let mut scores = vec![0.0; data.p()];
    let mut perm: Vec<f64> = Vec::with_capacity(oob.len());
    for _ in 0..reps {
        for (k, score) in scores.iter_mut().enumerate() {
            if !tree.uses_feature(k) {
                continue;
            }
            perm.clear();
            perm.extend(oob.iter().map(|&i| data.value(i, k)));
            perm.shuffle(rng);
            let hits = oob
                .iter()
                .zip(&perm)
                .filter(|(&i, &v)| leaf_class(tree, leaf_with_override(tree, data.row(i), k, v)) == labels[i])
                .count() as f64;
            *score += base_acc - hits / n_oob;
        }
    }
    scores.iter_mut().for_each(|s| *s /= reps as f64);
    Some(scores)
}
