use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cfc::add_cfc;
use super::cover::{forest_covers, CoverSource, TreeCover};
use super::shap::{expected_value, ShapBuffer};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::importance::ImportanceReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributionKind {
    Cfc,
    Shap,
}

impl AttributionKind {
    pub fn name(self) -> &'static str {
        match self {
            AttributionKind::Cfc => "cfc",
            AttributionKind::Shap => "shap",
        }
    }
}

/// Which trees a sample's attribution is averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Every tree.
    All,
    /// Trees whose bootstrap sample contains the row.
    Inbag,
    /// Trees for which the row is out of bag.
    Oob,
}

impl Selection {
    pub fn name(self) -> &'static str {
        match self {
            Selection::All => "all",
            Selection::Inbag => "inbag",
            Selection::Oob => "oob",
        }
    }
}

/// Per-sample tree averages over one selection of trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeans {
    /// Row-major `n x p`.
    pub values: Vec<f64>,
    /// Mean base value of the averaged trees.
    pub base: Vec<f64>,
    /// Mean tree output of the averaged trees.
    pub prediction: Vec<f64>,
    pub n_trees: Vec<usize>,
}

impl SampleMeans {
    fn zeros(n: usize, p: usize) -> Self {
        SampleMeans {
            values: vec![0.0; n * p],
            base: vec![0.0; n],
            prediction: vec![0.0; n],
            n_trees: vec![0; n],
        }
    }
}

/// Attributions of the training rows of a forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub kind: AttributionKind,
    pub cover: CoverSource,
    pub feature_names: Vec<String>,
    pub sample_ids: Vec<usize>,
    pub all: SampleMeans,
    pub inbag: SampleMeans,
    pub oob: SampleMeans,
    /// `membership[tree][sample]`: bootstrap multiplicity, 0 when OOB.
    pub membership: Vec<Vec<u32>>,
}

impl AttributionMatrix {
    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn means(&self, selection: Selection) -> &SampleMeans {
        match selection {
            Selection::All => &self.all,
            Selection::Inbag => &self.inbag,
            Selection::Oob => &self.oob,
        }
    }

    pub fn row(&self, i: usize, selection: Selection) -> &[f64] {
        let p = self.n_features();
        &self.means(selection).values[i * p..(i + 1) * p]
    }

    /// Base value averaged over all trees.
    pub fn base_value(&self) -> f64 {
        self.all.base.first().copied().unwrap_or(0.0)
    }

    /// Largest `|base + sum_k value - prediction|` over samples with at
    /// least one tree in the selection.
    pub fn local_accuracy_error(&self, selection: Selection) -> f64 {
        let m = self.means(selection);
        (0..self.n_samples())
            .filter(|&i| m.n_trees[i] > 0)
            .map(|i| (m.base[i] + self.row(i, selection).iter().sum::<f64>() - m.prediction[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Long-format CSV: `sample_id,feature,value,membership,n_trees`, one
    /// block per selection.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["sample_id", "feature", "value", "membership", "n_trees"])?;
        for sel in [Selection::All, Selection::Inbag, Selection::Oob] {
            let m = self.means(sel);
            for (i, id) in self.sample_ids.iter().enumerate() {
                if m.n_trees[i] == 0 {
                    continue;
                }
                for (k, name) in self.feature_names.iter().enumerate() {
                    wr.write_record([
                        id.to_string(),
                        name.clone(),
                        format!("{:e}", self.row(i, sel)[k]),
                        sel.name().to_string(),
                        m.n_trees[i].to_string(),
                    ])?;
                }
            }
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Attribute every row of `data` with every tree of `forest`.
pub fn explain_forest(
    forest: &Forest,
    data: &Dataset,
    kind: AttributionKind,
    cover: CoverSource,
) -> Result<AttributionMatrix> {
    if data.p() != forest.p {
        return Err(Error::InvalidParameter(format!(
            "forest has {} features, data has {}",
            forest.p,
            data.p()
        )));
    }
    if forest
        .trees
        .iter()
        .any(|t| t.inbag_multiplicity().len() != data.n())
    {
        return Err(Error::InvalidParameter(
            "data is not the forest's training set".into(),
        ));
    }
    let covers = forest_covers(&forest.trees, cover)?;
    let bases: Vec<f64> = forest
        .trees
        .iter()
        .zip(&covers)
        .map(|(t, c)| match kind {
            AttributionKind::Cfc => c.root_value(),
            AttributionKind::Shap => expected_value(t, c),
        })
        .collect();
    let max_depth = forest.trees.iter().map(|t| t.max_depth_reached()).max().unwrap_or(0);
    let p = data.p();

    struct Row {
        all: Vec<f64>,
        inbag: Vec<f64>,
        oob: Vec<f64>,
        // base, prediction, tree count per selection
        sums: [(f64, f64, usize); 3],
    }
    let rows: Vec<Row> = (0..data.n())
        .into_par_iter()
        .map_init(
            || ShapBuffer::with_depth(max_depth),
            |buf, i| {
                let x = data.row(i);
                let mut row = Row {
                    all: vec![0.0; p],
                    inbag: vec![0.0; p],
                    oob: vec![0.0; p],
                    sums: [(0.0, 0.0, 0); 3],
                };
                let mut phi = vec![0.0; p];
                for (t, tree) in forest.trees.iter().enumerate() {
                    phi.iter_mut().for_each(|v| *v = 0.0);
                    let pred = tree_attribution(tree, &covers[t], kind, x, &mut phi, buf);
                    let inbag = tree.inbag_multiplicity()[i] > 0;
                    let sel = if inbag { 1 } else { 2 };
                    for s in [0, sel] {
                        let target = match s {
                            0 => &mut row.all,
                            1 => &mut row.inbag,
                            _ => &mut row.oob,
                        };
                        target.iter_mut().zip(&phi).for_each(|(a, v)| *a += v);
                        row.sums[s].0 += bases[t];
                        row.sums[s].1 += pred;
                        row.sums[s].2 += 1;
                    }
                }
                row
            },
        )
        .collect();

    let n = data.n();
    let mut means = [SampleMeans::zeros(n, p), SampleMeans::zeros(n, p), SampleMeans::zeros(n, p)];
    for (i, row) in rows.into_iter().enumerate() {
        for (s, vals) in [row.all, row.inbag, row.oob].into_iter().enumerate() {
            let (b, pr, c) = row.sums[s];
            let m = &mut means[s];
            m.n_trees[i] = c;
            if c == 0 {
                continue;
            }
            let cf = c as f64;
            m.base[i] = b / cf;
            m.prediction[i] = pr / cf;
            for (dst, v) in m.values[i * p..(i + 1) * p].iter_mut().zip(vals) {
                *dst = v / cf;
            }
        }
    }
    let [all, inbag, oob] = means;
    Ok(AttributionMatrix {
        kind,
        cover,
        feature_names: data.column_names().to_vec(),
        sample_ids: (0..n).collect(),
        all,
        inbag,
        oob,
        membership: forest.trees.iter().map(|t| t.inbag_multiplicity().to_vec()).collect(),
    })
}

fn tree_attribution(
    tree: &crate::forest::Tree,
    cover: &TreeCover,
    kind: AttributionKind,
    x: &[f64],
    out: &mut [f64],
    buf: &mut ShapBuffer,
) -> f64 {
    match kind {
        AttributionKind::Cfc => add_cfc(tree, cover, x, out),
        AttributionKind::Shap => {
            buf.add_shap(tree, cover, x, out);
            super::cover::predict_with_cover(tree, cover, x)
        }
    }
}

fn require_kind(attr: &AttributionMatrix, kind: AttributionKind) -> Result<()> {
    if attr.kind != kind {
        return Err(Error::WrongKind {
            expected: kind.name(),
            got: attr.kind.name(),
        });
    }
    Ok(())
}

fn selected(attr: &AttributionMatrix, selection: Selection) -> Result<Vec<usize>> {
    let m = attr.means(selection);
    let rows: Vec<usize> = (0..attr.n_samples()).filter(|&i| m.n_trees[i] > 0).collect();
    if rows.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no sample has a tree in selection `{}`",
            selection.name()
        )));
    }
    Ok(rows)
}

fn report(attr: &AttributionMatrix, method: String, selection: Selection, scores: Vec<f64>) -> ImportanceReport {
    ImportanceReport::new(
        method,
        serde_json::json!({ "cover": attr.cover, "selection": selection }),
        attr.feature_names.clone(),
        scores,
    )
}

/// Global contribution score: `sum_i |tree-mean contribution of feature k|`.
pub fn global_cfc(attr: &AttributionMatrix, selection: Selection) -> Result<ImportanceReport> {
    require_kind(attr, AttributionKind::Cfc)?;
    let rows = selected(attr, selection)?;
    let mut scores = vec![0.0; attr.n_features()];
    for &i in &rows {
        for (s, v) in scores.iter_mut().zip(attr.row(i, selection)) {
            *s += v.abs();
        }
    }
    Ok(report(attr, format!("cfc_{}_{}", attr.cover.name(), selection.name()), selection, scores))
}

/// `|mean_i value[i,k] * y_i|` over the samples with trees in the selection.
pub fn weighted_shap(attr: &AttributionMatrix, labels: &[f64], selection: Selection) -> Result<ImportanceReport> {
    require_kind(attr, AttributionKind::Shap)?;
    if labels.len() != attr.n_samples() {
        return Err(Error::InvalidParameter("label count differs from sample count".into()));
    }
    let rows = selected(attr, selection)?;
    let mut scores = vec![0.0; attr.n_features()];
    for &i in &rows {
        for (s, v) in scores.iter_mut().zip(attr.row(i, selection)) {
            *s += v * labels[i];
        }
    }
    let n = rows.len() as f64;
    scores.iter_mut().for_each(|s| *s = (*s / n).abs());
    Ok(report(attr, format!("wshap_{}_{}", attr.cover.name(), selection.name()), selection, scores))
}

/// `mean_i |value[i,k]|` over the samples with trees in the selection.
pub fn mean_abs_attribution(attr: &AttributionMatrix, selection: Selection) -> Result<ImportanceReport> {
    let rows = selected(attr, selection)?;
    let mut scores = vec![0.0; attr.n_features()];
    for &i in &rows {
        for (s, v) in scores.iter_mut().zip(attr.row(i, selection)) {
            *s += v.abs();
        }
    }
    let n = rows.len() as f64;
    scores.iter_mut().for_each(|s| *s /= n);
    Ok(report(
        attr,
        format!("{}_{}_{}", attr.kind.name(), attr.cover.name(), selection.name()),
        selection,
        scores,
    ))
}
