//! Conditional feature contributions: the change in node value along the
//! decision path, credited to the feature split on.

use serde::{Deserialize, Serialize};

use super::cover::{CoverSource, TreeCover};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::Tree;

/// Contributions of one tree for `x` under the given cover source.
pub fn cfc_tree(tree: &Tree, x: &[f64], cover: CoverSource) -> Result<Vec<f64>> {
    let cover = TreeCover::new(tree, cover)?;
    Ok(cfc_with_cover(tree, &cover, x))
}

pub fn cfc_with_cover(tree: &Tree, cover: &TreeCover, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; tree.n_features()];
    add_cfc(tree, cover, x, &mut out);
    out
}

/// Add the contributions for `x` into `out`; returns the leaf value.
pub(crate) fn add_cfc(tree: &Tree, cover: &TreeCover, x: &[f64], out: &mut [f64]) -> f64 {
    let mut id = 0;
    while let Some(s) = tree.node(id).split {
        let next = if x[s.feature] <= s.threshold { s.left } else { s.right };
        out[s.feature] += cover.value(next) - cover.value(id);
        id = next;
    }
    cover.value(id)
}

/// Normalization of the label-weighted contribution sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeForm {
    /// `(1/|D|) sum_i f_k(x_i) y_i`: reproduces the variance-form MDI.
    Covariance,
    /// `(1/|D[y=1]|) sum_{i: y_i=1} f_k(x_i)`: the covariance form scaled
    /// by `|D| / |D[y=1]|`.
    RestrictedSum,
}

/// Label-weighted sum of inbag-cover contributions over the inbag rows
/// (with multiplicity) or the OOB rows of `tree`.
pub fn mdi_via_cfc(
    tree: &Tree,
    data: &Dataset,
    subset: CoverSource,
    form: BridgeForm,
) -> Result<Vec<f64>> {
    let y = data.binary_labels()?;
    let cover = TreeCover::new(tree, CoverSource::Inbag)?;
    let mut acc = vec![0.0; tree.n_features()];
    let mut f = vec![0.0; tree.n_features()];
    let (mut w_all, mut w_pos) = (0.0, 0.0);
    for i in 0..data.n() {
        let m = tree.inbag_multiplicity()[i];
        let w = match subset {
            CoverSource::Inbag => m as f64,
            CoverSource::Oob => f64::from(u8::from(m == 0)),
        };
        if w == 0.0 {
            continue;
        }
        w_all += w;
        w_pos += w * y[i];
        if y[i] == 0.0 {
            continue;
        }
        f.iter_mut().for_each(|v| *v = 0.0);
        add_cfc(tree, &cover, data.row(i), &mut f);
        for (a, v) in acc.iter_mut().zip(&f) {
            *a += w * v;
        }
    }
    let denom = match form {
        BridgeForm::Covariance => w_all,
        BridgeForm::RestrictedSum => w_pos,
    };
    if w_all == 0.0 {
        return Err(Error::EmptySelection(format!("no {} rows", subset.name())));
    }
    if denom == 0.0 {
        return Err(Error::EmptySelection(format!(
            "no {} rows with y = 1",
            subset.name()
        )));
    }
    acc.iter_mut().for_each(|a| *a /= denom);
    Ok(acc)
}
