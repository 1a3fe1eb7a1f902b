//! Per-sample attributions and the scores built from them.

pub mod attribution;
pub mod cfc;
pub mod cover;
pub mod shap;

pub use attribution::{
    explain_forest, global_cfc, mean_abs_attribution, weighted_shap, AttributionKind,
    AttributionMatrix, SampleMeans, Selection,
};
pub use cfc::{cfc_tree, cfc_with_cover, mdi_via_cfc, BridgeForm};
pub use cover::{forest_covers, predict_with_cover, CoverSource, TreeCover};
pub use shap::{brute_force_shap, brute_force_shap_with_cover, expected_value, tree_shap, ShapBuffer};

use crate::data::Dataset;
use crate::error::Result;
use crate::forest::Forest;
use crate::importance::ImportanceReport;

/// Forest-level [`mdi_via_cfc`]: tree average, skipping trees whose subset
/// is empty.
pub fn mdi_via_cfc_forest(
    forest: &Forest,
    data: &Dataset,
    subset: CoverSource,
    form: BridgeForm,
) -> Result<ImportanceReport> {
    let mut columns = Vec::with_capacity(forest.n_trees());
    for tree in &forest.trees {
        match mdi_via_cfc(tree, data, subset, form) {
            Ok(c) => columns.push(c),
            Err(crate::Error::EmptySelection(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if columns.is_empty() {
        return Err(crate::Error::EmptySelection(format!(
            "no tree has {} rows",
            subset.name()
        )));
    }
    let form_name = match form {
        BridgeForm::Covariance => "cov",
        BridgeForm::RestrictedSum => "y1",
    };
    Ok(ImportanceReport::from_tree_columns(
        format!("mdi_cfc_{}_{}", form_name, subset.name()),
        serde_json::json!({ "subset": subset, "form": form }),
        forest.feature_names.clone(),
        columns,
    ))
}
