//! Noisy-feature identification: AUC of each importance score against the
//! known relevant set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generators::{gen_noisy, NoisyConfig};
use super::methods::{Method, Scorer};
use super::metrics::auc;
use super::output::{Metadata, ScoreRow, StudyOutput};
use super::stats::mean_and_se;
use crate::error::Result;
use crate::explain::Selection;
use crate::forest::{derived_rng, Forest};

/// The scores compared in the noisy-feature study. SHAP variants use the
/// inbag cover and are listed both as mean |SHAP| and label-weighted.
pub fn noisy_methods() -> Vec<Method> {
    vec![
        Method::pg(1.0, 0.0, true),
        Method::pg(1.0, 0.0, false),
        Method::pg(0.5, 1.0, true),
        Method::pg(0.5, 1.0, false),
        Method::shap(Selection::All),
        Method::shap(Selection::Inbag),
        Method::shap(Selection::Oob),
        Method::wshap(Selection::All),
        Method::wshap(Selection::Inbag),
        Method::wshap(Selection::Oob),
        Method::Mda { n_permutations: 1 },
        Method::Mdi,
        Method::MdiOob,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyResult {
    pub methods: Vec<String>,
    /// `auc[method][rep]`.
    pub auc: Vec<Vec<f64>>,
    /// Relevant set (0-based) of each repetition.
    pub relevant: Vec<Vec<usize>>,
    pub rows: Vec<ScoreRow>,
}

impl NoisyResult {
    pub fn method_index(&self, method: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == method)
    }

    /// Mean AUC and its standard error.
    pub fn mean_auc(&self, method: &str) -> Option<(f64, f64)> {
        Some(mean_and_se(&self.auc[self.method_index(method)?]))
    }

    /// Methods ordered by decreasing mean AUC.
    pub fn ranking(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .methods
            .iter()
            .zip(&self.auc)
            .map(|(m, a)| (m.clone(), mean_and_se(a).0))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        out
    }

    pub fn to_output(&self, config: &NoisyConfig, seed: u64) -> StudyOutput {
        let summary: serde_json::Map<String, serde_json::Value> = self
            .methods
            .iter()
            .zip(&self.auc)
            .map(|(m, a)| {
                let (mean, se) = mean_and_se(a);
                (m.clone(), serde_json::json!({ "auc_mean": mean, "auc_se": se, "auc": a }))
            })
            .collect();
        StudyOutput {
            meta: Metadata::new("noisy", seed, serde_json::to_value(config).expect("config serializes")),
            rows: self.rows.clone(),
            summary: serde_json::json!({ "methods": summary, "relevant": self.relevant }),
        }
    }
}

/// Repetition `r` draws its data from stream `r` of `seed`.
pub fn run_noisy(config: &NoisyConfig, methods: &[Method], seed: u64) -> Result<NoisyResult> {
    config.validate()?;
    let mut auc_table = vec![Vec::with_capacity(config.reps); methods.len()];
    let mut relevant_sets = Vec::with_capacity(config.reps);
    let mut rows = Vec::new();
    for rep in 0..config.reps {
        let mut rng = derived_rng(seed, rep as u64);
        let (data, relevant) = gen_noisy(config, &mut rng)?;
        let mut params = config.forest.clone();
        params.seed = rng.gen();
        let forest = Forest::fit(&data, &params)?;
        let mut scorer = Scorer::new(&forest, &data);
        let labels: Vec<bool> = (0..data.p()).map(|j| relevant.contains(&j)).collect();
        for (m, method) in methods.iter().enumerate() {
            let report = scorer.score(method, &mut rng)?;
            auc_table[m].push(auc(&report.scores, &labels)?);
            rows.extend(report.feature_names.iter().zip(&report.scores).map(|(f, &s)| ScoreRow {
                rep,
                method: report.method.clone(),
                feature: f.clone(),
                score: s,
            }));
        }
        log::info!("noisy rep {rep}: done");
        relevant_sets.push(relevant);
    }
    Ok(NoisyResult {
        methods: methods.iter().map(|m| m.to_string()).collect(),
        auc: auc_table,
        relevant: relevant_sets,
        rows,
    })
}
