//! Null and power simulations with mixed-cardinality predictors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generators::{gen_strobl, StroblConfig};
use super::methods::{Method, Scorer};
use super::output::{Metadata, ScoreRow, StudyOutput};
use super::stats::{mean_and_se, median, median_se, quantile};
use crate::error::Result;
use crate::explain::Selection;
use crate::forest::{derived_rng, Forest};

pub fn null_power_methods() -> Vec<Method> {
    vec![
        Method::Mdi,
        Method::shap(Selection::All),
        Method::pg(0.5, 1.0, false),
        Method::pg(0.5, 1.0, true),
        Method::wshap(Selection::All),
        Method::wshap(Selection::Oob),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub median_se: f64,
    pub mean: f64,
    pub mean_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullPowerResult {
    pub methods: Vec<String>,
    pub features: Vec<String>,
    /// `scores[method][rep][feature]`.
    pub scores: Vec<Vec<Vec<f64>>>,
}

impl NullPowerResult {
    fn method_index(&self, method: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == method)
    }

    /// Scores of one feature across repetitions.
    pub fn column(&self, method: &str, feature: usize) -> Option<Vec<f64>> {
        let m = self.method_index(method)?;
        Some(self.scores[m].iter().map(|rep| rep[feature]).collect())
    }

    pub fn summary(&self, method: &str, feature: usize) -> Option<FeatureSummary> {
        let col = self.column(method, feature)?;
        let (mean, mean_se) = mean_and_se(&col);
        Some(FeatureSummary {
            median: median(&col),
            q1: quantile(&col, 0.25),
            q3: quantile(&col, 0.75),
            median_se: median_se(&col),
            mean,
            mean_se,
        })
    }

    /// Share of repetitions in which `feature` has the strictly highest score.
    pub fn top_fraction(&self, method: &str, feature: usize) -> Option<f64> {
        let m = self.method_index(method)?;
        let reps = &self.scores[m];
        let hits = reps
            .iter()
            .filter(|s| s.iter().enumerate().all(|(k, &v)| k == feature || v < s[feature]))
            .count();
        Some(hits as f64 / reps.len() as f64)
    }

    pub fn to_output(&self, study: &str, config: &StroblConfig, seed: u64) -> StudyOutput {
        let mut rows = Vec::new();
        for (m, method) in self.methods.iter().enumerate() {
            for (rep, scores) in self.scores[m].iter().enumerate() {
                for (f, &s) in self.features.iter().zip(scores) {
                    rows.push(ScoreRow { rep, method: method.clone(), feature: f.clone(), score: s });
                }
            }
        }
        let mut summary = serde_json::Map::new();
        for method in &self.methods {
            let per_feature: serde_json::Map<String, serde_json::Value> = self
                .features
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    let s = self.summary(method, k).expect("known method");
                    let mut v = serde_json::to_value(s).expect("summary serializes");
                    v["top_fraction"] = self.top_fraction(method, k).expect("known method").into();
                    (f.clone(), v)
                })
                .collect();
            summary.insert(method.clone(), per_feature.into());
        }
        StudyOutput {
            meta: Metadata::new(study, seed, serde_json::to_value(config).expect("config serializes")),
            rows,
            summary: summary.into(),
        }
    }
}

pub fn run_null_power(config: &StroblConfig, methods: &[Method], seed: u64) -> Result<NullPowerResult> {
    config.validate()?;
    let mut scores = vec![Vec::with_capacity(config.reps); methods.len()];
    let mut features = Vec::new();
    for rep in 0..config.reps {
        let mut rng = derived_rng(seed, rep as u64);
        let data = gen_strobl(config, &mut rng)?;
        let mut params = config.forest.clone();
        params.seed = rng.gen();
        let forest = Forest::fit(&data, &params)?;
        let mut scorer = Scorer::new(&forest, &data);
        for (m, method) in methods.iter().enumerate() {
            scores[m].push(scorer.score(method, &mut rng)?.scores);
        }
        features = data.column_names().to_vec();
    }
    Ok(NullPowerResult {
        methods: methods.iter().map(|m| m.to_string()).collect(),
        features,
        scores,
    })
}
