//! Titanic study: importance scores of a forest on passenger data that
//! includes the uninformative `PassengerId` column, averaged over seeds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::methods::{Method, Scorer};
use super::output::{Metadata, ScoreRow, StudyOutput};
use super::stats::mean_and_se;
use crate::data::{load_titanic, Dataset, LoadSummary};
use crate::error::{Error, Result};
use crate::forest::{derived_rng, Forest, ForestParams};
use crate::importance::ImportanceReport;

pub const ID_COLUMN: &str = "PassengerId";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitanicConfig {
    pub n_trees: usize,
    pub mtry: usize,
    pub seeds: Vec<u64>,
    /// Also rerun with the ID column shuffled.
    pub shuffle_id: bool,
}

impl TitanicConfig {
    /// 100 trees, `mtry = 2`, seeds `0..10`.
    pub fn new() -> Self {
        TitanicConfig {
            n_trees: 100,
            mtry: 2,
            seeds: (0..10).collect(),
            shuffle_id: false,
        }
    }
}

impl Default for TitanicConfig {
    fn default() -> Self {
        TitanicConfig::new()
    }
}

pub fn titanic_methods() -> Vec<Method> {
    [
        "mdi",
        "mda",
        "mdi_oob",
        "pg:0.5:1",
        "pg:0.5:1:corrected",
        "cfc:inbag:all",
        "cfc:oob:all",
        "shap:inbag:inbag",
        "shap:inbag:oob",
        "wshap:inbag:inbag",
        "wshap:inbag:oob",
        "mdi_cfc:inbag:cov",
        "mdi_cfc:oob:cov",
        "mdi_cfc:inbag:y1",
        "mdi_cfc:oob:y1",
    ]
    .iter()
    .map(|s| s.parse().expect("built-in method names parse"))
    .collect()
}

/// Seed-averaged scores of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAverage {
    pub method: String,
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    /// Standard error across seed means.
    pub se_seeds: Vec<f64>,
    /// Standard error across all per-tree values of all seeds, when the
    /// method has per-tree scores.
    pub se_trees: Option<Vec<f64>>,
}

impl SeedAverage {
    fn from_reports(reports: &[&ImportanceReport]) -> SeedAverage {
        let p = reports[0].scores.len();
        let mut mean = vec![0.0; p];
        let mut se_seeds = vec![0.0; p];
        for k in 0..p {
            let col: Vec<f64> = reports.iter().map(|r| r.scores[k]).collect();
            (mean[k], se_seeds[k]) = mean_and_se(&col);
        }
        let se_trees = reports.iter().all(|r| r.per_tree.is_some()).then(|| {
            (0..p)
                .map(|k| {
                    let pooled: Vec<f64> = reports
                        .iter()
                        .flat_map(|r| r.per_tree.as_ref().expect("checked")[k].iter().copied())
                        .collect();
                    mean_and_se(&pooled).1
                })
                .collect()
        });
        SeedAverage {
            method: reports[0].method.clone(),
            feature_names: reports[0].feature_names.clone(),
            mean,
            se_seeds,
            se_trees,
        }
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Share of `feature` in the sum of absolute mean scores.
    pub fn share(&self, feature: &str) -> Option<f64> {
        let k = self.feature_index(feature)?;
        let total: f64 = self.mean.iter().map(|v| v.abs()).sum();
        Some(self.mean[k].abs() / total)
    }

    /// `feature`'s mean score relative to the largest mean score.
    pub fn ratio_to_top(&self, feature: &str) -> Option<f64> {
        let k = self.feature_index(feature)?;
        let top = self.mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(self.mean[k] / top)
    }

    pub fn top_feature(&self) -> &str {
        let mut best = 0;
        for (k, &v) in self.mean.iter().enumerate() {
            if v > self.mean[best] {
                best = k;
            }
        }
        &self.feature_names[best]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitanicResult {
    pub load: Option<LoadSummary>,
    pub n_rows: usize,
    /// `reports[seed_index][method]`.
    pub reports: Vec<Vec<ImportanceReport>>,
    pub averages: Vec<SeedAverage>,
    pub shuffled_id: Option<Box<TitanicResult>>,
}

impl TitanicResult {
    pub fn average(&self, method: &str) -> Option<&SeedAverage> {
        self.averages.iter().find(|a| a.method == method)
    }

    pub fn to_output(&self, config: &TitanicConfig, seed: u64) -> StudyOutput {
        let mut rows = Vec::new();
        for (rep, reports) in self.reports.iter().enumerate() {
            for r in reports {
                for (f, &s) in r.feature_names.iter().zip(&r.scores) {
                    rows.push(ScoreRow { rep, method: r.method.clone(), feature: f.clone(), score: s });
                }
            }
        }
        let summary = serde_json::json!({
            "n_rows": self.n_rows,
            "load": self.load,
            "averages": self.averages,
            "shuffled_id_averages": self.shuffled_id.as_ref().map(|s| &s.averages),
        });
        StudyOutput {
            meta: Metadata::new("titanic", seed, serde_json::to_value(config).expect("config serializes")),
            rows,
            summary,
        }
    }
}

/// Load a Kaggle-style passenger file and run [`run_titanic_on`].
pub fn run_titanic(path: impl AsRef<Path>, config: &TitanicConfig) -> Result<TitanicResult> {
    let (data, load) = load_titanic(path)?;
    let mut result = run_titanic_on(&data, config)?;
    result.load = Some(load);
    Ok(result)
}

pub fn run_titanic_on(data: &Dataset, config: &TitanicConfig) -> Result<TitanicResult> {
    if config.seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    let methods = titanic_methods();
    let mut reports = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let params = ForestParams::new(config.n_trees, config.mtry, seed);
        let forest = Forest::fit(data, &params)?;
        let mut scorer = Scorer::new(&forest, data);
        let mut rng = derived_rng(seed, u64::MAX);
        let per_seed = methods
            .iter()
            .map(|m| scorer.score(m, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        reports.push(per_seed);
    }
    let averages = (0..methods.len())
        .map(|m| {
            let col: Vec<&ImportanceReport> = reports.iter().map(|r| &r[m]).collect();
            SeedAverage::from_reports(&col)
        })
        .collect();
    let shuffled_id = if config.shuffle_id {
        let j = data
            .column_index(ID_COLUMN)
            .ok_or_else(|| Error::MissingColumn(ID_COLUMN.into()))?;
        let mut rng = derived_rng(config.seeds[0], u64::MAX - 1);
        let shuffled = data.with_shuffled_column(j, &mut rng);
        let inner = TitanicConfig {
            shuffle_id: false,
            ..config.clone()
        };
        Some(Box::new(run_titanic_on(&shuffled, &inner)?))
    } else {
        None
    };
    Ok(TitanicResult {
        load: None,
        n_rows: data.n(),
        reports,
        averages,
        shuffled_id,
    })
}
