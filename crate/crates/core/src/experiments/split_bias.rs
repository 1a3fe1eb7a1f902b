//! Monte-Carlo check of the OOB Gini decrease on an uninformative split.
//!
//! A parent node holds `N_m` OOB labels drawn i.i.d. Bernoulli(p). The split
//! variable is independent of the labels, so the left child receives
//! `N_l ~ Binomial(N_m, 1/2)` of them, redrawn until both children hold at
//! least two rows. Child weights are the OOB fractions `N_c / N_m`, which is
//! what inbag weights reduce to when OOB counts are proportional to inbag
//! counts. The impurity is the single-class `p (1 - p)`, optionally scaled
//! by `N / (N - 1)`.

use rand::distributions::{Bernoulli, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::output::{Metadata, ScoreRow, StudyOutput};
use super::stats::mean_and_se;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitBiasConfig {
    /// Parent OOB counts `N_m`.
    pub node_sizes: Vec<usize>,
    pub reps: usize,
    /// Label probability.
    pub p: f64,
    /// OOB-to-inbag count ratio, recorded for the implied inbag sizes.
    pub oob_ratio: f64,
}

impl SplitBiasConfig {
    pub fn new(node_sizes: Vec<usize>, reps: usize) -> Self {
        SplitBiasConfig {
            node_sizes,
            reps,
            p: 0.5,
            oob_ratio: 0.368,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_sizes.iter().any(|&n| n < 4) {
            return Err(Error::InvalidParameter("node sizes must be >= 4".into()));
        }
        if self.reps < 2 {
            return Err(Error::InvalidParameter("reps must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.p) || !(self.oob_ratio > 0.0 && self.oob_ratio <= 1.0) {
            return Err(Error::InvalidParameter("p must be in [0,1], oob_ratio in (0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitBiasRow {
    pub node_size: usize,
    /// `N_m / oob_ratio`.
    pub implied_inbag_size: f64,
    /// `p (1 - p) / N_m`.
    pub target: f64,
    pub uncorrected_mean: f64,
    pub uncorrected_se: f64,
    pub corrected_mean: f64,
    pub corrected_se: f64,
}

fn gini(ones: usize, n: usize) -> f64 {
    let p = ones as f64 / n as f64;
    p * (1.0 - p)
}

/// Uncorrected and corrected decrease for one simulated split.
pub fn simulate_split<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> (f64, f64) {
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let label = Bernoulli::new(p).expect("valid probability");
    let n_left = loop {
        let k = (0..n).filter(|_| coin.sample(rng)).count();
        if k >= 2 && k + 2 <= n {
            break k;
        }
    };
    let ys: Vec<bool> = (0..n).map(|_| label.sample(rng)).collect();
    let ones_left = ys[..n_left].iter().filter(|&&y| y).count();
    let ones = ys.iter().filter(|&&y| y).count();
    let n_right = n - n_left;
    let parts = [(ones, n), (ones_left, n_left), (ones - ones_left, n_right)];
    let [g, gl, gr] = parts.map(|(o, m)| gini(o, m));
    let [c, cl, cr] = parts.map(|(_, m)| m as f64 / (m as f64 - 1.0));
    let (wl, wr) = (n_left as f64 / n as f64, n_right as f64 / n as f64);
    let uncorrected = g - wl * gl - wr * gr;
    let corrected = c * g - wl * cl * gl - wr * cr * gr;
    (uncorrected, corrected)
}

pub fn run_null_split_bias<R: Rng + ?Sized>(config: &SplitBiasConfig, rng: &mut R) -> Result<Vec<SplitBiasRow>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.node_sizes.len());
    for &n in &config.node_sizes {
        let (mut unc, mut cor) = (Vec::with_capacity(config.reps), Vec::with_capacity(config.reps));
        for _ in 0..config.reps {
            let (u, c) = simulate_split(n, config.p, rng);
            unc.push(u);
            cor.push(c);
        }
        let (um, us) = mean_and_se(&unc);
        let (cm, cs) = mean_and_se(&cor);
        out.push(SplitBiasRow {
            node_size: n,
            implied_inbag_size: n as f64 / config.oob_ratio,
            target: config.p * (1.0 - config.p) / n as f64,
            uncorrected_mean: um,
            uncorrected_se: us,
            corrected_mean: cm,
            corrected_se: cs,
        });
    }
    Ok(out)
}

pub fn split_bias_output(config: &SplitBiasConfig, rows: &[SplitBiasRow], seed: u64) -> StudyOutput {
    let mut long = Vec::new();
    for r in rows {
        for (method, score) in [
            ("uncorrected_mean", r.uncorrected_mean),
            ("uncorrected_se", r.uncorrected_se),
            ("corrected_mean", r.corrected_mean),
            ("corrected_se", r.corrected_se),
            ("target", r.target),
        ] {
            long.push(ScoreRow {
                rep: 0,
                method: method.into(),
                feature: format!("N{}", r.node_size),
                score,
            });
        }
    }
    StudyOutput {
        meta: Metadata::new("splitbias", seed, serde_json::to_value(config).expect("config serializes")),
        rows: long,
        summary: serde_json::to_value(rows).expect("rows serialize"),
    }
}
