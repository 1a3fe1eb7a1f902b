//! Synthetic data for the simulation studies.

use rand::distributions::{Bernoulli, Distribution};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Arity, Dataset};
use crate::error::{Error, Result};
use crate::forest::ForestParams;

/// Category counts of the four multinomial predictors X2..X5.
pub const STROBL_CATEGORIES: [usize; 4] = [2, 4, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StroblCase {
    /// Labels independent of every predictor.
    Null,
    /// `P(y=1 | X2=1) = 0.35`, `P(y=1 | X2=2) = 0.65`.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StroblConfig {
    pub n: usize,
    pub case: StroblCase,
    pub reps: usize,
    pub forest: ForestParams,
}

impl StroblConfig {
    /// `n = 120`, 100 deep trees with `mtry = 2`.
    pub fn new(case: StroblCase, reps: usize) -> Self {
        StroblConfig {
            n: 120,
            case,
            reps,
            forest: ForestParams::new(100, 2, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 20 {
            return Err(Error::InvalidParameter(format!("n must be >= 20, got {}", self.n)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be >= 1".into()));
        }
        self.forest.validate(5)
    }
}

/// X1 uniform on [0, 1]; X2..X5 uniform on `1..=k` for k = 2, 4, 10, 20.
pub fn gen_strobl<R: Rng + ?Sized>(config: &StroblConfig, rng: &mut R) -> Result<Dataset> {
    config.validate()?;
    let n = config.n;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let low = Bernoulli::new(0.35).expect("valid probability");
    let high = Bernoulli::new(0.65).expect("valid probability");
    for _ in 0..n {
        let mut row = Vec::with_capacity(5);
        row.push(rng.gen::<f64>());
        for &k in &STROBL_CATEGORIES {
            row.push(rng.gen_range(1..=k) as f64);
        }
        let y = match config.case {
            StroblCase::Null => coin.sample(rng),
            StroblCase::Power if row[1] == 1.0 => low.sample(rng),
            StroblCase::Power => high.sample(rng),
        };
        labels.push(usize::from(y));
        rows.push(row);
    }
    let mut arity = vec![Arity::Continuous];
    for j in 1..5 {
        let mut seen: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        arity.push(Arity::Categorical(seen.len()));
    }
    Dataset::new(
        rows,
        labels,
        2,
        (1..=5).map(|j| format!("X{j}")).collect(),
        arity,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyConfig {
    pub n: usize,
    pub p: usize,
    pub n_relevant: usize,
    /// Relevant features are drawn from the first `relevant_pool` columns.
    pub relevant_pool: usize,
    pub reps: usize,
    pub forest: ForestParams,
    /// Keep this relevant set (0-based) in every repetition instead of
    /// drawing a new one.
    pub fixed_relevant: Option<Vec<usize>>,
}

impl NoisyConfig {
    /// 1000 rows, 50 features, 5 relevant among the first 10; 100 deep
    /// trees with `mtry = 3`.
    pub fn new(reps: usize) -> Self {
        NoisyConfig {
            n: 1000,
            p: 50,
            n_relevant: 5,
            relevant_pool: 10,
            reps,
            forest: ForestParams::new(100, 3, 0),
            fixed_relevant: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_relevant <= self.relevant_pool && self.relevant_pool <= self.p) {
            return Err(Error::InvalidParameter(
                "need n_relevant <= relevant_pool <= p".into(),
            ));
        }
        if self.n < 2 || self.reps == 0 {
            return Err(Error::InvalidParameter("need n >= 2 and reps >= 1".into()));
        }
        if let Some(s) = &self.fixed_relevant {
            if s.len() != self.n_relevant || s.iter().any(|&j| j >= self.p) {
                return Err(Error::InvalidParameter("bad fixed relevant set".into()));
            }
        }
        self.forest.validate(self.p)
    }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `P(y=1 | x) = logistic((2/5) sum_{j in S} x_j / j - 1)` with 1-based `j`;
/// `relevant` holds 0-based column indices.
pub fn noisy_probability(x: &[f64], relevant: &[usize]) -> f64 {
    let s: f64 = relevant.iter().map(|&j| x[j] / (j + 1) as f64).sum();
    logistic(0.4 * s - 1.0)
}

/// Feature `j` (1-based) uniform on `{0, ..., j}`; returns the data and the
/// sorted relevant set.
pub fn gen_noisy<R: Rng + ?Sized>(config: &NoisyConfig, rng: &mut R) -> Result<(Dataset, Vec<usize>)> {
    config.validate()?;
    let mut relevant = match &config.fixed_relevant {
        Some(s) => s.clone(),
        None => index::sample(rng, config.relevant_pool, config.n_relevant).into_vec(),
    };
    relevant.sort_unstable();
    let mut rows = Vec::with_capacity(config.n);
    let mut labels = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let row: Vec<f64> = (1..=config.p).map(|j| rng.gen_range(0..=j) as f64).collect();
        let prob = noisy_probability(&row, &relevant);
        labels.push(usize::from(rng.gen::<f64>() < prob));
        rows.push(row);
    }
    let ds = Dataset::new(
        rows,
        labels,
        2,
        (1..=config.p).map(|j| format!("X{j}")).collect(),
        vec![Arity::Continuous; config.p],
    )?;
    Ok((ds, relevant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::derived_rng;

    #[test]
    fn logistic_examples() {
        let s = [0, 2, 4, 6, 8];
        let mut x = vec![0.0; 10];
        for &j in &s {
            x[j] = (j + 1) as f64;
        }
        assert!((noisy_probability(&x, &s) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((noisy_probability(&vec![0.0; 10], &s) - 0.2689414213699951).abs() < 1e-15);
        // sum x_j / j = 2.5
        let mut x = vec![0.0; 10];
        x[0] = 1.0;
        x[2] = 3.0;
        x[4] = 2.5;
        assert_eq!(noisy_probability(&x, &[0, 2, 4]), 0.5);
    }

    #[test]
    fn noisy_shapes_and_ranges() {
        let mut cfg = NoisyConfig::new(1);
        cfg.n = 300;
        let (ds, s) = gen_noisy(&cfg, &mut derived_rng(1, 0)).unwrap();
        assert_eq!((ds.n(), ds.p()), (300, 50));
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|&j| j < 10));
        for j in 0..50 {
            let col = ds.column(j);
            assert!(col.iter().all(|&v| v >= 0.0 && v <= (j + 1) as f64 && v.fract() == 0.0));
        }
        cfg.fixed_relevant = Some(vec![9, 1, 2, 3, 4]);
        let (_, s) = gen_noisy(&cfg, &mut derived_rng(1, 0)).unwrap();
        assert_eq!(s, vec![1, 2, 3, 4, 9]);
    }

    #[test]
    fn strobl_arity_and_power() {
        let mut cfg = StroblConfig::new(StroblCase::Power, 1);
        cfg.n = 20_000;
        let ds = gen_strobl(&cfg, &mut derived_rng(2, 0)).unwrap();
        assert_eq!(
            ds.arity(),
            &[Arity::Continuous, Arity::Categorical(2), Arity::Categorical(4), Arity::Categorical(10), Arity::Categorical(20)]
        );
        let y = ds.labels();
        let (mut hits, mut total) = (0usize, 0usize);
        for i in 0..ds.n() {
            if ds.value(i, 1) == 2.0 {
                total += 1;
                hits += y[i];
            }
        }
        let p = hits as f64 / total as f64;
        let se = (0.65 * 0.35 / total as f64).sqrt();
        assert!((p - 0.65).abs() < 4.0 * se, "{p}");
    }

    #[test]
    fn strobl_null_is_uncorrelated() {
        let cfg = StroblConfig::new(StroblCase::Null, 1);
        let reps = 200;
        let mut mean_corr = vec![0.0; 5];
        for r in 0..reps {
            let ds = gen_strobl(&cfg, &mut derived_rng(3, r)).unwrap();
            let y = ds.binary_labels().unwrap();
            for (j, m) in mean_corr.iter_mut().enumerate() {
                *m += corr(&ds.column(j), &y) / reps as f64;
            }
        }
        // each correlation has sd about 1/sqrt(n); the mean over reps shrinks further
        let bound = 3.0 / (cfg.n as f64).sqrt() / (reps as f64).sqrt();
        for m in mean_corr {
            assert!(m.abs() < bound, "{m}");
        }
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn config_validation() {
        let mut cfg = StroblConfig::new(StroblCase::Null, 1);
        cfg.n = 10;
        assert!(gen_strobl(&cfg, &mut derived_rng(0, 0)).is_err());
        let mut cfg = NoisyConfig::new(1);
        cfg.n_relevant = 11;
        assert!(cfg.validate().is_err());
    }
}
