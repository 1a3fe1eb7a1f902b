#![allow(dead_code)]

use oobforest::{Arity, Dataset, Forest, ForestParams, Sampling};
use rand::Rng;

/// Binary-label dataset with a mix of continuous, integer-coded and
/// duplicated-value columns. Labels follow a random logistic rule and both
/// classes are present.
pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, p: usize) -> Dataset {
    loop {
        let kinds: Vec<u8> = (0..p).map(|_| rng.gen_range(0..3)).collect();
        let coef: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = kinds
                .iter()
                .map(|k| match k {
                    0 => rng.gen::<f64>(),
                    1 => rng.gen_range(0..4) as f64,
                    _ => (rng.gen::<f64>() * 10.0).round() / 10.0,
                })
                .collect();
            let z: f64 = row.iter().zip(&coef).map(|(x, c)| x * c).sum::<f64>() - 0.5;
            labels.push(usize::from(rng.gen::<f64>() < 1.0 / (1.0 + (-z).exp())));
            rows.push(row);
        }
        if labels.iter().all(|&y| y == labels[0]) {
            continue;
        }
        let names = (0..p).map(|j| format!("f{j}")).collect();
        return Dataset::new(rows, labels, 2, names, vec![Arity::Continuous; p]).unwrap();
    }
}

/// Random forest settings: tree count, mtry, leaf size, depth cap and
/// sampling scheme all vary.
pub fn random_params<R: Rng>(rng: &mut R, p: usize, max_trees: usize) -> ForestParams {
    let mut params = ForestParams::new(rng.gen_range(1..=max_trees), rng.gen_range(1..=p), rng.gen())
        .with_min_leaf(rng.gen_range(1..=3));
    if rng.gen_bool(0.3) {
        params = params.with_max_depth(Some(rng.gen_range(1..=6)));
    }
    if rng.gen_bool(0.25) {
        params = params.with_sampling(Sampling::Subsample { fraction: rng.gen_range(0.4..0.9) });
    }
    params
}

pub fn random_forest<R: Rng>(rng: &mut R, max_n: usize, max_p: usize, max_trees: usize) -> (Dataset, Forest) {
    let n = rng.gen_range(10..=max_n);
    let p = rng.gen_range(1..=max_p);
    let data = random_dataset(rng, n, p);
    let params = random_params(rng, p, max_trees);
    let forest = Forest::fit(&data, &params).unwrap();
    (data, forest)
}
