//! Self-checks exposed through the command line: analytic loss gradients
//! against finite differences, and the clustering operations against
//! brute-force recomputation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cluster::{assign, chi2_scores, update_centroid, ClusterModel};
use crate::error::Result;
use crate::loss::{default_alpha, layer_aware_grad, layer_aware_loss, Pair, PairBatch};

/// Finite-difference step of the gradient check.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub batches: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Random multi-layer batches. Pairs whose squared distance lies within
/// `1e-3` of the margin are redrawn, since the loss has a kink there.
pub fn random_batches(rng: &mut impl Rng, delta: f64) -> Vec<PairBatch> {
    let layers = rng.gen_range(1..=3);
    (0..layers)
        .map(|_| {
            let dim = rng.gen_range(1..=4);
            let n = rng.gen_range(1..=5);
            let pairs = (0..n)
                .map(|_| loop {
                    let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
                    if (d - delta).abs() >= 1e-3 {
                        break Pair {
                            a,
                            b,
                            same_class: rng.gen_bool(0.5),
                        };
                    }
                })
                .collect();
            PairBatch { pairs }
        })
        .collect()
}

pub fn loss_gradient_check(batches: usize, seed: u64, delta: f64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coordinates = 0;
    let mut max_rel_error: f64 = 0.0;
    for _ in 0..batches {
        let mut b = random_batches(&mut rng, delta);
        let w = default_alpha(b.len())?;
        let grad = layer_aware_grad(&b, &w, delta)?;
        for l in 0..b.len() {
            for p in 0..b[l].pairs.len() {
                for side in 0..2 {
                    for c in 0..b[l].pairs[p].a.len() {
                        let x0 = *coord_mut(&mut b, l, p, side, c);
                        *coord_mut(&mut b, l, p, side, c) = x0 + FD_STEP;
                        let up = layer_aware_loss(&b, &w, delta)?;
                        *coord_mut(&mut b, l, p, side, c) = x0 - FD_STEP;
                        let down = layer_aware_loss(&b, &w, delta)?;
                        *coord_mut(&mut b, l, p, side, c) = x0;
                        let numeric = (up - down) / (2.0 * FD_STEP);
                        let (ga, gb) = &grad[l][p];
                        let analytic = if side == 0 { ga[c] } else { gb[c] };
                        max_rel_error = max_rel_error.max(relative_error(analytic, numeric));
                        coordinates += 1;
                    }
                }
            }
        }
    }
    Ok(GradCheck {
        batches,
        coordinates,
        max_rel_error,
    })
}

fn coord_mut(b: &mut [PairBatch], layer: usize, pair: usize, side: usize, c: usize) -> &mut f64 {
    let p = &mut b[layer].pairs[pair];
    if side == 0 {
        &mut p.a[c]
    } else {
        &mut p.b[c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterCheck {
    pub instances: usize,
    pub mismatches: usize,
    pub chi2_max_abs_error: f64,
}

/// A random model with `n <= 5` centroids over `k <= 8` of `d` features,
/// and a sample to place.
pub fn random_instance(rng: &mut impl Rng) -> (ClusterModel, Vec<f64>) {
    let n = rng.gen_range(2..=5);
    let k = rng.gen_range(1..=8);
    let d = k + rng.gen_range(0..=3);
    let mut cols: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        cols.swap(i, rng.gen_range(0..=i));
    }
    cols.truncate(k);
    let centroids = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    let counts = (0..n).map(|_| rng.gen_range(1..10)).collect();
    let labels = (0..n).collect();
    let model = ClusterModel::from_parts(cols, centroids, counts, labels).expect("valid random model");
    let x = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
    (model, x)
}

/// Compares `assign`, `utility_of` and `update_centroid` with direct
/// recomputation, and chi-squared scores with an explicit contingency table.
pub fn cluster_oracle_check(instances: usize, seed: u64) -> Result<ClusterCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut chi2_max_abs_error: f64 = 0.0;
    for _ in 0..instances {
        let (mut model, x) = random_instance(&mut rng);
        let xr: Vec<f64> = model.feature_indices().iter().map(|&j| x[j]).collect();
        let mut dist: Vec<(f64, usize)> = model
            .centroids()
            .iter()
            .enumerate()
            .map(|(i, c)| (c.iter().zip(&xr).map(|(a, b)| (a - b).abs()).sum(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got = assign(&model, &x)?;
        if got.nearest != dist[0].1 || got.d_a != dist[0].0 || got.d_b != dist[1].0 || got.utility != dist[1].0 - dist[0].0 {
            mismatches += 1;
        }

        let i = got.nearest;
        let n = (model.counts()[i] + 1) as f64;
        let expect: Vec<f64> = model.centroids()[i].iter().zip(&xr).map(|(c, v)| c + (v - c) / n).collect();
        let before = model.centroids().to_vec();
        update_centroid(&mut model, &got, &x)?;
        let others_same = (0..model.n_clusters()).all(|j| j == i || model.centroids()[j] == before[j]);
        if model.centroids()[i] != expect || !others_same {
            mismatches += 1;
        }

        let rows = rng.gen_range(2..=8);
        let cols = rng.gen_range(1..=5);
        let feats: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(0.0..10.0)).collect())
            .collect();
        let mut labels: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..3)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores = chi2_scores(&feats, &labels)?;
        for (j, s) in scores.scores.iter().enumerate() {
            chi2_max_abs_error = chi2_max_abs_error.max((s - contingency_chi2(&feats, &labels, j)).abs());
        }
    }
    Ok(ClusterCheck {
        instances,
        mismatches,
        chi2_max_abs_error,
    })
}

/// Chi-squared statistic of column `j` from a class-by-feature table of
/// observed sums.
fn contingency_chi2(feats: &[Vec<f64>], labels: &[usize], j: usize) -> f64 {
    let classes: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    let total: f64 = feats.iter().map(|r| r[j]).sum();
    if total == 0.0 {
        return 0.0;
    }
    let n = feats.len() as f64;
    classes
        .iter()
        .map(|&c| {
            let members = labels.iter().filter(|&&l| l == c).count() as f64;
            let observed: f64 = feats.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| r[j]).sum();
            let expected = members / n * total;
            (observed - expected).powi(2) / expected
        })
        .sum()
}
