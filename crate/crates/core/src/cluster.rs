//! Seeded k-means with chi-squared feature selection and the distance-gap
//! utility used for early exit.
//!
//! Centroids start as class means of labelled seeds and then follow a
//! running mean as unlabelled samples are assigned to them. Distances are
//! Manhattan over the selected feature columns only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chi-squared relevance of each feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct Chi2Scores {
    pub scores: Vec<f64>,
    /// Columns that held negative values and were shifted by their minimum
    /// before scoring.
    pub shifted: Vec<bool>,
}

/// Scores every column of `features` (rows are samples) against `labels`.
///
/// Per class `c` and feature `j` the observed count is the feature sum over
/// the class; the expectation is the class's share of samples times the
/// feature's total.
pub fn chi2_scores(features: &[Vec<f64>], labels: &[usize]) -> Result<Chi2Scores> {
    if features.len() < 2 {
        return Err(Error::invalid("chi-squared scoring needs at least two samples"));
    }
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            found: labels.len(),
        });
    }
    let d = features[0].len();
    if d == 0 {
        return Err(Error::invalid("samples have no features"));
    }
    for row in features {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features must be finite"));
        }
    }

    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid("chi-squared scoring needs at least two classes"));
    }
    let class_of = |label: usize| classes.binary_search(&label).unwrap();

    let n = features.len() as f64;
    let mut class_sizes = vec![0usize; classes.len()];
    for &l in labels {
        class_sizes[class_of(l)] += 1;
    }

    let mut scores = Vec::with_capacity(d);
    let mut shifted = Vec::with_capacity(d);
    for j in 0..d {
        let min = features.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let offset = if min < 0.0 { -min } else { 0.0 };
        shifted.push(min < 0.0);

        let mut observed = vec![0.0; classes.len()];
        for (row, &l) in features.iter().zip(labels) {
            observed[class_of(l)] += row[j] + offset;
        }
        let total: f64 = observed.iter().sum();
        if total == 0.0 {
            scores.push(0.0);
            continue;
        }
        let score = observed
            .iter()
            .zip(&class_sizes)
            .map(|(&o, &size)| {
                let expected = size as f64 / n * total;
                (o - expected).powi(2) / expected
            })
            .sum();
        scores.push(score);
    }
    Ok(Chi2Scores { scores, shifted })
}

/// Indices of the `k` highest scores, highest first; ties go to the lower
/// index.
pub fn select_top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={}",
            scores.len()
        )));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// Result of placing a sample against the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub nearest: usize,
    pub d_a: f64,
    pub d_b: f64,
    pub utility: f64,
}

/// Centroids over a subset of feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    feature_indices: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    counts: Vec<u64>,
    labels: Vec<usize>,
}

impl ClusterModel {
    /// Assembles a model from parts, checking shape invariants.
    pub fn from_parts(
        feature_indices: Vec<usize>,
        centroids: Vec<Vec<f64>>,
        counts: Vec<u64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let model = ClusterModel {
            feature_indices,
            centroids,
            counts,
            labels,
        };
        model.validate()?;
        Ok(model)
    }

    /// Re-checks invariants, e.g. after deserialising.
    pub fn validate(&self) -> Result<()> {
        let k = self.feature_indices.len();
        if k == 0 {
            return Err(Error::invalid("model selects no features"));
        }
        let mut sorted = self.feature_indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k {
            return Err(Error::invalid("feature indices must be distinct"));
        }
        if self.centroids.len() < 2 {
            return Err(Error::invalid("a model needs at least two centroids"));
        }
        if self.counts.len() != self.centroids.len() || self.labels.len() != self.centroids.len() {
            return Err(Error::invalid("centroids, counts and labels differ in length"));
        }
        for c in &self.centroids {
            if c.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("centroids must be finite"));
            }
        }
        if self.counts.iter().any(|&c| c == 0) {
            return Err(Error::invalid("centroid counts must be at least one"));
        }
        Ok(())
    }

    pub fn feature_indices(&self) -> &[usize] {
        &self.feature_indices
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    /// Minimum length of a full feature vector accepted by [`assign`].
    pub fn input_dim(&self) -> usize {
        self.feature_indices.iter().max().map_or(0, |m| m + 1)
    }

    fn restrict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() < self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector must be finite"));
        }
        Ok(self.feature_indices.iter().map(|&i| x[i]).collect())
    }
}

/// One centroid per class: the mean of that class's seeds restricted to
/// `feature_indices`.
pub fn init_seeded(seeds: &[(usize, Vec<Vec<f64>>)], feature_indices: &[usize]) -> Result<ClusterModel> {
    let mut centroids = Vec::with_capacity(seeds.len());
    let mut counts = Vec::with_capacity(seeds.len());
    let mut labels = Vec::with_capacity(seeds.len());
    let need = feature_indices.iter().max().map_or(0, |m| m + 1);
    for (label, group) in seeds {
        if group.is_empty() {
            return Err(Error::invalid(format!("class {label} has no seeds")));
        }
        let mut sum = vec![0.0; feature_indices.len()];
        for s in group {
            if s.len() < need {
                return Err(Error::DimensionMismatch {
                    expected: need,
                    found: s.len(),
                });
            }
            for (acc, &i) in sum.iter_mut().zip(feature_indices) {
                *acc += s[i];
            }
        }
        let n = group.len() as f64;
        centroids.push(sum.into_iter().map(|v| v / n).collect());
        counts.push(group.len() as u64);
        labels.push(*label);
    }
    ClusterModel::from_parts(feature_indices.to_vec(), centroids, counts, labels)
}

fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Nearest and second-nearest centroid distances and their gap.
pub fn assign(model: &ClusterModel, x: &[f64]) -> Result<Assignment> {
    let xr = model.restrict(x)?;
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (i, c) in model.centroids.iter().enumerate() {
        let d = manhattan(&xr, c);
        if d < best.1 {
            second = best.1;
            best = (i, d);
        } else if d < second {
            second = d;
        }
    }
    Ok(Assignment {
        nearest: best.0,
        d_a: best.1,
        d_b: second,
        utility: second - best.1,
    })
}

/// Folds `x` into the running mean of its nearest centroid.
pub fn update_centroid(model: &mut ClusterModel, assignment: &Assignment, x: &[f64]) -> Result<()> {
    let xr = model.restrict(x)?;
    let i = assignment.nearest;
    if i >= model.n_clusters() {
        return Err(Error::invalid(format!("centroid {i} does not exist")));
    }
    model.counts[i] += 1;
    let n = model.counts[i] as f64;
    for (c, v) in model.centroids[i].iter_mut().zip(&xr) {
        *c += (v - *c) / n;
    }
    Ok(())
}

/// Utility of `x` under `model`; see [`assign`].
pub fn utility_of(model: &ClusterModel, x: &[f64]) -> Result<f64> {
    assign(model, x).map(|a| a.utility)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_model() -> ClusterModel {
        ClusterModel::from_parts(vec![0, 1], vec![vec![0.0, 0.0], vec![4.0, 4.0]], vec![1, 1], vec![0, 1])
            .unwrap()
    }

    #[test]
    fn chi2_constant_feature_scores_zero() {
        let f = vec![vec![3.0], vec![3.0], vec![3.0], vec![3.0]];
        let s = chi2_scores(&f, &[0, 0, 1, 1]).unwrap();
        assert_eq!(s.scores, vec![0.0]);
    }

    #[test]
    fn chi2_discriminative_beats_useless() {
        let f = vec![vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]];
        let s = chi2_scores(&f, &[0, 0, 1, 1]).unwrap();
        assert!(s.scores[0] > s.scores[1]);
        assert_eq!(s.scores[1], 0.0);
    }

    #[test]
    fn chi2_hand_values() {
        let f = vec![vec![2.0, 1.0], vec![4.0, 1.0], vec![0.0, 3.0], vec![0.0, 5.0]];
        let s = chi2_scores(&f, &[0, 0, 1, 1]).unwrap();
        assert!((s.scores[0] - 6.0).abs() < 1e-12);
        assert!((s.scores[1] - 3.6).abs() < 1e-12);
    }

    #[test]
    fn chi2_errors_and_shift() {
        assert!(chi2_scores(&[vec![1.0], vec![2.0]], &[0, 0]).is_err());
        assert!(chi2_scores(&[vec![1.0]], &[0]).is_err());
        let s = chi2_scores(&[vec![0.0, -1.0], vec![0.0, 1.0]], &[0, 1]).unwrap();
        assert_eq!(s.scores[0], 0.0);
        assert_eq!(s.shifted, vec![false, true]);
        assert!(s.scores[1] > 0.0);
    }

    #[test]
    fn top_k() {
        assert_eq!(select_top_k(&[3.0, 1.0, 2.0], 2).unwrap(), vec![0, 2]);
        assert_eq!(select_top_k(&[1.0, 1.0, 1.0], 2).unwrap(), vec![0, 1]);
        assert_eq!(select_top_k(&[0.5, 0.5, 0.9, 0.1], 3).unwrap(), vec![2, 0, 1]);
        assert!(select_top_k(&[1.0], 0).is_err());
        assert!(select_top_k(&[1.0], 2).is_err());
    }

    #[test]
    fn seeded_means() {
        let m = init_seeded(
            &[(0, vec![vec![0.0, 0.0], vec![2.0, 2.0]]), (1, vec![vec![5.0, 1.0]])],
            &[0, 1],
        )
        .unwrap();
        assert_eq!(m.centroids()[0], vec![1.0, 1.0]);
        assert_eq!(m.counts(), &[2, 1]);
        assert_eq!(m.centroids()[1], vec![5.0, 1.0]);
        assert!(init_seeded(&[(0, vec![vec![1.0]]), (1, vec![])], &[0]).is_err());
    }

    #[test]
    fn assign_examples() {
        let m = two_point_model();
        let a = assign(&m, &[1.0, 0.0]).unwrap();
        assert_eq!((a.nearest, a.d_a, a.d_b, a.utility), (0, 1.0, 7.0, 6.0));

        let eq = assign(&m, &[2.0, 2.0]).unwrap();
        assert_eq!(eq.utility, 0.0);
        assert_eq!(eq.nearest, 0);

        let m3 = ClusterModel::from_parts(
            vec![0],
            vec![vec![0.0], vec![5.0], vec![9.0]],
            vec![1, 1, 1],
            vec![0, 1, 2],
        )
        .unwrap();
        let on = assign(&m3, &[5.0]).unwrap();
        assert_eq!((on.nearest, on.d_a), (1, 0.0));
        assert!(assign(&m, &[1.0]).is_err());
    }

    #[test]
    fn update_examples() {
        let mut m = ClusterModel::from_parts(
            vec![0, 1],
            vec![vec![1.0, 1.0], vec![9.0, 9.0]],
            vec![1, 1],
            vec![0, 1],
        )
        .unwrap();
        let x = [3.0, 3.0];
        let a = assign(&m, &x).unwrap();
        update_centroid(&mut m, &a, &x).unwrap();
        assert_eq!(m.centroids()[0], vec![2.0, 2.0]);
        assert_eq!(m.counts()[0], 2);
        assert_eq!(m.centroids()[1], vec![9.0, 9.0]);

        let c = m.centroids()[0].clone();
        for _ in 0..10 {
            let a = assign(&m, &c).unwrap();
            update_centroid(&mut m, &a, &c).unwrap();
        }
        assert_eq!(m.centroids()[0], c);
    }

    #[test]
    fn utility_mirror() {
        let m = two_point_model();
        assert_eq!(utility_of(&m, &[1.0, 0.0]).unwrap(), 6.0);
        assert_eq!(utility_of(&m, &[2.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn model_validation() {
        assert!(ClusterModel::from_parts(vec![0], vec![vec![0.0]], vec![1], vec![0]).is_err());
        assert!(ClusterModel::from_parts(vec![0, 0], vec![vec![0.0, 0.0]; 2], vec![1, 1], vec![0, 1]).is_err());
        assert!(ClusterModel::from_parts(vec![0], vec![vec![0.0]; 2], vec![0, 1], vec![0, 1]).is_err());
    }
}
