//! Contrastive loss and its layer-aware convex combination.
//!
//! Distances are squared Euclidean. Same-class pairs pay `½·D`; pairs from
//! different classes pay `½·max(0, Δ − D)`. The layer-aware loss weights
//! each layer's mean pair loss by `α_i`, with `Σ α_i = 1`.
//!
//! Gradients are analytic. At the margin kink (`D == Δ`) the subgradient
//! taken is zero, i.e. the satisfied side.

use crate::error::{Error, Result};

/// Margin used when none is configured.
pub const DEFAULT_DELTA: f64 = 1.0;

/// Convex per-layer weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights(Vec<f64>);

impl LayerWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::invalid("layer weights are empty"));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::invalid("layer weights must be finite and non-negative"));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("layer weights sum to {sum}, not 1")));
        }
        Ok(LayerWeights(alpha))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `α_i ∝ L − i + 1`: linearly decreasing, earliest layer heaviest.
pub fn default_alpha(layers: usize) -> Result<LayerWeights> {
    if layers == 0 {
        return Err(Error::invalid("need at least one layer"));
    }
    let norm = (layers * (layers + 1) / 2) as f64;
    LayerWeights::new((0..layers).map(|i| (layers - i) as f64 / norm).collect())
}

/// Two representations and whether they share a class.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub same_class: bool,
}

/// Pairs observed at one layer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairBatch {
    pub pairs: Vec<Pair>,
}

impl PairBatch {
    /// Every unordered pair of `reps`.
    pub fn all_pairs(reps: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        if reps.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: reps.len(),
                found: labels.len(),
            });
        }
        let mut pairs = Vec::new();
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                pairs.push(Pair {
                    a: reps[i].clone(),
                    b: reps[j].clone(),
                    same_class: labels[i] == labels[j],
                });
            }
        }
        Ok(PairBatch { pairs })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("margin must be positive, got {delta}")))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub fn contrastive_pair(r1: &[f64], r2: &[f64], same_class: bool, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let d = sq_dist(r1, r2)?;
    Ok(if same_class {
        0.5 * d
    } else {
        0.5 * (delta - d).max(0.0)
    })
}

/// Gradient of [`contrastive_pair`] with respect to `r1`; the gradient for
/// `r2` is its negation.
pub fn contrastive_pair_grad(r1: &[f64], r2: &[f64], same_class: bool, delta: f64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    let d = sq_dist(r1, r2)?;
    let scale = if same_class {
        1.0
    } else if d < delta {
        -1.0
    } else {
        0.0
    };
    Ok(r1.iter().zip(r2).map(|(x, y)| scale * (x - y)).collect())
}

fn batch_mean(batch: &PairBatch, delta: f64) -> Result<f64> {
    if batch.pairs.is_empty() {
        return Err(Error::invalid("layer batch holds no pairs"));
    }
    let mut sum = 0.0;
    for p in &batch.pairs {
        sum += contrastive_pair(&p.a, &p.b, p.same_class, delta)?;
    }
    Ok(sum / batch.pairs.len() as f64)
}

/// `Σ_i α_i · mean_pairs(l_c)` over one batch per layer.
pub fn layer_aware_loss(batches: &[PairBatch], weights: &LayerWeights, delta: f64) -> Result<f64> {
    if batches.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: batches.len(),
        });
    }
    let mut total = 0.0;
    for (b, &w) in batches.iter().zip(weights.as_slice()) {
        total += w * batch_mean(b, delta)?;
    }
    Ok(total)
}

/// Gradient of [`layer_aware_loss`] for every pair member, laid out as
/// `[layer][pair] -> (d/da, d/db)`.
pub fn layer_aware_grad(
    batches: &[PairBatch],
    weights: &LayerWeights,
    delta: f64,
) -> Result<Vec<Vec<(Vec<f64>, Vec<f64>)>>> {
    if batches.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: batches.len(),
        });
    }
    let mut out = Vec::with_capacity(batches.len());
    for (b, &w) in batches.iter().zip(weights.as_slice()) {
        if b.pairs.is_empty() {
            return Err(Error::invalid("layer batch holds no pairs"));
        }
        let scale = w / b.pairs.len() as f64;
        let mut layer = Vec::with_capacity(b.pairs.len());
        for p in &b.pairs {
            let g = contrastive_pair_grad(&p.a, &p.b, p.same_class, delta)?;
            let ga: Vec<f64> = g.iter().map(|v| v * scale).collect();
            let gb: Vec<f64> = ga.iter().map(|v| -v).collect();
            layer.push((ga, gb));
        }
        out.push(layer);
    }
    Ok(out)
}

/// Free per-layer embeddings of a labelled point set, fitted by plain
/// gradient descent on the layer-aware loss over all within-layer pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFit {
    /// `[layer][point] -> coordinates`.
    pub layers: Vec<Vec<Vec<f64>>>,
    pub labels: Vec<usize>,
}

impl EmbeddingFit {
    pub fn new(layers: Vec<Vec<Vec<f64>>>, labels: Vec<usize>) -> Result<Self> {
        for l in &layers {
            if l.len() != labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: labels.len(),
                    found: l.len(),
                });
            }
        }
        Ok(EmbeddingFit { layers, labels })
    }

    /// Loss and per-point gradient.
    pub fn loss_and_grad(&self, weights: &LayerWeights, delta: f64) -> Result<(f64, Vec<Vec<Vec<f64>>>)> {
        if self.layers.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                found: self.layers.len(),
            });
        }
        let n = self.labels.len();
        let n_pairs = n * n.saturating_sub(1) / 2;
        if n_pairs == 0 {
            return Err(Error::invalid("need at least two points"));
        }
        let mut loss = 0.0;
        let mut grads = Vec::with_capacity(self.layers.len());
        for (pts, &w) in self.layers.iter().zip(weights.as_slice()) {
            let scale = w / n_pairs as f64;
            let mut g: Vec<Vec<f64>> = pts.iter().map(|p| vec![0.0; p.len()]).collect();
            for i in 0..n {
                for j in i + 1..n {
                    let same = self.labels[i] == self.labels[j];
                    loss += scale * contrastive_pair(&pts[i], &pts[j], same, delta)?;
                    let gi = contrastive_pair_grad(&pts[i], &pts[j], same, delta)?;
                    for (k, v) in gi.iter().enumerate() {
                        g[i][k] += scale * v;
                        g[j][k] -= scale * v;
                    }
                }
            }
            grads.push(g);
        }
        Ok((loss, grads))
    }

    /// Runs `steps` iterations of gradient descent with step size `lr`;
    /// returns the loss before each step.
    pub fn descend(&mut self, weights: &LayerWeights, delta: f64, steps: usize, lr: f64) -> Result<Vec<f64>> {
        let mut history = Vec::with_capacity(steps);
        for _ in 0..steps {
            let (loss, grads) = self.loss_and_grad(weights, delta)?;
            history.push(loss);
            for (layer, g) in self.layers.iter_mut().zip(&grads) {
                for (p, gp) in layer.iter_mut().zip(g) {
                    for (x, d) in p.iter_mut().zip(gp) {
                        *x -= lr * d;
                    }
                }
            }
        }
        Ok(history)
    }

    /// Per layer: mean same-class squared distance and minimum cross-class
    /// squared distance.
    pub fn separation(&self) -> Vec<(f64, f64)> {
        let n = self.labels.len();
        self.layers
            .iter()
            .map(|pts| {
                let mut same = (0.0, 0usize);
                let mut cross_min = f64::INFINITY;
                for i in 0..n {
                    for j in i + 1..n {
                        let d = sq_dist(&pts[i], &pts[j]).unwrap_or(f64::NAN);
                        if self.labels[i] == self.labels[j] {
                            same.0 += d;
                            same.1 += 1;
                        } else {
                            cross_min = cross_min.min(d);
                        }
                    }
                }
                let mean = if same.1 == 0 { 0.0 } else { same.0 / same.1 as f64 };
                (mean, cross_min)
            })
            .collect()
    }
}
