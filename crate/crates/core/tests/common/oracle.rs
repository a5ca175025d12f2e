//! Brute-force counterparts of the library algorithms.

use impsched::loss::EmbeddingFit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// CEE by direct counting over every position.
pub fn cee_by_enumeration(ev: &[bool], n_max: usize) -> Vec<(i64, f64)> {
    let rate = ev.iter().filter(|&&e| e).count() as f64 / ev.len() as f64;
    let mut out = Vec::new();
    for n in (-(n_max as i64)..=-1).chain(1..=n_max as i64) {
        let want = n > 0;
        let k = n.unsigned_abs() as usize;
        let (mut seen, mut hit) = (0u32, 0u32);
        for j in k..ev.len() {
            if ev[j - k..j].iter().all(|&e| e == want) {
                seen += 1;
                if ev[j] {
                    hit += 1;
                }
            }
        }
        out.push((n, if seen == 0 { rate } else { hit as f64 / seen as f64 }));
    }
    out
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Loss of one pair written out from the definition.
pub fn pair_loss(a: &[f64], b: &[f64], same: bool, delta: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    if same {
        d / 2.0
    } else if d < delta {
        (delta - d) / 2.0
    } else {
        0.0
    }
}

/// Class-by-feature table of summed values, scored cell by cell.
pub fn chi2_table(x: &[Vec<f64>], y: &[usize]) -> Vec<f64> {
    let classes: Vec<usize> = {
        let mut c = y.to_vec();
        c.sort();
        c.dedup();
        c
    };
    let d = x[0].len();
    let n = x.len() as f64;
    let mut table = vec![vec![0.0; d]; classes.len()];
    let mut size = vec![0.0; classes.len()];
    for (row, &label) in x.iter().zip(y) {
        let c = classes.iter().position(|&v| v == label).unwrap();
        size[c] += 1.0;
        for j in 0..d {
            table[c][j] += row[j];
        }
    }
    (0..d)
        .map(|j| {
            let total: f64 = table.iter().map(|r| r[j]).sum();
            if total == 0.0 {
                return 0.0;
            }
            (0..classes.len())
                .map(|c| {
                    let e = size[c] / n * total;
                    (table[c][j] - e).powi(2) / e
                })
                .sum()
        })
        .collect()
}

/// Three classes of five points, two layers of 2-d embeddings.
pub fn toy_fit(seed: u64) -> EmbeddingFit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..15).map(|i| i / 5).collect();
    let layers = (0..2)
        .map(|_| (0..15).map(|_| (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect())
        .collect();
    EmbeddingFit::new(layers, labels).unwrap()
}

/// A task of one-slot layers for [`best_schedules`].
#[derive(Debug, Clone)]
pub struct BfTask {
    pub release: u64,
    pub deadline: u64,
    pub utilities: Vec<f64>,
    pub u_t: f64,
}

impl BfTask {
    /// Utility after `layers` layers and whether that counts as success.
    fn score(&self, layers: usize) -> (bool, f64) {
        let u = self.utilities[..layers].iter().cloned().fold(0.0, f64::max);
        (u >= self.u_t || layers == self.utilities.len(), u)
    }
}

/// Best success count and, among schedules reaching it, best summed
/// utility of the successful tasks, over every assignment of each slot
/// to idle or one task. Assumes unlimited energy.
pub fn best_schedules(tasks: &[BfTask], horizon: u64) -> (usize, f64) {
    let choices = tasks.len() as u64 + 1;
    let mut best = (0usize, 0.0f64);
    let mut code = vec![0u64; horizon as usize];
    loop {
        let mut done = vec![0usize; tasks.len()];
        for (s, &c) in code.iter().enumerate() {
            if c > 0 {
                let i = c as usize - 1;
                let t = &tasks[i];
                if (s as u64) >= t.release && (s as u64) < t.deadline && done[i] < t.utilities.len() {
                    done[i] += 1;
                }
            }
        }
        let (mut ok, mut util) = (0, 0.0);
        for (t, &l) in tasks.iter().zip(&done) {
            let (s, u) = t.score(l);
            if s {
                ok += 1;
                util += u;
            }
        }
        if ok > best.0 || (ok == best.0 && util > best.1) {
            best = (ok, util);
        }
        // Next assignment in base `choices`.
        let mut i = 0;
        loop {
            if i == code.len() {
                return best;
            }
            code[i] += 1;
            if code[i] < choices {
                break;
            }
            code[i] = 0;
            i += 1;
        }
    }
}
