//! Stratified cross-validation of a precomputed kernel with a kernel
//! k-nearest-neighbor classifier.
//!
//! Distances are induced by the kernel, `d(i, j)² = K_ii + K_jj − 2 K_ij`.

use std::cmp::Ordering;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    pub folds: usize,
    pub runs: usize,
    pub k_nn: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            runs: 10,
            k_nn: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldResult {
    pub run: usize,
    pub fold: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub folds: Vec<FoldResult>,
    /// Mean fold accuracy of every run.
    pub run_means: Vec<f64>,
    pub mean_accuracy: f64,
    /// Standard error of the run means.
    pub std_error: f64,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fold,run,accuracy")?;
        for r in &self.folds {
            writeln!(f, "{},{},{:.6}", r.fold, r.run, r.accuracy)?;
        }
        write!(
            f,
            "# mean_accuracy={:.6} std_error={:.6} folds={} runs={} knn={} seed={}",
            self.mean_accuracy,
            self.std_error,
            self.config.folds,
            self.config.runs,
            self.config.k_nn,
            self.config.seed
        )
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Ranks items by content so results do not depend on input order: by class,
/// then by the sorted kernel row, then by the diagonal entry. Items with equal
/// keys fall back to input order.
fn canonical_order(k: &KernelMatrix, classes: &[usize]) -> Vec<usize> {
    let keys: Vec<Vec<f64>> = (0..k.n())
        .map(|i| {
            let mut row = k.row(i).to_vec();
            row.sort_by(f64::total_cmp);
            row.push(k.get(i, i));
            row
        })
        .collect();
    let mut order: Vec<usize> = (0..k.n()).collect();
    order.sort_by(|&a, &b| {
        classes[a]
            .cmp(&classes[b])
            .then_with(|| lexicographic(&keys[a], &keys[b]))
            .then(a.cmp(&b))
    });
    order
}

fn predict(
    k: &KernelMatrix,
    test: usize,
    train: &[usize],
    rank: &[usize],
    classes: &[usize],
    num_classes: usize,
    k_nn: usize,
) -> usize {
    let mut cand: Vec<(f64, usize)> = train
        .iter()
        .map(|&j| {
            let d2 = k.get(test, test) + k.get(j, j) - 2.0 * k.get(test, j);
            (d2.max(0.0).sqrt(), j)
        })
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(rank[a.1].cmp(&rank[b.1])));
    let mut votes = vec![0usize; num_classes];
    let mut dist_sum = vec![0.0; num_classes];
    for &(d, j) in cand.iter().take(k_nn) {
        votes[classes[j]] += 1;
        dist_sum[classes[j]] += d;
    }
    (0..num_classes)
        .filter(|&c| votes[c] > 0)
        .min_by(|&a, &b| {
            votes[b]
                .cmp(&votes[a])
                .then(dist_sum[a].total_cmp(&dist_sum[b]))
                .then(a.cmp(&b))
        })
        .unwrap_or(0)
}

/// Runs `runs` repetitions of stratified `folds`-fold cross-validation.
pub fn evaluate(k: &KernelMatrix, classes: &[i64], config: &EvalConfig) -> Result<EvalReport> {
    let n = k.n();
    if classes.len() != n {
        return Err(Error::dims(format!("{} classes for {n} graphs", classes.len())));
    }
    if config.folds < 2 {
        return Err(Error::invalid("at least two folds are required"));
    }
    if config.runs == 0 || config.k_nn == 0 {
        return Err(Error::invalid("runs and k_nn must be at least 1"));
    }
    if k.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel has non-finite entries"));
    }

    let mut distinct: Vec<i64> = classes.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let class_idx: Vec<usize> = classes
        .iter()
        .map(|c| distinct.binary_search(c).unwrap())
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); distinct.len()];
    let order = canonical_order(k, &class_idx);
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
        members[class_idx[i]].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if m.len() < config.folds {
            return Err(Error::invalid(format!(
                "class {} has {} members, fewer than {} folds",
                distinct[c],
                m.len(),
                config.folds
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut folds = Vec::with_capacity(config.runs * config.folds);
    let mut run_means = Vec::with_capacity(config.runs);
    for run in 0..config.runs {
        let mut fold_of = vec![0usize; n];
        let mut next = 0usize;
        for m in &members {
            let mut shuffled = m.clone();
            shuffled.shuffle(&mut rng);
            for i in shuffled {
                fold_of[i] = next % config.folds;
                next += 1;
            }
        }
        let mut sum = 0.0;
        for fold in 0..config.folds {
            let (test, train): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| fold_of[i] == fold);
            let correct = test
                .iter()
                .filter(|&&i| {
                    predict(k, i, &train, &rank, &class_idx, distinct.len(), config.k_nn) == class_idx[i]
                })
                .count();
            let accuracy = correct as f64 / test.len() as f64;
            sum += accuracy;
            folds.push(FoldResult { run, fold, accuracy });
        }
        run_means.push(sum / config.folds as f64);
    }
    let mean = run_means.iter().sum::<f64>() / config.runs as f64;
    let std_error = if config.runs > 1 {
        let var = run_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (config.runs - 1) as f64;
        (var / config.runs as f64).sqrt()
    } else {
        0.0
    };
    Ok(EvalReport {
        config: *config,
        folds,
        run_means,
        mean_accuracy: mean,
        std_error,
    })
}
