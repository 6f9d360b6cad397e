//! Propagation kernel computation over a graph database.
//!
//! Every iteration hashes the stacked distribution matrix with one freshly
//! drawn hash, counts bin occupancy per graph, adds the Gram matrix of those
//! counts to the kernel and then propagates. Iterations run `t = 0..=t_max`,
//! so `t_max = 0` compares only the initial label histograms.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{init_label_distributions, stack_database, GraphDatabase, Prior};
use crate::lsh::{apply_hash, draw_hash, BinAssignment, HashFunction, Metric};
use crate::propagation::{Scheme, SchemeConfig};

/// Default label bin width.
pub const DEFAULT_LABEL_WIDTH: f64 = 1e-5;

/// Dense symmetric `n × n` Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn zeros(n: usize) -> Self {
        KernelMatrix {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::dims(format!("row {i} has {} entries, expected {n}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Ok(KernelMatrix { n, values })
    }

    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::dims(format!("{} values for a {n}x{n} kernel", values.len())));
        }
        Ok(KernelMatrix { n, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut k = Self::zeros(n);
        for i in 0..n {
            k.set(i, i, 1.0);
        }
        k
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn add_assign(&mut self, other: &KernelMatrix) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Smallest eigenvalue, computed on the symmetrized matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let m = DMatrix::from_fn(self.n, self.n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)));
        SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Reorders rows and columns: entry `(i, j)` of the result is entry
    /// `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> KernelMatrix {
        assert_eq!(perm.len(), self.n);
        let mut out = KernelMatrix::zeros(self.n);
        for (i, &pi) in perm.iter().enumerate() {
            for (j, &pj) in perm.iter().enumerate() {
                out.set(i, j, self.get(pi, pj));
            }
        }
        out
    }
}

/// Sparse per-graph bin counts for one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureCounts {
    iteration: usize,
    /// `(bin, count)` pairs per graph, bins ascending.
    counts: Vec<Vec<(usize, u64)>>,
}

impl FeatureCounts {
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn num_graphs(&self) -> usize {
        self.counts.len()
    }

    pub fn graph(&self, i: usize) -> &[(usize, u64)] {
        &self.counts[i]
    }

    /// Dense count vector of graph `i` over `bin_count` bins.
    pub fn dense(&self, i: usize, bin_count: usize) -> Vec<u64> {
        let mut out = vec![0; bin_count];
        for &(b, c) in &self.counts[i] {
            out[b] = c;
        }
        out
    }
}

/// Counts, for every graph, how many of its nodes fall into each compact bin.
pub fn count_features(
    bins: &BinAssignment,
    indicator: &[usize],
    num_graphs: usize,
    iteration: usize,
) -> Result<FeatureCounts> {
    if bins.len() != indicator.len() {
        return Err(Error::dims(format!(
            "{} bins for {} nodes",
            bins.len(),
            indicator.len()
        )));
    }
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(indicator.len());
    for (&g, &b) in indicator.iter().zip(bins.compact()) {
        if g >= num_graphs {
            return Err(Error::invalid(format!("graph index {g} out of range")));
        }
        pairs.push((g, b));
    }
    pairs.sort_unstable();
    let mut counts: Vec<Vec<(usize, u64)>> = vec![Vec::new(); num_graphs];
    for (g, b) in pairs {
        match counts[g].last_mut() {
            Some((last, c)) if *last == b => *c += 1,
            _ => counts[g].push((b, 1)),
        }
    }
    Ok(FeatureCounts { iteration, counts })
}

/// Kernel between per-graph count vectors.
pub trait BaseKernel {
    fn gram(&self, counts: &FeatureCounts) -> KernelMatrix;
}

/// Dot product of count vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearBaseKernel;

impl BaseKernel for LinearBaseKernel {
    fn gram(&self, counts: &FeatureCounts) -> KernelMatrix {
        let n = counts.num_graphs();
        // inverted index laid out by counting sort: members of bin b are
        // entries[start[b]..start[b + 1]]
        let bins = counts
            .counts
            .iter()
            .filter_map(|row| row.last().map(|&(b, _)| b + 1))
            .max()
            .unwrap_or(0);
        let mut start = vec![0usize; bins + 1];
        for row in &counts.counts {
            for &(b, _) in row {
                start[b + 1] += 1;
            }
        }
        for b in 0..bins {
            start[b + 1] += start[b];
        }
        let mut fill = start.clone();
        let mut entries = vec![(0usize, 0u64); start[bins]];
        for (g, row) in counts.counts.iter().enumerate() {
            for &(b, c) in row {
                entries[fill[b]] = (g, c);
                fill[b] += 1;
            }
        }
        let mut k = KernelMatrix::zeros(n);
        for b in 0..bins {
            let members = &entries[start[b]..start[b + 1]];
            for (x, &(gi, ci)) in members.iter().enumerate() {
                for &(gj, cj) in &members[x..] {
                    let v = (ci * cj) as f64;
                    k.values[gi * n + gj] += v;
                    if gi != gj {
                        k.values[gj * n + gi] += v;
                    }
                }
            }
        }
        k
    }
}

/// Linear base kernel contribution of one iteration.
pub fn contribution(counts: &FeatureCounts) -> KernelMatrix {
    LinearBaseKernel.gram(counts)
}

/// Divides each entry by the geometric mean of the two diagonal entries.
pub fn normalize_kernel(k: &KernelMatrix) -> Result<KernelMatrix> {
    let diag: Vec<f64> = (0..k.n).map(|i| k.get(i, i)).collect();
    if let Some(i) = diag.iter().position(|d| d.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::invalid(format!(
            "graph {i} has kernel diagonal {}; cannot normalize",
            diag[i]
        )));
    }
    let mut out = KernelMatrix::zeros(k.n);
    for i in 0..k.n {
        for j in 0..k.n {
            let v = if i == j {
                1.0
            } else {
                k.get(i, j) / (diag[i] * diag[j]).sqrt()
            };
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Parameters of the label propagation kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct PKConfig {
    pub t_max: usize,
    pub w_label: f64,
    pub metric_label: Metric,
    pub scheme: Scheme,
    pub prior: Prior,
    pub normalize: bool,
    pub seed: u64,
}

impl Default for PKConfig {
    fn default() -> Self {
        PKConfig {
            t_max: 10,
            w_label: DEFAULT_LABEL_WIDTH,
            metric_label: Metric::TotalVariation,
            scheme: Scheme::Diffusion,
            prior: Prior::Uniform,
            normalize: false,
            seed: 0,
        }
    }
}

impl PKConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_label > 0.0 && self.w_label.is_finite()) {
            return Err(Error::invalid(format!(
                "label bin width must be positive, got {}",
                self.w_label
            )));
        }
        if !matches!(self.metric_label, Metric::TotalVariation | Metric::Hellinger) {
            return Err(Error::invalid(format!(
                "label metric must be tv or h, got {}",
                self.metric_label
            )));
        }
        Ok(())
    }

    pub(crate) fn scheme_config(&self, db: &GraphDatabase) -> SchemeConfig {
        match self.scheme {
            Scheme::Diffusion => SchemeConfig::diffusion(),
            Scheme::LabelPropagation => SchemeConfig::label_propagation(db.observed_mask()),
        }
    }
}

/// The `t_max + 1` label hashes the engine draws for `config`, in iteration order.
pub fn draw_label_hashes(num_labels: usize, config: &PKConfig) -> Result<Vec<HashFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..=config.t_max)
        .map(|_| draw_hash(num_labels, config.w_label, config.metric_label, &mut rng))
        .collect()
}

/// Kernel plus the per-iteration contributions that were summed into it.
#[derive(Debug, Clone)]
pub struct KernelRun {
    pub kernel: KernelMatrix,
    pub contributions: Vec<KernelMatrix>,
}

impl KernelRun {
    /// Unnormalized kernel of a shorter run `t_max' ≤ t_max`.
    pub fn partial_sum(&self, t_max: usize) -> KernelMatrix {
        let mut k = KernelMatrix::zeros(self.kernel.n());
        for c in &self.contributions[..=t_max] {
            k.add_assign(c);
        }
        k
    }
}

fn check_labeled(db: &GraphDatabase) -> Result<()> {
    if db.num_labels() == 0 {
        return Err(Error::invalid(
            "graph database has no node labels; derive degree labels first",
        ));
    }
    Ok(())
}

/// Propagation kernel over `db`.
pub fn propagation_kernel(db: &GraphDatabase, config: &PKConfig) -> Result<KernelMatrix> {
    Ok(propagation_kernel_traced(db, config)?.kernel)
}

/// Propagation kernel keeping every per-iteration contribution.
pub fn propagation_kernel_traced(db: &GraphDatabase, config: &PKConfig) -> Result<KernelRun> {
    config.validate()?;
    check_labeled(db)?;
    let hashes = draw_label_hashes(db.num_labels(), config)?;
    propagation_kernel_with_hashes(db, config, &hashes)
}

/// Propagation kernel with caller-supplied hashes, one per iteration.
pub fn propagation_kernel_with_hashes(
    db: &GraphDatabase,
    config: &PKConfig,
    hashes: &[HashFunction],
) -> Result<KernelRun> {
    config.validate()?;
    check_labeled(db)?;
    if hashes.len() != config.t_max + 1 {
        return Err(Error::invalid(format!(
            "{} hashes supplied for {} iterations",
            hashes.len(),
            config.t_max + 1
        )));
    }
    let n = db.len();
    if n == 0 {
        return Ok(KernelRun {
            kernel: KernelMatrix::zeros(0),
            contributions: vec![KernelMatrix::zeros(0); config.t_max + 1],
        });
    }
    let (transition, indicator) = stack_database(db)?;
    let scheme = config.scheme_config(db);
    let p0 = init_label_distributions(db, &config.prior)?;
    let mut p = p0.clone();

    let mut kernel = KernelMatrix::zeros(n);
    let mut contributions = Vec::with_capacity(hashes.len());
    for (t, h) in hashes.iter().enumerate() {
        let bins = apply_hash(h, &p)?;
        let counts = count_features(&bins, &indicator, n, t)?;
        let c = contribution(&counts);
        kernel.add_assign(&c);
        contributions.push(c);
        if t < config.t_max {
            p = scheme.step(&transition, &p, &p0)?;
        }
    }
    if config.normalize {
        kernel = normalize_kernel(&kernel)?;
    }
    Ok(KernelRun {
        kernel,
        contributions,
    })
}

/// Per-graph dense transition: each row divided by its sum, empty rows
/// become self-loops.
pub(crate) fn dense_transition(adjacency: &DenseMatrix) -> DenseMatrix {
    let n = adjacency.rows();
    let mut t = DenseMatrix::zeros(n, n);
    for u in 0..n {
        let degree: f64 = adjacency.row(u).iter().sum();
        if degree > 0.0 {
            for v in 0..n {
                t.set(u, v, adjacency.get(u, v) / degree);
            }
        } else {
            t.set(u, u, 1.0);
        }
    }
    t
}

/// Reference computation: per-graph dense propagation and an explicit double
/// sum of the Dirac node kernel over every node pair, summed over iterations.
/// Quadratic in the number of nodes; intended for testing.
pub fn kernel_bruteforce(
    db: &GraphDatabase,
    config: &PKConfig,
    hashes: &[HashFunction],
) -> Result<KernelMatrix> {
    check_labeled(db)?;
    if hashes.len() != config.t_max + 1 {
        return Err(Error::invalid("one hash per iteration is required"));
    }
    let k = db.num_labels();
    let prior_row = match &config.prior {
        Prior::Uniform => vec![1.0 / k as f64; k],
        Prior::Custom(p) => p.clone(),
    };
    let label_propagation = config.scheme == Scheme::LabelPropagation;

    struct State {
        transition: DenseMatrix,
        p0: DenseMatrix,
        observed: Vec<bool>,
        p: DenseMatrix,
    }
    let mut states: Vec<State> = db
        .graphs()
        .iter()
        .map(|g| {
            let ni = g.node_count();
            let mut p0 = DenseMatrix::zeros(ni, k);
            for (u, l) in g.labels().iter().enumerate() {
                match l {
                    Some(l) => p0.set(u, *l as usize, 1.0),
                    None => p0.row_mut(u).copy_from_slice(&prior_row),
                }
            }
            State {
                transition: dense_transition(&g.adjacency().to_dense()),
                p: p0.clone(),
                observed: g.labels().iter().map(Option::is_some).collect(),
                p0,
            }
        })
        .collect();

    let n = db.len();
    let mut kernel = KernelMatrix::zeros(n);
    for (t, h) in hashes.iter().enumerate() {
        let node_hashes = states
            .iter()
            .map(|s| s.p.iter_rows().map(|r| h.hash_row(r)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        for i in 0..n {
            for j in 0..n {
                let mut sum = 0.0;
                for hu in &node_hashes[i] {
                    for hv in &node_hashes[j] {
                        if hu == hv {
                            sum += 1.0;
                        }
                    }
                }
                kernel.set(i, j, kernel.get(i, j) + sum);
            }
        }
        if t == config.t_max {
            break;
        }
        for s in &mut states {
            let mut current = s.p.clone();
            if label_propagation {
                for (u, _) in s.observed.iter().enumerate().filter(|(_, o)| **o) {
                    current.row_mut(u).copy_from_slice(s.p0.row(u));
                }
            }
            s.p = s.transition.matmul(&current)?;
        }
    }
    if config.normalize {
        kernel = normalize_kernel(&kernel)?;
    }
    Ok(kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn direct_counts() {
        let bins = BinAssignment::from_raw(vec![4, 4, 9]);
        let c = count_features(&bins, &[0, 0, 0], 1, 0).unwrap();
        assert_eq!(c.dense(0, 2), vec![2, 1]);

        let empty = count_features(&BinAssignment::from_raw(vec![]), &[], 0, 0).unwrap();
        assert_eq!(empty.num_graphs(), 0);
        assert_eq!(contribution(&empty).n(), 0);
    }

    fn counts_from_dense(rows: &[Vec<u64>]) -> FeatureCounts {
        FeatureCounts {
            iteration: 0,
            counts: rows
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, c)| **c > 0)
                        .map(|(b, c)| (b, *c))
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn linear_contribution() {
        let k = contribution(&counts_from_dense(&[vec![2, 1, 3], vec![2, 2, 2]]));
        assert_eq!(k.get(0, 1), 12.0);
        assert_eq!(k.get(1, 0), 12.0);
        assert_eq!(k.get(0, 0), 14.0);
        assert_eq!(k.get(1, 1), 12.0);

        let disjoint = contribution(&counts_from_dense(&[vec![1, 0], vec![0, 5]]));
        assert_eq!(disjoint.get(0, 1), 0.0);
    }

    #[test]
    fn normalization_examples() {
        let k = KernelMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let nk = normalize_kernel(&k).unwrap();
        assert_eq!(nk.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(normalize_kernel(&KernelMatrix::identity(3)).unwrap(), KernelMatrix::identity(3));

        let zero = KernelMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let err = normalize_kernel(&zero).unwrap_err().to_string();
        assert!(err.contains("graph 1"), "{err}");
    }

    #[test]
    fn labels_baseline_is_one_contribution() {
        let g1 = Graph::from_undirected_edges(3, &[(0, 1), (1, 2)], vec![Some(0), Some(1), Some(1)]).unwrap();
        let g2 = Graph::from_undirected_edges(2, &[(0, 1)], vec![Some(1), Some(1)]).unwrap();
        let db = GraphDatabase::new(vec![g1, g2], None).unwrap();
        let cfg = PKConfig {
            t_max: 0,
            ..PKConfig::default()
        };
        let k = propagation_kernel(&db, &cfg).unwrap();
        // label histograms [1,2] and [0,2]
        assert_eq!(k.as_slice(), &[5.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn single_nodes_and_disjoint_alphabets() {
        let a = Graph::from_directed_edges(1, &[], vec![Some(0)]).unwrap();
        let db = GraphDatabase::new(vec![a.clone(), a.clone()], None).unwrap();
        let cfg = PKConfig {
            t_max: 0,
            ..PKConfig::default()
        };
        let hashes = draw_label_hashes(1, &cfg).unwrap();
        let k = kernel_bruteforce(&db, &cfg, &hashes).unwrap();
        assert_eq!(k.as_slice(), &[1.0; 4]);

        let b = Graph::from_directed_edges(2, &[], vec![Some(2), Some(3)]).unwrap();
        let c = Graph::from_directed_edges(2, &[], vec![Some(0), Some(1)]).unwrap();
        let db = GraphDatabase::new(vec![b, c], None).unwrap();
        let hashes = draw_label_hashes(4, &cfg).unwrap();
        let k = kernel_bruteforce(&db, &cfg, &hashes).unwrap();
        assert_eq!(k.get(0, 1), 0.0);
    }

    #[test]
    fn rejects_unlabeled_database_and_bad_width() {
        let g = Graph::from_directed_edges(2, &[(0, 1)], vec![None, None]).unwrap();
        let db = GraphDatabase::new(vec![g], None).unwrap();
        assert!(propagation_kernel(&db, &PKConfig::default()).is_err());

        let g = Graph::from_directed_edges(2, &[(0, 1)], vec![Some(0), None]).unwrap();
        let db = GraphDatabase::new(vec![g], None).unwrap();
        let cfg = PKConfig {
            w_label: 0.0,
            ..PKConfig::default()
        };
        assert!(propagation_kernel(&db, &cfg).is_err());
        let cfg = PKConfig {
            metric_label: Metric::L2,
            ..PKConfig::default()
        };
        assert!(propagation_kernel(&db, &cfg).is_err());
    }

    #[test]
    fn partial_sums_match_shorter_runs() {
        let g1 = Graph::from_undirected_edges(4, &[(0, 1), (1, 2), (2, 3)], vec![Some(0), Some(1), Some(0), Some(1)]).unwrap();
        let g2 = Graph::from_undirected_edges(3, &[(0, 1), (0, 2)], vec![Some(1), Some(0), Some(0)]).unwrap();
        let db = GraphDatabase::new(vec![g1, g2], None).unwrap();
        let cfg = PKConfig {
            t_max: 4,
            ..PKConfig::default()
        };
        let run = propagation_kernel_traced(&db, &cfg).unwrap();
        assert_eq!(run.partial_sum(4), run.kernel);
        let hashes = draw_label_hashes(2, &cfg).unwrap();
        let short = PKConfig { t_max: 2, ..cfg.clone() };
        let short_run = propagation_kernel_with_hashes(&db, &short, &hashes[..3]).unwrap();
        assert_eq!(run.partial_sum(2), short_run.kernel);
    }
}
