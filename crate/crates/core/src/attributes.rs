//! Continuous node attributes: per-dimension hashing and propagated
//! Gaussian-mixture attribute distributions (P2K).
//!
//! Every node starts with a Gaussian `N(x_u, Σ)` centred on its standardized
//! attribute vector. Propagation mixes these Gaussians with the transition
//! matrix. Mixtures are summarized by their densities at a fixed set of
//! sample points, `Q_t = T^t Q_0`, so the `N × N` mixture weights are never
//! formed.

use nalgebra::{Cholesky, DMatrix};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{init_label_distributions, stack_database, GraphDatabase, Prior, TransitionMatrix};
use crate::kernel::{
    contribution, count_features, dense_transition, normalize_kernel, KernelMatrix, KernelRun,
    PKConfig,
};
use crate::lsh::{apply_hash, combine_bins, draw_hash, hash_columns, BinAssignment, HashFunction, Metric};
use crate::propagation::{diffusion_step, Scheme};

pub const DEFAULT_ATTRIBUTE_WIDTH: f64 = 1.0;
pub const DEFAULT_SAMPLE_COUNT: usize = 100;
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Per-column shift and scale applied by [`standardize_attributes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Column means and population standard deviations of `x`; a
    /// zero-variance column keeps scale 1.
    pub fn fit(x: &DenseMatrix) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut mean = vec![0.0; d];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n.max(1) as f64;
        }
        let mut var = vec![0.0; d];
        for row in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n.max(1) as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardization { mean, scale }
    }

    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

/// Shifts every column to zero mean and scales it to unit standard deviation.
pub fn standardize_attributes(x: &DenseMatrix) -> Result<(DenseMatrix, Standardization)> {
    if x.cols() == 0 {
        return Err(Error::invalid("attribute dimension must be at least 1"));
    }
    if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite attribute at node {}, dimension {}",
            pos / x.cols(),
            pos % x.cols()
        )));
    }
    let stats = Standardization::fit(x);
    Ok((stats.apply(x), stats))
}

/// Draws one scalar hash per column.
pub fn draw_column_hashes<R: Rng + ?Sized>(
    columns: usize,
    width: f64,
    metric: Metric,
    rng: &mut R,
) -> Result<Vec<HashFunction>> {
    (0..columns).map(|_| draw_hash(1, width, metric, rng)).collect()
}

/// Hashes every attribute dimension with its own ℓ¹ hash and joins the
/// results: two nodes share a bin iff they agree in every dimension.
pub fn hash_attributes_per_dim<R: Rng + ?Sized>(
    x: &DenseMatrix,
    w_attr: f64,
    rng: &mut R,
) -> Result<BinAssignment> {
    let hashes = draw_column_hashes(x.cols(), w_attr, Metric::L1, rng)?;
    hash_columns(&hashes, x)
}

/// Shared-covariance Gaussian mixture fitted to standardized attributes.
#[derive(Debug, Clone)]
pub struct AttributeModel {
    pub standardized: DenseMatrix,
    pub stats: Standardization,
    /// `D × D`, row-major.
    pub covariance: DenseMatrix,
    /// `S × D`, rows drawn from `standardized`.
    pub sample_points: DenseMatrix,
}

/// Standardizes `x`, estimates the covariance and picks `samples` sample points.
///
/// The covariance is the unbiased sample covariance plus
/// `ridge · trace/D · I` (plain `ridge · I` when the trace is zero). Sample
/// points are rows chosen without replacement, or with replacement when
/// `samples` exceeds the number of rows.
pub fn fit_mixture<R: Rng + ?Sized>(
    x: &DenseMatrix,
    ridge: f64,
    samples: usize,
    rng: &mut R,
) -> Result<AttributeModel> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::invalid(format!(
            "at least two attribute rows are needed, got {n}"
        )));
    }
    if samples == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid(format!("ridge must be nonnegative, got {ridge}")));
    }
    let (standardized, stats) = standardize_attributes(x)?;
    let d = standardized.cols();

    let mut mean = vec![0.0; d];
    for row in standardized.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = DenseMatrix::zeros(d, d);
    for row in standardized.iter_rows() {
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in 0..d {
                cov.set(a, b, cov.get(a, b) + da * (row[b] - mean[b]));
            }
        }
    }
    let mut trace = 0.0;
    for a in 0..d {
        for b in 0..d {
            cov.set(a, b, cov.get(a, b) / (n - 1) as f64);
        }
        trace += cov.get(a, a);
    }
    let shift = if trace > 0.0 { ridge * trace / d as f64 } else { ridge };
    for a in 0..d {
        cov.set(a, a, cov.get(a, a) + shift);
    }

    let rows: Vec<usize> = if samples <= n {
        sample(rng, n, samples).into_vec()
    } else {
        (0..samples).map(|_| rng.random_range(0..n)).collect()
    };
    let mut points = DenseMatrix::zeros(samples, d);
    for (s, &r) in rows.iter().enumerate() {
        points.row_mut(s).copy_from_slice(standardized.row(r));
    }
    Ok(AttributeModel {
        standardized,
        stats,
        covariance: cov,
        sample_points: points,
    })
}

/// `Q_0[u][s]`: density of `N(x_u, Σ)` at sample point `y_s`, evaluated
/// through the Cholesky factor in log space.
pub fn init_pdf_matrix(model: &AttributeModel) -> Result<DenseMatrix> {
    let d = model.covariance.rows();
    let sigma = DMatrix::from_row_slice(d, d, model.covariance.as_slice());
    let chol = Cholesky::new(sigma)
        .ok_or_else(|| Error::invalid("covariance is not positive definite"))?;
    let l = chol.l();
    let log_det: f64 = 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
    let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);

    let x = &model.standardized;
    let y = &model.sample_points;
    let mut q = DenseMatrix::zeros(x.rows(), y.rows());
    let mut z = vec![0.0; d];
    for u in 0..x.rows() {
        let xu = x.row(u);
        for s in 0..y.rows() {
            let ys = y.row(s);
            // forward substitution L z = y_s - x_u
            for i in 0..d {
                let mut acc = ys[i] - xu[i];
                for j in 0..i {
                    acc -= l[(i, j)] * z[j];
                }
                z[i] = acc / l[(i, i)];
            }
            let maha: f64 = z.iter().map(|v| v * v).sum();
            q.set(u, s, (log_norm - 0.5 * maha).exp());
        }
    }
    Ok(q)
}

/// `Q_{t+1} = T · Q_t`.
pub fn attribute_step(t: &TransitionMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    diffusion_step(t, q)
}

/// Fixed per-column standardization of the density matrix, fitted on `Q_0`
/// and reused at every iteration so bins stay comparable over time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityScaling(Standardization);

impl DensityScaling {
    pub fn fit(q0: &DenseMatrix) -> Self {
        DensityScaling(Standardization::fit(q0))
    }

    pub fn apply(&self, q: &DenseMatrix) -> DenseMatrix {
        self.0.apply(q)
    }
}

/// How attribute bins are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttributeMode {
    /// Propagate Gaussian mixtures and hash their densities per sample point.
    #[default]
    Propagated,
    /// Hash the standardized attributes per dimension; attributes are not
    /// propagated.
    PerDimension,
}

#[derive(Debug, Clone, PartialEq)]
pub struct P2KConfig {
    pub pk: PKConfig,
    pub w_attr: f64,
    pub metric_attr: Metric,
    pub samples: usize,
    pub ridge: f64,
    pub mode: AttributeMode,
}

impl Default for P2KConfig {
    fn default() -> Self {
        P2KConfig {
            pk: PKConfig::default(),
            w_attr: DEFAULT_ATTRIBUTE_WIDTH,
            metric_attr: Metric::L1,
            samples: DEFAULT_SAMPLE_COUNT,
            ridge: DEFAULT_RIDGE,
            mode: AttributeMode::Propagated,
        }
    }
}

impl P2KConfig {
    pub fn validate(&self) -> Result<()> {
        self.pk.validate()?;
        if !(self.w_attr > 0.0 && self.w_attr.is_finite()) {
            return Err(Error::invalid(format!(
                "attribute bin width must be positive, got {}",
                self.w_attr
            )));
        }
        if !matches!(self.metric_attr, Metric::L1 | Metric::L2) {
            return Err(Error::invalid(format!(
                "attribute metric must be l1 or l2, got {}",
                self.metric_attr
            )));
        }
        if self.samples == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        Ok(())
    }
}

/// Hashes used in one P2K iteration. The label hash is absent for
/// unlabeled databases.
#[derive(Debug, Clone, PartialEq)]
pub struct P2KHashes {
    pub label: Option<HashFunction>,
    pub attributes: Vec<HashFunction>,
}

/// Fits the attribute model and draws every iteration's hashes from one
/// seeded stream: sample points first, then per iteration the label hash
/// followed by the attribute hashes.
pub fn prepare_p2k(db: &GraphDatabase, config: &P2KConfig) -> Result<(AttributeModel, Vec<P2KHashes>)> {
    config.validate()?;
    let x = db
        .stacked_attributes()
        .ok_or_else(|| Error::invalid("graph database has no node attributes"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.pk.seed);
    let model = fit_mixture(&x, config.ridge, config.samples, &mut rng)?;
    let columns = match config.mode {
        AttributeMode::Propagated => config.samples,
        AttributeMode::PerDimension => db.attr_dim(),
    };
    let k = db.num_labels();
    let hashes = (0..=config.pk.t_max)
        .map(|_| {
            let label = if k > 0 {
                Some(draw_hash(k, config.pk.w_label, config.pk.metric_label, &mut rng)?)
            } else {
                None
            };
            let attributes = draw_column_hashes(columns, config.w_attr, config.metric_attr, &mut rng)?;
            Ok(P2KHashes { label, attributes })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((model, hashes))
}

/// Propagation kernel for attributed graphs.
pub fn p2k(db: &GraphDatabase, config: &P2KConfig) -> Result<KernelMatrix> {
    Ok(p2k_traced(db, config)?.kernel)
}

pub fn p2k_traced(db: &GraphDatabase, config: &P2KConfig) -> Result<KernelRun> {
    let (model, hashes) = prepare_p2k(db, config)?;
    p2k_with(db, config, &model, &hashes)
}

/// P2K with a caller-supplied model and hashes.
pub fn p2k_with(
    db: &GraphDatabase,
    config: &P2KConfig,
    model: &AttributeModel,
    hashes: &[P2KHashes],
) -> Result<KernelRun> {
    config.validate()?;
    if hashes.len() != config.pk.t_max + 1 {
        return Err(Error::invalid("one hash set per iteration is required"));
    }
    if !db.has_attributes() {
        return Err(Error::invalid("graph database has no node attributes"));
    }
    let n = db.len();
    let (transition, indicator) = stack_database(db)?;
    let labeled = db.num_labels() > 0;
    let scheme = config.pk.scheme_config(db);
    let p0 = if labeled {
        init_label_distributions(db, &config.pk.prior)?
    } else {
        DenseMatrix::zeros(db.total_nodes(), 0)
    };
    let mut p = p0.clone();

    let (mut q, scaling) = match config.mode {
        AttributeMode::Propagated => {
            let q0 = init_pdf_matrix(model)?;
            let scaling = DensityScaling::fit(&q0);
            (q0, Some(scaling))
        }
        AttributeMode::PerDimension => (model.standardized.clone(), None),
    };

    let mut kernel = KernelMatrix::zeros(n);
    let mut contributions = Vec::with_capacity(hashes.len());
    for (t, h) in hashes.iter().enumerate() {
        let attr_bins = match &scaling {
            Some(s) => hash_columns(&h.attributes, &s.apply(&q))?,
            None => hash_columns(&h.attributes, &q)?,
        };
        let bins = match (&h.label, labeled) {
            (Some(hl), true) => combine_bins(&apply_hash(hl, &p)?, &attr_bins)?,
            (None, false) => attr_bins,
            _ => return Err(Error::invalid("label hashes do not match the label alphabet")),
        };
        let counts = count_features(&bins, &indicator, n, t)?;
        let c = contribution(&counts);
        kernel.add_assign(&c);
        contributions.push(c);
        if t < config.pk.t_max {
            if labeled {
                p = scheme.step(&transition, &p, &p0)?;
            }
            if config.mode == AttributeMode::Propagated {
                q = attribute_step(&transition, &q)?;
            }
        }
    }
    if config.pk.normalize {
        kernel = normalize_kernel(&kernel)?;
    }
    Ok(KernelRun {
        kernel,
        contributions,
    })
}

/// Reference P2K: per-graph dense propagation of labels and densities and
/// an explicit pairwise comparison of the full hash tuples.
pub fn p2k_bruteforce(
    db: &GraphDatabase,
    config: &P2KConfig,
    model: &AttributeModel,
    hashes: &[P2KHashes],
) -> Result<KernelMatrix> {
    let k = db.num_labels();
    let offsets = db.node_offsets();
    let propagated = config.mode == AttributeMode::Propagated;
    let (full_q, scaling) = if propagated {
        let q0 = init_pdf_matrix(model)?;
        let s = DensityScaling::fit(&q0);
        (q0, Some(s))
    } else {
        (model.standardized.clone(), None)
    };
    let prior = match &config.pk.prior {
        Prior::Custom(v) => v.clone(),
        Prior::Uniform => vec![1.0 / k.max(1) as f64; k],
    };

    struct State {
        transition: DenseMatrix,
        observed: Vec<bool>,
        p0: DenseMatrix,
        p: DenseMatrix,
        q: DenseMatrix,
    }
    let mut states: Vec<State> = db
        .graphs()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut p0 = DenseMatrix::zeros(g.node_count(), k);
            for (u, l) in g.labels().iter().enumerate() {
                match l {
                    Some(l) => p0.set(u, *l as usize, 1.0),
                    None => p0.row_mut(u).copy_from_slice(&prior),
                }
            }
            State {
                transition: dense_transition(&g.adjacency().to_dense()),
                observed: g.labels().iter().map(Option::is_some).collect(),
                p: p0.clone(),
                p0,
                q: full_q.row_block(offsets[i], offsets[i + 1]),
            }
        })
        .collect();

    let n = db.len();
    let mut kernel = KernelMatrix::zeros(n);
    for (t, h) in hashes.iter().enumerate() {
        let mut tuples: Vec<Vec<Vec<i64>>> = Vec::with_capacity(n);
        for s in &states {
            let q = match &scaling {
                Some(sc) => sc.apply(&s.q),
                None => s.q.clone(),
            };
            let mut per_node = Vec::with_capacity(s.p.rows());
            for u in 0..s.q.rows() {
                let mut key = Vec::with_capacity(h.attributes.len() + 1);
                if let Some(hl) = &h.label {
                    key.push(hl.hash_row(s.p.row(u))?);
                }
                for (col, ha) in h.attributes.iter().enumerate() {
                    key.push(ha.hash_row(&[q.get(u, col)])?);
                }
                per_node.push(key);
            }
            tuples.push(per_node);
        }
        for i in 0..n {
            for j in 0..n {
                let same = tuples[i]
                    .iter()
                    .map(|a| tuples[j].iter().filter(|b| *b == a).count())
                    .sum::<usize>();
                kernel.set(i, j, kernel.get(i, j) + same as f64);
            }
        }
        if t == config.pk.t_max {
            break;
        }
        for s in &mut states {
            if k > 0 {
                let mut current = s.p.clone();
                if config.pk.scheme == Scheme::LabelPropagation {
                    for (u, _) in s.observed.iter().enumerate().filter(|(_, o)| **o) {
                        current.row_mut(u).copy_from_slice(s.p0.row(u));
                    }
                }
                s.p = s.transition.matmul(&current)?;
            }
            if propagated {
                s.q = s.transition.matmul(&s.q)?;
            }
        }
    }
    if config.pk.normalize {
        kernel = normalize_kernel(&kernel)?;
    }
    Ok(kernel)
}
