//! Graphs, graph databases and random-walk transition matrices.

use crate::dense::{DenseMatrix, DistributionMatrix};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Index into the label alphabet `0..k`.
pub type Label = u32;

/// A graph with nonnegative (possibly directed) edge weights, optional node
/// labels, optional node attributes and an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: CsrMatrix,
    labels: Vec<Option<Label>>,
    attributes: Option<DenseMatrix>,
    class: Option<i64>,
}

impl Graph {
    pub fn new(adjacency: CsrMatrix, labels: Vec<Option<Label>>) -> Result<Self> {
        if adjacency.rows() != adjacency.cols() {
            return Err(Error::invalid(format!(
                "adjacency is {}x{}, expected a square matrix",
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        if let Some(w) = adjacency.values().iter().find(|w| **w < 0.0) {
            return Err(Error::invalid(format!("negative edge weight {w}")));
        }
        if labels.len() != adjacency.rows() {
            return Err(Error::dims(format!(
                "{} labels for {} nodes",
                labels.len(),
                adjacency.rows()
            )));
        }
        Ok(Graph {
            adjacency,
            labels,
            attributes: None,
            class: None,
        })
    }

    /// Unit-weight graph with the edges taken as directed `(from, to)` pairs.
    pub fn from_directed_edges(
        n: usize,
        edges: &[(usize, usize)],
        labels: Vec<Option<Label>>,
    ) -> Result<Self> {
        let triplets: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Self::new(CsrMatrix::from_triplets(n, n, &triplets)?, labels)
    }

    /// Unit-weight undirected graph; each listed edge is stored in both directions.
    pub fn from_undirected_edges(
        n: usize,
        edges: &[(usize, usize)],
        labels: Vec<Option<Label>>,
    ) -> Result<Self> {
        let mut triplets = Vec::with_capacity(2 * edges.len());
        for &(u, v) in edges {
            triplets.push((u, v, 1.0));
            if u != v {
                triplets.push((v, u, 1.0));
            }
        }
        Self::new(CsrMatrix::from_triplets(n, n, &triplets)?, labels)
    }

    pub fn with_attributes(mut self, attributes: DenseMatrix) -> Result<Self> {
        if attributes.rows() != self.node_count() {
            return Err(Error::dims(format!(
                "{} attribute rows for {} nodes",
                attributes.rows(),
                self.node_count()
            )));
        }
        self.attributes = Some(attributes);
        Ok(self)
    }

    pub fn with_class(mut self, class: i64) -> Self {
        self.class = Some(class);
        self
    }

    pub(crate) fn with_labels(&self, labels: Vec<Option<Label>>) -> Graph {
        debug_assert_eq!(labels.len(), self.node_count());
        Graph {
            labels,
            ..self.clone()
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn labels(&self) -> &[Option<Label>] {
        &self.labels
    }

    pub fn attributes(&self) -> Option<&DenseMatrix> {
        self.attributes.as_ref()
    }

    pub fn class(&self) -> Option<i64> {
        self.class
    }

    /// Weighted out-degree of every node.
    pub fn out_degrees(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|u| self.adjacency.row_sum(u))
            .collect()
    }
}

/// An ordered collection of graphs sharing one label alphabet and one
/// attribute dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDatabase {
    graphs: Vec<Graph>,
    num_labels: usize,
    attr_dim: usize,
}

impl GraphDatabase {
    /// Builds a database. The alphabet size is `num_labels` when given,
    /// otherwise one past the largest observed label (0 when nothing is labeled).
    pub fn new(graphs: Vec<Graph>, num_labels: Option<usize>) -> Result<Self> {
        let max_label = graphs
            .iter()
            .flat_map(|g| g.labels.iter().flatten())
            .copied()
            .max();
        let observed = max_label.map_or(0, |l| l as usize + 1);
        let k = match num_labels {
            Some(k) if k < observed => {
                return Err(Error::invalid(format!(
                    "label {} outside the declared alphabet of size {k}",
                    observed - 1
                )))
            }
            Some(k) => k,
            None => observed,
        };

        let mut attr_dim = None;
        for (i, g) in graphs.iter().enumerate() {
            let d = g.attributes.as_ref().map(DenseMatrix::cols);
            match (attr_dim, d) {
                (None, _) => attr_dim = Some(d),
                (Some(prev), cur) if prev != cur => {
                    return Err(Error::invalid(format!(
                        "graph {i} has attribute dimension {cur:?}, earlier graphs {prev:?}"
                    )))
                }
                _ => {}
            }
        }
        Ok(GraphDatabase {
            graphs,
            num_labels: k,
            attr_dim: attr_dim.flatten().unwrap_or(0),
        })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn attr_dim(&self) -> usize {
        self.attr_dim
    }

    pub fn has_attributes(&self) -> bool {
        self.graphs.first().is_some_and(|g| g.attributes.is_some())
    }

    pub fn total_nodes(&self) -> usize {
        self.graphs.iter().map(Graph::node_count).sum()
    }

    /// Start offset of every graph in the stacked node order, plus the total.
    pub fn node_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.graphs.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for g in &self.graphs {
            acc += g.node_count();
            offsets.push(acc);
        }
        offsets
    }

    pub fn graph_indicator(&self) -> Vec<usize> {
        self.graphs
            .iter()
            .enumerate()
            .flat_map(|(i, g)| std::iter::repeat_n(i, g.node_count()))
            .collect()
    }

    /// `true` for every node that carries an observed label, in stacked order.
    pub fn observed_mask(&self) -> Vec<bool> {
        self.graphs
            .iter()
            .flat_map(|g| g.labels.iter().map(Option::is_some))
            .collect()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.graphs
            .iter()
            .all(|g| g.labels.iter().all(Option::is_some))
    }

    pub fn classes(&self) -> Option<Vec<i64>> {
        self.graphs.iter().map(Graph::class).collect()
    }

    /// Stacked `N × D` attribute matrix, or `None` without attributes.
    pub fn stacked_attributes(&self) -> Option<DenseMatrix> {
        if !self.has_attributes() {
            return None;
        }
        let mut data = Vec::with_capacity(self.total_nodes() * self.attr_dim);
        for g in &self.graphs {
            data.extend_from_slice(g.attributes.as_ref()?.as_slice());
        }
        DenseMatrix::from_vec(self.total_nodes(), self.attr_dim, data).ok()
    }

    /// Same graphs with every node label replaced, alphabet size `num_labels`.
    pub fn relabeled(&self, labels: Vec<Vec<Option<Label>>>, num_labels: usize) -> Result<Self> {
        if labels.len() != self.graphs.len() {
            return Err(Error::dims("one label vector per graph is required"));
        }
        let graphs = self
            .graphs
            .iter()
            .zip(labels)
            .map(|(g, l)| {
                if l.len() != g.node_count() {
                    return Err(Error::dims("label vector length differs from node count"));
                }
                Ok(g.with_labels(l))
            })
            .collect::<Result<Vec<_>>>()?;
        GraphDatabase::new(graphs, Some(num_labels))
    }
}

/// Sparse row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(CsrMatrix);

impl TransitionMatrix {
    pub fn as_csr(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.rows()
    }

    pub fn identity(n: usize) -> Self {
        TransitionMatrix(CsrMatrix::identity(n))
    }

    /// Wraps an existing matrix after checking that it is square, nonnegative
    /// and row-stochastic within `1e-12`.
    pub fn try_from_csr(m: CsrMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::invalid("transition matrix must be square"));
        }
        if m.values().iter().any(|v| *v < 0.0) {
            return Err(Error::invalid("transition matrix has negative entries"));
        }
        for i in 0..m.rows() {
            let s = m.row_sum(i);
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("row {i} sums to {s}")));
            }
        }
        Ok(TransitionMatrix(m))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.0.to_dense()
    }
}

/// Row-normalizes an adjacency matrix. Rows without outgoing weight become
/// self-loops so that mass on an isolated or sink node stays in place.
pub fn build_transition(adjacency: &CsrMatrix) -> Result<TransitionMatrix> {
    let n = adjacency.rows();
    if adjacency.cols() != n {
        return Err(Error::invalid(format!(
            "adjacency is {}x{}, expected a square matrix",
            n,
            adjacency.cols()
        )));
    }
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(adjacency.nnz());
    let mut values = Vec::with_capacity(adjacency.nnz());
    indptr.push(0);
    for u in 0..n {
        let (cols, vals) = adjacency.row(u);
        if let Some(w) = vals.iter().find(|w| **w < 0.0) {
            return Err(Error::invalid(format!("negative edge weight {w} in row {u}")));
        }
        let degree: f64 = vals.iter().sum();
        if degree > 0.0 {
            for (&v, &w) in cols.iter().zip(vals) {
                if w > 0.0 {
                    indices.push(v);
                    values.push(w / degree);
                }
            }
        } else {
            indices.push(u);
            values.push(1.0);
        }
        indptr.push(indices.len());
    }
    Ok(TransitionMatrix(CsrMatrix::from_raw_parts(
        n, n, indptr, indices, values,
    )))
}

/// Turns the nodes in `absorbing` into absorbing states: their rows become
/// identity rows, all other rows are kept.
pub fn absorbing_transition(t: &TransitionMatrix, absorbing: &[usize]) -> Result<TransitionMatrix> {
    let n = t.size();
    let mut is_absorbing = vec![false; n];
    for &u in absorbing {
        if u >= n {
            return Err(Error::invalid(format!(
                "absorbing node {u} out of range for {n} nodes"
            )));
        }
        is_absorbing[u] = true;
    }
    Ok(absorbing_from_mask(t, &is_absorbing))
}

pub(crate) fn absorbing_from_mask(t: &TransitionMatrix, is_absorbing: &[bool]) -> TransitionMatrix {
    let n = t.size();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for (u, &absorb) in is_absorbing.iter().enumerate() {
        if absorb {
            indices.push(u);
            values.push(1.0);
        } else {
            let (cols, vals) = t.0.row(u);
            indices.extend_from_slice(cols);
            values.extend_from_slice(vals);
        }
        indptr.push(indices.len());
    }
    TransitionMatrix(CsrMatrix::from_raw_parts(n, n, indptr, indices, values))
}

/// Initial distribution assigned to unlabeled nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Prior {
    #[default]
    Uniform,
    Custom(Vec<f64>),
}

/// `P_0`: a Kronecker row for every labeled node and the prior row for every
/// unlabeled one, in stacked node order.
pub fn init_label_distributions(db: &GraphDatabase, prior: &Prior) -> Result<DistributionMatrix> {
    let k = db.num_labels();
    if k == 0 {
        return Err(Error::invalid("label alphabet is empty"));
    }
    let prior_row = match prior {
        Prior::Uniform => vec![1.0 / k as f64; k],
        Prior::Custom(p) => {
            if p.len() != k {
                return Err(Error::dims(format!("prior has {} entries, k = {k}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::invalid("prior entries must be finite and nonnegative"));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("prior sums to {s}, expected 1")));
            }
            p.clone()
        }
    };
    let mut p0 = DenseMatrix::zeros(db.total_nodes(), k);
    let labels = db.graphs().iter().flat_map(|g| g.labels().iter());
    for (u, label) in labels.enumerate() {
        match label {
            Some(l) => p0.set(u, *l as usize, 1.0),
            None => p0.row_mut(u).copy_from_slice(&prior_row),
        }
    }
    Ok(p0)
}

fn round_significant(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Relabels every node by its weighted out-degree. Distinct degrees over the
/// whole database are sorted and mapped to `0..k`.
pub fn degree_labels(db: &GraphDatabase) -> GraphDatabase {
    let degrees: Vec<Vec<f64>> = db
        .graphs()
        .iter()
        .map(|g| g.out_degrees().into_iter().map(round_significant).collect())
        .collect();
    let mut distinct: Vec<f64> = degrees.iter().flatten().copied().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    let labels = degrees
        .iter()
        .map(|ds| {
            ds.iter()
                .map(|d| {
                    let idx = distinct
                        .binary_search_by(|probe| probe.total_cmp(d))
                        .expect("degree was collected above");
                    Some(idx as Label)
                })
                .collect()
        })
        .collect();
    db.relabeled(labels, distinct.len())
        .expect("relabeling preserves node counts")
}

/// Per-graph transitions stacked into one block-diagonal matrix, plus the
/// owning graph of every stacked node.
pub fn stack_database(db: &GraphDatabase) -> Result<(TransitionMatrix, Vec<usize>)> {
    if db.is_empty() {
        return Err(Error::invalid("graph database is empty"));
    }
    let blocks = db
        .graphs()
        .iter()
        .map(|g| build_transition(g.adjacency()))
        .collect::<Result<Vec<_>>>()?;
    let stacked = CsrMatrix::block_diagonal(blocks.iter().map(TransitionMatrix::as_csr));
    Ok((TransitionMatrix(stacked), db.graph_indicator()))
}
