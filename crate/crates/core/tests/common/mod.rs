#![allow(dead_code)]

use propkern::dense::DenseMatrix;
use propkern::grid::GridGraph;
use propkern::sparse::CsrMatrix;
use propkern::{Graph, GraphDatabase, Label};
use rand::Rng;

/// Random weighted graph with `n` nodes. About `unlabeled` of the nodes carry
/// no label; the rest draw labels from `0..k`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, k: usize, unlabeled: f64, directed: bool) -> Graph {
    let p = rng.random_range(0.1..0.6);
    let mut triplets = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v || (!directed && v < u) {
                continue;
            }
            if rng.random_bool(p) {
                let w = if rng.random_bool(0.3) { rng.random_range(0.5..3.0) } else { 1.0 };
                triplets.push((u, v, w));
                if !directed {
                    triplets.push((v, u, w));
                }
            }
        }
    }
    let labels: Vec<Option<Label>> = (0..n)
        .map(|_| {
            if rng.random_bool(unlabeled) {
                None
            } else {
                Some(rng.random_range(0..k as u32))
            }
        })
        .collect();
    let adj = CsrMatrix::from_triplets(n, n, &triplets).unwrap();
    Graph::new(adj, labels).unwrap()
}

/// Copy of `db` with every stored edge weight set to 1.
pub fn unweighted(db: &GraphDatabase) -> GraphDatabase {
    let graphs = db
        .graphs()
        .iter()
        .map(|g| {
            let n = g.node_count();
            let triplets: Vec<_> = (0..n)
                .flat_map(|u| g.adjacency().row(u).0.iter().map(move |&v| (u, v, 1.0)))
                .collect();
            let mut out = Graph::new(CsrMatrix::from_triplets(n, n, &triplets).unwrap(), g.labels().to_vec()).unwrap();
            if let Some(x) = g.attributes() {
                out = out.with_attributes(x.clone()).unwrap();
            }
            if let Some(c) = g.class() {
                out = out.with_class(c);
            }
            out
        })
        .collect();
    GraphDatabase::new(graphs, Some(db.num_labels())).unwrap()
}

pub fn random_db<R: Rng>(
    rng: &mut R,
    max_graphs: usize,
    max_nodes: usize,
    max_k: usize,
    unlabeled: f64,
) -> GraphDatabase {
    let k = rng.random_range(1..=max_k);
    let count = rng.random_range(1..=max_graphs);
    let directed = rng.random_bool(0.3);
    let graphs = (0..count)
        .map(|_| {
            let n = rng.random_range(1..=max_nodes);
            random_graph(rng, n, k, unlabeled, directed)
        })
        .collect();
    GraphDatabase::new(graphs, Some(k)).unwrap()
}

/// Like [`random_db`], with `d`-dimensional node attributes on every graph
/// and at least two nodes overall (the attribute model needs two rows).
pub fn random_attributed_db<R: Rng>(
    rng: &mut R,
    max_graphs: usize,
    max_nodes: usize,
    max_k: usize,
    d: usize,
) -> GraphDatabase {
    let db = loop {
        let db = random_db(rng, max_graphs, max_nodes, max_k, 0.2);
        if db.total_nodes() >= 2 {
            break db;
        }
    };
    let k = db.num_labels();
    let graphs = db
        .graphs()
        .iter()
        .map(|g| {
            let x: Vec<f64> = (0..g.node_count() * d).map(|_| rng.random_range(-2.0..2.0)).collect();
            g.clone()
                .with_attributes(DenseMatrix::from_vec(g.node_count(), d, x).unwrap())
                .unwrap()
        })
        .collect();
    GraphDatabase::new(graphs, Some(k)).unwrap()
}

pub fn random_grid<R: Rng>(rng: &mut R, h: usize, w: usize, k: usize) -> GridGraph {
    let labels = (0..h * w).map(|_| rng.random_range(0..k as u32)).collect();
    GridGraph::new(h, w, k, labels).unwrap()
}

/// The two 6-node graphs of the running example: labels 0/1, `None` for the
/// unlabeled nodes.
pub fn example_pair() -> GraphDatabase {
    let gi = Graph::from_undirected_edges(
        6,
        &[(0, 1), (1, 2), (1, 3), (4, 0), (4, 1), (4, 3), (5, 3)],
        vec![Some(0), Some(0), None, Some(1), None, None],
    )
    .unwrap();
    let gj = Graph::from_undirected_edges(
        6,
        &[(1, 0), (4, 0), (4, 2), (4, 3), (5, 2), (5, 3)],
        vec![None, Some(1), Some(0), None, Some(1), Some(0)],
    )
    .unwrap();
    GraphDatabase::new(vec![gi, gj], Some(2)).unwrap()
}

/// Two-class stochastic block model database. Every graph has `n` nodes,
/// 60% labeled 0 and the rest labeled 1, so label histograms are identical
/// across classes. Class 0 links mostly within a label block, class 1 mostly
/// across blocks.
pub fn sbm_db<R: Rng>(rng: &mut R, per_class: usize, n: usize) -> GraphDatabase {
    let (p_hi, p_lo) = (0.5, 0.05);
    let mut graphs = Vec::with_capacity(2 * per_class);
    for class in 0..2i64 {
        for _ in 0..per_class {
            let labels: Vec<Label> = (0..n).map(|u| Label::from(u * 5 >= n * 3)).collect();
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    let same = labels[u] == labels[v];
                    let p = if same == (class == 0) { p_hi } else { p_lo };
                    if rng.random_bool(p) {
                        edges.push((u, v));
                    }
                }
            }
            let g = Graph::from_undirected_edges(n, &edges, labels.into_iter().map(Some).collect())
                .unwrap()
                .with_class(class);
            graphs.push(g);
        }
    }
    GraphDatabase::new(graphs, Some(2)).unwrap()
}
