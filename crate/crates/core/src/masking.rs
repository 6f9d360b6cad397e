//! Random removal of observed node labels.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::GraphDatabase;

/// Hides the labels of `⌊fraction · L⌋` nodes chosen uniformly among the `L`
/// currently labeled nodes of the database. Structure, attributes and the
/// label alphabet are kept.
pub fn mask_labels<R: Rng + ?Sized>(
    db: &GraphDatabase,
    fraction: f64,
    rng: &mut R,
) -> Result<GraphDatabase> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("fraction {fraction} outside [0, 1]")));
    }
    let labeled: Vec<(usize, usize)> = db
        .graphs()
        .iter()
        .enumerate()
        .flat_map(|(g, graph)| {
            graph
                .labels()
                .iter()
                .enumerate()
                .filter(|(_, l)| l.is_some())
                .map(move |(u, _)| (g, u))
        })
        .collect();
    // the epsilon absorbs products like 0.7 · 10 = 7.000000000000001
    let count = ((fraction * labeled.len() as f64) + 1e-9).floor() as usize;
    let count = count.min(labeled.len());

    let mut labels: Vec<Vec<_>> = db.graphs().iter().map(|g| g.labels().to_vec()).collect();
    for idx in sample(rng, labeled.len(), count) {
        let (g, u) = labeled[idx];
        labels[g][u] = None;
    }
    db.relabeled(labels, db.num_labels())
}
