//! Propagation kernels for graph databases.
//!
//! Node information (label distributions, attribute densities) is propagated
//! along random walks, hashed with locality-sensitive hashes after every step,
//! and graphs are compared through the bin counts of their nodes. The crate
//! covers fully and partially labeled graphs, directed and weighted edges,
//! continuous node attributes and pixel grids, plus dataset loaders and a
//! cross-validation harness.

pub mod attributes;
pub mod dense;
pub mod error;
pub mod eval;
pub mod graph;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod lsh;
pub mod masking;
pub mod propagation;
pub mod sparse;

pub use dense::{DenseMatrix, DistributionMatrix};
pub use error::{Error, Result};
pub use graph::{Graph, GraphDatabase, Label, Prior, TransitionMatrix};
pub use kernel::{propagation_kernel, KernelMatrix, PKConfig};
pub use lsh::{BinAssignment, HashFunction, Metric};
pub use propagation::{Scheme, SchemeConfig};
