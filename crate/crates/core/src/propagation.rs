//! One-step propagation schemes on stacked label distributions.

use std::str::FromStr;

use crate::dense::DistributionMatrix;
use crate::error::{Error, Result};
use crate::graph::TransitionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Diffusion,
    LabelPropagation,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusion" => Ok(Scheme::Diffusion),
            "labelprop" | "label_propagation" => Ok(Scheme::LabelPropagation),
            other => Err(Error::invalid(format!("unknown propagation scheme {other:?}"))),
        }
    }
}

/// A propagation scheme together with the observed-label mask label
/// propagation needs. Diffusion ignores the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    scheme: Scheme,
    observed_mask: Option<Vec<bool>>,
}

impl SchemeConfig {
    pub fn diffusion() -> Self {
        SchemeConfig {
            scheme: Scheme::Diffusion,
            observed_mask: None,
        }
    }

    pub fn label_propagation(observed_mask: Vec<bool>) -> Self {
        SchemeConfig {
            scheme: Scheme::LabelPropagation,
            observed_mask: Some(observed_mask),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn observed_mask(&self) -> Option<&[bool]> {
        self.observed_mask.as_deref()
    }

    /// Advances `p` by one step. `p0` supplies the rows pushed back under label
    /// propagation.
    pub fn step(
        &self,
        t: &TransitionMatrix,
        p: &DistributionMatrix,
        p0: &DistributionMatrix,
    ) -> Result<DistributionMatrix> {
        match (self.scheme, &self.observed_mask) {
            (Scheme::Diffusion, _) => diffusion_step(t, p),
            (Scheme::LabelPropagation, Some(mask)) => label_propagation_step(t, p, p0, mask),
            (Scheme::LabelPropagation, None) => {
                Err(Error::invalid("label propagation requires an observed-label mask"))
            }
        }
    }
}

/// `P_{t+1} = T · P_t`.
pub fn diffusion_step(t: &TransitionMatrix, p: &DistributionMatrix) -> Result<DistributionMatrix> {
    t.as_csr().mul_dense(p)
}

/// Resets the rows of observed nodes to their initial distributions.
pub fn push_back(
    p: &DistributionMatrix,
    p0: &DistributionMatrix,
    mask: &[bool],
) -> Result<DistributionMatrix> {
    if p.rows() != p0.rows() || p.cols() != p0.cols() {
        return Err(Error::dims(format!(
            "P is {}x{}, P0 is {}x{}",
            p.rows(),
            p.cols(),
            p0.rows(),
            p0.cols()
        )));
    }
    if mask.len() != p.rows() {
        return Err(Error::dims(format!(
            "mask has {} entries for {} nodes",
            mask.len(),
            p.rows()
        )));
    }
    let mut out = p.clone();
    for (u, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        out.row_mut(u).copy_from_slice(p0.row(u));
    }
    Ok(out)
}

/// Label propagation: push back the observed rows, then diffuse.
pub fn label_propagation_step(
    t: &TransitionMatrix,
    p: &DistributionMatrix,
    p0: &DistributionMatrix,
    mask: &[bool],
) -> Result<DistributionMatrix> {
    diffusion_step(t, &push_back(p, p0, mask)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::graph::{build_transition, Graph};

    fn path_transition() -> TransitionMatrix {
        let g = Graph::from_undirected_edges(3, &[(0, 1), (1, 2)], vec![None; 3]).unwrap();
        build_transition(g.adjacency()).unwrap()
    }

    #[test]
    fn diffusion_on_path_matches_dense_product() {
        let t = path_transition();
        let p0 = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p1 = diffusion_step(&t, &p0).unwrap();
        assert_eq!(p1, t.to_dense().matmul(&p0).unwrap());
        assert_eq!(
            p1,
            DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
        );
    }

    #[test]
    fn identity_and_uniform_are_fixed_points() {
        let p = DenseMatrix::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        assert_eq!(diffusion_step(&TransitionMatrix::identity(2), &p).unwrap(), p);

        let uniform = DenseMatrix::from_vec(3, 4, vec![0.25; 12]).unwrap();
        assert_eq!(diffusion_step(&path_transition(), &uniform).unwrap(), uniform);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = DenseMatrix::zeros(2, 2);
        assert!(diffusion_step(&path_transition(), &p).is_err());
        let p3 = DenseMatrix::zeros(3, 2);
        assert!(label_propagation_step(&path_transition(), &p3, &p3, &[true]).is_err());
    }

    #[test]
    fn push_back_extremes() {
        let t = path_transition();
        let p0 = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let p = DenseMatrix::from_rows(&[vec![0.2, 0.8], vec![0.9, 0.1], vec![0.4, 0.6]]).unwrap();
        assert_eq!(
            label_propagation_step(&t, &p, &p0, &[true; 3]).unwrap(),
            diffusion_step(&t, &p0).unwrap()
        );
        assert_eq!(
            label_propagation_step(&t, &p, &p0, &[false; 3]).unwrap(),
            diffusion_step(&t, &p).unwrap()
        );
    }

    #[test]
    fn push_back_on_path() {
        let t = path_transition();
        let p0 = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let p1 = label_propagation_step(&t, &p0, &p0, &[true, false, false]).unwrap();
        assert_eq!(p1.row(1), &[0.75, 0.25]);
    }

    #[test]
    fn label_propagation_needs_mask() {
        let cfg = SchemeConfig {
            scheme: Scheme::LabelPropagation,
            observed_mask: None,
        };
        let p = DenseMatrix::zeros(3, 2);
        assert!(cfg.step(&path_transition(), &p, &p).is_err());
    }
}
