//! Propagation kernels on pixel grids via discrete convolution.
//!
//! Label distributions of a grid are stored as `k` stacked planes. One
//! propagation step convolves every plane with a small nonnegative filter and
//! renormalizes each pixel's fiber, which is exactly a random-walk step on the
//! neighborhood graph the filter describes.

use std::fmt;
use std::str::FromStr;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{Graph, Label};
use crate::kernel::{
    contribution, count_features, draw_label_hashes, normalize_kernel, KernelMatrix, KernelRun,
    PKConfig,
};
use crate::lsh::{apply_hash, HashFunction};
use crate::sparse::CsrMatrix;

/// Square, odd-sized, nonnegative filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterMatrix {
    size: usize,
    weights: Vec<f64>,
    name: String,
}

impl FilterMatrix {
    pub fn new(size: usize, weights: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::invalid(format!("filter size {size} is not odd")));
        }
        if weights.len() != size * size {
            return Err(Error::dims(format!(
                "{} weights for a {size}x{size} filter",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("filter weights must be finite and nonnegative"));
        }
        Ok(FilterMatrix {
            size,
            weights,
            name: name.into(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.size + j]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Nonzero taps as `(row offset, column offset, weight)`, where pixel
    /// `(r, c)` receives `weight · P[r + dr][c + dc]`.
    fn taps(&self) -> Vec<(isize, isize, f64)> {
        let r = self.radius() as isize;
        let mut taps = Vec::new();
        for i in 0..self.size {
            for j in 0..self.size {
                let w = self.get(i, j);
                if w > 0.0 {
                    // convolution flips the kernel
                    taps.push((r - i as isize, r - j as isize, w));
                }
            }
        }
        taps
    }
}

#[rustfmt::skip]
const N1_4: [f64; 9] = [
    0.0,  0.25, 0.0,
    0.25, 0.0,  0.25,
    0.0,  0.25, 0.0,
];

#[rustfmt::skip]
const N1_8: [f64; 9] = [
    0.06, 0.17, 0.06,
    0.17, 0.05, 0.17,
    0.06, 0.17, 0.06,
];

#[rustfmt::skip]
const N2_16: [f64; 25] = [
    0.01, 0.06, 0.09, 0.06, 0.01,
    0.06, 0.04, 0.0,  0.04, 0.06,
    0.09, 0.0,  0.0,  0.0,  0.09,
    0.06, 0.04, 0.0,  0.04, 0.06,
    0.01, 0.06, 0.09, 0.06, 0.01,
];

/// One of the shipped circular-symmetric neighborhoods: `n1_4`, `n1_8`, `n2_16`.
pub fn filter_matrix(name: &str) -> Result<FilterMatrix> {
    match name {
        "n1_4" => FilterMatrix::new(3, N1_4.to_vec(), name),
        "n1_8" => FilterMatrix::new(3, N1_8.to_vec(), name),
        "n2_16" => FilterMatrix::new(5, N2_16.to_vec(), name),
        other => Err(Error::invalid(format!("unknown filter {other:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    /// Out-of-grid taps are dropped and each fiber is divided by the weight
    /// that stayed inside the grid.
    #[default]
    RenormalizedZero,
    /// The grid wraps around in both directions.
    Circular,
}

impl FromStr for Padding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "renorm" | "renormalized_zero" => Ok(Padding::RenormalizedZero),
            "circular" => Ok(Padding::Circular),
            other => Err(Error::invalid(format!("unknown padding {other:?}"))),
        }
    }
}

impl fmt::Display for Padding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Padding::RenormalizedZero => "renorm",
            Padding::Circular => "circular",
        })
    }
}

/// A `height × width` grid of node labels over the alphabet `0..num_labels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridGraph {
    height: usize,
    width: usize,
    num_labels: usize,
    labels: Vec<Label>,
}

impl GridGraph {
    pub fn new(height: usize, width: usize, num_labels: usize, labels: Vec<Label>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("grid dimensions must be at least 1"));
        }
        if labels.len() != height * width {
            return Err(Error::dims(format!(
                "{} labels for a {height}x{width} grid",
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|l| **l as usize >= num_labels) {
            return Err(Error::invalid(format!(
                "label {l} outside the alphabet of size {num_labels}"
            )));
        }
        Ok(GridGraph {
            height,
            width,
            num_labels,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, r: usize, c: usize) -> Label {
        self.labels[r * self.width + c]
    }

    pub fn node_count(&self) -> usize {
        self.height * self.width
    }

    /// The grid rotated by 90° clockwise.
    pub fn rotated90(&self) -> GridGraph {
        let (h, w) = (self.height, self.width);
        let mut labels = vec![0; h * w];
        // new grid is w × h; new (r, c) = old (h - 1 - c, r)
        for r in 0..w {
            for c in 0..h {
                labels[r * h + c] = self.label(h - 1 - c, r);
            }
        }
        GridGraph {
            height: w,
            width: h,
            num_labels: self.num_labels,
            labels,
        }
    }

    /// The grid cyclically shifted by `(dr, dc)`.
    pub fn shifted(&self, dr: usize, dc: usize) -> GridGraph {
        let (h, w) = (self.height, self.width);
        let mut labels = vec![0; h * w];
        for r in 0..h {
            for c in 0..w {
                labels[((r + dr) % h) * w + (c + dc) % w] = self.label(r, c);
            }
        }
        GridGraph {
            labels,
            ..self.clone()
        }
    }

    /// Initial distributions: one Kronecker fiber per pixel.
    pub fn initial_distribution(&self) -> GridDistribution {
        let n = self.node_count();
        let mut planes = vec![0.0; self.num_labels * n];
        for (p, &l) in self.labels.iter().enumerate() {
            planes[l as usize * n + p] = 1.0;
        }
        GridDistribution {
            height: self.height,
            width: self.width,
            num_labels: self.num_labels,
            planes,
        }
    }

    /// The neighborhood graph the filter describes: pixel `u` links to every
    /// pixel that feeds it under convolution, weighted by the tap.
    pub fn to_graph(&self, filter: &FilterMatrix, padding: Padding) -> Result<Graph> {
        let (h, w) = (self.height, self.width);
        let mut triplets = Vec::new();
        for r in 0..h {
            for c in 0..w {
                for (dr, dc, wt) in filter.taps() {
                    if let Some((sr, sc)) = source(r, c, dr, dc, h, w, padding) {
                        triplets.push((r * w + c, sr * w + sc, wt));
                    }
                }
            }
        }
        let adjacency = CsrMatrix::from_triplets(h * w, h * w, &triplets)?;
        Graph::new(adjacency, self.labels.iter().map(|l| Some(*l)).collect())
    }
}

#[inline]
fn source(
    r: usize,
    c: usize,
    dr: isize,
    dc: isize,
    h: usize,
    w: usize,
    padding: Padding,
) -> Option<(usize, usize)> {
    let sr = r as isize + dr;
    let sc = c as isize + dc;
    match padding {
        Padding::Circular => Some((
            sr.rem_euclid(h as isize) as usize,
            sc.rem_euclid(w as isize) as usize,
        )),
        Padding::RenormalizedZero => {
            if sr < 0 || sc < 0 || sr >= h as isize || sc >= w as isize {
                None
            } else {
                Some((sr as usize, sc as usize))
            }
        }
    }
}

/// Per-pixel label distributions of one grid, stored plane by plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    height: usize,
    width: usize,
    num_labels: usize,
    planes: Vec<f64>,
}

impl GridDistribution {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn plane(&self, label: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.planes[label * n..(label + 1) * n]
    }

    /// Distribution over labels at pixel `(r, c)`.
    pub fn fiber(&self, r: usize, c: usize) -> Vec<f64> {
        let n = self.height * self.width;
        let p = r * self.width + c;
        (0..self.num_labels).map(|l| self.planes[l * n + p]).collect()
    }

    /// Fibers as rows of an `(height·width) × k` matrix, pixels row-major.
    pub fn to_rows(&self) -> DenseMatrix {
        let n = self.height * self.width;
        let mut out = DenseMatrix::zeros(n, self.num_labels);
        for l in 0..self.num_labels {
            for (p, &v) in self.plane(l).iter().enumerate() {
                out.set(p, l, v);
            }
        }
        out
    }
}

/// One convolution step of every label plane with `filter`, followed by
/// per-fiber renormalization. A pixel that receives no weight keeps its fiber.
pub fn convolve_step(
    p: &GridDistribution,
    filter: &FilterMatrix,
    padding: Padding,
) -> Result<GridDistribution> {
    if filter.size().is_multiple_of(2) {
        return Err(Error::invalid("filter size must be odd"));
    }
    let (h, w) = (p.height, p.width);
    let n = h * w;
    let taps = filter.taps();

    // weight that lands inside the grid at every pixel (the convolution of an
    // all-ones plane with the filter)
    let mut norm = vec![0.0; n];
    let mut sources: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for r in 0..h {
        for c in 0..w {
            let mut s = Vec::with_capacity(taps.len());
            for &(dr, dc, wt) in &taps {
                if let Some((sr, sc)) = source(r, c, dr, dc, h, w, padding) {
                    s.push((sr * w + sc, wt));
                    norm[r * w + c] += wt;
                }
            }
            sources.push(s);
        }
    }

    let mut planes = vec![0.0; p.planes.len()];
    for l in 0..p.num_labels {
        let src = &p.planes[l * n..(l + 1) * n];
        let dst = &mut planes[l * n..(l + 1) * n];
        for (px, s) in sources.iter().enumerate() {
            if norm[px] > 0.0 {
                let acc: f64 = s.iter().map(|&(q, wt)| wt * src[q]).sum();
                dst[px] = acc / norm[px];
            } else {
                dst[px] = src[px];
            }
        }
    }
    Ok(GridDistribution {
        planes,
        ..p.clone()
    })
}

/// Uniform quantization of 8-bit intensities into `levels` labels:
/// `⌊v · levels / 256⌋`.
pub fn quantize_grayscale(pixels: &[u8], levels: u32) -> Result<Vec<Label>> {
    if levels == 0 || levels > 256 {
        return Err(Error::invalid(format!(
            "quantization levels must be in 1..=256, got {levels}"
        )));
    }
    Ok(pixels
        .iter()
        .map(|&v| (v as u32 * levels) / 256)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Iterations, label bin width, metric, normalization and seed. The
    /// propagation scheme is always convolution.
    pub pk: PKConfig,
    pub filter: FilterMatrix,
    pub padding: Padding,
}

fn grid_alphabet(grids: &[GridGraph]) -> Result<usize> {
    let k = grids.first().map_or(0, GridGraph::num_labels);
    if let Some((i, g)) = grids.iter().enumerate().find(|(_, g)| g.num_labels != k) {
        return Err(Error::invalid(format!(
            "grid {i} has {} labels, grid 0 has {k}",
            g.num_labels
        )));
    }
    if k == 0 && !grids.is_empty() {
        return Err(Error::invalid("label alphabet is empty"));
    }
    Ok(k)
}

/// Propagation kernel over a set of grids sharing one label alphabet.
pub fn grid_kernel(grids: &[GridGraph], config: &GridConfig) -> Result<KernelMatrix> {
    Ok(grid_kernel_traced(grids, config)?.kernel)
}

pub fn grid_kernel_traced(grids: &[GridGraph], config: &GridConfig) -> Result<KernelRun> {
    config.pk.validate()?;
    let k = grid_alphabet(grids)?;
    let hashes = draw_label_hashes(k.max(1), &config.pk)?;
    grid_kernel_with_hashes(grids, config, &hashes)
}

/// Per-iteration count features of every grid, using `hashes` in order.
pub fn grid_features(
    grids: &[GridGraph],
    config: &GridConfig,
    hashes: &[HashFunction],
) -> Result<Vec<crate::kernel::FeatureCounts>> {
    grid_alphabet(grids)?;
    let mut state: Vec<GridDistribution> = grids.iter().map(GridGraph::initial_distribution).collect();
    let indicator: Vec<usize> = grids
        .iter()
        .enumerate()
        .flat_map(|(i, g)| std::iter::repeat_n(i, g.node_count()))
        .collect();
    let mut features = Vec::with_capacity(hashes.len());
    for (t, h) in hashes.iter().enumerate() {
        let rows: Vec<DenseMatrix> = state.iter().map(GridDistribution::to_rows).collect();
        let mut data = Vec::with_capacity(indicator.len() * h.dim());
        for r in &rows {
            data.extend_from_slice(r.as_slice());
        }
        let stacked = DenseMatrix::from_vec(indicator.len(), h.dim(), data)?;
        let bins = apply_hash(h, &stacked)?;
        features.push(count_features(&bins, &indicator, grids.len(), t)?);
        if t + 1 < hashes.len() {
            state = state
                .iter()
                .map(|p| convolve_step(p, &config.filter, config.padding))
                .collect::<Result<_>>()?;
        }
    }
    Ok(features)
}

pub fn grid_kernel_with_hashes(
    grids: &[GridGraph],
    config: &GridConfig,
    hashes: &[HashFunction],
) -> Result<KernelRun> {
    if hashes.len() != config.pk.t_max + 1 {
        return Err(Error::invalid("one hash per iteration is required"));
    }
    let n = grids.len();
    let mut kernel = KernelMatrix::zeros(n);
    let mut contributions = Vec::with_capacity(hashes.len());
    for counts in grid_features(grids, config, hashes)? {
        let c = contribution(&counts);
        kernel.add_assign(&c);
        contributions.push(c);
    }
    if config.pk.normalize {
        kernel = normalize_kernel(&kernel)?;
    }
    Ok(KernelRun {
        kernel,
        contributions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_transition;
    use crate::propagation::diffusion_step;

    #[test]
    fn shipped_filters() {
        let f = filter_matrix("n1_4").unwrap();
        assert_eq!(f.weights, N1_4.to_vec());
        assert_eq!(f.get(0, 1), 0.25);
        assert_eq!(f.get(1, 1), 0.0);

        let f = filter_matrix("n1_8").unwrap();
        assert_eq!((f.get(1, 1), f.get(0, 1), f.get(0, 0)), (0.05, 0.17, 0.06));

        let f = filter_matrix("n2_16").unwrap();
        assert_eq!(f.size(), 5);
        assert_eq!((f.get(0, 0), f.get(0, 1), f.get(0, 2), f.get(1, 1)), (0.01, 0.06, 0.09, 0.04));
        assert_eq!(f.get(2, 2), 0.0);

        assert!(filter_matrix("n3_24").is_err());
        assert!(FilterMatrix::new(2, vec![0.25; 4], "even").is_err());
    }

    #[test]
    fn shipped_filters_are_rotation_symmetric() {
        for name in ["n1_4", "n1_8", "n2_16"] {
            let f = filter_matrix(name).unwrap();
            let s = f.size();
            for i in 0..s {
                for j in 0..s {
                    assert_eq!(f.get(i, j), f.get(j, s - 1 - i), "{name}");
                }
            }
        }
    }

    #[test]
    fn constant_grid_stays_constant() {
        let g = GridGraph::new(3, 3, 2, vec![0; 9]).unwrap();
        let f = filter_matrix("n1_4").unwrap();
        let p = convolve_step(&g.initial_distribution(), &f, Padding::RenormalizedZero).unwrap();
        assert!(p.plane(0).iter().all(|v| *v == 1.0));
        assert!(p.plane(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_pixel_is_unchanged() {
        let g = GridGraph::new(1, 1, 3, vec![2]).unwrap();
        for name in ["n1_4", "n1_8", "n2_16"] {
            let f = filter_matrix(name).unwrap();
            for padding in [Padding::RenormalizedZero, Padding::Circular] {
                let p0 = g.initial_distribution();
                let p1 = convolve_step(&p0, &f, padding).unwrap();
                assert_eq!(p1.fiber(0, 0), vec![0.0, 0.0, 1.0]);
            }
        }
    }

    #[test]
    fn convolution_matches_graph_diffusion() {
        let labels: Vec<Label> = (0..256u32).map(|i| (i * 7 + i / 16) % 3).collect();
        let g = GridGraph::new(16, 16, 3, labels).unwrap();
        let f = filter_matrix("n1_4").unwrap();
        let t = build_transition(g.to_graph(&f, Padding::RenormalizedZero).unwrap().adjacency()).unwrap();
        let mut grid = g.initial_distribution();
        let mut rows = grid.to_rows();
        for _ in 0..5 {
            grid = convolve_step(&grid, &f, Padding::RenormalizedZero).unwrap();
            rows = diffusion_step(&t, &rows).unwrap();
            assert!(grid.to_rows().max_abs_diff(&rows) < 1e-10);
        }
    }

    #[test]
    fn quantization_examples() {
        assert_eq!(quantize_grayscale(&[0, 255], 3).unwrap(), vec![0, 2]);
        assert_eq!(quantize_grayscale(&[128], 2).unwrap(), vec![1]);
        assert_eq!(quantize_grayscale(&[255], 256).unwrap(), vec![255]);
        assert!(quantize_grayscale(&[1], 257).is_err());
        assert!(quantize_grayscale(&[1], 0).is_err());
    }

    #[test]
    fn rotation_and_shift_helpers() {
        let g = GridGraph::new(2, 3, 6, vec![0, 1, 2, 3, 4, 5]).unwrap();
        let r = g.rotated90();
        assert_eq!((r.height(), r.width()), (3, 2));
        assert_eq!(r.labels(), &[3, 0, 4, 1, 5, 2]);
        assert_eq!(r.rotated90().rotated90().rotated90(), g);
        let s = g.shifted(1, 1);
        assert_eq!(s.labels(), &[5, 3, 4, 2, 0, 1]);
    }

    #[test]
    fn mixed_alphabets_rejected() {
        let a = GridGraph::new(2, 2, 2, vec![0, 1, 1, 0]).unwrap();
        let b = GridGraph::new(2, 2, 3, vec![0, 1, 2, 0]).unwrap();
        let cfg = GridConfig {
            pk: PKConfig {
                t_max: 1,
                ..PKConfig::default()
            },
            filter: filter_matrix("n1_4").unwrap(),
            padding: Padding::RenormalizedZero,
        };
        assert!(grid_kernel(&[a, b], &cfg).is_err());
    }

    #[test]
    fn duplicate_grids_normalize_to_one() {
        let a = GridGraph::new(4, 4, 2, (0..16).map(|i| (i % 3 == 0) as u32).collect()).unwrap();
        let b = GridGraph::new(4, 4, 2, (0..16).map(|i| (i % 5 == 0) as u32).collect()).unwrap();
        let cfg = GridConfig {
            pk: PKConfig {
                t_max: 3,
                normalize: true,
                ..PKConfig::default()
            },
            filter: filter_matrix("n1_8").unwrap(),
            padding: Padding::RenormalizedZero,
        };
        let k = grid_kernel(&[a.clone(), a, b], &cfg).unwrap();
        assert_eq!(k.row(0), k.row(1));
        assert!((k.get(0, 1) - 1.0).abs() < 1e-15);
    }
}
