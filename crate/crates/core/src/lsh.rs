//! Locality-sensitive hashing of distribution rows and attribute vectors.
//!
//! A hash is `h(x) = floor((vᵀx + b) / w)` with a random projection `v` drawn
//! from a p-stable distribution: standard normal for ℓ² and Hellinger,
//! standard Cauchy for ℓ¹ and total variation. Hellinger hashing applies an
//! entrywise square root first, which turns it into an ℓ² problem.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    TotalVariation,
    Hellinger,
    L1,
    L2,
}

impl Metric {
    fn uses_cauchy(self) -> bool {
        matches!(self, Metric::TotalVariation | Metric::L1)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tv" => Ok(Metric::TotalVariation),
            "h" => Ok(Metric::Hellinger),
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::TotalVariation => "tv",
            Metric::Hellinger => "h",
            Metric::L1 => "l1",
            Metric::L2 => "l2",
        })
    }
}

/// One draw of the hash family: projection, offset, bin width and metric.
#[derive(Debug, Clone, PartialEq)]
pub struct HashFunction {
    width: f64,
    projection: Vec<f64>,
    offset: f64,
    metric: Metric,
}

impl HashFunction {
    pub fn new(projection: Vec<f64>, offset: f64, width: f64, metric: Metric) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::invalid(format!("bin width must be positive, got {width}")));
        }
        if !(0.0..width).contains(&offset) {
            return Err(Error::invalid(format!("offset {offset} outside [0, {width})")));
        }
        if projection.is_empty() || projection.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection must be nonempty and finite"));
        }
        Ok(HashFunction {
            width,
            projection,
            offset,
            metric,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.projection.len()
    }

    /// Raw integer bin of a single row.
    pub fn hash_row(&self, x: &[f64]) -> Result<i64> {
        if x.len() != self.projection.len() {
            return Err(Error::dims(format!(
                "row of length {} hashed with a {}-dimensional projection",
                x.len(),
                self.projection.len()
            )));
        }
        let dot = if self.metric == Metric::Hellinger {
            let mut acc = 0.0;
            for (v, &xi) in self.projection.iter().zip(x) {
                if xi < 0.0 {
                    return Err(Error::invalid(format!(
                        "negative entry {xi} under the Hellinger metric"
                    )));
                }
                acc += v * xi.sqrt();
            }
            acc
        } else {
            self.projection.iter().zip(x).map(|(v, xi)| v * xi).sum()
        };
        // `as` saturates, so huge Cauchy projections land in the extreme bins.
        Ok(((dot + self.offset) / self.width).floor() as i64)
    }
}

/// Draws one hash function of dimension `dim`.
///
/// The projection entries are standard normal for Hellinger and ℓ², and a
/// ratio of two independent standard normal vectors (standard Cauchy) for
/// total variation and ℓ¹. The offset is uniform on `[0, w)`.
pub fn draw_hash<R: Rng + ?Sized>(
    dim: usize,
    width: f64,
    metric: Metric,
    rng: &mut R,
) -> Result<HashFunction> {
    if dim == 0 {
        return Err(Error::invalid("hash dimension must be at least 1"));
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::invalid(format!("bin width must be positive, got {width}")));
    }
    let mut projection: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    if metric.uses_cauchy() {
        let denom: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for (v, d) in projection.iter_mut().zip(denom) {
            *v /= d;
        }
    }
    let offset = width * rng.random::<f64>();
    // zero denominators are measure-zero but would make the projection infinite
    for v in projection.iter_mut().filter(|v| !v.is_finite()) {
        *v = f64::MAX.copysign(*v);
    }
    HashFunction::new(projection, offset, width, metric)
}

/// Raw bins of every row plus a dense re-indexing `0..bin_count` in order of
/// first occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinAssignment {
    raw: Vec<i64>,
    compact: Vec<usize>,
    bin_count: usize,
}

impl BinAssignment {
    pub fn from_raw(raw: Vec<i64>) -> Self {
        let compact = compact_keys(&raw);
        let bin_count = compact.iter().max().map_or(0, |m| m + 1);
        BinAssignment {
            raw,
            compact,
            bin_count,
        }
    }

    /// Builds an assignment from arbitrary hashable keys; equal keys share a bin.
    pub fn from_keys<K: Hash + Eq>(keys: &[K]) -> Self {
        let compact = compact_keys(keys);
        let raw = compact.iter().map(|&c| c as i64).collect();
        let bin_count = compact.iter().max().map_or(0, |m| m + 1);
        BinAssignment {
            raw,
            compact,
            bin_count,
        }
    }

    pub fn raw(&self) -> &[i64] {
        &self.raw
    }

    pub fn compact(&self) -> &[usize] {
        &self.compact
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn len(&self) -> usize {
        self.compact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compact.is_empty()
    }
}

fn compact_keys<K: Hash + Eq>(keys: &[K]) -> Vec<usize> {
    let mut seen: HashMap<&K, usize> = HashMap::with_capacity(keys.len());
    keys.iter()
        .map(|k| {
            let next = seen.len();
            *seen.entry(k).or_insert(next)
        })
        .collect()
}

/// Hashes every row of `x`.
pub fn apply_hash(h: &HashFunction, x: &DenseMatrix) -> Result<BinAssignment> {
    if x.cols() != h.dim() {
        return Err(Error::dims(format!(
            "matrix has {} columns, hash expects {}",
            x.cols(),
            h.dim()
        )));
    }
    let raw = x
        .iter_rows()
        .map(|row| h.hash_row(row))
        .collect::<Result<Vec<_>>>()?;
    Ok(BinAssignment::from_raw(raw))
}

/// Hashes each column of `x` with its own scalar hash and joins the per-column
/// bins into one bin per row: two rows share a bin iff every column does.
pub fn hash_columns(hashes: &[HashFunction], x: &DenseMatrix) -> Result<BinAssignment> {
    if hashes.len() != x.cols() {
        return Err(Error::dims(format!(
            "{} column hashes for {} columns",
            hashes.len(),
            x.cols()
        )));
    }
    let keys = x
        .iter_rows()
        .map(|row| {
            hashes
                .iter()
                .zip(row)
                .map(|(h, v)| h.hash_row(std::slice::from_ref(v)))
                .collect::<Result<Vec<i64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BinAssignment::from_keys(&keys))
}

/// Joint bins: two nodes share a joint bin iff they share a bin in both inputs.
pub fn combine_bins(a: &BinAssignment, b: &BinAssignment) -> Result<BinAssignment> {
    if a.len() != b.len() {
        return Err(Error::dims(format!(
            "cannot combine {} bins with {} bins",
            a.len(),
            b.len()
        )));
    }
    let keys: Vec<(usize, usize)> = a
        .compact()
        .iter()
        .copied()
        .zip(b.compact().iter().copied())
        .collect();
    Ok(BinAssignment::from_keys(&keys))
}

/// `½‖p − q‖₁`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `(1/√2)‖√p − √q‖₂`.
pub fn hellinger(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    (s / 2.0).sqrt()
}
