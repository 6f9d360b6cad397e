//! Plain-text Gram matrix format.
//!
//! ```text
//! propkern-gram v1 n=<n>
//! <n lines of n space-separated values, 17 significant digits>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_to_string, write_string};
use crate::kernel::KernelMatrix;

const MAGIC: &str = "propkern-gram v1";

pub fn format_kernel(k: &KernelMatrix) -> Result<String> {
    let n = k.n();
    if let Some(pos) = k.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "kernel entry ({}, {}) is not finite",
            pos / n,
            pos % n
        )));
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (k.get(i, j), k.get(j, i));
            if (a - b).abs() > 1e-10 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::invalid(format!(
                    "kernel is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    let mut out = format!("{MAGIC} n={n}\n");
    for i in 0..n {
        for (j, v) in k.row(i).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_kernel(text: &str, source_name: &str) -> Result<KernelMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source_name, 1, "empty file"))?;
    let n: usize = header
        .trim_end()
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.strip_prefix(" n="))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| {
            Error::parse(source_name, 1, format!("expected \"{MAGIC} n=<n>\", got {header:?}"))
        })?;

    let mut values = Vec::new();
    let mut rows = 0usize;
    for (line, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        if rows == n {
            return Err(Error::parse(source_name, line, format!("more than {n} rows")));
        }
        let before = values.len();
        for tok in l.split_whitespace() {
            let v = tok
                .parse::<f64>()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(source_name, line, format!("bad number {tok:?}")))?;
            values.push(v);
            if values.len() - before > n {
                break;
            }
        }
        if values.len() - before != n {
            return Err(Error::parse(
                source_name,
                line,
                format!("row has {} values, expected {n}", values.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::parse(
            source_name,
            text.lines().count(),
            format!("found {rows} rows, expected {n}"),
        ));
    }
    KernelMatrix::from_vec(n, values)
}

pub fn write_kernel(k: &KernelMatrix, path: &Path) -> Result<()> {
    write_string(path, &format_kernel(k)?)
}

pub fn read_kernel(path: &Path) -> Result<KernelMatrix> {
    parse_kernel(&read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_kernel_is_header_only() {
        let s = format_kernel(&KernelMatrix::zeros(0)).unwrap();
        assert_eq!(s, "propkern-gram v1 n=0\n");
        assert_eq!(parse_kernel(&s, "k").unwrap().n(), 0);
    }

    #[test]
    fn layout() {
        let k = KernelMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let s = format_kernel(&k).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("propkern-gram v1 n=2"));
        assert_eq!(
            lines.next(),
            Some("1.0000000000000000e0 5.0000000000000000e-1")
        );
    }

    #[test]
    fn asymmetric_and_non_finite_rejected() {
        let k = KernelMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 2.0]]).unwrap();
        assert!(format_kernel(&k).is_err());
        let k = KernelMatrix::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(format_kernel(&k).is_err());
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(parse_kernel("", "k").is_err());
        assert!(parse_kernel("propkern-gram v2 n=1\n1\n", "k").is_err());
        assert!(parse_kernel("propkern-gram v1 n=2\n1 2\n2\n", "k").is_err());
        assert!(parse_kernel("propkern-gram v1 n=1\n1\n1\n", "k").is_err());
        assert!(parse_kernel("propkern-gram v1 n=2\n1 2\n", "k").is_err());
        assert!(parse_kernel("propkern-gram v1 n=1\nx\n", "k").is_err());
        let err = parse_kernel("propkern-gram v1 n=2\n1 0\n0 1 5\n", "g.txt").unwrap_err();
        assert!(err.to_string().starts_with("g.txt:3:"), "{err}");
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(vals in proptest::collection::vec(-1e300f64..1e300, 1..30)) {
            let n = ((vals.len() as f64).sqrt() as usize).max(1);
            let mut k = KernelMatrix::zeros(n);
            let mut it = vals.iter().cycle();
            for i in 0..n {
                for j in i..n {
                    let v = *it.next().unwrap();
                    k.set(i, j, v);
                    k.set(j, i, v);
                }
            }
            let back = parse_kernel(&format_kernel(&k).unwrap(), "k").unwrap();
            for (a, b) in k.as_slice().iter().zip(back.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
