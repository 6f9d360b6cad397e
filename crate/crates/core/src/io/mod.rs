//! Dataset, image and Gram-matrix file formats.

pub mod gram;
pub mod pgm;
pub mod tu;

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// One integer class label per line.
pub fn parse_classes(text: &str, source_name: &str) -> Result<Vec<i64>> {
    numbered_lines(text)
        .map(|(line, l)| {
            l.parse::<i64>()
                .map_err(|_| Error::parse(source_name, line, format!("expected an integer, got {l:?}")))
        })
        .collect()
}

pub fn read_classes(path: &Path) -> Result<Vec<i64>> {
    parse_classes(&read_to_string(path)?, &path.display().to_string())
}
