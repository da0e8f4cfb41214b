use std::path::Path;

use crate::error::{Error, Result};

/// One non-negative integer per line; blank lines are not allowed.
pub fn parse_labels(path: &Path, text: &str) -> Result<Vec<u32>> {
    text.lines()
        .enumerate()
        .map(|(k, l)| {
            l.trim()
                .parse::<u32>()
                .map_err(|e| Error::parse(path, k + 1, format!("bad label '{}': {e}", l.trim())))
        })
        .collect()
}
