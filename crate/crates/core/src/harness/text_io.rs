//! Newline-delimited label and class-name files.

use std::path::Path;

use crate::error::{Error, Result};

/// Non-empty lines with surrounding whitespace removed.
pub fn parse_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn lines_to_string<S: AsRef<str>>(lines: &[S]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    out
}

/// One class name per line.
pub fn read_classes(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let names = parse_lines(&std::fs::read_to_string(path)?);
    let mut seen = std::collections::HashSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(Error::Label(format!("duplicate class name '{n}'")));
        }
    }
    Ok(names)
}

/// Parses one nonnegative class index per line (blank lines skipped).
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| {
                Error::Label(format!(
                    "line {}: '{}' is not a class index",
                    i + 1,
                    l.trim()
                ))
            })
        })
        .collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_labels(&std::fs::read_to_string(path)?)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let lines: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
    super::write_atomic(path.as_ref(), lines_to_string(&lines).as_bytes())
}

pub fn write_lines<S: AsRef<str>>(path: impl AsRef<Path>, lines: &[S]) -> Result<()> {
    super::write_atomic(path.as_ref(), lines_to_string(lines).as_bytes())
}
