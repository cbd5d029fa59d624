use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("no coefficients given; use --coeffs or --coeffs-file")]
    Missing,
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("bad coefficient list: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad coefficient {0:?}")]
    Number(String),
    #[error("bad list entry {0:?}")]
    Entry(String),
}

/// Coefficients `a0..an`, low degree first, as a JSON array or a list
/// separated by commas or whitespace.
pub fn parse_coeffs(text: &str) -> Result<Vec<f64>, InputError> {
    let text = text.trim();
    if text.starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    let out = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| InputError::Number(s.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(InputError::Missing);
    }
    Ok(out)
}

pub fn load_coeffs(inline: Option<&str>, file: Option<&Path>) -> Result<Vec<f64>, InputError> {
    match (inline, file) {
        (Some(text), _) => parse_coeffs(text),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| InputError::Read { path: path.display().to_string(), source })?;
            parse_coeffs(&text)
        }
        (None, None) => Err(InputError::Missing),
    }
}

pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, InputError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| InputError::Entry(s.to_string())))
        .collect()
}
