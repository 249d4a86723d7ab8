//! Flat `key = value` configuration files and list parsing.

use std::collections::BTreeMap;

use crate::error::{LabError, Result};

/// Parse `key = value` lines. `#` starts a comment; blank lines are skipped;
/// `_` in keys is read as `-` so `u_grid` and `u-grid` are the same key.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(LabError::Configuration(format!(
                "line {}: expected key = value, got {line:?}",
                lineno + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(LabError::Configuration(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(LabError::Configuration(format!(
                "line {}: duplicate key {key:?}",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

pub fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| LabError::InvalidArgument(format!("not a finite number: {s:?}")))
        })
        .collect()
}

/// `a:b:n` → `n` evenly spaced points from `a` to `b` inclusive.
pub fn parse_u_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || LabError::InvalidArgument(format!("expected a:b:n with n >= 1, got {text:?}"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.parse().map_err(|_| bad())?;
    let b: f64 = b.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let step = (b - a) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { b } else { a + step * i as f64 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_with_comments() {
        let map = parse_key_values("# run\nfunction = mono:3\n\nmaster_seed=7 # trailing\n").unwrap();
        assert_eq!(map["function"], "mono:3");
        assert_eq!(map["master-seed"], "7");
        assert_eq!(map.len(), 2);
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(parse_key_values("paths 10").is_err());
        assert!(parse_key_values("= 3").is_err());
        assert!(parse_key_values("a=1\na=2").is_err());
    }

    #[test]
    fn lists_and_grids() {
        assert_eq!(parse_f64_list("0.2, 0.1,0.05").unwrap(), vec![0.2, 0.1, 0.05]);
        assert!(parse_f64_list("0.1,x").is_err());
        assert!(parse_f64_list("nan").is_err());
        assert_eq!(parse_u_grid("0:1:5").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_u_grid("2:3:1").unwrap(), vec![2.0]);
        assert!(parse_u_grid("0:1").is_err());
        assert!(parse_u_grid("0:1:0").is_err());
    }
}
