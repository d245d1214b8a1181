//! Point files (`{"dim": D, "points": [[...], ...]}`) and distance files
//! (one `i j value` per line).

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{DistanceMultiset, DistanceRecord, PointConfig};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dim: usize,
    points: Vec<Vec<f64>>,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

/// Line and column (1-based) of the opening bracket of row `k` of the
/// `points` array, if it can be found.
fn row_position(text: &str, k: usize) -> Option<(usize, usize)> {
    let start = text.find("\"points\"")?;
    let mut depth = 0usize;
    let mut seen = 0usize;
    for (offset, ch) in text[start..].char_indices() {
        match ch {
            '[' => {
                depth += 1;
                if depth == 2 {
                    if seen == k {
                        let at = start + offset;
                        let line = text[..at].matches('\n').count() + 1;
                        let column = at - text[..at].rfind('\n').map_or(0, |p| p + 1) + 1;
                        return Some((line, column));
                    }
                    seen += 1;
                }
            }
            ']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return None;
                }
            }
            _ => {}
        }
    }
    None
}

/// Parses a point file from a string.
pub fn parse_config(text: &str) -> Result<PointConfig> {
    if text.trim().is_empty() {
        return Err(parse_error(1, 1, "empty input"));
    }
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| parse_error(e.line(), e.column(), e.to_string()))?;
    if raw.points.is_empty() {
        return Err(parse_error(1, 1, "no points"));
    }
    for (k, row) in raw.points.iter().enumerate() {
        if row.len() != raw.dim {
            let (line, column) = row_position(text, k).unwrap_or((1, 1));
            return Err(parse_error(
                line,
                column,
                format!("row {k} has {} coordinates, expected {}", row.len(), raw.dim),
            ));
        }
    }
    PointConfig::new(raw.dim, raw.points).map_err(|e| parse_error(1, 1, e.to_string()))
}

/// Renders a point file, one point per line. Coordinates use the shortest
/// decimal form that reads back to the same `f64`.
pub fn format_config(config: &PointConfig) -> String {
    let mut out = format!("{{\n  \"dim\": {},\n  \"points\": [\n", config.dim());
    for (k, p) in config.points().iter().enumerate() {
        let row: Vec<String> = p.iter().map(|x| serde_json::to_string(x).expect("finite")).collect();
        let sep = if k + 1 < config.len() { "," } else { "" };
        let _ = writeln!(out, "    [{}]{sep}", row.join(", "));
    }
    out.push_str("  ]\n}\n");
    out
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PointConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn save_config(path: impl AsRef<Path>, config: &PointConfig) -> Result<()> {
    std::fs::write(path, format_config(config))?;
    Ok(())
}

/// Parses a distance file. Blank lines and lines starting with `#` are
/// skipped; the number of points is one more than the largest index.
pub fn parse_distances(text: &str) -> Result<DistanceMultiset> {
    let mut records = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = Vec::with_capacity(3);
        let mut rest = line;
        let mut consumed = 0;
        while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
            let end = rest[start..].find(char::is_whitespace).map_or(rest.len(), |e| start + e);
            fields.push((consumed + start + 1, &rest[start..end]));
            consumed += end;
            rest = &rest[end..];
        }
        if fields.len() != 3 {
            let column = fields.get(3).map_or(line.len() + 1, |f| f.0);
            return Err(parse_error(ln + 1, column, format!("expected `i j value`, found {} fields", fields.len())));
        }
        let index = |(col, s): (usize, &str)| s.parse::<usize>().map_err(|e| parse_error(ln + 1, col, format!("bad index `{s}`: {e}")));
        let i = index(fields[0])?;
        let j = index(fields[1])?;
        let (col, s) = fields[2];
        let value: f64 = s.parse().map_err(|e| parse_error(ln + 1, col, format!("bad distance `{s}`: {e}")))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(parse_error(ln + 1, col, format!("distance `{s}` is not a finite non-negative number")));
        }
        records.push(DistanceRecord::new(i, j, value));
    }
    if records.is_empty() {
        return Err(parse_error(1, 1, "no distances"));
    }
    let n = records.iter().map(|r| r.j).max().unwrap_or(0) + 1;
    DistanceMultiset::from_records(n, records).map_err(|e| parse_error(1, 1, e.to_string()))
}

/// Renders a distance file with 17 significant digits per value.
pub fn format_distances(d: &DistanceMultiset) -> String {
    let mut out = String::new();
    for r in d.records() {
        let _ = writeln!(out, "{} {} {:.16e}", r.i, r.j, r.value);
    }
    out
}

pub fn load_distances(path: impl AsRef<Path>) -> Result<DistanceMultiset> {
    parse_distances(&std::fs::read_to_string(path)?)
}

pub fn save_distances(path: impl AsRef<Path>, d: &DistanceMultiset) -> Result<()> {
    std::fs::write(path, format_distances(d))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pairwise_distances;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn config_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let points: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.random::<f64>() * 1e3 - 5e2).collect()).collect();
        let mut points = points;
        points[0][0] = 1e-300;
        points[1][1] = -0.0;
        let config = PointConfig::new(3, points).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_config(&path, &config).unwrap();
        let back = load_config(&path).unwrap();
        for (a, b) in config.points().iter().flatten().zip(back.points().iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(parse_config(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("  \n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn ragged_rows_name_the_row() {
        let text = "{\n  \"dim\": 2,\n  \"points\": [\n    [0, 0],\n    [1, 2, 3]\n  ]\n}\n";
        match parse_config(text) {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!((line, column), (5, 5));
                assert!(message.contains("row 1"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_config("{\n  \"dim\": 2,\n  \"points\": [[0, 0],, ]\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distances_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let d = pairwise_distances(&PointConfig::new(3, points).unwrap()).unwrap();
        let back = parse_distances(&format_distances(&d)).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn bad_distance_lines() {
        assert!(matches!(parse_distances("0 1\n"), Err(Error::Parse { line: 1, .. })));
        match parse_distances("# pairs\n0 1 1.0\n0 2 x\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 5)),
            other => panic!("{other:?}"),
        }
        // Missing pair (1, 2).
        assert!(parse_distances("0 1 1\n0 2 1\n").is_err());
    }
}
