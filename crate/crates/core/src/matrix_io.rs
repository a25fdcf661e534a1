//! Plain-text CSV form of channel matrices.
//!
//! ```text
//! # K=2, N=3, seed=42
//! 1.0000000000000000e-10,NaN,3.2500000000000000e-11
//! 4.0000000000000000e-12,5.0000000000000000e-12,NaN
//! ```
//!
//! One line per user, one field per subcarrier, 17 significant digits so
//! values round-trip exactly. Missing entries are the literal `NaN`. The
//! header records the shape and the seed (`seed=unknown` when there is
//! none).

use std::fmt::Write as _;
use std::path::Path;

use crate::channel::{ChannelMatrix, MaskedChannelMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub rows: Vec<Vec<f64>>,
    pub seed: Option<u64>,
}

pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn format_rows(rows: &[Vec<f64>], seed: Option<u64>) -> String {
    let users = rows.len();
    let subcarriers = rows.first().map_or(0, Vec::len);
    let mut out = String::new();
    let seed = seed.map_or_else(|| "unknown".to_string(), |s| s.to_string());
    let _ = writeln!(out, "# K={users}, N={subcarriers}, seed={seed}");
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn format_channel(channel: &ChannelMatrix, seed: Option<u64>) -> String {
    format_rows(&channel.to_rows(), seed)
}

pub fn format_masked(masked: &MaskedChannelMatrix, seed: Option<u64>) -> String {
    format_rows(&masked.to_rows(), seed)
}

fn header_field<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header
        .trim_start_matches('#')
        .split(',')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
}

pub fn parse_matrix(text: &str) -> Result<MatrixFile> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut declared: Option<(usize, usize, usize)> = None;
    let mut seed = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let num = |key: &str| -> Result<Option<usize>> {
                header_field(line, key)
                    .map(|v| {
                        v.parse().map_err(|_| Error::Parse {
                            line: lineno,
                            message: format!("bad {key} value {v:?}"),
                        })
                    })
                    .transpose()
            };
            if let (Some(k), Some(n)) = (num("K")?, num("N")?) {
                declared = Some((k, n, lineno));
            }
            if let Some(s) = header_field(line, "seed") {
                seed = s.parse().ok();
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("not a number: {:?}", f.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no matrix rows".into(),
        });
    }
    if let Some((k, n, lineno)) = declared {
        if rows.len() != k || rows[0].len() != n {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "header declares {k}x{n} but body is {}x{}",
                    rows.len(),
                    rows[0].len()
                ),
            });
        }
    }
    Ok(MatrixFile { rows, seed })
}

pub fn read_masked(path: impl AsRef<Path>) -> Result<(MaskedChannelMatrix, Option<u64>)> {
    let file = parse_matrix(&std::fs::read_to_string(path)?)?;
    Ok((MaskedChannelMatrix::from_rows(&file.rows)?, file.seed))
}

/// Reads a complete matrix; any `NaN` is an error.
pub fn read_channel(path: impl AsRef<Path>) -> Result<(ChannelMatrix, Option<u64>)> {
    let file = parse_matrix(&std::fs::read_to_string(path)?)?;
    Ok((ChannelMatrix::from_rows(&file.rows)?, file.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_layout() {
        let m = MaskedChannelMatrix::from_rows(&[vec![1e-10, f64::NAN], vec![2.5, 3.0]]).unwrap();
        let text = format_masked(&m, Some(9));
        assert_eq!(
            text,
            "# K=2, N=2, seed=9\n\
             1.0000000000000000e-10,NaN\n\
             2.5000000000000000e0,3.0000000000000000e0\n"
        );
        let back = parse_matrix(&text).unwrap();
        assert_eq!(back.seed, Some(9));
        assert_eq!(MaskedChannelMatrix::from_rows(&back.rows).unwrap(), m);
    }

    #[test]
    fn unknown_seed() {
        let text = format_rows(&[vec![1.0]], None);
        assert!(text.starts_with("# K=1, N=1, seed=unknown\n"));
        assert_eq!(parse_matrix(&text).unwrap().seed, None);
    }

    #[test]
    fn parse_errors_carry_line() {
        match parse_matrix("# K=1, N=2\n1.0,abc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_matrix("1.0,2.0\n3.0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_matrix("# K=3, N=2\n1.0,2.0\n").is_err());
        assert!(parse_matrix("").is_err());
    }
}
