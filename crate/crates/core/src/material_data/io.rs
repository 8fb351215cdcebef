//! Plain-text data set container.
//!
//! ```text
//! tenvote-dataset 1
//! m_e <m>
//! points <n>
//! frames <0 | n>
//! metric <m·m entries, row-major>
//! <n rows>
//! ```
//!
//! Each row holds `ε₁..ε_m σ₁..σ_m`, and when frames are present, the frame
//! basis column-major (`N·N` entries, columns by descending eigenvalue,
//! `N = 2m`), the `N` eigenvalues, the tangent count `k`, and a 0/1
//! degenerate flag. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::MaterialDataSet;
use crate::error::{Error, Result};
use crate::phase_space::{LocalState, MetricTensor};
use crate::tensor_voting::TangentFrame;

const MAGIC: &str = "tenvote-dataset 1";

pub fn write_dataset(ds: &MaterialDataSet) -> String {
    let m = ds.dim();
    let n_frames = ds.frames().map_or(0, |f| f.len());
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "m_e {m}");
    let _ = writeln!(out, "points {}", ds.len());
    let _ = writeln!(out, "frames {n_frames}");
    out.push_str("metric");
    for r in 0..m {
        for c in 0..m {
            let _ = write!(out, " {:e}", ds.metric().c()[(r, c)]);
        }
    }
    out.push('\n');
    for (i, p) in ds.points().iter().enumerate() {
        let mut first = true;
        let mut push = |out: &mut String, v: f64| {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v:e}");
        };
        for v in p.strain.iter().chain(p.stress.iter()) {
            push(&mut out, *v);
        }
        if let Some(frames) = ds.frames() {
            let f = &frames[i];
            for v in f.basis().iter().chain(f.eigenvalues().iter()) {
                push(&mut out, *v);
            }
            let _ = write!(out, " {} {}", f.k(), u8::from(f.is_degenerate()));
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(ds: &MaterialDataSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_dataset(ds)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<MaterialDataSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_dataset(&text, path)
}

/// Parses a data set container; `path` is only used in error messages.
pub fn read_dataset(text: &str, path: &Path) -> Result<MaterialDataSet> {
    let malformed = |line: usize, reason: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| malformed(0, format!("unexpected end of file, expected {what}")))
    };

    let (ln, magic) = next("header")?;
    if magic != MAGIC {
        return Err(malformed(ln, format!("expected '{MAGIC}'")));
    }
    let mut header = |key: &str| -> Result<usize> {
        let (ln, l) = next(key)?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(malformed(ln, format!("expected '{key} <count>'")));
        }
        it.next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed(ln, format!("bad value for '{key}'")))
    };
    let m = header("m_e")?;
    let n = header("points")?;
    let n_frames = header("frames")?;
    if m == 0 {
        return Err(malformed(0, "m_e must be positive".into()));
    }
    if n_frames != 0 && n_frames != n {
        return Err(Error::Inconsistent {
            path: path.to_path_buf(),
            reason: format!("{n_frames} frames declared for {n} points"),
        });
    }

    let parse_floats = |ln: usize, tokens: &[&str]| -> Result<Vec<f64>> {
        tokens
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| malformed(ln, format!("not a number: '{t}'")))
            })
            .collect()
    };

    let (ln, l) = next("metric")?;
    let rest = l
        .strip_prefix("metric")
        .ok_or_else(|| malformed(ln, "expected 'metric ...'".into()))?;
    let c = parse_floats(ln, &rest.split_whitespace().collect::<Vec<_>>())?;
    if c.len() != m * m {
        return Err(malformed(ln, format!("metric needs {} entries", m * m)));
    }
    let metric = MetricTensor::new(DMatrix::from_row_slice(m, m, &c))?;

    let nn = 2 * m;
    let plain = 2 * m;
    let framed = plain + nn * nn + nn + 2;
    let width = if n_frames > 0 { framed } else { plain };

    let mut points = Vec::with_capacity(n);
    let mut frames = Vec::with_capacity(n_frames);
    for row in 0..n {
        let (ln, l) = next(&format!("point row {}", row + 1))?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.len() != width {
            if tokens.len() == plain || tokens.len() == framed {
                return Err(Error::Inconsistent {
                    path: path.to_path_buf(),
                    reason: format!(
                        "row {} has {} columns but the header declares {n_frames} frames",
                        row + 1,
                        tokens.len()
                    ),
                });
            }
            return Err(malformed(
                ln,
                format!("expected {width} columns, found {}", tokens.len()),
            ));
        }
        let n_float = if n_frames > 0 { framed - 2 } else { plain };
        let head = parse_floats(ln, &tokens[..n_float])?;
        points.push(LocalState::from_slices(&head[..m], &head[m..plain])?);
        if n_frames > 0 {
            let basis = DMatrix::from_column_slice(nn, nn, &head[plain..plain + nn * nn]);
            let eig = DVector::from_column_slice(&head[plain + nn * nn..]);
            let k: usize = tokens[framed - 2]
                .parse()
                .map_err(|_| malformed(ln, "bad tangent count".into()))?;
            let degenerate = match tokens[framed - 1] {
                "0" => false,
                "1" => true,
                t => return Err(malformed(ln, format!("bad degenerate flag '{t}'"))),
            };
            let frame = TangentFrame::from_parts(basis, eig, k, degenerate)
                .map_err(|e| malformed(ln, e.to_string()))?;
            frames.push(frame);
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Inconsistent {
            path: path.to_path_buf(),
            reason: format!("trailing data at line {ln} beyond {n} declared points"),
        });
    }

    let ds = MaterialDataSet::new(points, metric)?;
    if n_frames > 0 {
        ds.with_frames(frames)
    } else {
        Ok(ds)
    }
}
