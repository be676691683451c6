//! Plain-text model checkpoints.
//!
//! ```text
//! #checkpoint kind=SA2CA N=2 d=8 classes=2 heads=1 seed=7
//! param sab.0.h0.query 8 8
//! <row 0 values, space separated>
//! ...
//! param head.bias 1 2
//! 0.0 0.0
//! norm 0 1 8
//! <mean row>
//! <std row>
//! ```
//!
//! Parameters appear in the model's canonical order. `norm` blocks
//! (branch, rows, cols) follow only when the model carries a fitted
//! standardiser.

use std::fmt::Write as _;
use std::path::Path;

use crate::attention::MultiHeadConfig;
use crate::error::{Error, Result};
use crate::fusion::{ArchitectureKind, FusionModel, Standardizer};
use crate::numeric::Matrix;

pub fn write_checkpoint(model: &FusionModel) -> String {
    let mut out = format!(
        "#checkpoint kind={} N={} d={} classes={} heads={} seed={}\n",
        model.kind(),
        model.branches(),
        model.dim(),
        model.classes(),
        model.heads().heads(),
        model.seed()
    );
    for (name, m) in model.param_names().iter().zip(model.params()) {
        let _ = writeln!(out, "param {name} {} {}", m.rows(), m.cols());
        write_rows(&mut out, m);
    }
    if let Some(norm) = &model.standardizer {
        for (i, (mean, std)) in norm.mean.iter().zip(&norm.std).enumerate() {
            let _ = writeln!(out, "norm {i} {} {}", mean.rows() + std.rows(), mean.cols());
            write_rows(&mut out, mean);
            write_rows(&mut out, std);
        }
    }
    out
}

fn write_rows(out: &mut String, m: &Matrix) {
    for r in 0..m.rows() {
        let row: Vec<String> = m.row_slice(r).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l.trim()))
            .find(|(_, l)| !l.is_empty())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line, text) = self.next().ok_or(Error::Parse {
                line: 0,
                message: "checkpoint ends inside a matrix".into(),
            })?;
            let values = text
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Parse {
                            line,
                            message: format!("bad value '{t}'"),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != cols {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {cols} values, found {}", values.len()),
                });
            }
            data.extend(values);
        }
        Matrix::new(rows, cols, data)
    }
}

pub fn parse_checkpoint(text: &str) -> Result<FusionModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty checkpoint".into(),
    })?;
    let bad_header = |message: String| Error::Parse { line: 1, message };
    let rest = header
        .strip_prefix("#checkpoint")
        .ok_or_else(|| bad_header("missing '#checkpoint' header".into()))?;
    let mut kind = None;
    let mut nums = [None::<u64>; 5];
    for token in rest.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| bad_header(format!("bad header token '{token}'")))?;
        let slot = match k {
            "kind" => {
                kind = Some(v.parse::<ArchitectureKind>()?);
                continue;
            }
            "N" => 0,
            "d" => 1,
            "classes" => 2,
            "heads" => 3,
            "seed" => 4,
            other => return Err(bad_header(format!("unknown header key '{other}'"))),
        };
        nums[slot] = Some(
            v.parse()
                .map_err(|e| bad_header(format!("{k}='{v}': {e}")))?,
        );
    }
    let (Some(kind), [Some(n), Some(d), Some(c), Some(h), Some(seed)]) = (kind, nums) else {
        return Err(bad_header(
            "header needs kind, N, d, classes, heads and seed".into(),
        ));
    };
    let mut model = FusionModel::new(
        kind,
        n as usize,
        d as usize,
        c as usize,
        MultiHeadConfig::new(h as usize)?,
        seed,
    )?;

    let names = model.param_names();
    let shapes: Vec<(usize, usize)> = model.params().iter().map(|m| m.shape()).collect();
    let mut loaded = Vec::with_capacity(names.len());
    for (name, &(rows, cols)) in names.iter().zip(&shapes) {
        let (line, text) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: format!("missing parameter {name}"),
        })?;
        let expected = format!("param {name} {rows} {cols}");
        if text != expected {
            return Err(Error::Parse {
                line,
                message: format!("expected '{expected}', found '{text}'"),
            });
        }
        loaded.push(lines.matrix(rows, cols)?);
    }
    for (slot, value) in model.params_mut().into_iter().zip(loaded) {
        *slot = value;
    }

    let mut mean = Vec::new();
    let mut std = Vec::new();
    while let Some((line, text)) = lines.next() {
        let fields: Vec<&str> = text.split_whitespace().collect();
        let expected_branch = mean.len().to_string();
        match fields.as_slice() {
            ["norm", branch, rows, cols] if *branch == expected_branch && *rows == "2" => {
                let cols: usize = cols.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad norm width '{cols}'"),
                })?;
                let m = lines.matrix(2, cols)?;
                mean.push(m.slice_cols(0, cols)?.select_rows(&[0]));
                std.push(m.select_rows(&[1]));
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unexpected line '{text}'"),
                })
            }
        }
    }
    if !mean.is_empty() {
        if std.iter().flat_map(|s| s.as_slice()).any(|&v| v <= 0.0) {
            return Err(Error::Parse {
                line: 0,
                message: "standardiser scales must be positive".into(),
            });
        }
        model.standardizer = Some(Standardizer { mean, std });
    }
    Ok(model)
}

pub fn save_checkpoint(model: &FusionModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<FusionModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text)
}
