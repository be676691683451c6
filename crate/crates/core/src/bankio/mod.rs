//! Representation-bank datasets and the on-disk formats.
//!
//! Bank files are UTF-8 CSV:
//!
//! ```text
//! #bank N=2 d=3 C=2 split=train
//! s0,1,0.5,-1.0,2.0,0.0,0.25,1e-3
//! ```
//!
//! Each row is `id,label` followed by the `d` features of bank entry 1,
//! then entry 2, and so on. The header keys may be separated by spaces or
//! commas; `split` is optional and defaults to `train`. Floats are written
//! in the shortest form that parses back to the same value.

mod checkpoint;
mod config;
mod synthetic;

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{load_config, parse_config, write_config};
pub use synthetic::{gen_synthetic, SyntheticKind, SyntheticTaskSpec};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Split {
    #[default]
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Usage(format!("unknown split '{other}'"))),
        }
    }
}

/// One input's bank: `features[i]` is entry `i`'s length-`d` vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub features: Vec<Vec<f64>>,
}

/// Labelled bank vectors for a set of inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBankDataset {
    branches: usize,
    dim: usize,
    classes: usize,
    split: Split,
    samples: Vec<Sample>,
}

impl FeatureBankDataset {
    pub fn new(
        branches: usize,
        dim: usize,
        classes: usize,
        split: Split,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        if branches == 0 || dim == 0 || classes == 0 {
            return Err(Error::Config(format!(
                "N ({branches}), d ({dim}) and C ({classes}) must be positive"
            )));
        }
        for s in &samples {
            validate_sample(s, branches, dim, classes)?;
        }
        Ok(Self {
            branches,
            dim,
            classes,
            split,
            samples,
        })
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// The bank as `N` matrices of shape `len x d`.
    pub fn bank_matrices(&self) -> Vec<Matrix> {
        (0..self.branches)
            .map(|i| {
                Matrix::from_fn(self.samples.len(), self.dim, |r, c| {
                    self.samples[r].features[i][c]
                })
            })
            .collect()
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.shallow()
        }
    }

    fn shallow(&self) -> Self {
        Self {
            branches: self.branches,
            dim: self.dim,
            classes: self.classes,
            split: self.split,
            samples: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "#bank N={} d={} C={} split={}\n",
            self.branches, self.dim, self.classes, self.split
        );
        for s in &self.samples {
            let _ = write!(out, "{},{}", s.id, s.label);
            for v in s.features.iter().flatten() {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty bank file".into(),
        })?;
        let header_fields = parse_header(header)?;
        let (n, d, c, split) = header_fields;

        let mut samples = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 2 + n * d {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "row '{}' has {} feature values, expected {}",
                        fields[0],
                        fields.len().saturating_sub(2),
                        n * d
                    ),
                });
            }
            let id = fields[0].to_string();
            if id.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "empty sample id".into(),
                });
            }
            let label = fields[1].parse::<usize>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("row '{id}': bad label '{}': {e}", fields[1]),
            })?;
            let values = fields[2..]
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|e| Error::Parse {
                        line: line_no,
                        message: format!("row '{id}': bad feature '{f}': {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let sample = Sample {
                id,
                label,
                features: values.chunks(d).map(<[f64]>::to_vec).collect(),
            };
            validate_sample(&sample, n, d, c)?;
            samples.push(sample);
        }
        Self::new(n, d, c, split, samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a bank file.
pub fn load_bank(path: impl AsRef<Path>) -> Result<FeatureBankDataset> {
    FeatureBankDataset::load(path)
}

fn parse_header(line: &str) -> Result<(usize, usize, usize, Split)> {
    let bad = |message: String| Error::Parse { line: 1, message };
    let rest = line
        .trim()
        .strip_prefix("#bank")
        .ok_or_else(|| bad(format!("expected '#bank' header, found '{line}'")))?;
    let (mut n, mut d, mut c, mut split) = (None, None, None, Split::Train);
    for token in rest
        .split(|ch: char| ch == ',' || ch.is_whitespace())
        .filter(|t| !t.is_empty())
    {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| bad(format!("header token '{token}' is not key=value")))?;
        let count = || {
            value
                .parse::<usize>()
                .map_err(|e| bad(format!("header {key}='{value}': {e}")))
        };
        match key {
            "N" => n = Some(count()?),
            "d" => d = Some(count()?),
            "C" => c = Some(count()?),
            "split" => {
                split = value
                    .parse()
                    .map_err(|_| bad(format!("unknown split '{value}'")))?
            }
            other => return Err(bad(format!("unknown header key '{other}'"))),
        }
    }
    match (n, d, c) {
        (Some(n), Some(d), Some(c)) if n > 0 && d > 0 && c > 0 => Ok((n, d, c, split)),
        _ => Err(bad("header needs positive N, d and C".into())),
    }
}

fn validate_sample(s: &Sample, n: usize, d: usize, c: usize) -> Result<()> {
    let invalid = |message: String| Error::InvalidSample {
        id: s.id.clone(),
        message,
    };
    if s.id.contains(',') || s.id.contains('\n') {
        return Err(invalid("id may not contain commas or newlines".into()));
    }
    if s.label >= c {
        return Err(invalid(format!("label {} not in [0, {c})", s.label)));
    }
    if s.features.len() != n || s.features.iter().any(|f| f.len() != d) {
        return Err(invalid(format!("expected {n} vectors of length {d}")));
    }
    if s.features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite feature".into()));
    }
    Ok(())
}
