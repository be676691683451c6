//! Reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Graph`] records every operation as a node holding its forward value
//! and the handles of its inputs. Nodes are appended in evaluation order, so
//! the node list is already a topological order and [`Graph::backward`]
//! only has to sweep it from the loss back to the first node. Gradients
//! reaching a node through several consumers are summed.
//!
//! ```
//! use bankfuse::numeric::{Graph, Matrix};
//!
//! let mut g = Graph::new();
//! let w = g.param(Matrix::zeros(2, 2));
//! let s = g.sigmoid(w).unwrap();
//! let loss = g.sum(s).unwrap();
//! let grads = g.backward(loss).unwrap();
//! assert!(grads.wrt(w).as_slice().iter().all(|&d| d == 0.25));
//! ```

use super::matrix::{sigmoid_scalar, Matrix};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }

    pub(crate) fn from_index(i: usize) -> Self {
        Var(i)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// `lhs` is `B x n`, `bias` is `1 x n`.
    AddRow(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Sigmoid(Var),
    SoftmaxRow(Var),
    /// Per-row inner product of two `B x n` matrices, giving `B x 1`.
    RowDot(Var, Var),
    /// Row `r` of the matrix multiplied by entry `r` of a `B x 1` column.
    ScaleRows(Var, Var),
    Sum(Var),
    CrossEntropy(Var, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Operation tape. One graph per forward/backward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a leaf (parameter or input).
    pub fn param(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
        });
        Var(self.nodes.len() - 1)
    }

    /// Alias of [`Graph::param`] for data that will not be updated.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.param(value)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op: Op, value: Matrix, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), value, "matmul")
    }

    /// Elementwise sum of equal shapes, or a `1 x n` bias added to every row.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let op = if sa == sb {
            Op::Add(a, b)
        } else if sb.0 == 1 && sb.1 == sa.1 {
            Op::AddRow(a, b)
        } else {
            return Err(Error::dims("add", sa, sb));
        };
        let value = self.value(a).add(self.value(b))?;
        self.push(op, value, "add")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).scale(s);
        self.push(Op::Scale(a, s), value, "scale")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value, "transpose")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::concat_cols(&values)?;
        self.push(Op::ConcatCols(parts.to_vec()), value, "concat_cols")
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let value = self.value(a).slice_cols(start, len)?;
        self.push(Op::SliceCols(a, start), value, "slice_cols")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid_scalar);
        self.push(Op::Sigmoid(a), value, "sigmoid")
    }

    /// Row-wise softmax with the row maximum subtracted first.
    pub fn softmax_row(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.cols() == 0 {
            return Err(Error::Usage("softmax_row needs at least one column".into()));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            softmax_into(
                x.row_slice(r),
                &mut out.as_mut_slice()[r * x.cols()..(r + 1) * x.cols()],
            );
        }
        self.push(Op::SoftmaxRow(a), out, "softmax_row")
    }

    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::dims("row_dot", x.shape(), y.shape()));
        }
        let value = Matrix::from_fn(x.rows(), 1, |r, _| {
            x.row_slice(r)
                .iter()
                .zip(y.row_slice(r))
                .fold(0.0, |acc, (p, q)| acc + p * q)
        });
        self.push(Op::RowDot(a, b), value, "row_dot")
    }

    /// Multiplies row `r` of `m` by the scalar `w[r, 0]`.
    pub fn scale_rows(&mut self, w: Var, m: Var) -> Result<Var> {
        let (ws, ms) = (self.shape(w), self.shape(m));
        if ws != (ms.0, 1) {
            return Err(Error::dims("scale_rows", ws, ms));
        }
        let (wv, mv) = (self.value(w), self.value(m));
        let value = Matrix::from_fn(ms.0, ms.1, |r, c| wv.get(r, 0) * mv.get(r, c));
        self.push(Op::ScaleRows(w, m), value, "scale_rows")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Matrix::row(vec![self.value(a).sum()]);
        self.push(Op::Sum(a), value, "sum")
    }

    /// Mean over rows of `-log softmax(logits)[label]`, via log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let x = self.value(logits);
        if x.rows() == 0 || x.rows() != labels.len() {
            return Err(Error::Usage(format!(
                "cross_entropy: {} logit rows for {} labels",
                x.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= x.cols()) {
            return Err(Error::Usage(format!(
                "label {bad} out of range for {} classes",
                x.cols()
            )));
        }
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(r, &l)| {
                let row = x.row_slice(r);
                log_sum_exp(row) - row[l]
            })
            .sum();
        let value = Matrix::row(vec![total / labels.len() as f64]);
        self.push(
            Op::CrossEntropy(logits, labels.to_vec()),
            value,
            "cross_entropy",
        )
    }

    /// Reverse sweep from a `1 x 1` root.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::Usage(format!(
                "backward needs a 1x1 root, got {r}x{c}"
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = upstream.matmul(&self.value(*b).transpose())?;
                    let db = self.value(*a).transpose().matmul(&upstream)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, upstream.clone())?;
                    accumulate(&mut grads, *b, upstream.clone())?;
                }
                Op::AddRow(a, bias) => {
                    let cols = upstream.cols();
                    let db = Matrix::from_fn(1, cols, |_, c| {
                        (0..upstream.rows()).map(|r| upstream.get(r, c)).sum()
                    });
                    accumulate(&mut grads, *a, upstream.clone())?;
                    accumulate(&mut grads, *bias, db)?;
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, upstream.scale(*s))?,
                Op::Transpose(a) => accumulate(&mut grads, *a, upstream.transpose())?,
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let width = self.shape(p).1;
                        accumulate(&mut grads, p, upstream.slice_cols(start, width)?)?;
                        start += width;
                    }
                }
                Op::SliceCols(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let width = upstream.cols();
                    let da = Matrix::from_fn(rows, cols, |r, c| {
                        if c >= *start && c < start + width {
                            upstream.get(r, c - start)
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, da)?;
                }
                Op::Sigmoid(a) => {
                    let s = &node.value;
                    let da = Matrix::from_fn(s.rows(), s.cols(), |r, c| {
                        let v = s.get(r, c);
                        upstream.get(r, c) * v * (1.0 - v)
                    });
                    accumulate(&mut grads, *a, da)?;
                }
                Op::SoftmaxRow(a) => {
                    let s = &node.value;
                    let mut da = Matrix::zeros(s.rows(), s.cols());
                    for r in 0..s.rows() {
                        let (sr, gr) = (s.row_slice(r), upstream.row_slice(r));
                        let dot: f64 = sr.iter().zip(gr).map(|(p, g)| p * g).sum();
                        for c in 0..s.cols() {
                            da.set(r, c, sr[c] * (gr[c] - dot));
                        }
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::RowDot(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let da = Matrix::from_fn(x.rows(), x.cols(), |r, c| {
                        upstream.get(r, 0) * y.get(r, c)
                    });
                    let db = Matrix::from_fn(x.rows(), x.cols(), |r, c| {
                        upstream.get(r, 0) * x.get(r, c)
                    });
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::ScaleRows(w, m) => {
                    let (wv, mv) = (self.value(*w), self.value(*m));
                    let dw = Matrix::from_fn(wv.rows(), 1, |r, _| {
                        upstream
                            .row_slice(r)
                            .iter()
                            .zip(mv.row_slice(r))
                            .map(|(g, x)| g * x)
                            .sum()
                    });
                    let dm = Matrix::from_fn(mv.rows(), mv.cols(), |r, c| {
                        wv.get(r, 0) * upstream.get(r, c)
                    });
                    accumulate(&mut grads, *w, dw)?;
                    accumulate(&mut grads, *m, dm)?;
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.shape(*a);
                    let g = upstream.get(0, 0);
                    accumulate(&mut grads, *a, Matrix::filled(rows, cols, g))?;
                }
                Op::CrossEntropy(logits, labels) => {
                    let x = self.value(*logits);
                    let scale = upstream.get(0, 0) / labels.len() as f64;
                    let mut dx = Matrix::zeros(x.rows(), x.cols());
                    for (r, &label) in labels.iter().enumerate() {
                        let out = &mut dx.as_mut_slice()[r * x.cols()..(r + 1) * x.cols()];
                        softmax_into(x.row_slice(r), out);
                        out[label] -= 1.0;
                        for v in out.iter_mut() {
                            *v *= scale;
                        }
                    }
                    accumulate(&mut grads, *logits, dx)?;
                }
            }
            // Leaves keep their gradient for the caller.
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(upstream);
            }
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, delta: Matrix) -> Result<()> {
    match &mut grads[v.0] {
        Some(g) => g.add_assign(&delta),
        slot @ None => {
            *slot = Some(delta);
            Ok(())
        }
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Leaf gradients from one backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss with respect to a leaf; zeros when the leaf
    /// did not influence the loss.
    pub fn wrt(&self, v: Var) -> Matrix {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(g: &Graph, v: Var) -> f64 {
        g.value(v).scalar().unwrap()
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut g = Graph::new();
        let w = g.param(Matrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]).unwrap());
        let loss = g.sum(w).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(w), Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut g = Graph::new();
        let w = g.param(Matrix::zeros(3, 2));
        let s = g.sigmoid(w).unwrap();
        let loss = g.sum(s).unwrap();
        assert_eq!(g.backward(loss).unwrap().wrt(w), Matrix::filled(3, 2, 0.25));
    }

    #[test]
    fn non_scalar_root_is_usage_error() {
        let mut g = Graph::new();
        let w = g.param(Matrix::zeros(2, 1));
        assert!(matches!(g.backward(w), Err(Error::Usage(_))));
    }

    #[test]
    fn fan_out_accumulates() {
        // loss = sum(w + w) => dw = 2
        let mut g = Graph::new();
        let w = g.param(Matrix::row(vec![1.0, 2.0]));
        let twice = g.add(w, w).unwrap();
        let loss = g.sum(twice).unwrap();
        assert_eq!(g.backward(loss).unwrap().wrt(w), Matrix::filled(1, 2, 2.0));
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut g = Graph::new();
        let used = g.param(Matrix::row(vec![1.0]));
        let unused = g.param(Matrix::zeros(2, 3));
        let loss = g.sum(used).unwrap();
        assert_eq!(g.backward(loss).unwrap().wrt(unused), Matrix::zeros(2, 3));
    }

    #[test]
    fn softmax_examples() {
        let mut g = Graph::new();
        let x = g.input(Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1000.0, 1000.0]]).unwrap());
        let s = g.softmax_row(x).unwrap();
        let v = g.value(s);
        assert_eq!(v.row_slice(0), &[0.5, 0.5]);
        assert!((v.get(1, 0) - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((v.get(1, 1) - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(v.row_slice(2), &[0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_values() {
        let mut g = Graph::new();
        let uniform = g.input(Matrix::zeros(1, 10));
        let l = g.cross_entropy(uniform, &[3]).unwrap();
        assert!((scalar(&g, l) - 10f64.ln()).abs() < 1e-15);

        let confident = g.input(Matrix::row(vec![0.0, 1000.0, 0.0]));
        let l = g.cross_entropy(confident, &[1]).unwrap();
        assert!(scalar(&g, l).abs() < 1e-300);

        let two = g.input(Matrix::row(vec![0.0, 1.0]));
        let l = g.cross_entropy(two, &[0]).unwrap();
        let expected = (1.0 + 1f64.exp()).ln();
        assert!((scalar(&g, l) - expected).abs() < 1e-15);
        assert!((expected - 1.313_261_687_518_223).abs() < 1e-12);

        assert!(g.cross_entropy(two, &[2]).is_err());
    }

    #[test]
    fn shape_errors() {
        let mut g = Graph::new();
        let a = g.input(Matrix::zeros(2, 3));
        let b = g.input(Matrix::zeros(2, 2));
        assert!(matches!(g.matmul(a, a), Err(Error::Dimension { .. })));
        assert!(matches!(g.add(a, b), Err(Error::Dimension { .. })));
        assert!(matches!(g.row_dot(a, b), Err(Error::Dimension { .. })));
        assert!(matches!(g.scale_rows(a, b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn overflow_is_reported() {
        let mut g = Graph::new();
        let a = g.input(Matrix::row(vec![1e200]));
        let b = g.input(Matrix::row(vec![1e200]));
        let aa = g.transpose(a).unwrap();
        assert!(matches!(g.matmul(aa, b), Err(Error::NonFinite { .. })));
    }
}
