//! Self-attention and cross-attention over bank vectors.
//!
//! Each bank vector `b` is a `1 x d` row (a batch stacks them as `B x d`).
//! Projections are `q = b Wq`, `k = b Wk`, `v = b Wv`.
//!
//! * Self-attention gates a branch with one scalar per sample:
//!   `z = b + sigmoid(q . k) * v`.
//! * Cross-attention lets branch `i` import the value vectors of every
//!   other branch `j`: `z_i = b_i + sum_{j != i} w_ij * v_j` where the
//!   logits are `q_i . k_j`. With two branches `w_ij = sigmoid(logit)`;
//!   with more, the logits for `j != i` go through a softmax.
//!
//! Logits are *not* scaled by `1/sqrt(d)`, unlike the usual transformer
//! attention.
//!
//! Multi-head variants split `d` into `h` contiguous slices of width
//! `d / h`, run the same formulas per slice with their own
//! `(d/h) x (d/h)` projections, concatenate the per-slice increments and
//! add the residual once on the full vector. There is no output
//! projection, so one head is exactly the plain block.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{Graph, Matrix, Var};

/// Query, key and value projections of one branch (or one head).
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionTriple {
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
}

impl ProjectionTriple {
    pub fn new(query: Matrix, key: Matrix, value: Matrix) -> Result<Self> {
        let d = query.rows();
        for m in [&query, &key, &value] {
            if m.shape() != (d, d) {
                return Err(Error::dims("ProjectionTriple", (d, d), m.shape()));
            }
        }
        Ok(Self { query, key, value })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            query: Matrix::identity(d),
            key: Matrix::identity(d),
            value: Matrix::identity(d),
        }
    }

    /// Entries uniform in `[-1/sqrt(d), 1/sqrt(d)]`, drawn query, key, value
    /// in row-major order.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        let mut draw = || Matrix::from_fn(d, d, |_, _| rng.random_range(-bound..=bound));
        let query = draw();
        let key = draw();
        let value = draw();
        Self { query, key, value }
    }

    pub fn dim(&self) -> usize {
        self.query.rows()
    }

    fn diagonal_block(&self, start: usize, width: usize) -> Self {
        let block = |m: &Matrix| Matrix::from_fn(width, width, |r, c| m.get(start + r, start + c));
        Self {
            query: block(&self.query),
            key: block(&self.key),
            value: block(&self.value),
        }
    }

    fn bind(&self, g: &mut Graph) -> BoundTriple {
        BoundTriple {
            query: g.param(self.query.clone()),
            key: g.param(self.key.clone()),
            value: g.param(self.value.clone()),
        }
    }

    fn matrices(&self) -> [&Matrix; 3] {
        [&self.query, &self.key, &self.value]
    }

    fn matrices_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.query, &mut self.key, &mut self.value]
    }
}

/// Number of attention heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MultiHeadConfig {
    heads: usize,
}

impl MultiHeadConfig {
    pub fn new(heads: usize) -> Result<Self> {
        if heads == 0 {
            return Err(Error::Config("head count must be at least 1".into()));
        }
        Ok(Self { heads })
    }

    pub fn single() -> Self {
        Self { heads: 1 }
    }

    pub fn heads(self) -> usize {
        self.heads
    }

    /// Width of each head's slice for feature dimension `d`.
    pub fn head_dim(self, d: usize) -> Result<usize> {
        if d == 0 || !d.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "feature dimension {d} is not divisible by {} heads",
                self.heads
            )));
        }
        Ok(d / self.heads)
    }
}

impl Default for MultiHeadConfig {
    fn default() -> Self {
        Self::single()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BoundTriple {
    query: Var,
    key: Var,
    value: Var,
}

/// Self-attention block for one branch.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfAttentionBlock {
    dim: usize,
    heads: Vec<ProjectionTriple>,
}

impl SelfAttentionBlock {
    pub fn new(proj: ProjectionTriple) -> Self {
        Self {
            dim: proj.dim(),
            heads: vec![proj],
        }
    }

    /// Randomly initialised block with `config.heads()` heads.
    pub fn random<R: Rng + ?Sized>(d: usize, config: MultiHeadConfig, rng: &mut R) -> Result<Self> {
        let hd = config.head_dim(d)?;
        let heads = (0..config.heads())
            .map(|_| ProjectionTriple::random(hd, rng))
            .collect();
        Ok(Self { dim: d, heads })
    }

    /// Block with explicit per-head projections of equal size.
    pub fn from_heads(heads: Vec<ProjectionTriple>) -> Result<Self> {
        let hd = check_heads(&heads)?;
        Ok(Self {
            dim: hd * heads.len(),
            heads,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn heads(&self) -> &[ProjectionTriple] {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut [ProjectionTriple] {
        &mut self.heads
    }

    pub(crate) fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        triple_names(prefix, self.heads.len(), out);
    }

    pub(crate) fn matrices<'a>(&'a self, out: &mut Vec<&'a Matrix>) {
        out.extend(self.heads.iter().flat_map(|t| t.matrices()));
    }

    pub(crate) fn matrices_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Matrix>) {
        out.extend(self.heads.iter_mut().flat_map(|t| t.matrices_mut()));
    }

    pub(crate) fn bind(&self, g: &mut Graph) -> BoundSelfAttention {
        BoundSelfAttention {
            dim: self.dim,
            heads: self.heads.iter().map(|t| t.bind(g)).collect(),
        }
    }
}

pub(crate) struct BoundSelfAttention {
    dim: usize,
    heads: Vec<BoundTriple>,
}

impl BoundSelfAttention {
    /// Gated value increment `sigmoid(q . k) * v`, without the residual.
    pub(crate) fn increment(&self, g: &mut Graph, b: Var) -> Result<Var> {
        check_width(g, b, self.dim, "self-attention")?;
        let hd = self.dim / self.heads.len();
        let mut parts = Vec::with_capacity(self.heads.len());
        for (h, proj) in self.heads.iter().enumerate() {
            let x = head_slice(g, b, h, hd, self.heads.len())?;
            let q = g.matmul(x, proj.query)?;
            let k = g.matmul(x, proj.key)?;
            let logit = g.row_dot(q, k)?;
            let w = g.sigmoid(logit)?;
            let v = g.matmul(x, proj.value)?;
            parts.push(g.scale_rows(w, v)?);
        }
        join_heads(g, &parts)
    }

    pub(crate) fn forward(&self, g: &mut Graph, b: Var) -> Result<Var> {
        let delta = self.increment(g, b)?;
        g.add(b, delta)
    }
}

/// Cross-attention block over `N >= 2` branches.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossAttentionBlock {
    dim: usize,
    /// `branches[i][h]` is branch `i`'s projection for head `h`.
    branches: Vec<Vec<ProjectionTriple>>,
}

impl CrossAttentionBlock {
    pub fn new(branches: Vec<ProjectionTriple>) -> Result<Self> {
        Self::from_heads(branches.into_iter().map(|t| vec![t]).collect())
    }

    pub fn from_heads(branches: Vec<Vec<ProjectionTriple>>) -> Result<Self> {
        if branches.len() < 2 {
            return Err(Error::Usage(format!(
                "cross-attention needs at least 2 branches, got {}",
                branches.len()
            )));
        }
        let head_count = branches[0].len();
        let mut dim = None;
        for heads in &branches {
            if heads.len() != head_count {
                return Err(Error::Config("branches disagree on head count".into()));
            }
            let d = check_heads(heads)? * head_count;
            if *dim.get_or_insert(d) != d {
                return Err(Error::dims(
                    "CrossAttentionBlock",
                    (d, d),
                    (dim.unwrap(), dim.unwrap()),
                ));
            }
        }
        Ok(Self {
            dim: dim.unwrap_or(0),
            branches,
        })
    }

    pub fn random<R: Rng + ?Sized>(
        n: usize,
        d: usize,
        config: MultiHeadConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let hd = config.head_dim(d)?;
        let branches = (0..n)
            .map(|_| {
                (0..config.heads())
                    .map(|_| ProjectionTriple::random(hd, rng))
                    .collect()
            })
            .collect();
        Self::from_heads(branches)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn head_count(&self) -> usize {
        self.branches[0].len()
    }

    pub fn branches(&self) -> &[Vec<ProjectionTriple>] {
        &self.branches
    }

    pub fn branches_mut(&mut self) -> &mut [Vec<ProjectionTriple>] {
        &mut self.branches
    }

    /// Attention weights `w_ij` for each head and branch `i`; column `c` of
    /// `weights[h][i]` belongs to the `c`-th branch `j != i` in bank order.
    pub fn attention_weights(&self, bank: &[Matrix]) -> Result<Vec<Vec<Matrix>>> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let inputs: Vec<Var> = bank.iter().map(|b| g.input(b.clone())).collect();
        let (_, weights) = bound.increments(&mut g, &inputs)?;
        Ok(weights
            .into_iter()
            .map(|per_branch| per_branch.into_iter().map(|w| g.value(w).clone()).collect())
            .collect())
    }

    pub(crate) fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        for i in 0..self.branches.len() {
            triple_names(&format!("{prefix}.{i}"), self.head_count(), out);
        }
    }

    pub(crate) fn matrices<'a>(&'a self, out: &mut Vec<&'a Matrix>) {
        out.extend(self.branches.iter().flatten().flat_map(|t| t.matrices()));
    }

    pub(crate) fn matrices_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Matrix>) {
        out.extend(
            self.branches
                .iter_mut()
                .flatten()
                .flat_map(|t| t.matrices_mut()),
        );
    }

    pub(crate) fn bind(&self, g: &mut Graph) -> BoundCrossAttention {
        BoundCrossAttention {
            dim: self.dim,
            branches: self
                .branches
                .iter()
                .map(|heads| heads.iter().map(|t| t.bind(g)).collect())
                .collect(),
        }
    }
}

pub(crate) struct BoundCrossAttention {
    dim: usize,
    branches: Vec<Vec<BoundTriple>>,
}

impl BoundCrossAttention {
    /// Per-branch increments `sum_{j != i} w_ij v_j` (residual not added),
    /// plus the weight nodes `[head][i]`.
    fn increments(&self, g: &mut Graph, bank: &[Var]) -> Result<(Vec<Var>, Vec<Vec<Var>>)> {
        let n = self.branches.len();
        if bank.len() != n {
            return Err(Error::Usage(format!(
                "cross-attention built for {n} branches received a bank of {}",
                bank.len()
            )));
        }
        for &b in bank {
            check_width(g, b, self.dim, "cross-attention")?;
        }
        let heads = self.branches[0].len();
        let hd = self.dim / heads;
        let mut per_head: Vec<Vec<Var>> = Vec::with_capacity(heads);
        let mut weights = Vec::with_capacity(heads);
        for h in 0..heads {
            let mut q = Vec::with_capacity(n);
            let mut k = Vec::with_capacity(n);
            let mut v = Vec::with_capacity(n);
            for (i, &b) in bank.iter().enumerate() {
                let x = head_slice(g, b, h, hd, heads)?;
                let p = self.branches[i][h];
                q.push(g.matmul(x, p.query)?);
                k.push(g.matmul(x, p.key)?);
                v.push(g.matmul(x, p.value)?);
            }
            let mut deltas = Vec::with_capacity(n);
            let mut head_weights = Vec::with_capacity(n);
            for (i, &qi) in q.iter().enumerate() {
                let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                let logits = others
                    .iter()
                    .map(|&j| g.row_dot(qi, k[j]))
                    .collect::<Result<Vec<_>>>()?;
                let delta = if n == 2 {
                    let w = g.sigmoid(logits[0])?;
                    head_weights.push(w);
                    g.scale_rows(w, v[others[0]])?
                } else {
                    let joined = g.concat_cols(&logits)?;
                    let w = g.softmax_row(joined)?;
                    head_weights.push(w);
                    let mut acc: Option<Var> = None;
                    for (col, &j) in others.iter().enumerate() {
                        let wj = g.slice_cols(w, col, 1)?;
                        let term = g.scale_rows(wj, v[j])?;
                        acc = Some(match acc {
                            Some(a) => g.add(a, term)?,
                            None => term,
                        });
                    }
                    acc.expect("n > 2 has at least two other branches")
                };
                deltas.push(delta);
            }
            per_head.push(deltas);
            weights.push(head_weights);
        }
        let joined = (0..n)
            .map(|i| {
                let parts: Vec<Var> = per_head.iter().map(|d| d[i]).collect();
                join_heads(g, &parts)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((joined, weights))
    }

    pub(crate) fn increment(&self, g: &mut Graph, bank: &[Var]) -> Result<Vec<Var>> {
        Ok(self.increments(g, bank)?.0)
    }

    pub(crate) fn forward(&self, g: &mut Graph, bank: &[Var]) -> Result<Vec<Var>> {
        let deltas = self.increment(g, bank)?;
        bank.iter().zip(deltas).map(|(&b, d)| g.add(b, d)).collect()
    }
}

/// Self-attention output `b + sigmoid(q . k) v` for each row of `b`.
pub fn sab_forward(block: &SelfAttentionBlock, b: &Matrix) -> Result<Matrix> {
    let mut g = Graph::new();
    let bound = block.bind(&mut g);
    let x = g.input(b.clone());
    let out = bound.forward(&mut g, x)?;
    Ok(g.value(out).clone())
}

/// Cross-attention outputs, one per bank entry.
pub fn cab_forward(block: &CrossAttentionBlock, bank: &[Matrix]) -> Result<Vec<Matrix>> {
    let mut g = Graph::new();
    let bound = block.bind(&mut g);
    let inputs: Vec<Var> = bank.iter().map(|b| g.input(b.clone())).collect();
    let outs = bound.forward(&mut g, &inputs)?;
    Ok(outs.into_iter().map(|o| g.value(o).clone()).collect())
}

/// Blocks that can be re-split into attention heads.
pub trait MultiHead: Sized {
    /// Rebuilds the block with `config.heads()` heads. Head `h` starts from
    /// the `h`-th diagonal `(d/h) x (d/h)` block of each single-head
    /// projection, so one head returns the block unchanged.
    fn with_heads(&self, config: MultiHeadConfig) -> Result<Self>;
}

impl MultiHead for SelfAttentionBlock {
    fn with_heads(&self, config: MultiHeadConfig) -> Result<Self> {
        if config.heads() == self.head_count() {
            return Ok(self.clone());
        }
        let full = merged(&self.heads, self.dim);
        let hd = config.head_dim(self.dim)?;
        let heads = (0..config.heads())
            .map(|h| full.diagonal_block(h * hd, hd))
            .collect();
        Ok(Self {
            dim: self.dim,
            heads,
        })
    }
}

impl MultiHead for CrossAttentionBlock {
    fn with_heads(&self, config: MultiHeadConfig) -> Result<Self> {
        if config.heads() == self.head_count() {
            return Ok(self.clone());
        }
        let hd = config.head_dim(self.dim)?;
        let branches = self
            .branches
            .iter()
            .map(|heads| {
                let full = merged(heads, self.dim);
                (0..config.heads())
                    .map(|h| full.diagonal_block(h * hd, hd))
                    .collect()
            })
            .collect();
        Ok(Self {
            dim: self.dim,
            branches,
        })
    }
}

/// Multi-head version of `block`.
pub fn mha_wrap<B: MultiHead>(block: &B, config: MultiHeadConfig) -> Result<B> {
    block.with_heads(config)
}

/// Block-diagonal single-head triple assembled from per-head projections.
fn merged(heads: &[ProjectionTriple], d: usize) -> ProjectionTriple {
    if heads.len() == 1 {
        return heads[0].clone();
    }
    let hd = d / heads.len();
    let assemble = |pick: fn(&ProjectionTriple) -> &Matrix| {
        Matrix::from_fn(d, d, |r, c| {
            let (hr, hc) = (r / hd, c / hd);
            if hr == hc {
                pick(&heads[hr]).get(r % hd, c % hd)
            } else {
                0.0
            }
        })
    };
    ProjectionTriple {
        query: assemble(|t| &t.query),
        key: assemble(|t| &t.key),
        value: assemble(|t| &t.value),
    }
}

fn check_heads(heads: &[ProjectionTriple]) -> Result<usize> {
    let Some(first) = heads.first() else {
        return Err(Error::Config("at least one head is required".into()));
    };
    let hd = first.dim();
    for t in heads {
        ProjectionTriple::new(t.query.clone(), t.key.clone(), t.value.clone())?;
        if t.dim() != hd {
            return Err(Error::dims("attention heads", (hd, hd), (t.dim(), t.dim())));
        }
    }
    Ok(hd)
}

fn check_width(g: &Graph, b: Var, dim: usize, op: &'static str) -> Result<()> {
    let shape = g.value(b).shape();
    if shape.1 != dim {
        return Err(Error::dims(op, (shape.0, dim), shape));
    }
    Ok(())
}

fn head_slice(g: &mut Graph, b: Var, h: usize, hd: usize, heads: usize) -> Result<Var> {
    if heads == 1 {
        Ok(b)
    } else {
        g.slice_cols(b, h * hd, hd)
    }
}

fn join_heads(g: &mut Graph, parts: &[Var]) -> Result<Var> {
    if parts.len() == 1 {
        Ok(parts[0])
    } else {
        g.concat_cols(parts)
    }
}

fn triple_names(prefix: &str, heads: usize, out: &mut Vec<String>) {
    for h in 0..heads {
        for part in ["query", "key", "value"] {
            out.push(format!("{prefix}.h{h}.{part}"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_values_sab(block: &mut SelfAttentionBlock) {
        for t in block.heads_mut() {
            t.value = Matrix::zeros(t.dim(), t.dim());
        }
    }

    #[test]
    fn sab_zero_value_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut block = SelfAttentionBlock::random(4, MultiHeadConfig::single(), &mut rng).unwrap();
        zero_values_sab(&mut block);
        let b = Matrix::row(vec![0.3, -1.2, 2.0, 0.7]);
        assert_eq!(sab_forward(&block, &b).unwrap(), b);
    }

    #[test]
    fn sab_identity_projections() {
        let block = SelfAttentionBlock::new(ProjectionTriple::identity(2));
        let out = sab_forward(&block, &Matrix::row(vec![1.0, 0.0])).unwrap();
        let w = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((out.get(0, 0) - (1.0 + w)).abs() < 1e-15);
        assert!((out.get(0, 0) - 1.731_059).abs() < 1e-6);
        assert_eq!(out.get(0, 1), 0.0);
    }

    #[test]
    fn sab_zero_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let block = SelfAttentionBlock::random(3, MultiHeadConfig::single(), &mut rng).unwrap();
        let out = sab_forward(&block, &Matrix::zeros(1, 3)).unwrap();
        assert!(out.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sab_dimension_mismatch() {
        let block = SelfAttentionBlock::new(ProjectionTriple::identity(3));
        assert!(matches!(
            sab_forward(&block, &Matrix::zeros(1, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn cab_scalar_example() {
        let block = CrossAttentionBlock::new(vec![
            ProjectionTriple::identity(1),
            ProjectionTriple::identity(1),
        ])
        .unwrap();
        let out = cab_forward(&block, &[Matrix::row(vec![1.0]), Matrix::row(vec![2.0])]).unwrap();
        let w = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((w - 0.880_797).abs() < 1e-6);
        assert!((out[0].get(0, 0) - (1.0 + 2.0 * w)).abs() < 1e-15);
        assert!((out[0].get(0, 0) - 2.761_594).abs() < 1e-6);
        // branch 2 imports b1: 2 + sigmoid(2) * 1
        assert!((out[1].get(0, 0) - (2.0 + w)).abs() < 1e-15);
    }

    #[test]
    fn cab_needs_two_branches() {
        assert!(matches!(
            CrossAttentionBlock::new(vec![ProjectionTriple::identity(2)]),
            Err(Error::Usage(_))
        ));
        let block = CrossAttentionBlock::new(vec![ProjectionTriple::identity(2); 3]).unwrap();
        assert!(matches!(
            cab_forward(&block, &[Matrix::zeros(1, 2), Matrix::zeros(1, 2)]),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            cab_forward(
                &block,
                &[
                    Matrix::zeros(1, 2),
                    Matrix::zeros(1, 2),
                    Matrix::zeros(1, 3)
                ]
            ),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn cab_equal_logits_split_evenly() {
        // Zero queries make every cross logit 0.
        let zero_q = ProjectionTriple {
            query: Matrix::zeros(2, 2),
            key: Matrix::identity(2),
            value: Matrix::identity(2),
        };
        let block = CrossAttentionBlock::new(vec![zero_q; 3]).unwrap();
        let bank = [
            Matrix::row(vec![1.0, 0.0]),
            Matrix::row(vec![0.0, 2.0]),
            Matrix::row(vec![-1.0, 3.0]),
        ];
        let weights = block.attention_weights(&bank).unwrap();
        for w in &weights[0] {
            assert_eq!(w.as_slice(), &[0.5, 0.5]);
        }
        let out = cab_forward(&block, &bank).unwrap();
        // z_0 = b_0 + 0.5 (b_1 + b_2)
        assert_eq!(out[0].as_slice(), &[0.5, 2.5]);
    }

    #[test]
    fn cab_zero_values_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut block =
            CrossAttentionBlock::random(2, 3, MultiHeadConfig::single(), &mut rng).unwrap();
        for t in block.branches_mut().iter_mut().flatten() {
            t.value = Matrix::zeros(3, 3);
        }
        let bank = vec![
            Matrix::row(vec![1.0, 2.0, 3.0]),
            Matrix::row(vec![-4.0, 0.5, 0.25]),
        ];
        assert_eq!(cab_forward(&block, &bank).unwrap(), bank);
    }

    #[test]
    fn mha_rejects_indivisible_dim() {
        let block = SelfAttentionBlock::new(ProjectionTriple::identity(6));
        assert!(matches!(
            mha_wrap(&block, MultiHeadConfig::new(4).unwrap()),
            Err(Error::Config(_))
        ));
        assert!(MultiHeadConfig::new(0).is_err());
    }

    #[test]
    fn mha_round_trip_of_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let block =
            SelfAttentionBlock::random(4, MultiHeadConfig::new(2).unwrap(), &mut rng).unwrap();
        let again = mha_wrap(
            &mha_wrap(&block, MultiHeadConfig::single()).unwrap(),
            MultiHeadConfig::new(2).unwrap(),
        )
        .unwrap();
        assert_eq!(again, block);
    }

    #[test]
    fn param_names_follow_matrix_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let block =
            CrossAttentionBlock::random(3, 4, MultiHeadConfig::new(2).unwrap(), &mut rng).unwrap();
        let mut names = Vec::new();
        block.param_names("cab", &mut names);
        let mut mats = Vec::new();
        block.matrices(&mut mats);
        assert_eq!(names.len(), mats.len());
        assert_eq!(names[0], "cab.0.h0.query");
        assert_eq!(names.last().unwrap(), "cab.2.h1.value");
    }
}
