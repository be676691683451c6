//! Architectures built from attention blocks, the add/concatenate
//! baselines, and the linear classifier head.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{
    BoundCrossAttention, BoundSelfAttention, CrossAttentionBlock, MultiHeadConfig,
    SelfAttentionBlock,
};
use crate::error::{Error, Result};
use crate::numeric::{Graph, Matrix, Var};

/// How the bank is turned into the classifier input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArchitectureKind {
    /// Per-branch self-attention, then concatenation.
    SaOnly,
    /// Cross-attention, then concatenation.
    CaOnly,
    /// Self-attention per branch, then cross-attention.
    Sa2Ca,
    /// Cross-attention, then self-attention per branch.
    Ca2Sa,
    /// Self- and cross-attention on the raw bank, increments summed.
    Sca,
    AddBaseline,
    ConcatBaseline,
    /// Branch `i` alone.
    Single(usize),
    /// Branch `i` through one self-attention block.
    SingleSa(usize),
}

impl ArchitectureKind {
    /// The five attention variants compared in ablations.
    pub const ATTENTION: [ArchitectureKind; 5] = [
        ArchitectureKind::SaOnly,
        ArchitectureKind::CaOnly,
        ArchitectureKind::Sa2Ca,
        ArchitectureKind::Ca2Sa,
        ArchitectureKind::Sca,
    ];

    /// Every variant of an ablation over `n` branches: the attention
    /// variants, both baselines, then `SINGLE_i` and `SINGLE_SA_i`.
    pub fn ablation_set(n: usize) -> Vec<ArchitectureKind> {
        let mut kinds = Self::ATTENTION.to_vec();
        kinds.push(ArchitectureKind::AddBaseline);
        kinds.push(ArchitectureKind::ConcatBaseline);
        kinds.extend((0..n).map(ArchitectureKind::Single));
        kinds.extend((0..n).map(ArchitectureKind::SingleSa));
        kinds
    }

    pub fn uses_self_attention(self) -> bool {
        matches!(
            self,
            Self::SaOnly | Self::Sa2Ca | Self::Ca2Sa | Self::Sca | Self::SingleSa(_)
        )
    }

    pub fn uses_cross_attention(self) -> bool {
        matches!(self, Self::CaOnly | Self::Sa2Ca | Self::Ca2Sa | Self::Sca)
    }

    /// Baseline whose logits an attention kind reproduces when every value
    /// projection is zero.
    pub fn residual_baseline(self) -> ArchitectureKind {
        match self {
            Self::SingleSa(i) => Self::Single(i),
            Self::AddBaseline => Self::AddBaseline,
            Self::Single(i) => Self::Single(i),
            _ => Self::ConcatBaseline,
        }
    }

    fn single_index(self) -> Option<usize> {
        match self {
            Self::Single(i) | Self::SingleSa(i) => Some(i),
            _ => None,
        }
    }

    /// Width of the classifier input for `n` branches of width `d`.
    pub fn head_input_dim(self, n: usize, d: usize) -> usize {
        match self {
            Self::AddBaseline | Self::Single(_) | Self::SingleSa(_) => d,
            _ => n * d,
        }
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SaOnly => write!(f, "SA_ONLY"),
            Self::CaOnly => write!(f, "CA_ONLY"),
            Self::Sa2Ca => write!(f, "SA2CA"),
            Self::Ca2Sa => write!(f, "CA2SA"),
            Self::Sca => write!(f, "SCA"),
            Self::AddBaseline => write!(f, "ADD"),
            Self::ConcatBaseline => write!(f, "CONCAT"),
            Self::Single(i) => write!(f, "SINGLE_{i}"),
            Self::SingleSa(i) => write!(f, "SINGLE_SA_{i}"),
        }
    }
}

impl FromStr for ArchitectureKind {
    type Err = Error;

    /// Accepts the display names case-insensitively, plus `ADD_BASELINE`,
    /// `CONCAT_BASELINE`, and `SINGLE<i>` / `SINGLE_SA<i>` without the
    /// underscore before the index.
    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let kind = match upper.as_str() {
            "SA_ONLY" | "SA" => Self::SaOnly,
            "CA_ONLY" | "CA" => Self::CaOnly,
            "SA2CA" => Self::Sa2Ca,
            "CA2SA" => Self::Ca2Sa,
            "SCA" => Self::Sca,
            "ADD" | "ADD_BASELINE" => Self::AddBaseline,
            "CONCAT" | "CONCAT_BASELINE" => Self::ConcatBaseline,
            other => {
                let parse_idx = |rest: &str| rest.trim_start_matches('_').parse::<usize>().ok();
                if let Some(i) = other.strip_prefix("SINGLE_SA").and_then(parse_idx) {
                    Self::SingleSa(i)
                } else if let Some(i) = other.strip_prefix("SINGLE").and_then(parse_idx) {
                    Self::Single(i)
                } else {
                    return Err(Error::Usage(format!("unknown architecture '{s}'")));
                }
            }
        };
        Ok(kind)
    }
}

/// Merges branch outputs: elementwise sum for [`ArchitectureKind::AddBaseline`],
/// column concatenation in bank order for everything else.
pub fn aggregate(kind: ArchitectureKind, outputs: &[Matrix]) -> Result<Matrix> {
    let mut g = Graph::new();
    let vars: Vec<Var> = outputs.iter().map(|m| g.input(m.clone())).collect();
    let out = aggregate_graph(&mut g, kind, &vars)?;
    Ok(g.value(out).clone())
}

fn aggregate_graph(g: &mut Graph, kind: ArchitectureKind, outputs: &[Var]) -> Result<Var> {
    if outputs.is_empty() {
        return Err(Error::Usage("nothing to aggregate".into()));
    }
    if outputs.len() == 1 {
        return Ok(outputs[0]);
    }
    if kind == ArchitectureKind::AddBaseline {
        let mut acc = outputs[0];
        for &o in &outputs[1..] {
            acc = g.add(acc, o)?;
        }
        Ok(acc)
    } else {
        g.concat_cols(outputs)
    }
}

/// Per-feature affine standardisation fitted on training data.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    /// Per-branch `1 x d` means.
    pub mean: Vec<Matrix>,
    /// Per-branch `1 x d` standard deviations (never zero).
    pub std: Vec<Matrix>,
}

impl Standardizer {
    /// Fits means and standard deviations per branch feature. Zero
    /// variance features get a unit scale.
    pub fn fit(bank: &[Matrix]) -> Result<Self> {
        let mut mean = Vec::with_capacity(bank.len());
        let mut std = Vec::with_capacity(bank.len());
        for b in bank {
            if b.rows() == 0 {
                return Err(Error::Usage("cannot standardise an empty bank".into()));
            }
            let n = b.rows() as f64;
            let mu = Matrix::from_fn(1, b.cols(), |_, c| {
                (0..b.rows()).map(|r| b.get(r, c)).sum::<f64>() / n
            });
            let sd = Matrix::from_fn(1, b.cols(), |_, c| {
                let m = mu.get(0, c);
                let var = (0..b.rows())
                    .map(|r| (b.get(r, c) - m).powi(2))
                    .sum::<f64>()
                    / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            });
            mean.push(mu);
            std.push(sd);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, bank: &[Matrix]) -> Result<Vec<Matrix>> {
        if bank.len() > self.mean.len() {
            return Err(Error::Usage(format!(
                "standardiser fitted on {} branches, got {}",
                self.mean.len(),
                bank.len()
            )));
        }
        bank.iter()
            .enumerate()
            .map(|(i, b)| {
                let (mu, sd) = (&self.mean[i], &self.std[i]);
                if mu.cols() != b.cols() {
                    return Err(Error::dims("standardise", mu.shape(), b.shape()));
                }
                Ok(Matrix::from_fn(b.rows(), b.cols(), |r, c| {
                    (b.get(r, c) - mu.get(0, c)) / sd.get(0, c)
                }))
            })
            .collect()
    }
}

/// A complete fusion network: attention blocks (where the kind uses them)
/// followed by aggregation and a fully connected head.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionModel {
    kind: ArchitectureKind,
    branches: usize,
    dim: usize,
    classes: usize,
    mha: MultiHeadConfig,
    seed: u64,
    /// One block per branch, or a single block for `SingleSa`.
    pub sab: Vec<SelfAttentionBlock>,
    pub cab: Option<CrossAttentionBlock>,
    /// `in_dim x classes`.
    pub head_weight: Matrix,
    /// `1 x classes`.
    pub head_bias: Matrix,
    pub standardizer: Option<Standardizer>,
}

pub(crate) struct BoundModel {
    sab: Vec<BoundSelfAttention>,
    cab: Option<BoundCrossAttention>,
    head_weight: Var,
    head_bias: Var,
    /// Every parameter leaf, in [`FusionModel::params`] order.
    pub(crate) params: Vec<Var>,
}

impl FusionModel {
    /// Builds a model with seeded random initialisation. Attention
    /// parameters are drawn first (self-attention blocks in branch order,
    /// then cross-attention branches), then the head weight; the bias
    /// starts at zero.
    pub fn new(
        kind: ArchitectureKind,
        branches: usize,
        dim: usize,
        classes: usize,
        mha: MultiHeadConfig,
        seed: u64,
    ) -> Result<Self> {
        if branches == 0 || dim == 0 || classes == 0 {
            return Err(Error::Config(format!(
                "branches ({branches}), dim ({dim}) and classes ({classes}) must be positive"
            )));
        }
        if kind.uses_cross_attention() && branches < 2 {
            return Err(Error::Config(format!("{kind} needs at least 2 branches")));
        }
        if let Some(i) = kind.single_index() {
            if i >= branches {
                return Err(Error::Config(format!(
                    "{kind} selects branch {i} of only {branches}"
                )));
            }
        }
        mha.head_dim(dim)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sab_count = match kind {
            ArchitectureKind::SingleSa(_) => 1,
            k if k.uses_self_attention() => branches,
            _ => 0,
        };
        let sab = (0..sab_count)
            .map(|_| SelfAttentionBlock::random(dim, mha, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let cab = if kind.uses_cross_attention() {
            Some(CrossAttentionBlock::random(branches, dim, mha, &mut rng)?)
        } else {
            None
        };
        let in_dim = kind.head_input_dim(branches, dim);
        let bound = 1.0 / (in_dim as f64).sqrt();
        let head_weight = Matrix::from_fn(in_dim, classes, |_, _| rng.random_range(-bound..=bound));
        Ok(Self {
            kind,
            branches,
            dim,
            classes,
            mha,
            seed,
            sab,
            cab,
            head_weight,
            head_bias: Matrix::zeros(1, classes),
            standardizer: None,
        })
    }

    pub fn kind(&self) -> ArchitectureKind {
        self.kind
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

    pub fn heads(&self) -> MultiHeadConfig {
        self.mha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Parameter names in canonical order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, block) in self.sab.iter().enumerate() {
            let branch = self.kind.single_index().unwrap_or(i);
            block.param_names(&format!("sab.{branch}"), &mut names);
        }
        if let Some(cab) = &self.cab {
            cab.param_names("cab", &mut names);
        }
        names.push("head.weight".into());
        names.push("head.bias".into());
        names
    }

    /// Trainable parameters in canonical order.
    pub fn params(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for block in &self.sab {
            block.matrices(&mut out);
        }
        if let Some(cab) = &self.cab {
            cab.matrices(&mut out);
        }
        out.push(&self.head_weight);
        out.push(&self.head_bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for block in &mut self.sab {
            block.matrices_mut(&mut out);
        }
        if let Some(cab) = &mut self.cab {
            cab.matrices_mut(&mut out);
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|m| m.len()).sum()
    }

    /// Zeroes every value projection, leaving only the residual paths.
    pub fn zero_value_projections(&mut self) {
        let zero = |t: &mut crate::attention::ProjectionTriple| {
            t.value = Matrix::zeros(t.dim(), t.dim());
        };
        for block in &mut self.sab {
            block.heads_mut().iter_mut().for_each(zero);
        }
        if let Some(cab) = &mut self.cab {
            cab.branches_mut().iter_mut().flatten().for_each(zero);
        }
    }

    pub(crate) fn bind(&self, g: &mut Graph) -> BoundModel {
        let first = g.len();
        let sab = self.sab.iter().map(|b| b.bind(g)).collect();
        let cab = self.cab.as_ref().map(|c| c.bind(g));
        let head_weight = g.param(self.head_weight.clone());
        let head_bias = g.param(self.head_bias.clone());
        // Leaves were pushed consecutively in canonical order.
        let params = (first..g.len()).map(Var::from_index).collect();
        BoundModel {
            sab,
            cab,
            head_weight,
            head_bias,
            params,
        }
    }

    fn check_bank(&self, bank: &[Matrix]) -> Result<()> {
        let needed = match self.kind.single_index() {
            Some(i) => bank.len() > i,
            None => bank.len() == self.branches,
        };
        if !needed {
            return Err(Error::Usage(format!(
                "{} over {} branches received a bank of {}",
                self.kind,
                self.branches,
                bank.len()
            )));
        }
        let rows = bank[0].rows();
        for b in bank {
            if b.cols() != self.dim || b.rows() != rows {
                return Err(Error::dims("bank", (rows, self.dim), b.shape()));
            }
        }
        Ok(())
    }

    /// Standardises (if configured) and places the bank on the graph.
    pub(crate) fn bank_inputs(&self, g: &mut Graph, bank: &[Matrix]) -> Result<Vec<Var>> {
        self.check_bank(bank)?;
        let bank = match &self.standardizer {
            Some(s) => s.apply(bank)?,
            None => bank.to_vec(),
        };
        Ok(bank.into_iter().map(|b| g.input(b)).collect())
    }

    /// Logits `B x classes` on the graph.
    pub(crate) fn forward_graph(
        &self,
        g: &mut Graph,
        bound: &BoundModel,
        bank: &[Var],
    ) -> Result<Var> {
        use ArchitectureKind::*;

        let sab_all = |g: &mut Graph, xs: &[Var]| -> Result<Vec<Var>> {
            xs.iter()
                .zip(&bound.sab)
                .map(|(&x, s)| s.forward(g, x))
                .collect()
        };
        let cab = || {
            bound
                .cab
                .as_ref()
                .expect("cross-attention kinds bind a block")
        };

        let branch_outputs = match self.kind {
            SaOnly => sab_all(g, bank)?,
            CaOnly => cab().forward(g, bank)?,
            Sa2Ca => {
                let enhanced = sab_all(g, bank)?;
                cab().forward(g, &enhanced)?
            }
            Ca2Sa => {
                let crossed = cab().forward(g, bank)?;
                sab_all(g, &crossed)?
            }
            Sca => {
                let cross = cab().increment(g, bank)?;
                let mut out = Vec::with_capacity(bank.len());
                for ((&b, s), c) in bank.iter().zip(&bound.sab).zip(cross) {
                    let own = s.increment(g, b)?;
                    let z = g.add(b, own)?;
                    out.push(g.add(z, c)?);
                }
                out
            }
            AddBaseline | ConcatBaseline => bank.to_vec(),
            Single(i) => vec![bank[i]],
            SingleSa(i) => vec![bound.sab[0].forward(g, bank[i])?],
        };
        let features = aggregate_graph(g, self.kind, &branch_outputs)?;
        let scores = g.matmul(features, bound.head_weight)?;
        g.add(scores, bound.head_bias)
    }

    /// Logits for a bank given as `N` matrices of shape `B x d` (one row
    /// per sample).
    pub fn forward(&self, bank: &[Matrix]) -> Result<Matrix> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let inputs = self.bank_inputs(&mut g, bank)?;
        let logits = self.forward_graph(&mut g, &bound, &inputs)?;
        Ok(g.value(logits).clone())
    }

    /// Mean cross-entropy of the logits against `labels`.
    pub fn loss(&self, bank: &[Matrix], labels: &[usize]) -> Result<f64> {
        Ok(self.loss_and_gradients(bank, labels)?.0)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter,
    /// in [`FusionModel::params`] order.
    pub fn loss_and_gradients(
        &self,
        bank: &[Matrix],
        labels: &[usize],
    ) -> Result<(f64, Vec<Matrix>)> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let inputs = self.bank_inputs(&mut g, bank)?;
        let logits = self.forward_graph(&mut g, &bound, &inputs)?;
        let loss = g.cross_entropy(logits, labels)?;
        let grads = g.backward(loss)?;
        let value = g.value(loss).get(0, 0);
        Ok((value, bound.params.iter().map(|&p| grads.wrt(p)).collect()))
    }

    /// Arg-max class per sample; ties go to the lowest index.
    pub fn predict(&self, bank: &[Matrix]) -> Result<Vec<usize>> {
        let logits = self.forward(bank)?;
        Ok((0..logits.rows())
            .map(|r| {
                let row = logits.row_slice(r);
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}
