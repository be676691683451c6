//! Exact mutual information on small discrete joint distributions.
//!
//! A [`JointDistribution`] is a full probability table over a product of
//! finite alphabets. Variable 0 plays the role of the label `y`; the
//! remaining variables are bank entries `b_1..b_N`. Every quantity here is
//! a finite sum over the table, in bits, with `0 log 0 = 0`.
//!
//! The checks mirror the argument that a representation sufficient for the
//! whole bank carries strictly more label information than any single
//! entry when every entry holds information the others lack:
//!
//! * data processing: `I(y; z) <= I(y; x)` for any channel `x -> z`;
//! * chain rule: `I(y; b_1, b_2) = I(y; b_1) + I(b_2; y | b_1)`;
//! * the fusion gap: if `I(b_i; y | b_j) > 0` for all `i != j`, then
//!   `I(y; b_1..b_N) > max_i I(y; b_i)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Upper bound on the product of arities.
pub const MAX_STATES: usize = 1_000_000;

/// Tolerance on probability sums.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Conditional-information level below which complementarity is treated
/// as absent.
pub const ASSUMPTION_THRESHOLD: f64 = 1e-6;

/// Minimum gap for the fusion inequality to count as strict.
pub const STRICT_MARGIN: f64 = 1e-9;

/// Slack allowed on the data-processing inequality.
pub const DPI_TOLERANCE: f64 = 1e-10;

/// Probability table over `arities[0] x arities[1] x ...`, row-major with
/// variable 0 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    arities: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(arities: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let states = state_count(&arities)?;
        if probs.len() != states {
            return Err(Error::Usage(format!(
                "table has {} entries, arities {arities:?} need {states}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Usage(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Usage(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { arities, probs })
    }

    /// Distribution of `f(state)` over states with probability `p(state)`
    /// given as a weight function. Weights are normalised.
    pub fn from_fn(arities: Vec<usize>, mut weight: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let states = state_count(&arities)?;
        let mut probs = Vec::with_capacity(states);
        let mut idx = vec![0; arities.len()];
        for _ in 0..states {
            probs.push(weight(&idx));
            advance(&mut idx, &arities);
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Usage(
                "weights must have a positive finite sum".into(),
            ));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(arities, probs)
    }

    /// Uniform over the outcomes listed (duplicates add weight).
    pub fn from_outcomes(arities: Vec<usize>, outcomes: &[Vec<usize>]) -> Result<Self> {
        let states = state_count(&arities)?;
        let mut probs = vec![0.0; states];
        for o in outcomes {
            if o.len() != arities.len() || o.iter().zip(&arities).any(|(v, a)| v >= a) {
                return Err(Error::Usage(format!("outcome {o:?} outside {arities:?}")));
            }
            probs[flat_index(o, &arities)] += 1.0;
        }
        let n = outcomes.len() as f64;
        probs.iter_mut().for_each(|p| *p /= n);
        Self::new(arities, probs)
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn var_count(&self) -> usize {
        self.arities.len()
    }

    /// Marginal table over `vars` (in the order given).
    pub fn marginal(&self, vars: &[usize]) -> Result<Vec<f64>> {
        self.check_vars(vars)?;
        let sub: Vec<usize> = vars.iter().map(|&v| self.arities[v]).collect();
        let mut out = vec![0.0; sub.iter().product()];
        let mut idx = vec![0; self.arities.len()];
        let mut proj = vec![0; vars.len()];
        for &p in &self.probs {
            for (k, &v) in vars.iter().enumerate() {
                proj[k] = idx[v];
            }
            out[flat_index(&proj, &sub)] += p;
            advance(&mut idx, &self.arities);
        }
        Ok(out)
    }

    /// Shannon entropy of the variables in `vars`, in bits.
    pub fn entropy(&self, vars: &[usize]) -> Result<f64> {
        let m = self.marginal(vars)?;
        Ok(-m
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>())
    }

    fn check_vars(&self, vars: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.arities.len()];
        for &v in vars {
            if v >= self.arities.len() {
                return Err(Error::Usage(format!(
                    "variable {v} out of range for {} variables",
                    self.arities.len()
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Usage(format!("variable {v} listed twice")));
            }
        }
        Ok(())
    }

    /// Appends a variable produced from variable `from` through `channel`.
    pub fn extend_with_channel(&self, from: usize, channel: &Channel) -> Result<Self> {
        if from >= self.arities.len() || channel.input_arity() != self.arities[from] {
            return Err(Error::Usage(format!(
                "channel input arity {} does not match variable {from}",
                channel.input_arity()
            )));
        }
        let out = channel.output_arity();
        let mut arities = self.arities.clone();
        arities.push(out);
        let mut probs = Vec::with_capacity(self.probs.len() * out);
        let mut idx = vec![0; self.arities.len()];
        for &p in &self.probs {
            let row = channel.row(idx[from]);
            probs.extend(row.iter().map(|&q| p * q));
            advance(&mut idx, &self.arities);
        }
        // Renormalise away rounding so the table invariant holds.
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(arities, probs)
    }
}

/// Row-stochastic conditional table `p(out | in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    input: usize,
    output: usize,
    table: Vec<f64>,
}

impl Channel {
    pub fn new(input: usize, output: usize, table: Vec<f64>) -> Result<Self> {
        if input == 0 || output == 0 || table.len() != input * output {
            return Err(Error::Usage(format!(
                "channel {input}->{output} needs {} entries, got {}",
                input * output,
                table.len()
            )));
        }
        for (r, row) in table.chunks(output).enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Usage(format!("channel row {r} has invalid entries")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::Usage(format!("channel row {r} sums to {total}")));
            }
        }
        Ok(Self {
            input,
            output,
            table,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut table = vec![0.0; n * n];
        for i in 0..n {
            table[i * n + i] = 1.0;
        }
        Self {
            input: n,
            output: n,
            table,
        }
    }

    /// Maps every input to output 0.
    pub fn constant(input: usize, output: usize) -> Self {
        let mut table = vec![0.0; input * output];
        for i in 0..input {
            table[i * output] = 1.0;
        }
        Self {
            input,
            output,
            table,
        }
    }

    /// Rows drawn as normalised i.i.d. exponentials.
    pub fn random(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut table = Vec::with_capacity(input * output);
        for _ in 0..input {
            let row: Vec<f64> = (0..output).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = row.iter().sum();
            table.extend(row.into_iter().map(|x: f64| x / total));
        }
        Self::new(input, output, table)
    }

    pub fn input_arity(&self) -> usize {
        self.input
    }

    pub fn output_arity(&self) -> usize {
        self.output
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.table[input * self.output..(input + 1) * self.output]
    }
}

fn state_count(arities: &[usize]) -> Result<usize> {
    if arities.is_empty() || arities.contains(&0) {
        return Err(Error::Usage(format!(
            "arities must be non-empty and positive: {arities:?}"
        )));
    }
    arities
        .iter()
        .try_fold(1usize, |acc, &a| acc.checked_mul(a))
        .filter(|&s| s <= MAX_STATES)
        .ok_or_else(|| {
            Error::Usage(format!(
                "product space of {arities:?} exceeds {MAX_STATES} states"
            ))
        })
}

fn flat_index(idx: &[usize], arities: &[usize]) -> usize {
    idx.iter().zip(arities).fold(0, |acc, (&i, &a)| acc * a + i)
}

/// Odometer increment, last variable fastest.
fn advance(idx: &mut [usize], arities: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < arities[k] {
            return;
        }
        idx[k] = 0;
    }
}

fn disjoint(sets: &[&[usize]]) -> Result<()> {
    let mut all: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    let n = all.len();
    all.sort_unstable();
    all.dedup();
    if all.len() != n {
        return Err(Error::Usage(format!("variable sets overlap: {sets:?}")));
    }
    if sets.iter().take(2).any(|s| s.is_empty()) {
        return Err(Error::Usage("information between empty sets".into()));
    }
    Ok(())
}

/// `I(A; B | C)` in bits; `C` may be empty. Computed over the sorted union
/// of the variables so that swapping `A` and `B` sums the same terms in the
/// same order.
fn information(dist: &JointDistribution, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
    disjoint(&[a, b, c])?;
    let mut all: Vec<usize> = [a, b, c].concat();
    all.sort_unstable();
    dist.check_vars(&all)?;

    let pos = |v: usize| all.iter().position(|&x| x == v).expect("variable in union");
    let sub: Vec<usize> = all.iter().map(|&v| dist.arities[v]).collect();
    let joint = dist.marginal(&all)?;

    let project = |set: &[usize]| -> Result<(Vec<usize>, Vec<usize>, Vec<f64>)> {
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        let positions = sorted.iter().map(|&v| pos(v)).collect();
        let arities = sorted.iter().map(|&v| dist.arities[v]).collect();
        let table = if sorted.is_empty() {
            vec![1.0]
        } else {
            dist.marginal(&sorted)?
        };
        Ok((positions, arities, table))
    };
    let ac: Vec<usize> = [a, c].concat();
    let bc: Vec<usize> = [b, c].concat();
    let (pa, aa, ta) = project(&ac)?;
    let (pb, ab, tb) = project(&bc)?;
    let (pc, acc, tc) = project(c)?;

    let lookup = |positions: &[usize], arities: &[usize], table: &[f64], idx: &[usize]| {
        let sel: Vec<usize> = positions.iter().map(|&p| idx[p]).collect();
        table[flat_index(&sel, arities)]
    };

    let mut idx = vec![0; all.len()];
    let mut total = 0.0;
    for &p in &joint {
        if p > 0.0 {
            let p_ac = lookup(&pa, &aa, &ta, &idx);
            let p_bc = lookup(&pb, &ab, &tb, &idx);
            let p_c = lookup(&pc, &acc, &tc, &idx);
            total += p * ((p * p_c) / (p_ac * p_bc)).log2();
        }
        advance(&mut idx, &sub);
    }
    // Exact value is non-negative; clamp rounding noise.
    Ok(total.max(0.0))
}

/// `I(A; B)` in bits for disjoint variable sets.
pub fn mutual_information(dist: &JointDistribution, a: &[usize], b: &[usize]) -> Result<f64> {
    information(dist, a, b, &[])
}

/// `I(A; B | C)` in bits for disjoint variable sets.
pub fn conditional_mi(
    dist: &JointDistribution,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<f64> {
    information(dist, a, b, c)
}

/// Outcome of a data-processing check.
#[derive(Clone, Debug, PartialEq)]
pub struct DpiReport {
    /// `I(y; x)`.
    pub source_info: f64,
    /// `I(y; z)`.
    pub processed_info: f64,
    pub holds: bool,
}

/// Builds `p(y, x, z) = p(y, x) p(z | x)` from a two-variable `(y, x)`
/// distribution and checks `I(y; z) <= I(y; x)` up to [`DPI_TOLERANCE`].
pub fn check_dpi(dist: &JointDistribution, channel: &Channel) -> Result<DpiReport> {
    if dist.var_count() != 2 {
        return Err(Error::Usage(format!(
            "data-processing check needs a (y, x) distribution, got {} variables",
            dist.var_count()
        )));
    }
    let full = dist.extend_with_channel(1, channel)?;
    let source_info = mutual_information(&full, &[0], &[1])?;
    let processed_info = mutual_information(&full, &[0], &[2])?;
    Ok(DpiReport {
        source_info,
        processed_info,
        holds: processed_info <= source_info + DPI_TOLERANCE,
    })
}

/// Outcome of the fusion-gap check on a `(y, b_1..b_N)` distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoremReport {
    /// `I(y; b_1..b_N)`: what any sufficient fused representation attains.
    pub joint_info: f64,
    /// `I(y; b_i)` per entry: the ceiling for a representation of `b_i` alone.
    pub single_info: Vec<f64>,
    /// Index of the best single entry (first on ties).
    pub best_match: usize,
    /// `min_{i != j} I(b_i; y | b_j)`.
    pub pairwise_margin: f64,
    /// `min_i I(b_{-i}; y | b_i)`, the grouped form the gap actually needs.
    pub grouped_margin: f64,
    pub assumption_holds: bool,
    /// `joint_info - max single_info`.
    pub gap: f64,
    /// `None` when the complementarity precondition fails.
    pub holds: Option<bool>,
}

impl TheoremReport {
    pub fn best_single(&self) -> f64 {
        self.single_info[self.best_match]
    }
}

/// Compares the information of the whole bank with the best single entry.
pub fn verify_theorem1(dist: &JointDistribution) -> Result<TheoremReport> {
    let n = dist
        .var_count()
        .checked_sub(1)
        .filter(|&n| n >= 2)
        .ok_or_else(|| {
            Error::Usage(format!(
                "need y and at least two bank entries, got {} variables",
                dist.var_count()
            ))
        })?;
    let bank: Vec<usize> = (1..=n).collect();

    let mut pairwise_margin = f64::INFINITY;
    for &i in &bank {
        for &j in &bank {
            if i != j {
                pairwise_margin = pairwise_margin.min(conditional_mi(dist, &[i], &[0], &[j])?);
            }
        }
    }
    let mut grouped_margin = f64::INFINITY;
    for &i in &bank {
        let rest: Vec<usize> = bank.iter().copied().filter(|&j| j != i).collect();
        grouped_margin = grouped_margin.min(conditional_mi(dist, &rest, &[0], &[i])?);
    }
    let assumption_holds = pairwise_margin > ASSUMPTION_THRESHOLD;

    let joint_info = mutual_information(dist, &[0], &bank)?;
    let single_info = bank
        .iter()
        .map(|&i| mutual_information(dist, &[0], &[i]))
        .collect::<Result<Vec<_>>>()?;
    let best_match =
        single_info.iter().enumerate().fold(
            0,
            |best, (i, &v)| if v > single_info[best] { i } else { best },
        );
    let gap = joint_info - single_info[best_match];

    Ok(TheoremReport {
        joint_info,
        single_info,
        best_match,
        pairwise_margin,
        grouped_margin,
        assumption_holds,
        gap,
        holds: assumption_holds.then_some(gap > STRICT_MARGIN),
    })
}

/// Seeded random distribution: normalised i.i.d. unit exponentials.
pub fn random_joint(arities: &[usize], seed: u64) -> Result<JointDistribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_joint_with(arities, &mut rng)
}

pub fn random_joint_with(arities: &[usize], rng: &mut ChaCha8Rng) -> Result<JointDistribution> {
    let states = state_count(arities)?;
    let draws: Vec<f64> = (0..states).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    JointDistribution::new(
        arities.to_vec(),
        draws.into_iter().map(|x| x / total).collect(),
    )
}

/// Canonical small instances.
pub mod canonical {
    use super::*;

    /// `(y, b_1, b_2)` with independent fair bits and `y = b_1 xor b_2`.
    pub fn xor() -> JointDistribution {
        let outcomes: Vec<Vec<usize>> = (0..4)
            .map(|s| vec![(s >> 1) ^ (s & 1), s >> 1, s & 1])
            .collect();
        JointDistribution::from_outcomes(vec![2, 2, 2], &outcomes).expect("valid table")
    }

    /// `y = (b_1, b_2)` encoded as `2 b_1 + b_2`.
    pub fn pair_copy() -> JointDistribution {
        let outcomes: Vec<Vec<usize>> = (0..4).map(|s| vec![s, s >> 1, s & 1]).collect();
        JointDistribution::from_outcomes(vec![4, 2, 2], &outcomes).expect("valid table")
    }

    /// `b_2 = b_1 = y`: every entry is fully redundant.
    pub fn redundant() -> JointDistribution {
        JointDistribution::from_outcomes(vec![2, 2, 2], &[vec![0, 0, 0], vec![1, 1, 1]])
            .expect("valid table")
    }
}
