//! Synthetic banks with known information structure.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{FeatureBankDataset, Sample, Split};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Binary label is the parity of one latent bit per bank entry; entry
    /// `i` sees only bit `i`.
    ComplementaryXor,
    /// All entries encode the label through the same prototypes.
    Redundant,
    /// Entry 0 holds a class prototype; the other entries are pure noise.
    Separable,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticKind::ComplementaryXor => "complementary-xor",
            SyntheticKind::Redundant => "redundant",
            SyntheticKind::Separable => "separable",
        })
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complementary-xor" | "xor" => Ok(Self::ComplementaryXor),
            "redundant" => Ok(Self::Redundant),
            "separable" => Ok(Self::Separable),
            other => Err(Error::Usage(format!("unknown synthetic task '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTaskSpec {
    pub kind: SyntheticKind,
    pub dim: usize,
    pub branches: usize,
    pub classes: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!(
                "noise must be >= 0, got {}",
                self.noise
            )));
        }
        if self.dim == 0 || self.branches == 0 || self.classes == 0 {
            return Err(Error::Config("d, N and C must be positive".into()));
        }
        match self.kind {
            SyntheticKind::ComplementaryXor if self.classes != 2 || self.branches < 2 => Err(
                Error::Config("complementary-xor needs C = 2 and N >= 2".into()),
            ),
            SyntheticKind::Redundant | SyntheticKind::Separable if self.classes < 2 => {
                Err(Error::Config(format!("{} needs C >= 2", self.kind)))
            }
            _ => Ok(()),
        }
    }
}

/// Latent variables behind one generated sample.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Latent {
    pub label: usize,
    /// Bit per entry (xor) or the class (other kinds).
    pub codes: Vec<usize>,
}

struct Generator {
    spec: SyntheticTaskSpec,
    /// `prototypes[2 i + bit]` for xor, `prototypes[class]` otherwise.
    vectors: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl Generator {
    fn new(spec: &SyntheticTaskSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let signs = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..spec.dim)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect()
        };
        let vectors = match spec.kind {
            // Two independent prototypes per entry, one per bit value. A
            // centred `+-e` code would make every attention output odd in the
            // bank while parity is even, so no linear head could read it.
            // The bit-1 prototype is redrawn until it differs from the bit-0
            // prototype and its negation (possible once d >= 2).
            SyntheticKind::ComplementaryXor => {
                let mut protos = Vec::with_capacity(2 * spec.branches);
                for _ in 0..spec.branches {
                    let zero = signs(&mut rng);
                    let one = loop {
                        let p = signs(&mut rng);
                        let negated = p.iter().zip(&zero).all(|(a, b)| *a == -b);
                        if spec.dim < 2 || (p != zero && !negated) {
                            break p;
                        }
                    };
                    protos.push(zero);
                    protos.push(one);
                }
                protos
            }
            SyntheticKind::Redundant | SyntheticKind::Separable => {
                let mut protos: Vec<Vec<f64>> = Vec::with_capacity(spec.classes);
                if spec.classes == 2 {
                    let p = signs(&mut rng);
                    protos.push(p.iter().map(|x| -x).collect());
                    protos.push(p);
                } else {
                    while protos.len() < spec.classes {
                        let p = signs(&mut rng);
                        // Distinct equal-norm prototypes keep the nearest
                        // prototype rule linear and exact at zero noise.
                        let exhausted = spec.dim < 32 && protos.len() >= 1 << spec.dim;
                        if exhausted || !protos.contains(&p) {
                            protos.push(p);
                        }
                    }
                }
                protos
            }
        };
        Self {
            spec: spec.clone(),
            vectors,
            rng,
        }
    }

    fn latent(&mut self) -> Latent {
        let s = &self.spec;
        match s.kind {
            SyntheticKind::ComplementaryXor => {
                let codes: Vec<usize> = (0..s.branches)
                    .map(|_| usize::from(self.rng.random::<bool>()))
                    .collect();
                let label = codes.iter().fold(0, |acc, b| acc ^ b);
                Latent { label, codes }
            }
            _ => {
                let c = self.rng.random_range(0..s.classes);
                Latent {
                    label: c,
                    codes: vec![c; s.branches],
                }
            }
        }
    }

    /// Noise-free vector of entry `i`.
    fn clean(&self, latent: &Latent, i: usize) -> Vec<f64> {
        match self.spec.kind {
            SyntheticKind::ComplementaryXor => self.vectors[2 * i + latent.codes[i]].clone(),
            SyntheticKind::Redundant => self.vectors[latent.codes[i]].clone(),
            SyntheticKind::Separable if i == 0 => self.vectors[latent.label].clone(),
            SyntheticKind::Separable => vec![0.0; self.spec.dim],
        }
    }

    fn sample(&mut self, id: String) -> (Sample, Latent) {
        let latent = self.latent();
        let features = (0..self.spec.branches)
            .map(|i| {
                let base = self.clean(&latent, i);
                // Separable distractor entries carry unit noise regardless of sigma.
                let sigma = if self.spec.kind == SyntheticKind::Separable && i > 0 {
                    1.0
                } else {
                    self.spec.noise
                };
                base.into_iter()
                    .map(|x| {
                        let e: f64 = self.rng.sample(StandardNormal);
                        x + sigma * e
                    })
                    .collect()
            })
            .collect();
        (
            Sample {
                id,
                label: latent.label,
                features,
            },
            latent,
        )
    }

    fn split(&mut self, split: Split, count: usize) -> Result<(FeatureBankDataset, Vec<Latent>)> {
        let (samples, latents): (Vec<_>, Vec<_>) = (0..count)
            .map(|i| self.sample(format!("{split}-{i}")))
            .unzip();
        let ds = FeatureBankDataset::new(
            self.spec.branches,
            self.spec.dim,
            self.spec.classes,
            split,
            samples,
        )?;
        Ok((ds, latents))
    }
}

/// Generates train and test splits from one seeded stream.
pub fn gen_synthetic(spec: &SyntheticTaskSpec) -> Result<(FeatureBankDataset, FeatureBankDataset)> {
    let (train, test, _) = gen_with_latents(spec)?;
    Ok((train, test))
}

pub(crate) fn gen_with_latents(
    spec: &SyntheticTaskSpec,
) -> Result<(FeatureBankDataset, FeatureBankDataset, Vec<Latent>)> {
    spec.validate()?;
    let mut generator = Generator::new(spec);
    let (train, mut latents) = generator.split(Split::Train, spec.train_samples)?;
    let (test, test_latents) = generator.split(Split::Test, spec.test_samples)?;
    latents.extend(test_latents);
    Ok((train, test, latents))
}
