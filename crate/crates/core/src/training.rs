//! Mini-batch cross-entropy training with SGD, momentum and weight decay.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bankio::FeatureBankDataset;
use crate::error::{Error, Result};
use crate::fusion::{FusionModel, Standardizer};
use crate::numeric::{Graph, Matrix};

/// Hyper-parameters of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr0: f64,
    pub epochs: usize,
    /// Epochs at which the learning rate is multiplied by `lr_drop_factor`.
    pub lr_drop_epochs: Vec<usize>,
    pub lr_drop_factor: f64,
    pub seed: u64,
    /// Fraction of each class kept for training, in `(0, 1]`.
    pub label_fraction: f64,
    /// Fit per-feature standardisation on the training set.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr0: 0.1,
            epochs: 200,
            lr_drop_epochs: vec![100, 150],
            lr_drop_factor: 0.1,
            seed: 0,
            label_fraction: 1.0,
            standardize: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "label_fraction must lie in (0, 1], got {}",
                self.label_fraction
            )));
        }
        if self.lr_drop_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "lr_drop_epochs must be strictly increasing".into(),
            ));
        }
        if self
            .lr_drop_epochs
            .last()
            .is_some_and(|&e| e >= self.epochs)
        {
            return Err(Error::Config(format!(
                "lr_drop_epochs must be below epochs ({})",
                self.epochs
            )));
        }
        for (name, v) in [
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
            ("lr0", self.lr0),
            ("lr_drop_factor", self.lr_drop_factor),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    /// Learning rate used throughout epoch `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.lr_drop_epochs.iter().filter(|&&e| e <= epoch).count();
        self.lr0 * self.lr_drop_factor.powi(drops as i32)
    }
}

/// Per-epoch losses and a final top-1 accuracy.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Metrics {
    pub epoch_lrs: Vec<f64>,
    /// Mean cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
    pub accuracy: f64,
}

impl Metrics {
    /// `epoch,lr,mean_loss` per epoch, then `final,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (e, (lr, loss)) in self.epoch_lrs.iter().zip(&self.epoch_losses).enumerate() {
            let _ = writeln!(out, "{e},{lr:?},{loss:?}");
        }
        let _ = writeln!(out, "final,{:?}", self.accuracy);
        out
    }

    /// First window start where the epoch losses break [`trend_violation`].
    pub fn loss_trend_violation(&self, warmup: usize, window: usize, slack: f64) -> Option<usize> {
        trend_violation(&self.epoch_losses, warmup, window, slack)
    }
}

/// Checks that a per-epoch series trends down: for every epoch `e >= warmup`
/// that starts a full `window`, no value inside the window exceeds
/// `series[e] * (1 + slack)`. Returns the first offending window start.
pub fn trend_violation(series: &[f64], warmup: usize, window: usize, slack: f64) -> Option<usize> {
    (warmup..series.len())
        .filter(|&e| e + window <= series.len())
        .find(|&e| {
            series[e..e + window]
                .iter()
                .any(|&x| x > series[e] * (1.0 + slack))
        })
}

/// Mean cross-entropy of `logits` (`B x C`) against class indices.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    let mut g = Graph::new();
    let x = g.input(logits.clone());
    let loss = g.cross_entropy(x, labels)?;
    Ok(g.value(loss).get(0, 0))
}

/// SGD with classical momentum and L2 weight decay folded into the
/// gradient: `g = grad + wd * p`, `v = momentum * v + g`, `p -= lr * v`.
#[derive(Clone, Debug, Default)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Matrix>,
}

impl Sgd {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    pub fn velocity(&self) -> &[Matrix] {
        &self.velocity
    }

    pub fn step(&mut self, params: Vec<&mut Matrix>, grads: &[Matrix], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Usage(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.velocity.is_empty() {
            self.velocity = grads
                .iter()
                .map(|g| Matrix::zeros(g.rows(), g.cols()))
                .collect();
        }
        for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.velocity) {
            if p.shape() != g.shape() || v.shape() != g.shape() {
                return Err(Error::dims("sgd_step", p.shape(), g.shape()));
            }
            let (ps, gs, vs) = (p.as_mut_slice(), g.as_slice(), v.as_mut_slice());
            for i in 0..gs.len() {
                let grad = gs[i] + self.weight_decay * ps[i];
                vs[i] = self.momentum * vs[i] + grad;
                ps[i] -= lr * vs[i];
            }
        }
        Ok(())
    }
}

/// Indices kept when training on a `fraction` of each class:
/// `ceil(fraction * n_c)` per class, drawn with `rng`, returned ascending.
pub fn stratified_subsample(
    labels: &[usize],
    classes: usize,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..labels.len()).collect();
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut keep = Vec::new();
    for mut members in by_class {
        let k = (fraction * members.len() as f64).ceil() as usize;
        members.shuffle(rng);
        keep.extend_from_slice(&members[..k.min(members.len())]);
    }
    keep.sort_unstable();
    keep
}

/// Trains `model` in place and reports per-epoch losses and the final
/// accuracy on the (possibly subsampled) training set.
pub fn train(
    model: &mut FusionModel,
    data: &FeatureBankDataset,
    config: &TrainConfig,
) -> Result<Metrics> {
    config.validate()?;
    check_compatible(model, data)?;
    if data.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let labels = data.labels();
    let mut order = stratified_subsample(&labels, data.classes(), config.label_fraction, &mut rng);
    let subset = data.subset(&order);
    let bank = subset.bank_matrices();
    let labels = subset.labels();

    model.standardizer = if config.standardize {
        Some(Standardizer::fit(&bank)?)
    } else {
        None
    };

    let mut sgd = Sgd::new(config.momentum, config.weight_decay);
    let mut metrics = Metrics::default();
    order = (0..labels.len()).collect();

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let inputs: Vec<Matrix> = bank.iter().map(|b| b.select_rows(batch)).collect();
            let batch_labels: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();

            let (batch_loss, grads) = model.loss_and_gradients(&inputs, &batch_labels)?;
            total += batch_loss * batch.len() as f64;
            sgd.step(model.params_mut(), &grads, lr)?;

            if let Some(pos) = model.params().iter().position(|p| !p.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    param: model.param_names()[pos].clone(),
                });
            }
        }
        metrics.epoch_lrs.push(lr);
        metrics.epoch_losses.push(total / labels.len() as f64);
    }
    metrics.accuracy = accuracy(model, &subset)?;
    Ok(metrics)
}

/// Top-1 accuracy of `model` on `data`; the model is not modified.
pub fn evaluate(model: &FusionModel, data: &FeatureBankDataset) -> Result<Metrics> {
    check_compatible(model, data)?;
    if data.is_empty() {
        return Err(Error::Usage("evaluation set is empty".into()));
    }
    Ok(Metrics {
        accuracy: accuracy(model, data)?,
        ..Metrics::default()
    })
}

fn accuracy(model: &FusionModel, data: &FeatureBankDataset) -> Result<f64> {
    let predictions = model.predict(&data.bank_matrices())?;
    let correct = predictions
        .iter()
        .zip(data.labels())
        .filter(|(p, l)| **p == *l)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

fn check_compatible(model: &FusionModel, data: &FeatureBankDataset) -> Result<()> {
    if data.dim() != model.dim() {
        return Err(Error::dims(
            "dataset feature dim",
            (1, model.dim()),
            (1, data.dim()),
        ));
    }
    if data.branches() < model.branches() {
        return Err(Error::Usage(format!(
            "model expects {} branches, dataset has {}",
            model.branches(),
            data.branches()
        )));
    }
    if data.classes() > model.classes() {
        return Err(Error::Usage(format!(
            "dataset has {} classes, model only {}",
            data.classes(),
            model.classes()
        )));
    }
    Ok(())
}
