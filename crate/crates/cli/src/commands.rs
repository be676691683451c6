//! `train`, `eval`, `ablate` and `gen-synthetic`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bankfuse::bankio::{gen_synthetic as generate, load_checkpoint, load_config, save_checkpoint};
use bankfuse::{
    evaluate, train as fit, ArchitectureKind, FeatureBankDataset, FusionModel, Metrics,
    MultiHeadConfig, SyntheticTaskSpec, TrainConfig,
};

use crate::{write_file, AblateArgs, EvalArgs, Result, SyntheticArgs, TrainArgs};

/// Loss-trend check applied to every training run: after epoch 5, no
/// 10-epoch window may rise more than 5% above its first epoch.
pub const TREND_WARMUP: usize = 5;
pub const TREND_WINDOW: usize = 10;
pub const TREND_SLACK: f64 = 0.05;

fn heads(h: u64) -> Result<MultiHeadConfig> {
    Ok(MultiHeadConfig::new(h as usize)?)
}

fn trend_label(metrics: &Metrics) -> String {
    match metrics.loss_trend_violation(TREND_WARMUP, TREND_WINDOW, TREND_SLACK) {
        None => "ok".into(),
        Some(e) => format!("rises@{e}"),
    }
}

fn train_one(
    kind: ArchitectureKind,
    data: &FeatureBankDataset,
    config: &TrainConfig,
    h: u64,
) -> Result<(FusionModel, Metrics)> {
    let mut model = FusionModel::new(
        kind,
        data.branches(),
        data.dim(),
        data.classes(),
        heads(h)?,
        config.seed,
    )?;
    let metrics = fit(&mut model, data, config)?;
    Ok((model, metrics))
}

pub fn train(args: &TrainArgs) -> Result<String> {
    let data = FeatureBankDataset::load(&args.bank)?;
    let mut config = load_config(&args.config)?;
    if let Some(f) = args.label_fraction {
        config.label_fraction = f;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let (model, metrics) = train_one(args.arch, &data, &config, args.heads)?;
    save_checkpoint(&model, &args.out)?;
    let metrics_path = args
        .metrics
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out, ".metrics.csv"));
    write_file(&metrics_path, &metrics.to_csv())?;

    let mut summary = format!(
        "{}: train accuracy {:.4}, final loss {}, loss trend {}\n",
        args.arch,
        metrics.accuracy,
        metrics
            .epoch_losses
            .last()
            .map_or("-".into(), |l| format!("{l:.6}")),
        trend_label(&metrics)
    );
    if let Some(test) = &args.test {
        let test = FeatureBankDataset::load(test)?;
        let _ = writeln!(
            summary,
            "{}: test accuracy {:.4}",
            args.arch,
            evaluate(&model, &test)?.accuracy
        );
    }
    Ok(summary)
}

pub fn eval(args: &EvalArgs) -> Result<String> {
    let data = FeatureBankDataset::load(&args.bank)?;
    let model = load_checkpoint(&args.checkpoint)?;
    let metrics = evaluate(&model, &data)?;
    if let Some(out) = &args.out {
        write_file(out, &metrics.to_csv())?;
    }
    Ok(format!(
        "{}: accuracy {:.4} on {} samples\n",
        model.kind(),
        metrics.accuracy,
        data.len()
    ))
}

/// Header of the ablation table.
pub const ABLATION_HEADER: &str = "arch,train_accuracy,test_accuracy,final_loss,loss_trend";

pub fn ablate(args: &AblateArgs) -> Result<String> {
    let data = FeatureBankDataset::load(&args.bank)?;
    let test = args
        .test
        .as_ref()
        .map(FeatureBankDataset::load)
        .transpose()?;
    let mut config = load_config(&args.config)?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let mut csv = format!("{ABLATION_HEADER}\n");
    let mut summary = String::new();
    for kind in ArchitectureKind::ablation_set(data.branches()) {
        let (model, metrics) = train_one(kind, &data, &config, args.heads)?;
        let test_acc = test
            .as_ref()
            .map(|t| evaluate(&model, t))
            .transpose()?
            .map(|m| m.accuracy);
        let final_loss = metrics.epoch_losses.last().copied();
        let _ = writeln!(
            csv,
            "{kind},{:?},{},{},{}",
            metrics.accuracy,
            test_acc.map_or(String::new(), |a| format!("{a:?}")),
            final_loss.map_or(String::new(), |l| format!("{l:?}")),
            trend_label(&metrics)
        );
        let _ = writeln!(
            summary,
            "{kind:<12} train {:.4}  test {}  trend {}",
            metrics.accuracy,
            test_acc.map_or("-".into(), |a| format!("{a:.4}")),
            trend_label(&metrics)
        );
    }
    write_file(&args.out, &csv)?;
    Ok(summary)
}

pub fn gen_synthetic(args: &SyntheticArgs) -> Result<String> {
    let spec = SyntheticTaskSpec {
        kind: args.kind,
        dim: args.d,
        branches: args.n,
        classes: args.classes,
        train_samples: args.train,
        test_samples: args.test,
        noise: args.noise,
        seed: args.seed,
    };
    let (train, test) = generate(&spec)?;
    let train_path = with_suffix(&args.out, ".train.csv");
    let test_path = with_suffix(&args.out, ".test.csv");
    train.save(&train_path)?;
    test.save(&test_path)?;
    Ok(format!(
        "{}: {} train samples -> {}, {} test samples -> {}\n",
        args.kind,
        train.len(),
        train_path.display(),
        test.len(),
        test_path.display()
    ))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
