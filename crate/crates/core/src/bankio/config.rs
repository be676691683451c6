//! Flat `key = value` training configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys mirror the
//! fields of [`TrainConfig`]; missing keys keep their defaults.
//! `lr_drop_epochs` is a comma-separated list (possibly empty).

use std::path::Path;

use crate::error::{Error, Result};
use crate::training::TrainConfig;

pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key = value, found '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        macro_rules! num {
            () => {
                value
                    .parse()
                    .map_err(|e| bad(format!("{key} = '{value}': {e}")))?
            };
        }
        match key {
            "batch_size" => config.batch_size = num!(),
            "momentum" => config.momentum = num!(),
            "weight_decay" => config.weight_decay = num!(),
            "lr0" => config.lr0 = num!(),
            "epochs" => config.epochs = num!(),
            "lr_drop_factor" => config.lr_drop_factor = num!(),
            "seed" => config.seed = num!(),
            "label_fraction" => config.label_fraction = num!(),
            "standardize" => config.standardize = num!(),
            "lr_drop_epochs" => {
                config.lr_drop_epochs = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse()
                            .map_err(|e| bad(format!("lr_drop_epochs entry '{s}': {e}")))
                    })
                    .collect::<Result<Vec<usize>>>()?
            }
            other => return Err(bad(format!("unknown key '{other}'"))),
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn write_config(config: &TrainConfig) -> String {
    let drops: Vec<String> = config.lr_drop_epochs.iter().map(usize::to_string).collect();
    format!(
        "batch_size = {}\nmomentum = {:?}\nweight_decay = {:?}\nlr0 = {:?}\nepochs = {}\n\
         lr_drop_epochs = {}\nlr_drop_factor = {:?}\nseed = {}\nlabel_fraction = {:?}\nstandardize = {}\n",
        config.batch_size,
        config.momentum,
        config.weight_decay,
        config.lr0,
        config.epochs,
        drops.join(","),
        config.lr_drop_factor,
        config.seed,
        config.label_fraction,
        config.standardize
    )
}

pub fn load_config(path: impl AsRef<Path>) -> Result<TrainConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
