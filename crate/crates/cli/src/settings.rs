//! Flat `key = value` run configuration, merged from a file and command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hybrid_core::data::{SamplingMode, SplitRatios};
use hybrid_core::exec::Execution;
use hybrid_core::model::ModelConfig;
use hybrid_core::optim::AdamWConfig;
use hybrid_core::text::CleaningConfig;
use hybrid_core::train::TrainConfig;

pub const KEYS: &[&str] = &[
    "data",
    "out",
    "seed",
    "validation_ratio",
    "test_ratio",
    "sampling",
    "preset",
    "epochs",
    "batch_size",
    "lr",
    "weight_decay",
    "beta1",
    "beta2",
    "eps",
    "warmup_ratio",
    "clip_norm",
    "threshold",
    "folds",
    "max_len",
    "vocab_size",
    "min_freq",
    "script",
    "stopwords",
    "abbreviations",
    "sequential",
    "samples",
    "n_layers",
    "d_model",
    "n_heads",
    "d_ff",
    "lstm_hidden",
    "lstm_layers",
];

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected key = value", i + 1))?;
            s.set(k.trim(), v.trim())
                .with_context(|| format!("{origin}:{}", i + 1))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("unknown config key {key:?}");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got {pair:?}"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("config key {key}: cannot parse {v:?}: {e}"))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| {
            anyhow!(
                "missing required setting {key} (use --{} or the config file)",
                key.replace('_', "-")
            )
        })
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path("out").unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn ratios(&self) -> Result<SplitRatios> {
        let d = SplitRatios::default();
        let r = SplitRatios {
            validation: self.get_or("validation_ratio", d.validation)?,
            test: self.get_or("test_ratio", d.test)?,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn sampling(&self) -> Result<SamplingMode> {
        Ok(SamplingMode::parse(self.raw("sampling").unwrap_or("none"))?)
    }

    pub fn execution(&self) -> Result<Execution> {
        Ok(if self.get_or("sequential", false)? {
            Execution::Sequential
        } else {
            Execution::default()
        })
    }

    pub fn cleaning(&self) -> Result<CleaningConfig> {
        let mut c = match self.raw("script").unwrap_or("mixed") {
            "bangla" => CleaningConfig::bangla(),
            "latin" => CleaningConfig::latin(),
            "mixed" => CleaningConfig::default(),
            other => bail!("script must be bangla, latin or mixed, got {other:?}"),
        };
        if let Some(p) = self.path("stopwords") {
            c = c.load_stopwords(&p)?;
        }
        if let Some(p) = self.path("abbreviations") {
            c = c.load_abbreviations(&p)?;
        }
        Ok(c)
    }

    /// Sequence length the model will be built with.
    pub fn max_len(&self) -> Result<usize> {
        Ok(self.model_dims(0)?.encoder.max_len)
    }

    pub fn model_config(&self, vocab_size: usize) -> Result<ModelConfig> {
        let m = self.model_dims(vocab_size)?;
        m.validate()?;
        Ok(m)
    }

    fn model_dims(&self, vocab_size: usize) -> Result<ModelConfig> {
        let mut m = match self.raw("preset").unwrap_or("desk") {
            "desk" => ModelConfig::desk(vocab_size),
            "large" => ModelConfig::large(vocab_size),
            other => bail!("preset must be desk or large, got {other:?}"),
        };
        let e = &mut m.encoder;
        e.n_layers = self.get_or("n_layers", e.n_layers)?;
        e.d_model = self.get_or("d_model", e.d_model)?;
        e.n_heads = self.get_or("n_heads", e.n_heads)?;
        e.d_ff = self.get_or("d_ff", e.d_ff)?;
        e.max_len = self.get_or("max_len", e.max_len)?;
        m.lstm.input_dim = e.d_model;
        m.lstm.hidden_dim = self.get_or("lstm_hidden", m.lstm.hidden_dim)?;
        m.lstm.n_layers = self.get_or("lstm_layers", m.lstm.n_layers)?;
        Ok(m)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut t = TrainConfig::new(self.require("epochs")?, self.require("seed")?);
        let d = AdamWConfig::default();
        t.optimizer = AdamWConfig {
            lr: self.get_or("lr", d.lr)?,
            beta1: self.get_or("beta1", d.beta1)?,
            beta2: self.get_or("beta2", d.beta2)?,
            eps: self.get_or("eps", d.eps)?,
            weight_decay: self.get_or("weight_decay", d.weight_decay)?,
            ..d
        };
        t.batch_size = self.get_or("batch_size", t.batch_size)?;
        t.warmup_ratio = self.get_or("warmup_ratio", t.warmup_ratio)?;
        t.clip_norm = self.get_or("clip_norm", t.clip_norm)?;
        t.threshold = self.get_or("threshold", t.threshold)?;
        t.exec = self.execution()?;
        t.validate()?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut s = Settings::parse("# run\nepochs = 3\nlr=1e-4\n\n", "test").unwrap();
        s.set_pair("lr=2e-4").unwrap();
        assert_eq!(s.get::<usize>("epochs").unwrap(), Some(3));
        assert_eq!(s.get::<f64>("lr").unwrap(), Some(2e-4));
        assert!(s.set_pair("learning_rate=1").is_err());
        assert!(Settings::parse("epochs 3", "test").is_err());
    }

    #[test]
    fn epochs_are_required() {
        let mut s = Settings::default();
        s.set("seed", "1").unwrap();
        assert!(s.train_config().unwrap_err().to_string().contains("epochs"));
    }

    #[test]
    fn text_round_trip() {
        let s = Settings::parse("seed=4\npreset=desk\n", "a").unwrap();
        let back = Settings::parse(&s.to_text(), "b").unwrap();
        assert_eq!(back.to_text(), s.to_text());
    }
}
