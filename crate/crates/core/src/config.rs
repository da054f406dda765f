//! Run configuration: a TOML document with `[data]` and `[train]` sections,
//! plus dotted-path `key=value` overrides applied after the file is parsed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthdata::{generate_dataset, read_dataset, GenConfig, SyntheticSample};
use crate::trainer::TrainConfig;

/// Where the train and test splits come from. Without explicit paths both
/// splits are regenerated from `seed`, so a config alone pins the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub generator: GenConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_path: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            seed: 42,
            n_train: 2000,
            n_test: 500,
            generator: GenConfig::default(),
            train_path: None,
            test_path: None,
        }
    }
}

impl DataConfig {
    pub fn train_split(&self) -> Result<Vec<SyntheticSample>> {
        self.split("train", self.n_train, self.train_path.as_deref())
    }

    pub fn test_split(&self) -> Result<Vec<SyntheticSample>> {
        self.split("test", self.n_test, self.test_path.as_deref())
    }

    fn split(&self, name: &str, n: usize, path: Option<&Path>) -> Result<Vec<SyntheticSample>> {
        match path {
            Some(p) => read_dataset(p),
            None => generate_dataset(self.seed, name, n, &self.generator),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub train: TrainConfig,
}

/// Contents of `configs/benchmark.toml`.
pub const BENCHMARK_TOML: &str = include_str!("../../../configs/benchmark.toml");

impl RunConfig {
    /// The bundled synthetic benchmark.
    pub fn benchmark() -> Self {
        RunConfig::parse(BENCHMARK_TOML).expect("bundled benchmark config parses")
    }

    /// Parses and validates a config document.
    pub fn parse(text: &str) -> Result<Self> {
        RunConfig::parse_with_overrides::<&str>(text, &[])
    }

    /// Parses `text`, applies each `key=value` override in order, then
    /// deserializes and validates the result.
    pub fn parse_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o.as_ref())?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.generator.validate()?;
        self.train.validate()?;
        let (gen, dims) = (&self.data.generator, &self.train.model);
        if gen.grid != dims.grid {
            return Err(Error::Config(format!(
                "data.generator.grid = {} but train.model.grid = {}",
                gen.grid, dims.grid
            )));
        }
        let vocab = gen.vocabulary().size();
        if vocab != dims.vocab {
            return Err(Error::Config(format!(
                "generator vocabulary has {vocab} tokens but train.model.vocab = {}",
                dims.vocab
            )));
        }
        Ok(())
    }
}

/// Sets the dotted path `key` in `table` to `value`, creating intermediate
/// tables. The value is read as a TOML literal when it parses as one and as
/// a bare string otherwise, so `--set train.seed=7` gives an integer and
/// `--set data.train_path=out/train.jsonl` a string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let segments: Vec<&str> = key.trim().split('.').map(str::trim).collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("override key '{key}' has an empty segment")));
    }
    let value = parse_literal(raw.trim());
    let (last, parents) = segments.split_last().expect("split yields at least one segment");
    let mut node = table;
    for seg in parents {
        let entry = node
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{seg}' is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
