//! Run configuration file. Every field is optional and every field has a
//! command-line flag; flags win.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use conlearn::trainers::ModelClass;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Instance {
    /// Ration and supply model with a learned palatability bound.
    #[default]
    Wfp,
    /// Three features on the unit cube with a learned risk bound.
    LeafDepth,
    /// Six doses, two learned toxicity bounds and a learned objective.
    Regimen,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    None,
    #[default]
    Single,
    Union,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Monolithic,
    Clustered,
    Leaves,
    ColumnSelection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    WfpTr,
    WfpCluster,
    WfpAlpha,
    CsScaling,
    LeafDepth,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub csv: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Rows to simulate when no CSV is given.
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub outcome: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Model document to use instead of training.
    pub document: Option<PathBuf>,
    pub classes: Option<Vec<ModelClass>>,
    pub folds: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub instance: Option<Instance>,
    pub mode: Option<Mode>,
    pub network_seed: Option<u64>,
    pub threshold: Option<f64>,
    pub trust_region: Option<Policy>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    /// Seed for perturbing the cost vector; the baseline costs when absent.
    pub cost_seed: Option<u64>,
    pub time_limit: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub suite: Option<Suite>,
    pub repetitions: Option<usize>,
    pub classes: Option<Vec<ModelClass>>,
    pub ks: Option<Vec<usize>>,
    pub alphas: Option<Vec<f64>>,
    pub trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: Option<usize>,
    pub trust_region: Option<bool>,
    pub sizes: Option<Vec<usize>>,
    pub depths: Option<Vec<usize>>,
    pub features: Option<usize>,
    pub rows: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub data: DataSection,
    pub model: ModelSection,
    pub solve: SolveSection,
    pub experiment: ExperimentSection,
}

impl FileConfig {
    /// Reads a config file. Relative input paths inside it are taken
    /// relative to the file's directory; the output directory is relative to
    /// the working directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.data.csv,
            &mut cfg.data.manifest,
            &mut cfg.model.document,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Checks that a referenced input file exists.
pub fn existing(path: &Path) -> Result<&Path, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Config(format!("`{}` does not exist", path.display())))
    }
}
