//! Run configuration files.

use std::path::{Path, PathBuf};

use rfrboost::boosting::{FeatureKind, TrainConfig};
use rfrboost::data::{CsvSchema, Task};
use rfrboost::grid::{Algorithm, GridSpec, LossChoice, ModelRecipe};
use rfrboost::pointcloud::PointCloudConfig;
use rfrboost::sandwich::SandwichStructure;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Train,
    Evaluate,
    Cv,
    Gridcv,
    Pointcloud,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Command,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
    /// Model file read by `evaluate`.
    pub model_file: Option<PathBuf>,
    pub data: Option<DataSection>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub cv: CvSection,
    /// Axis name to candidate values, enumerated in file order.
    pub grid: Option<toml::Table>,
    #[serde(default)]
    pub pointcloud: PointCloudConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub targets: Vec<String>,
    pub kind: Task,
    #[serde(default)]
    pub categorical: Vec<String>,
    pub classes: Option<usize>,
}

impl DataSection {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            targets: self.targets.clone(),
            task: self.kind,
            categorical: self.categorical.clone(),
            classes: self.classes,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub algorithm: Algorithm,
    pub loss: LossChoice,
    pub structure: SandwichStructure,
    pub n_layers: usize,
    pub boost_lr: f64,
    pub l2_linpred: f64,
    pub l2_ghat: f64,
    pub feature_dim: usize,
    pub feature_kind: FeatureKind,
    pub feature_scale: f64,
    pub hidden_dim: Option<usize>,
    pub use_feature_norm: bool,
    pub normalize_layer_inputs: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            algorithm: Algorithm::Gradient,
            loss: LossChoice::Auto,
            structure: t.structure,
            n_layers: t.n_layers,
            boost_lr: t.boost_lr,
            l2_linpred: t.l2_linpred,
            l2_ghat: t.l2_ghat,
            feature_dim: t.feature_dim,
            feature_kind: t.feature_kind,
            feature_scale: t.feature_scale,
            hidden_dim: t.hidden_dim,
            use_feature_norm: t.use_feature_norm,
            normalize_layer_inputs: t.normalize_layer_inputs,
        }
    }
}

impl ModelSection {
    pub fn recipe(&self, seed: u64) -> ModelRecipe {
        ModelRecipe {
            algorithm: self.algorithm,
            loss: self.loss,
            config: TrainConfig {
                n_layers: self.n_layers,
                boost_lr: self.boost_lr,
                l2_linpred: self.l2_linpred,
                l2_ghat: self.l2_ghat,
                feature_dim: self.feature_dim,
                structure: self.structure,
                feature_kind: self.feature_kind,
                feature_scale: self.feature_scale,
                hidden_dim: self.hidden_dim,
                use_feature_norm: self.use_feature_norm,
                normalize_layer_inputs: self.normalize_layer_inputs,
                seed,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    pub k: usize,
    pub inner_k: usize,
    pub parallel: bool,
}

impl Default for CvSection {
    fn default() -> Self {
        Self {
            k: 5,
            inner_k: 5,
            parallel: true,
        }
    }
}

pub fn grid_spec(table: &toml::Table) -> Result<GridSpec, String> {
    let mut spec = GridSpec::default();
    for (name, value) in table {
        let values = value
            .as_array()
            .ok_or_else(|| format!("grid.{name} must be a list of numbers"))?
            .iter()
            .map(|v| match v {
                toml::Value::Integer(i) => Ok(*i as f64),
                toml::Value::Float(f) => Ok(*f),
                _ => Err(format!("grid.{name} must contain only numbers")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        spec = spec.axis(name, values);
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| format!("config: {}", e.message()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Per-task presence checks that need no data.
    fn check(&self) -> Result<(), String> {
        let need_data = |train: bool, test: bool| -> Result<&DataSection, String> {
            let data = self
                .data
                .as_ref()
                .ok_or_else(|| format!("task {:?} needs a [data] section", self.task))?;
            if train && data.train.is_none() {
                return Err("data.train is required for this task".into());
            }
            if test && data.test.is_none() {
                return Err("data.test is required for evaluate".into());
            }
            Ok(data)
        };
        match self.task {
            Command::Train | Command::Cv => {
                need_data(true, false)?;
            }
            Command::Gridcv => {
                need_data(true, false)?;
                let grid = self.grid.as_ref().ok_or("gridcv needs a [grid] section")?;
                grid_spec(grid)?;
            }
            Command::Evaluate => {
                need_data(false, true)?;
                if self.model_file.is_none() {
                    return Err("evaluate needs model_file".into());
                }
            }
            Command::Pointcloud => {
                if self.pointcloud.repeats == 0 {
                    return Err("pointcloud.repeats must be positive".into());
                }
                if self.pointcloud.n_train == 0 || self.pointcloud.n_train >= self.pointcloud.n {
                    return Err("pointcloud.n_train must lie strictly between 0 and n".into());
                }
            }
        }
        if matches!(self.task, Command::Cv | Command::Gridcv) && (self.cv.k < 2 || self.cv.inner_k < 2) {
            return Err("cv.k and cv.inner_k must be at least 2".into());
        }
        let m = &self.model;
        if !(m.boost_lr > 0.0 && m.boost_lr <= 1.0) {
            return Err(format!("model.boost_lr must lie in (0, 1], got {}", m.boost_lr));
        }
        if m.structure.requires_square() {
            match m.hidden_dim {
                Some(d) if d != m.feature_dim => {
                    return Err(format!(
                        "model.structure = {:?} needs feature_dim = hidden_dim, got {} and {d}",
                        m.structure, m.feature_dim
                    ))
                }
                _ => {}
            }
            if m.algorithm == Algorithm::Gradient {
                return Err("gradient boosting fits dense block maps; set model.structure = \"dense\"".into());
            }
        }
        Ok(())
    }
}
