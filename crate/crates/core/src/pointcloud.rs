//! Concentric-circles experiment: a width-2 boosted network against an RFNN
//! and logistic regression, with the test representation after every layer.

use serde::{Deserialize, Serialize};

use crate::boosting::{FeatureKind, TrainConfig};
use crate::data::{make_concentric_circles, train_test_indices, Dataset, Metric, Preprocessor};
use crate::error::Result;
use crate::grid::{grid_search, Algorithm, GridSpec, ModelRecipe};
use crate::linalg::Matrix;
use crate::rng::derive_seed;
use crate::sandwich::SandwichStructure;

/// Head ridge weights searched when tuning is on.
pub const L2_GRID: [f64; 6] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointCloudConfig {
    pub n: usize,
    pub n_train: usize,
    pub rings: usize,
    pub classes: usize,
    pub noise_sd: f64,
    pub n_layers: usize,
    pub feature_dim: usize,
    pub feature_scale: f64,
    pub boost_lr: f64,
    /// Per-sample ridge weight of the block fits; `2e-8` equals `1e-4` on
    /// the summed squared error over 5000 training rows.
    pub l2_ghat: f64,
    /// Head ridge weight for all three models when `tune` is off.
    pub l2_linpred: f64,
    pub use_feature_norm: bool,
    /// Pick each model's head ridge weight from [`L2_GRID`] by inner CV.
    pub tune: bool,
    pub inner_k: usize,
    /// Independent repetitions run by [`run_pointcloud_repeated`].
    pub repeats: usize,
}

impl Default for PointCloudConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            n_train: 5_000,
            rings: 9,
            classes: 3,
            noise_sd: 0.01,
            n_layers: 3,
            feature_dim: 512,
            feature_scale: 1.0,
            boost_lr: 1.0,
            l2_ghat: 2e-8,
            l2_linpred: 1e-5,
            use_feature_norm: true,
            tune: false,
            inner_k: 5,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointCloudResult {
    pub rfrboost_accuracy: f64,
    pub rfnn_accuracy: f64,
    pub logistic_accuracy: f64,
    /// Chosen head ridge weights, in model order.
    pub l2_linpred: [f64; 3],
    /// `Φ₀ … Φ_T` of the test points, each `n_test × 2`.
    pub representations: Vec<Matrix>,
    pub test_labels: Vec<usize>,
}

impl PointCloudConfig {
    fn recipe(&self, algorithm: Algorithm) -> ModelRecipe {
        ModelRecipe::new(
            algorithm,
            TrainConfig {
                n_layers: self.n_layers,
                boost_lr: self.boost_lr,
                l2_linpred: self.l2_linpred,
                l2_ghat: self.l2_ghat,
                feature_dim: self.feature_dim,
                structure: SandwichStructure::Dense,
                feature_kind: FeatureKind::Swim,
                feature_scale: self.feature_scale,
                hidden_dim: Some(2),
                use_feature_norm: self.use_feature_norm,
                normalize_layer_inputs: false,
                seed: 0,
            },
        )
    }

    fn tuned(&self, recipe: ModelRecipe, train: &Dataset, seed: u64) -> Result<ModelRecipe> {
        if !self.tune {
            return Ok(recipe);
        }
        let grid = GridSpec::default().axis("l2_linpred", L2_GRID);
        Ok(grid_search(train, &grid, &recipe, self.inner_k, Metric::Accuracy, seed, true)?.best_recipe)
    }
}

pub fn run_pointcloud(cfg: &PointCloudConfig, seed: u64) -> Result<PointCloudResult> {
    let data = make_concentric_circles(cfg.n, cfg.rings, cfg.classes, cfg.noise_sd, derive_seed(seed, 0))?;
    let (train_idx, test_idx) = train_test_indices(cfg.n, cfg.n_train, derive_seed(seed, 1));
    let (train, test) = (data.select(&train_idx), data.select(&test_idx));
    let pre = Preprocessor::fit(&train);
    let (train, test) = (pre.apply(&train)?, pre.apply(&test)?);

    let mut accuracies = [0.0; 3];
    let mut l2 = [0.0; 3];
    let mut representations = Vec::new();
    for (k, algorithm) in [Algorithm::Gradient, Algorithm::Rfnn, Algorithm::Logistic].into_iter().enumerate() {
        let model_seed = derive_seed(seed, 2 + k as u64);
        let recipe = cfg.tuned(cfg.recipe(algorithm), &train, model_seed)?;
        l2[k] = recipe.config.l2_linpred;
        let model = recipe.train(&train, model_seed)?;
        accuracies[k] = Metric::Accuracy.score(&model.predict(test.x.view())?, &test.targets)?;
        if algorithm == Algorithm::Gradient {
            representations = model.representations(test.x.view())?;
        }
    }
    Ok(PointCloudResult {
        rfrboost_accuracy: accuracies[0],
        rfnn_accuracy: accuracies[1],
        logistic_accuracy: accuracies[2],
        l2_linpred: l2,
        representations,
        test_labels: test.targets.labels_slice().unwrap_or_default().to_vec(),
    })
}

/// `cfg.repeats` runs; run `r` uses seed `derive_seed(seed, r)`, except
/// run 0 which uses `seed` itself.
pub fn run_pointcloud_repeated(cfg: &PointCloudConfig, seed: u64) -> Result<Vec<PointCloudResult>> {
    if cfg.repeats == 0 {
        return Err(crate::Error::InvalidInput("repeats must be positive".into()));
    }
    (0..cfg.repeats as u64)
        .map(|r| run_pointcloud(cfg, if r == 0 { seed } else { derive_seed(seed, r) }))
        .collect()
}
