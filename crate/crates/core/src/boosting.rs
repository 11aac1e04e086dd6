//! Layer-wise construction of residual random-feature networks
//!
//! ```text
//! Φ₀ = identity or random projection
//! Φₜ = Φₜ₋₁ + stepₜ · Aₜ fₜ(Φₜ₋₁, x)
//! F(x) = Wᵀ Φ_T(x) + b
//! ```
//!
//! Two trainers are provided. [`train_greedy_mse`] picks each `Aₜ` as the
//! exact minimizer of the squared loss given the current head.
//! [`train_gradient`] fits `Aₜ` to the normalized negative functional
//! gradient of any supported loss and then line-searches the step.

use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    apply_layer, concat_inputs, sample_iid_layer, sample_swim_layer, FeatureNorm, RandomFeatureLayer, SwimConfig,
};
use crate::linalg::{ensure_finite, Matrix};
use crate::losses::{
    empirical_risk, fit_gradient_direction, fit_top_linear, functional_gradient, line_search, output_dim,
    probabilities, LinearHead, LossKind, Targets,
};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::sandwich::{self, BlockMap, SandwichProblem, SandwichStructure};

/// Default cap on the representation width when `Φ₀` is a projection.
pub const DEFAULT_MAX_HIDDEN: usize = 128;

const PHI0_STREAM: u64 = 0;
const RESAMPLE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Iid,
    Swim,
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of residual blocks `T`.
    pub n_layers: usize,
    /// Learning rate `η`.
    pub boost_lr: f64,
    /// Ridge weight of the top-level head.
    pub l2_linpred: f64,
    /// Ridge weight of each block map fit.
    pub l2_ghat: f64,
    /// Random features per block, `p`.
    pub feature_dim: usize,
    pub structure: SandwichStructure,
    pub feature_kind: FeatureKind,
    /// SWIM scale `c2`, or the standard deviation of i.i.d. weights.
    pub feature_scale: f64,
    /// Representation width `D`; `None` picks identity for dense maps and
    /// `min(q, 128)` otherwise.
    pub hidden_dim: Option<usize>,
    pub use_feature_norm: bool,
    /// Standardize `Φ` (training statistics, frozen) before each layer.
    pub normalize_layer_inputs: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_layers: 3,
            boost_lr: 1.0,
            l2_linpred: 1e-4,
            l2_ghat: 1e-4,
            feature_dim: 512,
            structure: SandwichStructure::Dense,
            feature_kind: FeatureKind::Swim,
            feature_scale: 1.0,
            hidden_dim: None,
            use_feature_norm: false,
            normalize_layer_inputs: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Width `D` of the representation for `q` input columns.
    pub fn width(&self, input_dim: usize) -> usize {
        match (self.structure, self.hidden_dim) {
            (_, Some(h)) => h,
            (SandwichStructure::Dense, None) => input_dim,
            (_, None) => input_dim.min(DEFAULT_MAX_HIDDEN),
        }
    }

    fn uses_identity(&self, input_dim: usize) -> bool {
        self.structure == SandwichStructure::Dense && self.width(input_dim) == input_dim
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if input_dim == 0 {
            return Err(Error::invalid("data has no feature columns"));
        }
        if !(self.boost_lr > 0.0 && self.boost_lr <= 1.0) {
            return Err(Error::invalid(format!("boost_lr must lie in (0, 1], got {}", self.boost_lr)));
        }
        for (name, v) in [("l2_linpred", self.l2_linpred), ("l2_ghat", self.l2_ghat)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        let width = self.width(input_dim);
        if width == 0 {
            return Err(Error::invalid("hidden_dim must be positive"));
        }
        if self.structure.requires_square() && self.feature_dim != width {
            return Err(Error::invalid(format!(
                "{:?} block maps need feature_dim = hidden width, got {} and {}",
                self.structure, self.feature_dim, width
            )));
        }
        match self.feature_kind {
            FeatureKind::Swim => {
                SwimConfig::with_scale(self.feature_scale)?;
            }
            FeatureKind::Iid => {
                if !(self.feature_scale >= 0.0) || !self.feature_scale.is_finite() {
                    return Err(Error::invalid("feature_scale must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// Initial representation `Φ₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialMap {
    Identity,
    /// `Φ₀(x) = P x` with `P` of shape `D × q`.
    Projection { matrix: Matrix },
    /// One frozen random layer on `x`, as used by the RFNN baseline.
    RandomFeatures {
        layer: RandomFeatureLayer,
        norm: Option<FeatureNorm>,
    },
}

impl InitialMap {
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Matrix> {
        match self {
            InitialMap::Identity => Ok(x.to_owned()),
            InitialMap::Projection { matrix } => Ok(x.dot(&matrix.t())),
            InitialMap::RandomFeatures { layer, norm } => {
                let empty = Array2::zeros((x.nrows(), 0));
                let f = apply_layer(layer, empty.view(), x)?;
                Ok(match norm {
                    Some(norm) => norm.apply(f.view()),
                    None => f,
                })
            }
        }
    }
}

/// One boosting round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBlock {
    /// Frozen standardization of `Φ` before it enters the layer.
    pub input_norm: Option<FeatureNorm>,
    pub layer: RandomFeatureLayer,
    pub norm: Option<FeatureNorm>,
    pub map: BlockMap,
    /// `η` for greedy rounds, `η·αₜ` for gradient rounds.
    pub step: f64,
}

impl ResidualBlock {
    fn features(&self, phi: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Matrix> {
        let f = match &self.input_norm {
            Some(norm) => apply_layer(&self.layer, norm.apply(phi).view(), x)?,
            None => apply_layer(&self.layer, phi, x)?,
        };
        Ok(match &self.norm {
            Some(norm) => norm.apply(f.view()),
            None => f,
        })
    }

    /// `Φ + step · A f(Φ, x)`.
    pub fn forward(&self, phi: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Matrix> {
        let f = self.features(phi, x)?;
        Ok(&phi + &(self.map.apply(f.view()) * self.step))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub input_dim: usize,
    pub phi0: InitialMap,
    pub blocks: Vec<ResidualBlock>,
    pub head: LinearHead,
    pub loss: LossKind,
    pub config: Option<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Regression(Matrix),
    Classification { labels: Vec<usize>, probabilities: Matrix },
}

impl Prediction {
    pub fn labels(&self) -> Option<&[usize]> {
        match self {
            Prediction::Classification { labels, .. } => Some(labels),
            Prediction::Regression(_) => None,
        }
    }
}

impl BoostedModel {
    pub fn width(&self) -> usize {
        self.head.weights.nrows()
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::invalid(format!(
                "model expects {} feature columns, found {}",
                self.input_dim,
                x.ncols()
            )));
        }
        ensure_finite(x, "inputs")
    }

    /// `Φ₀(x), …, Φ_T(x)`.
    pub fn representations(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Matrix>> {
        self.check_input(x)?;
        let mut reps = Vec::with_capacity(self.blocks.len() + 1);
        let mut phi = self.phi0.apply(x)?;
        for block in &self.blocks {
            let next = block.forward(phi.view(), x)?;
            reps.push(phi);
            phi = next;
        }
        reps.push(phi);
        Ok(reps)
    }

    pub fn representation(&self, x: ArrayView2<'_, f64>) -> Result<Matrix> {
        Ok(self.representations(x)?.pop().expect("at least phi0"))
    }

    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Matrix> {
        Ok(self.head.logits(self.representation(x)?.view()))
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Prediction> {
        let logits = self.logits(x)?;
        if !self.loss.is_classification() {
            return Ok(Prediction::Regression(logits));
        }
        let probabilities = probabilities(self.loss, logits.view());
        let labels = probabilities
            .outer_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
                    .0
            })
            .collect();
        Ok(Prediction::Classification { labels, probabilities })
    }

    pub fn risk(&self, x: ArrayView2<'_, f64>, targets: &Targets) -> Result<f64> {
        empirical_risk(self.loss, &self.head, self.representation(x)?.view(), targets)
    }
}

/// A trained model with its per-round training risk (`Φ₀` first).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: BoostedModel,
    pub risk_trace: Vec<f64>,
}

fn check_data(x: ArrayView2<'_, f64>, targets: &Targets) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::invalid("training data is empty"));
    }
    if x.nrows() != targets.len() {
        return Err(Error::invalid(format!("{} rows but {} targets", x.nrows(), targets.len())));
    }
    ensure_finite(x, "inputs")?;
    if let Targets::Continuous(y) = targets {
        ensure_finite(y.view(), "targets")?;
    }
    Ok(())
}

fn initial_map(cfg: &TrainConfig, input_dim: usize) -> InitialMap {
    if cfg.uses_identity(input_dim) {
        return InitialMap::Identity;
    }
    let width = cfg.width(input_dim);
    let mut rng = rng_from_seed(derive_seed(cfg.seed, PHI0_STREAM));
    let normal = Normal::new(0.0, (1.0 / input_dim as f64).sqrt()).expect("positive variance");
    InitialMap::Projection {
        matrix: Array2::from_shape_simple_fn((width, input_dim), || normal.sample(&mut rng)),
    }
}

fn sample_block_layer(
    cfg: &TrainConfig,
    phi: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    target_matrix: ArrayView2<'_, f64>,
    rng: &mut Rng,
) -> Result<RandomFeatureLayer> {
    match cfg.feature_kind {
        FeatureKind::Iid => sample_iid_layer(phi.ncols() + x.ncols(), cfg.feature_dim, cfg.feature_scale, rng),
        FeatureKind::Swim => {
            let inputs = concat_inputs(phi, x)?;
            let swim = SwimConfig::with_scale(cfg.feature_scale)?;
            sample_swim_layer(inputs.view(), target_matrix, cfg.feature_dim, &swim, rng)
        }
    }
}

fn layer_input(cfg: &TrainConfig, phi: ArrayView2<'_, f64>) -> (Option<FeatureNorm>, Matrix) {
    if cfg.normalize_layer_inputs {
        let norm = FeatureNorm::fit(phi);
        let scaled = norm.apply(phi);
        (Some(norm), scaled)
    } else {
        (None, phi.to_owned())
    }
}

fn block_features(
    cfg: &TrainConfig,
    layer: &RandomFeatureLayer,
    phi: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
) -> Result<(Matrix, Option<FeatureNorm>)> {
    let raw = apply_layer(layer, phi, x)?;
    if cfg.use_feature_norm {
        let norm = FeatureNorm::fit(raw.view());
        Ok((norm.apply(raw.view()), Some(norm)))
    } else {
        Ok((raw, None))
    }
}

/// Greedy boosting for squared loss.
///
/// Each round samples a layer, solves the sandwiched least-squares problem
/// for `Aₜ` against the current head, adds `η Aₜ fₜ` to the representation
/// and refits the head by ridge. A layer whose problem is degenerate is
/// resampled once and otherwise kept with a zero step, so the model always
/// has `T` blocks.
pub fn train_greedy_mse(x: ArrayView2<'_, f64>, targets: &Targets, cfg: &TrainConfig) -> Result<TrainOutcome> {
    check_data(x, targets)?;
    cfg.validate(x.ncols())?;
    let kind = LossKind::Mse;
    output_dim(kind, targets)?;
    let target_matrix = targets.to_matrix();
    let y = &target_matrix;

    let phi0 = initial_map(cfg, x.ncols());
    let mut phi = phi0.apply(x)?;
    let mut head = fit_top_linear(kind, phi.view(), targets, cfg.l2_linpred, None)?.head;
    let mut risk_trace = vec![empirical_risk(kind, &head, phi.view(), targets)?];
    let mut blocks = Vec::with_capacity(cfg.n_layers);

    for t in 0..cfg.n_layers {
        let residuals = y - &head.logits(phi.view());
        let (input_norm, layer_phi) = layer_input(cfg, phi.view());
        let mut solved = None;
        let mut last_layer = None;
        for attempt in 0..2u64 {
            let stream = if attempt == 0 { t as u64 + 1 } else { RESAMPLE_STREAM + t as u64 };
            let mut rng = rng_from_seed(derive_seed(cfg.seed, stream));
            let layer = sample_block_layer(cfg, layer_phi.view(), x, target_matrix.view(), &mut rng)?;
            let (features, norm) = block_features(cfg, &layer, layer_phi.view(), x)?;
            let problem = SandwichProblem::new(residuals.view(), head.weights.view(), features.view(), cfg.l2_ghat)?;
            match sandwich::solve(&problem, cfg.structure) {
                Ok(map) => {
                    solved = Some((layer, norm, features, map));
                    break;
                }
                Err(Error::DegenerateProblem(_) | Error::SingularSystem) => last_layer = Some((layer, norm)),
                Err(e) => return Err(e),
            }
        }
        let block = match solved {
            Some((layer, norm, features, map)) => {
                phi = &phi + &(map.apply(features.view()) * cfg.boost_lr);
                ResidualBlock {
                    input_norm,
                    layer,
                    norm,
                    map,
                    step: cfg.boost_lr,
                }
            }
            None => {
                let (layer, norm) = last_layer.expect("two failed attempts");
                let map = BlockMap::zeros(cfg.structure, phi.ncols(), cfg.feature_dim);
                ResidualBlock {
                    input_norm,
                    layer,
                    norm,
                    map,
                    step: 0.0,
                }
            }
        };
        blocks.push(block);
        head = fit_top_linear(kind, phi.view(), targets, cfg.l2_linpred, None)?.head;
        risk_trace.push(empirical_risk(kind, &head, phi.view(), targets)?);
    }

    Ok(TrainOutcome {
        model: BoostedModel {
            input_dim: x.ncols(),
            phi0,
            blocks,
            head,
            loss: kind,
            config: Some(cfg.clone()),
        },
        risk_trace,
    })
}

/// Gradient boosting for any supported loss.
///
/// Each round fits a dense `Aₜ` to `−√n G/‖G‖_F`, finds the step `αₜ ≥ 0` by
/// line search, adds `η αₜ Aₜ fₜ` and refits the head (warm-started). Stops
/// early once the functional gradient vanishes.
pub fn train_gradient(
    x: ArrayView2<'_, f64>,
    targets: &Targets,
    cfg: &TrainConfig,
    kind: LossKind,
) -> Result<TrainOutcome> {
    check_data(x, targets)?;
    cfg.validate(x.ncols())?;
    if cfg.structure != SandwichStructure::Dense {
        return Err(Error::invalid("gradient boosting fits dense block maps; set structure = dense"));
    }
    output_dim(kind, targets)?;
    let target_matrix = targets.to_matrix();

    let phi0 = initial_map(cfg, x.ncols());
    let mut phi = phi0.apply(x)?;
    let mut head = fit_top_linear(kind, phi.view(), targets, cfg.l2_linpred, None)?.head;
    let mut risk_trace = vec![empirical_risk(kind, &head, phi.view(), targets)?];
    let mut blocks = Vec::with_capacity(cfg.n_layers);

    for t in 0..cfg.n_layers {
        let gradient = functional_gradient(kind, &head, phi.view(), targets)?;
        let mut rng = rng_from_seed(derive_seed(cfg.seed, t as u64 + 1));
        let (input_norm, layer_phi) = layer_input(cfg, phi.view());
        let layer = sample_block_layer(cfg, layer_phi.view(), x, target_matrix.view(), &mut rng)?;
        let (features, norm) = block_features(cfg, &layer, layer_phi.view(), x)?;
        let a = match fit_gradient_direction(features.view(), gradient.view(), cfg.l2_ghat) {
            Ok(a) => a,
            Err(Error::ZeroGradient) => break,
            Err(e) => return Err(e),
        };
        let direction = features.dot(&a.t());
        let alpha = line_search(kind, &head, phi.view(), direction.view(), targets)?;
        let step = cfg.boost_lr * alpha;
        phi = &phi + &(&direction * step);
        blocks.push(ResidualBlock {
            input_norm,
            layer,
            norm,
            map: BlockMap::Dense(a),
            step,
        });
        head = fit_top_linear(kind, phi.view(), targets, cfg.l2_linpred, Some(&head))?.head;
        risk_trace.push(empirical_risk(kind, &head, phi.view(), targets)?);
    }

    Ok(TrainOutcome {
        model: BoostedModel {
            input_dim: x.ncols(),
            phi0,
            blocks,
            head,
            loss: kind,
            config: Some(cfg.clone()),
        },
        risk_trace,
    })
}

/// Settings of the single-hidden-layer random feature baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfnnConfig {
    pub feature_dim: usize,
    pub feature_kind: FeatureKind,
    pub feature_scale: f64,
    pub l2: f64,
    pub use_feature_norm: bool,
    pub seed: u64,
}

/// One frozen random layer on the raw inputs followed by a fitted head.
pub fn train_rfnn(x: ArrayView2<'_, f64>, targets: &Targets, cfg: &RfnnConfig, kind: LossKind) -> Result<TrainOutcome> {
    check_data(x, targets)?;
    output_dim(kind, targets)?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, PHI0_STREAM));
    let layer = match cfg.feature_kind {
        FeatureKind::Iid => sample_iid_layer(x.ncols(), cfg.feature_dim, cfg.feature_scale, &mut rng)?,
        FeatureKind::Swim => {
            let swim = SwimConfig::with_scale(cfg.feature_scale)?;
            sample_swim_layer(x, targets.to_matrix().view(), cfg.feature_dim, &swim, &mut rng)?
        }
    };
    let raw = apply_layer(&layer, Array2::zeros((x.nrows(), 0)).view(), x)?;
    let norm = cfg.use_feature_norm.then(|| FeatureNorm::fit(raw.view()));
    let phi0 = InitialMap::RandomFeatures { layer, norm };
    let phi = phi0.apply(x)?;
    let head = fit_top_linear(kind, phi.view(), targets, cfg.l2, None)?.head;
    let risk = empirical_risk(kind, &head, phi.view(), targets)?;
    Ok(TrainOutcome {
        model: BoostedModel {
            input_dim: x.ncols(),
            phi0,
            blocks: Vec::new(),
            head,
            loss: kind,
            config: None,
        },
        risk_trace: vec![risk],
    })
}

/// Linear baseline on the raw inputs: ridge for squared loss, regularized
/// logistic regression for cross-entropy.
pub fn train_linear(x: ArrayView2<'_, f64>, targets: &Targets, l2: f64, kind: LossKind) -> Result<TrainOutcome> {
    check_data(x, targets)?;
    let head = fit_top_linear(kind, x, targets, l2, None)?.head;
    let risk = empirical_risk(kind, &head, x, targets)?;
    Ok(TrainOutcome {
        model: BoostedModel {
            input_dim: x.ncols(),
            phi0: InitialMap::Identity,
            blocks: Vec::new(),
            head,
            loss: kind,
            config: None,
        },
        risk_trace: vec![risk],
    })
}
