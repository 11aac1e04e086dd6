//! Model recipes and exhaustive grid search over their hyperparameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boosting::{train_gradient, train_greedy_mse, train_linear, train_rfnn, BoostedModel, RfnnConfig, TrainConfig, TrainOutcome};
use crate::data::{kfold_evaluate, CvReport, Dataset, Metric, Recipe};
use crate::error::{Error, Result};
use crate::losses::{LossKind, Targets};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Greedy,
    Gradient,
    Rfnn,
    Ridge,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossChoice {
    /// Squared loss for regression, cross-entropy over all classes otherwise.
    #[default]
    Auto,
    Mse,
    Bce,
    Cce,
}

/// An algorithm plus its hyperparameters. RFNN and the linear baselines
/// read `feature_*`, `use_feature_norm` and `l2_linpred` from `config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecipe {
    pub algorithm: Algorithm,
    pub config: TrainConfig,
    pub loss: LossChoice,
}

impl ModelRecipe {
    pub fn new(algorithm: Algorithm, config: TrainConfig) -> Self {
        Self {
            algorithm,
            config,
            loss: LossChoice::Auto,
        }
    }

    pub fn loss_for(&self, targets: &Targets) -> Result<LossKind> {
        let kind = match (self.loss, targets) {
            (LossChoice::Auto | LossChoice::Mse, Targets::Continuous(_)) => LossKind::Mse,
            (LossChoice::Auto | LossChoice::Cce, Targets::Labels { classes, .. }) => LossKind::Cce { classes: *classes },
            (LossChoice::Bce, Targets::Labels { .. }) => LossKind::Bce,
            (choice, _) => {
                return Err(Error::invalid(format!("loss {choice:?} does not fit these targets")));
            }
        };
        match (self.algorithm, kind) {
            (Algorithm::Greedy | Algorithm::Ridge, LossKind::Mse) => Ok(kind),
            (Algorithm::Greedy | Algorithm::Ridge, _) => {
                Err(Error::invalid(format!("{:?} supports regression targets only", self.algorithm)))
            }
            (Algorithm::Logistic, LossKind::Mse) => Err(Error::invalid("logistic needs classification targets")),
            _ => Ok(kind),
        }
    }

    pub fn train(&self, train: &Dataset, seed: u64) -> Result<BoostedModel> {
        Ok(self.train_outcome(train, seed)?.model)
    }

    /// Like [`ModelRecipe::train`] but keeps the per-round training risk.
    pub fn train_outcome(&self, train: &Dataset, seed: u64) -> Result<TrainOutcome> {
        let kind = self.loss_for(&train.targets)?;
        let cfg = TrainConfig {
            seed,
            ..self.config.clone()
        };
        let (x, y) = (train.x.view(), &train.targets);
        Ok(match self.algorithm {
            Algorithm::Greedy => train_greedy_mse(x, y, &cfg)?,
            Algorithm::Gradient => train_gradient(x, y, &cfg, kind)?,
            Algorithm::Rfnn => {
                let rfnn = RfnnConfig {
                    feature_dim: cfg.feature_dim,
                    feature_kind: cfg.feature_kind,
                    feature_scale: cfg.feature_scale,
                    l2: cfg.l2_linpred,
                    use_feature_norm: cfg.use_feature_norm,
                    seed,
                };
                train_rfnn(x, y, &rfnn, kind)?
            }
            Algorithm::Ridge | Algorithm::Logistic => train_linear(x, y, cfg.l2_linpred, kind)?,
        })
    }
}

impl Recipe for ModelRecipe {
    fn fit(&self, train: &Dataset, seed: u64) -> Result<BoostedModel> {
        self.train(train, seed)
    }
}

/// Names accepted as grid axes.
pub const AXIS_NAMES: [&str; 7] = [
    "n_layers",
    "boost_lr",
    "l2_linpred",
    "l2_ghat",
    "feature_dim",
    "feature_scale",
    "hidden_dim",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Cartesian grid, enumerated with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

fn as_count(name: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::invalid(format!("grid axis {name} needs whole numbers, got {v}")))
    }
}

impl GridSpec {
    pub fn axis(mut self, name: &str, values: impl Into<Vec<f64>>) -> Self {
        self.axes.push(GridAxis {
            name: name.to_string(),
            values: values.into(),
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, axis) in self.axes.iter().enumerate() {
            if !AXIS_NAMES.contains(&axis.name.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown grid axis {:?}; expected one of {AXIS_NAMES:?}",
                    axis.name
                )));
            }
            if axis.values.is_empty() {
                return Err(Error::invalid(format!("grid axis {} is empty", axis.name)));
            }
            if self.axes[..i].iter().any(|a| a.name == axis.name) {
                return Err(Error::invalid(format!("grid axis {} listed twice", axis.name)));
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Grid points as `(axis name, value)` lists in enumeration order.
    pub fn points(&self) -> Vec<Vec<(String, f64)>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((axis.name.clone(), v));
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn apply(base: &ModelRecipe, point: &[(String, f64)]) -> Result<ModelRecipe> {
        let mut recipe = base.clone();
        let c = &mut recipe.config;
        for (name, v) in point {
            let v = *v;
            match name.as_str() {
                "n_layers" => c.n_layers = as_count(name, v)?,
                "boost_lr" => c.boost_lr = v,
                "l2_linpred" => c.l2_linpred = v,
                "l2_ghat" => c.l2_ghat = v,
                "feature_dim" => c.feature_dim = as_count(name, v)?,
                "feature_scale" => c.feature_scale = v,
                "hidden_dim" => c.hidden_dim = Some(as_count(name, v)?),
                other => return Err(Error::invalid(format!("unknown grid axis {other:?}"))),
            }
        }
        Ok(recipe)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub point: Vec<(String, f64)>,
    pub cv: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    /// One row per grid point, in enumeration order.
    pub rows: Vec<GridRow>,
    pub best: usize,
    pub best_recipe: ModelRecipe,
}

/// Index of the best row: best mean metric, then fewer layers, then larger
/// head ridge weight, then enumeration order.
fn select_best(rows: &[GridRow], recipes: &[ModelRecipe], metric: Metric) -> usize {
    let better = |a: usize, b: usize| -> bool {
        let (ma, mb) = (rows[a].cv.mean, rows[b].cv.mean);
        if ma != mb {
            return if metric.higher_is_better() { ma > mb } else { ma < mb };
        }
        let (ca, cb) = (&recipes[a].config, &recipes[b].config);
        if ca.n_layers != cb.n_layers {
            return ca.n_layers < cb.n_layers;
        }
        ca.l2_linpred > cb.l2_linpred
    };
    (1..rows.len()).fold(0, |best, i| if better(i, best) { i } else { best })
}

/// Scores every grid point by inner k-fold CV on `data` and picks the best.
/// All points share one fold plan; point `i` trains with seeds derived from
/// `derive_seed(seed, i)`.
pub fn grid_search(
    data: &Dataset,
    grid: &GridSpec,
    base: &ModelRecipe,
    inner_k: usize,
    metric: Metric,
    seed: u64,
    parallel: bool,
) -> Result<GridResult> {
    grid.validate()?;
    let points = grid.points();
    let recipes = points
        .iter()
        .map(|p| GridSpec::apply(base, p))
        .collect::<Result<Vec<_>>>()?;
    let run = |i: usize| -> Result<CvReport> {
        let shifted = SeedShift {
            inner: &recipes[i],
            shift: derive_seed(seed, i as u64),
        };
        kfold_evaluate(data, inner_k, &shifted, metric, seed, false)
    };
    let reports = if parallel {
        (0..points.len()).into_par_iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        (0..points.len()).map(run).collect::<Result<Vec<_>>>()?
    };
    for (p, r) in points.iter().zip(&reports) {
        if !r.mean.is_finite() {
            return Err(Error::DegenerateProblem(format!("grid point {p:?} scored {}", r.mean)));
        }
    }
    let rows: Vec<GridRow> = points
        .into_iter()
        .zip(reports)
        .map(|(point, cv)| GridRow { point, cv })
        .collect();
    let best = select_best(&rows, &recipes, metric);
    Ok(GridResult {
        best_recipe: recipes[best].clone(),
        rows,
        best,
    })
}

struct SeedShift<'a> {
    inner: &'a ModelRecipe,
    shift: u64,
}

impl Recipe for SeedShift<'_> {
    fn fit(&self, train: &Dataset, seed: u64) -> Result<BoostedModel> {
        self.inner.train(train, seed ^ self.shift)
    }
}

/// A recipe that tunes itself by grid search on each training split, then
/// refits the winner on the whole split.
#[derive(Debug, Clone)]
pub struct TunedRecipe {
    pub base: ModelRecipe,
    pub grid: GridSpec,
    pub inner_k: usize,
    pub metric: Metric,
}

impl Recipe for TunedRecipe {
    fn fit(&self, train: &Dataset, seed: u64) -> Result<BoostedModel> {
        let result = grid_search(train, &self.grid, &self.base, self.inner_k, self.metric, seed, false)?;
        result.best_recipe.train(train, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_concentric_circles;
    use ndarray::Array2;

    fn regression(n: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        let y = Array2::from_shape_fn((n, 1), |(i, _)| (3.0 * x[[i, 0]]).sin() + x[[i, 1]]);
        Dataset::new(x, Targets::Continuous(y)).unwrap()
    }

    fn small_base() -> ModelRecipe {
        ModelRecipe::new(
            Algorithm::Gradient,
            TrainConfig {
                n_layers: 1,
                feature_dim: 16,
                ..Default::default()
            },
        )
    }

    #[test]
    fn enumerates_every_point() {
        let grid = GridSpec::default().axis("n_layers", [1.0, 3.0, 6.0]).axis("l2_linpred", [0.1, 0.01]);
        grid.validate().unwrap();
        assert_eq!(grid.size(), 6);
        let points = grid.points();
        assert_eq!(points.len(), 6);
        assert_eq!(points[1], vec![("n_layers".to_string(), 1.0), ("l2_linpred".to_string(), 0.01)]);
        assert_eq!(GridSpec::default().points().len(), 1);
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(GridSpec::default().axis("depth", [1.0]).validate().is_err());
        assert!(GridSpec::default().axis("n_layers", Vec::<f64>::new()).validate().is_err());
        assert!(GridSpec::apply(&small_base(), &[("n_layers".into(), 1.5)]).is_err());
    }

    #[test]
    fn single_point_grid_returns_it() {
        let grid = GridSpec::default().axis("n_layers", [2.0]);
        let res = grid_search(&regression(40), &grid, &small_base(), 3, Metric::Rmse, 1, false).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_eq!(res.best, 0);
        assert_eq!(res.best_recipe.config.n_layers, 2);
    }

    #[test]
    fn selects_dominating_config() {
        // Huge head ridge weight forces a constant predictor.
        let grid = GridSpec::default().axis("l2_linpred", [1e6, 1e-6, 1e3]);
        let base = ModelRecipe::new(Algorithm::Ridge, TrainConfig::default());
        let res = grid_search(&regression(60), &grid, &base, 3, Metric::Rmse, 2, false).unwrap();
        assert_eq!(res.best, 1);
        let best_mean = res.rows[res.best].cv.mean;
        assert!(res.rows.iter().all(|r| r.cv.mean >= best_mean));
    }

    #[test]
    fn ties_prefer_shallow_then_regularized() {
        // Ridge ignores n_layers, so those rows tie exactly.
        let base = ModelRecipe::new(Algorithm::Ridge, TrainConfig::default());
        let grid = GridSpec::default().axis("n_layers", [6.0, 1.0, 3.0]);
        let res = grid_search(&regression(30), &grid, &base, 3, Metric::Rmse, 3, false).unwrap();
        assert_eq!(res.best_recipe.config.n_layers, 1);

        let rows: Vec<GridRow> = (0..3)
            .map(|_| GridRow {
                point: vec![],
                cv: CvReport::from_scores(vec![1.0, 1.0]),
            })
            .collect();
        let recipes: Vec<ModelRecipe> = [1e-3, 1e-1, 1e-1]
            .iter()
            .map(|&l| {
                let mut r = base.clone();
                r.config.l2_linpred = l;
                r
            })
            .collect();
        assert_eq!(select_best(&rows, &recipes, Metric::Rmse), 1);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let data = regression(45);
        let grid = GridSpec::default().axis("n_layers", [1.0, 2.0]).axis("l2_ghat", [1e-2, 1e-4]);
        let a = grid_search(&data, &grid, &small_base(), 3, Metric::Rmse, 5, false).unwrap();
        let b = grid_search(&data, &grid, &small_base(), 3, Metric::Rmse, 5, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_selection() {
        let reg = Targets::Continuous(Array2::zeros((2, 1)));
        let cls = Targets::labels(vec![0, 2], 3).unwrap();
        let mut r = small_base();
        assert_eq!(r.loss_for(&reg).unwrap(), LossKind::Mse);
        assert_eq!(r.loss_for(&cls).unwrap(), LossKind::Cce { classes: 3 });
        r.algorithm = Algorithm::Greedy;
        assert!(r.loss_for(&cls).is_err());
        r.algorithm = Algorithm::Logistic;
        assert!(r.loss_for(&reg).is_err());
        r.loss = LossChoice::Bce;
        assert_eq!(r.loss_for(&Targets::labels(vec![0, 1], 2).unwrap()).unwrap(), LossKind::Bce);
    }

    #[test]
    fn tuned_recipe_runs_nested_cv() {
        let data = make_concentric_circles(120, 2, 2, 0.02, 6).unwrap();
        let tuned = TunedRecipe {
            base: ModelRecipe::new(Algorithm::Logistic, TrainConfig::default()),
            grid: GridSpec::default().axis("l2_linpred", [1.0, 1e-3]),
            inner_k: 3,
            metric: Metric::Accuracy,
        };
        let a = kfold_evaluate(&data, 3, &tuned, Metric::Accuracy, 7, true).unwrap();
        let b = kfold_evaluate(&data, 3, &tuned, Metric::Accuracy, 7, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scores.len(), 3);
    }
}
