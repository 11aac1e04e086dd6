//! Datasets, CSV ingestion, train-only preprocessing, synthetic data,
//! k-fold evaluation and metrics.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boosting::{BoostedModel, Prediction};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::losses::Targets;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    /// Cells hold the index into `levels`.
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub targets: Targets,
    pub columns: Vec<Column>,
}

impl Dataset {
    pub fn new(x: Matrix, targets: Targets) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::invalid("dataset has no rows"));
        }
        if x.nrows() != targets.len() {
            return Err(Error::invalid(format!("{} rows but {} targets", x.nrows(), targets.len())));
        }
        let columns = (0..x.ncols())
            .map(|j| Column {
                name: format!("x{j}"),
                kind: ColumnKind::Numeric,
            })
            .collect();
        Ok(Self { x, targets, columns })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            targets: self.targets.select(rows),
            columns: self.columns.clone(),
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.targets, Targets::Labels { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

/// Which CSV columns are targets and which are categorical; every other
/// column is numeric. Classification labels must be integers `0..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub targets: Vec<String>,
    pub task: Task,
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Class count; defaults to the largest label plus one.
    #[serde(default)]
    pub classes: Option<usize>,
}

fn ingest(line: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Ingest {
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => ingest(line, "", format!("{other:?}")),
    }
}

/// Reads a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(|h| h.trim().to_string()).collect();
    if schema.targets.is_empty() {
        return Err(Error::invalid("schema names no target column"));
    }
    if schema.task == Task::Classification && schema.targets.len() != 1 {
        return Err(Error::invalid("classification takes exactly one target column"));
    }
    let find = |name: &String| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest(1, name, "column not found in header"))
    };
    let target_idx = schema.targets.iter().map(find).collect::<Result<Vec<_>>>()?;
    for name in &schema.categorical {
        find(name)?;
        if schema.targets.contains(name) {
            return Err(Error::invalid(format!("column {name} is both target and categorical")));
        }
    }
    let feature_idx: Vec<usize> = (0..header.len()).filter(|j| !target_idx.contains(j)).collect();
    let is_cat: Vec<bool> = feature_idx.iter().map(|&j| schema.categorical.contains(&header[j])).collect();

    let mut levels: Vec<Vec<String>> = vec![Vec::new(); feature_idx.len()];
    let mut x_cells = Vec::new();
    let mut y_cells = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(ingest(
                line,
                "",
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let cell = |j: usize| -> Result<&str> {
            let v = record[j].trim();
            if v.is_empty() || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan") {
                Err(ingest(line, &header[j], "missing value"))
            } else {
                Ok(v)
            }
        };
        let number = |j: usize| -> Result<f64> {
            let v = cell(j)?;
            v.parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .ok_or_else(|| ingest(line, &header[j], format!("not a finite number: {v:?}")))
        };
        for (k, &j) in feature_idx.iter().enumerate() {
            if is_cat[k] {
                let v = cell(j)?;
                let code = match levels[k].iter().position(|l| l == v) {
                    Some(c) => c,
                    None => {
                        levels[k].push(v.to_string());
                        levels[k].len() - 1
                    }
                };
                x_cells.push(code as f64);
            } else {
                x_cells.push(number(j)?);
            }
        }
        match schema.task {
            Task::Regression => {
                for &j in &target_idx {
                    y_cells.push(number(j)?);
                }
            }
            Task::Classification => {
                let j = target_idx[0];
                let v = cell(j)?;
                let label = v
                    .parse::<usize>()
                    .map_err(|_| ingest(line, &header[j], format!("label must be a non-negative integer: {v:?}")))?;
                labels.push(label);
            }
        }
    }
    let n = match schema.task {
        Task::Regression => y_cells.len() / target_idx.len(),
        Task::Classification => labels.len(),
    };
    if n == 0 {
        return Err(Error::invalid("CSV has no data rows"));
    }
    let x = Array2::from_shape_vec((n, feature_idx.len()), x_cells).expect("row-major cells");
    let targets = match schema.task {
        Task::Regression => Targets::Continuous(Array2::from_shape_vec((n, target_idx.len()), y_cells).expect("cells")),
        Task::Classification => {
            let observed = labels.iter().max().map_or(0, |m| m + 1);
            let classes = schema.classes.unwrap_or(observed.max(2));
            Targets::labels(labels, classes)?
        }
    };
    let columns = feature_idx
        .iter()
        .zip(levels)
        .zip(&is_cat)
        .map(|((&j, levels), &cat)| Column {
            name: header[j].clone(),
            kind: if cat {
                ColumnKind::Categorical { levels }
            } else {
                ColumnKind::Numeric
            },
        })
        .collect();
    Ok(Dataset { x, targets, columns })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnTransform {
    Numeric { name: String, mean: f64, scale: f64 },
    OneHot { name: String, levels: Vec<String> },
}

/// One-hot encoding and standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub columns: Vec<ColumnTransform>,
}

impl Preprocessor {
    /// Zero-variance numeric columns keep scale 1.
    pub fn fit(train: &Dataset) -> Self {
        let n = train.len() as f64;
        let columns = train
            .columns
            .iter()
            .enumerate()
            .map(|(j, col)| match &col.kind {
                ColumnKind::Numeric => {
                    let c = train.x.column(j);
                    let mean = c.sum() / n;
                    let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
                    ColumnTransform::Numeric {
                        name: col.name.clone(),
                        mean,
                        scale,
                    }
                }
                ColumnKind::Categorical { levels } => ColumnTransform::OneHot {
                    name: col.name.clone(),
                    levels: levels.clone(),
                },
            })
            .collect();
        Self { columns }
    }

    pub fn output_dim(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnTransform::Numeric { .. } => 1,
                ColumnTransform::OneHot { levels, .. } => levels.len(),
            })
            .sum()
    }

    /// Levels not seen in training encode as an all-zero block.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.columns.len() != self.columns.len() {
            return Err(Error::invalid(format!(
                "preprocessor expects {} columns, found {}",
                self.columns.len(),
                data.columns.len()
            )));
        }
        let n = data.len();
        let mut x = Array2::zeros((n, self.output_dim()));
        let mut names = Vec::with_capacity(self.output_dim());
        let mut offset = 0;
        for (j, (transform, col)) in self.columns.iter().zip(&data.columns).enumerate() {
            match (transform, &col.kind) {
                (ColumnTransform::Numeric { name, mean, scale }, ColumnKind::Numeric) => {
                    let src = data.x.column(j);
                    x.column_mut(offset).zip_mut_with(&src, |o, &v| *o = (v - mean) / scale);
                    names.push(name.clone());
                    offset += 1;
                }
                (ColumnTransform::OneHot { name, levels }, ColumnKind::Categorical { levels: seen }) => {
                    let map: Vec<Option<usize>> = seen.iter().map(|l| levels.iter().position(|t| t == l)).collect();
                    for i in 0..n {
                        if let Some(k) = map[data.x[[i, j]] as usize] {
                            x[[i, offset + k]] = 1.0;
                        }
                    }
                    names.extend(levels.iter().map(|l| format!("{name}={l}")));
                    offset += levels.len();
                }
                _ => {
                    return Err(Error::invalid(format!("column {} changed type between splits", col.name)));
                }
            }
        }
        Ok(Dataset {
            x,
            targets: data.targets.clone(),
            columns: names
                .into_iter()
                .map(|name| Column {
                    name,
                    kind: ColumnKind::Numeric,
                })
                .collect(),
        })
    }
}

/// Noisy points on concentric rings. Ring `j` has radius `(j+1)/rings` and
/// class `j mod classes`; point `i` lies on ring `i mod rings`.
pub fn make_concentric_circles(n: usize, rings: usize, classes: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || rings < classes {
        return Err(Error::invalid(format!(
            "need rings >= classes >= 2, got rings {rings}, classes {classes}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::invalid("noise_sd must be >= 0"));
    }
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, noise_sd).expect("valid sd");
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let ring = i % rings;
        let radius = (ring + 1) as f64 / rings as f64;
        let theta = rng.gen_range(0.0..2.0 * PI);
        x[[i, 0]] = radius * theta.cos() + noise.sample(&mut rng);
        x[[i, 1]] = radius * theta.sin() + noise.sample(&mut rng);
        labels.push(ring % classes);
    }
    Dataset::new(x, Targets::labels(labels, classes)?)
}

/// Random split into `(train, test)` index lists, `train_size` rows first.
pub fn train_test_indices(n: usize, train_size: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let test = idx.split_off(train_size.min(n));
    (idx, test)
}

/// Shuffled assignment of rows to `k` folds with sizes differing by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub k: usize,
    pub folds: Vec<usize>,
    pub seed: u64,
}

impl CvPlan {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
        }
        if n < k {
            return Err(Error::invalid(format!("{n} rows cannot fill {k} folds")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(seed));
        let mut folds = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            folds[i] = pos % k;
        }
        Ok(Self { k, folds, seed })
    }

    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.folds.len()).partition(|&i| self.folds[i] != fold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rmse,
    Accuracy,
}

impl Metric {
    pub fn for_dataset(data: &Dataset) -> Self {
        if data.is_classification() {
            Metric::Accuracy
        } else {
            Metric::Rmse
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == Metric::Accuracy
    }

    pub fn score(self, prediction: &Prediction, truth: &Targets) -> Result<f64> {
        match (self, prediction, truth) {
            (Metric::Rmse, Prediction::Regression(p), Targets::Continuous(y)) => rmse(p.view(), y.view()),
            (Metric::Accuracy, Prediction::Classification { labels, .. }, Targets::Labels { labels: truth, .. }) => {
                accuracy(labels, truth)
            }
            _ => Err(Error::invalid(format!("metric {self:?} does not match the prediction type"))),
        }
    }
}

pub fn rmse(predictions: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<f64> {
    if predictions.dim() != truth.dim() {
        return Err(Error::invalid(format!(
            "predictions {:?} and truth {:?} differ in shape",
            predictions.dim(),
            truth.dim()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("no values to score"));
    }
    let sse: f64 = predictions.iter().zip(truth.iter()).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("no labels to score"));
    }
    let hits = predictions.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Anything that turns a preprocessed training split into a model.
pub trait Recipe: Sync {
    fn fit(&self, train: &Dataset, seed: u64) -> Result<BoostedModel>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (`n − 1`).
    pub sd: f64,
}

impl CvReport {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let k = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / k;
        let sd = if scores.len() > 1 {
            (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { scores, mean, sd }
    }
}

/// Scores a recipe by k-fold CV. Each fold preprocesses with statistics from
/// its training part only and trains with seed `derive_seed(seed, fold)`.
pub fn kfold_evaluate<R: Recipe + ?Sized>(
    data: &Dataset,
    k: usize,
    recipe: &R,
    metric: Metric,
    seed: u64,
    parallel: bool,
) -> Result<CvReport> {
    let plan = CvPlan::new(data.len(), k, seed)?;
    let run = |fold: usize| -> Result<f64> {
        let (train_idx, test_idx) = plan.split(fold);
        let (train, test) = (data.select(&train_idx), data.select(&test_idx));
        let pre = Preprocessor::fit(&train);
        let (train, test) = (pre.apply(&train)?, pre.apply(&test)?);
        let model = recipe.fit(&train, derive_seed(seed, fold as u64))?;
        metric.score(&model.predict(test.x.view())?, &test.targets)
    };
    let scores = if parallel {
        (0..k).into_par_iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        (0..k).map(run).collect::<Result<Vec<_>>>()?
    };
    Ok(CvReport::from_scores(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::InitialMap;
    use crate::losses::{LinearHead, LossKind};
    use ndarray::array;

    fn schema(task: Task) -> CsvSchema {
        CsvSchema {
            targets: vec!["y".into()],
            task,
            categorical: vec![],
            classes: None,
        }
    }

    #[test]
    fn reads_numeric_csv() {
        let d = read_csv("a,b,y\n1,2,3\n4,5,6\n7,8,9\n".as_bytes(), &schema(Task::Regression)).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.x, array![[1.0, 2.0], [4.0, 5.0], [7.0, 8.0]]);
        assert_eq!(d.targets, Targets::Continuous(array![[3.0], [6.0], [9.0]]));
    }

    #[test]
    fn records_categorical_levels() {
        let mut s = schema(Task::Classification);
        s.categorical = vec!["c".into()];
        let d = read_csv("c,x,y\nred,1,0\nblue,2,1\nred,3,1\ngreen,4,0\n".as_bytes(), &s).unwrap();
        assert_eq!(
            d.columns[0].kind,
            ColumnKind::Categorical {
                levels: vec!["red".into(), "blue".into(), "green".into()]
            }
        );
        assert_eq!(d.targets.labels_slice().unwrap(), &[0, 1, 1, 0]);
    }

    #[test]
    fn malformed_rows_cite_line_numbers() {
        let s = schema(Task::Regression);
        let ragged = read_csv("a,y\n1,2\n3\n".as_bytes(), &s).unwrap_err();
        assert!(matches!(ragged, Error::Ingest { line: 3, .. }), "{ragged}");
        let text = read_csv("a,y\n1,2\nfoo,3\n".as_bytes(), &s).unwrap_err();
        assert!(matches!(&text, Error::Ingest { line: 3, column, .. } if column == "a"), "{text}");
        let missing = read_csv("a,y\n1,\n".as_bytes(), &s).unwrap_err();
        assert!(matches!(&missing, Error::Ingest { line: 2, column, .. } if column == "y"));
        let label = read_csv("a,y\n1,0.5\n".as_bytes(), &schema(Task::Classification)).unwrap_err();
        assert!(matches!(label, Error::Ingest { line: 2, .. }));
    }

    #[test]
    fn constant_column_becomes_zero() {
        let d = Dataset::new(array![[3.0, 1.0], [3.0, 2.0], [3.0, 6.0]], Targets::Continuous(array![[0.0], [0.0], [0.0]])).unwrap();
        let pre = Preprocessor::fit(&d);
        let out = pre.apply(&d).unwrap();
        assert!(out.x.column(0).iter().all(|&v| v == 0.0));
        let c = out.x.column(1);
        let mean = c.sum() / 3.0;
        let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-8 && (var - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unseen_level_encodes_as_zeros() {
        let mut s = schema(Task::Regression);
        s.categorical = vec!["c".into()];
        let train = read_csv("c,y\na,1\nb,2\n".as_bytes(), &s).unwrap();
        let test = read_csv("c,y\nc,1\nb,2\n".as_bytes(), &s).unwrap();
        let pre = Preprocessor::fit(&train);
        let out = pre.apply(&test).unwrap();
        assert_eq!(out.x, array![[0.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn preprocessing_ignores_held_out_rows() {
        let d = make_concentric_circles(50, 3, 3, 0.1, 1).unwrap();
        let (tr, te) = train_test_indices(50, 30, 2);
        let before = Preprocessor::fit(&d.select(&tr));
        let mut mutated = d.clone();
        for &i in &te {
            mutated.x.row_mut(i).fill(1e6);
        }
        assert_eq!(before, Preprocessor::fit(&mutated.select(&tr)));
    }

    #[test]
    fn noiseless_circles_lie_on_rings() {
        let d = make_concentric_circles(101, 2, 2, 0.0, 3).unwrap();
        for (row, &label) in d.x.outer_iter().zip(d.targets.labels_slice().unwrap()) {
            let r = row.dot(&row).sqrt();
            let expected = if label == 0 { 0.5 } else { 1.0 };
            assert!((r - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_rings_are_balanced() {
        let d = make_concentric_circles(1000, 9, 3, 0.01, 4).unwrap();
        let mut counts = [0usize; 9];
        for row in d.x.outer_iter() {
            let ring = (row.dot(&row).sqrt() * 9.0).round() as usize - 1;
            counts[ring] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
        assert!(make_concentric_circles(10, 2, 3, 0.0, 0).is_err());
    }

    #[test]
    fn folds_partition_rows() {
        for (n, k) in [(10, 2), (17, 5), (5, 5), (103, 7)] {
            let plan = CvPlan::new(n, k, 9).unwrap();
            let mut sizes = vec![0; k];
            for &f in &plan.folds {
                sizes[f] += 1;
            }
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut seen = vec![0; n];
            for f in 0..k {
                let (train, test) = plan.split(f);
                assert_eq!(train.len() + test.len(), n);
                for i in test {
                    seen[i] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            assert_eq!(plan, CvPlan::new(n, k, 9).unwrap());
        }
        assert!(CvPlan::new(3, 5, 0).is_err());
    }

    #[test]
    fn metric_examples() {
        let a = array![[1.0], [2.0], [3.0]];
        assert_eq!(rmse(a.view(), a.view()).unwrap(), 0.0);
        let shifted = &a + 0.5;
        assert!((rmse(shifted.view(), a.view()).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(accuracy(&[0, 1, 1], &[0, 1, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 1], &[1, 0, 0]).unwrap(), 0.0);
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(rmse(a.view(), array![[1.0, 2.0]].view()).is_err());
    }

    struct MeanRecipe;

    impl Recipe for MeanRecipe {
        fn fit(&self, train: &Dataset, _seed: u64) -> Result<BoostedModel> {
            let Targets::Continuous(y) = &train.targets else { unreachable!() };
            let mut head = LinearHead::zeros(train.x.ncols(), y.ncols());
            head.bias = y.mean_axis(Axis(0)).unwrap();
            Ok(BoostedModel {
                input_dim: train.x.ncols(),
                phi0: InitialMap::Identity,
                blocks: vec![],
                head,
                loss: LossKind::Mse,
                config: None,
            })
        }
    }

    #[test]
    fn constant_recipe_on_constant_targets_scores_zero() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| (i * j) as f64);
        let d = Dataset::new(x, Targets::Continuous(Array2::from_elem((20, 1), 4.0))).unwrap();
        let report = kfold_evaluate(&d, 4, &MeanRecipe, Metric::Rmse, 0, false).unwrap();
        assert_eq!(report.scores, vec![0.0; 4]);
        assert_eq!(report.sd, 0.0);
    }

    #[test]
    fn sample_standard_deviation() {
        let r = CvReport::from_scores(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.mean, 2.5);
        assert!((r.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
