use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rfrboost::data::{kfold_evaluate, load_csv, Dataset, Metric, Preprocessor};
use rfrboost::grid::{grid_search, TunedRecipe};
use rfrboost::persist::ModelFile;
use rfrboost::pointcloud::run_pointcloud_repeated;
use rfrboost::Error;
use serde::Serialize;

use crate::config::{grid_spec, Command, DataSection, RunConfig};

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SingularSystem | Error::DegenerateProblem(_) | Error::DegeneratePairs | Error::ZeroGradient => {
                EXIT_NUMERIC
            }
            Error::InvalidInput(_) | Error::Ingest { .. } | Error::Format(_) | Error::Io(_) => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub struct Run {
    pub config: RunConfig,
    /// Directory that relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub out: Option<PathBuf>,
}

impl Run {
    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn data(&self) -> &DataSection {
        self.config.data.as_ref().expect("checked when the config was parsed")
    }

    fn load(&self, path: &Path) -> Result<Dataset, Failure> {
        Ok(load_csv(self.resolve(path), &self.data().schema())?)
    }

    fn out_dir(&self) -> Result<Option<PathBuf>, Failure> {
        let dir = self
            .out
            .clone()
            .or_else(|| self.config.out.as_ref().map(|p| self.resolve(p)));
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| Failure {
                code: EXIT_DATA,
                message: format!("cannot create {}: {e}", d.display()),
            })?;
        }
        Ok(dir)
    }

    fn write(&self, dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
        std::fs::write(dir.join(name), contents).map_err(|e| Failure {
            code: EXIT_DATA,
            message: format!("cannot write {}: {e}", dir.join(name).display()),
        })
    }

    /// Runs the task and returns the text printed on stdout.
    pub fn execute(&self) -> Result<String, Failure> {
        match self.config.task {
            Command::Train => self.train(),
            Command::Evaluate => self.evaluate(),
            Command::Cv => self.cv(),
            Command::Gridcv => self.gridcv(),
            Command::Pointcloud => self.pointcloud(),
        }
    }

    fn train(&self) -> Result<String, Failure> {
        let raw = self.load(self.data().train.as_ref().unwrap())?;
        let pre = Preprocessor::fit(&raw);
        let train = pre.apply(&raw)?;
        let recipe = self.config.model.recipe(self.config.seed);
        recipe
            .config
            .validate(train.x.ncols())
            .map_err(|e| Failure::config(e.to_string()))?;
        let start = Instant::now();
        let outcome = recipe.train_outcome(&train, self.config.seed)?;
        let seconds = start.elapsed().as_secs_f64();
        let metric = Metric::for_dataset(&train);
        let score = metric.score(&outcome.model.predict(train.x.view())?, &train.targets)?;

        #[derive(Serialize)]
        struct Report<'a> {
            metric: Metric,
            train_score: f64,
            risk_trace: &'a [f64],
            wall_clock_seconds: f64,
        }
        let report = Report {
            metric,
            train_score: score,
            risk_trace: &outcome.risk_trace,
            wall_clock_seconds: seconds,
        };
        let mut text = String::new();
        writeln!(text, "risk_trace = {:?}", outcome.risk_trace).unwrap();
        writeln!(text, "train_{} = {}", metric_name(metric), score).unwrap();
        if let Some(dir) = self.out_dir()? {
            let file = ModelFile::new(outcome.model, Some(pre));
            self.write(&dir, "model.json", &file.to_json()?)?;
            self.write(&dir, "report.toml", &to_toml(&report))?;
        }
        Ok(text)
    }

    fn evaluate(&self) -> Result<String, Failure> {
        let file = ModelFile::load(self.resolve(self.config.model_file.as_ref().unwrap()))?;
        let mut test = self.load(self.data().test.as_ref().unwrap())?;
        if let Some(pre) = &file.preprocessor {
            test = pre.apply(&test)?;
        }
        let metric = Metric::for_dataset(&test);
        let score = metric.score(&file.model.predict(test.x.view())?, &test.targets)?;
        let text = format!("test_{} = {}\n", metric_name(metric), score);
        if let Some(dir) = self.out_dir()? {
            self.write(&dir, "evaluation.toml", &text)?;
        }
        Ok(text)
    }

    fn cv(&self) -> Result<String, Failure> {
        let data = self.load(self.data().train.as_ref().unwrap())?;
        let recipe = self.config.model.recipe(self.config.seed);
        self.validate_shape(&data, &recipe.config)?;
        let metric = Metric::for_dataset(&data);
        let report = kfold_evaluate(&data, self.config.cv.k, &recipe, metric, self.config.seed, self.config.cv.parallel)?;
        let text = to_toml(&report);
        if let Some(dir) = self.out_dir()? {
            self.write(&dir, "cv.toml", &text)?;
        }
        Ok(text)
    }

    fn gridcv(&self) -> Result<String, Failure> {
        let data = self.load(self.data().train.as_ref().unwrap())?;
        let grid = grid_spec(self.config.grid.as_ref().unwrap()).map_err(Failure::config)?;
        let base = self.config.model.recipe(self.config.seed);
        self.validate_shape(&data, &base.config)?;
        let metric = Metric::for_dataset(&data);
        let cv = &self.config.cv;
        let seed = self.config.seed;

        let full = grid_search(&data, &grid, &base, cv.inner_k, metric, seed, cv.parallel)?;
        let tuned = TunedRecipe {
            base,
            grid,
            inner_k: cv.inner_k,
            metric,
        };
        let outer = kfold_evaluate(&data, cv.k, &tuned, metric, seed, cv.parallel)?;

        let mut text = String::new();
        for (i, row) in full.rows.iter().enumerate() {
            let point: Vec<String> = row.point.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let mark = if i == full.best { " *" } else { "" };
            writeln!(text, "{}  mean={} sd={}{mark}", point.join(" "), row.cv.mean, row.cv.sd).unwrap();
        }
        writeln!(text, "outer_{} = {:?}", metric_name(metric), outer.scores).unwrap();
        writeln!(text, "outer_mean = {}", outer.mean).unwrap();
        writeln!(text, "outer_sd = {}", outer.sd).unwrap();
        if let Some(dir) = self.out_dir()? {
            #[derive(Serialize)]
            struct Report<'a> {
                metric: Metric,
                best: &'a [(String, f64)],
                outer: &'a rfrboost::data::CvReport,
                grid: Vec<GridLine<'a>>,
            }
            #[derive(Serialize)]
            struct GridLine<'a> {
                point: &'a [(String, f64)],
                mean: f64,
                sd: f64,
                scores: &'a [f64],
            }
            let report = Report {
                metric,
                best: &full.rows[full.best].point,
                outer: &outer,
                grid: full
                    .rows
                    .iter()
                    .map(|r| GridLine {
                        point: &r.point,
                        mean: r.cv.mean,
                        sd: r.cv.sd,
                        scores: &r.cv.scores,
                    })
                    .collect(),
            };
            self.write(&dir, "gridcv.toml", &to_toml(&report))?;
        }
        Ok(text)
    }

    fn pointcloud(&self) -> Result<String, Failure> {
        let cfg = &self.config.pointcloud;
        let start = Instant::now();
        let runs = run_pointcloud_repeated(cfg, self.config.seed)?;
        let seconds = start.elapsed().as_secs_f64();
        let mean = |f: fn(&rfrboost::pointcloud::PointCloudResult) -> f64| {
            runs.iter().map(f).sum::<f64>() / runs.len() as f64
        };

        let mut text = String::new();
        for (r, run) in runs.iter().enumerate() {
            writeln!(
                text,
                "run {r}: rfrboost={} rfnn={} logistic={}",
                run.rfrboost_accuracy, run.rfnn_accuracy, run.logistic_accuracy
            )
            .unwrap();
        }
        writeln!(
            text,
            "mean: rfrboost={} rfnn={} logistic={}",
            mean(|r| r.rfrboost_accuracy),
            mean(|r| r.rfnn_accuracy),
            mean(|r| r.logistic_accuracy)
        )
        .unwrap();

        if let Some(dir) = self.out_dir()? {
            let first = &runs[0];
            for (t, phi) in first.representations.iter().enumerate() {
                let mut csv = String::from("phi_1,phi_2,label\n");
                for (row, label) in phi.rows().into_iter().zip(&first.test_labels) {
                    writeln!(csv, "{},{},{label}", row[0], row[1]).unwrap();
                }
                self.write(&dir, &format!("layer_{t}.csv"), &csv)?;
            }
            #[derive(Serialize)]
            struct Report {
                rfrboost_accuracy: Vec<f64>,
                rfnn_accuracy: Vec<f64>,
                logistic_accuracy: Vec<f64>,
                l2_linpred: Vec<[f64; 3]>,
                wall_clock_seconds: f64,
            }
            let report = Report {
                rfrboost_accuracy: runs.iter().map(|r| r.rfrboost_accuracy).collect(),
                rfnn_accuracy: runs.iter().map(|r| r.rfnn_accuracy).collect(),
                logistic_accuracy: runs.iter().map(|r| r.logistic_accuracy).collect(),
                l2_linpred: runs.iter().map(|r| r.l2_linpred).collect(),
                wall_clock_seconds: seconds,
            };
            self.write(&dir, "pointcloud.toml", &to_toml(&report))?;
        }
        Ok(text)
    }

    fn validate_shape(&self, data: &Dataset, cfg: &rfrboost::boosting::TrainConfig) -> Result<(), Failure> {
        let width = Preprocessor::fit(data).output_dim();
        cfg.validate(width).map_err(|e| Failure::config(e.to_string()))
    }
}

fn metric_name(metric: Metric) -> &'static str {
    match metric {
        Metric::Rmse => "rmse",
        Metric::Accuracy => "accuracy",
    }
}

fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("report types serialize to TOML")
}
