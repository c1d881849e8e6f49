//! Config-driven runs: scan the scene, obtain an estimator, sweep the
//! computation intensity and accuracy requirement over the requested schemes,
//! and write CSV results plus a plain-text summary.

mod scenario;

pub use scenario::make_default_scenario;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accuracy::{
    eval_metrics, generate_instances, train_mlp, ErrorMetrics, MlpModel, OracleParams,
    TrainConfig,
};
use crate::accuracy::dataset::split;
use crate::bench::{compare_schemes, dominance_chain, BenchConfig, ChainVerdict, Scheme, SchemeResult, SearchMode};
use crate::context::TaskContext;
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::netmodel::SystemParams;
use crate::quality::PartitionResolution;
use crate::scene::{LidarConfig, Scenario, ScenarioDoc};

pub const RESULT_COLUMNS: [&str; 12] = [
    "scheme",
    "epsilon",
    "A",
    "K",
    "seed",
    "feasible",
    "total_cost",
    "bandwidth_fraction",
    "compute_fraction",
    "per_subtask_accuracy_est",
    "per_subtask_accuracy_oracle",
    "elapsed_ms",
];

/// Fraction of generated samples used for training; the rest is held out.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario file; the built-in scene for `seed` when absent.
    pub scenario: Option<PathBuf>,
    /// Overrides applied on top of the scenario's parameter block.
    pub params: Option<serde_json::Value>,
    #[serde(rename = "K")]
    pub k: PartitionResolution,
    pub ga: GaConfig,
    pub search: SearchMode,
    pub warm_start: bool,
    pub oracle: OracleParams,
    pub training: TrainConfig,
    pub training_samples: usize,
    pub schemes: Vec<Scheme>,
    pub epsilon: Vec<f64>,
    #[serde(rename = "A")]
    pub accuracy_req: Vec<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Model to load, or where to look for one. Trained when absent.
    pub model: Option<PathBuf>,
    /// Retrain even if `model` exists.
    pub train: bool,
    /// Record wall-clock times in results.csv. Off keeps the file reproducible.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            params: None,
            k: PartitionResolution::default(),
            ga: GaConfig::default(),
            search: SearchMode::Auto,
            warm_start: true,
            oracle: OracleParams::default(),
            training: TrainConfig::default(),
            training_samples: 5600,
            schemes: Scheme::ALL.to_vec(),
            epsilon: vec![10000.0, 20000.0, 30000.0, 40000.0],
            accuracy_req: vec![0.9],
            seed: 1,
            out_dir: PathBuf::from("out"),
            model: None,
            train: false,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_empty() {
            return Err(Error::param("epsilon", "sweep list must not be empty"));
        }
        if self.accuracy_req.is_empty() {
            return Err(Error::param("A", "sweep list must not be empty"));
        }
        if self.schemes.is_empty() {
            return Err(Error::param("schemes", "must not be empty"));
        }
        if self.training_samples == 0 {
            return Err(Error::param("training_samples", "must be at least 1"));
        }
        if let Some(p) = &self.scenario {
            if !p.is_file() {
                return Err(Error::param(
                    "scenario",
                    format!("file {} does not exist", p.display()),
                ));
            }
        }
        if let (Some(p), false) = (&self.model, self.train) {
            if !p.is_file() {
                return Err(Error::param(
                    "model",
                    format!("file {} does not exist (pass train to create it)", p.display()),
                ));
            }
        }
        self.ga.validate()?;
        self.oracle.validate()
    }
}

/// One line of results.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub epsilon: f64,
    pub accuracy_req: f64,
    pub k: u8,
    pub seed: u64,
    pub feasible: bool,
    pub total_cost: Option<f64>,
    pub bandwidth_fraction: Option<f64>,
    pub compute_fraction: Option<f64>,
    pub accuracy_est: Vec<f64>,
    pub accuracy_oracle: Vec<f64>,
    pub elapsed_ms: f64,
}

impl ResultRow {
    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        vec![
            self.scheme.to_string(),
            self.epsilon.to_string(),
            self.accuracy_req.to_string(),
            self.k.to_string(),
            self.seed.to_string(),
            self.feasible.to_string(),
            opt(self.total_cost),
            opt(self.bandwidth_fraction),
            opt(self.compute_fraction),
            list(&self.accuracy_est),
            list(&self.accuracy_oracle),
            self.elapsed_ms.to_string(),
        ]
    }
}

/// Results of one sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub accuracy_req: f64,
    pub results: Vec<SchemeResult>,
    pub chain: ChainVerdict,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub points: Vec<SweepPoint>,
    /// Held-out error of a freshly trained model.
    pub holdout: Option<ErrorMetrics>,
    pub results_path: PathBuf,
}

/// The scene, LiDAR model and base parameters named by the config.
pub fn load_scene(cfg: &ExperimentConfig) -> Result<(Scenario, LidarConfig, SystemParams)> {
    let (scenario, lidar, base) = match &cfg.scenario {
        Some(path) => {
            let doc = ScenarioDoc::load(path)?;
            (doc.to_scenario()?, doc.lidar.clone(), doc.params.unwrap_or_default())
        }
        None => (
            make_default_scenario(cfg.seed),
            LidarConfig::default(),
            SystemParams::default(),
        ),
    };
    let params = match &cfg.params {
        Some(v) => base.with_overrides(v)?,
        None => base,
    };
    Ok((scenario, lidar, params))
}

/// Loads the configured model or trains one on oracle-labelled scenes.
pub fn obtain_model(cfg: &ExperimentConfig) -> Result<(MlpModel, Option<ErrorMetrics>)> {
    if let (Some(path), false) = (&cfg.model, cfg.train) {
        let model = load_model(path)?;
        return Ok((model, None));
    }
    let instances = generate_instances(
        cfg.seed,
        cfg.training_samples,
        &cfg.oracle,
        &LidarConfig::default(),
    )?;
    let samples: Vec<_> = instances.iter().map(|i| i.sample(cfg.k)).collect();
    let (train, held) = split(&samples, TRAIN_FRACTION, cfg.seed);
    let model = train_mlp(if train.is_empty() { &samples } else { &train }, &cfg.training)?;
    let metrics = if held.is_empty() {
        None
    } else {
        Some(eval_metrics(&model, &held)?)
    };
    Ok((model, metrics))
}

/// `.json` files hold the JSON form, anything else the binary form.
pub fn load_model(path: &Path) -> Result<MlpModel> {
    if path.extension().is_some_and(|e| e == "json") {
        MlpModel::load_json(path)
    } else {
        MlpModel::load_bin(path)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (scenario, lidar, params) = load_scene(cfg)?;
    let (model, holdout) = obtain_model(cfg)?;
    let expected = crate::accuracy::dataset::feature_len(cfg.k);
    if model.input_dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: model.input_dim(),
        });
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    if cfg.model.is_none() || cfg.train {
        model.save_bin(&cfg.out_dir.join("model.bin"))?;
        model.save_json(&cfg.out_dir.join("model.json"))?;
    }
    let base = TaskContext::from_scenario(&scenario, &lidar, params, &model, cfg.k, &cfg.oracle)?;
    let bench = BenchConfig {
        ga: cfg.ga.clone(),
        mode: cfg.search,
        warm_start: cfg.warm_start,
    };
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for &a in &cfg.accuracy_req {
        for &eps in &cfg.epsilon {
            let ctx = base.with_params(SystemParams {
                epsilon: eps,
                accuracy_req: a,
                ..params
            })?;
            let results = compare_schemes(&ctx, &cfg.schemes, &bench)?;
            for r in &results {
                if let (true, Some(asg), Some(alloc)) = (r.feasible, &r.assignment, &r.allocation) {
                    ctx.verify(asg, alloc, r.scheme != Scheme::Nearest)?;
                }
                rows.push(ResultRow {
                    scheme: r.scheme,
                    epsilon: eps,
                    accuracy_req: a,
                    k: cfg.k.get(),
                    seed: cfg.seed,
                    feasible: r.feasible,
                    total_cost: r.cost(),
                    bandwidth_fraction: r.feasible.then(|| r.allocation.as_ref().map(|x| x.bandwidth_fraction)).flatten(),
                    compute_fraction: r.feasible.then(|| r.allocation.as_ref().map(|x| x.compute_fraction)).flatten(),
                    accuracy_est: r.accuracy_est.clone(),
                    accuracy_oracle: r.accuracy_oracle.clone().unwrap_or_default(),
                    elapsed_ms: if cfg.record_timing { r.elapsed_ms } else { 0.0 },
                });
            }
            points.push(SweepPoint {
                epsilon: eps,
                accuracy_req: a,
                chain: dominance_chain(&results),
                results,
            });
        }
    }
    let results_path = cfg.out_dir.join("results.csv");
    write_results(&results_path, &rows)?;
    write_history(&cfg.out_dir.join("elite_history.csv"), &points)?;
    let summary = summarize(&points, holdout.as_ref());
    let summary_path = cfg.out_dir.join("summary.txt");
    fs::write(&summary_path, summary).map_err(|e| Error::io(&summary_path, e))?;
    Ok(ExperimentReport {
        rows,
        points,
        holdout,
        results_path,
    })
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_history(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "epsilon", "A", "generation", "cost"])?;
    for p in points {
        for r in &p.results {
            for (k, c) in r.history.iter().flatten().enumerate() {
                w.write_record([
                    r.scheme.to_string(),
                    p.epsilon.to_string(),
                    p.accuracy_req.to_string(),
                    k.to_string(),
                    c.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn summarize(points: &[SweepPoint], holdout: Option<&ErrorMetrics>) -> String {
    let mut s = String::new();
    if let Some(m) = holdout {
        let _ = writeln!(s, "estimator held-out mse={} mae={} vae={}", m.mse, m.mae, m.vae);
    }
    let (mut violated, mut held) = (0, 0);
    for p in points {
        let verdict = match &p.chain {
            ChainVerdict::Holds => {
                held += 1;
                "holds".to_string()
            }
            ChainVerdict::NotApplicable => "not applicable (a scheme is infeasible)".to_string(),
            ChainVerdict::Violated(why) => {
                violated += 1;
                format!("VIOLATED: {why}")
            }
        };
        let _ = writeln!(s, "epsilon={} A={}: dominance chain {verdict}", p.epsilon, p.accuracy_req);
        for r in &p.results {
            let cost = r.cost().map_or("infeasible".to_string(), |c| format!("{c:.6}"));
            let below = r
                .accuracy_est
                .iter()
                .filter(|&&a| a < p.accuracy_req)
                .count();
            let _ = write!(s, "  {:<12} cost {cost}", r.scheme.name());
            if below > 0 {
                let _ = write!(s, ", {below} subtask(s) below A");
            }
            if let Some(n) = &r.note {
                let _ = write!(s, " ({n})");
            }
            s.push('\n');
        }
    }
    let _ = writeln!(
        s,
        "overall: dominance chain holds at {held}, violated at {violated}, not applicable at {} of {} points",
        points.len() - held - violated,
        points.len()
    );
    s
}
