//! Metrics and the multi-seed experiment harness.
//!
//! Four protocols are bundled:
//!
//! - `e1`: i.i.d. draws from the max-entropy CE of the chicken-dare game;
//! - `e2`: i.i.d. draws from the max-entropy CE of the traffic game;
//! - `e3`: signaled recommendations drawn from one CE vertex of the traffic
//!   game;
//! - `e4`: uncoordinated noisy drivers over a kinematic sweep (no ground
//!   truth weights, so weight-recovery metrics are omitted).
//!
//! Every `(method, T, seed)` cell is fitted independently; rows aggregate to
//! medians and interquartile ranges per `(method, T)`. Reports serialize to
//! `rows.csv`, `aggregates.csv`, `report.json` and `plot_data.csv`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::equilibrium::{ce_vertices, max_entropy_ce, EqError, JointDistribution};
use crate::estimate::{EstimatorRegistry, FitConfig, ModelParams};
use crate::game::{FeatureMap, Game2x2, GameError, WeightVector};
use crate::scenarios::{
    chicken_dare_game, sample_iid, signaled_sample, sweep_traffic_scenarios, traffic_features_for,
    uncoordinated_sample, RangeSteps, ScenarioError, SweepGrid, TrafficWeights,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    BadConfig(String),
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario setup failed: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("game setup failed: {0}")]
    Game(#[from] GameError),
    #[error("equilibrium setup failed: {0}")]
    Equilibrium(#[from] EqError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// The four bundled experiment protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentId::E1 => "e1",
            ExperimentId::E2 => "e2",
            ExperimentId::E3 => "e3",
            ExperimentId::E4 => "e4",
        };
        write!(f, "{s}")
    }
}

impl FromStr for ExperimentId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "e1" => Ok(ExperimentId::E1),
            "e2" => Ok(ExperimentId::E2),
            "e3" => Ok(ExperimentId::E3),
            "e4" => Ok(ExperimentId::E4),
            other => Err(format!("unknown experiment '{other}'")),
        }
    }
}

/// Scenario parameters; each experiment reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Chicken-dare ground-truth weights (e1).
    pub chicken_w1: Vec<f64>,
    pub chicken_w2: Vec<f64>,
    /// Decision-point times to intersection for the traffic game (e2, e3).
    pub tau1: f64,
    pub tau2: f64,
    /// Traffic ground-truth weights (e2, e3, e4 nominal).
    pub traffic_w1: Vec<f64>,
    pub traffic_w2: Vec<f64>,
    /// Which CE vertex the e3 correlation device plays, 1..=5.
    pub device_vertex: usize,
    /// Kinematic sweep for e4.
    pub sweep: SweepGrid,
    /// Behavioral noise scale (seconds) for e4.
    pub noise: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let truth = TrafficWeights::default_ground_truth();
        ScenarioConfig {
            chicken_w1: vec![0.3, 0.7],
            chicken_w2: vec![0.4, 0.6],
            tau1: 2.0,
            tau2: 3.0,
            traffic_w1: truth.w1.as_slice().to_vec(),
            traffic_w2: truth.w2.as_slice().to_vec(),
            device_vertex: 4,
            sweep: SweepGrid {
                v1: RangeSteps {
                    min: 12.0,
                    max: 14.0,
                    steps: 3,
                },
                d1: RangeSteps {
                    min: 14.0,
                    max: 20.0,
                    steps: 4,
                },
                v2: RangeSteps {
                    min: 8.0,
                    max: 10.0,
                    steps: 3,
                },
                d2: RangeSteps {
                    min: 24.0,
                    max: 32.0,
                    steps: 4,
                },
                jitter: 0.0,
            },
            noise: 1.0,
        }
    }
}

/// Full experiment configuration, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub sample_sizes: Vec<u64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<String>,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.sample_sizes.is_empty() {
            return Err(ExperimentError::BadConfig("sample_sizes is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::BadConfig("seeds is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(ExperimentError::BadConfig("methods is empty".into()));
        }
        if self.sample_sizes.contains(&0) {
            return Err(ExperimentError::BadConfig("sample sizes must be >= 1".into()));
        }
        if !(1..=5).contains(&self.scenario.device_vertex) {
            return Err(ExperimentError::BadConfig(format!(
                "device_vertex must be in 1..=5, got {}",
                self.scenario.device_vertex
            )));
        }
        Ok(())
    }
}

/// Pooled mean-absolute and root-mean-square error over all weight entries
/// of both players.
pub fn mae_rmse(
    est: (&WeightVector, &WeightVector),
    truth: (&WeightVector, &WeightVector),
) -> Result<(f64, f64), ExperimentError> {
    if est.0.dim() != truth.0.dim() || est.1.dim() != truth.1.dim() {
        return Err(ExperimentError::BadConfig(format!(
            "weight dimension mismatch: estimated ({}, {}), truth ({}, {})",
            est.0.dim(),
            est.1.dim(),
            truth.0.dim(),
            truth.1.dim()
        )));
    }
    let residuals: Vec<f64> = est
        .0
        .as_slice()
        .iter()
        .zip(truth.0.as_slice())
        .chain(est.1.as_slice().iter().zip(truth.1.as_slice()))
        .map(|(a, b)| a - b)
        .collect();
    let n = residuals.len() as f64;
    let mae = residuals.iter().map(|r| r.abs()).sum::<f64>() / n;
    let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Ok((mae, rmse))
}

/// Total-variation distance between two distributions.
pub fn tv_distance(p: &JointDistribution, q: &JointDistribution) -> f64 {
    p.tv_distance(q)
}

/// Percentage of records equal to the model's most likely joint action
/// (ties break toward the lowest action index).
pub fn decision_accuracy(model: &JointDistribution, data: &Dataset) -> f64 {
    let prediction = model.argmax();
    let hits = data.iter().filter(|r| r.action == prediction).count();
    100.0 * hits as f64 / data.len() as f64
}

/// One fitted cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub method: String,
    pub t: u64,
    pub seed: u64,
    /// Weight-recovery errors; absent when the protocol has no ground truth.
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    /// TV distance between the fitted and the empirical distribution.
    pub tv: Option<f64>,
    /// Decision accuracy in percent.
    pub accuracy: Option<f64>,
    pub nll: Option<f64>,
    pub converged: Option<bool>,
    pub weights: Option<(Vec<f64>, Vec<f64>)>,
    pub params: Option<ModelParams>,
    pub fitted: Option<[f64; 4]>,
    pub empirical: [f64; 4],
    /// Fit failure, if any; the harness keeps going.
    pub error: Option<String>,
}

/// Median and interquartile range of one metric over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub iqr: f64,
}

/// Aggregates for one `(method, T)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub t: u64,
    pub seeds: usize,
    pub mae: Option<Summary>,
    pub rmse: Option<Summary>,
    pub tv: Option<Summary>,
    pub accuracy: Option<Summary>,
}

/// Version of the `report.json` schema.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    REPORT_SCHEMA_VERSION
}

/// Full harness output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub experiment: ExperimentId,
    pub config: ExperimentConfig,
    pub rows: Vec<ExperimentRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// Linear-interpolation quantile of already finite values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(Summary {
        median: quantile(&sorted, 0.5),
        iqr: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
    })
}

/// Recomputes the per-(method, T) aggregates from rows.
pub fn aggregate_rows(rows: &[ExperimentRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, u64)> = rows
        .iter()
        .map(|r| (r.method.clone(), r.t))
        .collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|(method, t)| {
            let cell: Vec<&ExperimentRow> = rows
                .iter()
                .filter(|r| &r.method == method && r.t == *t)
                .collect();
            let collect = |f: &dyn Fn(&ExperimentRow) -> Option<f64>| -> Vec<f64> {
                cell.iter().filter_map(|r| f(r)).collect()
            };
            AggregateRow {
                method: method.clone(),
                t: *t,
                seeds: cell.len(),
                mae: summarize(&collect(&|r| r.mae)),
                rmse: summarize(&collect(&|r| r.rmse)),
                tv: summarize(&collect(&|r| r.tv)),
                accuracy: summarize(&collect(&|r| r.accuracy)),
            }
        })
        .collect()
}

/// Everything fixed about one experiment instance: the data-generating
/// process and the fitting context.
struct Protocol {
    features: FeatureMap,
    truth: Option<(WeightVector, WeightVector)>,
    generator: Generator,
}

enum Generator {
    Iid(JointDistribution),
    Signal(JointDistribution),
    Uncoordinated {
        states: Vec<crate::dataset::KinematicState>,
        weights: TrafficWeights,
        noise: f64,
    },
}

impl Generator {
    fn generate(&self, t: u64, seed: u64) -> Result<Dataset, ExperimentError> {
        Ok(match self {
            Generator::Iid(p) => sample_iid(p, t, seed),
            Generator::Signal(device) => signaled_sample(device, t, seed).into_dataset(),
            Generator::Uncoordinated {
                states,
                weights,
                noise,
            } => {
                // Resample states with replacement so any T is reachable
                // from the fixed lattice.
                use rand::Rng;
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
                let chosen: Vec<_> = (0..t)
                    .map(|_| states[rng.random_range(0..states.len())])
                    .collect();
                uncoordinated_sample(&chosen, weights, *noise, seed)?
            }
        })
    }
}

fn build_protocol(cfg: &ExperimentConfig) -> Result<Protocol, ExperimentError> {
    let sc = &cfg.scenario;
    match cfg.experiment {
        ExperimentId::E1 => {
            let w1 = WeightVector::new(sc.chicken_w1.clone())?;
            let w2 = WeightVector::new(sc.chicken_w2.clone())?;
            let game = chicken_dare_game(&w1, &w2)?;
            let ce = max_entropy_ce(&game, 1e-9)?;
            Ok(Protocol {
                features: game.features().clone(),
                truth: Some((w1, w2)),
                generator: Generator::Iid(ce),
            })
        }
        ExperimentId::E2 | ExperimentId::E3 => {
            let w1 = WeightVector::new(sc.traffic_w1.clone())?;
            let w2 = WeightVector::new(sc.traffic_w2.clone())?;
            let features = traffic_features_for(sc.tau1, sc.tau2)?;
            let game = Game2x2::new(features.clone(), w1.clone(), w2.clone())?;
            let generator = if cfg.experiment == ExperimentId::E2 {
                Generator::Iid(max_entropy_ce(&game, 1e-9)?)
            } else {
                let vertices = ce_vertices(&game)?;
                Generator::Signal(*vertices.vertex(sc.device_vertex))
            };
            Ok(Protocol {
                features,
                truth: Some((w1, w2)),
                generator,
            })
        }
        ExperimentId::E4 => {
            let weights = TrafficWeights::new(
                WeightVector::new(sc.traffic_w1.clone())?,
                WeightVector::new(sc.traffic_w2.clone())?,
            )?;
            let states = sweep_traffic_scenarios(&sc.sweep, 0)?;
            // Fit against the sweep's mean kinematics.
            let mean_tau1 = states.iter().map(|k| k.tau1()).sum::<f64>() / states.len() as f64;
            let mean_tau2 = states.iter().map(|k| k.tau2()).sum::<f64>() / states.len() as f64;
            let features = traffic_features_for(mean_tau1, mean_tau2)?;
            Ok(Protocol {
                features,
                truth: None,
                generator: Generator::Uncoordinated {
                    states,
                    weights,
                    noise: sc.noise,
                },
            })
        }
    }
}

fn fit_row(
    cfg: &ExperimentConfig,
    protocol: &Protocol,
    registry: &EstimatorRegistry,
    method: &str,
    t: u64,
    seed: u64,
) -> ExperimentRow {
    let data = match protocol.generator.generate(t, seed) {
        Ok(d) => d,
        Err(e) => {
            return ExperimentRow {
                method: method.to_string(),
                t,
                seed,
                mae: None,
                rmse: None,
                tv: None,
                accuracy: None,
                nll: None,
                converged: None,
                weights: None,
                params: None,
                fitted: None,
                empirical: [f64::NAN; 4],
                error: Some(e.to_string()),
            }
        }
    };
    let counts = data.action_counts();
    let total: u64 = counts.iter().sum();
    let empirical_arr = counts.map(|c| c as f64 / total as f64);
    let empirical = JointDistribution::new(empirical_arr).expect("counts normalize");

    let fit = registry
        .get(method)
        .and_then(|est| est.fit(&data, &protocol.features, &cfg.fit));
    match fit {
        Ok(est) => {
            let (mae, rmse) = match &protocol.truth {
                Some(truth) => {
                    match mae_rmse((&est.weights.0, &est.weights.1), (&truth.0, &truth.1)) {
                        Ok((m, r)) => (Some(m), Some(r)),
                        Err(_) => (None, None),
                    }
                }
                None => (None, None),
            };
            ExperimentRow {
                method: method.to_string(),
                t,
                seed,
                mae,
                rmse,
                tv: Some(tv_distance(&est.fitted, &empirical)),
                accuracy: Some(decision_accuracy(&est.fitted, &data)),
                nll: Some(est.nll),
                converged: Some(est.diagnostics.converged),
                weights: Some((
                    est.weights.0.as_slice().to_vec(),
                    est.weights.1.as_slice().to_vec(),
                )),
                params: Some(est.params),
                fitted: Some(est.fitted.probs()),
                empirical: empirical_arr,
                error: None,
            }
        }
        Err(e) => ExperimentRow {
            method: method.to_string(),
            t,
            seed,
            mae: None,
            rmse: None,
            tv: None,
            accuracy: None,
            nll: None,
            converged: None,
            weights: None,
            params: None,
            fitted: None,
            empirical: empirical_arr,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every `(method, T, seed)` cell of the configured experiment.
///
/// Cells execute in parallel (bounded by `jobs` when positive) and are
/// reduced in deterministic `(T, seed, method)` order, so the report is a
/// pure function of the config.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    registry: &EstimatorRegistry,
    jobs: usize,
) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let protocol = build_protocol(cfg)?;
    let mut cells: Vec<(u64, u64, String)> = Vec::new();
    for &t in &cfg.sample_sizes {
        for &seed in &cfg.seeds {
            for method in &cfg.methods {
                cells.push((t, seed, method.clone()));
            }
        }
    }

    let run_cells = |cells: &[(u64, u64, String)]| -> Vec<ExperimentRow> {
        cells
            .par_iter()
            .map(|(t, seed, method)| fit_row(cfg, &protocol, registry, method, *t, *seed))
            .collect()
    };
    let rows = if jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ExperimentError::BadConfig(format!("thread pool: {e}")))?;
        pool.install(|| run_cells(&cells))
    } else {
        run_cells(&cells)
    };

    let aggregates = aggregate_rows(&rows);
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        experiment: cfg.experiment,
        config: cfg.clone(),
        rows,
        aggregates,
    })
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub rows_csv: PathBuf,
    pub aggregates_csv: PathBuf,
    pub report_json: PathBuf,
    pub plot_data_csv: PathBuf,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `rows.csv`, `aggregates.csv`, `report.json` and `plot_data.csv`
/// into `dir` (created if missing).
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<EmittedFiles, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let rows_csv = dir.join("rows.csv");
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "experiment",
            "method",
            "T",
            "seed",
            "mae",
            "rmse",
            "tv",
            "accuracy",
            "nll",
            "converged",
            "weights",
            "params",
            "error",
        ])
        .map_err(|e| ExperimentError::Json(serde_json::Error::io(std::io::Error::other(e))))?;
        for r in &report.rows {
            let weights = r
                .weights
                .as_ref()
                .map(serde_json::to_string)
                .transpose()?
                .unwrap_or_default();
            let params = r
                .params
                .as_ref()
                .map(serde_json::to_string)
                .transpose()?
                .unwrap_or_default();
            w.write_record([
                report.experiment.to_string(),
                r.method.clone(),
                r.t.to_string(),
                r.seed.to_string(),
                fmt_opt(r.mae),
                fmt_opt(r.rmse),
                fmt_opt(r.tv),
                fmt_opt(r.accuracy),
                fmt_opt(r.nll),
                r.converged.map(|c| c.to_string()).unwrap_or_default(),
                weights,
                params,
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(|e| ExperimentError::Json(serde_json::Error::io(std::io::Error::other(e))))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| ExperimentError::Json(serde_json::Error::io(std::io::Error::other(e))))?;
        fs::write(&rows_csv, bytes).map_err(io_err(&rows_csv))?;
    }

    let aggregates_csv = dir.join("aggregates.csv");
    {
        let mut out = String::new();
        out.push_str(
            "experiment,method,T,seeds,mae_median,mae_iqr,rmse_median,rmse_iqr,tv_median,tv_iqr,accuracy_median,accuracy_iqr\n",
        );
        for a in &report.aggregates {
            let s = |x: Option<Summary>| -> (String, String) {
                match x {
                    Some(s) => (s.median.to_string(), s.iqr.to_string()),
                    None => (String::new(), String::new()),
                }
            };
            let (mae_m, mae_i) = s(a.mae);
            let (rmse_m, rmse_i) = s(a.rmse);
            let (tv_m, tv_i) = s(a.tv);
            let (acc_m, acc_i) = s(a.accuracy);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                report.experiment,
                a.method,
                a.t,
                a.seeds,
                mae_m,
                mae_i,
                rmse_m,
                rmse_i,
                tv_m,
                tv_i,
                acc_m,
                acc_i
            ));
        }
        fs::write(&aggregates_csv, out).map_err(io_err(&aggregates_csv))?;
    }

    let report_json = dir.join("report.json");
    {
        let mut f = fs::File::create(&report_json).map_err(io_err(&report_json))?;
        serde_json::to_writer_pretty(&mut f, report)?;
        f.write_all(b"\n").map_err(io_err(&report_json))?;
    }

    // Per-action empirical vs fitted probabilities, averaged over seeds.
    let plot_data_csv = dir.join("plot_data.csv");
    {
        let mut out = String::new();
        out.push_str("action_index,empirical_p,model_p,method,experiment,T\n");
        let mut keys: Vec<(String, u64)> = report
            .rows
            .iter()
            .map(|r| (r.method.clone(), r.t))
            .collect();
        keys.sort();
        keys.dedup();
        for (method, t) in keys {
            let cell: Vec<&ExperimentRow> = report
                .rows
                .iter()
                .filter(|r| r.method == method && r.t == t && r.fitted.is_some())
                .collect();
            if cell.is_empty() {
                continue;
            }
            for l in 0..4 {
                let emp: f64 =
                    cell.iter().map(|r| r.empirical[l]).sum::<f64>() / cell.len() as f64;
                let fit: f64 = cell.iter().map(|r| r.fitted.unwrap()[l]).sum::<f64>()
                    / cell.len() as f64;
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    l + 1,
                    emp,
                    fit,
                    method,
                    report.experiment,
                    t
                ));
            }
        }
        fs::write(&plot_data_csv, out).map_err(io_err(&plot_data_csv))?;
    }

    Ok(EmittedFiles {
        rows_csv,
        aggregates_csv,
        report_json,
        plot_data_csv,
    })
}

/// Renders the aggregate table: MAE/RMSE cells per method and sample size
/// for the recovery experiments (e1, e2), an accuracy table for the
/// behavioral ones (e3, e4).
pub fn format_aggregate_table(report: &ExperimentReport) -> String {
    let mut ts: Vec<u64> = report.aggregates.iter().map(|a| a.t).collect();
    ts.sort();
    ts.dedup();
    let mut methods: Vec<String> = report.aggregates.iter().map(|a| a.method.clone()).collect();
    methods.sort();
    methods.dedup();
    let has_weight_metrics = matches!(report.experiment, ExperimentId::E1 | ExperimentId::E2)
        && report.aggregates.iter().any(|a| a.mae.is_some());

    let mut out = String::new();
    if has_weight_metrics {
        out.push_str(&format!("{:<14}", "Model"));
        for t in &ts {
            out.push_str(&format!("{:>18}", format!("T={t}")));
        }
        out.push('\n');
        for m in &methods {
            out.push_str(&format!("{m:<14}"));
            for t in &ts {
                let cell = report
                    .aggregates
                    .iter()
                    .find(|a| &a.method == m && a.t == *t);
                let text = match cell {
                    Some(a) => match (a.mae, a.rmse) {
                        (Some(mae), Some(rmse)) => {
                            format!("{:.3} / {:.3}", mae.median, rmse.median)
                        }
                        _ => "-".to_string(),
                    },
                    None => "-".to_string(),
                };
                out.push_str(&format!("{text:>18}"));
            }
            out.push('\n');
        }
    } else {
        out.push_str(&format!("{:<14}{:>16}{:>12}\n", "Model", "Accuracy (%)", "TV"));
        for m in &methods {
            for t in &ts {
                if let Some(a) = report
                    .aggregates
                    .iter()
                    .find(|a| &a.method == m && a.t == *t)
                {
                    let acc = a
                        .accuracy
                        .map(|s| format!("{:.2}", s.median))
                        .unwrap_or_else(|| "-".into());
                    let tv = a
                        .tv
                        .map(|s| format!("{:.3}", s.median))
                        .unwrap_or_else(|| "-".into());
                    out.push_str(&format!("{m:<14}{acc:>16}{tv:>12}\n"));
                }
            }
        }
    }
    out
}
