//! Command-line surface for the inverse 2x2 game-learning toolkit: data
//! generation, equilibrium inspection, fitting, evaluation and full
//! experiment reproduction.
//!
//! Exit codes: 0 on success, 2 on usage or input-parsing errors, 3 on
//! numerical failures (fit or solver non-convergence).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gamefit_core::dataset::Dataset;
use gamefit_core::equilibrium::{alpha_beta, ce_vertices, max_entropy_ce, JointDistribution};
use gamefit_core::estimate::{EstimateResult, EstimatorRegistry, FitConfig, FitError};
use gamefit_core::experiments::{
    decision_accuracy, emit_report, format_aggregate_table, mae_rmse, run_experiment,
    tv_distance, ExperimentConfig, ExperimentId,
};
use gamefit_core::game::{Game2x2, GameSpec, WeightVector, DEGENERACY_TOL};
use gamefit_core::lbr::{
    logit_responses, simulate_chain, stationary_closed_form, stationary_power_iteration,
    transition_matrix, Rationality,
};
use gamefit_core::scenarios::{
    chicken_dare_game, chicken_features, sample_iid, signaled_sample, sweep_traffic_scenarios,
    traffic_features_for, uncoordinated_sample, RangeSteps, SweepGrid, TrafficWeights,
};

#[derive(Parser)]
#[command(
    name = "gamefit",
    version,
    about = "Inverse learning of 2x2 game utilities from observed joint actions"
)]
struct Cli {
    /// Seed used by stochastic paths that take no explicit seed.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads for experiment cells (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a game: class, alpha/beta, CE vertices, max-entropy CE.
    Eq {
        /// Game specification JSON ({"features": .., "weights": ..}).
        #[arg(long)]
        game: PathBuf,
        /// Emit machine-readable JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Logit best-response dynamics: responses, transition matrix,
    /// stationary distribution, optional simulation.
    Lbr {
        /// Game specification JSON.
        #[arg(long)]
        game: PathBuf,
        /// Rationality of player 1.
        #[arg(long, default_value_t = 1.0)]
        lambda1: f64,
        /// Rationality of player 2.
        #[arg(long, default_value_t = 1.0)]
        lambda2: f64,
        /// Cross-check the closed form against power iteration.
        #[arg(long)]
        power_iter: bool,
        /// Simulate this many chain steps and write them as JSONL.
        #[arg(long)]
        simulate: Option<u64>,
        /// Burn-in steps discarded before recording.
        #[arg(long, default_value_t = 1000)]
        burn_in: u64,
        /// Output path for the simulated dataset.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit machine-readable JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Generate observation datasets under one of the bundled protocols.
    Gen {
        #[command(subcommand)]
        protocol: GenProtocol,
    },
    /// Fit an estimator to a dataset.
    Fit {
        /// Dataset JSONL path.
        #[arg(long)]
        data: PathBuf,
        /// Feature source: "chicken", "traffic", or a game-spec JSON path.
        #[arg(long)]
        features: String,
        /// Time to intersection of agent 1 (traffic features).
        #[arg(long, default_value_t = 2.0)]
        tau1: f64,
        /// Time to intersection of agent 2 (traffic features).
        #[arg(long, default_value_t = 3.0)]
        tau2: f64,
        /// Estimation method: ce-ml, lbr-ml, lbr-ml-fixed or ice.
        #[arg(long)]
        method: String,
        /// Optional fit configuration TOML.
        #[arg(long)]
        fit_config: Option<PathBuf>,
        /// Write the full estimate JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a stored estimate against a dataset.
    Eval {
        /// Dataset JSONL path.
        #[arg(long)]
        data: PathBuf,
        /// Estimate JSON produced by `fit`.
        #[arg(long)]
        estimate: PathBuf,
        /// Ground-truth weights of player 1 (comma-separated) for MAE/RMSE.
        #[arg(long)]
        truth_w1: Option<String>,
        /// Ground-truth weights of player 2.
        #[arg(long)]
        truth_w2: Option<String>,
    },
    /// Run a bundled experiment (or all four) and emit reports.
    Experiment {
        /// Which experiment: e1, e2, e3, e4 or all.
        which: String,
        /// Override the bundled config with this TOML file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default "out", or $GAMEFIT_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenProtocol {
    /// I.i.d. draws from the max-entropy CE of a chicken-dare game.
    Chicken {
        /// Player 1 weights, e.g. "0.3,0.7".
        #[arg(long, default_value = "0.3,0.7")]
        w1: String,
        /// Player 2 weights.
        #[arg(long, default_value = "0.4,0.6")]
        w2: String,
        #[command(flatten)]
        common: GenCommon,
    },
    /// I.i.d. draws from the max-entropy CE of the traffic game.
    Traffic {
        #[arg(long, default_value_t = 2.0)]
        tau1: f64,
        #[arg(long, default_value_t = 3.0)]
        tau2: f64,
        /// Player 1 weights (8 entries); defaults to the bundled truth.
        #[arg(long)]
        w1: Option<String>,
        #[arg(long)]
        w2: Option<String>,
        #[command(flatten)]
        common: GenCommon,
    },
    /// Signaled recommendations drawn from one CE vertex of the traffic game.
    Signal {
        /// Which vertex the correlation device plays, 1..=5.
        #[arg(long, default_value_t = 4)]
        vertex: usize,
        #[arg(long, default_value_t = 2.0)]
        tau1: f64,
        #[arg(long, default_value_t = 3.0)]
        tau2: f64,
        #[arg(long)]
        w1: Option<String>,
        #[arg(long)]
        w2: Option<String>,
        #[command(flatten)]
        common: GenCommon,
    },
    /// Uncoordinated noisy drivers over a kinematic sweep.
    Uncoordinated {
        /// Logistic noise scale in seconds.
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        /// Agent 1 speed axis as "min,max,steps".
        #[arg(long, default_value = "12,14,3")]
        v1: String,
        /// Agent 1 distance axis.
        #[arg(long, default_value = "14,20,4")]
        d1: String,
        /// Agent 2 speed axis.
        #[arg(long, default_value = "8,10,3")]
        v2: String,
        /// Agent 2 distance axis.
        #[arg(long, default_value = "24,32,4")]
        d2: String,
        /// Additive jitter on the lattice.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[command(flatten)]
        common: GenCommon,
    },
}

#[derive(Args)]
struct GenCommon {
    /// Number of records.
    #[arg(long, default_value_t = 1000)]
    t: u64,
    /// JSONL output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV export path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Failure category deciding the process exit code.
enum Failure {
    /// Bad inputs: missing files, malformed specs, unknown names.
    Usage(String),
    /// The numerics refused: fit or solver non-convergence.
    Numeric(String),
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Failure {
        Failure::Usage(e.to_string())
    }
}

fn numeric_failure(e: FitError) -> Failure {
    match e {
        FitError::UnknownMethod(_) => Failure::Usage(e.to_string()),
        other => Failure::Numeric(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Eq { game, json } => cmd_eq(&game, json),
        Command::Lbr {
            game,
            lambda1,
            lambda2,
            power_iter,
            simulate,
            burn_in,
            out,
            json,
        } => cmd_lbr(
            &game, lambda1, lambda2, power_iter, simulate, burn_in, out, json, cli.seed,
        ),
        Command::Gen { protocol } => cmd_gen(protocol, cli.seed),
        Command::Fit {
            data,
            features,
            tau1,
            tau2,
            method,
            fit_config,
            out,
        } => cmd_fit(&data, &features, tau1, tau2, &method, fit_config, out, cli.seed),
        Command::Eval {
            data,
            estimate,
            truth_w1,
            truth_w2,
        } => cmd_eval(&data, &estimate, truth_w1, truth_w2),
        Command::Experiment { which, config, out } => {
            cmd_experiment(&which, config, out, cli.jobs)
        }
    }
}

fn load_game(path: &Path) -> Result<Game2x2, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let spec: GameSpec = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    spec.build()
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Dataset::read_jsonl(text.as_bytes())
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn parse_weights(text: &str) -> Result<WeightVector, Failure> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|x| x.trim().parse()).collect();
    let values = values.map_err(|e| Failure::Usage(format!("weights '{text}': {e}")))?;
    WeightVector::new(values).map_err(Failure::usage)
}

fn parse_range(text: &str) -> Result<RangeSteps, Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Failure::Usage(format!(
            "range '{text}': expected min,max,steps"
        )));
    }
    let min = parts[0].trim().parse().map_err(Failure::usage)?;
    let max = parts[1].trim().parse().map_err(Failure::usage)?;
    let steps = parts[2].trim().parse().map_err(Failure::usage)?;
    Ok(RangeSteps { min, max, steps })
}

fn write_dataset(data: &Dataset, out: &Path, csv: Option<&Path>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    data.write_jsonl(&mut buf).map_err(Failure::usage)?;
    fs::write(out, buf).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    if let Some(csv_path) = csv {
        let mut buf = Vec::new();
        data.write_csv(&mut buf).map_err(Failure::usage)?;
        fs::write(csv_path, buf)
            .map_err(|e| Failure::Usage(format!("{}: {e}", csv_path.display())))?;
    }
    println!("wrote {} records to {}", data.len(), out.display());
    Ok(())
}

fn cmd_eq(game_path: &Path, json: bool) -> Result<(), Failure> {
    let game = load_game(game_path)?;
    let class = game.classify(DEGENERACY_TOL);
    let ab = alpha_beta(&game).ok();
    let vertices = ce_vertices(&game).ok();
    let maxent = max_entropy_ce(&game, 1e-9).map_err(|e| Failure::Numeric(e.to_string()))?;

    if json {
        let payload = serde_json::json!({
            "class": class,
            "alpha": ab.map(|x| x.alpha),
            "beta": ab.map(|x| x.beta),
            "vertices": vertices.as_ref().map(|v| v.as_array().to_vec()),
            "max_entropy_ce": maxent,
            "entropy": maxent.entropy(),
        });
        println!("{}", serde_json::to_string_pretty(&payload).unwrap());
        return Ok(());
    }

    println!("class: {class}");
    print!("{}", game.payoff_table_text());
    match ab {
        Some(ab) => println!("alpha = {}, beta = {}", ab.alpha, ab.beta),
        None => println!("alpha/beta unavailable: degenerate payoffs"),
    }
    match &vertices {
        Some(v) => {
            println!("CE vertices (a(1)..a(4)):");
            for (i, vertex) in v.as_array().iter().enumerate() {
                println!("  {}: {:?}", i + 1, vertex.probs());
            }
        }
        None => println!("CE vertices unavailable: requires (anti-)coordination structure"),
    }
    println!("max-entropy CE: {:?}", maxent.probs());
    println!("entropy: {} nats", maxent.entropy());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_lbr(
    game_path: &Path,
    lambda1: f64,
    lambda2: f64,
    power_iter: bool,
    simulate: Option<u64>,
    burn_in: u64,
    out: Option<PathBuf>,
    json: bool,
    seed: u64,
) -> Result<(), Failure> {
    let game = load_game(game_path)?;
    let lambda = Rationality::new(lambda1, lambda2).map_err(Failure::usage)?;
    let responses = logit_responses(&game, lambda);
    let matrix = transition_matrix(&game, lambda);
    let stationary = stationary_closed_form(&game, lambda);
    let power = if power_iter {
        Some(
            stationary_power_iteration(&game, lambda, 1e-14, 1_000_000)
                .map_err(|e| Failure::Numeric(e.to_string()))?,
        )
    } else {
        None
    };

    if json {
        let payload = serde_json::json!({
            "lambda": lambda,
            "responses": responses,
            "transition_matrix": matrix.rows(),
            "stationary": stationary,
            "power_iteration": power,
        });
        println!("{}", serde_json::to_string_pretty(&payload).unwrap());
    } else {
        println!(
            "responses: s1={:.6} s2={:.6} t1={:.6} t2={:.6}",
            responses.s1, responses.s2, responses.t1, responses.t2
        );
        println!("transition matrix (rows = current joint action):");
        print!("{}", matrix.to_text());
        println!("stationary (closed form): {:?}", stationary.probs());
        if let Some(p) = power {
            println!("stationary (power iter) : {:?}", p.probs());
            println!("tv(closed, power) = {:.3e}", stationary.tv_distance(&p));
        }
    }

    if let Some(t) = simulate {
        let out = out.ok_or_else(|| {
            Failure::Usage("--simulate requires --out for the dataset".to_string())
        })?;
        let data = simulate_chain(&game, lambda, t, seed, burn_in);
        write_dataset(&data, &out, None)?;
    }
    Ok(())
}

fn cmd_gen(protocol: GenProtocol, seed: u64) -> Result<(), Failure> {
    match protocol {
        GenProtocol::Chicken { w1, w2, common } => {
            let w1 = parse_weights(&w1)?;
            let w2 = parse_weights(&w2)?;
            let game = chicken_dare_game(&w1, &w2).map_err(Failure::usage)?;
            let ce = max_entropy_ce(&game, 1e-9).map_err(|e| Failure::Numeric(e.to_string()))?;
            let data = sample_iid(&ce, common.t, seed);
            write_dataset(&data, &common.out, common.csv.as_deref())
        }
        GenProtocol::Traffic {
            tau1,
            tau2,
            w1,
            w2,
            common,
        } => {
            let (game, _) = traffic_game(tau1, tau2, w1, w2)?;
            let ce = max_entropy_ce(&game, 1e-9).map_err(|e| Failure::Numeric(e.to_string()))?;
            let data = sample_iid(&ce, common.t, seed);
            write_dataset(&data, &common.out, common.csv.as_deref())
        }
        GenProtocol::Signal {
            vertex,
            tau1,
            tau2,
            w1,
            w2,
            common,
        } => {
            if !(1..=5).contains(&vertex) {
                return Err(Failure::Usage(format!(
                    "vertex must be in 1..=5, got {vertex}"
                )));
            }
            let (game, _) = traffic_game(tau1, tau2, w1, w2)?;
            let vertices = ce_vertices(&game).map_err(|e| Failure::Numeric(e.to_string()))?;
            let sample = signaled_sample(vertices.vertex(vertex), common.t, seed);
            write_dataset(sample.dataset(), &common.out, common.csv.as_deref())
        }
        GenProtocol::Uncoordinated {
            noise,
            v1,
            d1,
            v2,
            d2,
            jitter,
            common,
        } => {
            let grid = SweepGrid {
                v1: parse_range(&v1)?,
                d1: parse_range(&d1)?,
                v2: parse_range(&v2)?,
                d2: parse_range(&d2)?,
                jitter,
            };
            let states = sweep_traffic_scenarios(&grid, seed).map_err(Failure::usage)?;
            // Cycle the lattice to reach the requested record count.
            let chosen: Vec<_> = (0..common.t)
                .map(|i| states[(i as usize) % states.len()])
                .collect();
            let weights = TrafficWeights::default_ground_truth();
            let data =
                uncoordinated_sample(&chosen, &weights, noise, seed).map_err(Failure::usage)?;
            write_dataset(&data, &common.out, common.csv.as_deref())
        }
    }
}

fn traffic_game(
    tau1: f64,
    tau2: f64,
    w1: Option<String>,
    w2: Option<String>,
) -> Result<(Game2x2, TrafficWeights), Failure> {
    let truth = TrafficWeights::default_ground_truth();
    let w1 = match w1 {
        Some(text) => parse_weights(&text)?,
        None => truth.w1.clone(),
    };
    let w2 = match w2 {
        Some(text) => parse_weights(&text)?,
        None => truth.w2.clone(),
    };
    let weights = TrafficWeights::new(w1, w2).map_err(Failure::usage)?;
    let features = traffic_features_for(tau1, tau2).map_err(Failure::usage)?;
    let game = Game2x2::new(features, weights.w1.clone(), weights.w2.clone())
        .map_err(Failure::usage)?;
    Ok((game, weights))
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    data_path: &Path,
    features: &str,
    tau1: f64,
    tau2: f64,
    method: &str,
    fit_config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: u64,
) -> Result<(), Failure> {
    let data = load_dataset(data_path)?;
    let feature_map = match features {
        "chicken" => chicken_features(),
        "traffic" => traffic_features_for(tau1, tau2).map_err(Failure::usage)?,
        path => load_game(Path::new(path))?.features().clone(),
    };
    let cfg = match fit_config {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => FitConfig {
            seed,
            ..FitConfig::default()
        },
    };
    let registry = EstimatorRegistry::with_builtins();
    let estimator = registry.get(method).map_err(numeric_failure)?;
    let estimate = estimator
        .fit(&data, &feature_map, &cfg)
        .map_err(numeric_failure)?;

    println!("method: {}", estimate.method);
    println!("nll: {}", estimate.nll);
    println!("w1: {:?}", estimate.weights.0.as_slice());
    println!("w2: {:?}", estimate.weights.1.as_slice());
    println!(
        "params: {}",
        serde_json::to_string(&estimate.params).unwrap()
    );
    println!("fitted distribution: {:?}", estimate.fitted.probs());
    if let Some(out) = out {
        let json = serde_json::to_string_pretty(&estimate).unwrap();
        fs::write(&out, json).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
        println!("estimate written to {}", out.display());
    }
    Ok(())
}

fn cmd_eval(
    data_path: &Path,
    estimate_path: &Path,
    truth_w1: Option<String>,
    truth_w2: Option<String>,
) -> Result<(), Failure> {
    let data = load_dataset(data_path)?;
    let text = fs::read_to_string(estimate_path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", estimate_path.display())))?;
    let estimate: EstimateResult = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", estimate_path.display())))?;

    let counts = data.action_counts();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Failure::Usage("dataset is empty".into()));
    }
    let empirical =
        JointDistribution::new(counts.map(|c| c as f64 / total as f64)).map_err(Failure::usage)?;
    let tv = tv_distance(&estimate.fitted, &empirical);
    let accuracy = decision_accuracy(&estimate.fitted, &data);
    let weight_errors = match (truth_w1, truth_w2) {
        (Some(w1), Some(w2)) => {
            let truth = (parse_weights(&w1)?, parse_weights(&w2)?);
            let (mae, rmse) = mae_rmse(
                (&estimate.weights.0, &estimate.weights.1),
                (&truth.0, &truth.1),
            )
            .map_err(Failure::usage)?;
            Some((mae, rmse))
        }
        (None, None) => None,
        _ => {
            return Err(Failure::Usage(
                "provide both --truth-w1 and --truth-w2 or neither".into(),
            ))
        }
    };

    let payload = serde_json::json!({
        "method": estimate.method,
        "tv": tv,
        "accuracy": accuracy,
        "nll": estimate.nll,
        "mae": weight_errors.map(|x| x.0),
        "rmse": weight_errors.map(|x| x.1),
        "empirical": empirical,
        "fitted": estimate.fitted,
    });
    println!("{}", serde_json::to_string_pretty(&payload).unwrap());
    Ok(())
}

const BUNDLED_CONFIGS: [(&str, &str); 4] = [
    ("e1", include_str!("../../../configs/e1.toml")),
    ("e2", include_str!("../../../configs/e2.toml")),
    ("e3", include_str!("../../../configs/e3.toml")),
    ("e4", include_str!("../../../configs/e4.toml")),
];

fn cmd_experiment(
    which: &str,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    jobs: usize,
) -> Result<(), Failure> {
    let base_out = out
        .or_else(|| std::env::var_os("GAMEFIT_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let ids: Vec<&str> = match which {
        "all" => vec!["e1", "e2", "e3", "e4"],
        other => {
            other
                .parse::<ExperimentId>()
                .map_err(Failure::Usage)?;
            vec![other]
        }
    };
    if config.is_some() && ids.len() > 1 {
        return Err(Failure::Usage(
            "--config cannot be combined with 'all'".into(),
        ));
    }

    let registry = EstimatorRegistry::with_builtins();
    for id in ids {
        let text = match &config {
            Some(path) => fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
            None => BUNDLED_CONFIGS
                .iter()
                .find(|(name, _)| *name == id)
                .expect("bundled config exists")
                .1
                .to_string(),
        };
        let cfg = ExperimentConfig::from_toml(&text).map_err(Failure::usage)?;
        let report =
            run_experiment(&cfg, &registry, jobs).map_err(|e| Failure::Numeric(e.to_string()))?;
        let dir = base_out.join(report.experiment.to_string());
        let files = emit_report(&report, &dir).map_err(|e| Failure::Usage(e.to_string()))?;
        println!("== experiment {} ==", report.experiment);
        print!("{}", format_aggregate_table(&report));
        let failures = report.rows.iter().filter(|r| r.error.is_some()).count();
        if failures > 0 {
            println!("note: {failures} of {} cells failed to fit", report.rows.len());
        }
        println!(
            "reports: {} {} {} {}",
            files.rows_csv.display(),
            files.aggregates_csv.display(),
            files.report_json.display(),
            files.plot_data_csv.display()
        );
    }
    Ok(())
}
