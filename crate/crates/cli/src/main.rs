//! Command-line front end: design-time checking, runtime prediction and the
//! simulation experiments.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use presto::engine::{check_requirement, PmcExpression, PmcExpressionReport};
use presto::forecast::ForecasterSpec;
use presto::harness::{tau_sweep, Batch, Experiment, ExperimentConfig, TauPoint};
use presto::model::{fruit_picking_model, Pdtmc, FRUIT_PICKING_REQUIREMENTS};
use presto::parse::{parse_model, parse_properties};
use presto::pctl::Requirement;
use presto::predictor::{Monitor, ObservationSeries, PredictError, PredictionResult};
use presto::ratfunc::ParamId;
use serde::Serialize;

const EXIT_FAILURE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_ENGINE: u8 = 3;
const EXIT_MISSING_COLUMN: u8 = 4;
const EXIT_CONFIG: u8 = 5;

#[derive(Parser)]
#[command(
    name = "presto",
    version,
    about = "Predict requirement violations of parametric Markov models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute closed-form expressions for each requirement.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        props: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast parameters from observations and report predicted violations.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        props: PathBuf,
        /// Expressions written by `check`; computed on the fly when omitted.
        #[arg(long)]
        expr: Option<PathBuf>,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, default_value_t = 240)]
        horizon: u32,
        #[arg(long, default_value_t = 30)]
        tau: u32,
        /// drift, robust-linear, arima or arima(p,d,q).
        #[arg(long, default_value = "arima")]
        method: ForecasterSpec,
        #[arg(long)]
        out: PathBuf,
        /// Per-minute trajectory CSV; defaults to the report path with a .csv extension.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Run a batch of synthetic scenarios and write outcomes and statistics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a batch and write only the lead-time sweep.
    Tausweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error: e.into(),
        }
    }
}

trait WithCode<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    Ok(fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

fn load_model(path: &Path) -> Result<Pdtmc, Failure> {
    parse_model(&read(path)?)
        .with_context(|| format!("in {}", path.display()))
        .code(EXIT_PARSE)
}

fn load_requirements(path: &Path) -> Result<Vec<Requirement>, Failure> {
    parse_properties(&read(path)?)
        .with_context(|| format!("in {}", path.display()))
        .code(EXIT_PARSE)
}

fn check_all(m: &Pdtmc, reqs: &[Requirement]) -> Result<Vec<PmcExpression>, Failure> {
    reqs.iter()
        .map(|r| {
            check_requirement(m, r)
                .with_context(|| format!("requirement {}", r.id))
                .code(EXIT_ENGINE)
        })
        .collect()
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_check(model: &Path, props: &Path, out: &Path) -> Result<(), Failure> {
    let m = load_model(model)?;
    let reqs = load_requirements(props)?;
    let exprs = check_all(&m, &reqs)?;
    for e in &exprs {
        println!("{}: {}", e.requirement_id, e.infix());
        for w in &e.warnings {
            eprintln!("warning: {}: {w}", e.requirement_id);
        }
    }
    let report: Vec<PmcExpressionReport> = exprs.iter().map(PmcExpressionReport::from).collect();
    write_json(out, &report)
}

/// Reads `t,<param>,...` rows; `t` must increase by one minute per row.
fn read_observations(path: &Path, needed: &[ParamId]) -> Result<ObservationSeries, Failure> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))
        .code(EXIT_PARSE)?;
    let headers: Vec<String> = rdr
        .headers()
        .code(EXIT_PARSE)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.first().map(String::as_str) != Some("t") {
        return Err(anyhow!("{}: first column must be 't'", path.display())).code(EXIT_PARSE);
    }
    let mut columns = Vec::new();
    for p in needed {
        match headers.iter().position(|h| h == p.as_str()) {
            Some(i) => columns.push((p.clone(), i)),
            None => {
                return Err(anyhow!("{}: missing column '{p}'", path.display()))
                    .code(EXIT_MISSING_COLUMN)
            }
        }
    }
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    let mut last: Option<i64> = None;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.code(EXIT_PARSE)?;
        let line = row + 2;
        let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
        let t: i64 = field(0)
            .parse()
            .with_context(|| format!("{}:{line}: bad minute '{}'", path.display(), field(0)))
            .code(EXIT_PARSE)?;
        if let Some(prev) = last {
            if t != prev + 1 {
                return Err(anyhow!(
                    "{}:{line}: minutes must increase by 1 (got {t} after {prev})",
                    path.display()
                ))
                .code(EXIT_PARSE);
            }
        }
        last = Some(t);
        for ((p, i), out) in columns.iter().zip(values.iter_mut()) {
            let v: f64 = field(*i)
                .parse()
                .with_context(|| format!("{}:{line}: bad value for '{p}'", path.display()))
                .code(EXIT_PARSE)?;
            out.push(v);
        }
    }
    let now = last
        .ok_or_else(|| anyhow!("{}: no observations", path.display()))
        .code(EXIT_PARSE)?;
    let mut obs = ObservationSeries::new(now);
    for ((p, _), v) in columns.into_iter().zip(values) {
        obs.insert(p, v);
    }
    Ok(obs)
}

#[derive(Serialize)]
struct PredictionReport<'a> {
    now: i64,
    horizon: u32,
    tau: u32,
    method: ForecasterSpec,
    results: &'a [PredictionResult],
}

fn write_trajectories(path: &Path, now: i64, results: &[PredictionResult]) -> Result<(), Failure> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend(results.iter().map(|r| r.requirement_id.clone()));
    w.write_record(&header)?;
    let h = results.first().map_or(0, |r| r.trajectory.len());
    for k in 0..h {
        let mut row = vec![(k + 1).to_string(), (now + k as i64 + 1).to_string()];
        row.extend(results.iter().map(|r| r.trajectory[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_predict(
    model: &Path,
    props: &Path,
    expr: Option<&Path>,
    obs: &Path,
    horizon: u32,
    tau: u32,
    method: ForecasterSpec,
    out: &Path,
    trajectory: Option<&Path>,
) -> Result<(), Failure> {
    if horizon == 0 {
        return Err(anyhow!("horizon must be at least 1")).code(EXIT_CONFIG);
    }
    let m = load_model(model)?;
    let reqs = load_requirements(props)?;
    let exprs: Vec<PmcExpression> = match expr {
        Some(p) => serde_json::from_str(&read(p)?)
            .with_context(|| format!("in {}", p.display()))
            .code(EXIT_PARSE)?,
        None => check_all(&m, &reqs)?,
    };
    let monitor = Monitor::new(m.params(), &reqs, &exprs).code(EXIT_ENGINE)?;
    let observations = read_observations(obs, monitor.monitored())?;
    let results = monitor
        .predict(&observations, horizon, method, tau)
        .map_err(|e| match e {
            PredictError::MissingParameterSeries(_) => Failure {
                code: EXIT_MISSING_COLUMN,
                error: e.into(),
            },
            e => Failure {
                code: EXIT_ENGINE,
                error: e.into(),
            },
        })?;
    for r in &results {
        match (r.violation_at_now, r.t_p) {
            (true, _) => println!(
                "{}: violated now (value {:.4})",
                r.requirement_id, r.value_at_now
            ),
            (false, Some(tp)) => println!(
                "{}: violation predicted in {tp} min, trigger in {} min",
                r.requirement_id,
                r.trigger_time.unwrap_or(0)
            ),
            (false, None) => println!("{}: no violation within {horizon} min", r.requirement_id),
        }
    }
    let report = PredictionReport {
        now: observations.now,
        horizon,
        tau,
        method,
        results: &results,
    };
    write_json(out, &report)?;
    let traj = trajectory.map_or_else(|| out.with_extension("csv"), Path::to_path_buf);
    write_trajectories(&traj, observations.now, &results)
}

/// Experiment settings plus optional model and requirement files, resolved
/// relative to the config file.
fn load_config(path: &Path) -> Result<(ExperimentConfig, Pdtmc, Vec<Requirement>), Failure> {
    let text = read(path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("in {}", path.display()))
        .code(EXIT_CONFIG)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| anyhow!("{}: config must be a JSON object", path.display()))
        .code(EXIT_CONFIG)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut file = |key: &str| -> Result<Option<PathBuf>, Failure> {
        match obj.remove(key) {
            None => Ok(None),
            Some(serde_json::Value::String(s)) => Ok(Some(base.join(s))),
            Some(_) => Err(anyhow!("'{key}' must be a path string")).code(EXIT_CONFIG),
        }
    };
    let model_path = file("model")?;
    let props_path = file("props")?;
    let cfg: ExperimentConfig = serde_json::from_value(value)
        .with_context(|| format!("in {}", path.display()))
        .code(EXIT_CONFIG)?;
    cfg.validate().code(EXIT_CONFIG)?;
    let model = match model_path {
        Some(p) => load_model(&p)?,
        None => fruit_picking_model(),
    };
    let reqs = match props_path {
        Some(p) => load_requirements(&p)?,
        None => parse_properties(FRUIT_PICKING_REQUIREMENTS).code(EXIT_PARSE)?,
    };
    Ok((cfg, model, reqs))
}

fn run_experiment(
    config: &Path,
    jobs: Option<usize>,
) -> Result<(ExperimentConfig, Batch), Failure> {
    let (cfg, model, reqs) = load_config(config)?;
    let exprs = check_all(&model, &reqs)?;
    let monitor = Monitor::new(model.params(), &reqs, &exprs).code(EXIT_ENGINE)?;
    let monitored: BTreeSet<&ParamId> = monitor.monitored().iter().collect();
    let generated: BTreeSet<&ParamId> = cfg.params.iter().map(|t| &t.param).collect();
    if let Some(p) = monitored.difference(&generated).next() {
        return Err(anyhow!("no trend configured for monitored parameter '{p}'")).code(EXIT_CONFIG);
    }
    let exp = Experiment::new(cfg.clone(), monitor).code(EXIT_CONFIG)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()?;
    let batch = pool.install(|| exp.run_batch()).code(EXIT_ENGINE)?;
    Ok((cfg, batch))
}

fn write_tau_sweep(path: &Path, sweep: &[TauPoint]) -> Result<(), Failure> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "requirement",
        "tau",
        "violations",
        "undesired",
        "undesired_pct",
    ])?;
    for p in sweep {
        w.write_record([
            p.requirement_id.clone(),
            p.tau.to_string(),
            p.violations.to_string(),
            p.undesired.to_string(),
            p.undesired_pct.map_or(String::new(), |v| format!("{v:.2}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_batch(path: &Path, batch: &Batch) -> Result<(), Failure> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["run", "requirement", "class", "t_p", "t_ref", "error"])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &batch.records {
        for o in &r.outcomes {
            w.write_record([
                r.run.to_string(),
                o.requirement_id.clone(),
                o.outcome.name().to_string(),
                opt(o.t_p.map(|t| t.to_string())),
                opt(o.t_ref.map(|t| t.to_string())),
                opt(o.outcome.error().map(|e| e.to_string())),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn print_summary(batch: &Batch) {
    let s = &batch.stats;
    println!(
        "{} runs, seed {}, noise level {}, {}",
        s.runs, s.seed, s.noise_level, s.forecaster
    );
    println!(
        "{:<6} {:>5} {:>5} {:>5} {:>5} {:>5} {:>8} {:>8}",
        "req", "VBP", "TP", "FP", "FN", "TN", "mean", "std"
    );
    let num = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
    for (i, r) in s.requirements.iter().enumerate() {
        println!(
            "{:<6} {:>5} {:>5} {:>5} {:>5} {:>5} {:>8} {:>8}",
            r.requirement_id,
            s.count(i, "violation-before-prediction"),
            s.count(i, "true-positive"),
            s.count(i, "false-positive"),
            s.count(i, "false-negative"),
            s.count(i, "true-negative"),
            num(r.error_mean),
            num(r.error_std)
        );
    }
}

fn create_dir(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(())
}

fn cmd_simulate(config: &Path, out: &Path, jobs: Option<usize>) -> Result<(), Failure> {
    let (cfg, batch) = run_experiment(config, jobs)?;
    create_dir(out)?;
    write_batch(&out.join("batch.csv"), &batch)?;
    write_json(&out.join("stats.json"), &batch.stats)?;
    write_tau_sweep(
        &out.join("tau_sweep.csv"),
        &tau_sweep(&batch.records, &cfg.tau_grid),
    )?;
    print_summary(&batch);
    Ok(())
}

fn cmd_tausweep(config: &Path, out: &Path, jobs: Option<usize>) -> Result<(), Failure> {
    let (cfg, batch) = run_experiment(config, jobs)?;
    create_dir(out)?;
    let sweep = tau_sweep(&batch.records, &cfg.tau_grid);
    write_tau_sweep(&out.join("tau_sweep.csv"), &sweep)?;
    println!("{:<6} {:>5} {:>10}", "req", "tau", "undesired");
    for p in &sweep {
        if let Some(pct) = p.undesired_pct {
            println!("{:<6} {:>5} {:>9.1}%", p.requirement_id, p.tau, pct);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check { model, props, out } => cmd_check(&model, &props, &out),
        Command::Predict {
            model,
            props,
            expr,
            obs,
            horizon,
            tau,
            method,
            out,
            trajectory,
        } => cmd_predict(
            &model,
            &props,
            expr.as_deref(),
            &obs,
            horizon,
            tau,
            method,
            &out,
            trajectory.as_deref(),
        ),
        Command::Simulate { config, out, jobs } => cmd_simulate(&config, &out, jobs),
        Command::Tausweep { config, out, jobs } => cmd_tausweep(&config, &out, jobs),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
