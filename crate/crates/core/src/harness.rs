//! Synthetic degradation scenarios and batch statistics over them.
//!
//! Each run draws one monotone (or constant) trend per monitored parameter,
//! optionally perturbs it with measurement noise, shows the predictor the
//! first `history` minutes and compares the prediction with the clean ground
//! truth over the following `horizon` minutes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::ForecasterSpec;
use crate::predictor::{
    classify, Monitor, ObservationSeries, Outcome, PredictError, PredictionResult,
};
use crate::ratfunc::ParamId;

pub const NOISE_LEVELS: [u32; 6] = [0, 2, 4, 6, 8, 10];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSpec {
    pub lo: f64,
    pub hi: f64,
    pub direction: Direction,
    pub total_len: usize,
}

/// Endpoints `a`, `b` drawn uniformly from `[lo, hi]`, then `total_len`
/// uniform draws between them sorted along `direction`.
pub fn generate_trend<R: Rng + ?Sized>(spec: &TrendSpec, rng: &mut R) -> Vec<f64> {
    let a = rng.random_range(spec.lo..=spec.hi);
    let b = rng.random_range(spec.lo..=spec.hi);
    if spec.direction == Direction::Constant {
        return vec![a; spec.total_len];
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let mut v: Vec<f64> = (0..spec.total_len)
        .map(|_| {
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect();
    v.sort_by(f64::total_cmp);
    if spec.direction == Direction::Decreasing {
        v.reverse();
    }
    v
}

/// What kind of quantity a parameter is; fixes its noise scale and the
/// physical limits applied after noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseClass {
    /// Capped at 1.
    Probability,
    /// Seconds, floored at 1.
    Time,
    /// Joules, floored at 0.3.
    Energy,
}

impl NoiseClass {
    pub fn sigma_per_level(self) -> f64 {
        match self {
            NoiseClass::Probability => 0.01,
            NoiseClass::Time => 1.0,
            NoiseClass::Energy => 0.3,
        }
    }

    pub fn limit(self, v: f64) -> f64 {
        match self {
            NoiseClass::Probability => v.min(1.0),
            NoiseClass::Time => v.max(1.0),
            NoiseClass::Energy => v.max(0.3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: u32,
    pub class: NoiseClass,
}

impl NoiseSpec {
    pub fn sigma(&self) -> f64 {
        f64::from(self.level) * self.class.sigma_per_level()
    }
}

/// Adds zero-mean Gaussian noise, then applies the class limits. Level 0
/// returns the input unchanged.
pub fn add_noise<R: Rng + ?Sized>(s: &[f64], noise: &NoiseSpec, rng: &mut R) -> Vec<f64> {
    if noise.level == 0 {
        return s.to_vec();
    }
    let normal = Normal::new(0.0, noise.sigma()).expect("finite positive sigma");
    s.iter()
        .map(|v| noise.class.limit(v + normal.sample(rng)))
        .collect()
}

/// Range, trend and noise class for one monitored parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTrend {
    pub param: ParamId,
    pub range: [f64; 2],
    pub direction: Direction,
    pub noise: NoiseClass,
}

/// Trends of the fruit-picking robot: success probability falls, failure
/// probability, times and energies rise.
pub fn fruit_picking_trends() -> Vec<ParamTrend> {
    let p = |n: &str| ParamId::new(n).expect("valid name");
    let mut out = vec![
        ParamTrend {
            param: p("alpha"),
            range: [0.7, 0.99],
            direction: Direction::Decreasing,
            noise: NoiseClass::Probability,
        },
        ParamTrend {
            param: p("beta"),
            range: [0.01, 0.2],
            direction: Direction::Increasing,
            noise: NoiseClass::Probability,
        },
    ];
    for i in 0..3 {
        out.push(ParamTrend {
            param: p(&format!("t{i}")),
            range: [1.0, 30.0],
            direction: Direction::Increasing,
            noise: NoiseClass::Time,
        });
    }
    for i in 0..3 {
        out.push(ParamTrend {
            param: p(&format!("e{i}")),
            range: [0.3, 4.5],
            direction: Direction::Increasing,
            noise: NoiseClass::Energy,
        });
    }
    out
}

fn default_seed() -> u64 {
    42
}
fn default_runs() -> usize {
    200
}
fn default_horizon() -> u32 {
    240
}
fn default_history() -> usize {
    360
}
fn default_tau() -> u32 {
    30
}
fn default_tau_grid() -> Vec<u32> {
    (0..=240).step_by(10).collect()
}
fn default_constant_probability() -> f64 {
    0.2
}
fn default_bin_width() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default = "default_history")]
    pub history: usize,
    #[serde(default)]
    pub forecaster: ForecasterSpec,
    #[serde(default)]
    pub noise_level: u32,
    #[serde(default = "default_tau")]
    pub tau: u32,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: Vec<u32>,
    /// Probability that a parameter stays constant for a whole run.
    #[serde(default = "default_constant_probability")]
    pub constant_probability: f64,
    #[serde(default = "default_bin_width")]
    pub histogram_bin_width: f64,
    #[serde(default = "fruit_picking_trends")]
    pub params: Vec<ParamTrend>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.history < self.forecaster.min_len() {
            return bad(format!(
                "history of {} minutes is too short for {}",
                self.history, self.forecaster
            ));
        }
        if !NOISE_LEVELS.contains(&self.noise_level) {
            return bad(format!("noise level must be one of {NOISE_LEVELS:?}"));
        }
        if !(0.0..=1.0).contains(&self.constant_probability) {
            return bad("constant_probability must lie in [0, 1]".into());
        }
        if self.histogram_bin_width.is_nan() || self.histogram_bin_width <= 0.0 {
            return bad("histogram_bin_width must be positive".into());
        }
        for t in &self.params {
            let [lo, hi] = t.range;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("range of '{}' must satisfy lo < hi", t.param));
            }
        }
        Ok(())
    }

    pub fn total_len(&self) -> usize {
        self.history + self.horizon as usize
    }
}

/// A configured experiment ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    monitor: Monitor,
    /// Trend for each monitored parameter, in monitor order.
    trends: Vec<ParamTrend>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, monitor: Monitor) -> Result<Self, HarnessError> {
        config.validate()?;
        let trends = monitor
            .monitored()
            .iter()
            .map(|p| {
                config
                    .params
                    .iter()
                    .find(|t| &t.param == p)
                    .cloned()
                    .ok_or_else(|| {
                        HarnessError::InvalidConfig(format!("no trend given for parameter '{p}'"))
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Experiment {
            config,
            monitor,
            trends,
        })
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    fn rng(&self, run: usize, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(2 * run as u64 + purpose);
        rng
    }

    /// Clean and observed series for every monitored parameter.
    ///
    /// Trends and noise come from separate substreams, so the clean trends of
    /// a run do not depend on the noise level.
    pub fn scenario(&self, run: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut trend_rng = self.rng(run, 0);
        let mut noise_rng = self.rng(run, 1);
        let len = self.config.total_len();
        let clean: Vec<Vec<f64>> = self
            .trends
            .iter()
            .map(|t| {
                let constant = trend_rng.random_bool(self.config.constant_probability);
                let spec = TrendSpec {
                    lo: t.range[0],
                    hi: t.range[1],
                    direction: if constant {
                        Direction::Constant
                    } else {
                        t.direction
                    },
                    total_len: len,
                };
                generate_trend(&spec, &mut trend_rng)
            })
            .collect();
        let noisy = self
            .trends
            .iter()
            .zip(&clean)
            .map(|(t, s)| {
                let noise = NoiseSpec {
                    level: self.config.noise_level,
                    class: t.noise,
                };
                add_noise(s, &noise, &mut noise_rng)
            })
            .collect();
        (clean, noisy)
    }

    /// Property values per requirement at every minute of the series.
    pub fn property_trajectories(
        &self,
        series: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>, HarnessError> {
        let len = series.first().map_or(0, Vec::len);
        let n_req = self.monitor.requirement_ids().count();
        let mut out = vec![Vec::with_capacity(len); n_req];
        let mut point = vec![0.0; series.len()];
        for m in 0..len {
            for (i, (slot, s)) in point.iter_mut().zip(series).enumerate() {
                *slot = self.monitor.clamp(i, s[m]);
            }
            for (traj, v) in out.iter_mut().zip(self.monitor.evaluate(&point)?) {
                traj.push(v);
            }
        }
        Ok(out)
    }

    pub fn trace(&self, run: usize) -> Result<RunTrace, HarnessError> {
        let (clean, noisy) = self.scenario(run);
        let history = self.config.history;
        let mut obs = ObservationSeries::new(history as i64);
        for (t, s) in self.trends.iter().zip(&noisy) {
            obs.insert(t.param.clone(), s[..history].to_vec());
        }
        let predictions = self.monitor.predict(
            &obs,
            self.config.horizon,
            self.config.forecaster,
            self.config.tau,
        )?;
        let truth = self.property_trajectories(&clean)?;
        let outcomes = predictions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let t_ref = self
                    .monitor
                    .first_violation(i, &truth[i])
                    .map(|m| m as i64 - history as i64);
                RunOutcome {
                    requirement_id: p.requirement_id.clone(),
                    outcome: classify(p, t_ref, self.config.horizon),
                    t_p: p.t_p,
                    t_ref,
                }
            })
            .collect();
        Ok(RunTrace {
            run,
            params: self.trends.iter().map(|t| t.param.clone()).collect(),
            clean,
            observed: noisy,
            truth,
            predictions,
            outcomes,
        })
    }

    pub fn run(&self, run: usize) -> Result<RunRecord, HarnessError> {
        let t = self.trace(run)?;
        Ok(RunRecord {
            run,
            outcomes: t.outcomes,
        })
    }

    /// Runs `0..runs` in parallel and aggregates in run order.
    pub fn run_batch(&self) -> Result<Batch, HarnessError> {
        let records = (0..self.config.runs)
            .into_par_iter()
            .map(|r| self.run(r))
            .collect::<Result<Vec<_>, _>>()?;
        let stats = BatchStats::from_records(&self.config, &records);
        Ok(Batch { records, stats })
    }
}

/// Everything needed to plot one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub run: usize,
    pub params: Vec<ParamId>,
    pub clean: Vec<Vec<f64>>,
    pub observed: Vec<Vec<f64>>,
    /// Property value per requirement at every minute, from clean values.
    pub truth: Vec<Vec<f64>>,
    pub predictions: Vec<PredictionResult>,
    pub outcomes: Vec<RunOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub requirement_id: String,
    pub outcome: Outcome,
    pub t_p: Option<u32>,
    /// Actual first violation relative to now; `<= 0` if in the history.
    pub t_ref: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub outcomes: Vec<RunOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub records: Vec<RunRecord>,
    pub stats: BatchStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementStats {
    pub requirement_id: String,
    /// Runs per outcome class; the classes partition the batch.
    pub counts: BTreeMap<String, usize>,
    /// Runs with an actual violation inside the horizon.
    pub in_horizon: usize,
    pub error_mean: Option<f64>,
    pub error_std: Option<f64>,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub seed: u64,
    pub runs: usize,
    pub noise_level: u32,
    pub forecaster: ForecasterSpec,
    pub requirements: Vec<RequirementStats>,
}

const CLASSES: [&str; 5] = [
    "violation-before-prediction",
    "true-positive",
    "false-positive",
    "false-negative",
    "true-negative",
];

pub fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() > 1)
        .then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

fn histogram(errors: &[f64], width: f64) -> Vec<HistogramBin> {
    if errors.is_empty() {
        return Vec::new();
    }
    let bin = |e: f64| (e / width).floor() as i64;
    let lo = errors.iter().map(|e| bin(*e)).min().expect("non-empty");
    let hi = errors.iter().map(|e| bin(*e)).max().expect("non-empty");
    (lo..=hi)
        .map(|b| HistogramBin {
            lo: b as f64 * width,
            hi: (b + 1) as f64 * width,
            count: errors.iter().filter(|e| bin(**e) == b).count(),
        })
        .collect()
}

impl BatchStats {
    pub fn from_records(cfg: &ExperimentConfig, records: &[RunRecord]) -> Self {
        let ids: Vec<String> = records
            .first()
            .map(|r| {
                r.outcomes
                    .iter()
                    .map(|o| o.requirement_id.clone())
                    .collect()
            })
            .unwrap_or_default();
        let requirements = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| {
                let mut counts: BTreeMap<String, usize> =
                    CLASSES.iter().map(|c| (c.to_string(), 0)).collect();
                let mut errors = Vec::new();
                let mut in_horizon = 0;
                for r in records {
                    let o = &r.outcomes[i];
                    *counts.entry(o.outcome.name().to_string()).or_default() += 1;
                    if matches!(
                        o.outcome,
                        Outcome::TruePositive { .. } | Outcome::FalseNegative
                    ) {
                        in_horizon += 1;
                    }
                    if let Some(e) = o.outcome.error() {
                        errors.push(e as f64);
                    }
                }
                let (error_mean, error_std) = mean_std(&errors);
                RequirementStats {
                    requirement_id: id,
                    counts,
                    in_horizon,
                    error_mean,
                    error_std,
                    histogram: histogram(&errors, cfg.histogram_bin_width),
                }
            })
            .collect();
        BatchStats {
            seed: cfg.seed,
            runs: records.len(),
            noise_level: cfg.noise_level,
            forecaster: cfg.forecaster,
            requirements,
        }
    }

    pub fn count(&self, requirement: usize, class: &str) -> usize {
        self.requirements[requirement]
            .counts
            .get(class)
            .copied()
            .unwrap_or(0)
    }
}

/// Share of in-horizon violations for which a trigger offset `tau` is
/// undesired: it leaves at most an hour of lead time, `t_p - tau <= 60`, or it
/// is smaller than the prediction error, `tau < |t_p - t_ref|`. Missed
/// violations count as undesired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub requirement_id: String,
    pub tau: u32,
    pub violations: usize,
    pub undesired: usize,
    pub undesired_pct: Option<f64>,
}

pub fn undesired(t_p: u32, t_ref: i64, tau: u32) -> bool {
    i64::from(t_p) - i64::from(tau) <= 60 || i64::from(tau) < (i64::from(t_p) - t_ref).abs()
}

pub fn tau_sweep(records: &[RunRecord], taus: &[u32]) -> Vec<TauPoint> {
    let n_req = records.first().map_or(0, |r| r.outcomes.len());
    let mut out = Vec::new();
    for i in 0..n_req {
        let id = records[0].outcomes[i].requirement_id.clone();
        let cases: Vec<(Option<u32>, i64)> = records
            .iter()
            .map(|r| &r.outcomes[i])
            .filter_map(|o| match o.outcome {
                Outcome::TruePositive { .. } | Outcome::FalseNegative => Some((o.t_p, o.t_ref?)),
                _ => None,
            })
            .collect();
        for &tau in taus {
            let bad = cases
                .iter()
                .filter(|(tp, tr)| tp.is_none_or(|tp| undesired(tp, *tr, tau)))
                .count();
            out.push(TauPoint {
                requirement_id: id.clone(),
                tau,
                violations: cases.len(),
                undesired: bad,
                undesired_pct: (!cases.is_empty()).then(|| 100.0 * bad as f64 / cases.len() as f64),
            });
        }
    }
    out
}
