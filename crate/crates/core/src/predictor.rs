//! Forecast parameters, push the forecasts through the closed-form
//! expressions and report the first predicted violation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::PmcExpression;
use crate::forecast::{fit, ForecastError, ForecasterSpec, Series};
use crate::model::ParameterSet;
use crate::pctl::{Comparator, Requirement};
use crate::ratfunc::{CompiledFunction, ParamId, RatFuncError};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("no observations for parameter '{0}'")]
    MissingParameterSeries(ParamId),
    #[error("no expression for requirement '{0}'")]
    MissingExpression(String),
    #[error("observation series have different lengths ('{0}' has {1}, expected {2})")]
    RaggedSeries(ParamId, usize, usize),
    #[error("horizon must be at least one minute")]
    InvalidHorizon,
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    RatFunc(#[from] RatFuncError),
}

/// Per-parameter observations on a shared one-minute clock.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationSeries {
    pub params: BTreeMap<ParamId, Series>,
    /// Minute of the last observation.
    pub now: i64,
}

impl ObservationSeries {
    pub fn new(now: i64) -> Self {
        ObservationSeries {
            params: BTreeMap::new(),
            now,
        }
    }

    pub fn insert(&mut self, p: ParamId, values: Vec<f64>) {
        self.params.insert(p, Series::new(values));
    }

    pub fn len(&self) -> usize {
        self.params.values().next().map_or(0, Series::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Predicted evolution of one requirement over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub requirement_id: String,
    pub comparator: Comparator,
    pub threshold: f64,
    pub horizon: u32,
    pub tau: u32,
    pub value_at_now: f64,
    pub violation_at_now: bool,
    /// First minute after now at which the requirement is predicted to fail.
    pub t_p: Option<u32>,
    /// Minutes from now until adaptation should start; 0 means immediately.
    pub trigger_time: Option<u32>,
    /// Predicted property value for minutes `1..=horizon`.
    pub trajectory: Vec<f64>,
}

/// How a prediction compares with what actually happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum Outcome {
    ViolationBeforePrediction,
    /// `error = t_p - t_ref`; positive means predicted later than actual.
    TruePositive {
        error: i64,
    },
    FalsePositive,
    FalseNegative,
    TrueNegative,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::ViolationBeforePrediction => "violation-before-prediction",
            Outcome::TruePositive { .. } => "true-positive",
            Outcome::FalsePositive => "false-positive",
            Outcome::FalseNegative => "false-negative",
            Outcome::TrueNegative => "true-negative",
        }
    }

    pub fn error(&self) -> Option<i64> {
        match self {
            Outcome::TruePositive { error } => Some(*error),
            _ => None,
        }
    }
}

/// Classifies a prediction against the actual first violation minute
/// `t_ref` (relative to now; zero or negative if it happened in the past).
pub fn classify(result: &PredictionResult, t_ref: Option<i64>, h: u32) -> Outcome {
    let t_ref = t_ref.filter(|t| *t <= i64::from(h));
    if result.violation_at_now || t_ref.is_some_and(|t| t <= 0) {
        return Outcome::ViolationBeforePrediction;
    }
    match (result.t_p, t_ref) {
        (Some(tp), Some(tr)) => Outcome::TruePositive {
            error: i64::from(tp) - tr,
        },
        (Some(_), None) => Outcome::FalsePositive,
        (None, Some(_)) => Outcome::FalseNegative,
        (None, None) => Outcome::TrueNegative,
    }
}

pub fn trigger_time(t_p: u32, tau: u32) -> u32 {
    t_p.saturating_sub(tau)
}

#[derive(Debug, Clone)]
struct Compiled {
    id: String,
    comparator: Comparator,
    threshold: f64,
    function: CompiledFunction,
}

/// Requirements with their expressions compiled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Monitor {
    /// Parameters fed by observations, in evaluation order.
    monitored: Vec<ParamId>,
    domains: Vec<Option<(f64, f64)>>,
    constants: Vec<f64>,
    items: Vec<Compiled>,
}

impl Monitor {
    pub fn new(
        params: &ParameterSet,
        reqs: &[Requirement],
        exprs: &[PmcExpression],
    ) -> Result<Self, PredictError> {
        let mut used: Vec<ParamId> = Vec::new();
        let mut chosen = Vec::new();
        for r in reqs {
            let e = exprs
                .iter()
                .find(|e| e.requirement_id == r.id)
                .ok_or_else(|| PredictError::MissingExpression(r.id.clone()))?;
            for p in e.function.params() {
                if !used.contains(&p) {
                    used.push(p);
                }
            }
            chosen.push((r, e));
        }
        used.sort();
        let mut monitored = Vec::new();
        let mut domains = Vec::new();
        let mut constant_ids = Vec::new();
        let mut constants = Vec::new();
        for p in used {
            match params.get(&p) {
                Some(d) if d.is_constant() => {
                    constant_ids.push(p);
                    constants.push(d.bounds().0);
                }
                Some(d) => {
                    monitored.push(p);
                    domains.push(Some(d.bounds()));
                }
                None => {
                    monitored.push(p);
                    domains.push(None);
                }
            }
        }
        let order: Vec<ParamId> = monitored.iter().chain(&constant_ids).cloned().collect();
        let items = chosen
            .into_iter()
            .map(|(r, e)| {
                Ok(Compiled {
                    id: r.id.clone(),
                    comparator: r.comparator,
                    threshold: r.threshold,
                    function: e.function.compile(&order)?,
                })
            })
            .collect::<Result<_, PredictError>>()?;
        Ok(Monitor {
            monitored,
            domains,
            constants,
            items,
        })
    }

    /// Parameters whose values must be supplied, in the order `evaluate`
    /// expects them.
    pub fn monitored(&self) -> &[ParamId] {
        &self.monitored
    }

    pub fn requirement_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|c| c.id.as_str())
    }

    /// Clamps a value of the `i`-th monitored parameter into its domain.
    pub fn clamp(&self, i: usize, v: f64) -> f64 {
        match self.domains[i] {
            Some((lo, hi)) => v.clamp(lo, hi),
            None => v,
        }
    }

    /// Property values, one per requirement, at the given monitored values.
    pub fn evaluate(&self, monitored: &[f64]) -> Result<Vec<f64>, PredictError> {
        let mut x = Vec::with_capacity(monitored.len() + self.constants.len());
        x.extend_from_slice(monitored);
        x.extend_from_slice(&self.constants);
        self.items
            .iter()
            .map(|c| Ok(c.function.evaluate(&x)?))
            .collect()
    }

    /// Whether requirement `i` is violated by `value`.
    pub fn violated(&self, i: usize, value: f64) -> bool {
        let c = &self.items[i];
        !c.comparator.satisfied(value, c.threshold)
    }

    /// First minute (1-based index into `values`) at which requirement `i`
    /// fails.
    pub fn first_violation(&self, i: usize, values: &[f64]) -> Option<usize> {
        values
            .iter()
            .position(|v| self.violated(i, *v))
            .map(|k| k + 1)
    }

    pub fn predict(
        &self,
        obs: &ObservationSeries,
        h: u32,
        spec: ForecasterSpec,
        tau: u32,
    ) -> Result<Vec<PredictionResult>, PredictError> {
        if h == 0 {
            return Err(PredictError::InvalidHorizon);
        }
        let len = obs.len();
        let mut now = Vec::with_capacity(self.monitored.len());
        let mut paths = Vec::with_capacity(self.monitored.len());
        for (i, p) in self.monitored.iter().enumerate() {
            let s = obs
                .params
                .get(p)
                .ok_or_else(|| PredictError::MissingParameterSeries(p.clone()))?;
            if s.len() != len {
                return Err(PredictError::RaggedSeries(p.clone(), s.len(), len));
            }
            let last = s
                .last()
                .ok_or_else(|| PredictError::MissingParameterSeries(p.clone()))?;
            now.push(self.clamp(i, last));
            let path: Vec<f64> = fit(spec, s)?
                .forecast(h as usize)
                .into_iter()
                .map(|v| self.clamp(i, v))
                .collect();
            paths.push(path);
        }

        let at_now = self.evaluate(&now)?;
        let mut trajectories = vec![Vec::with_capacity(h as usize); self.items.len()];
        let mut point = vec![0.0; self.monitored.len()];
        for k in 0..h as usize {
            for (slot, path) in point.iter_mut().zip(&paths) {
                *slot = path[k];
            }
            for (traj, v) in trajectories.iter_mut().zip(self.evaluate(&point)?) {
                traj.push(v);
            }
        }

        Ok(self
            .items
            .iter()
            .enumerate()
            .zip(trajectories)
            .map(|((i, c), trajectory)| {
                let violation_at_now = self.violated(i, at_now[i]);
                let t_p = if violation_at_now {
                    None
                } else {
                    self.first_violation(i, &trajectory).map(|k| k as u32)
                };
                PredictionResult {
                    requirement_id: c.id.clone(),
                    comparator: c.comparator,
                    threshold: c.threshold,
                    horizon: h,
                    tau,
                    value_at_now: at_now[i],
                    violation_at_now,
                    t_p,
                    trigger_time: t_p.map(|t| trigger_time(t, tau)),
                    trajectory,
                }
            })
            .collect())
    }
}

/// One-shot prediction; see [`Monitor::predict`].
pub fn predict(
    params: &ParameterSet,
    reqs: &[Requirement],
    exprs: &[PmcExpression],
    obs: &ObservationSeries,
    h: u32,
    spec: ForecasterSpec,
    tau: u32,
) -> Result<Vec<PredictionResult>, PredictError> {
    Monitor::new(params, reqs, exprs)?.predict(obs, h, spec, tau)
}
