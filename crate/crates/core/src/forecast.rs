//! Point forecasting of parameter time series.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAX_MA_ORDER: usize = 2;
const MA_ITERATIONS: usize = 50;
const MA_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("series has {len} values but at least {needed} are required")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid forecaster specification '{0}'")]
    InvalidSpec(String),
}

/// Evenly spaced observations of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub values: Vec<f64>,
    /// Minutes per step.
    #[serde(default = "one_minute")]
    pub cadence: f64,
}

fn one_minute() -> f64 {
    1.0
}

impl Series {
    pub fn new(values: Vec<f64>) -> Self {
        Series {
            values,
            cadence: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

impl From<Vec<f64>> for Series {
    fn from(values: Vec<f64>) -> Self {
        Series::new(values)
    }
}

/// Forecasting method. Written as `drift`, `robust-linear` or `arima(p,d,q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ForecasterSpec {
    Drift,
    RobustLinear,
    Arima { p: usize, d: usize, q: usize },
}

impl Default for ForecasterSpec {
    fn default() -> Self {
        ForecasterSpec::Arima { p: 1, d: 1, q: 0 }
    }
}

impl ForecasterSpec {
    pub fn min_len(&self) -> usize {
        match self {
            ForecasterSpec::Arima { p, d, q } => (p + d + q + 2).max(4),
            _ => 4,
        }
    }

    fn validate(self) -> Result<Self, ForecastError> {
        match self {
            ForecasterSpec::Arima { d, q, .. } if d > 2 || q > MAX_MA_ORDER => {
                Err(ForecastError::InvalidSpec(self.to_string()))
            }
            _ => Ok(self),
        }
    }
}

impl fmt::Display for ForecasterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForecasterSpec::Drift => f.write_str("drift"),
            ForecasterSpec::RobustLinear => f.write_str("robust-linear"),
            ForecasterSpec::Arima { p, d, q } => write!(f, "arima({p},{d},{q})"),
        }
    }
}

impl FromStr for ForecasterSpec {
    type Err = ForecastError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ForecastError::InvalidSpec(s.to_string());
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "drift" => return Ok(ForecasterSpec::Drift),
            "robust-linear" | "theil-sen" => return Ok(ForecasterSpec::RobustLinear),
            "arima" => return Ok(ForecasterSpec::default()),
            _ => {}
        }
        let inner = t
            .strip_prefix("arima(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let orders: Vec<usize> = inner
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        match orders[..] {
            [p, d, q] => ForecasterSpec::Arima { p, d, q }.validate(),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ForecasterSpec {
    type Error = ForecastError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ForecasterSpec> for String {
    fn from(s: ForecasterSpec) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    /// `y(n-1+k) = last + k * slope`
    Drift {
        last: f64,
        slope: f64,
    },
    /// `y(t) = intercept + slope * t`, with `t` counted from the first value.
    Line {
        intercept: f64,
        slope: f64,
        n: usize,
    },
    Arima(ArimaFit),
}

#[derive(Debug, Clone, PartialEq)]
struct ArimaFit {
    /// Last value of each differencing level, shallowest first.
    anchors: Vec<f64>,
    /// The differenced series.
    w: Vec<f64>,
    residuals: Vec<f64>,
    intercept: f64,
    ar: Vec<f64>,
    ma: Vec<f64>,
}

/// A forecaster fitted to one series.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedForecaster {
    pub spec: ForecasterSpec,
    /// Set when the requested model could not be identified and drift was
    /// used instead.
    pub degenerate: bool,
    pub residual_variance: f64,
    model: Model,
}

pub fn fit(spec: ForecasterSpec, s: &Series) -> Result<FittedForecaster, ForecastError> {
    fit_values(spec, &s.values)
}

pub fn fit_values(spec: ForecasterSpec, y: &[f64]) -> Result<FittedForecaster, ForecastError> {
    let spec = spec.validate()?;
    let needed = spec.min_len();
    if y.len() < needed {
        return Err(ForecastError::SeriesTooShort {
            len: y.len(),
            needed,
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(ForecastError::NonFinite(i));
    }
    let fitted = match spec {
        ForecasterSpec::Drift => drift(spec, y, false),
        ForecasterSpec::RobustLinear => theil_sen(spec, y),
        ForecasterSpec::Arima { p, d, q } => arima(spec, y, p, d, q),
    };
    Ok(fitted)
}

fn drift(spec: ForecasterSpec, y: &[f64], degenerate: bool) -> FittedForecaster {
    let n = y.len();
    let slope = (y[n - 1] - y[0]) / (n - 1) as f64;
    let residual_variance = variance(y.windows(2).map(|w| w[1] - w[0] - slope));
    FittedForecaster {
        spec,
        degenerate,
        residual_variance,
        model: Model::Drift {
            last: y[n - 1],
            slope,
        },
    }
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    let (lower, mid, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let mid = *mid;
    if n % 2 == 1 {
        mid
    } else {
        let below = lower
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .expect("n >= 2");
        (below + mid) / 2.0
    }
}

fn theil_sen(spec: ForecasterSpec, y: &[f64]) -> FittedForecaster {
    let n = y.len();
    let mut slopes = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            slopes.push((y[j] - y[i]) / (j - i) as f64);
        }
    }
    let slope = median(&mut slopes);
    let mut offsets: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, v)| v - slope * i as f64)
        .collect();
    let intercept = median(&mut offsets);
    let residual_variance = variance(
        y.iter()
            .enumerate()
            .map(|(i, v)| v - intercept - slope * i as f64),
    );
    FittedForecaster {
        spec,
        degenerate: false,
        residual_variance,
        model: Model::Line {
            intercept,
            slope,
            n,
        },
    }
}

fn variance(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

fn arima(spec: ForecasterSpec, y: &[f64], p: usize, d: usize, q: usize) -> FittedForecaster {
    let mut anchors = Vec::with_capacity(d);
    let mut w = y.to_vec();
    for _ in 0..d {
        anchors.push(*w.last().expect("long enough"));
        w = w.windows(2).map(|x| x[1] - x[0]).collect();
    }
    let var_w = variance(w.iter().copied());
    let scale = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
    if p + q > 0 && var_w <= 1e-24 + 1e-20 * scale {
        return drift(spec, y, true);
    }
    let fitted = if q == 0 {
        fit_ar(&w, p).map(|(c, ar)| {
            let e = residuals(&w, c, &ar, &[]);
            (c, ar, Vec::new(), e)
        })
    } else {
        fit_arma(&w, p, q)
    };
    match fitted.filter(|(_, ar, ma, _)| {
        inside_unit_circle(ar) && inside_unit_circle(&ma.iter().map(|m| -m).collect::<Vec<_>>())
    }) {
        Some((intercept, ar, ma, e)) => {
            let start = p.max(q);
            let residual_variance = variance(e[start..].iter().copied());
            FittedForecaster {
                spec,
                degenerate: false,
                residual_variance,
                model: Model::Arima(ArimaFit {
                    anchors,
                    w,
                    residuals: e,
                    intercept,
                    ar,
                    ma,
                }),
            }
        }
        None => drift(spec, y, true),
    }
}

/// Whether every root of `z^k - c1 z^(k-1) - ... - ck` lies strictly inside
/// the unit circle, i.e. the recursion `x(t) = sum ci x(t-i)` is stable.
fn inside_unit_circle(c: &[f64]) -> bool {
    let k = c.len();
    if k == 0 {
        return true;
    }
    let mut companion = DMatrix::zeros(k, k);
    for (i, v) in c.iter().enumerate() {
        companion[(0, i)] = *v;
    }
    for i in 1..k {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .all(|z| z.norm() < 1.0 - 1e-9)
}

/// Least squares for `y = X beta`; `None` if the solve fails.
fn least_squares(rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Option<Vec<f64>> {
    let k = rows.first()?.len();
    let n = rows.len();
    if n < k {
        return None;
    }
    let x = DMatrix::from_row_iterator(n, k, rows.into_iter().flatten());
    let b = DVector::from_vec(rhs);
    let beta = x.svd(true, true).solve(&b, 1e-12).ok()?;
    beta.iter()
        .all(|v| v.is_finite())
        .then(|| beta.iter().copied().collect())
}

fn fit_ar(w: &[f64], p: usize) -> Option<(f64, Vec<f64>)> {
    if p == 0 {
        return Some((w.iter().sum::<f64>() / w.len() as f64, Vec::new()));
    }
    let rows: Vec<Vec<f64>> = (p..w.len())
        .map(|t| {
            std::iter::once(1.0)
                .chain((1..=p).map(|i| w[t - i]))
                .collect()
        })
        .collect();
    let beta = least_squares(rows, w[p..].to_vec())?;
    Some((beta[0], beta[1..].to_vec()))
}

/// One-step prediction errors of the ARMA recursion, zero before enough
/// history is available.
fn residuals(w: &[f64], c: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let start = ar.len().max(ma.len());
    let mut e = vec![0.0; w.len()];
    for t in start..w.len() {
        let pred = c
            + ar.iter()
                .enumerate()
                .map(|(i, a)| a * w[t - 1 - i])
                .sum::<f64>()
            + ma.iter()
                .enumerate()
                .map(|(j, m)| m * e[t - 1 - j])
                .sum::<f64>();
        e[t] = w[t] - pred;
    }
    e
}

type ArmaFit = (f64, Vec<f64>, Vec<f64>, Vec<f64>);

/// Moving-average terms by iterated regression on lagged residuals, seeded
/// from a long autoregression.
fn fit_arma(w: &[f64], p: usize, q: usize) -> Option<ArmaFit> {
    let long = (p + q + 3).min(w.len() / 3).max(p + q);
    let (c0, ar0) = fit_ar(w, long)?;
    let mut e = residuals(w, c0, &ar0, &[]);
    let mut params: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let start = long.max(p).max(q);
    for _ in 0..MA_ITERATIONS {
        let rows: Vec<Vec<f64>> = (start..w.len())
            .map(|t| {
                std::iter::once(1.0)
                    .chain((1..=p).map(|i| w[t - i]))
                    .chain((1..=q).map(|j| e[t - j]))
                    .collect()
            })
            .collect();
        let Some(beta) = least_squares(rows, w[start..].to_vec()) else {
            break;
        };
        let next = (beta[0], beta[1..=p].to_vec(), beta[p + 1..].to_vec());
        let e_next = residuals(w, next.0, &next.1, &next.2);
        if e_next.iter().any(|x| !x.is_finite() || x.abs() > 1e12) {
            break;
        }
        let converged = params.as_ref().is_some_and(|(c, a, m)| {
            std::iter::once(c - next.0)
                .chain(a.iter().zip(&next.1).map(|(x, y)| x - y))
                .chain(m.iter().zip(&next.2).map(|(x, y)| x - y))
                .all(|d| d.abs() < MA_TOLERANCE)
        });
        e = e_next;
        params = Some(next);
        if converged {
            break;
        }
    }
    let (c, ar, ma) = params?;
    let e = residuals(w, c, &ar, &ma);
    Some((c, ar, ma, e))
}

impl FittedForecaster {
    /// Point forecasts for steps `1..=h`.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        match &self.model {
            Model::Drift { last, slope } => (1..=h).map(|k| last + slope * k as f64).collect(),
            Model::Line {
                intercept,
                slope,
                n,
            } => (1..=h)
                .map(|k| intercept + slope * (n - 1 + k) as f64)
                .collect(),
            Model::Arima(a) => a.forecast(h),
        }
    }
}

impl ArimaFit {
    fn forecast(&self, h: usize) -> Vec<f64> {
        let mut w = self.w.clone();
        let mut e = self.residuals.clone();
        let n = w.len();
        for t in n..n + h {
            let v = self.intercept
                + self
                    .ar
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * w[t - 1 - i])
                    .sum::<f64>()
                + self
                    .ma
                    .iter()
                    .enumerate()
                    .map(|(j, m)| m * e[t - 1 - j])
                    .sum::<f64>();
            w.push(v);
            e.push(0.0);
        }
        let mut out = w[n..].to_vec();
        for anchor in self.anchors.iter().rev() {
            let mut level = *anchor;
            for v in out.iter_mut() {
                level += *v;
                *v = level;
            }
        }
        out
    }
}

/// Fits and forecasts in one call.
pub fn forecast(spec: ForecasterSpec, s: &Series, h: usize) -> Result<Vec<f64>, ForecastError> {
    Ok(fit(spec, s)?.forecast(h))
}
