//! Numeric ground truth: instantiate a pDTMC at a valuation and solve the
//! query directly, by Gaussian elimination or by value iteration.

use super::{sat, EngineError};
use crate::model::{Pdtmc, StateId, Valuation};
use crate::pctl::{PathFormula, Property, RewardKind, StateFormula};

pub const VI_TOLERANCE: f64 = 1e-12;
pub const VI_MAX_ITERATIONS: usize = 1_000_000;
const PIVOT_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    Gaussian,
    ValueIteration,
    /// Gaussian elimination, falling back to value iteration when the system
    /// is numerically singular.
    #[default]
    Auto,
}

/// A DTMC with concrete probabilities and one instantiated reward vector.
#[derive(Debug, Clone)]
pub struct NumericChain {
    pub init: StateId,
    pub rows: Vec<Vec<(StateId, f64)>>,
}

pub fn instantiate(m: &Pdtmc, v: &Valuation) -> Result<NumericChain, EngineError> {
    let v = v.clone().with_constants(m.params());
    let mut rows = Vec::with_capacity(m.num_states());
    for s in 0..m.num_states() {
        let mut row = Vec::with_capacity(m.row(s).len());
        for (t, f) in m.row(s) {
            let p = f.evaluate(&v.values)?;
            if p != 0.0 {
                row.push((*t, p));
            }
        }
        rows.push(row);
    }
    Ok(NumericChain {
        init: m.init(),
        rows,
    })
}

fn instantiate_rewards(m: &Pdtmc, name: &str, v: &Valuation) -> Result<Vec<f64>, EngineError> {
    let rwd = m
        .reward(name)
        .ok_or_else(|| EngineError::UnknownRewardStructure(name.to_string()))?;
    let v = v.clone().with_constants(m.params());
    (0..m.num_states())
        .map(|s| Ok(rwd.reward(s).evaluate(&v.values)?))
        .collect()
}

impl NumericChain {
    fn n(&self) -> usize {
        self.rows.len()
    }

    /// States that reach `target` with positive probability through
    /// `allowed` states.
    fn reach_positive(&self, target: &[bool], allowed: &[bool]) -> Vec<bool> {
        let n = self.n();
        let mut preds = vec![Vec::new(); n];
        for (s, row) in self.rows.iter().enumerate() {
            for (t, p) in row {
                if *p > 0.0 {
                    preds[*t].push(s);
                }
            }
        }
        let mut seen = target.to_vec();
        let mut stack: Vec<StateId> = (0..n).filter(|s| target[*s]).collect();
        while let Some(t) = stack.pop() {
            for &s in &preds[t] {
                if !seen[s] && allowed[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        seen
    }

    /// Solves `x = A x + b` over the states flagged in `maybe`, where `A`
    /// restricts the chain to those states.
    fn solve(
        &self,
        maybe: &[bool],
        b: &[f64],
        method: SolveMethod,
    ) -> Result<Vec<f64>, EngineError> {
        match method {
            SolveMethod::Gaussian => self.gaussian(maybe, b),
            SolveMethod::ValueIteration => self.value_iteration(maybe, b),
            SolveMethod::Auto => match self.gaussian(maybe, b) {
                Err(EngineError::SingularSystem) => self.value_iteration(maybe, b),
                other => other,
            },
        }
    }

    fn gaussian(&self, maybe: &[bool], b: &[f64]) -> Result<Vec<f64>, EngineError> {
        let idx: Vec<StateId> = (0..self.n()).filter(|s| maybe[*s]).collect();
        let mut pos = vec![usize::MAX; self.n()];
        for (i, s) in idx.iter().enumerate() {
            pos[*s] = i;
        }
        let k = idx.len();
        let mut a = vec![vec![0.0; k + 1]; k];
        for (i, s) in idx.iter().enumerate() {
            a[i][i] += 1.0;
            for (t, p) in &self.rows[*s] {
                if maybe[*t] {
                    a[i][pos[*t]] -= p;
                }
            }
            a[i][k] = b[*s];
        }
        for col in 0..k {
            let piv = (col..k)
                .max_by(|x, y| a[*x][col].abs().total_cmp(&a[*y][col].abs()))
                .expect("non-empty range");
            if a[piv][col].abs() < PIVOT_EPS {
                return Err(EngineError::SingularSystem);
            }
            a.swap(col, piv);
            let pivot_row = a[col].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r == col || row[col] == 0.0 {
                    continue;
                }
                let f = row[col] / pivot_row[col];
                for c in col..=k {
                    row[c] -= f * pivot_row[c];
                }
            }
        }
        let mut x = vec![0.0; self.n()];
        for (i, s) in idx.iter().enumerate() {
            x[*s] = a[i][k] / a[i][i];
        }
        Ok(x)
    }

    fn value_iteration(&self, maybe: &[bool], b: &[f64]) -> Result<Vec<f64>, EngineError> {
        let mut x = vec![0.0; self.n()];
        for _ in 0..VI_MAX_ITERATIONS {
            let mut delta: f64 = 0.0;
            let mut next = vec![0.0; self.n()];
            for s in (0..self.n()).filter(|s| maybe[*s]) {
                let v = b[s]
                    + self.rows[s]
                        .iter()
                        .filter(|(t, _)| maybe[*t])
                        .map(|(t, p)| p * x[*t])
                        .sum::<f64>();
                delta = delta.max((v - x[s]).abs());
                next[s] = v;
            }
            x = next;
            if delta < VI_TOLERANCE {
                return Ok(x);
            }
        }
        Err(EngineError::NonConvergence)
    }

    /// Probability of `left U right` from every state.
    pub fn until(
        &self,
        left: &[bool],
        right: &[bool],
        method: SolveMethod,
    ) -> Result<Vec<f64>, EngineError> {
        let positive = self.reach_positive(right, left);
        let maybe: Vec<bool> = (0..self.n()).map(|s| positive[s] && !right[s]).collect();
        let b: Vec<f64> = (0..self.n())
            .map(|s| {
                if maybe[s] {
                    self.rows[s]
                        .iter()
                        .filter(|(t, _)| right[*t])
                        .map(|(_, p)| p)
                        .sum()
                } else {
                    0.0
                }
            })
            .collect();
        let mut x = self.solve(&maybe, &b, method)?;
        for s in 0..self.n() {
            if right[s] {
                x[s] = 1.0;
            }
        }
        Ok(x)
    }

    /// Expected reward until reaching `target`; infinite where the target is
    /// missed with positive probability.
    pub fn reach_reward(
        &self,
        rewards: &[f64],
        target: &[bool],
        method: SolveMethod,
    ) -> Result<Vec<f64>, EngineError> {
        let all = vec![true; self.n()];
        let positive = self.reach_positive(target, &all);
        let zero_states: Vec<bool> = positive.iter().map(|p| !p).collect();
        let not_target: Vec<bool> = target.iter().map(|t| !t).collect();
        // states that can slip into a probability-zero state before the target
        let leaky = self.reach_positive(&zero_states, &not_target);
        let maybe: Vec<bool> = (0..self.n()).map(|s| !target[s] && !leaky[s]).collect();
        let b: Vec<f64> = (0..self.n())
            .map(|s| if maybe[s] { rewards[s] } else { 0.0 })
            .collect();
        let mut x = self.solve(&maybe, &b, method)?;
        for s in 0..self.n() {
            if leaky[s] && !target[s] {
                x[s] = f64::INFINITY;
            }
        }
        Ok(x)
    }

    fn step(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(t, p)| p * x[*t]).sum())
            .collect()
    }

    pub fn bounded_until(&self, left: &[bool], right: &[bool], k: u32) -> Vec<f64> {
        let mut x: Vec<f64> = right.iter().map(|r| if *r { 1.0 } else { 0.0 }).collect();
        for _ in 0..k {
            let y = self.step(&x);
            x = (0..self.n())
                .map(|s| {
                    if right[s] {
                        1.0
                    } else if left[s] {
                        y[s]
                    } else {
                        0.0
                    }
                })
                .collect();
        }
        x
    }

    pub fn cumulative(&self, rewards: &[f64], k: u32) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        for _ in 0..k {
            x = self
                .step(&x)
                .iter()
                .zip(rewards)
                .map(|(a, r)| a + r)
                .collect();
        }
        x
    }

    pub fn instantaneous(&self, rewards: &[f64], k: u32) -> Vec<f64> {
        let mut x = rewards.to_vec();
        for _ in 0..k {
            x = self.step(&x);
        }
        x
    }
}

/// Numeric value of `prop` from the initial state of `m` at valuation `v`.
pub fn oracle_solve(
    m: &Pdtmc,
    v: &Valuation,
    prop: &Property,
    method: SolveMethod,
) -> Result<f64, EngineError> {
    let chain = instantiate(m, v)?;
    let init = chain.init;
    let sat = |f: &StateFormula| sat(m, f);
    let all = vec![true; m.num_states()];
    match prop {
        Property::Prob(path) => match path {
            PathFormula::Next(phi) => {
                let s = sat(phi);
                Ok(chain.rows[init]
                    .iter()
                    .filter(|(t, _)| s[*t])
                    .map(|(_, p)| p)
                    .sum())
            }
            PathFormula::Eventually { target, bound } => {
                let right = sat(target);
                match bound {
                    Some(k) => Ok(chain.bounded_until(&all, &right, *k)[init]),
                    None => Ok(chain.until(&all, &right, method)?[init]),
                }
            }
            PathFormula::Until { left, right, bound } => {
                let (l, r) = (sat(left), sat(right));
                match bound {
                    Some(k) => Ok(chain.bounded_until(&l, &r, *k)[init]),
                    None => Ok(chain.until(&l, &r, method)?[init]),
                }
            }
        },
        Property::Reward { structure, kind } => {
            let r = instantiate_rewards(m, structure, v)?;
            match kind {
                RewardKind::Reach(phi) => Ok(chain.reach_reward(&r, &sat(phi), method)?[init]),
                RewardKind::Cumulative(k) => Ok(chain.cumulative(&r, *k)[init]),
                RewardKind::Instantaneous(k) => Ok(chain.instantaneous(&r, *k)[init]),
                RewardKind::SteadyState => Err(EngineError::Unsupported(
                    "steady-state reward operator R=?[S]".into(),
                )),
            }
        }
    }
}
