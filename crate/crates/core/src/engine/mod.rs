//! Parametric model checking of pDTMCs.
//!
//! Unbounded reachability and reachability rewards go through state
//! elimination; the step-bounded operators unroll `k` vector recurrences.
//! [`oracle`] holds the numeric counterpart used for cross-checking.

mod bounded;
mod elimination;
pub mod oracle;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Pdtmc, RewardStructure, StateId};
use crate::pctl::{PathFormula, Property, Requirement, RewardKind, StateFormula};
use crate::ratfunc::{ParamId, RatFuncError, RationalFunction};

pub use elimination::EliminationOrder;
pub use oracle::{oracle_solve, SolveMethod};

/// Number of sampled valuations used to confirm almost-sure reachability
/// before a reachability-reward query.
pub const REWARD_PRECHECK_SAMPLES: usize = 20;
const REWARD_PRECHECK_SEED: u64 = 0x00c0_ffee;
const REWARD_PRECHECK_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("target formula '{0}' holds in no state")]
    EmptyTarget(String),
    #[error("unknown reward structure \"{0}\"")]
    UnknownRewardStructure(String),
    #[error("target '{target}' is not reached almost surely (probability {probability} at a sampled valuation); the expected reward diverges")]
    RewardDivergence { target: String, probability: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("value iteration did not converge")]
    NonConvergence,
    #[error(transparent)]
    RatFunc(#[from] RatFuncError),
}

/// Closed-form answer to one query, as a function of the model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PmcExpression {
    pub requirement_id: String,
    pub function: RationalFunction,
    pub params: Vec<ParamId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PmcExpression {
    fn new(function: RationalFunction, warnings: Vec<String>) -> Self {
        PmcExpression {
            requirement_id: String::new(),
            params: function.params().into_iter().collect(),
            function,
            warnings,
        }
    }

    pub fn infix(&self) -> String {
        self.function.to_string()
    }
}

/// JSON shape written by the command-line checker.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PmcExpressionReport<'a> {
    #[serde(flatten)]
    pub expression: &'a PmcExpression,
    pub infix: String,
}

impl<'a> From<&'a PmcExpression> for PmcExpressionReport<'a> {
    fn from(expression: &'a PmcExpression) -> Self {
        PmcExpressionReport {
            infix: expression.infix(),
            expression,
        }
    }
}

/// States satisfying a propositional state formula.
pub fn sat(m: &Pdtmc, f: &StateFormula) -> Vec<bool> {
    (0..m.num_states())
        .map(|s| f.holds(|l| m.has_label(s, l)))
        .collect()
}

fn non_empty(m: &Pdtmc, f: &StateFormula) -> Result<Vec<bool>, EngineError> {
    let set = sat(m, f);
    if set.iter().any(|b| *b) {
        Ok(set)
    } else {
        Err(EngineError::EmptyTarget(f.to_string()))
    }
}

fn reward_structure<'m>(m: &'m Pdtmc, name: &str) -> Result<&'m RewardStructure, EngineError> {
    m.reward(name)
        .ok_or_else(|| EngineError::UnknownRewardStructure(name.to_string()))
}

/// Model checker configuration. The default uses the min-degree elimination
/// order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Checker {
    pub order: EliminationOrder,
}

impl Checker {
    pub fn with_order(order: EliminationOrder) -> Self {
        Checker { order }
    }

    /// Checks a threshold requirement, tagging the result with its id.
    pub fn check_requirement(
        &self,
        m: &Pdtmc,
        req: &Requirement,
    ) -> Result<PmcExpression, EngineError> {
        let mut e = self.check(m, &req.property)?;
        e.requirement_id = req.id.clone();
        Ok(e)
    }

    pub fn check(&self, m: &Pdtmc, prop: &Property) -> Result<PmcExpression, EngineError> {
        match prop {
            Property::Prob(PathFormula::Next(phi)) => self.check_next(m, phi),
            Property::Prob(PathFormula::Eventually {
                target,
                bound: None,
            }) => self.check_reachability(m, target),
            Property::Prob(PathFormula::Eventually {
                target,
                bound: Some(k),
            }) => self.check_bounded_until(m, &StateFormula::True, target, *k),
            Property::Prob(PathFormula::Until {
                left,
                right,
                bound: None,
            }) => self.check_until(m, left, right),
            Property::Prob(PathFormula::Until {
                left,
                right,
                bound: Some(k),
            }) => self.check_bounded_until(m, left, right, *k),
            Property::Reward { structure, kind } => match kind {
                RewardKind::Reach(target) => self.check_reachability_reward(m, structure, target),
                RewardKind::Cumulative(k) => self.check_cumulative_reward(m, structure, *k),
                RewardKind::Instantaneous(k) => self.check_instantaneous_reward(m, structure, *k),
                RewardKind::SteadyState => Err(EngineError::Unsupported(
                    "steady-state reward operator R=?[S]".into(),
                )),
            },
        }
    }

    /// Probability of eventually reaching `target` from the initial state.
    pub fn check_reachability(
        &self,
        m: &Pdtmc,
        target: &StateFormula,
    ) -> Result<PmcExpression, EngineError> {
        self.check_until(m, &StateFormula::True, target)
    }

    /// Probability of `left U right` from the initial state.
    pub fn check_until(
        &self,
        m: &Pdtmc,
        left: &StateFormula,
        right: &StateFormula,
    ) -> Result<PmcExpression, EngineError> {
        let target = non_empty(m, right)?;
        let allowed = sat(m, left);
        let out = elimination::eliminate(m, m.init(), &target, &allowed, None, self.order)?;
        let mut warnings = Vec::new();
        if out.unreachable {
            warnings.push(format!(
                "target {right} is unreachable from the initial state; the result is 0"
            ));
        }
        Ok(PmcExpression::new(out.function, warnings))
    }

    /// Expected reward accumulated before first reaching `target`.
    pub fn check_reachability_reward(
        &self,
        m: &Pdtmc,
        structure: &str,
        target: &StateFormula,
    ) -> Result<PmcExpression, EngineError> {
        let rwd = reward_structure(m, structure)?;
        let target_set = non_empty(m, target)?;
        self.almost_sure(m, target, &target_set)?;
        let all = vec![true; m.num_states()];
        let out = elimination::eliminate(m, m.init(), &target_set, &all, Some(rwd), self.order)?;
        if out.unreachable {
            return Err(EngineError::RewardDivergence {
                target: target.to_string(),
                probability: 0.0,
            });
        }
        Ok(PmcExpression::new(out.function, Vec::new()))
    }

    fn almost_sure(
        &self,
        m: &Pdtmc,
        target: &StateFormula,
        target_set: &[bool],
    ) -> Result<(), EngineError> {
        let mut rng = ChaCha8Rng::seed_from_u64(REWARD_PRECHECK_SEED);
        let all = vec![true; m.num_states()];
        for _ in 0..REWARD_PRECHECK_SAMPLES {
            let v = m.params().sample(&mut rng);
            let chain = oracle::instantiate(m, &v)?;
            let p = chain.until(&all, target_set, SolveMethod::Auto)?[chain.init];
            if p < 1.0 - REWARD_PRECHECK_SLACK {
                return Err(EngineError::RewardDivergence {
                    target: target.to_string(),
                    probability: p,
                });
            }
        }
        Ok(())
    }

    pub fn check_next(&self, m: &Pdtmc, phi: &StateFormula) -> Result<PmcExpression, EngineError> {
        Ok(self.at_init(m, per_state_next(m, phi)))
    }

    pub fn check_bounded_until(
        &self,
        m: &Pdtmc,
        left: &StateFormula,
        right: &StateFormula,
        k: u32,
    ) -> Result<PmcExpression, EngineError> {
        let target = non_empty(m, right)?;
        Ok(self.at_init(m, bounded::bounded_until(m, &sat(m, left), &target, k)))
    }

    pub fn check_cumulative_reward(
        &self,
        m: &Pdtmc,
        structure: &str,
        k: u32,
    ) -> Result<PmcExpression, EngineError> {
        let rwd = reward_structure(m, structure)?;
        Ok(self.at_init(m, bounded::cumulative_reward(m, rwd, k)))
    }

    pub fn check_instantaneous_reward(
        &self,
        m: &Pdtmc,
        structure: &str,
        k: u32,
    ) -> Result<PmcExpression, EngineError> {
        let rwd = reward_structure(m, structure)?;
        Ok(self.at_init(m, bounded::instantaneous_reward(m, rwd, k)))
    }

    fn at_init(&self, m: &Pdtmc, mut per_state: Vec<RationalFunction>) -> PmcExpression {
        PmcExpression::new(per_state.swap_remove(m.init()).reduce(), Vec::new())
    }
}

/// Probability that the successor of each state satisfies `phi`.
pub fn per_state_next(m: &Pdtmc, phi: &StateFormula) -> Vec<RationalFunction> {
    bounded::next(m, &sat(m, phi))
}

/// Probability of eventually reaching `target` from `start`.
pub fn reachability_from(
    m: &Pdtmc,
    start: StateId,
    target: &StateFormula,
    order: EliminationOrder,
) -> Result<RationalFunction, EngineError> {
    let t = non_empty(m, target)?;
    let all = vec![true; m.num_states()];
    Ok(elimination::eliminate(m, start, &t, &all, None, order)?.function)
}

/// Checks with the default configuration.
pub fn check(m: &Pdtmc, prop: &Property) -> Result<PmcExpression, EngineError> {
    Checker::default().check(m, prop)
}

pub fn check_requirement(m: &Pdtmc, req: &Requirement) -> Result<PmcExpression, EngineError> {
    Checker::default().check_requirement(m, req)
}

/// Parameters that occur in any of the expressions.
pub fn occurring_params<'a>(
    exprs: impl IntoIterator<Item = &'a PmcExpression>,
) -> BTreeSet<ParamId> {
    exprs
        .into_iter()
        .flat_map(|e| e.params.iter().cloned())
        .collect()
}
