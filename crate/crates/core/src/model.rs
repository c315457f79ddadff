//! Parametric discrete-time Markov chains with labels and state rewards.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ratfunc::{parse_polynomial, Coeff, ParamId, RationalFunction};

pub type StateId = usize;

/// Slack allowed when checking that evaluated probabilities lie in [0, 1].
pub const PROBABILITY_SLACK: f64 = 1e-9;

const RANGE_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate state '{0}'")]
    DuplicateState(String),
    #[error("unknown state '{0}'")]
    UnknownState(String),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("duplicate parameter '{0}'")]
    DuplicateParameter(String),
    #[error("duplicate transition {from} -> {to}")]
    DuplicateTransition { from: String, to: String },
    #[error("duplicate reward structure '{0}'")]
    DuplicateReward(String),
    #[error("empty domain [{lo}, {hi}] for '{name}'")]
    EmptyDomain { name: String, lo: f64, hi: f64 },
    #[error("model has no states")]
    NoStates,
    #[error("invalid parameter name '{0}'")]
    InvalidName(String),
    #[error("bad expression: {0}")]
    Expression(String),
}

/// How a parameter is bound: monitored within an interval, or fixed.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Interval { lo: f64, hi: f64 },
    Constant(Coeff),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub id: ParamId,
    pub kind: ParamKind,
}

impl ParamDecl {
    /// Domain interval; a constant is the degenerate interval at its value.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            ParamKind::Interval { lo, hi } => (*lo, *hi),
            ParamKind::Constant(c) => {
                let v = coeff_f64(c);
                (v, v)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, ParamKind::Constant(_))
    }

    pub fn clamp(&self, v: f64) -> f64 {
        let (lo, hi) = self.bounds();
        v.clamp(lo, hi)
    }
}

pub(crate) fn coeff_f64(c: &Coeff) -> f64 {
    use num_traits::ToPrimitive;
    c.to_f64().unwrap_or(f64::NAN)
}

/// Declared parameters in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    decls: Vec<ParamDecl>,
}

impl ParameterSet {
    pub fn declare(&mut self, id: ParamId, kind: ParamKind) -> Result<(), ModelError> {
        if self.get(&id).is_some() {
            return Err(ModelError::DuplicateParameter(id.to_string()));
        }
        if let ParamKind::Interval { lo, hi } = kind {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(ModelError::EmptyDomain {
                    name: id.to_string(),
                    lo,
                    hi,
                });
            }
        }
        self.decls.push(ParamDecl { id, kind });
        Ok(())
    }

    pub fn get(&self, id: &ParamId) -> Option<&ParamDecl> {
        self.decls.iter().find(|d| &d.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamDecl> {
        self.decls.iter()
    }

    pub fn contains(&self, id: &ParamId) -> bool {
        self.get(id).is_some()
    }

    /// Monitored (non-constant) parameters.
    pub fn monitored(&self) -> impl Iterator<Item = &ParamDecl> {
        self.decls.iter().filter(|d| !d.is_constant())
    }

    pub fn constants(&self) -> impl Iterator<Item = (&ParamId, &Coeff)> {
        self.decls.iter().filter_map(|d| match &d.kind {
            ParamKind::Constant(c) => Some((&d.id, c)),
            ParamKind::Interval { .. } => None,
        })
    }

    /// Draws a valuation uniformly from the box of domains.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Valuation {
        let values = self
            .decls
            .iter()
            .map(|d| {
                let (lo, hi) = d.bounds();
                let v = if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                };
                (d.id.clone(), v)
            })
            .collect();
        Valuation {
            values,
            timestamp: None,
        }
    }
}

/// Parameter assignment, optionally stamped with a minute index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Valuation {
    pub values: BTreeMap<ParamId, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
}

impl Valuation {
    pub fn new(values: BTreeMap<ParamId, f64>) -> Self {
        Self {
            values,
            timestamp: None,
        }
    }

    pub fn get(&self, p: &ParamId) -> Option<f64> {
        self.values.get(p).copied()
    }

    pub fn set(&mut self, p: ParamId, v: f64) {
        self.values.insert(p, v);
    }

    /// Parameters whose value falls outside their declared domain.
    pub fn out_of_domain(&self, params: &ParameterSet) -> Vec<ParamId> {
        self.values
            .iter()
            .filter(|(p, v)| {
                params.get(p).is_some_and(|d| {
                    let (lo, hi) = d.bounds();
                    **v < lo - PROBABILITY_SLACK || **v > hi + PROBABILITY_SLACK
                })
            })
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Fills in declared constants not already assigned.
    pub fn with_constants(mut self, params: &ParameterSet) -> Self {
        for (p, c) in params.constants() {
            self.values.entry(p.clone()).or_insert_with(|| coeff_f64(c));
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardStructure {
    pub name: String,
    pub rewards: BTreeMap<StateId, RationalFunction>,
}

impl RewardStructure {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            rewards: BTreeMap::new(),
        }
    }

    /// Reward of `s`; absent states earn zero.
    pub fn reward(&self, s: StateId) -> RationalFunction {
        self.rewards
            .get(&s)
            .cloned()
            .unwrap_or_else(RationalFunction::zero)
    }
}

/// A parametric DTMC. Rows are stored sparsely, sorted by target state.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdtmc {
    states: Vec<String>,
    init: StateId,
    trans: Vec<Vec<(StateId, RationalFunction)>>,
    labels: Vec<BTreeSet<String>>,
    params: ParameterSet,
    rewards: Vec<RewardStructure>,
}

impl Pdtmc {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|n| n == name)
    }

    pub fn init(&self) -> StateId {
        self.init
    }

    pub fn row(&self, s: StateId) -> &[(StateId, RationalFunction)] {
        &self.trans[s]
    }

    pub fn transition(&self, from: StateId, to: StateId) -> Option<&RationalFunction> {
        self.trans[from]
            .iter()
            .find(|(t, _)| *t == to)
            .map(|(_, f)| f)
    }

    pub fn labels(&self, s: StateId) -> &BTreeSet<String> {
        &self.labels[s]
    }

    pub fn has_label(&self, s: StateId, label: &str) -> bool {
        self.labels[s].contains(label)
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn rewards(&self) -> &[RewardStructure] {
        &self.rewards
    }

    pub fn reward(&self, name: &str) -> Option<&RewardStructure> {
        self.rewards.iter().find(|r| r.name == name)
    }

    /// Every parameter mentioned by a transition or reward.
    pub fn used_params(&self) -> BTreeSet<ParamId> {
        let mut out = BTreeSet::new();
        for row in &self.trans {
            for (_, f) in row {
                out.extend(f.params());
            }
        }
        for r in &self.rewards {
            for f in r.rewards.values() {
                out.extend(f.params());
            }
        }
        out
    }

    /// Checks every structural and numeric invariant, returning all findings.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let declared = |p: &ParamId| self.params.contains(p);
        for p in self.used_params() {
            if !declared(&p) {
                out.push(Violation::UndeclaredParameter(p.to_string()));
            }
        }
        for (s, row) in self.trans.iter().enumerate() {
            if row.is_empty() {
                out.push(Violation::MissingRow {
                    state: self.states[s].clone(),
                });
                continue;
            }
            let sum = row
                .iter()
                .fold(RationalFunction::zero(), |acc, (_, f)| &acc + f);
            if !sum.equals(&RationalFunction::one()) {
                out.push(Violation::RowSum {
                    state: self.states[s].clone(),
                    sum: sum.to_string(),
                });
            }
        }
        if !out.is_empty() {
            return out;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut bad_prob = BTreeSet::new();
        let mut bad_reward = BTreeSet::new();
        for _ in 0..RANGE_SAMPLES {
            let v = self.params.sample(&mut rng);
            for (s, row) in self.trans.iter().enumerate() {
                for (t, f) in row {
                    if bad_prob.contains(&(s, *t)) {
                        continue;
                    }
                    match f.evaluate(&v.values) {
                        Ok(x) if (-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&x) => {}
                        other => {
                            bad_prob.insert((s, *t));
                            out.push(Violation::ProbabilityOutOfRange {
                                from: self.states[s].clone(),
                                to: self.states[*t].clone(),
                                value: other.unwrap_or(f64::NAN),
                            });
                        }
                    }
                }
            }
            for r in &self.rewards {
                for (s, f) in &r.rewards {
                    if bad_reward.contains(&(r.name.clone(), *s)) {
                        continue;
                    }
                    match f.evaluate(&v.values) {
                        Ok(x) if x >= -PROBABILITY_SLACK => {}
                        other => {
                            bad_reward.insert((r.name.clone(), *s));
                            out.push(Violation::NegativeReward {
                                reward: r.name.clone(),
                                state: self.states[*s].clone(),
                                value: other.unwrap_or(f64::NAN),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingRow {
        state: String,
    },
    RowSum {
        state: String,
        sum: String,
    },
    ProbabilityOutOfRange {
        from: String,
        to: String,
        value: f64,
    },
    NegativeReward {
        reward: String,
        state: String,
        value: f64,
    },
    UndeclaredParameter(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingRow { state } => {
                write!(f, "state {state} has no outgoing transitions")
            }
            Violation::RowSum { state, sum } => {
                write!(f, "outgoing probabilities of {state} sum to {sum}, not 1")
            }
            Violation::ProbabilityOutOfRange { from, to, value } => {
                write!(f, "P({from}, {to}) evaluates to {value} outside [0, 1]")
            }
            Violation::NegativeReward {
                reward,
                state,
                value,
            } => {
                write!(
                    f,
                    "reward '{reward}' at {state} evaluates to negative {value}"
                )
            }
            Violation::UndeclaredParameter(p) => write!(f, "parameter '{p}' is not declared"),
        }
    }
}

/// Incremental construction with name-level error checking.
#[derive(Debug, Default)]
pub struct PdtmcBuilder {
    states: Vec<String>,
    labels: Vec<BTreeSet<String>>,
    trans: Vec<Vec<(StateId, RationalFunction)>>,
    params: ParameterSet,
    rewards: Vec<RewardStructure>,
    init: Option<StateId>,
}

impl PdtmcBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn param(&mut self, name: &str, lo: f64, hi: f64) -> Result<&mut Self, ModelError> {
        let id = ParamId::new(name).map_err(|_| ModelError::InvalidName(name.into()))?;
        self.params.declare(id, ParamKind::Interval { lo, hi })?;
        Ok(self)
    }

    pub fn constant(&mut self, name: &str, value: Coeff) -> Result<&mut Self, ModelError> {
        let id = ParamId::new(name).map_err(|_| ModelError::InvalidName(name.into()))?;
        self.params.declare(id, ParamKind::Constant(value))?;
        Ok(self)
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn state<I, S>(&mut self, name: &str, labels: I) -> Result<StateId, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if self.states.iter().any(|s| s == name) {
            return Err(ModelError::DuplicateState(name.into()));
        }
        self.states.push(name.into());
        self.labels
            .push(labels.into_iter().map(Into::into).collect());
        self.trans.push(Vec::new());
        Ok(self.states.len() - 1)
    }

    pub fn init(&mut self, name: &str) -> Result<&mut Self, ModelError> {
        self.init = Some(self.lookup(name)?);
        Ok(self)
    }

    fn lookup(&self, name: &str) -> Result<StateId, ModelError> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ModelError::UnknownState(name.into()))
    }

    fn check_params(&self, f: &RationalFunction) -> Result<(), ModelError> {
        match f.params().into_iter().find(|p| !self.params.contains(p)) {
            Some(p) => Err(ModelError::UnknownParameter(p.to_string())),
            None => Ok(()),
        }
    }

    pub fn transition(
        &mut self,
        from: &str,
        to: &str,
        prob: RationalFunction,
    ) -> Result<&mut Self, ModelError> {
        let (s, t) = (self.lookup(from)?, self.lookup(to)?);
        self.check_params(&prob)?;
        let row = &mut self.trans[s];
        if row.iter().any(|(u, _)| *u == t) {
            return Err(ModelError::DuplicateTransition {
                from: from.into(),
                to: to.into(),
            });
        }
        if !prob.is_zero() {
            let at = row.partition_point(|(u, _)| *u < t);
            row.insert(at, (t, prob));
        }
        Ok(self)
    }

    /// Parses a polynomial expression and adds it as a transition.
    pub fn transition_expr(
        &mut self,
        from: &str,
        to: &str,
        expr: &str,
    ) -> Result<&mut Self, ModelError> {
        let p = parse_polynomial(expr).map_err(|e| ModelError::Expression(e.to_string()))?;
        self.transition(from, to, RationalFunction::from(p))
    }

    pub fn reward(&mut self, reward: RewardStructure) -> Result<&mut Self, ModelError> {
        if self.rewards.iter().any(|r| r.name == reward.name) {
            return Err(ModelError::DuplicateReward(reward.name));
        }
        for f in reward.rewards.values() {
            self.check_params(f)?;
        }
        self.rewards.push(reward);
        Ok(self)
    }

    pub fn reward_entry(
        &mut self,
        reward: &str,
        state: &str,
        value: RationalFunction,
    ) -> Result<&mut Self, ModelError> {
        let s = self.lookup(state)?;
        self.check_params(&value)?;
        let idx = match self.rewards.iter().position(|r| r.name == reward) {
            Some(i) => i,
            None => {
                self.rewards.push(RewardStructure::new(reward));
                self.rewards.len() - 1
            }
        };
        if !value.is_zero() {
            self.rewards[idx].rewards.insert(s, value);
        }
        Ok(self)
    }

    /// Finishes the model. The initial state defaults to the first state.
    pub fn build(self) -> Result<Pdtmc, ModelError> {
        if self.states.is_empty() {
            return Err(ModelError::NoStates);
        }
        Ok(Pdtmc {
            init: self.init.unwrap_or(0),
            states: self.states,
            trans: self.trans,
            labels: self.labels,
            params: self.params,
            rewards: self.rewards,
        })
    }
}

/// Requirements R1 to R3 for [`fruit_picking_model`] in `.pctl` syntax.
pub const FRUIT_PICKING_REQUIREMENTS: &str = include_str!("../fixtures/requirements.pctl");

/// The six-state fruit-picking robot with "time" and "energy" rewards.
///
/// `s0` positions, `s1` picks, `s2` decides whether to retry, `s3` abandons,
/// `s4` is picking success and `s5` is done. `beta*p2` is the probability that
/// a pick fails.
pub fn fruit_picking_model() -> Pdtmc {
    let dec = |s: &str| crate::ratfunc::parse_decimal(s).expect("literal");
    let mut b = PdtmcBuilder::new();
    b.param("alpha", 0.7, 0.99).unwrap();
    b.param("beta", 0.01, 0.2).unwrap();
    for i in 0..3 {
        b.param(&format!("t{i}"), 1.0, 30.0).unwrap();
    }
    for i in 0..3 {
        b.param(&format!("e{i}"), 0.3, 4.5).unwrap();
    }
    b.constant("p1", dec("0.95")).unwrap();
    b.constant("p2", dec("0.2")).unwrap();
    b.constant("p3", dec("0.95")).unwrap();

    let none: [&str; 0] = [];
    for s in ["s0", "s1", "s2", "s3"] {
        b.state(s, none).unwrap();
    }
    b.state("s4", ["picking success"]).unwrap();
    b.state("s5", ["done"]).unwrap();
    b.init("s0").unwrap();

    let edges = [
        ("s0", "s1", "alpha*p1"),
        ("s0", "s3", "1 - alpha*p1"),
        ("s1", "s2", "beta*p2"),
        ("s1", "s4", "1 - beta*p2"),
        ("s2", "s0", "p3"),
        ("s2", "s3", "1 - p3"),
        ("s3", "s5", "1"),
        ("s4", "s5", "1"),
        ("s5", "s5", "1"),
    ];
    for (from, to, e) in edges {
        b.transition_expr(from, to, e).unwrap();
    }
    for (i, s) in ["s0", "s1", "s2"].iter().enumerate() {
        let t = RationalFunction::var(ParamId::new(&format!("t{i}")).unwrap());
        let e = RationalFunction::var(ParamId::new(&format!("e{i}")).unwrap());
        b.reward_entry("time", s, t).unwrap();
        b.reward_entry("energy", s, e).unwrap();
    }
    b.build().expect("fixture is well formed")
}
