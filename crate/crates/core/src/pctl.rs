//! PCTL property and requirement syntax trees.
//!
//! State formulas inside path operators are propositional: no nested `P`
//! operator. Rendering with `Display` produces text that parses back to the
//! same tree.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StateFormula {
    True,
    False,
    Atom(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
}

impl StateFormula {
    pub fn atom(a: impl Into<String>) -> Self {
        StateFormula::Atom(a.into())
    }

    pub fn negation(f: StateFormula) -> Self {
        StateFormula::Not(Box::new(f))
    }

    pub fn and(a: StateFormula, b: StateFormula) -> Self {
        StateFormula::And(Box::new(a), Box::new(b))
    }

    /// Evaluates the formula against a state's label set.
    pub fn holds<F: Fn(&str) -> bool + Copy>(&self, has_label: F) -> bool {
        match self {
            StateFormula::True => true,
            StateFormula::False => false,
            StateFormula::Atom(a) => has_label(a),
            StateFormula::Not(f) => !f.holds(has_label),
            StateFormula::And(a, b) => a.holds(has_label) && b.holds(has_label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathFormula {
    Next(StateFormula),
    /// `left U right`, or `left U<=k right` when bounded.
    Until {
        left: StateFormula,
        right: StateFormula,
        bound: Option<u32>,
    },
    /// `F phi`, shorthand for `true U phi`.
    Eventually {
        target: StateFormula,
        bound: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RewardKind {
    Reach(StateFormula),
    Cumulative(u32),
    Instantaneous(u32),
    SteadyState,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Property {
    Prob(PathFormula),
    Reward { structure: String, kind: RewardKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

impl Comparator {
    pub fn satisfied(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::AtLeast => value >= threshold,
            Comparator::AtMost => value <= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::AtLeast => ">=",
            Comparator::AtMost => "<=",
        }
    }
}

/// A threshold query such as `P=? [ F "picking success" ] >= 0.8`.
#[derive(Debug, Clone, PartialEq)]
pub struct Requirement {
    pub id: String,
    pub property: Property,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Requirement {
    pub fn satisfied_by(&self, value: f64) -> bool {
        self.comparator.satisfied(value, self.threshold)
    }

    pub fn violated_by(&self, value: f64) -> bool {
        !self.satisfied_by(value)
    }
}

fn fmt_operand(f: &mut fmt::Formatter<'_>, phi: &StateFormula) -> fmt::Result {
    match phi {
        StateFormula::And(..) => write!(f, "({phi})"),
        _ => write!(f, "{phi}"),
    }
}

fn fmt_bound(f: &mut fmt::Formatter<'_>, bound: Option<u32>) -> fmt::Result {
    match bound {
        Some(k) => write!(f, "<={k}"),
        None => Ok(()),
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => write!(f, "true"),
            StateFormula::False => write!(f, "false"),
            StateFormula::Atom(a) => write!(f, "\"{a}\""),
            StateFormula::Not(inner) => {
                write!(f, "!")?;
                fmt_operand(f, inner)
            }
            StateFormula::And(a, b) => {
                write!(f, "{a} & ")?;
                fmt_operand(f, b)
            }
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(phi) => {
                write!(f, "X ")?;
                fmt_operand(f, phi)
            }
            PathFormula::Until { left, right, bound } => {
                fmt_operand(f, left)?;
                write!(f, " U")?;
                fmt_bound(f, *bound)?;
                write!(f, " ")?;
                fmt_operand(f, right)
            }
            PathFormula::Eventually { target, bound } => {
                write!(f, "F")?;
                fmt_bound(f, *bound)?;
                write!(f, " ")?;
                fmt_operand(f, target)
            }
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Prob(path) => write!(f, "P=? [ {path} ]"),
            Property::Reward { structure, kind } => {
                write!(f, "R{{\"{structure}\"}}=? [ ")?;
                match kind {
                    RewardKind::Reach(phi) => {
                        write!(f, "F ")?;
                        fmt_operand(f, phi)?;
                    }
                    RewardKind::Cumulative(k) => write!(f, "C<={k}")?,
                    RewardKind::Instantaneous(k) => write!(f, "I={k}")?,
                    RewardKind::SteadyState => write!(f, "S")?,
                }
                write!(f, " ]")
            }
        }
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} {} {:?}",
            self.id,
            self.property,
            self.comparator.symbol(),
            self.threshold
        )
    }
}
