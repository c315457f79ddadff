//! Exact multivariate polynomials and rational functions over named
//! parameters, with rational coefficients.

mod expr;
mod function;
mod interchange;
mod monomial;
mod polynomial;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use expr::{
    parse_decimal, parse_expression, parse_polynomial, parse_rational_function, ExprError,
    ExprOptions,
};
pub use function::{CompiledFunction, RationalFunction, EPSILON_DEN};
pub use interchange::{InterchangeError, PolynomialJson, RationalFunctionJson, TermJson};
pub use monomial::Monomial;
pub use polynomial::{Coeff, Polynomial};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RatFuncError {
    #[error("division by the zero function")]
    DivisionByZeroFunction,
    #[error("no value for parameter '{0}'")]
    MissingParameter(String),
    #[error("denominator evaluates to {0:e}, too close to zero")]
    DenominatorNearZero(f64),
    #[error("invalid parameter name '{0}'")]
    InvalidParamName(String),
}

/// Name of a model parameter, e.g. `alpha` or `p1`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ParamId(Arc<str>);

impl ParamId {
    pub fn new(name: &str) -> Result<Self, RatFuncError> {
        let mut chars = name.chars();
        let valid = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if valid {
            Ok(Self(Arc::from(name)))
        } else {
            Err(RatFuncError::InvalidParamName(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ParamId {
    type Error = RatFuncError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        ParamId::new(&s)
    }
}

impl From<ParamId> for String {
    fn from(p: ParamId) -> String {
        p.0.to_string()
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_names() {
        assert!(ParamId::new("alpha").is_ok());
        assert!(ParamId::new("_p1").is_ok());
        assert!(ParamId::new("").is_err());
        assert!(ParamId::new("1p").is_err());
        assert!(ParamId::new("a-b").is_err());
    }
}
