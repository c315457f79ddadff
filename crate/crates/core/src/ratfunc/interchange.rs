//! JSON interchange form:
//! `{"num": [{"coeff": "p/q", "exps": {"alpha": 1}}], "den": [...]}`.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{Coeff, Monomial, ParamId, Polynomial, RatFuncError, RationalFunction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterchangeError {
    #[error("malformed coefficient '{0}'")]
    Coefficient(String),
    #[error("zero exponent for '{0}'")]
    ZeroExponent(String),
    #[error(transparent)]
    RatFunc(#[from] RatFuncError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub coeff: String,
    pub exps: BTreeMap<ParamId, u32>,
}

pub type PolynomialJson = Vec<TermJson>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalFunctionJson {
    pub num: PolynomialJson,
    pub den: PolynomialJson,
}

fn coeff_to_string(c: &Coeff) -> String {
    format!("{}/{}", c.numer(), c.denom())
}

fn coeff_from_str(s: &str) -> Result<Coeff, InterchangeError> {
    let bad = || InterchangeError::Coefficient(s.to_string());
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n = BigInt::from_str(n).map_err(|_| bad())?;
    let d = BigInt::from_str(d).map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Coeff::new(n, d))
}

impl Polynomial {
    pub fn to_json(&self) -> PolynomialJson {
        self.terms()
            .rev()
            .map(|(m, c)| TermJson {
                coeff: coeff_to_string(c),
                exps: m.powers().iter().cloned().collect(),
            })
            .collect()
    }

    pub fn from_json(terms: &[TermJson]) -> Result<Polynomial, InterchangeError> {
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            if let Some((p, _)) = t.exps.iter().find(|(_, e)| **e == 0) {
                return Err(InterchangeError::ZeroExponent(p.to_string()));
            }
            let m = Monomial::from_powers(t.exps.iter().map(|(p, e)| (p.clone(), *e)));
            out.push((m, coeff_from_str(&t.coeff)?));
        }
        Ok(Polynomial::from_terms(out))
    }
}

impl RationalFunction {
    pub fn to_json(&self) -> RationalFunctionJson {
        RationalFunctionJson {
            num: self.numerator().to_json(),
            den: self.denominator().to_json(),
        }
    }

    pub fn from_json(j: &RationalFunctionJson) -> Result<RationalFunction, InterchangeError> {
        let num = Polynomial::from_json(&j.num)?;
        let den = Polynomial::from_json(&j.den)?;
        Ok(RationalFunction::new(num, den)?)
    }
}

impl Serialize for RationalFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = RationalFunctionJson::deserialize(d)?;
        RationalFunction::from_json(&j).map_err(serde::de::Error::custom)
    }
}
