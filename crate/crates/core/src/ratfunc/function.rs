use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Signed};

use super::{Coeff, Monomial, ParamId, Polynomial, RatFuncError};

/// Denominator magnitude below which evaluation is refused.
pub const EPSILON_DEN: f64 = 1e-12;

/// Quotient of two multivariate polynomials.
///
/// The denominator is never the zero polynomial and is kept monic under the
/// graded lexicographic term order, so a polynomial `p` is stored as `p/1` and
/// `0` as `0/1`. Common factors are not cancelled in general; see
/// [`RationalFunction::reduce`] for the cheap cancellations that are applied.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, RatFuncError> {
        if den.is_zero() {
            return Err(RatFuncError::DivisionByZeroFunction);
        }
        Ok(Self::normalized(num, den))
    }

    fn normalized(num: Polynomial, den: Polynomial) -> Self {
        debug_assert!(!den.is_zero());
        if num.is_zero() {
            return Self::zero();
        }
        let lc = den.leading_coeff().cloned().unwrap_or_else(Coeff::one);
        if lc.is_one() {
            return Self { num, den };
        }
        let inv = lc.recip();
        Self {
            num: num.scale(&inv),
            den: den.scale(&inv),
        }
    }

    pub fn zero() -> Self {
        Self {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    pub fn one() -> Self {
        Self::constant(Coeff::one())
    }

    pub fn constant(c: Coeff) -> Self {
        Self::from(Polynomial::constant(c))
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from(Polynomial::from_integer(n))
    }

    pub fn var(p: ParamId) -> Self {
        Self::from(Polynomial::var(p))
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn constant_value(&self) -> Option<Coeff> {
        let n = self.num.constant_value()?;
        let d = self.den.constant_value()?;
        Some(n / d)
    }

    pub fn params(&self) -> BTreeSet<ParamId> {
        let mut s = self.num.params();
        s.extend(self.den.params());
        s
    }

    /// Exact equality as functions: `a.num * b.den == b.num * a.den`.
    pub fn equals(&self, other: &RationalFunction) -> bool {
        if self == other {
            return true;
        }
        &self.num * &other.den == &other.num * &self.den
    }

    pub fn recip(&self) -> Result<RationalFunction, RatFuncError> {
        RationalFunction::new(self.den.clone(), self.num.clone())
    }

    pub fn checked_div(&self, rhs: &RationalFunction) -> Result<RationalFunction, RatFuncError> {
        if rhs.is_zero() {
            return Err(RatFuncError::DivisionByZeroFunction);
        }
        Ok(self * &rhs.recip()?)
    }

    /// Cancels factors that can be found without a polynomial gcd: the common
    /// monomial factor and an exact division of one side by
    /// the other.
    pub fn reduce(&self) -> RationalFunction {
        if self.is_zero() || self.den.is_one() {
            return self.clone();
        }
        let mut num = self.num.clone();
        let mut den = self.den.clone();
        let mc = num.monomial_content().gcd(&den.monomial_content());
        if !mc.is_one() {
            num = divide_monomial(&num, &mc);
            den = divide_monomial(&den, &mc);
        }
        if let Some(q) = num.div_exact(&den) {
            return RationalFunction::from(q);
        }
        if num.total_degree() <= den.total_degree() {
            if let Some(q) = den.div_exact(&num) {
                return RationalFunction::normalized(Polynomial::one(), q);
            }
        }
        RationalFunction::normalized(num, den)
    }

    pub fn evaluate(&self, point: &BTreeMap<ParamId, f64>) -> Result<f64, RatFuncError> {
        self.evaluate_with(|p| point.get(p).copied())
    }

    pub fn evaluate_with<F>(&self, mut value: F) -> Result<f64, RatFuncError>
    where
        F: FnMut(&ParamId) -> Option<f64>,
    {
        let mut missing = None;
        let mut lookup = |p: &ParamId| {
            let v = value(p);
            if v.is_none() {
                missing = Some(p.clone());
            }
            v
        };
        let den = self.den.evaluate(&mut lookup);
        let num = self.num.evaluate(&mut lookup);
        if let Some(p) = missing {
            return Err(RatFuncError::MissingParameter(p.to_string()));
        }
        let (num, den) = (num.unwrap_or(f64::NAN), den.unwrap_or(f64::NAN));
        if den.abs() <= EPSILON_DEN || !den.is_finite() {
            return Err(RatFuncError::DenominatorNearZero(den));
        }
        Ok(num / den)
    }

    pub fn substitute(&self, values: &BTreeMap<ParamId, Coeff>) -> Result<Self, RatFuncError> {
        RationalFunction::new(self.num.substitute(values), self.den.substitute(values))
    }

    pub fn rename(&self, map: &BTreeMap<ParamId, ParamId>) -> Self {
        RationalFunction::normalized(self.num.rename(map), self.den.rename(map))
    }

    /// Freezes the function into a float evaluator over a fixed parameter
    /// order, for hot loops.
    pub fn compile(&self, order: &[ParamId]) -> Result<CompiledFunction, RatFuncError> {
        Ok(CompiledFunction {
            num: compile_poly(&self.num, order)?,
            den: compile_poly(&self.den, order)?,
        })
    }
}

fn divide_monomial(p: &Polynomial, m: &Monomial) -> Polynomial {
    Polynomial::from_terms(p.terms().map(|(t, c)| {
        (
            t.div(m).expect("monomial content divides every term"),
            c.clone(),
        )
    }))
}

impl From<Polynomial> for RationalFunction {
    fn from(p: Polynomial) -> Self {
        Self {
            num: p,
            den: Polynomial::one(),
        }
    }
}

impl Add for &RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: &RationalFunction) -> RationalFunction {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.clone();
        }
        if self.den == rhs.den {
            return RationalFunction::normalized(&self.num + &rhs.num, self.den.clone());
        }
        if rhs.den.is_one() {
            return RationalFunction::normalized(
                &self.num + &(&rhs.num * &self.den),
                self.den.clone(),
            );
        }
        if self.den.is_one() {
            return RationalFunction::normalized(
                &(&self.num * &rhs.den) + &rhs.num,
                rhs.den.clone(),
            );
        }
        RationalFunction::normalized(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl Neg for &RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        RationalFunction {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Sub for &RationalFunction {
    type Output = RationalFunction;
    fn sub(self, rhs: &RationalFunction) -> RationalFunction {
        self + &(-rhs)
    }
}

impl Mul for &RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: &RationalFunction) -> RationalFunction {
        if self.is_zero() || rhs.is_zero() {
            return RationalFunction::zero();
        }
        if self.is_one() {
            return rhs.clone();
        }
        if rhs.is_one() {
            return self.clone();
        }
        // structural cross-cancellation
        let (mut n1, mut d1, mut n2, mut d2) = (&self.num, &self.den, &rhs.num, &rhs.den);
        let one = Polynomial::one();
        if n1 == d2 {
            n1 = &one;
            d2 = &one;
        }
        if n2 == d1 {
            n2 = &one;
            d1 = &one;
        }
        RationalFunction::normalized(n1 * n2, d1 * d2)
    }
}

/// Panics when `rhs` is the zero function; use
/// [`RationalFunction::checked_div`] for a fallible division.
impl Div for &RationalFunction {
    type Output = RationalFunction;
    fn div(self, rhs: &RationalFunction) -> RationalFunction {
        self.checked_div(rhs)
            .expect("division by the zero function")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for RationalFunction {
            type Output = RationalFunction;
            fn $method(self, rhs: RationalFunction) -> RationalFunction {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        -&self
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        let wrap = |p: &Polynomial| {
            if p.len() == 1 && !p.leading_coeff().is_some_and(|c| c.is_negative()) {
                p.to_string()
            } else {
                format!("({p})")
            }
        };
        write!(f, "{}/{}", wrap(&self.num), wrap(&self.den))
    }
}

type CompiledTerm = (f64, Vec<(usize, i32)>);

/// Float evaluator for a [`RationalFunction`] over a fixed parameter order.
#[derive(Clone, Debug)]
pub struct CompiledFunction {
    num: Vec<CompiledTerm>,
    den: Vec<CompiledTerm>,
}

fn compile_poly(p: &Polynomial, order: &[ParamId]) -> Result<Vec<CompiledTerm>, RatFuncError> {
    use num_traits::ToPrimitive;
    p.terms()
        .map(|(m, c)| {
            let powers = m
                .powers()
                .iter()
                .map(|(q, e)| {
                    order
                        .iter()
                        .position(|o| o == q)
                        .map(|i| (i, *e as i32))
                        .ok_or_else(|| RatFuncError::MissingParameter(q.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((c.to_f64().unwrap_or(f64::NAN), powers))
        })
        .collect()
}

fn eval_terms(terms: &[CompiledTerm], x: &[f64]) -> f64 {
    terms
        .iter()
        .map(|(c, ps)| ps.iter().fold(*c, |acc, (i, e)| acc * x[*i].powi(*e)))
        .sum()
}

impl CompiledFunction {
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, RatFuncError> {
        let den = eval_terms(&self.den, x);
        if den.abs() <= EPSILON_DEN || !den.is_finite() {
            return Err(RatFuncError::DenominatorNearZero(den));
        }
        Ok(eval_terms(&self.num, x) / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfunc::parse_rational_function;

    fn rf(s: &str) -> RationalFunction {
        parse_rational_function(s).unwrap()
    }

    #[test]
    fn add_cancels_to_constant() {
        assert_eq!(&rf("x+1") + &rf("1-x"), RationalFunction::from_integer(2));
        let f = rf("(x*y+3)/(y+1)");
        assert_eq!(&RationalFunction::zero() + &f, f);
        assert_eq!(&f + &RationalFunction::zero(), f);
        assert_eq!(&f * &RationalFunction::one(), f);
        assert!((&f - &f).is_zero());
        assert_eq!(&f - &f, RationalFunction::zero());
    }

    #[test]
    fn sign_normalization() {
        let a = rf("(x+1)/(x+2)");
        let b = rf("(-x-1)/(-x-2)");
        assert_eq!(a, b);
        assert!(a.equals(&b));
        assert!(!a.equals(&rf("(x+2)/(x+1)")));
        assert!(a.denominator().leading_coeff().unwrap().is_one());
    }

    #[test]
    fn division_by_zero_function() {
        let f = rf("x");
        assert_eq!(
            f.checked_div(&RationalFunction::zero()),
            Err(RatFuncError::DivisionByZeroFunction)
        );
        assert_eq!(
            RationalFunction::new(Polynomial::one(), Polynomial::zero()),
            Err(RatFuncError::DivisionByZeroFunction)
        );
    }

    #[test]
    fn evaluate_direct() {
        let f = rf("(2*x*y+3)/(y+1)");
        let point = BTreeMap::from([
            (ParamId::new("x").unwrap(), 1.0),
            (ParamId::new("y").unwrap(), 1.0),
        ]);
        assert_eq!(f.evaluate(&point).unwrap(), 2.5);
        let partial = BTreeMap::from([(ParamId::new("x").unwrap(), 1.0)]);
        assert_eq!(
            f.evaluate(&partial),
            Err(RatFuncError::MissingParameter("y".into()))
        );
        let g = rf("1/(y-1)");
        let at_one = BTreeMap::from([(ParamId::new("y").unwrap(), 1.0)]);
        assert!(matches!(
            g.evaluate(&at_one),
            Err(RatFuncError::DenominatorNearZero(_))
        ));
    }

    #[test]
    fn reduce_cancels_exact_factors() {
        let f = rf("(x^2-1)/(x-1)");
        assert_eq!(f.reduce(), rf("x+1"));
        let g = rf("(x*y)/(x*y*z + x)");
        assert_eq!(g.reduce(), rf("y/(y*z+1)"));
        let h = rf("(x-1)/(x^2-1)");
        assert_eq!(h.reduce(), rf("1/(x+1)"));
    }

    #[test]
    fn compiled_matches_exact() {
        let f = rf("(2*x*y+3)/(y^2+1)");
        let order = [ParamId::new("y").unwrap(), ParamId::new("x").unwrap()];
        let c = f.compile(&order).unwrap();
        assert!((c.evaluate(&[2.0, 0.5]).unwrap() - 5.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn display_form() {
        assert_eq!(rf("(x+1)/(y+1)").to_string(), "(x + 1)/(y + 1)");
        assert_eq!(rf("x*y").to_string(), "x*y");
        assert_eq!(rf("1/2*x").to_string(), "(1/2)*x");
    }
}
