use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Monomial, ParamId};

pub type Coeff = BigRational;

/// Multivariate polynomial with exact rational coefficients. Terms are kept in
/// graded lexicographic order and zero coefficients are never stored, so two
/// equal polynomials always have identical term maps.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Coeff>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Coeff::one())
    }

    pub fn constant(c: Coeff) -> Self {
        Self::term(c, Monomial::one())
    }

    pub fn from_integer(n: i64) -> Self {
        Self::constant(Coeff::from_integer(BigInt::from(n)))
    }

    pub fn var(p: ParamId) -> Self {
        Self::term(Coeff::one(), Monomial::var(p))
    }

    pub fn term(c: Coeff, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Self { terms }
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, Coeff)>,
    {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: Coeff) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    /// The value of a constant polynomial (including zero).
    pub fn constant_value(&self) -> Option<Coeff> {
        match self.terms.len() {
            0 => Some(Coeff::zero()),
            1 => {
                let (m, c) = self.terms.iter().next()?;
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    /// Leading term under graded lexicographic order.
    pub fn leading_term(&self) -> Option<(&Monomial, &Coeff)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coeff(&self) -> Option<&Coeff> {
        self.leading_term().map(|(_, c)| c)
    }

    pub fn total_degree(&self) -> u32 {
        self.leading_term().map_or(0, |(m, _)| m.degree())
    }

    pub fn degree_in(&self, p: &ParamId) -> u32 {
        self.terms.keys().map(|m| m.exponent(p)).max().unwrap_or(0)
    }

    pub fn params(&self) -> BTreeSet<ParamId> {
        self.terms
            .keys()
            .flat_map(|m| m.params().cloned())
            .collect()
    }

    pub fn scale(&self, c: &Coeff) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, mono: &Monomial, c: &Coeff) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.mul(mono), k * c))
                .collect(),
        }
    }

    pub fn pow(&self, mut e: u32) -> Polynomial {
        let mut base = self.clone();
        let mut acc = Polynomial::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Exact quotient `self / divisor`, or `None` when the division leaves a
    /// remainder.
    pub fn div_exact(&self, divisor: &Polynomial) -> Option<Polynomial> {
        let (lm, lc) = divisor.leading_term()?;
        let mut rem = self.clone();
        let mut quot = Polynomial::zero();
        while let Some((m, c)) = rem.leading_term() {
            let qm = m.div(lm)?;
            let qc = c / lc;
            rem = &rem - &divisor.mul_monomial(&qm, &qc);
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    /// Greatest common divisor of all coefficients' numerators over the lcm
    /// of denominators, with the sign of the leading coefficient.
    pub fn content(&self) -> Coeff {
        use num_integer::Integer;
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for c in self.terms.values() {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        if num.is_zero() {
            return Coeff::one();
        }
        let content = Coeff::new(num, den);
        match self.leading_coeff() {
            Some(lc) if lc.is_negative() => -content,
            _ => content,
        }
    }

    /// Greatest common monomial factor of all terms.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |acc, m| acc.gcd(m))
    }

    pub fn evaluate<F>(&self, mut value: F) -> Option<f64>
    where
        F: FnMut(&ParamId) -> Option<f64>,
    {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            acc += c.to_f64()? * m.evaluate(&mut value)?;
        }
        Some(acc)
    }

    /// Replaces parameters by exact values; unlisted parameters stay symbolic.
    pub fn substitute(&self, values: &BTreeMap<ParamId, Coeff>) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut coeff = c.clone();
            let mut rest = Vec::new();
            for (p, e) in m.powers() {
                match values.get(p) {
                    Some(v) => coeff *= num_traits::pow(v.clone(), *e as usize),
                    None => rest.push((p.clone(), *e)),
                }
            }
            out.add_term(Monomial::from_powers(rest), coeff);
        }
        out
    }

    /// Renames parameters; colliding targets are merged.
    pub fn rename(&self, map: &BTreeMap<ParamId, ParamId>) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| {
            let powers = m
                .powers()
                .iter()
                .map(|(p, e)| (map.get(p).cloned().unwrap_or_else(|| p.clone()), *e));
            (Monomial::from_powers(powers), c.clone())
        }))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let (mut big, small) = if self.len() >= rhs.len() {
            (self.clone(), rhs)
        } else {
            (rhs.clone(), self)
        };
        for (m, c) in &small.terms {
            big.add_term(m.clone(), c.clone());
        }
        big
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        if let Some(c) = self.constant_value() {
            return rhs.scale(&c);
        }
        if let Some(c) = rhs.constant_value() {
            return self.scale(&c);
        }
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

pub(crate) fn fmt_coeff(c: &Coeff) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Infix rendering in descending term order, e.g. `alpha*p1 + (-1)`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i > 0 {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            } else if neg {
                write!(f, "-")?;
            }
            match (m.is_one(), abs.is_one()) {
                (true, _) => write!(f, "{}", fmt_coeff(&abs))?,
                (false, true) => write!(f, "{m}")?,
                (false, false) if abs.is_integer() => write!(f, "{}*{m}", fmt_coeff(&abs))?,
                (false, false) => write!(f, "({})*{m}", fmt_coeff(&abs))?,
            }
        }
        Ok(())
    }
}
