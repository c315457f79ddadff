use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use super::ParamId;

/// A power product of parameters. Exponents are kept sorted by parameter
/// name and are never zero; the empty product is the constant monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    powers: Vec<(ParamId, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(p: ParamId) -> Self {
        Self {
            powers: vec![(p, 1)],
        }
    }

    /// Builds a monomial from arbitrary `(param, exponent)` pairs. Repeated
    /// parameters are merged and zero exponents dropped.
    pub fn from_powers<I>(powers: I) -> Self
    where
        I: IntoIterator<Item = (ParamId, u32)>,
    {
        let mut merged: BTreeMap<ParamId, u32> = BTreeMap::new();
        for (p, e) in powers {
            *merged.entry(p).or_insert(0) += e;
        }
        Self {
            powers: merged.into_iter().filter(|(_, e)| *e > 0).collect(),
        }
    }

    pub fn is_one(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, p: &ParamId) -> u32 {
        self.powers
            .iter()
            .find(|(q, _)| q == p)
            .map_or(0, |(_, e)| *e)
    }

    pub fn powers(&self) -> &[(ParamId, u32)] {
        &self.powers
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamId> {
        self.powers.iter().map(|(p, _)| p)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.powers.len() + other.powers.len());
        let (mut i, mut j) = (0, 0);
        while i < self.powers.len() && j < other.powers.len() {
            let (a, ea) = &self.powers[i];
            let (b, eb) = &other.powers[j];
            match a.cmp(b) {
                Ordering::Less => {
                    out.push((a.clone(), *ea));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b.clone(), *eb));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.clone(), ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.powers[i..]);
        out.extend_from_slice(&other.powers[j..]);
        Monomial { powers: out }
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.powers.len());
        let mut j = 0;
        for (p, e) in &self.powers {
            if j < other.powers.len() && other.powers[j].0 < *p {
                return None;
            }
            if j < other.powers.len() && other.powers[j].0 == *p {
                let f = other.powers[j].1;
                j += 1;
                match e.cmp(&f) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((p.clone(), e - f)),
                }
            } else {
                out.push((p.clone(), *e));
            }
        }
        if j < other.powers.len() {
            return None;
        }
        Some(Monomial { powers: out })
    }

    /// Componentwise minimum of exponents.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let powers = self
            .powers
            .iter()
            .filter_map(|(p, e)| {
                let f = other.exponent(p);
                (f > 0).then(|| (p.clone(), (*e).min(f)))
            })
            .collect();
        Monomial { powers }
    }

    pub fn evaluate<F>(&self, mut value: F) -> Option<f64>
    where
        F: FnMut(&ParamId) -> Option<f64>,
    {
        let mut acc = 1.0;
        for (p, e) in &self.powers {
            acc *= value(p)?.powi(*e as i32);
        }
        Some(acc)
    }
}

/// Graded lexicographic order: total degree first, then the monomial with the
/// larger exponent on the alphabetically first differing parameter wins.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.powers.get(i), other.powers.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match ea.cmp(eb) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        ord => return ord,
                    },
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.powers.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for (p, e) in &self.powers {
            for _ in 0..*e {
                if !first {
                    write!(f, "*")?;
                }
                write!(f, "{p}")?;
                first = false;
            }
        }
        Ok(())
    }
}
