//! Infix reader for polynomial and rational-function expressions.
//!
//! Grammar (precedence low to high):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | ident | '(' expr ')'
//! ```
//!
//! Numbers are decimal literals read exactly (`0.95` is `19/20`).

use std::str::FromStr;

use super::{Coeff, ParamId, Polynomial, RationalFunction};
use num_bigint::BigInt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at offset {offset}")]
pub struct ExprError {
    pub offset: usize,
    pub message: String,
}

/// What the reader accepts beyond sums and products. Without general
/// division only numeric divisors such as `1/3` are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExprOptions {
    pub allow_division: bool,
}

impl Default for ExprOptions {
    fn default() -> Self {
        Self {
            allow_division: true,
        }
    }
}

pub fn parse_rational_function(src: &str) -> Result<RationalFunction, ExprError> {
    parse_expression(src, ExprOptions::default())
}

pub fn parse_polynomial(src: &str) -> Result<Polynomial, ExprError> {
    let f = parse_expression(
        src,
        ExprOptions {
            allow_division: false,
        },
    )?;
    Ok(f.numerator().clone())
}

pub fn parse_expression(src: &str, opts: ExprOptions) -> Result<RationalFunction, ExprError> {
    let mut p = ExprReader { src, pos: 0, opts };
    let f = p.expr()?;
    p.skip_ws();
    if p.pos < src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(f)
}

/// Reads an exact decimal literal such as `12`, `0.95` or `1e-3`.
pub fn parse_decimal(text: &str) -> Option<Coeff> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], i32::from_str(&text[i + 1..]).ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        Coeff::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        Coeff::new(n, num_traits::pow(ten, (-scale) as usize))
    })
}

pub(crate) struct ExprReader<'a> {
    pub(crate) src: &'a str,
    pub(crate) pos: usize,
    pub(crate) opts: ExprOptions,
}

impl<'a> ExprReader<'a> {
    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expr(&mut self) -> Result<RationalFunction, ExprError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = &acc + &self.term()?;
            } else if self.eat('-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<RationalFunction, ExprError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = &acc * &self.unary()?;
            } else {
                self.skip_ws();
                if self.peek() != Some('/') {
                    return Ok(acc);
                }
                let at = self.pos;
                self.pos += 1;
                let rhs = self.unary()?;
                if !self.opts.allow_division && rhs.constant_value().is_none() {
                    return Err(ExprError {
                        offset: at,
                        message: "division by a parameter expression is not allowed".into(),
                    });
                }
                acc = acc.checked_div(&rhs).map_err(|_| ExprError {
                    offset: at,
                    message: "division by zero".into(),
                })?;
            }
        }
    }

    fn unary(&mut self) -> Result<RationalFunction, ExprError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<RationalFunction, ExprError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let e: u32 = self.src[start..self.pos]
            .parse()
            .map_err(|_| self.error("expected a non-negative integer exponent"))?;
        let num = base.numerator().pow(e);
        let den = base.denominator().pow(e);
        RationalFunction::new(num, den).map_err(|_| self.error("invalid power"))
    }

    fn atom(&mut self) -> Result<RationalFunction, ExprError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                while let Some(c) = self.peek() {
                    let exp_sign = matches!(c, '+' | '-')
                        && matches!(self.src[..self.pos].chars().last(), Some('e' | 'E'));
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let text = &self.src[start..self.pos];
                let c = parse_decimal(text).ok_or_else(|| ExprError {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                Ok(RationalFunction::constant(c))
            }
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                let id = ParamId::new(name).map_err(|e| ExprError {
                    offset: start,
                    message: e.to_string(),
                })?;
                Ok(RationalFunction::var(id))
            }
            Some(c) => Err(self.error(format!("unexpected '{c}'"))),
            None => Err(self.error("unexpected end of expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        assert_eq!(
            parse_decimal("0.95"),
            Some(Coeff::new(19.into(), 20.into()))
        );
        assert_eq!(parse_decimal("12"), Some(Coeff::from_integer(12.into())));
        assert_eq!(
            parse_decimal("1e-3"),
            Some(Coeff::new(1.into(), 1000.into()))
        );
        assert_eq!(
            parse_decimal("2.5E2"),
            Some(Coeff::from_integer(250.into()))
        );
        assert_eq!(parse_decimal("1.2.3"), None);
        assert_eq!(parse_decimal("."), None);
    }

    #[test]
    fn precedence_and_powers() {
        let f = parse_rational_function("1 + 2*x^2 - -x").unwrap();
        let g = parse_rational_function("(x + 1)*(2*x - 1) + 2").unwrap();
        // 2x^2 + x + 1 both ways
        assert!(f.equals(&g));
    }

    #[test]
    fn division_can_be_rejected() {
        let err = parse_polynomial("2/alpha").unwrap_err();
        assert_eq!(err.offset, 1);
        assert!(parse_polynomial("alpha*p1 + 1").is_ok());
        assert!(parse_polynomial("alpha/2 + 1/3").is_ok());
    }

    #[test]
    fn syntax_errors_report_offsets() {
        assert_eq!(parse_rational_function("x + ").unwrap_err().offset, 4);
        assert_eq!(parse_rational_function("(x").unwrap_err().offset, 2);
        assert!(parse_rational_function("x / (y - y)").is_err());
        assert!(parse_rational_function("x y").is_err());
    }
}
