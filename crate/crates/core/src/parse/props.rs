use super::{syntax, Cursor, ParseError, Tok};
use crate::pctl::{Comparator, PathFormula, Property, Requirement, RewardKind, StateFormula};

/// Parses a `.pctl` file into threshold requirements.
///
/// Each requirement is `[id ':'] property ('>=' | '<=') number [';']`. Missing
/// ids default to `R<n>` by position.
pub fn parse_properties(src: &str) -> Result<Vec<Requirement>, ParseError> {
    let mut cur = Cursor::new(src)?;
    let mut out: Vec<Requirement> = Vec::new();
    if cur.at_end() {
        return Err(syntax(cur.pos(), "no requirements found"));
    }
    while !cur.at_end() {
        let start = cur.pos();
        let id = if matches!(cur.peek(), Some(Tok::Ident(_)))
            && cur.peek_at(1) == Some(&Tok::Punct(":"))
        {
            let (id, _) = cur.expect_ident()?;
            cur.bump();
            id
        } else {
            format!("R{}", out.len() + 1)
        };
        if out.iter().any(|r| r.id == id) {
            return Err(ParseError::Invalid {
                pos: start,
                message: format!("duplicate requirement id '{id}'"),
            });
        }
        let property = property(&mut cur)?;
        let comparator = if cur.eat_punct(">=") {
            Comparator::AtLeast
        } else if cur.eat_punct("<=") {
            Comparator::AtMost
        } else if cur.is_punct(">") || cur.is_punct("<") {
            return Err(syntax(
                cur.pos(),
                "strict comparators are not supported; use '>=' or '<='",
            ));
        } else {
            return Err(ParseError::UnboundComparator { pos: start, id });
        };
        let (threshold, pos) = cur.expect_number()?;
        if !threshold.is_finite() {
            return Err(syntax(pos, "threshold must be finite"));
        }
        cur.eat_punct(";");
        out.push(Requirement {
            id,
            property,
            comparator,
            threshold,
        });
    }
    Ok(out)
}

/// Parses a single bare property such as `P=? [ X "done" ]`.
pub fn parse_property(src: &str) -> Result<Property, ParseError> {
    let mut cur = Cursor::new(src)?;
    let p = property(&mut cur)?;
    cur.eat_punct(";");
    if !cur.at_end() {
        return Err(cur.unexpected("end of input"));
    }
    Ok(p)
}

/// Renders requirements in the `.pctl` format.
pub fn write_properties(reqs: &[Requirement]) -> String {
    reqs.iter().map(|r| format!("{r}\n")).collect()
}

fn property(cur: &mut Cursor<'_>) -> Result<Property, ParseError> {
    if cur.is_ident("P") {
        cur.bump();
        cur.expect_punct("=?")?;
        cur.expect_punct("[")?;
        let path = path(cur)?;
        cur.expect_punct("]")?;
        return Ok(Property::Prob(path));
    }
    if cur.is_ident("R") {
        cur.bump();
        cur.expect_punct("{")?;
        let (structure, _) = cur.expect_string()?;
        cur.expect_punct("}")?;
        cur.expect_punct("=?")?;
        cur.expect_punct("[")?;
        let kind = if cur.is_ident("F") {
            cur.bump();
            RewardKind::Reach(state(cur)?)
        } else if cur.is_ident("C") {
            cur.bump();
            cur.expect_punct("<=")?;
            RewardKind::Cumulative(positive(cur)?)
        } else if cur.is_ident("I") {
            cur.bump();
            cur.expect_punct("=")?;
            RewardKind::Instantaneous(positive(cur)?)
        } else if cur.is_ident("S") {
            cur.bump();
            RewardKind::SteadyState
        } else {
            return Err(cur.unexpected("'F', 'C<=k', 'I=k' or 'S'"));
        };
        cur.expect_punct("]")?;
        return Ok(Property::Reward { structure, kind });
    }
    Err(cur.unexpected("'P=?' or 'R{\"...\"}=?'"))
}

fn positive(cur: &mut Cursor<'_>) -> Result<u32, ParseError> {
    let (k, pos) = cur.expect_int()?;
    if k == 0 {
        return Err(syntax(pos, "step bound must be at least 1"));
    }
    Ok(k)
}

fn bound(cur: &mut Cursor<'_>) -> Result<Option<u32>, ParseError> {
    if cur.eat_punct("<=") {
        Ok(Some(positive(cur)?))
    } else {
        Ok(None)
    }
}

fn path(cur: &mut Cursor<'_>) -> Result<PathFormula, ParseError> {
    if cur.is_ident("X") {
        cur.bump();
        return Ok(PathFormula::Next(state(cur)?));
    }
    if cur.is_ident("F") {
        cur.bump();
        let bound = bound(cur)?;
        return Ok(PathFormula::Eventually {
            target: state(cur)?,
            bound,
        });
    }
    let left = state(cur)?;
    if !cur.is_ident("U") {
        return Err(cur.unexpected("'U'"));
    }
    cur.bump();
    let bound = bound(cur)?;
    let right = state(cur)?;
    Ok(PathFormula::Until { left, right, bound })
}

fn state(cur: &mut Cursor<'_>) -> Result<StateFormula, ParseError> {
    let mut acc = unary(cur)?;
    while cur.eat_punct("&") {
        acc = StateFormula::and(acc, unary(cur)?);
    }
    Ok(acc)
}

fn unary(cur: &mut Cursor<'_>) -> Result<StateFormula, ParseError> {
    if cur.eat_punct("!") {
        return Ok(StateFormula::negation(unary(cur)?));
    }
    let pos = cur.pos();
    match cur.peek() {
        Some(Tok::Str(_)) => Ok(StateFormula::Atom(cur.expect_string()?.0)),
        Some(Tok::Ident(w)) if w == "true" => {
            cur.bump();
            Ok(StateFormula::True)
        }
        Some(Tok::Ident(w)) if w == "false" => {
            cur.bump();
            Ok(StateFormula::False)
        }
        Some(Tok::Ident(w)) if w == "P" || w == "R" => Err(syntax(
            pos,
            "nested probabilistic or reward operators are not supported inside path formulas",
        )),
        Some(Tok::Punct("(")) => {
            cur.bump();
            let f = state(cur)?;
            cur.expect_punct(")")?;
            Ok(f)
        }
        _ => Err(cur.unexpected("a state formula")),
    }
}
