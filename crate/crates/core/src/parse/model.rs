use std::collections::BTreeSet;
use std::fmt::Write;

use super::{pos_at, syntax, Cursor, ParseError, Pos};
use crate::model::{ModelError, ParamKind, Pdtmc, PdtmcBuilder};
use crate::ratfunc::{parse_expression, Coeff, ExprOptions, RationalFunction};

struct Expr {
    value: RationalFunction,
    pos: Pos,
}

enum Item {
    Param {
        name: String,
        lo: f64,
        hi: f64,
        pos: Pos,
    },
    Const {
        name: String,
        value: Coeff,
        pos: Pos,
    },
    Init {
        name: String,
        pos: Pos,
    },
    State {
        name: String,
        labels: Vec<String>,
        pos: Pos,
    },
    Trans {
        from: (String, Pos),
        to: (String, Pos),
        prob: Expr,
    },
    Reward {
        name: String,
        entries: Vec<((String, Pos), Expr)>,
    },
}

/// Parses a `.pdtmc` model. Every row must sum symbolically to one.
pub fn parse_model(src: &str) -> Result<Pdtmc, ParseError> {
    let mut cur = Cursor::new(src)?;
    if !(cur.is_ident("pdtmc") || cur.is_ident("dtmc")) {
        return Err(cur.unexpected("model header 'pdtmc;'"));
    }
    cur.bump();
    cur.expect_punct(";")?;

    let mut items = Vec::new();
    while !cur.at_end() {
        items.push(parse_item(&mut cur)?);
    }
    build(items)
}

fn parse_item(cur: &mut Cursor<'_>) -> Result<Item, ParseError> {
    let pos = cur.pos();
    if cur.is_ident("param")
        && cur
            .peek_at(2)
            .is_some_and(|t| *t == super::Tok::Ident("in".into()))
    {
        cur.bump();
        let (name, pos) = cur.expect_ident()?;
        cur.expect_keyword("in")?;
        cur.expect_punct("[")?;
        let (lo, _) = cur.expect_number()?;
        cur.expect_punct(",")?;
        let (hi, _) = cur.expect_number()?;
        cur.expect_punct("]")?;
        cur.expect_punct(";")?;
        return Ok(Item::Param { name, lo, hi, pos });
    }
    if cur.is_ident("const") && cur.peek_at(2).is_some_and(|t| *t == super::Tok::Punct("=")) {
        cur.bump();
        let (name, pos) = cur.expect_ident()?;
        cur.expect_punct("=")?;
        let expr = expression(cur)?;
        let value = expr
            .value
            .constant_value()
            .ok_or_else(|| syntax(expr.pos, "constant value must be a number"))?;
        cur.expect_punct(";")?;
        return Ok(Item::Const { name, value, pos });
    }
    if cur.is_ident("init") && cur.peek_at(2).is_some_and(|t| *t == super::Tok::Punct(";")) {
        cur.bump();
        let (name, pos) = cur.expect_ident()?;
        cur.expect_punct(";")?;
        return Ok(Item::Init { name, pos });
    }
    if cur.is_ident("state") && matches!(cur.peek_at(1), Some(super::Tok::Ident(_))) {
        cur.bump();
        let (name, pos) = cur.expect_ident()?;
        let mut labels = Vec::new();
        if cur.eat_punct("{") {
            if !cur.is_punct("}") {
                loop {
                    labels.push(cur.expect_string()?.0);
                    if !cur.eat_punct(",") {
                        break;
                    }
                }
            }
            cur.expect_punct("}")?;
        }
        cur.expect_punct(";")?;
        return Ok(Item::State { name, labels, pos });
    }
    if cur.is_ident("reward") {
        cur.bump();
        let (name, _) = cur.expect_string()?;
        cur.expect_punct("{")?;
        let mut entries = Vec::new();
        while !cur.eat_punct("}") {
            let state = cur.expect_ident()?;
            cur.expect_punct(":")?;
            let value = expression(cur)?;
            cur.expect_punct(";")?;
            entries.push((state, value));
        }
        return Ok(Item::Reward { name, entries });
    }
    if matches!(cur.peek(), Some(super::Tok::Ident(_)))
        && cur.peek_at(1) == Some(&super::Tok::Punct("->"))
    {
        let from = cur.expect_ident()?;
        cur.expect_punct("->")?;
        let to = cur.expect_ident()?;
        cur.expect_punct(":")?;
        let prob = expression(cur)?;
        cur.expect_punct(";")?;
        return Ok(Item::Trans { from, to, prob });
    }
    Err(syntax(
        pos,
        format!(
            "expected a declaration (param, const, init, state, reward) or a transition, found {}",
            cur.peek()
                .map_or("end of input".to_string(), |t| t.to_string())
        ),
    ))
}

fn expression(cur: &mut Cursor<'_>) -> Result<Expr, ParseError> {
    let pos = cur.pos();
    let (text, start) = cur.take_until_semicolon()?;
    let value = parse_expression(
        text,
        ExprOptions {
            allow_division: false,
        },
    )
    .map_err(|e| syntax(pos_at(cur.src(), start + e.offset), e.message))?;
    Ok(Expr { value, pos })
}

fn model_error(pos: Pos, e: ModelError) -> ParseError {
    match e {
        ModelError::DuplicateState(name) => ParseError::DuplicateState { pos, name },
        ModelError::UnknownState(name) => ParseError::UnknownState { pos, name },
        ModelError::UnknownParameter(name) => ParseError::UnknownParameter { pos, name },
        other => ParseError::Invalid {
            pos,
            message: other.to_string(),
        },
    }
}

fn build(items: Vec<Item>) -> Result<Pdtmc, ParseError> {
    let mut b = PdtmcBuilder::new();
    for item in &items {
        match item {
            Item::Param { name, lo, hi, pos } => {
                b.param(name, *lo, *hi).map_err(|e| model_error(*pos, e))?;
            }
            Item::Const { name, value, pos } => {
                b.constant(name, value.clone())
                    .map_err(|e| model_error(*pos, e))?;
            }
            _ => {}
        }
    }
    for item in &items {
        if let Item::State { name, labels, pos } = item {
            b.state(name, labels.iter().cloned())
                .map_err(|e| model_error(*pos, e))?;
        }
    }
    let mut declared_rewards = BTreeSet::new();
    for item in &items {
        match item {
            Item::Init { name, pos } => {
                b.init(name).map_err(|e| model_error(*pos, e))?;
            }
            Item::Trans { from, to, prob } => {
                check_params(b.params(), prob)?;
                b.transition(&from.0, &to.0, prob.value.clone())
                    .map_err(|e| {
                        let pos = match e {
                            ModelError::UnknownState(ref s) if *s == to.0 => to.1,
                            _ => from.1,
                        };
                        model_error(pos, e)
                    })?;
            }
            Item::Reward { name, entries } => {
                if !declared_rewards.insert(name.clone()) {
                    let pos = entries.first().map(|e| e.0 .1).unwrap_or_default();
                    return Err(ParseError::Invalid {
                        pos,
                        message: format!("duplicate reward structure '{name}'"),
                    });
                }
                b.reward(crate::model::RewardStructure::new(name.clone()))
                    .map_err(|e| model_error(Pos::default(), e))?;
                for ((state, pos), value) in entries {
                    check_params(b.params(), value)?;
                    b.reward_entry(name, state, value.value.clone())
                        .map_err(|e| model_error(*pos, e))?;
                }
            }
            _ => {}
        }
    }
    let model = b.build().map_err(|e| model_error(Pos::default(), e))?;
    for s in 0..model.num_states() {
        let row = model.row(s);
        if row.is_empty() {
            return Err(ParseError::RowIncomplete {
                state: model.state_name(s).to_string(),
                detail: "no outgoing transitions".into(),
            });
        }
        let sum = row
            .iter()
            .fold(RationalFunction::zero(), |acc, (_, f)| &acc + f);
        if !sum.equals(&RationalFunction::one()) {
            return Err(ParseError::RowIncomplete {
                state: model.state_name(s).to_string(),
                detail: format!("outgoing probabilities sum to {sum}"),
            });
        }
    }
    Ok(model)
}

fn check_params(params: &crate::model::ParameterSet, e: &Expr) -> Result<(), ParseError> {
    match e.value.params().into_iter().find(|p| !params.contains(p)) {
        Some(p) => Err(ParseError::UnknownParameter {
            pos: e.pos,
            name: p.to_string(),
        }),
        None => Ok(()),
    }
}

fn quote_ok(s: &str) -> &str {
    debug_assert!(!s.contains('"'));
    s
}

/// Renders a model in the `.pdtmc` format; the output parses back to an
/// equal model.
pub fn write_model(m: &Pdtmc) -> String {
    let mut out = String::from("pdtmc;\n\n");
    for d in m.params().iter() {
        match &d.kind {
            ParamKind::Interval { lo, hi } => {
                let _ = writeln!(out, "param {} in [{:?}, {:?}];", d.id, lo, hi);
            }
            ParamKind::Constant(c) => {
                let _ = writeln!(
                    out,
                    "const {} = {};",
                    d.id,
                    RationalFunction::constant(c.clone())
                );
            }
        }
    }
    out.push('\n');
    for s in 0..m.num_states() {
        let labels = m.labels(s);
        if labels.is_empty() {
            let _ = writeln!(out, "state {};", m.state_name(s));
        } else {
            let ls: Vec<String> = labels
                .iter()
                .map(|l| format!("\"{}\"", quote_ok(l)))
                .collect();
            let _ = writeln!(out, "state {} {{{}}};", m.state_name(s), ls.join(", "));
        }
    }
    let _ = writeln!(out, "init {};\n", m.state_name(m.init()));
    for s in 0..m.num_states() {
        for (t, f) in m.row(s) {
            let _ = writeln!(out, "{} -> {} : {};", m.state_name(s), m.state_name(*t), f);
        }
    }
    for r in m.rewards() {
        let _ = writeln!(out, "\nreward \"{}\" {{", quote_ok(&r.name));
        for (s, f) in &r.rewards {
            let _ = writeln!(out, "  {} : {};", m.state_name(*s), f);
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fruit_picking_model;

    const FIXTURE: &str = include_str!("../../fixtures/fruitpicking.pdtmc");

    #[test]
    fn fixture_file_matches_builtin_model() {
        let m = parse_model(FIXTURE).unwrap();
        assert_eq!(m, fruit_picking_model());
        assert!(m.validate().is_empty());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let m = fruit_picking_model();
        let text = write_model(&m);
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn undeclared_parameter() {
        let src = "pdtmc;\nconst p1 = 0.9;\nstate a;\nstate b;\na -> b : alpha*p1;\na -> a : 1 - alpha*p1;\nb -> b : 1;\n";
        match parse_model(src) {
            Err(ParseError::UnknownParameter { name, pos }) => {
                assert_eq!(name, "alpha");
                assert_eq!(pos, Pos { line: 5, col: 10 });
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_state() {
        let src = "pdtmc;\nstate a;\nstate a;\na -> a : 1;\n";
        assert!(matches!(
            parse_model(src),
            Err(ParseError::DuplicateState {
                pos: Pos { line: 3, .. },
                ..
            })
        ));
    }

    #[test]
    fn incomplete_rows() {
        let src = "pdtmc;\nparam x in [0, 1];\nstate a;\nstate b;\na -> b : x;\nb -> b : 1;\n";
        assert!(
            matches!(parse_model(src), Err(ParseError::RowIncomplete { state, .. }) if state == "a")
        );
        let src = "pdtmc;\nstate a;\nstate b;\na -> b : 1;\n";
        assert!(
            matches!(parse_model(src), Err(ParseError::RowIncomplete { state, .. }) if state == "b")
        );
    }

    #[test]
    fn division_by_parameter_is_a_syntax_error() {
        let src = "pdtmc;\nparam x in [1, 2];\nstate a;\na -> a : x/x;\n";
        match parse_model(src) {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, Pos { line: 4, col: 11 }),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_model("pdtmc;\nstate a\n").unwrap_err();
        assert_eq!(err.pos(), Some(Pos { line: 3, col: 1 }));
        let err = parse_model("state a;").unwrap_err();
        assert_eq!(err.pos(), Some(Pos { line: 1, col: 1 }));
        let err = parse_model("pdtmc;\nstate a;\na -> b : 1;\n").unwrap_err();
        assert!(matches!(
            err,
            ParseError::UnknownState {
                pos: Pos { line: 3, col: 6 },
                ..
            }
        ));
    }
}
