mod common;

use std::collections::BTreeMap;

use common::{pid, random_model, GOAL};
use presto::engine::{
    check, oracle_solve, reachability_from, Checker, EliminationOrder, EngineError, SolveMethod,
};
use presto::model::{fruit_picking_model, Valuation};
use presto::parse::{parse_properties, parse_property};
use presto::pctl::{Property, StateFormula};
use presto::ratfunc::{parse_rational_function, RationalFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TABLE: &str = include_str!("../fixtures/requirements.pctl");

/// Reference closed forms, with parameters indexed from 1.
const GOLDEN: [&str; 3] = [
    "(α*p1*β*p2+(-1)*α*p1)/(α*p1*β*p2*p3+(-1))",
    "(-1 * (α*p1*β*p2*t3+t1+α*p1*t2))/(α*p1*β*p2*p3+(-1))",
    "(-1 * (α*p1*β*p2*e3+e1+α*p1*e2))/(α*p1*β*p2*p3+(-1))",
];

fn golden(i: usize) -> RationalFunction {
    let text = GOLDEN[i].replace('α', "alpha").replace('β', "beta");
    let f = parse_rational_function(&text).unwrap();
    let mut map = BTreeMap::new();
    for (from, to) in [("1", "0"), ("2", "1"), ("3", "2")] {
        map.insert(pid(&format!("t{from}")), pid(&format!("t{to}")));
        map.insert(pid(&format!("e{from}")), pid(&format!("e{to}")));
    }
    f.rename(&map)
}

fn valuation(pairs: &[(&str, f64)]) -> Valuation {
    Valuation::new(pairs.iter().map(|(k, v)| (pid(k), *v)).collect())
}

fn with_constants(v: &Valuation) -> BTreeMap<presto::ratfunc::ParamId, f64> {
    v.clone()
        .with_constants(fruit_picking_model().params())
        .values
}

#[test]
fn fixture_matches_golden_expressions() {
    let m = fruit_picking_model();
    let reqs = parse_properties(TABLE).unwrap();
    for (i, r) in reqs.iter().enumerate() {
        let e = Checker::default().check_requirement(&m, r).unwrap();
        assert_eq!(e.requirement_id, r.id);
        assert!(e.function.equals(&golden(i)), "{}: {}", r.id, e.function);
    }
}

#[test]
fn fixture_order_independent() {
    let m = fruit_picking_model();
    let reqs = parse_properties(TABLE).unwrap();
    for r in &reqs {
        let a = Checker::with_order(EliminationOrder::Ascending)
            .check(&m, &r.property)
            .unwrap();
        let d = Checker::with_order(EliminationOrder::Descending)
            .check(&m, &r.property)
            .unwrap();
        assert!(a.function.equals(&d.function));
    }
}

#[test]
fn oracle_values_at_snapshots() {
    let m = fruit_picking_model();
    let r1 = parse_property(r#"P=? [ F "picking success" ]"#).unwrap();
    for (alpha, beta, want) in [(0.88, 0.12, 0.8318), (0.98, 0.01, 0.9308)] {
        let v = valuation(&[("alpha", alpha), ("beta", beta)]);
        let g = oracle_solve(&m, &v, &r1, SolveMethod::Gaussian).unwrap();
        let vi = oracle_solve(&m, &v, &r1, SolveMethod::ValueIteration).unwrap();
        assert!((g - vi).abs() <= 1e-9);
        assert!((g - want).abs() < 5e-5, "{g}");
    }
    let r2 = parse_property(r#"R{"time"}=? [ F "done" ]"#).unwrap();
    let v = valuation(&[
        ("alpha", 0.80),
        ("beta", 0.19),
        ("t0", 19.8),
        ("t1", 17.9),
        ("t2", 13.9),
    ]);
    let g = oracle_solve(&m, &v, &r2, SolveMethod::Gaussian).unwrap();
    assert!((g - 34.76).abs() < 5e-3, "{g}");
    let sym = check(&m, &r2)
        .unwrap()
        .function
        .evaluate(&with_constants(&v))
        .unwrap();
    assert!((sym - g).abs() < 1e-8);
}

#[test]
fn trivial_queries() {
    let m = fruit_picking_model();
    let s3 = m.state_index("s3").unwrap();
    let next = presto::engine::per_state_next(&m, &StateFormula::atom("done"));
    assert!(next[s3].is_one());

    let bu = check(&m, &parse_property(r#"P=? [ true U<=1 "done" ]"#).unwrap()).unwrap();
    assert!(bu.function.is_zero());

    let s4 = m.state_index("s4").unwrap();
    let f = reachability_from(
        &m,
        s4,
        &StateFormula::atom("picking success"),
        EliminationOrder::default(),
    )
    .unwrap();
    assert!(f.is_one());

    let err = check(&m, &parse_property(r#"R{"time"}=? [ S ]"#).unwrap()).unwrap_err();
    assert!(matches!(err, EngineError::Unsupported(_)));
    let err = check(&m, &parse_property(r#"P=? [ F "nowhere" ]"#).unwrap()).unwrap_err();
    assert!(matches!(err, EngineError::EmptyTarget(_)));
    let err = check(&m, &parse_property(r#"R{"cost"}=? [ F "done" ]"#).unwrap()).unwrap_err();
    assert!(matches!(err, EngineError::UnknownRewardStructure(_)));
    let err = check(
        &m,
        &parse_property(r#"R{"time"}=? [ F "picking success" ]"#).unwrap(),
    )
    .unwrap_err();
    assert!(matches!(err, EngineError::RewardDivergence { .. }));
}

#[test]
fn zero_rewards_give_zero() {
    let mut b = presto::model::PdtmcBuilder::new();
    b.param("x", 0.1, 0.9).unwrap();
    b.state("a", [""; 0]).unwrap();
    b.state("b", ["done"]).unwrap();
    b.transition_expr("a", "a", "x").unwrap();
    b.transition_expr("a", "b", "1 - x").unwrap();
    b.transition_expr("b", "b", "1").unwrap();
    b.reward(presto::model::RewardStructure::new("z")).unwrap();
    let m = b.build().unwrap();
    let e = check(&m, &parse_property(r#"R{"z"}=? [ F "done" ]"#).unwrap()).unwrap();
    assert!(e.function.is_zero());
}

#[test]
fn bounded_operators_match_numeric_recursion() {
    let m = fruit_picking_model();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let props = [
        r#"R{"time"}=? [ C<=3 ]"#,
        r#"R{"energy"}=? [ I=2 ]"#,
        r#"P=? [ F<=4 "done" ]"#,
        r#"P=? [ !"done" U<=3 "picking success" ]"#,
        r#"P=? [ X "done" ]"#,
    ];
    for text in props {
        let p = parse_property(text).unwrap();
        let e = check(&m, &p).unwrap();
        assert!(e.function.is_polynomial(), "{text}");
        for _ in 0..10 {
            let v = m.params().sample(&mut rng);
            let want = oracle_solve(&m, &v, &p, SolveMethod::Auto).unwrap();
            let got = e
                .function
                .evaluate(&v.clone().with_constants(m.params()).values)
                .unwrap();
            assert!((want - got).abs() <= 1e-8, "{text}: {want} vs {got}");
        }
    }
}

#[test]
fn monotone_in_alpha_and_beta() {
    let m = fruit_picking_model();
    let e = check(
        &m,
        &parse_property(r#"P=? [ F "picking success" ]"#).unwrap(),
    )
    .unwrap();
    let f = e
        .function
        .compile(&[pid("alpha"), pid("beta"), pid("p1"), pid("p2"), pid("p3")])
        .unwrap();
    let at = |a: f64, b: f64| f.evaluate(&[a, b, 0.95, 0.2, 0.95]).unwrap();
    let grid = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / 19.0;
    for i in 0..20 {
        for j in 0..19 {
            let a = grid(0.7, 0.99, i);
            assert!(at(a, grid(0.01, 0.2, j + 1)) <= at(a, grid(0.01, 0.2, j)) + 1e-12);
            let b = grid(0.01, 0.2, i);
            assert!(at(grid(0.7, 0.99, j + 1), b) >= at(grid(0.7, 0.99, j), b) - 1e-12);
        }
    }
}

#[test]
fn random_models_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let reach = parse_property(r#"P=? [ F "goal" ]"#).unwrap();
    let reward = parse_property(r#"R{"r"}=? [ F "goal" ]"#).unwrap();
    for i in 0..40 {
        let m = random_model(&mut rng, 8, 2, i % 2 == 0);
        let p = check(&m, &reach).unwrap();
        let r = check(&m, &reward);
        for _ in 0..5 {
            let v = m.params().sample(&mut rng);
            let want = oracle_solve(&m, &v, &reach, SolveMethod::Gaussian).unwrap();
            let got = p.function.evaluate(&v.values).unwrap();
            assert!((want - got).abs() <= 1e-8, "model {i}: {want} vs {got}");
            assert!((-1e-9..=1.0 + 1e-9).contains(&got));
            let want_r = oracle_solve(&m, &v, &reward, SolveMethod::Gaussian).unwrap();
            match &r {
                Ok(e) => {
                    let got = e.function.evaluate(&v.values).unwrap();
                    assert!(
                        (want_r - got).abs() <= 1e-8 * want_r.abs().max(1.0),
                        "model {i}: {want_r} vs {got}"
                    );
                }
                Err(EngineError::RewardDivergence { .. }) => assert!(want_r.is_infinite()),
                Err(e) => panic!("model {i}: {e}"),
            }
        }
        let _ = GOAL;
    }
}

#[test]
fn expression_json_round_trip() {
    let m = fruit_picking_model();
    let e = check(
        &m,
        &Property::Prob(presto::pctl::PathFormula::Eventually {
            target: StateFormula::atom("picking success"),
            bound: None,
        }),
    )
    .unwrap();
    let json = serde_json::to_string(&e).unwrap();
    let back: presto::engine::PmcExpression = serde_json::from_str(&json).unwrap();
    assert!(back.function.equals(&e.function));
    assert_eq!(back.params, e.params);
}

#[test]
fn random_models_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let reach = parse_property(r#"P=? [ F "goal" ]"#).unwrap();
    for i in 0..30 {
        let m = random_model(&mut rng, 10, 3, i % 2 == 1);
        let a = Checker::with_order(EliminationOrder::MinDegree)
            .check(&m, &reach)
            .unwrap();
        let b = Checker::with_order(EliminationOrder::Descending)
            .check(&m, &reach)
            .unwrap();
        assert!(a.function.equals(&b.function), "model {i}");
    }
}
