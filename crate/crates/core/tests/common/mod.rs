#![allow(dead_code)]

use presto::model::{Pdtmc, PdtmcBuilder};
use presto::ratfunc::{Coeff, ParamId, RationalFunction};
use rand::Rng;

pub const GOAL: &str = "goal";

pub fn pid(name: &str) -> ParamId {
    ParamId::new(name).unwrap()
}

fn rat<R: Rng>(rng: &mut R) -> Coeff {
    let d: i64 = rng.random_range(2..=9);
    Coeff::new(rng.random_range(1..d).into(), d.into())
}

/// A random parametric chain with up to `max_states` states and up to
/// `max_params` parameters in [0.1, 0.9].
///
/// The last state is an absorbing "goal". With `leaky` set the second to last
/// state is an absorbing trap, so the goal may be missed. State rewards are
/// registered as "r".
pub fn random_model<R: Rng>(
    rng: &mut R,
    max_states: usize,
    max_params: usize,
    leaky: bool,
) -> Pdtmc {
    let n = rng.random_range(4..=max_states);
    let k = rng.random_range(1..=max_params);
    let mut b = PdtmcBuilder::new();
    let params: Vec<ParamId> = (0..k).map(|i| pid(&format!("x{i}"))).collect();
    for p in &params {
        b.param(&p.to_string(), 0.1, 0.9).unwrap();
    }
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    for (i, s) in names.iter().enumerate() {
        let labels: Vec<&str> = if i == n - 1 { vec![GOAL] } else { vec![] };
        b.state(s, labels).unwrap();
    }
    let absorbing = |i: usize| i == n - 1 || (leaky && i == n - 2);
    let var =
        |rng: &mut R| RationalFunction::var(params[rng.random_range(0..params.len())].clone());
    for i in 0..n {
        if absorbing(i) {
            b.transition(&names[i], &names[i], RationalFunction::one())
                .unwrap();
            continue;
        }
        let mut succ: Vec<usize> = Vec::new();
        let width = rng.random_range(1..=3);
        while succ.len() < width {
            let t = rng.random_range(0..n);
            if !succ.contains(&t) {
                succ.push(t);
            }
        }
        // keep every state able to move forward so chains do not all stall
        if !succ.iter().any(|t| *t > i) {
            succ[0] = rng.random_range(i + 1..n);
        }
        let one = RationalFunction::one();
        let probs: Vec<RationalFunction> = match succ.len() {
            1 => vec![one],
            2 => {
                let f = match rng.random_range(0..4) {
                    0 => RationalFunction::constant(rat(rng)),
                    1 => var(rng),
                    2 => &RationalFunction::constant(rat(rng)) * &var(rng),
                    _ => &var(rng) * &var(rng),
                };
                vec![f.clone(), &one - &f]
            }
            _ => {
                let x = var(rng);
                let c = RationalFunction::constant(rat(rng));
                let a = &c * &x;
                let bb = &(&one - &c) * &x;
                vec![a, bb, &one - &x]
            }
        };
        for (t, p) in succ.iter().zip(probs) {
            b.transition(&names[i], &names[*t], p).unwrap();
        }
        let r = match rng.random_range(0..3) {
            0 => RationalFunction::from_integer(rng.random_range(1..5)),
            1 => var(rng),
            _ => RationalFunction::zero(),
        };
        b.reward_entry("r", &names[i], r).unwrap();
    }
    b.build().unwrap()
}
