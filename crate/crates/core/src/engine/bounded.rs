//! Step-bounded operators as k-fold vector recurrences. Transition entries
//! are polynomials, so every result is a polynomial too.

use crate::model::{Pdtmc, RewardStructure};
use crate::ratfunc::RationalFunction;

fn indicator(set: &[bool]) -> Vec<RationalFunction> {
    set.iter()
        .map(|b| {
            if *b {
                RationalFunction::one()
            } else {
                RationalFunction::zero()
            }
        })
        .collect()
}

/// `(P x)(s) = sum_v P(s,v) x(v)`.
fn step(m: &Pdtmc, x: &[RationalFunction]) -> Vec<RationalFunction> {
    (0..m.num_states())
        .map(|s| {
            m.row(s)
                .iter()
                .fold(RationalFunction::zero(), |acc, (t, p)| {
                    if x[*t].is_zero() {
                        acc
                    } else {
                        &acc + &(p * &x[*t])
                    }
                })
        })
        .collect()
}

/// Probability that the next state satisfies the formula, per state.
pub fn next(m: &Pdtmc, phi: &[bool]) -> Vec<RationalFunction> {
    step(m, &indicator(phi))
}

/// Probability of `left U<=k right`, per state.
pub fn bounded_until(m: &Pdtmc, left: &[bool], right: &[bool], k: u32) -> Vec<RationalFunction> {
    let mut x = indicator(right);
    for _ in 0..k {
        let stepped = step(m, &x);
        x = stepped
            .into_iter()
            .enumerate()
            .map(|(s, v)| {
                if right[s] {
                    RationalFunction::one()
                } else if !left[s] {
                    RationalFunction::zero()
                } else {
                    v
                }
            })
            .collect();
    }
    x
}

/// Expected reward accumulated over the first `k` steps, per state.
pub fn cumulative_reward(m: &Pdtmc, rwd: &RewardStructure, k: u32) -> Vec<RationalFunction> {
    let r: Vec<RationalFunction> = (0..m.num_states()).map(|s| rwd.reward(s)).collect();
    let mut x = vec![RationalFunction::zero(); m.num_states()];
    for _ in 0..k {
        x = step(m, &x)
            .into_iter()
            .zip(&r)
            .map(|(v, rs)| &v + rs)
            .collect();
    }
    x
}

/// Expected state reward at exactly step `k`, per state.
pub fn instantaneous_reward(m: &Pdtmc, rwd: &RewardStructure, k: u32) -> Vec<RationalFunction> {
    let mut x: Vec<RationalFunction> = (0..m.num_states()).map(|s| rwd.reward(s)).collect();
    for _ in 0..k {
        x = step(m, &x);
    }
    x
}
