//! Unbounded reachability and reachability rewards by state elimination.
//!
//! Eliminating a state `s` reroutes every path `u -> s -> v` into a direct
//! edge, `P'(u,v) = P(u,v) + P(u,s) P(s,v) / (1 - P(s,s))`, and carries the
//! reward `s` would have earned back to `u`,
//! `r'(u) = r(u) + P(u,s) r(s) / (1 - P(s,s))`. Once only the initial and
//! target states remain the answer can be read off directly.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::EngineError;
use crate::model::{Pdtmc, StateId};
use crate::ratfunc::RationalFunction;

/// Which state to eliminate next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EliminationOrder {
    /// Smallest `in-degree * out-degree` first, ties by state index.
    #[default]
    MinDegree,
    /// Increasing state index.
    Ascending,
    /// Decreasing state index.
    Descending,
}

#[derive(Debug, Clone)]
struct Node {
    succ: BTreeMap<StateId, RationalFunction>,
    pred: BTreeSet<StateId>,
    reward: RationalFunction,
}

/// States from which some state in `target` is reachable through states in
/// `allowed` (targets themselves count as reaching).
pub(crate) fn can_reach(m: &Pdtmc, target: &[bool], allowed: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n {
        for (t, f) in m.row(s) {
            if !f.is_zero() {
                preds[*t].push(s);
            }
        }
    }
    let mut seen = target.to_vec();
    let mut queue: VecDeque<StateId> = (0..n).filter(|s| target[*s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !seen[s] && allowed[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

fn reachable_from(m: &Pdtmc, start: StateId, stop: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; m.num_states()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        if stop[s] {
            continue;
        }
        for (t, f) in m.row(s) {
            if !f.is_zero() && !seen[*t] {
                seen[*t] = true;
                queue.push_back(*t);
            }
        }
    }
    seen
}

pub(crate) struct Outcome {
    pub function: RationalFunction,
    pub unreachable: bool,
}

/// Probability, from `start`, of reaching a `target` state while staying in
/// `allowed` states before that, and optionally the expected reward earned on
/// the way.
pub(crate) fn eliminate(
    m: &Pdtmc,
    start: StateId,
    target: &[bool],
    allowed: &[bool],
    reward: Option<&crate::model::RewardStructure>,
    order: EliminationOrder,
) -> Result<Outcome, EngineError> {
    let zero = || Outcome {
        function: RationalFunction::zero(),
        unreachable: false,
    };
    if target[start] {
        return Ok(Outcome {
            function: if reward.is_some() {
                RationalFunction::zero()
            } else {
                RationalFunction::one()
            },
            unreachable: false,
        });
    }
    let reaches = can_reach(m, target, allowed);
    if !reaches[start] {
        return Ok(Outcome {
            unreachable: true,
            ..zero()
        });
    }
    // Only states that can still reach the target matter; edges into the
    // others carry probability that never arrives.
    let live: Vec<bool> = (0..m.num_states())
        .map(|s| reaches[s] && !target[s])
        .collect();
    let stop: Vec<bool> = live.iter().map(|l| !l).collect();
    let visited = reachable_from(m, start, &stop);

    let mut nodes: BTreeMap<StateId, Node> = BTreeMap::new();
    for s in (0..m.num_states()).filter(|s| visited[*s]) {
        let mut node = Node {
            succ: BTreeMap::new(),
            pred: BTreeSet::new(),
            reward: match (reward, live[s]) {
                (Some(r), true) => r.reward(s),
                _ => RationalFunction::zero(),
            },
        };
        if live[s] {
            for (t, f) in m.row(s) {
                if visited[*t] && (target[*t] || live[*t]) && !f.is_zero() {
                    node.succ.insert(*t, f.clone());
                }
            }
        }
        nodes.insert(s, node);
    }
    let edges: Vec<(StateId, StateId)> = nodes
        .iter()
        .flat_map(|(s, n)| n.succ.keys().map(move |t| (*s, *t)))
        .collect();
    for (s, t) in edges {
        if let Some(n) = nodes.get_mut(&t) {
            n.pred.insert(s);
        }
    }

    let mut pending: BTreeSet<StateId> = nodes
        .keys()
        .copied()
        .filter(|s| *s != start && live[*s])
        .collect();
    while let Some(s) = pick(&nodes, &pending, order) {
        pending.remove(&s);
        eliminate_state(&mut nodes, s)?;
    }

    let init = &nodes[&start];
    let stay = &RationalFunction::one()
        - &init
            .succ
            .get(&start)
            .cloned()
            .unwrap_or_else(RationalFunction::zero);
    if stay.is_zero() {
        return Ok(Outcome {
            unreachable: true,
            ..zero()
        });
    }
    let numerator = match reward {
        Some(_) => init.reward.clone(),
        None => init
            .succ
            .iter()
            .filter(|(t, _)| target[**t])
            .fold(RationalFunction::zero(), |acc, (_, f)| (&acc + f).reduce()),
    };
    let function = numerator.checked_div(&stay)?.reduce();
    Ok(Outcome {
        function,
        unreachable: false,
    })
}

fn pick(
    nodes: &BTreeMap<StateId, Node>,
    pending: &BTreeSet<StateId>,
    order: EliminationOrder,
) -> Option<StateId> {
    match order {
        EliminationOrder::Ascending => pending.iter().next().copied(),
        EliminationOrder::Descending => pending.iter().next_back().copied(),
        EliminationOrder::MinDegree => pending
            .iter()
            .map(|s| {
                let n = &nodes[s];
                let ins = n.pred.iter().filter(|p| *p != s).count();
                let outs = n.succ.keys().filter(|t| *t != s).count();
                (ins * outs, *s)
            })
            .min()
            .map(|(_, s)| s),
    }
}

fn eliminate_state(nodes: &mut BTreeMap<StateId, Node>, s: StateId) -> Result<(), EngineError> {
    let mut node = nodes.remove(&s).expect("pending state exists");
    let self_loop = node.succ.remove(&s);
    node.pred.remove(&s);
    let stay = match self_loop {
        Some(p) => (&RationalFunction::one() - &p).reduce(),
        None => RationalFunction::one(),
    };
    if stay.is_zero() {
        // a trap: whatever flows in never leaves
        for u in &node.pred {
            if let Some(n) = nodes.get_mut(u) {
                n.succ.remove(&s);
            }
        }
        return Ok(());
    }
    for v in node.succ.keys() {
        if let Some(n) = nodes.get_mut(v) {
            n.pred.remove(&s);
        }
    }
    for u in node.pred.iter().copied() {
        let Some(mut pu) = nodes.get_mut(&u).and_then(|n| n.succ.remove(&s)) else {
            continue;
        };
        if !stay.is_one() {
            pu = pu.checked_div(&stay)?.reduce();
        }
        for (v, pv) in &node.succ {
            let add = (&pu * pv).reduce();
            let un = nodes.get_mut(&u).expect("predecessor exists");
            let entry = un.succ.entry(*v).or_insert_with(RationalFunction::zero);
            *entry = (&*entry + &add).reduce();
            if entry.is_zero() {
                un.succ.remove(v);
            } else if let Some(vn) = nodes.get_mut(v) {
                vn.pred.insert(u);
            }
        }
        if !node.reward.is_zero() {
            let un = nodes.get_mut(&u).expect("predecessor exists");
            un.reward = (&un.reward + &(&pu * &node.reward)).reduce();
        }
    }
    Ok(())
}
