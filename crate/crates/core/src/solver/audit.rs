use serde::{Deserialize, Serialize};

use super::{BilevelSolution, FollowerResponse, LeaderDecision};
use crate::instances::{FixedCompensation, Instance};
use crate::oracles::{solve_ptp, OfferedItem};
use crate::tol;
use crate::{Error, Result};

/// The offer `decision` makes to carrier `k`, priced by margins when the
/// decision carries them and by `compensation` otherwise.
pub fn offered_items(
    instance: &Instance,
    compensation: Option<&FixedCompensation>,
    decision: &LeaderDecision,
    k: usize,
) -> Result<Vec<OfferedItem>> {
    decision
        .offered(k)
        .into_iter()
        .map(|(i, margin)| {
            let (prize, leader_value) = match (margin, compensation) {
                (Some(m), _) => {
                    if m >= instance.margins().len() {
                        return Err(Error::InvalidArgument(format!("margin index {m} out of range")));
                    }
                    (instance.margin_compensation_at(m, i), instance.margin_profit_at(m, i))
                }
                (None, Some(c)) => (c.get(k, i), instance.price(i) - c.get(k, i)),
                (None, None) => {
                    return Err(Error::InvalidArgument(format!(
                        "item {i} has neither a margin nor a fixed compensation"
                    )))
                }
            };
            Ok(OfferedItem {
                vertex: i,
                prize,
                leader_value,
            })
        })
        .collect()
}

/// Lets every carrier answer `decision` optimally, breaking ties in the
/// leader's favour, and sums the leader's realized profit.
pub fn evaluate_decision(
    instance: &Instance,
    compensation: Option<&FixedCompensation>,
    decision: &LeaderDecision,
) -> Result<BilevelSolution> {
    decision.validate(instance)?;
    let mut responses = Vec::with_capacity(instance.carriers());
    for k in 0..instance.carriers() {
        let items = offered_items(instance, compensation, decision, k)?;
        let r = solve_ptp(instance.costs(k), &items, instance.capacity().duration(k))?;
        responses.push(FollowerResponse {
            carrier: k,
            route: r.route,
            follower_value: r.value,
            leader_value: r.leader_value,
        });
    }
    let leader_profit = responses.iter().map(|r| r.leader_value).sum();
    Ok(BilevelSolution {
        decision: decision.clone(),
        responses,
        leader_profit,
    })
}

/// Per-carrier comparison between a claimed response and the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub carrier: usize,
    pub claimed_follower: f64,
    pub oracle_follower: f64,
    pub claimed_leader: f64,
    pub oracle_leader: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub passed: bool,
    /// Leader profit the solution claims.
    pub predicted: f64,
    /// Leader profit when carriers answer optimally.
    pub realized: f64,
    pub certificates: Vec<Certificate>,
}

/// Checks that every claimed response is an optimistic best response to the
/// offer. Claimed values are recomputed from the claimed routes.
pub fn audit_bilevel_feasibility(
    solution: &BilevelSolution,
    instance: &Instance,
    compensation: Option<&FixedCompensation>,
) -> Result<AuditReport> {
    let oracle = evaluate_decision(instance, compensation, &solution.decision)?;
    let mut certificates = Vec::with_capacity(instance.carriers());
    for k in 0..instance.carriers() {
        let items = offered_items(instance, compensation, &solution.decision, k)?;
        let claimed = solution.responses.iter().find(|r| r.carrier == k);
        let (claimed_follower, claimed_leader, feasible) = match claimed {
            None => (0.0, 0.0, true),
            Some(r) => {
                let mut prize = 0.0;
                let mut leader = 0.0;
                let mut feasible = true;
                for &i in r.route.customers() {
                    match items.iter().find(|it| it.vertex == i) {
                        Some(it) => {
                            prize += it.prize;
                            leader += it.leader_value;
                        }
                        None => feasible = false,
                    }
                }
                let cost = r.route.cost(instance.costs(k));
                if instance.capacity().duration(k).is_some_and(|t| cost > t + tol::VALUE) {
                    feasible = false;
                }
                let consistent = (r.follower_value - (prize - cost)).abs() <= tol::AUDIT
                    && (r.leader_value - leader).abs() <= tol::AUDIT;
                (prize - cost, leader, feasible && consistent)
            }
        };
        let o = &oracle.responses[k];
        let passed = feasible
            && (claimed_follower - o.follower_value).abs() <= tol::AUDIT
            && (claimed_leader - o.leader_value).abs() <= tol::AUDIT;
        certificates.push(Certificate {
            carrier: k,
            claimed_follower,
            oracle_follower: o.follower_value,
            claimed_leader,
            oracle_leader: o.leader_value,
            passed,
        });
    }
    Ok(AuditReport {
        passed: certificates.iter().all(|c| c.passed) && (solution.leader_profit - oracle.leader_profit).abs() <= tol::AUDIT,
        predicted: solution.leader_profit,
        realized: oracle.leader_profit,
        certificates,
    })
}
