//! Branch-and-cut over a [`ModelSkeleton`], plus the exact evaluation, audit
//! and brute-force routines that certify its answers.
//!
//! Binary variables are branched on depth-first within best-bound order.
//! Integer LP points go through [`Separator::separate`]; a point becomes an
//! incumbent only when no cut is violated, and its profit is then recomputed
//! from the carriers' optimistic responses.

mod audit;
mod brute;
mod separation;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use audit::{audit_bilevel_feasibility, evaluate_decision, offered_items, AuditReport, Certificate};
pub use brute::{brute_force_bilevel, BruteForceOutcome, MAX_BRUTE_CARRIERS, MAX_BRUTE_CUSTOMERS, MAX_BRUTE_MARGINS};
pub use separation::{decision_from_values, point_from_solution, separate_integer, CutRecord, Separator};

use crate::instances::{FixedCompensation, Instance};
use crate::lp::{DualSimplex, LpBackend, LpStatus};
use crate::models::{ModelKind, ModelSkeleton};
use crate::oracles::Route;
use crate::tol;
use crate::{Error, Result};

/// Carrier and, for margin decisions, margin index of one offered item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub carrier: usize,
    pub margin: Option<usize>,
}

/// Which carrier each item is offered to, indexed by vertex (slot 0 unused).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeaderDecision {
    assignment: Vec<Option<Assignment>>,
}

impl LeaderDecision {
    pub fn empty(n: usize) -> Self {
        LeaderDecision {
            assignment: vec![None; n + 1],
        }
    }

    pub fn n(&self) -> usize {
        self.assignment.len() - 1
    }

    pub fn assign(&mut self, item: usize, carrier: usize, margin: Option<usize>) {
        self.assignment[item] = Some(Assignment { carrier, margin });
    }

    pub fn unassign(&mut self, item: usize) {
        self.assignment[item] = None;
    }

    pub fn get(&self, item: usize) -> Option<Assignment> {
        self.assignment[item]
    }

    /// `(item, margin)` pairs offered to carrier `k`, by item.
    pub fn offered(&self, k: usize) -> Vec<(usize, Option<usize>)> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.filter(|a| a.carrier == k).map(|a| (i, a.margin)))
            .collect()
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.n() != instance.n() {
            return Err(Error::InvalidArgument(format!(
                "decision covers {} items, instance has {}",
                self.n(),
                instance.n()
            )));
        }
        for k in 0..instance.carriers() {
            let count = self.offered(k).len();
            if let Some(b) = instance.capacity().budget(k) {
                if count > b {
                    return Err(Error::InvalidArgument(format!("carrier {k} offered {count} items, budget {b}")));
                }
            }
        }
        if let Some(a) = self.assignment.iter().flatten().find(|a| a.carrier >= instance.carriers()) {
            return Err(Error::InvalidArgument(format!("unknown carrier {}", a.carrier)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FollowerResponse {
    pub carrier: usize,
    pub route: Route,
    pub follower_value: f64,
    pub leader_value: f64,
}

impl FollowerResponse {
    pub fn accepted(&self) -> Vec<usize> {
        self.route.vertex_set()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilevelSolution {
    pub decision: LeaderDecision,
    pub responses: Vec<FollowerResponse>,
    pub leader_profit: f64,
}

impl BilevelSolution {
    /// Offers nothing; always bilevel feasible.
    pub fn empty(instance: &Instance) -> Self {
        BilevelSolution {
            decision: LeaderDecision::empty(instance.n()),
            responses: (0..instance.carriers())
                .map(|k| FollowerResponse {
                    carrier: k,
                    route: Route::empty(),
                    follower_value: 0.0,
                    leader_value: 0.0,
                })
                .collect(),
            leader_profit: 0.0,
        }
    }

    /// Served items with the margin index they were offered at.
    pub fn served(&self) -> Vec<(usize, Option<usize>)> {
        let mut out: Vec<_> = self
            .responses
            .iter()
            .flat_map(|r| r.route.customers().iter().map(|&i| (i, self.decision.get(i).and_then(|a| a.margin))))
            .collect();
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub time_seconds: Option<f64>,
    pub nodes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub kind: ModelKind,
    pub solution: BilevelSolution,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub optimal: bool,
    pub time_seconds: f64,
    pub separation_seconds: f64,
    /// Integer points handed to separation.
    pub separations: usize,
    pub cuts_added: usize,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub root_bound: f64,
    pub cuts: Vec<CutRecord>,
}

/// Relative gap in percent.
pub fn gap_percent(lower: f64, upper: f64) -> f64 {
    (upper - lower) / upper.abs().max(1.0) * 100.0
}

struct Node {
    bound: f64,
    id: usize,
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Best bound first, newest node among equal bounds.
        self.bound.total_cmp(&other.bound).then(self.id.cmp(&other.id))
    }
}

/// Solves the bilevel problem encoded by `skeleton` to optimality or until a
/// limit is hit.
///
/// `compensation` must be the one the skeleton was built with for
/// fixed-compensation kinds. A warm start is re-evaluated against the
/// carriers' optimal responses before it is used as the first incumbent.
pub fn branch_and_cut(
    skeleton: &ModelSkeleton,
    instance: &Instance,
    compensation: Option<&FixedCompensation>,
    warm_start: Option<&BilevelSolution>,
    limits: &Limits,
) -> Result<SolveReport> {
    let start = Instant::now();
    let mut lp = DualSimplex::new(&skeleton.lp_problem())?;
    let root_bounds: Vec<(f64, f64)> = skeleton.variables.iter().map(|v| (v.lower, v.upper)).collect();
    let binaries: Vec<usize> = (0..skeleton.num_vars()).filter(|&j| skeleton.variables[j].binary).collect();
    let mut separator = Separator::new(skeleton, instance);

    let mut incumbent = BilevelSolution::empty(instance);
    if let Some(ws) = warm_start {
        let realized = evaluate_decision(instance, compensation, &ws.decision)?;
        if realized.leader_profit > incumbent.leader_profit + tol::VALUE {
            incumbent = realized;
        }
    }

    let mut cuts: Vec<CutRecord> = Vec::new();
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::INFINITY,
        id: 0,
        fixes: Vec::new(),
    });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut lp_iterations = 0usize;
    let mut applied: Vec<usize> = Vec::new();
    let mut root_bound = f64::NEG_INFINITY;
    let mut limit_hit = false;
    let mut open_bound = f64::NEG_INFINITY;

    while let Some(node) = heap.pop() {
        if node.bound <= incumbent.leader_profit + tol::PRUNE {
            continue;
        }
        let out_of_time = limits.time_seconds.is_some_and(|t| start.elapsed().as_secs_f64() >= t);
        let out_of_nodes = limits.nodes.is_some_and(|c| nodes >= c);
        if out_of_time || out_of_nodes {
            limit_hit = true;
            open_bound = open_bound.max(node.bound);
            break;
        }
        nodes += 1;
        for &j in &applied {
            lp.set_bounds(j, root_bounds[j].0, root_bounds[j].1)?;
        }
        applied.clear();
        for &(j, v) in &node.fixes {
            lp.set_bounds(j, v, v)?;
            applied.push(j);
        }

        loop {
            let sol = lp.solve()?;
            lp_iterations += sol.iterations;
            if sol.status == LpStatus::Infeasible {
                break;
            }
            if node.id == 0 && root_bound == f64::NEG_INFINITY {
                root_bound = sol.objective;
            }
            if sol.objective <= incumbent.leader_profit + tol::PRUNE {
                break;
            }
            let branch = binaries
                .iter()
                .map(|&j| (j, (sol.values[j] - sol.values[j].floor()).min(sol.values[j].ceil() - sol.values[j])))
                .filter(|&(_, f)| f > tol::INTEGRALITY)
                .fold(None, |best: Option<(usize, f64)>, (j, f)| match best {
                    Some((_, bf)) if bf >= f - 1e-12 => best,
                    _ => Some((j, f)),
                });
            if let Some((j, _)) = branch {
                for v in [0.0, 1.0] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, v));
                    heap.push(Node {
                        bound: sol.objective,
                        id: next_id,
                        fixes,
                    });
                    next_id += 1;
                }
                break;
            }
            let found = separator.separate(&sol.values)?;
            if found.is_empty() {
                let decision = decision_from_values(skeleton, &sol.values);
                let realized = evaluate_decision(instance, compensation, &decision)?;
                if realized.leader_profit > incumbent.leader_profit + tol::VALUE {
                    log::debug!("incumbent {:.6} at node {}", realized.leader_profit, nodes);
                    incumbent = realized;
                }
                break;
            }
            lp.add_rows(&found.iter().map(|c| c.row.clone()).collect::<Vec<_>>())?;
            cuts.extend(found);
        }
    }

    if limit_hit {
        for n in heap.iter() {
            if n.bound > incumbent.leader_profit + tol::PRUNE {
                open_bound = open_bound.max(n.bound);
            }
        }
    }
    let lower_bound = incumbent.leader_profit;
    let upper_bound = if limit_hit { open_bound.max(lower_bound) } else { lower_bound };
    Ok(SolveReport {
        kind: skeleton.kind,
        lower_bound,
        upper_bound,
        gap: gap_percent(lower_bound, upper_bound),
        optimal: !limit_hit || upper_bound <= lower_bound + tol::PRUNE,
        time_seconds: start.elapsed().as_secs_f64(),
        separation_seconds: separator.seconds,
        separations: separator.calls,
        cuts_added: cuts.len(),
        nodes,
        lp_iterations,
        root_bound,
        cuts,
        solution: incumbent,
    })
}
