//! Three-phase warm start for the margin-deciding problem.
//!
//! 1. Solve the fixed-margin problem with every compensation at its most
//!    generous level (lowest margin). If nothing is served there, nothing can
//!    be served at any margin and the empty solution is returned.
//! 2. For every carrier, raise margins on the items it served as far as its
//!    route stays profitable: a multiple-choice knapsack over margin levels
//!    whose capacity is the route's total price minus its cost.
//! 3. Re-solve the fixed-margin problem with the knapsack compensations,
//!    letting each carrier be offered only the items it served in phase 1.
//!
//! The better of the phase-1 and phase-3 solutions is returned; the phase-1
//! solution is paired with the lowest margin on every item.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::instances::{CapacityMode, FixedCompensation, Instance};
use crate::models::{build_model, ModelKind};
use crate::oracles::{solve_mckp, MckpChoice};
use crate::solver::{branch_and_cut, evaluate_decision, BilevelSolution, LeaderDecision, Limits, SolveReport};
use crate::tol;
use crate::{Error, Result};

/// Result of one fixed-margin solve inside the heuristic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub solution: BilevelSolution,
    pub value: f64,
    /// False when the phase time limit stopped the solve early.
    pub optimal: bool,
    pub seconds: f64,
}

/// Margin choice for the items one carrier served in phase 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnapsackRecord {
    pub carrier: usize,
    pub items: Vec<usize>,
    pub cap: f64,
    /// `None` when no margin combination fits the cap.
    pub choice: Option<MckpChoice>,
    /// Margin index per item of `items`, after the lowest-margin fallback.
    pub margins: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicTrace {
    /// Fixed-margin model used for phases 1 and 3.
    pub model_kind: ModelKind,
    pub phase1: PhaseRecord,
    pub knapsacks: Vec<KnapsackRecord>,
    pub phase3: Option<PhaseRecord>,
    /// Best solution with margin indices on every assignment.
    pub best: BilevelSolution,
    pub value: f64,
    /// 1 or 3.
    pub chosen_phase: u8,
}

/// Fixed-margin model the phases solve: projected with item budgets, with
/// arc variables under route durations.
pub fn phase_model(instance: &Instance) -> ModelKind {
    match instance.capacity() {
        CapacityMode::ItemBudget(_) => ModelKind::BpfmZ,
        CapacityMode::RouteDuration(_) => ModelKind::Bpfm,
    }
}

/// Solves a fixed-margin instance with the bundled branch-and-cut.
pub fn solve_bpfm(instance: &Instance, compensation: &FixedCompensation, kind: ModelKind, limits: &Limits) -> Result<SolveReport> {
    let skeleton = build_model(instance, kind, Some(compensation))?;
    branch_and_cut(&skeleton, instance, Some(compensation), None, limits)
}

/// Runs the heuristic with the bundled solver and a per-phase time limit.
pub fn run_heuristic(instance: &Instance, phase_seconds: Option<f64>) -> Result<HeuristicTrace> {
    warm_start(instance, phase_seconds, solve_bpfm)
}

/// Runs the heuristic with a caller-supplied fixed-margin solver.
///
/// The solver receives the instance, the phase's compensations, the model
/// kind and the phase limits; its incumbent must be bilevel feasible.
pub fn warm_start<F>(instance: &Instance, phase_seconds: Option<f64>, mut solve: F) -> Result<HeuristicTrace>
where
    F: FnMut(&Instance, &FixedCompensation, ModelKind, &Limits) -> Result<SolveReport>,
{
    let margins = instance.margins();
    if margins.is_empty() {
        return Err(Error::InvalidArgument("the heuristic needs a margin set".into()));
    }
    let lowest = (0..margins.len())
        .min_by(|&a, &b| margins[a].total_cmp(&margins[b]))
        .expect("nonempty margin set");
    let kind = phase_model(instance);
    let limits = Limits {
        time_seconds: phase_seconds,
        nodes: None,
    };

    let generous = FixedCompensation::from_margin(instance, margins[lowest])?;
    let phase1 = run_phase(&mut solve, instance, &generous, kind, &limits)?;
    let phase1_margins = with_margin(&phase1.solution.decision, |_, _| lowest);
    let phase1_best = evaluate_decision(instance, None, &phase1_margins)?;
    if phase1.solution.served().is_empty() {
        return Ok(HeuristicTrace {
            model_kind: kind,
            value: 0.0,
            best: BilevelSolution::empty(instance),
            phase1,
            knapsacks: Vec::new(),
            phase3: None,
            chosen_phase: 1,
        });
    }

    let mut knapsacks = Vec::new();
    let mut chosen = vec![lowest; instance.n() + 1];
    for response in &phase1.solution.responses {
        let items = response.accepted();
        if items.is_empty() {
            continue;
        }
        let k = response.carrier;
        let revenue: f64 = items.iter().map(|&i| instance.price(i)).sum();
        let cap = revenue - response.route.cost(instance.costs(k));
        let groups: Vec<Vec<(usize, f64)>> = items
            .iter()
            .map(|&i| (0..margins.len()).map(|m| (m, instance.margin_profit_at(m, i))).collect())
            .collect();
        let choice = if cap >= 0.0 { solve_mckp(&groups, cap)? } else { None };
        let item_margins = match &choice {
            Some(c) => c.choices.clone(),
            None => vec![lowest; items.len()],
        };
        for (&i, &m) in items.iter().zip(&item_margins) {
            chosen[i] = m;
        }
        knapsacks.push(KnapsackRecord {
            carrier: k,
            items,
            cap,
            choice,
            margins: item_margins,
        });
    }

    let mut rows = vec![vec![0.0; instance.n()]; instance.carriers()];
    let mut offerable = vec![vec![false; instance.n() + 1]; instance.carriers()];
    for row in rows.iter_mut() {
        for i in instance.customers() {
            row[i - 1] = instance.margin_compensation_at(lowest, i);
        }
    }
    for record in &knapsacks {
        for (&i, &m) in record.items.iter().zip(&record.margins) {
            rows[record.carrier][i - 1] = instance.margin_compensation_at(m, i);
            offerable[record.carrier][i] = true;
        }
    }
    let restricted = FixedCompensation::new(instance, rows)?.with_offerable(offerable);
    let phase3 = run_phase(&mut solve, instance, &restricted, kind, &limits)?;
    let phase3_best = evaluate_decision(instance, None, &with_margin(&phase3.solution.decision, |i, _| chosen[i]))?;

    let (best, chosen_phase) = if phase3_best.leader_profit > phase1_best.leader_profit + tol::VALUE {
        (phase3_best, 3)
    } else {
        (phase1_best, 1)
    };
    Ok(HeuristicTrace {
        model_kind: kind,
        value: best.leader_profit,
        best,
        phase1,
        knapsacks,
        phase3: Some(phase3),
        chosen_phase,
    })
}

fn run_phase<F>(solve: &mut F, instance: &Instance, comp: &FixedCompensation, kind: ModelKind, limits: &Limits) -> Result<PhaseRecord>
where
    F: FnMut(&Instance, &FixedCompensation, ModelKind, &Limits) -> Result<SolveReport>,
{
    let start = Instant::now();
    let report = solve(instance, comp, kind, limits)?;
    Ok(PhaseRecord {
        value: report.solution.leader_profit,
        solution: report.solution,
        optimal: report.optimal,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Copy of a fixed-margin decision with a margin index on every assignment.
fn with_margin(decision: &LeaderDecision, margin: impl Fn(usize, usize) -> usize) -> LeaderDecision {
    let mut out = LeaderDecision::empty(decision.n());
    for i in 1..=decision.n() {
        if let Some(a) = decision.get(i) {
            out.assign(i, a.carrier, Some(margin(i, a.carrier)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{euclidean_costs, random_euclidean, RandomSpec};
    use crate::solver::{audit_bilevel_feasibility, brute_force_bilevel};

    fn single_item() -> Instance {
        // Round trip 0 -> 1 -> 0 costs 1.
        let costs = euclidean_costs(&[(0.0, 0.0), (0.5, 0.0)]);
        Instance::new("single", vec![costs], vec![10.0], CapacityMode::RouteDuration(vec![10.0]), vec![0.2, 0.5]).unwrap()
    }

    #[test]
    fn single_item_raises_the_margin() {
        let inst = single_item();
        let trace = run_heuristic(&inst, None).unwrap();
        assert_eq!(trace.phase1.value, 2.0);
        assert_eq!(trace.knapsacks.len(), 1);
        assert_eq!(trace.knapsacks[0].cap, 9.0);
        assert_eq!(trace.knapsacks[0].margins, vec![1]);
        assert_eq!(trace.phase3.as_ref().unwrap().value, 5.0);
        assert_eq!(trace.value, 5.0);
        assert_eq!(trace.chosen_phase, 3);
        assert_eq!(trace.best.served(), vec![(1, Some(1))]);
        assert_eq!(trace.best.responses[0].follower_value, 4.0);
    }

    #[test]
    fn unprofitable_prices_give_the_empty_solution() {
        let costs = euclidean_costs(&[(0.0, 0.0), (30.0, 0.0), (0.0, 30.0)]);
        let inst = Instance::new("far", vec![costs], vec![5.0, 8.0], CapacityMode::ItemBudget(vec![1]), vec![0.2, 0.5]).unwrap();
        let trace = run_heuristic(&inst, None).unwrap();
        assert_eq!(trace.value, 0.0);
        assert!(trace.best.served().is_empty());
        assert!(trace.phase3.is_none());
        assert!(trace.knapsacks.is_empty());
    }

    #[test]
    fn margin_set_required() {
        let costs = euclidean_costs(&[(0.0, 0.0), (0.5, 0.0)]);
        let inst = Instance::new("bare", vec![costs], vec![10.0], CapacityMode::RouteDuration(vec![10.0]), vec![]).unwrap();
        assert!(run_heuristic(&inst, None).is_err());
    }

    #[test]
    fn solver_errors_propagate() {
        let inst = single_item();
        let failing = |_: &Instance, _: &FixedCompensation, _: ModelKind, _: &Limits| -> Result<SolveReport> {
            Err(Error::Lp("refused".into()))
        };
        assert!(matches!(warm_start(&inst, None, failing), Err(Error::Lp(_))));
    }

    #[test]
    fn phase_model_follows_the_capacity_mode() {
        let mut spec = RandomSpec { customers: 3, carriers: 1, margins: vec![0.2, 0.5], duration: false, seed: 1 };
        assert_eq!(phase_model(&random_euclidean(&spec).unwrap()), ModelKind::BpfmZ);
        spec.duration = true;
        assert_eq!(phase_model(&random_euclidean(&spec).unwrap()), ModelKind::Bpfm);
    }

    #[test]
    fn sound_on_random_instances() {
        for seed in 0..8u64 {
            let spec = RandomSpec {
                customers: 3 + seed as usize % 3,
                carriers: 1 + seed as usize % 2,
                margins: vec![0.2, 0.5, 0.8],
                duration: seed % 2 == 1,
                seed,
            };
            let inst = random_euclidean(&spec).unwrap();
            let trace = run_heuristic(&inst, None).unwrap();
            let exact = brute_force_bilevel(&inst, ModelKind::Bpmd, None).unwrap().leader_profit;
            assert!(trace.value <= exact + 1e-6, "seed {seed}: {} > {exact}", trace.value);
            assert!(audit_bilevel_feasibility(&trace.best, &inst, None).unwrap().passed, "seed {seed}");
            assert!(trace.value >= trace.phase1.value - 1e-9);
        }
    }
}
