use std::collections::{HashMap, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{BilevelSolution, LeaderDecision};
use crate::instances::Instance;
use crate::lp::LinearRow;
use crate::models::{CutFamily, ModelSkeleton, VarRole};
use crate::oracles::{optimal_route, solve_ptp, solve_tsp, OfferedItem, PtpResult, Route};
use crate::tol;
use crate::{Error, Result};

/// A lazily separated inequality, globally valid for the instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub family: CutFamily,
    pub carrier: usize,
    /// Route sequence for value-function cuts, vertex set otherwise.
    pub vertices: Vec<usize>,
    pub row: LinearRow,
}

impl CutRecord {
    fn key(&self) -> (CutFamily, usize, Vec<usize>) {
        (self.family, self.carrier, self.vertices.clone())
    }
}

/// Separation oracle for integer candidates with memoized tour and follower
/// computations.
pub struct Separator<'a> {
    skeleton: &'a ModelSkeleton,
    instance: &'a Instance,
    tsp_cache: HashMap<(usize, Vec<usize>), f64>,
    ptp_cache: HashMap<(usize, Vec<(usize, u64, u64)>), PtpResult>,
    emitted: HashSet<(CutFamily, usize, Vec<usize>)>,
    pub calls: usize,
    pub seconds: f64,
}

impl<'a> Separator<'a> {
    pub fn new(skeleton: &'a ModelSkeleton, instance: &'a Instance) -> Self {
        Separator {
            skeleton,
            instance,
            tsp_cache: HashMap::new(),
            ptp_cache: HashMap::new(),
            emitted: HashSet::new(),
            calls: 0,
            seconds: 0.0,
        }
    }

    fn tsp(&mut self, k: usize, set: &[usize]) -> Result<f64> {
        let key = (k, set.to_vec());
        if let Some(&c) = self.tsp_cache.get(&key) {
            return Ok(c);
        }
        let c = solve_tsp(self.instance.costs(k), set)?;
        self.tsp_cache.insert(key, c);
        Ok(c)
    }

    fn ptp(&mut self, k: usize, items: &[OfferedItem]) -> Result<PtpResult> {
        let key = (
            k,
            items
                .iter()
                .map(|it| (it.vertex, it.prize.to_bits(), it.leader_value.to_bits()))
                .collect(),
        );
        if let Some(r) = self.ptp_cache.get(&key) {
            return Ok(r.clone());
        }
        let r = solve_ptp(self.instance.costs(k), items, self.instance.capacity().duration(k))?;
        self.ptp_cache.insert(key, r.clone());
        Ok(r)
    }

    /// Cuts violated by the integer point `values`; empty means the point is
    /// bilevel feasible. Emitting a cut twice is reported as an error.
    pub fn separate(&mut self, values: &[f64]) -> Result<Vec<CutRecord>> {
        let start = Instant::now();
        self.calls += 1;
        let out = self.separate_inner(values);
        self.seconds += start.elapsed().as_secs_f64();
        let cuts = out?;
        for c in &cuts {
            if !self.emitted.insert(c.key()) {
                return Err(Error::DuplicateCut(format!(
                    "{:?} cut for carrier {} on {:?}",
                    c.family, c.carrier, c.vertices
                )));
            }
        }
        Ok(cuts)
    }

    fn separate_inner(&mut self, values: &[f64]) -> Result<Vec<CutRecord>> {
        let sk = self.skeleton;
        let n = sk.n;
        let violated = |row: &LinearRow| row.violation(values) > tol::CUT_VIOLATION;
        let accepted = |k: usize| -> Vec<usize> { (1..=n).filter(|&i| sk.acceptance(k, i, values) > 0.5).collect() };

        // Subtours in the arc support.
        if sk.kind.has_arcs() {
            let mut cuts = Vec::new();
            for k in 0..sk.carriers {
                for cycle in support_cycles(sk, k, values) {
                    if cycle.contains(&0) {
                        continue;
                    }
                    let mut set = cycle;
                    set.sort_unstable();
                    let row = sk.subtour_row(k, &set, set[0]);
                    if violated(&row) {
                        cuts.push(CutRecord {
                            family: CutFamily::Subtour,
                            carrier: k,
                            vertices: set,
                            row,
                        });
                    }
                }
            }
            if !cuts.is_empty() {
                return Ok(cuts);
            }
        }

        // Route cost of the accepted sets.
        if sk.kind.is_projected() {
            let mut cuts = Vec::new();
            for k in 0..sk.carriers {
                let set = accepted(k);
                if set.is_empty() {
                    continue;
                }
                let cost = self.tsp(k, &set)?;
                let too_long = self.instance.capacity().duration(k).is_some_and(|t| cost > t + tol::VALUE);
                let (family, row) = if too_long {
                    (CutFamily::DurationNoGood, sk.duration_nogood_row(k, &set))
                } else {
                    (CutFamily::ThetaNoGood, sk.theta_row(k, &set, cost))
                };
                if violated(&row) {
                    cuts.push(CutRecord {
                        family,
                        carrier: k,
                        vertices: set,
                        row,
                    });
                }
            }
            if !cuts.is_empty() {
                return Ok(cuts);
            }
        }

        // Follower optimality.
        let decision = decision_from_values(sk, values);
        let mut cuts = Vec::new();
        for k in 0..sk.carriers {
            let items: Vec<OfferedItem> = decision
                .offered(k)
                .into_iter()
                .map(|(i, margin)| {
                    let t = sk
                        .offer_terms(k, i)
                        .iter()
                        .find(|t| t.margin == margin)
                        .expect("decision comes from these terms");
                    OfferedItem {
                        vertex: i,
                        prize: t.prize,
                        leader_value: t.leader_value,
                    }
                })
                .collect();
            let best = self.ptp(k, &items)?;
            let modelled = sk.modelled_follower_value(k, values);
            if modelled < best.value - tol::CUT_VIOLATION {
                let cost = best.route.cost(self.instance.costs(k));
                let row = sk.value_function_row(k, &best.route, cost);
                if violated(&row) {
                    cuts.push(CutRecord {
                        family: CutFamily::ValueFunction,
                        carrier: k,
                        vertices: best.route.sequence().to_vec(),
                        row,
                    });
                }
            }
        }
        Ok(cuts)
    }

    /// Route a carrier drives in the integer point `values`.
    pub fn candidate_route(&mut self, k: usize, values: &[f64]) -> Result<Route> {
        let sk = self.skeleton;
        if sk.kind.has_arcs() {
            let cycles = support_cycles(sk, k, values);
            Ok(match cycles.into_iter().find(|c| c.contains(&0)) {
                Some(c) => Route::through(&c[1..]),
                None => Route::empty(),
            })
        } else {
            let set: Vec<usize> = (1..=sk.n).filter(|&i| sk.acceptance(k, i, values) > 0.5).collect();
            optimal_route(self.instance.costs(k), &set)
        }
    }
}

/// Cycles of the arc support of carrier `k`; the depot cycle starts at 0.
fn support_cycles(sk: &ModelSkeleton, k: usize, values: &[f64]) -> Vec<Vec<usize>> {
    let n = sk.n;
    let succ: Vec<Option<usize>> = (0..=n)
        .map(|i| (0..=n).find(|&j| j != i && sk.arc_var(k, i, j).is_some_and(|v| values[v] > 0.5)))
        .collect();
    let mut seen = vec![false; n + 1];
    let mut cycles = Vec::new();
    for start in 0..=n {
        if seen[start] || succ[start].is_none() {
            continue;
        }
        let mut cycle = Vec::new();
        let mut at = start;
        while !seen[at] {
            seen[at] = true;
            cycle.push(at);
            match succ[at] {
                Some(next) => at = next,
                None => break,
            }
        }
        cycles.push(cycle);
    }
    cycles
}

/// Leader decision encoded in an integer point.
pub fn decision_from_values(sk: &ModelSkeleton, values: &[f64]) -> LeaderDecision {
    let mut d = LeaderDecision::empty(sk.n);
    for i in 1..=sk.n {
        'carriers: for k in 0..sk.carriers {
            for t in sk.offer_terms(k, i) {
                if values[t.var] > 0.5 {
                    d.assign(i, k, t.margin);
                    break 'carriers;
                }
            }
        }
    }
    d
}

/// Integer point of the model that encodes a bilevel solution: offers from
/// the decision, acceptance and arcs from the follower routes, and route
/// costs at their tour value.
pub fn point_from_solution(sk: &ModelSkeleton, instance: &Instance, solution: &BilevelSolution) -> Vec<f64> {
    let mut values = vec![0.0; sk.num_vars()];
    let mut margin_of = vec![None; sk.n + 1];
    for i in 1..=sk.n {
        if let Some(a) = solution.decision.get(i) {
            margin_of[i] = a.margin;
            let term = sk.offer_terms(a.carrier, i).iter().find(|t| t.margin == a.margin);
            if let Some(t) = term {
                values[t.var] = 1.0;
            }
        }
    }
    for resp in &solution.responses {
        let k = resp.carrier;
        if resp.route.is_empty() {
            continue;
        }
        values[sk.accept_vars(k, 0)[0]] = 1.0;
        for &i in resp.route.customers() {
            let accept = sk.accept_vars(k, i);
            let slot = if accept.len() > 1 { margin_of[i].unwrap_or(0) } else { 0 };
            values[accept[slot]] = 1.0;
        }
        for (i, j) in resp.route.arcs() {
            if let Some(v) = sk.arc_var(k, i, j) {
                values[v] = 1.0;
            }
        }
        if let Some(t) = sk.theta_var(k) {
            values[t] = resp.route.cost(instance.costs(k));
        }
    }
    for (j, var) in sk.variables.iter().enumerate() {
        if let VarRole::Product { k, m, i } = var.role {
            let served = values[sk.accept_vars(k, i)[0]] > 0.5;
            let offered_at = sk.offer_terms(k, i).iter().any(|t| t.margin == Some(m) && values[t.var] > 0.5);
            values[j] = if served && offered_at { 1.0 } else { 0.0 };
        }
    }
    values
}

/// One-shot separation of an integer point without caches.
pub fn separate_integer(candidate: &[f64], skeleton: &ModelSkeleton, instance: &Instance) -> Result<Vec<CutRecord>> {
    let fractional = skeleton
        .variables
        .iter()
        .zip(candidate)
        .any(|(v, &x)| v.binary && (x - x.round()).abs() > tol::INTEGRALITY);
    if fractional {
        return Err(Error::InvalidArgument("separation needs an integer candidate".into()));
    }
    Separator::new(skeleton, instance).separate(candidate)
}
