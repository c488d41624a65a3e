use super::{evaluate_decision, BilevelSolution, LeaderDecision};
use crate::instances::{FixedCompensation, Instance};
use crate::models::ModelKind;
use crate::oracles::{check_size, improves, HeldKarp};
use crate::tol;
use crate::{Error, Result};

pub const MAX_BRUTE_CUSTOMERS: usize = 8;
pub const MAX_BRUTE_CARRIERS: usize = 2;
pub const MAX_BRUTE_MARGINS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceOutcome {
    pub leader_profit: f64,
    pub solution: BilevelSolution,
}

/// Best offer for one carrier given the offered subset: margin choice (empty
/// for fixed compensations) and optimistic leader value.
#[derive(Clone, Debug)]
struct SubsetBest {
    leader: f64,
    margins: Vec<usize>,
}

/// Exact optimum by enumerating every leader decision.
///
/// Follower answers come from a table of optimal tour costs over all customer
/// subsets, so every offered subset is scored by scanning its own subsets.
pub fn brute_force_bilevel(
    instance: &Instance,
    kind: ModelKind,
    compensation: Option<&FixedCompensation>,
) -> Result<BruteForceOutcome> {
    let n = instance.n();
    check_size("brute-force customers", n, MAX_BRUTE_CUSTOMERS)?;
    check_size("brute-force carriers", instance.carriers(), MAX_BRUTE_CARRIERS)?;
    let margins = if kind.decides_margins() {
        check_size("brute-force margins", instance.margins().len(), MAX_BRUTE_MARGINS)?;
        if instance.margins().is_empty() {
            return Err(Error::InvalidArgument("margin decisions need a margin set".into()));
        }
        instance.margins().len()
    } else {
        let c = compensation.ok_or_else(|| Error::InvalidArgument("fixed compensations required".into()))?;
        c.validate(instance)?;
        0
    };
    let customers: Vec<usize> = instance.customers().collect();
    let full = 1usize << n;

    let mut best_by_carrier: Vec<Vec<Option<SubsetBest>>> = Vec::with_capacity(instance.carriers());
    for k in 0..instance.carriers() {
        let hk = HeldKarp::new(instance.costs(k), &customers)?;
        let cap = instance.capacity().duration(k);
        let tour: Vec<Option<f64>> = (0..full)
            .map(|q| {
                let c = hk.tour_cost(q);
                cap.is_none_or(|t| c <= t + tol::VALUE).then_some(c)
            })
            .collect();
        let budget = instance.capacity().budget(k).unwrap_or(n);
        let offerable = |b: usize| compensation.is_none_or(|c| c.offerable(k, customers[b]));
        let mut table = vec![None; full];
        for s in 0..full {
            let bits: Vec<usize> = (0..n).filter(|b| s & (1 << b) != 0).collect();
            if bits.len() > budget || !bits.iter().all(|&b| offerable(b)) {
                continue;
            }
            let mut best: Option<SubsetBest> = None;
            let combos = if margins == 0 { 1 } else { margins.pow(bits.len() as u32) };
            for code in 0..combos {
                let mut prize = vec![0.0; n];
                let mut leader = vec![0.0; n];
                let mut choice = Vec::with_capacity(bits.len());
                let mut c = code;
                for &b in &bits {
                    let i = customers[b];
                    if margins == 0 {
                        let pbar = compensation.expect("checked above").get(k, i);
                        prize[b] = pbar;
                        leader[b] = instance.price(i) - pbar;
                    } else {
                        let m = c % margins;
                        c /= margins;
                        prize[b] = instance.margin_compensation_at(m, i);
                        leader[b] = instance.margin_profit_at(m, i);
                        choice.push(m);
                    }
                }
                // Optimistic response over all subsets of the offer.
                let (mut fv, mut lv) = (0.0, 0.0);
                let mut q = s;
                loop {
                    if q != 0 {
                        if let Some(cost) = tour[q] {
                            let (mut p, mut l) = (0.0, 0.0);
                            for &b in &bits {
                                if q & (1 << b) != 0 {
                                    p += prize[b];
                                    l += leader[b];
                                }
                            }
                            if improves(p - cost, l, fv, lv) {
                                fv = p - cost;
                                lv = l;
                            }
                        }
                    }
                    if q == 0 {
                        break;
                    }
                    q = (q - 1) & s;
                }
                if best.as_ref().is_none_or(|b| lv > b.leader + tol::VALUE) {
                    best = Some(SubsetBest {
                        leader: lv,
                        margins: choice,
                    });
                }
            }
            table[s] = best;
        }
        best_by_carrier.push(table);
    }

    // Split the customers among carriers, carrier by carrier.
    let nk = instance.carriers();
    let mut memo: Vec<Vec<Option<(f64, usize)>>> = vec![vec![None; full]; nk + 1];
    fn split(
        k: usize,
        remaining: usize,
        tables: &[Vec<Option<SubsetBest>>],
        memo: &mut [Vec<Option<(f64, usize)>>],
    ) -> f64 {
        if k == tables.len() {
            return 0.0;
        }
        if let Some((v, _)) = memo[k][remaining] {
            return v;
        }
        let mut best = (f64::NEG_INFINITY, 0usize);
        let mut s = remaining;
        loop {
            if let Some(sb) = &tables[k][s] {
                let v = sb.leader + split(k + 1, remaining & !s, tables, memo);
                if v > best.0 + tol::VALUE {
                    best = (v, s);
                }
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & remaining;
        }
        memo[k][remaining] = Some(best);
        best.0
    }
    split(0, full - 1, &best_by_carrier, &mut memo);

    let mut decision = LeaderDecision::empty(n);
    let mut remaining = full - 1;
    for k in 0..nk {
        let (_, s) = memo[k][remaining].expect("filled by the recursion");
        let sb = best_by_carrier[k][s].as_ref().expect("chosen subsets are admissible");
        let bits: Vec<usize> = (0..n).filter(|b| s & (1 << b) != 0).collect();
        for (pos, &b) in bits.iter().enumerate() {
            decision.assign(customers[b], k, sb.margins.get(pos).copied());
        }
        remaining &= !s;
    }
    let solution = evaluate_decision(instance, compensation, &decision)?;
    Ok(BruteForceOutcome {
        leader_profit: solution.leader_profit,
        solution,
    })
}
