use itertools::Itertools;

use super::{check_size, improves, OfferedItem, PtpResult, Route};
use crate::instances::CostMatrix;
use crate::tol;
use crate::Result;

/// Largest offer the enumeration oracle accepts.
pub const MAX_BRUTE_ITEMS: usize = 8;

/// Profitable tour by enumerating every subset and every visiting order.
///
/// Independent of the dynamic program in [`super::solve_ptp`]; shares only the
/// optimistic comparison rule.
pub fn brute_force_ptp(costs: &CostMatrix, items: &[OfferedItem], duration_cap: Option<f64>) -> Result<PtpResult> {
    check_size("brute-force offer", items.len(), MAX_BRUTE_ITEMS)?;
    let mut best = PtpResult::empty();
    for subset in items.iter().powerset() {
        let prize: f64 = subset.iter().map(|it| it.prize).sum();
        let leader: f64 = subset.iter().map(|it| it.leader_value).sum();
        let mut cheapest: Option<(f64, Route)> = None;
        for order in subset.iter().map(|it| it.vertex).permutations(subset.len()) {
            let route = Route::through(&order);
            let cost = route.cost(costs);
            if cheapest.as_ref().is_none_or(|(c, _)| cost < *c - tol::VALUE) {
                cheapest = Some((cost, route));
            }
        }
        let Some((cost, route)) = cheapest else { continue };
        if duration_cap.is_some_and(|cap| cost > cap + tol::VALUE) {
            continue;
        }
        if improves(prize - cost, leader, best.value, best.leader_value) {
            best = PtpResult {
                value: prize - cost,
                route,
                leader_value: leader,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::euclidean_costs;

    #[test]
    fn empty_offer_is_worth_nothing() {
        let c = euclidean_costs(&[(0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(brute_force_ptp(&c, &[], None).unwrap().value, 0.0);
    }

    #[test]
    fn tight_cap_leaves_depot_only() {
        let c = euclidean_costs(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let items = [
            OfferedItem { vertex: 1, prize: 9.0, leader_value: 1.0 },
            OfferedItem { vertex: 2, prize: 9.0, leader_value: 1.0 },
        ];
        let r = brute_force_ptp(&c, &items, Some(1.5)).unwrap();
        assert!(r.route.is_empty());
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn rejects_large_offers() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 0.0)).collect();
        let c = euclidean_costs(&pts);
        let items: Vec<_> = (1..10)
            .map(|v| OfferedItem { vertex: v, prize: 1.0, leader_value: 1.0 })
            .collect();
        assert!(matches!(brute_force_ptp(&c, &items, None), Err(crate::Error::SizeLimit { .. })));
    }
}
