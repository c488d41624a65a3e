use serde::{Deserialize, Serialize};

use super::{improves, tsp::HeldKarp, OfferedItem, Route};
use crate::instances::CostMatrix;
use crate::tol;
use crate::Result;

/// Optimal follower response to an offer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtpResult {
    /// Collected prizes minus route cost.
    pub value: f64,
    pub route: Route,
    /// Leader profit of the served items; the optimistic tie-breaker.
    pub leader_value: f64,
}

impl PtpResult {
    pub fn empty() -> Self {
        PtpResult {
            value: 0.0,
            route: Route::empty(),
            leader_value: 0.0,
        }
    }

    pub fn accepted(&self) -> Vec<usize> {
        self.route.vertex_set()
    }
}

/// Profitable tour over the offered customers.
///
/// Among value-maximal subsets the one with the largest leader value wins;
/// remaining ties go to the smallest subset mask, and the route is the
/// lexicographically smallest optimal sequence. With a duration cap, only
/// subsets whose optimal tour fits are considered.
pub fn solve_ptp(costs: &CostMatrix, items: &[OfferedItem], duration_cap: Option<f64>) -> Result<PtpResult> {
    let mut sorted = items.to_vec();
    sorted.sort_by_key(|it| it.vertex);
    let vertices: Vec<usize> = sorted.iter().map(|it| it.vertex).collect();
    let hk = HeldKarp::new(costs, &vertices)?;
    let s = sorted.len();

    let (mut best_mask, mut best_value, mut best_leader) = (0usize, 0.0, 0.0);
    // Prize and leader sums are built incrementally from the mask without its lowest bit.
    let mut prize = vec![0.0; 1 << s];
    let mut leader = vec![0.0; 1 << s];
    for mask in 1usize..(1 << s) {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        prize[mask] = prize[rest] + sorted[low].prize;
        leader[mask] = leader[rest] + sorted[low].leader_value;
        let cost = hk.tour_cost(mask);
        if duration_cap.is_some_and(|cap| cost > cap + tol::VALUE) {
            continue;
        }
        let value = prize[mask] - cost;
        if improves(value, leader[mask], best_value, best_leader) {
            (best_mask, best_value, best_leader) = (mask, value, leader[mask]);
        }
    }
    Ok(PtpResult {
        value: best_value,
        route: hk.route(best_mask),
        leader_value: best_leader,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::euclidean_costs;
    use crate::oracles::brute_force_ptp;
    use crate::verification::Figure1Fixture;
    use proptest::prelude::*;

    fn offer(fx: &Figure1Fixture, items: &[usize]) -> Vec<OfferedItem> {
        items
            .iter()
            .map(|&i| OfferedItem {
                vertex: i,
                prize: fx.compensation.get(0, i),
                leader_value: fx.instance.price(i) - fx.compensation.get(0, i),
            })
            .collect()
    }

    #[test]
    fn empty_offer() {
        let fx = Figure1Fixture::new();
        let r = solve_ptp(fx.instance.costs(0), &[], None).unwrap();
        assert_eq!(r, PtpResult::empty());
    }

    #[test]
    fn figure1_pair_with_item_one_is_refused_partially() {
        let fx = Figure1Fixture::new();
        let r = solve_ptp(fx.instance.costs(0), &offer(&fx, &[1, 2]), None).unwrap();
        assert_eq!(r.accepted(), vec![2]);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn figure1_pair_two_three_accepted() {
        let fx = Figure1Fixture::new();
        let r = solve_ptp(fx.instance.costs(0), &offer(&fx, &[2, 3]), None).unwrap();
        assert_eq!(r.accepted(), vec![2, 3]);
        assert!((r.value - 4.0).abs() < 1e-12);
        assert_eq!(r.route.sequence(), &[0, 2, 3, 0]);
    }

    #[test]
    fn optimistic_tie_break_prefers_leader() {
        // Every subset is worth nothing to the follower; the cap rules out
        // serving both, and the leader prefers customer 2.
        let c = euclidean_costs(&[(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0)]);
        let items = [
            OfferedItem { vertex: 1, prize: 2.0, leader_value: 1.0 },
            OfferedItem { vertex: 2, prize: 2.0, leader_value: 3.0 },
        ];
        let r = solve_ptp(&c, &items, Some(2.0)).unwrap();
        assert_eq!(r.accepted(), vec![2]);
        let r = solve_ptp(&c, &items, None).unwrap();
        assert_eq!(r.accepted(), vec![1, 2]);
        assert_eq!(r.leader_value, 4.0);
        let c = euclidean_costs(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0)]);
        // Serving customer 2 alone is worth exactly nothing to the follower.
        let items = [OfferedItem { vertex: 2, prize: 2.0, leader_value: 3.0 }];
        let r = solve_ptp(&c, &items, None).unwrap();
        assert_eq!(r.accepted(), vec![2]);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn duration_cap_excludes_long_tours() {
        let c = euclidean_costs(&[(0.0, 0.0), (5.0, 0.0)]);
        let items = [OfferedItem { vertex: 1, prize: 50.0, leader_value: 1.0 }];
        assert!(solve_ptp(&c, &items, Some(9.0)).unwrap().route.is_empty());
        assert_eq!(solve_ptp(&c, &items, Some(10.0)).unwrap().value, 40.0);
    }

    fn random_offer() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<(f64, f64)>, u8, Option<f64>)> {
        (2usize..9).prop_flat_map(|n| {
            (
                prop::collection::vec((0.0f64..30.0, 0.0f64..30.0), n),
                prop::collection::vec((0.0f64..40.0, 0.0f64..20.0), n),
                any::<u8>(),
                prop::option::of(10.0f64..80.0),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn agrees_with_enumeration((pts, prizes, pick, cap) in random_offer()) {
            let c = euclidean_costs(&pts);
            let items: Vec<OfferedItem> = (1..pts.len())
                .filter(|i| pick & (1 << (i - 1)) != 0)
                .map(|i| OfferedItem { vertex: i, prize: prizes[i].0, leader_value: prizes[i].1 })
                .collect();
            let dp = solve_ptp(&c, &items, cap).unwrap();
            let bf = brute_force_ptp(&c, &items, cap).unwrap();
            prop_assert!((dp.value - bf.value).abs() < 1e-6);
            prop_assert!((dp.leader_value - bf.leader_value).abs() < 1e-6);
            prop_assert!(dp.value >= 0.0);
            if let Some(cap) = cap {
                prop_assert!(dp.route.cost(&c) <= cap + 1e-9);
            }
        }

        #[test]
        fn enlarging_the_offer_never_hurts((pts, prizes, pick, cap) in random_offer(), extra in 1usize..8) {
            let c = euclidean_costs(&pts);
            let mk = |mask: u8| -> Vec<OfferedItem> {
                (1..pts.len())
                    .filter(|i| mask & (1 << (i - 1)) != 0)
                    .map(|i| OfferedItem { vertex: i, prize: prizes[i].0, leader_value: prizes[i].1 })
                    .collect()
            };
            let small = solve_ptp(&c, &mk(pick), cap).unwrap();
            let large = solve_ptp(&c, &mk(pick | (1 << (extra - 1))), cap).unwrap();
            prop_assert!(large.value >= small.value - 1e-9);
        }
    }
}
