use super::{check_size, Route, MAX_DP_ITEMS};
use crate::instances::CostMatrix;
use crate::tol;
use crate::Result;

/// Held–Karp table over a vertex set: for every subset `S` and `j ∈ S`, the
/// cheapest path that starts at `j`, visits all of `S` and ends at the depot.
///
/// Storing the paths *towards* the depot lets routes be rebuilt forwards,
/// which is what makes the lexicographically smallest optimal sequence easy
/// to extract.
pub struct HeldKarp<'a> {
    costs: &'a CostMatrix,
    vertices: Vec<usize>,
    to_depot: Vec<f64>,
}

impl<'a> HeldKarp<'a> {
    /// `vertices` must be distinct customers; they are sorted internally.
    pub fn new(costs: &'a CostMatrix, vertices: &[usize]) -> Result<Self> {
        check_size("held-karp vertex set", vertices.len(), MAX_DP_ITEMS)?;
        let mut vertices = vertices.to_vec();
        vertices.sort_unstable();
        let s = vertices.len();
        let mut to_depot = vec![f64::INFINITY; (1usize << s) * s.max(1)];
        for mask in 1usize..(1 << s) {
            for j in 0..s {
                if mask & (1 << j) == 0 {
                    continue;
                }
                let rest = mask & !(1 << j);
                let vj = vertices[j];
                let best = if rest == 0 {
                    costs.get(vj, 0)
                } else {
                    let mut best = f64::INFINITY;
                    let mut r = rest;
                    while r != 0 {
                        let l = r.trailing_zeros() as usize;
                        r &= r - 1;
                        let c = costs.get(vj, vertices[l]) + to_depot[rest * s + l];
                        if c < best {
                            best = c;
                        }
                    }
                    best
                };
                to_depot[mask * s + j] = best;
            }
        }
        Ok(HeldKarp {
            costs,
            vertices,
            to_depot,
        })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Optimal tour cost over depot ∪ subset (bit `j` selects `vertices()[j]`).
    pub fn tour_cost(&self, mask: usize) -> f64 {
        let s = self.vertices.len();
        let mut best = 0.0f64;
        if mask != 0 {
            best = f64::INFINITY;
            let mut r = mask;
            while r != 0 {
                let j = r.trailing_zeros() as usize;
                r &= r - 1;
                best = best.min(self.costs.get(0, self.vertices[j]) + self.to_depot[mask * s + j]);
            }
        }
        best
    }

    /// Lexicographically smallest optimal visiting order for `mask`.
    pub fn route(&self, mask: usize) -> Route {
        let s = self.vertices.len();
        let mut order = Vec::with_capacity(mask.count_ones() as usize);
        let mut remaining = mask;
        let mut at = 0usize;
        let mut budget = self.tour_cost(mask);
        while remaining != 0 {
            let next = (0..s)
                .filter(|&j| remaining & (1 << j) != 0)
                .find(|&j| {
                    self.costs.get(at, self.vertices[j]) + self.to_depot[remaining * s + j] <= budget + tol::VALUE
                })
                .expect("held-karp table is consistent");
            budget = self.to_depot[remaining * s + next];
            at = self.vertices[next];
            order.push(at);
            remaining &= !(1 << next);
        }
        Route::through(&order)
    }
}

/// Exact `c_TSP` of a vertex set (depot implied).
pub fn solve_tsp(costs: &CostMatrix, vertex_set: &[usize]) -> Result<f64> {
    let hk = HeldKarp::new(costs, vertex_set)?;
    Ok(hk.tour_cost((1 << hk.vertices().len()) - 1))
}

/// An optimal tour through a vertex set.
pub fn optimal_route(costs: &CostMatrix, vertex_set: &[usize]) -> Result<Route> {
    let hk = HeldKarp::new(costs, vertex_set)?;
    Ok(hk.route((1 << hk.vertices().len()) - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::euclidean_costs;
    use itertools::Itertools;
    use proptest::prelude::*;

    fn by_permutation(costs: &CostMatrix, set: &[usize]) -> f64 {
        set.iter()
            .copied()
            .permutations(set.len())
            .map(|p| Route::through(&p).cost(costs))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn empty_set_costs_nothing() {
        let c = euclidean_costs(&[(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(solve_tsp(&c, &[]).unwrap(), 0.0);
        assert!(optimal_route(&c, &[]).unwrap().is_empty());
    }

    #[test]
    fn size_bound() {
        let pts: Vec<_> = (0..23).map(|i| (i as f64, 0.0)).collect();
        let c = euclidean_costs(&pts);
        let set: Vec<_> = (1..=21).collect();
        assert!(matches!(solve_tsp(&c, &set), Err(crate::Error::SizeLimit { .. })));
    }

    #[test]
    fn asymmetric_costs_are_respected() {
        // 0 -> 1 -> 2 -> 0 is cheap, the reverse is not.
        let c = CostMatrix::from_rows(&[
            vec![0.0, 1.0, 9.0],
            vec![9.0, 0.0, 1.0],
            vec![1.0, 9.0, 0.0],
        ])
        .unwrap();
        assert_eq!(solve_tsp(&c, &[1, 2]).unwrap(), 3.0);
        assert_eq!(optimal_route(&c, &[2, 1]).unwrap().sequence(), &[0, 1, 2, 0]);
    }

    proptest! {
        #[test]
        fn matches_permutation_enumeration(
            pts in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 2..8),
            pick in any::<u8>(),
        ) {
            let c = euclidean_costs(&pts);
            let set: Vec<usize> = (1..pts.len()).filter(|i| pick & (1 << (i - 1)) != 0).collect();
            let dp = solve_tsp(&c, &set).unwrap();
            prop_assert!((dp - by_permutation(&c, &set)).abs() < 1e-9);
            let route = optimal_route(&c, &set).unwrap();
            prop_assert!((route.cost(&c) - dp).abs() < 1e-9);
            prop_assert_eq!(route.vertex_set(), set);
        }

        #[test]
        fn never_below_incident_arc_bound(pts in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 2..8)) {
            let c = euclidean_costs(&pts);
            let n = pts.len();
            let set: Vec<usize> = (1..n).collect();
            let d = |i: usize| {
                let min_in = (0..n).filter(|&j| j != i).map(|j| c.get(j, i)).fold(f64::INFINITY, f64::min);
                let min_out = (0..n).filter(|&j| j != i).map(|j| c.get(i, j)).fold(f64::INFINITY, f64::min);
                min_in.max(min_out)
            };
            let bound: f64 = set.iter().map(|&i| d(i)).sum();
            prop_assert!(solve_tsp(&c, &set).unwrap() >= bound - 1e-9);
        }
    }
}
