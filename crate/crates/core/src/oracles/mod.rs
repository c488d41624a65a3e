//! Exact combinatorial subroutines used by separation, the heuristic and the
//! verification oracles.
//!
//! Everything here is an exhaustive dynamic program or enumeration over
//! subsets, so input sizes are bounded (see [`MAX_DP_ITEMS`]).

mod brute;
mod mckp;
mod ptp;
mod tsp;

use serde::{Deserialize, Serialize};

pub use brute::{brute_force_ptp, MAX_BRUTE_ITEMS};
pub use mckp::{solve_mckp, MckpChoice};
pub use ptp::{solve_ptp, PtpResult};
pub use tsp::{optimal_route, solve_tsp, HeldKarp};

use crate::instances::CostMatrix;
use crate::tol;

/// Largest vertex set the subset dynamic programs accept.
pub const MAX_DP_ITEMS: usize = 20;

/// A depot-anchored tour: `[0, v1, ..., vr, 0]`, or `[0]` when empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Route {
    sequence: Vec<usize>,
}

impl Route {
    pub fn empty() -> Self {
        Route { sequence: vec![0] }
    }

    /// Builds a route visiting `customers` in order. Panics on the depot or a
    /// repeated customer.
    pub fn through(customers: &[usize]) -> Self {
        let mut seen = std::collections::HashSet::new();
        assert!(
            customers.iter().all(|&v| v != 0 && seen.insert(v)),
            "route visits the depot twice or repeats a customer: {customers:?}"
        );
        if customers.is_empty() {
            return Route::empty();
        }
        let mut sequence = Vec::with_capacity(customers.len() + 2);
        sequence.push(0);
        sequence.extend_from_slice(customers);
        sequence.push(0);
        Route { sequence }
    }

    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    /// Visited customers in visiting order, `V(T)` without the depot.
    pub fn customers(&self) -> &[usize] {
        if self.sequence.len() <= 1 {
            &[]
        } else {
            &self.sequence[1..self.sequence.len() - 1]
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.len() <= 1
    }

    /// Traversed arcs `A(T)`.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sequence.windows(2).map(|w| (w[0], w[1]))
    }

    /// `C^k(T)`.
    pub fn cost(&self, costs: &CostMatrix) -> f64 {
        self.arcs().map(|(i, j)| costs.get(i, j)).sum()
    }

    /// Customers sorted by vertex id.
    pub fn vertex_set(&self) -> Vec<usize> {
        let mut v = self.customers().to_vec();
        v.sort_unstable();
        v
    }
}

/// One customer offered to a follower: the prize it collects when serving
/// it and the leader's profit when it is served.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OfferedItem {
    pub vertex: usize,
    pub prize: f64,
    pub leader_value: f64,
}

/// Lexicographic optimistic order: follower value first, leader value second.
#[inline]
pub(crate) fn improves(value: f64, leader: f64, best_value: f64, best_leader: f64) -> bool {
    value > best_value + tol::VALUE || (value >= best_value - tol::VALUE && leader > best_leader + tol::VALUE)
}

pub(crate) fn check_size(what: &'static str, got: usize, limit: usize) -> crate::Result<()> {
    if got > limit {
        Err(crate::Error::SizeLimit { what, limit, got })
    } else {
        Ok(())
    }
}
