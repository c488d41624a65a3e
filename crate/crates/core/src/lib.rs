//! Exact solvers for the bilevel profitable tour problem.
//!
//! A leader platform assigns delivery items, and optionally compensation
//! margins, to carriers. Each carrier answers with a profitable tour over the
//! items it was offered. The leader's problem is solved by branch-and-cut on
//! single-level value-function reformulations ([`models::ModelKind`]) whose
//! lazy cuts come from exact follower oracles ([`oracles`]).
//!
//! ```
//! use bilevel_ptp::verification::Figure1Fixture;
//! use bilevel_ptp::solver::brute_force_bilevel;
//! use bilevel_ptp::models::ModelKind;
//!
//! let fx = Figure1Fixture::new();
//! let best = brute_force_bilevel(&fx.instance, ModelKind::Bpfm, Some(&fx.compensation)).unwrap();
//! assert_eq!(best.leader_profit, 20.0);
//! ```

pub mod error;
pub mod heuristic;
pub mod instances;
pub mod lp;
pub mod models;
pub mod oracles;
pub mod report;
pub mod solver;
pub mod tol;
pub mod verification;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/heuristic.md")]
    mod heuristic {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
