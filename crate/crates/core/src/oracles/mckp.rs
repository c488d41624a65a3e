use serde::{Deserialize, Serialize};

use crate::tol;
use crate::{Error, Result};

/// One chosen option per group and the resulting total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MckpChoice {
    /// For each group, the `key` of the chosen option.
    pub choices: Vec<usize>,
    pub total: f64,
}

/// Multiple-choice knapsack where each option's weight equals its value:
/// pick exactly one `(key, value)` per group, maximizing the total subject to
/// `total ≤ cap`.
///
/// Returns `None` when even the cheapest combination exceeds `cap`. Ties
/// between equal totals keep the combination found first, which favours
/// earlier options in earlier groups.
pub fn solve_mckp(groups: &[Vec<(usize, f64)>], cap: f64) -> Result<Option<MckpChoice>> {
    if let Some(g) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::InvalidArgument(format!("knapsack group {g} has no options")));
    }
    // Reachable totals, each with the option index per processed group.
    let mut states: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new())];
    for group in groups {
        let mut next: Vec<(f64, Vec<usize>)> = Vec::with_capacity(states.len() * group.len());
        for (total, picks) in &states {
            for (o, &(_, value)) in group.iter().enumerate() {
                let t = total + value;
                if t <= cap + tol::VALUE {
                    let mut p = picks.clone();
                    p.push(o);
                    next.push((t, p));
                }
            }
        }
        // Stable sort keeps the earliest combination first among equal totals.
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        next.dedup_by(|later, kept| (later.0 - kept.0).abs() <= tol::VALUE);
        if next.is_empty() {
            return Ok(None);
        }
        states = next;
    }
    let (total, picks) = states.last().expect("at least one state survives");
    Ok(Some(MckpChoice {
        choices: groups.iter().zip(picks).map(|(g, &o)| g[o].0).collect(),
        total: *total,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn margin_group(price: f64, margins: &[f64]) -> Vec<(usize, f64)> {
        margins.iter().enumerate().map(|(m, &v)| (m, v * price)).collect()
    }

    #[test]
    fn single_item_fits_high_margin() {
        let r = solve_mckp(&[margin_group(10.0, &[0.2, 0.5])], 5.0).unwrap().unwrap();
        assert_eq!(r.choices, vec![1]);
        assert_eq!(r.total, 5.0);
    }

    #[test]
    fn single_item_cap_forces_low_margin() {
        let r = solve_mckp(&[margin_group(10.0, &[0.2, 0.5])], 4.0).unwrap().unwrap();
        assert_eq!(r.choices, vec![0]);
        assert!((r.total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_items_exact_cap() {
        let g = margin_group(10.0, &[0.5, 0.9]);
        let r = solve_mckp(&[g.clone(), g], 10.0).unwrap().unwrap();
        assert_eq!(r.choices, vec![0, 0]);
        assert_eq!(r.total, 10.0);
    }

    #[test]
    fn infeasible_and_empty_group() {
        assert_eq!(solve_mckp(&[margin_group(10.0, &[0.5])], 1.0).unwrap(), None);
        assert!(solve_mckp(&[vec![]], 1.0).is_err());
        assert_eq!(solve_mckp(&[], 0.0).unwrap().unwrap().total, 0.0);
    }

    proptest! {
        #[test]
        fn matches_exhaustive_search(
            prices in prop::collection::vec(1u32..=100, 1..7),
            three in any::<bool>(),
            cap in 0.0f64..400.0,
        ) {
            let margins: &[f64] = if three { &[0.2, 0.5, 0.8] } else { &[0.5, 0.9] };
            let groups: Vec<_> = prices.iter().map(|&p| margin_group(p as f64, margins)).collect();
            let mut best: Option<f64> = None;
            let combos = margins.len().pow(groups.len() as u32);
            for mut code in 0..combos {
                let mut total = 0.0;
                for g in &groups {
                    total += g[code % margins.len()].1;
                    code /= margins.len();
                }
                if total <= cap + 1e-9 && best.is_none_or(|b| total > b) {
                    best = Some(total);
                }
            }
            let got = solve_mckp(&groups, cap).unwrap();
            match (best, got) {
                (None, None) => {}
                (Some(b), Some(c)) => {
                    prop_assert!((b - c.total).abs() < 1e-6);
                    let recomputed: f64 = groups.iter().zip(&c.choices).map(|(g, &m)| g[m].1).sum();
                    prop_assert!((recomputed - c.total).abs() < 1e-6);
                }
                (b, c) => prop_assert!(false, "exhaustive {b:?} vs dp {c:?}"),
            }
        }
    }
}
