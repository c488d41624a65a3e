//! Single-level value-function reformulations as abstract mixed-integer
//! programs.
//!
//! A [`ModelSkeleton`] lists named variables, the static rows of one
//! formulation, its objective, and the cut families the branch-and-cut engine
//! must separate lazily. It also knows how to materialize each cut family as a
//! [`LinearRow`], which keeps the algebra of every formulation in one place.
//!
//! Variable naming follows the LP export: `x_k_i`, `X_k_m_i`, `y_k_i`,
//! `Y_k_m_i`, `w_k_m_i`, `z_k_i_j` and `th_k`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::instances::{CapacityMode, FixedCompensation, Instance};
use crate::lp::{LinearRow, LpProblem, Sense};
use crate::oracles::{check_size, HeldKarp, Route};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// Fixed compensations, arc variables.
    #[serde(rename = "BPFM")]
    Bpfm,
    /// Fixed compensations, route-cost variable.
    #[serde(rename = "BPFM_Z")]
    BpfmZ,
    /// Margin decisions with acceptance products `w`.
    #[serde(rename = "BPMD")]
    Bpmd,
    /// Margin decisions with per-margin acceptance `Y`.
    #[serde(rename = "BPMD_D")]
    BpmdD,
    #[serde(rename = "BPMD_Z")]
    BpmdZ,
    #[serde(rename = "BPMD_D_Z")]
    BpmdDZ,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Bpfm,
        ModelKind::BpfmZ,
        ModelKind::Bpmd,
        ModelKind::BpmdD,
        ModelKind::BpmdZ,
        ModelKind::BpmdDZ,
    ];
    pub const MARGIN_KINDS: [ModelKind; 4] = [ModelKind::Bpmd, ModelKind::BpmdD, ModelKind::BpmdZ, ModelKind::BpmdDZ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Bpfm => "BPFM",
            ModelKind::BpfmZ => "BPFM_Z",
            ModelKind::Bpmd => "BPMD",
            ModelKind::BpmdD => "BPMD_D",
            ModelKind::BpmdZ => "BPMD_Z",
            ModelKind::BpmdDZ => "BPMD_D_Z",
        }
    }

    /// Route cost is a single variable `θ` instead of arc variables.
    pub fn is_projected(self) -> bool {
        matches!(self, ModelKind::BpfmZ | ModelKind::BpmdZ | ModelKind::BpmdDZ)
    }

    pub fn has_arcs(self) -> bool {
        !self.is_projected()
    }

    /// The leader also picks margins.
    pub fn decides_margins(self) -> bool {
        !matches!(self, ModelKind::Bpfm | ModelKind::BpfmZ)
    }

    pub fn is_disaggregated(self) -> bool {
        matches!(self, ModelKind::BpmdD | ModelKind::BpmdDZ)
    }

    pub fn cut_families(self) -> Vec<CutFamily> {
        if self.is_projected() {
            vec![CutFamily::ThetaNoGood, CutFamily::DurationNoGood, CutFamily::ValueFunction]
        } else {
            vec![CutFamily::Subtour, CutFamily::ValueFunction]
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CutFamily {
    ValueFunction,
    Subtour,
    ThetaNoGood,
    DurationNoGood,
}

/// Role of a variable; indices are vertices, margins and carriers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarRole {
    Offer { k: usize, i: usize },
    OfferAt { k: usize, m: usize, i: usize },
    Accept { k: usize, i: usize },
    AcceptAt { k: usize, m: usize, i: usize },
    Product { k: usize, m: usize, i: usize },
    Arc { k: usize, i: usize, j: usize },
    RouteCost { k: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub role: VarRole,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
    pub binary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedRow {
    pub name: String,
    pub row: LinearRow,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModelOptions {
    /// Use the plain McCormick row `X + y - w ≤ 1` instead of the strengthened
    /// one in aggregated margin models.
    pub unstrengthened_mccormick: bool,
}

/// One leader-side term of a carrier's offer: offering `var` gives the
/// follower `prize` and the leader `leader_value` once served.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfferTerm {
    pub var: usize,
    pub margin: Option<usize>,
    pub prize: f64,
    pub leader_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSkeleton {
    pub kind: ModelKind,
    pub n: usize,
    pub carriers: usize,
    pub margins: usize,
    pub variables: Vec<Variable>,
    pub rows: Vec<NamedRow>,
    pub cut_families: Vec<CutFamily>,
    /// `offer_terms[k][i]`: offer variables of customer `i` for carrier `k`.
    offer_terms: Vec<Vec<Vec<OfferTerm>>>,
    /// `collect_terms[k][i]`: `(var, prize)` pairs whose sum is the prize the
    /// follower collects at `i` in the single-level model.
    collect_terms: Vec<Vec<Vec<(usize, f64)>>>,
    /// `accept_vars[k][i]`: variables summing to the acceptance of `i`
    /// (index 0 is the depot indicator).
    accept_vars: Vec<Vec<Vec<usize>>>,
    arc_vars: Vec<Vec<Vec<Option<usize>>>>,
    theta_vars: Vec<Option<usize>>,
    arc_costs: Vec<Vec<Vec<f64>>>,
}

struct Builder {
    variables: Vec<Variable>,
    rows: Vec<NamedRow>,
}

impl Builder {
    fn var(&mut self, role: VarRole, name: String, upper: f64, objective: f64, binary: bool) -> usize {
        self.variables.push(Variable {
            role,
            name,
            lower: 0.0,
            upper,
            objective,
            binary,
        });
        self.variables.len() - 1
    }

    fn row(&mut self, name: String, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(NamedRow {
            name,
            row: LinearRow::new(coeffs, sense, rhs),
        });
    }
}

pub fn build_model(instance: &Instance, kind: ModelKind, compensation: Option<&FixedCompensation>) -> Result<ModelSkeleton> {
    build_model_with(instance, kind, compensation, ModelOptions::default())
}

pub fn build_model_with(
    instance: &Instance,
    kind: ModelKind,
    compensation: Option<&FixedCompensation>,
    options: ModelOptions,
) -> Result<ModelSkeleton> {
    let n = instance.n();
    let nk = instance.carriers();
    let nm = if kind.decides_margins() {
        if instance.margins().is_empty() {
            return Err(Error::InvalidArgument(format!("{kind} needs a nonempty margin set")));
        }
        instance.margins().len()
    } else {
        let comp = compensation.ok_or_else(|| Error::InvalidArgument(format!("{kind} needs fixed compensations")))?;
        comp.validate(instance)?;
        0
    };
    let mut b = Builder {
        variables: Vec::new(),
        rows: Vec::new(),
    };
    let mut offer_terms = vec![vec![Vec::new(); n + 1]; nk];
    let mut collect_terms = vec![vec![Vec::new(); n + 1]; nk];
    let mut accept_vars = vec![vec![Vec::new(); n + 1]; nk];
    let mut arc_vars = vec![vec![vec![None; n + 1]; n + 1]; nk];
    let mut theta_vars = vec![None; nk];
    let mut product_vars = vec![vec![vec![0usize; n + 1]; nm]; nk];

    for k in 0..nk {
        // Offers.
        for i in instance.customers() {
            let p = instance.price(i);
            match compensation.filter(|_| !kind.decides_margins()) {
                Some(comp) => {
                    let upper = if comp.offerable(k, i) { 1.0 } else { 0.0 };
                    let v = b.var(VarRole::Offer { k, i }, format!("x_{k}_{i}"), upper, 0.0, true);
                    offer_terms[k][i].push(OfferTerm {
                        var: v,
                        margin: None,
                        prize: comp.get(k, i),
                        leader_value: p - comp.get(k, i),
                    });
                }
                None => {
                    for m in 0..nm {
                        let v = b.var(VarRole::OfferAt { k, m, i }, format!("X_{k}_{m}_{i}"), 1.0, 0.0, true);
                        offer_terms[k][i].push(OfferTerm {
                            var: v,
                            margin: Some(m),
                            prize: instance.margin_compensation_at(m, i),
                            leader_value: instance.margin_profit_at(m, i),
                        });
                    }
                }
            }
        }
        // Acceptance.
        let y0 = b.var(VarRole::Accept { k, i: 0 }, format!("y_{k}_0"), 1.0, 0.0, true);
        accept_vars[k][0].push(y0);
        if !kind.is_disaggregated() {
            for i in instance.customers() {
                let obj = if kind.decides_margins() {
                    0.0
                } else {
                    offer_terms[k][i][0].leader_value
                };
                let v = b.var(VarRole::Accept { k, i }, format!("y_{k}_{i}"), 1.0, obj, true);
                accept_vars[k][i].push(v);
                if !kind.decides_margins() {
                    collect_terms[k][i].push((v, offer_terms[k][i][0].prize));
                }
            }
        } else {
            for m in 0..nm {
                for i in instance.customers() {
                    let v = b.var(
                        VarRole::AcceptAt { k, m, i },
                        format!("Y_{k}_{m}_{i}"),
                        1.0,
                        instance.margin_profit_at(m, i),
                        true,
                    );
                    accept_vars[k][i].push(v);
                    collect_terms[k][i].push((v, instance.margin_compensation_at(m, i)));
                }
            }
        }
        if kind.decides_margins() && !kind.is_disaggregated() {
            for m in 0..nm {
                for i in instance.customers() {
                    let v = b.var(
                        VarRole::Product { k, m, i },
                        format!("w_{k}_{m}_{i}"),
                        1.0,
                        instance.margin_profit_at(m, i),
                        true,
                    );
                    product_vars[k][m][i] = v;
                    collect_terms[k][i].push((v, instance.margin_compensation_at(m, i)));
                }
            }
        }
        // Routing.
        if kind.has_arcs() {
            for i in 0..=n {
                for j in 0..=n {
                    if i != j {
                        arc_vars[k][i][j] = Some(b.var(VarRole::Arc { k, i, j }, format!("z_{k}_{i}_{j}"), 1.0, 0.0, true));
                    }
                }
            }
        } else {
            let upper = instance.capacity().duration(k).unwrap_or(f64::INFINITY);
            theta_vars[k] = Some(b.var(VarRole::RouteCost { k }, format!("th_{k}"), upper, 0.0, false));
        }
    }

    // Partition and budgets.
    for i in instance.customers() {
        let coeffs = (0..nk).flat_map(|k| offer_terms[k][i].iter().map(|t| (t.var, 1.0))).collect();
        b.row(format!("partition_{i}"), coeffs, Sense::Le, 1.0);
    }
    if let CapacityMode::ItemBudget(budgets) = instance.capacity() {
        for (k, &bk) in budgets.iter().enumerate() {
            let coeffs = instance
                .customers()
                .flat_map(|i| offer_terms[k][i].iter().map(|t| (t.var, 1.0)))
                .collect();
            b.row(format!("budget_{k}"), coeffs, Sense::Le, bk as f64);
        }
    }

    for k in 0..nk {
        // Acceptance needs an offer.
        for i in instance.customers() {
            if kind.is_disaggregated() {
                for (m, &yv) in accept_vars[k][i].iter().enumerate() {
                    let xv = offer_terms[k][i][m].var;
                    b.row(format!("interdict_{k}_{m}_{i}"), vec![(yv, 1.0), (xv, -1.0)], Sense::Le, 0.0);
                }
            } else {
                let mut coeffs = vec![(accept_vars[k][i][0], 1.0)];
                coeffs.extend(offer_terms[k][i].iter().map(|t| (t.var, -1.0)));
                b.row(format!("interdict_{k}_{i}"), coeffs, Sense::Le, 0.0);
            }
        }
        // Products w = X·y.
        if kind.decides_margins() && !kind.is_disaggregated() {
            for i in instance.customers() {
                let y = accept_vars[k][i][0];
                for m in 0..nm {
                    let w = product_vars[k][m][i];
                    let xm = offer_terms[k][i][m].var;
                    if options.unstrengthened_mccormick {
                        b.row(format!("mccormick_{k}_{m}_{i}"), vec![(xm, 1.0), (y, 1.0), (w, -1.0)], Sense::Le, 1.0);
                    } else {
                        let mut coeffs = vec![(y, 1.0), (w, -1.0)];
                        coeffs.extend((0..nm).filter(|&u| u != m).map(|u| (offer_terms[k][i][u].var, -1.0)));
                        b.row(format!("mccormick_{k}_{m}_{i}"), coeffs, Sense::Le, 0.0);
                    }
                    b.row(format!("product_offer_{k}_{m}_{i}"), vec![(w, 1.0), (xm, -1.0)], Sense::Le, 0.0);
                    b.row(format!("product_accept_{k}_{m}_{i}"), vec![(w, 1.0), (y, -1.0)], Sense::Le, 0.0);
                }
                let mut coeffs = vec![(y, 1.0)];
                coeffs.extend((0..nm).map(|m| (product_vars[k][m][i], -1.0)));
                b.row(format!("product_link_{k}_{i}"), coeffs, Sense::Eq, 0.0);
            }
        }
        if kind.has_arcs() {
            for i in 0..=n {
                let mut out: Vec<(usize, f64)> = (0..=n).filter(|&j| j != i).map(|j| (arc_vars[k][i][j].unwrap(), 1.0)).collect();
                let mut inn: Vec<(usize, f64)> = (0..=n).filter(|&j| j != i).map(|j| (arc_vars[k][j][i].unwrap(), 1.0)).collect();
                for &a in &accept_vars[k][i] {
                    out.push((a, -1.0));
                    inn.push((a, -1.0));
                }
                b.row(format!("out_degree_{k}_{i}"), out, Sense::Eq, 0.0);
                b.row(format!("in_degree_{k}_{i}"), inn, Sense::Eq, 0.0);
            }
            if let Some(tmax) = instance.capacity().duration(k) {
                let coeffs = arcs(n)
                    .map(|(i, j)| (arc_vars[k][i][j].unwrap(), instance.cost(k, i, j)))
                    .collect();
                b.row(format!("duration_{k}"), coeffs, Sense::Le, tmax);
            }
        } else {
            let y0 = accept_vars[k][0][0];
            for i in instance.customers() {
                let mut coeffs = vec![(y0, 1.0)];
                coeffs.extend(accept_vars[k][i].iter().map(|&a| (a, -1.0)));
                b.row(format!("depot_{k}_{i}"), coeffs, Sense::Ge, 0.0);
            }
            let theta = theta_vars[k].unwrap();
            for (tag, weights) in incident_arc_bounds(instance, k) {
                let mut coeffs = vec![(theta, 1.0)];
                for i in instance.customers() {
                    coeffs.extend(accept_vars[k][i].iter().map(|&a| (a, -weights[i])));
                }
                b.row(format!("route_bound{tag}_{k}"), coeffs, Sense::Ge, 0.0);
            }
        }
    }

    let arc_costs = (0..nk).map(|k| instance.costs(k).rows()).collect();
    Ok(ModelSkeleton {
        kind,
        n,
        carriers: nk,
        margins: nm,
        variables: b.variables,
        rows: b.rows,
        cut_families: kind.cut_families(),
        offer_terms,
        collect_terms,
        accept_vars,
        arc_vars,
        theta_vars,
        arc_costs,
    })
}

fn arcs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=n).flat_map(move |i| (0..=n).filter(move |&j| j != i).map(move |j| (i, j)))
}

/// Per-customer lower bounds on the route cost share of each served vertex.
///
/// With symmetric costs one row with `max(cheapest in-arc, cheapest out-arc)`
/// suffices. Otherwise a tour pays one in-arc and one out-arc per vertex, so
/// the in-arc and out-arc sums each bound the cost and get their own row.
fn incident_arc_bounds(instance: &Instance, k: usize) -> Vec<(&'static str, Vec<f64>)> {
    let n = instance.n();
    let c = instance.costs(k);
    let min_in: Vec<f64> = (0..=n)
        .map(|i| (0..=n).filter(|&j| j != i).map(|j| c.get(j, i)).fold(f64::INFINITY, f64::min))
        .collect();
    let min_out: Vec<f64> = (0..=n)
        .map(|i| (0..=n).filter(|&j| j != i).map(|j| c.get(i, j)).fold(f64::INFINITY, f64::min))
        .collect();
    if c.is_symmetric() {
        vec![("", min_in.iter().zip(&min_out).map(|(a, b)| a.max(*b)).collect())]
    } else {
        vec![("_in", min_in), ("_out", min_out)]
    }
}

impl ModelSkeleton {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn count_vars(&self, pred: impl Fn(&VarRole) -> bool) -> usize {
        self.variables.iter().filter(|v| pred(&v.role)).count()
    }

    pub fn find_var(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn offer_terms(&self, k: usize, i: usize) -> &[OfferTerm] {
        &self.offer_terms[k][i]
    }

    pub fn accept_vars(&self, k: usize, i: usize) -> &[usize] {
        &self.accept_vars[k][i]
    }

    pub fn arc_var(&self, k: usize, i: usize, j: usize) -> Option<usize> {
        self.arc_vars[k][i][j]
    }

    pub fn theta_var(&self, k: usize) -> Option<usize> {
        self.theta_vars[k]
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        self.variables.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    /// Sum of the acceptance variables of vertex `i`.
    pub fn acceptance(&self, k: usize, i: usize, values: &[f64]) -> f64 {
        self.accept_vars[k][i].iter().map(|&v| values[v]).sum()
    }

    /// `(margin, offered amount)` per offer variable of `i` for carrier `k`.
    pub fn offered(&self, k: usize, i: usize, values: &[f64]) -> f64 {
        self.offer_terms[k][i].iter().map(|t| values[t.var]).sum()
    }

    /// Follower profit the single-level model attributes to carrier `k`.
    pub fn modelled_follower_value(&self, k: usize, values: &[f64]) -> f64 {
        let prize: f64 = (1..=self.n)
            .flat_map(|i| self.collect_terms[k][i].iter())
            .map(|&(v, p)| p * values[v])
            .sum();
        prize - self.route_cost_term(k, values)
    }

    fn route_cost_term(&self, k: usize, values: &[f64]) -> f64 {
        match self.theta_vars[k] {
            Some(t) => values[t],
            None => arcs(self.n)
                .map(|(i, j)| self.arc_costs[k][i][j] * values[self.arc_vars[k][i][j].unwrap()])
                .sum(),
        }
    }

    fn route_cost_coeffs(&self, k: usize) -> Vec<(usize, f64)> {
        match self.theta_vars[k] {
            Some(t) => vec![(t, 1.0)],
            None => arcs(self.n)
                .map(|(i, j)| (self.arc_vars[k][i][j].unwrap(), self.arc_costs[k][i][j]))
                .collect(),
        }
    }

    /// Follower profit cannot fall below what route `route` earns on the
    /// current offer.
    pub fn value_function_row(&self, k: usize, route: &Route, route_cost: f64) -> LinearRow {
        let mut coeffs: Vec<(usize, f64)> = (1..=self.n)
            .flat_map(|i| self.collect_terms[k][i].iter().copied())
            .collect();
        coeffs.extend(self.route_cost_coeffs(k).into_iter().map(|(v, c)| (v, -c)));
        for &i in route.customers() {
            coeffs.extend(self.offer_terms[k][i].iter().map(|t| (t.var, -t.prize)));
        }
        LinearRow::new(merge(coeffs), Sense::Ge, -route_cost)
    }

    /// Arcs inside `set` cannot close a cycle without the depot; `set` must be
    /// customers only and nonempty. The anchor vertex is `anchor`.
    pub fn subtour_row(&self, k: usize, set: &[usize], anchor: usize) -> LinearRow {
        let mut coeffs = Vec::new();
        for &i in set {
            for &j in set {
                if i != j {
                    coeffs.push((self.arc_vars[k][i][j].expect("arc model"), 1.0));
                }
            }
            if i != anchor {
                coeffs.extend(self.accept_vars[k][i].iter().map(|&a| (a, -1.0)));
            }
        }
        LinearRow::new(merge(coeffs), Sense::Le, 0.0)
    }

    /// Serving all of `set` costs at least `tour_cost`.
    pub fn theta_row(&self, k: usize, set: &[usize], tour_cost: f64) -> LinearRow {
        let mut coeffs = vec![(self.theta_vars[k].expect("projected model"), 1.0)];
        for &i in set {
            coeffs.extend(self.accept_vars[k][i].iter().map(|&a| (a, -tour_cost)));
        }
        LinearRow::new(merge(coeffs), Sense::Ge, tour_cost * (1.0 - set.len() as f64))
    }

    /// `set` cannot be served within the duration limit.
    pub fn duration_nogood_row(&self, k: usize, set: &[usize]) -> LinearRow {
        let coeffs = set
            .iter()
            .flat_map(|&i| self.accept_vars[k][i].iter().map(|&a| (a, 1.0)))
            .collect();
        LinearRow::new(merge(coeffs), Sense::Le, set.len() as f64 - 1.0)
    }

    pub fn lp_problem(&self) -> LpProblem {
        LpProblem {
            objective: self.variables.iter().map(|v| v.objective).collect(),
            lower: self.variables.iter().map(|v| v.lower).collect(),
            upper: self.variables.iter().map(|v| v.upper).collect(),
            rows: self.rows.iter().map(|r| r.row.clone()).collect(),
        }
    }

    /// Text in the common LP file format.
    pub fn to_lp_format(&self, extra_rows: &[LinearRow]) -> String {
        let mut out = String::new();
        let term = |out: &mut String, coeffs: &[(usize, f64)]| {
            if coeffs.is_empty() {
                out.push_str(" 0");
            }
            for &(v, a) in coeffs {
                let sign = if a < 0.0 { '-' } else { '+' };
                let _ = write!(out, " {sign} {} {}", a.abs(), self.variables[v].name);
            }
        };
        out.push_str("Maximize\n obj:");
        let obj: Vec<(usize, f64)> = self
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.objective != 0.0)
            .map(|(j, v)| (j, v.objective))
            .collect();
        term(&mut out, &obj);
        out.push_str("\nSubject To\n");
        let rows = self
            .rows
            .iter()
            .map(|r| (r.name.clone(), &r.row))
            .chain(extra_rows.iter().enumerate().map(|(c, r)| (format!("cut_{c}"), r)));
        for (name, row) in rows {
            let _ = write!(out, " {name}:");
            term(&mut out, &row.coeffs);
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("Bounds\n");
        for v in &self.variables {
            if v.upper.is_infinite() {
                let _ = writeln!(out, " {} >= {}", v.name, v.lower);
            } else {
                let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
            }
        }
        out.push_str("Binaries\n");
        for v in self.variables.iter().filter(|v| v.binary) {
            let _ = writeln!(out, " {}", v.name);
        }
        out.push_str("End\n");
        out
    }
}

/// Sorts by column and sums duplicate columns.
fn merge(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|&(v, _)| v);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (v, a) in coeffs {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += a,
            _ => out.push((v, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

/// Largest instance the full-enumeration relaxation accepts.
pub const MAX_ENUM_CUSTOMERS: usize = 6;

/// The complete linear relaxation: static rows plus every value-function row
/// and every subtour or route-cost row, materialized over one optimal tour per
/// customer subset. Tours longer than a duration limit are left out since a
/// follower can never drive them.
pub fn lp_relaxation_full_enum(
    instance: &Instance,
    kind: ModelKind,
    compensation: Option<&FixedCompensation>,
) -> Result<(ModelSkeleton, LpProblem)> {
    check_size("full-enumeration customers", instance.n(), MAX_ENUM_CUSTOMERS)?;
    let skeleton = build_model(instance, kind, compensation)?;
    let mut lp = skeleton.lp_problem();
    let customers: Vec<usize> = instance.customers().collect();
    for k in 0..instance.carriers() {
        let hk = HeldKarp::new(instance.costs(k), &customers)?;
        let cap = instance.capacity().duration(k);
        for mask in 1usize..(1 << customers.len()) {
            let set: Vec<usize> = (0..customers.len()).filter(|b| mask & (1 << b) != 0).map(|b| customers[b]).collect();
            let cost = hk.tour_cost(mask);
            let drivable = cap.is_none_or(|t| cost <= t + crate::tol::VALUE);
            if drivable {
                lp.rows.push(skeleton.value_function_row(k, &hk.route(mask), cost));
            }
            if kind.has_arcs() {
                for &h in &set {
                    lp.rows.push(skeleton.subtour_row(k, &set, h));
                }
            } else if drivable {
                lp.rows.push(skeleton.theta_row(k, &set, cost));
            } else {
                lp.rows.push(skeleton.duration_nogood_row(k, &set));
            }
        }
    }
    Ok((skeleton, lp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_euclidean, RandomSpec};
    use crate::lp::{solve_lp, LpStatus};
    use crate::verification::Figure1Fixture;

    fn five_two_two() -> Instance {
        random_euclidean(&RandomSpec {
            customers: 5,
            carriers: 2,
            margins: vec![0.2, 0.5],
            duration: false,
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert_eq!("bpmd-d-z".parse::<ModelKind>().unwrap(), ModelKind::BpmdDZ);
        assert!("bpxx".parse::<ModelKind>().is_err());
    }

    #[test]
    fn aggregated_margin_model_counts() {
        let s = build_model(&five_two_two(), ModelKind::Bpmd, None).unwrap();
        assert_eq!(s.count_vars(|r| matches!(r, VarRole::OfferAt { .. })), 20);
        assert_eq!(s.count_vars(|r| matches!(r, VarRole::Accept { .. })), 12);
        assert_eq!(s.count_vars(|r| matches!(r, VarRole::Product { .. })), 20);
        assert_eq!(s.count_vars(|r| matches!(r, VarRole::Arc { .. })), 2 * 30);
        assert_eq!(s.count_vars(|r| matches!(r, VarRole::RouteCost { .. })), 0);
    }

    #[test]
    fn projected_margin_model_counts() {
        let s = build_model(&five_two_two(), ModelKind::BpmdZ, None).unwrap();
        assert_eq!(s.count_vars(|r| matches!(r, VarRole::Arc { .. })), 0);
        assert_eq!(s.count_vars(|r| matches!(r, VarRole::RouteCost { .. })), 2);
        let d = build_model(&five_two_two(), ModelKind::BpmdDZ, None).unwrap();
        assert_eq!(d.count_vars(|r| matches!(r, VarRole::AcceptAt { .. })), 20);
        assert_eq!(d.count_vars(|r| matches!(r, VarRole::Accept { .. })), 2);
    }

    #[test]
    fn construction_errors() {
        let fx = Figure1Fixture::new();
        assert!(build_model(&fx.instance, ModelKind::Bpfm, None).is_err());
        assert!(build_model(&fx.instance, ModelKind::Bpmd, None).is_err());
        // Compensation 9 is fine for items worth 10 but not for items worth 5.
        let cheap = Instance::new(
            "cheap",
            vec![Figure1Fixture::costs(); 2],
            vec![5.0; 5],
            CapacityMode::ItemBudget(vec![2, 2]),
            vec![],
        )
        .unwrap();
        assert!(build_model(&cheap, ModelKind::Bpfm, Some(&fx.compensation)).is_err());
        let mut too_high = fx.compensation.rows();
        too_high[1][3] = 10.0;
        assert!(FixedCompensation::new(&fx.instance, too_high).is_err());
    }

    #[test]
    fn budget_rows_only_with_item_budgets() {
        let inst = five_two_two();
        let s = build_model(&inst, ModelKind::Bpmd, None).unwrap();
        assert!(s.rows.iter().any(|r| r.name == "budget_0"));
        let d = inst.with_capacity(CapacityMode::RouteDuration(vec![50.0, 50.0])).unwrap();
        let s = build_model(&d, ModelKind::Bpmd, None).unwrap();
        assert!(!s.rows.iter().any(|r| r.name.starts_with("budget")));
        assert!(s.rows.iter().any(|r| r.name == "duration_1"));
        let s = build_model(&d, ModelKind::BpmdZ, None).unwrap();
        assert_eq!(s.variables[s.theta_var(0).unwrap()].upper, 50.0);
    }

    /// Enumerates 0/1 values of (X_0..X_{M-1}, y) and checks that the product
    /// rows admit exactly w_m = X_m·y.
    #[test]
    fn product_rows_are_exact_on_binaries() {
        let inst = Instance::new(
            "one",
            vec![crate::instances::euclidean_costs(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])],
            vec![10.0, 10.0],
            CapacityMode::ItemBudget(vec![1]),
            vec![0.2, 0.5, 0.8],
        )
        .unwrap();
        for options in [ModelOptions::default(), ModelOptions { unstrengthened_mccormick: true }] {
            let s = build_model_with(&inst, ModelKind::Bpmd, None, options).unwrap();
            let rows: Vec<&NamedRow> = s
                .rows
                .iter()
                .filter(|r| r.name.starts_with("mccormick_0_") || r.name.starts_with("product_"))
                .filter(|r| r.name.ends_with("_1"))
                .collect();
            let xs: Vec<usize> = (0..3).map(|m| s.find_var(&format!("X_0_{m}_1")).unwrap()).collect();
            let ws: Vec<usize> = (0..3).map(|m| s.find_var(&format!("w_0_{m}_1")).unwrap()).collect();
            let y = s.find_var("y_0_1").unwrap();
            for bits in 0u32..(1 << 7) {
                let mut v = vec![0.0; s.num_vars()];
                for m in 0..3 {
                    v[xs[m]] = f64::from(bits >> m & 1);
                    v[ws[m]] = f64::from(bits >> (3 + m) & 1);
                }
                v[y] = f64::from(bits >> 6 & 1);
                let at_most_one = xs.iter().map(|&x| v[x]).sum::<f64>() <= 1.0;
                if !at_most_one {
                    continue;
                }
                let ok = rows.iter().all(|r| r.row.violation(&v) < 1e-12);
                let product = (0..3).all(|m| v[ws[m]] == v[xs[m]] * v[y]);
                // The link row y = Σ w also rules out y = 1 with nothing offered.
                let offered = xs.iter().any(|&x| v[x] == 1.0);
                let expected = product && (v[y] == 0.0 || offered);
                assert_eq!(ok, expected, "options {options:?}, bits {bits:07b}");
            }
        }
    }

    #[test]
    fn strengthened_rows_tighten_the_relaxation() {
        let inst = five_two_two();
        let strong = build_model(&inst, ModelKind::Bpmd, None).unwrap();
        let weak = build_model_with(&inst, ModelKind::Bpmd, None, ModelOptions { unstrengthened_mccormick: true }).unwrap();
        let a = solve_lp(&strong.lp_problem()).unwrap().objective;
        let b = solve_lp(&weak.lp_problem()).unwrap().objective;
        assert!(a <= b + 1e-7);
    }

    #[test]
    fn full_enumeration_bounds_the_figure1_optimum() {
        let fx = Figure1Fixture::new();
        for kind in [ModelKind::Bpfm, ModelKind::BpfmZ] {
            let (_, lp) = lp_relaxation_full_enum(&fx.instance, kind, Some(&fx.compensation)).unwrap();
            let s = solve_lp(&lp).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            assert!(s.objective >= Figure1Fixture::OPTIMUM - 1e-7, "{kind}: {}", s.objective);
        }
    }

    #[test]
    fn product_to_per_margin_mapping_preserves_feasibility() {
        let inst = five_two_two();
        let (agg, lp_agg) = lp_relaxation_full_enum(&inst, ModelKind::Bpmd, None).unwrap();
        let (dis, lp_dis) = lp_relaxation_full_enum(&inst, ModelKind::BpmdD, None).unwrap();
        let s = solve_lp(&lp_agg).unwrap();
        let mut mapped = vec![0.0; dis.num_vars()];
        for (j, v) in dis.variables.iter().enumerate() {
            let source = match v.role {
                VarRole::AcceptAt { k, m, i } => format!("w_{k}_{m}_{i}"),
                _ => v.name.clone(),
            };
            mapped[j] = s.values[agg.find_var(&source).unwrap()];
        }
        for r in &lp_dis.rows {
            assert!(r.violation(&mapped) < 1e-7);
        }
        assert!((dis.objective(&mapped) - s.objective).abs() < 1e-7);
    }

    #[test]
    fn lp_export_mentions_every_variable() {
        let fx = Figure1Fixture::new();
        let s = build_model(&fx.instance, ModelKind::BpfmZ, Some(&fx.compensation)).unwrap();
        let text = s.to_lp_format(&[]);
        assert!(text.starts_with("Maximize"));
        assert!(text.contains("th_1 >= 0"));
        for v in &s.variables {
            assert!(text.contains(&v.name));
        }
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn offerable_mask_fixes_offers() {
        let fx = Figure1Fixture::new();
        let mut mask = vec![vec![true; 6]; 2];
        mask[1][4] = false;
        let comp = fx.compensation.clone().with_offerable(mask);
        let s = build_model(&fx.instance, ModelKind::Bpfm, Some(&comp)).unwrap();
        assert_eq!(s.variables[s.find_var("x_1_4").unwrap()].upper, 0.0);
        assert_eq!(s.variables[s.find_var("x_0_4").unwrap()].upper, 1.0);
    }
}
