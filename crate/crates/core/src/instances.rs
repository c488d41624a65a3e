//! Problem data: graphs, prices, carrier limits and margin sets, plus the
//! loaders for the Chao team-orienteering and Solomon VRPTW text layouts.
//!
//! Vertex `0` is the depot and customers are `1..=n`. Every per-vertex array
//! in this module is indexed by vertex, so slot `0` of a price vector is the
//! (unused) depot entry.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tol;

/// Seed used by the loaders when regenerating item prices.
pub const DEFAULT_PRICE_SEED: u64 = 20_240_601;

/// Margin sets used in the benchmark protocol.
pub const BENCHMARK_MARGIN_SETS: [&[f64]; 4] =
    [&[0.2, 0.5], &[0.5, 0.9], &[0.2, 0.5, 0.8], &[0.5, 0.7, 0.9]];

/// Dense square arc-cost matrix over `V_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        CostMatrix { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInstance("cost matrix is not square".into()));
        }
        Ok(CostMatrix {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol::VALUE))
    }

    /// First triple `(i, l, j)` with `c_ij > c_il + c_lj`. When
    /// `customers_only` is set, the intermediate vertex `l` ranges over
    /// customers only, which is the form route shortcutting needs.
    pub fn triangle_violation(&self, customers_only: bool) -> Option<(usize, usize, usize)> {
        let first = usize::from(customers_only);
        for l in first..self.dim {
            for i in 0..self.dim {
                if i == l {
                    continue;
                }
                for j in 0..self.dim {
                    if j == l || j == i {
                        continue;
                    }
                    if self.get(i, j) > self.get(i, l) + self.get(l, j) + tol::VALUE {
                        return Some((i, l, j));
                    }
                }
            }
        }
        None
    }
}

/// How the amount of work given to a carrier is limited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    /// At most `b^k` items may be offered to carrier `k` (leader-side limit).
    ItemBudget(Vec<usize>),
    /// The route of carrier `k` may not cost more than `t^k_max` (follower-side limit).
    RouteDuration(Vec<f64>),
}

impl CapacityMode {
    pub fn budget(&self, k: usize) -> Option<usize> {
        match self {
            CapacityMode::ItemBudget(b) => Some(b[k]),
            CapacityMode::RouteDuration(_) => None,
        }
    }

    pub fn duration(&self, k: usize) -> Option<f64> {
        match self {
            CapacityMode::ItemBudget(_) => None,
            CapacityMode::RouteDuration(t) => Some(t[k]),
        }
    }

    pub fn is_duration(&self) -> bool {
        matches!(self, CapacityMode::RouteDuration(_))
    }
}

impl fmt::Display for CapacityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapacityMode::ItemBudget(b) => write!(f, "budget{b:?}"),
            CapacityMode::RouteDuration(t) => write!(f, "duration{t:?}"),
        }
    }
}

/// A validated problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    name: String,
    coords: Option<Vec<(f64, f64)>>,
    costs: Vec<CostMatrix>,
    prices: Vec<f64>,
    capacity: CapacityMode,
    margins: Vec<f64>,
}

impl Instance {
    /// `prices` holds one entry per customer (`p_1..p_n`); `costs` one matrix
    /// per carrier.
    pub fn new(
        name: impl Into<String>,
        costs: Vec<CostMatrix>,
        prices: Vec<f64>,
        capacity: CapacityMode,
        margins: Vec<f64>,
    ) -> Result<Self> {
        let n = prices.len();
        let mut full = Vec::with_capacity(n + 1);
        full.push(0.0);
        full.extend(prices);
        let inst = Instance {
            name: name.into(),
            coords: None,
            costs,
            prices: full,
            capacity,
            margins,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_coords(mut self, coords: Vec<(f64, f64)>) -> Result<Self> {
        if coords.len() != self.n() + 1 {
            return Err(Error::InvalidInstance(format!(
                "{} coordinates for {} vertices",
                coords.len(),
                self.n() + 1
            )));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        let bad = |m: String| Err(Error::InvalidInstance(m));
        if n == 0 {
            return bad("instance has no customers".into());
        }
        if self.costs.is_empty() {
            return bad("instance has no carriers".into());
        }
        for (k, c) in self.costs.iter().enumerate() {
            if c.dim() != n + 1 {
                return bad(format!("cost matrix of carrier {k} has dimension {}", c.dim()));
            }
            if c.data.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return bad(format!("cost matrix of carrier {k} has a negative or non-finite entry"));
            }
        }
        if let Some(i) = (1..=n).find(|&i| !(self.prices[i] > 0.0 && self.prices[i].is_finite())) {
            return bad(format!("price of customer {i} is not strictly positive"));
        }
        if self.margins.iter().any(|&m| !(m > 0.0 && m < 1.0)) {
            return bad("margins must lie strictly inside (0,1)".into());
        }
        if self.margins.windows(2).any(|w| w[0] >= w[1]) {
            return bad("margins must be sorted ascending without duplicates".into());
        }
        match &self.capacity {
            CapacityMode::ItemBudget(b) => {
                if b.len() != self.carriers() {
                    return bad(format!("{} budgets for {} carriers", b.len(), self.carriers()));
                }
                if let Some(k) = b.iter().position(|&bk| bk >= n) {
                    return bad(format!("budget of carrier {k} is not below n = {n}"));
                }
            }
            CapacityMode::RouteDuration(t) => {
                if t.len() != self.carriers() {
                    return bad(format!("{} duration limits for {} carriers", t.len(), self.carriers()));
                }
                if t.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return bad("route duration limits must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of customers.
    pub fn n(&self) -> usize {
        self.prices.len() - 1
    }

    pub fn carriers(&self) -> usize {
        self.costs.len()
    }

    pub fn customers(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n()
    }

    pub fn coords(&self) -> Option<&[(f64, f64)]> {
        self.coords.as_deref()
    }

    pub fn costs(&self, k: usize) -> &CostMatrix {
        &self.costs[k]
    }

    #[inline]
    pub fn cost(&self, k: usize, i: usize, j: usize) -> f64 {
        self.costs[k].get(i, j)
    }

    #[inline]
    pub fn price(&self, i: usize) -> f64 {
        self.prices[i]
    }

    /// Customer prices `p_1..p_n`.
    pub fn prices(&self) -> &[f64] {
        &self.prices[1..]
    }

    pub fn capacity(&self) -> &CapacityMode {
        &self.capacity
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn m_min(&self) -> Option<f64> {
        self.margins.first().copied()
    }

    pub fn m_max(&self) -> Option<f64> {
        self.margins.last().copied()
    }

    /// Leader profit `p_{mi}` for margin index `m`.
    #[inline]
    pub fn margin_profit_at(&self, m: usize, i: usize) -> f64 {
        self.margins[m] * self.prices[i]
    }

    /// Carrier compensation `p̄_{mi} = p_i - p_{mi}` for margin index `m`.
    #[inline]
    pub fn margin_compensation_at(&self, m: usize, i: usize) -> f64 {
        self.prices[i] - self.margin_profit_at(m, i)
    }

    /// True when every carrier's costs satisfy the full triangle inequality.
    pub fn is_metric(&self) -> bool {
        self.costs.iter().all(|c| c.triangle_violation(false).is_none())
    }

    /// True when skipping any customer on a route never increases its cost.
    pub fn allows_shortcuts(&self) -> bool {
        self.costs.iter().all(|c| c.triangle_violation(true).is_none())
    }

    pub fn with_capacity(mut self, capacity: CapacityMode) -> Result<Self> {
        self.capacity = capacity;
        self.validate()?;
        Ok(self)
    }

    pub fn with_margins(mut self, margins: Vec<f64>) -> Result<Self> {
        self.margins = margins;
        self.validate()?;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Replaces customer prices with `generate_prices(n, seed)`.
    pub fn with_generated_prices(mut self, seed: u64) -> Self {
        let prices = generate_prices(self.n(), seed);
        self.prices[1..].copy_from_slice(&prices);
        self
    }

    /// Keeps the depot and the first `customers` customers. Item budgets are
    /// recomputed with [`default_budget`]; duration limits are kept.
    pub fn truncated(&self, customers: usize) -> Result<Self> {
        if customers == 0 || customers > self.n() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate {} customers to {customers}",
                self.n()
            )));
        }
        let keep = customers + 1;
        let costs = self
            .costs
            .iter()
            .map(|c| CostMatrix::from_fn(keep, |i, j| c.get(i, j)))
            .collect::<Vec<_>>();
        let capacity = match &self.capacity {
            CapacityMode::ItemBudget(_) => CapacityMode::ItemBudget(default_budget(customers, self.carriers())),
            CapacityMode::RouteDuration(t) => CapacityMode::RouteDuration(t.clone()),
        };
        let inst = Instance::new(
            self.name.clone(),
            costs,
            self.prices[1..keep].to_vec(),
            capacity,
            self.margins.clone(),
        )?;
        match &self.coords {
            Some(c) => inst.with_coords(c[..keep].to_vec()),
            None => Ok(inst),
        }
    }

    /// SHA-256 over every cost entry (carrier-major, row-major, little endian).
    pub fn costs_digest(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.costs {
            for v in &c.data {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Fixed compensations `p̄^k_i` for the fixed-margin problem, plus a mask of
/// carrier/item pairs the leader may use at all.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedCompensation {
    /// `pbar[k][i]`, indexed by vertex; slot 0 unused.
    pbar: Vec<Vec<f64>>,
    /// `offerable[k][i]`, indexed by vertex.
    offerable: Vec<Vec<bool>>,
}

impl FixedCompensation {
    /// `rows[k]` holds `p̄^k_1..p̄^k_n`.
    pub fn new(instance: &Instance, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = instance.n();
        if rows.len() != instance.carriers() || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "compensation must be {} x {}",
                instance.carriers(),
                n
            )));
        }
        let pbar = rows
            .into_iter()
            .map(|r| std::iter::once(0.0).chain(r).collect())
            .collect();
        let comp = FixedCompensation {
            pbar,
            offerable: vec![vec![true; n + 1]; instance.carriers()],
        };
        comp.validate(instance)?;
        Ok(comp)
    }

    /// Same compensation for every carrier: `p̄^k_i = p_i - m·p_i`.
    pub fn from_margin(instance: &Instance, m: f64) -> Result<Self> {
        let row: Vec<f64> = instance.customers().map(|i| instance.price(i) - m * instance.price(i)).collect();
        Self::new(instance, vec![row; instance.carriers()])
    }

    /// Restricts which pairs may be offered; `mask[k][i]` is indexed by vertex.
    pub fn with_offerable(mut self, mask: Vec<Vec<bool>>) -> Self {
        self.offerable = mask;
        self
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        for (k, row) in self.pbar.iter().enumerate() {
            for i in instance.customers() {
                let v = row[i];
                if !(v > 0.0 && v < instance.price(i)) {
                    return Err(Error::InvalidArgument(format!(
                        "compensation {v} of carrier {k} for item {i} is not inside (0, {})",
                        instance.price(i)
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.pbar[k][i]
    }

    #[inline]
    pub fn offerable(&self, k: usize, i: usize) -> bool {
        self.offerable[k][i]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.pbar.iter().map(|r| r[1..].to_vec()).collect()
    }
}

/// `(p_{mi}, p̄_{mi})` for margin value `m`, which must belong to the instance's margin set.
pub fn margin_profit(instance: &Instance, m: f64, i: usize) -> Result<(f64, f64)> {
    let idx = instance
        .margins()
        .iter()
        .position(|&v| v == m)
        .ok_or_else(|| Error::InvalidArgument(format!("margin {m} is not in {:?}", instance.margins())))?;
    if i > instance.n() {
        return Err(Error::InvalidArgument(format!("vertex {i} out of range")));
    }
    Ok((instance.margin_profit_at(idx, i), instance.margin_compensation_at(idx, i)))
}

/// Seeded uniform integer prices in `[1, 100]`, one per customer.
pub fn generate_prices(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| f64::from(rng.gen_range(1u32..=100))).collect()
}

/// Euclidean distance matrix, no rounding.
pub fn euclidean_costs(coords: &[(f64, f64)]) -> CostMatrix {
    CostMatrix::from_fn(coords.len(), |i, j| {
        if i == j {
            0.0
        } else {
            let (dx, dy) = (coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
            dx.hypot(dy)
        }
    })
}

/// `ceil(n / carriers) + 2` per carrier, clamped to `n - 1`.
pub fn default_budget(n: usize, carriers: usize) -> Vec<usize> {
    let raw = n.div_ceil(carriers.max(1)) + 2;
    let b = if raw >= n {
        let clamped = n.saturating_sub(1);
        log::warn!("item budget {raw} is not below n = {n}; clamped to {clamped}");
        clamped
    } else {
        raw
    };
    vec![b; carriers]
}

fn numbers(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, format!("non-numeric field {tok:?}")))
        })
        .collect()
}

/// Loads a Chao team-orienteering file. The first vertex is the depot; the
/// last one (the TOP end depot) is dropped. Scores are discarded and prices
/// regenerated with [`DEFAULT_PRICE_SEED`].
pub fn load_chao(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_chao(&text, path)
}

pub fn parse_chao(text: &str, path: &Path) -> Result<Instance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(no, l)| (no + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let (mut vertices, mut vehicles, mut tmax) = (None, None, None);
    // Either "n N / m M / tmax T" lines or a single "N M T" line.
    while let Some(&(no, line)) = lines.peek() {
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        if key.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            let value = toks
                .next()
                .ok_or_else(|| Error::parse(path, no, format!("header {key:?} has no value")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| Error::parse(path, no, format!("non-numeric header value {value:?}")))?;
            match key.to_ascii_lowercase().as_str() {
                "n" => vertices = Some(value),
                "m" => vehicles = Some(value),
                "tmax" => tmax = Some(value),
                other => return Err(Error::parse(path, no, format!("unknown header {other:?}"))),
            }
            lines.next();
        } else {
            if vertices.is_none() {
                let vals = numbers(path, no, line)?;
                if vals.len() != 3 {
                    return Err(Error::parse(path, no, "expected header \"n m tmax\""));
                }
                vertices = Some(vals[0]);
                vehicles = Some(vals[1]);
                tmax = Some(vals[2]);
                lines.next();
            }
            break;
        }
    }
    let vertices = vertices.ok_or_else(|| Error::parse(path, 1, "missing vertex count"))?;
    let vehicles = vehicles.ok_or_else(|| Error::parse(path, 1, "missing vehicle count"))?;
    let tmax = tmax.ok_or_else(|| Error::parse(path, 1, "missing tmax"))?;
    if !(tmax > 0.0) {
        return Err(Error::parse(path, 1, format!("tmax must be positive, got {tmax}")));
    }
    if vertices.fract() != 0.0 || vertices < 3.0 || vehicles.fract() != 0.0 || vehicles < 1.0 {
        return Err(Error::parse(path, 1, "vertex and vehicle counts must be integers (n >= 3, m >= 1)"));
    }
    let (vertices, vehicles) = (vertices as usize, vehicles as usize);

    let mut coords = Vec::with_capacity(vertices);
    let mut last_line = 1;
    for (no, line) in lines {
        let vals = numbers(path, no, line)?;
        if vals.len() < 2 {
            return Err(Error::parse(path, no, "expected \"x y score\""));
        }
        coords.push((vals[0], vals[1]));
        last_line = no;
    }
    if coords.len() != vertices {
        return Err(Error::parse(
            path,
            last_line,
            format!("header declares {vertices} vertices but {} were found", coords.len()),
        ));
    }
    coords.pop();
    let n = coords.len() - 1;
    let costs = euclidean_costs(&coords);
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Instance::new(
        name,
        vec![costs; vehicles],
        generate_prices(n, DEFAULT_PRICE_SEED),
        CapacityMode::RouteDuration(vec![tmax; vehicles]),
        Vec::new(),
    )?
    .with_coords(coords)
}

/// Loads a Solomon VRPTW file, ignoring demands and time windows. Carriers
/// get the default item budget.
pub fn load_solomon(path: impl AsRef<Path>, carriers: usize, max_customers: Option<usize>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_solomon(&text, path, carriers, max_customers)
}

pub fn parse_solomon(text: &str, path: &Path, carriers: usize, max_customers: Option<usize>) -> Result<Instance> {
    if carriers == 0 {
        return Err(Error::InvalidArgument("carriers must be at least 1".into()));
    }
    let mut lines = text.lines().enumerate().map(|(no, l)| (no + 1, l.trim()));
    let name = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty())
        .map(|(_, l)| l.to_string())
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let header = lines
        .by_ref()
        .find(|(_, l)| l.to_ascii_uppercase().starts_with("CUSTOMER"))
        .ok_or_else(|| Error::parse(path, 1, "missing CUSTOMER section header"))?;
    // Column titles follow the section marker.
    lines
        .by_ref()
        .find(|(_, l)| !l.is_empty())
        .filter(|(_, l)| l.to_ascii_uppercase().starts_with("CUST"))
        .ok_or_else(|| Error::parse(path, header.0, "missing customer column titles"))?;

    let mut coords: Vec<(f64, f64)> = Vec::new();
    for (no, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let vals = numbers(path, no, line)?;
        if vals.len() != 7 {
            return Err(Error::parse(path, no, format!("expected 7 fields, found {}", vals.len())));
        }
        if coords.is_empty() && vals[0] != 0.0 {
            return Err(Error::parse(path, no, "missing depot row (customer 0)"));
        }
        if vals[0] != coords.len() as f64 {
            return Err(Error::parse(path, no, format!("customer numbers out of sequence at {}", vals[0])));
        }
        coords.push((vals[1], vals[2]));
    }
    if coords.is_empty() {
        return Err(Error::parse(path, header.0, "missing depot row (customer 0)"));
    }
    if let Some(limit) = max_customers {
        coords.truncate(limit + 1);
    }
    let n = coords.len() - 1;
    if n == 0 {
        return Err(Error::parse(path, header.0, "no customers"));
    }
    let costs = euclidean_costs(&coords);
    Instance::new(
        name,
        vec![costs; carriers],
        generate_prices(n, DEFAULT_PRICE_SEED),
        CapacityMode::ItemBudget(default_budget(n, carriers)),
        Vec::new(),
    )?
    .with_coords(coords)
}

/// Versioned JSON layout used for fixtures and `--format json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceJson {
    pub schema_version: u32,
    pub name: String,
    pub n: usize,
    pub carriers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
    /// Present when the instance has no coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<Vec<Vec<f64>>>>,
    pub costs_digest: String,
    pub prices: Vec<f64>,
    pub capacity_mode: CapacityMode,
    pub margins: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compensation: Option<Vec<Vec<f64>>>,
}

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

pub fn to_json(instance: &Instance, compensation: Option<&FixedCompensation>) -> InstanceJson {
    InstanceJson {
        schema_version: INSTANCE_SCHEMA_VERSION,
        name: instance.name().to_string(),
        n: instance.n(),
        carriers: instance.carriers(),
        vertices: instance.coords().map(|c| c.iter().map(|&(x, y)| [x, y]).collect()),
        costs: match instance.coords() {
            Some(_) => None,
            None => Some((0..instance.carriers()).map(|k| instance.costs(k).rows()).collect()),
        },
        costs_digest: instance.costs_digest(),
        prices: instance.prices().to_vec(),
        capacity_mode: instance.capacity().clone(),
        margins: instance.margins().to_vec(),
        compensation: compensation.map(FixedCompensation::rows),
    }
}

pub fn from_json(doc: &InstanceJson) -> Result<(Instance, Option<FixedCompensation>)> {
    if doc.schema_version != INSTANCE_SCHEMA_VERSION {
        return Err(Error::InvalidInstance(format!(
            "unsupported schema version {}",
            doc.schema_version
        )));
    }
    let coords: Option<Vec<(f64, f64)>> = doc.vertices.as_ref().map(|v| v.iter().map(|p| (p[0], p[1])).collect());
    let costs = match (&doc.costs, &coords) {
        (Some(c), _) => c.iter().map(|rows| CostMatrix::from_rows(rows)).collect::<Result<Vec<_>>>()?,
        (None, Some(xy)) => vec![euclidean_costs(xy); doc.carriers],
        (None, None) => return Err(Error::InvalidInstance("neither vertices nor costs given".into())),
    };
    if costs.len() != doc.carriers || doc.prices.len() != doc.n {
        return Err(Error::InvalidInstance("carrier or customer counts disagree with the data".into()));
    }
    let mut inst = Instance::new(
        doc.name.clone(),
        costs,
        doc.prices.clone(),
        doc.capacity_mode.clone(),
        doc.margins.clone(),
    )?;
    if let Some(xy) = coords {
        inst = inst.with_coords(xy)?;
    }
    if !doc.costs_digest.is_empty() && doc.costs_digest != inst.costs_digest() {
        return Err(Error::InvalidInstance("costs digest mismatch".into()));
    }
    if !inst.allows_shortcuts() {
        log::warn!("instance {} violates the triangle inequality", inst.name());
    }
    let comp = doc
        .compensation
        .as_ref()
        .map(|rows| FixedCompensation::new(&inst, rows.clone()))
        .transpose()?;
    Ok((inst, comp))
}

pub fn load_json(path: impl AsRef<Path>) -> Result<(Instance, Option<FixedCompensation>)> {
    let text = fs::read_to_string(path)?;
    from_json(&serde_json::from_str(&text)?)
}

/// Parameters of a seeded random Euclidean instance.
#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub customers: usize,
    pub carriers: usize,
    pub margins: Vec<f64>,
    pub duration: bool,
    pub seed: u64,
}

/// Side of the square customers are scattered in.
const RANDOM_BOX: f64 = 40.0;

/// Random points in a square, prices from [`generate_prices`], default item
/// budgets or a random duration limit shared by all carriers.
pub fn random_euclidean(spec: &RandomSpec) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let coords: Vec<(f64, f64)> = (0..=spec.customers)
        .map(|_| (rng.gen_range(0.0..RANDOM_BOX), rng.gen_range(0.0..RANDOM_BOX)))
        .collect();
    let capacity = if spec.duration {
        CapacityMode::RouteDuration(vec![rng.gen_range(30.0..90.0); spec.carriers])
    } else {
        CapacityMode::ItemBudget(default_budget(spec.customers, spec.carriers))
    };
    let costs = euclidean_costs(&coords);
    Instance::new(
        format!("rand-n{}-k{}-s{}", spec.customers, spec.carriers, spec.seed),
        vec![costs; spec.carriers],
        generate_prices(spec.customers, spec.seed ^ 0x9e37_79b9_7f4a_7c15),
        capacity,
        spec.margins.clone(),
    )?
    .with_coords(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chao_text(customers: usize, vehicles: usize, tmax: f64) -> String {
        let mut s = format!("n {}\nm {vehicles}\ntmax {tmax}\n", customers + 2);
        for v in 0..customers + 2 {
            s.push_str(&format!("{}.0\t{}.5\t{}\n", v, 2 * v, v % 7));
        }
        s
    }

    #[test]
    fn chao_fields_pass_through() {
        let inst = parse_chao(&chao_text(20, 2, 40.0), Path::new("p1.2.k.txt")).unwrap();
        assert_eq!(inst.n(), 20);
        assert_eq!(inst.carriers(), 2);
        assert_eq!(inst.capacity(), &CapacityMode::RouteDuration(vec![40.0, 40.0]));
        assert!(inst.is_metric());
        assert_eq!(inst.name(), "p1.2.k");
    }

    #[test]
    fn chao_single_line_header() {
        let text = "5 1 12.5\n0 0 0\n1 0 10\n2 0 10\n3 0 10\n0 0 0\n";
        let inst = parse_chao(text, Path::new("t.txt")).unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.capacity().duration(0), Some(12.5));
    }

    #[test]
    fn chao_count_mismatch_is_rejected() {
        let mut text = chao_text(4, 2, 10.0);
        text.push_str("9 9 9\n");
        let err = parse_chao(&text, Path::new("x.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn chao_rejects_bad_numbers_and_tmax() {
        let text = "n 4\nm 1\ntmax 10\n0 0 0\n1 x 3\n2 2 2\n3 3 0\n";
        assert!(matches!(parse_chao(text, Path::new("x")), Err(Error::Parse { line: 5, .. })));
        let text = chao_text(3, 1, 0.0);
        assert!(parse_chao(&text, Path::new("x")).is_err());
        let text = "n 4\nm 1\n0 0 0\n1 1 3\n2 2 2\n3 3 0\n";
        assert!(parse_chao(text, Path::new("x")).is_err(), "missing tmax");
    }

    const SOLOMON: &str = "R101

VEHICLE
NUMBER     CAPACITY
  25         200

CUSTOMER
CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME

    0      35         35          0          0        230          0
    1      41         49         10        161        171         10
    2      35         17          7         50         60         10
    3      55         45         13        116        126         10
    4      55         20         19        149        159         10
    5      15         30         26         34         44         10
";

    #[test]
    fn solomon_parses_and_truncates() {
        let inst = parse_solomon(SOLOMON, Path::new("R101.txt"), 2, None).unwrap();
        assert_eq!(inst.n(), 5);
        assert_eq!(inst.name(), "R101");
        assert_eq!(inst.cost(0, 0, 2), 18.0);
        let inst = parse_solomon(SOLOMON, Path::new("R101.txt"), 1, Some(3)).unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.capacity(), &CapacityMode::ItemBudget(vec![2]));
    }

    #[test]
    fn solomon_errors() {
        assert!(matches!(
            parse_solomon(SOLOMON, Path::new("x"), 0, None),
            Err(Error::InvalidArgument(_))
        ));
        let no_header = SOLOMON.replace("CUSTOMER\n", "");
        assert!(parse_solomon(&no_header, Path::new("x"), 1, None).is_err());
        let no_depot = SOLOMON.replace("    0      35         35          0          0        230          0\n", "");
        let err = parse_solomon(&no_depot, Path::new("x"), 1, None).unwrap_err();
        assert!(err.to_string().contains("depot"), "{err}");
    }

    #[test]
    fn default_budget_rule() {
        assert_eq!(default_budget(20, 2), vec![12, 12]);
        assert_eq!(default_budget(20, 3), vec![9, 9, 9]);
        assert_eq!(default_budget(5, 1), vec![4]);
    }

    #[test]
    fn margin_split() {
        let inst = Instance::new(
            "m",
            vec![euclidean_costs(&[(0.0, 0.0), (1.0, 0.0)])],
            vec![10.0],
            CapacityMode::RouteDuration(vec![5.0]),
            vec![0.2, 0.5],
        )
        .unwrap();
        assert_eq!(margin_profit(&inst, 0.5, 1).unwrap(), (5.0, 5.0));
        assert_eq!(margin_profit(&inst, 0.2, 1).unwrap(), (2.0, 8.0));
        assert!(margin_profit(&inst, 0.3, 1).is_err());
    }

    #[test]
    fn three_four_five() {
        let c = euclidean_costs(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(c.get(0, 1), 5.0);
        assert_eq!(c.get(1, 0), 5.0);
    }

    #[test]
    fn distinct_seeds_give_distinct_prices() {
        for s in 0..100u64 {
            assert_ne!(generate_prices(10, 2 * s), generate_prices(10, 2 * s + 1));
        }
    }

    #[test]
    fn invalid_instances() {
        let c = vec![euclidean_costs(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])];
        let mk = |prices: Vec<f64>, cap, m: Vec<f64>| Instance::new("x", c.clone(), prices, cap, m);
        assert!(mk(vec![1.0, 0.0], CapacityMode::ItemBudget(vec![1]), vec![]).is_err());
        assert!(mk(vec![1.0, 1.0], CapacityMode::ItemBudget(vec![2]), vec![]).is_err());
        assert!(mk(vec![1.0, 1.0], CapacityMode::ItemBudget(vec![1]), vec![0.5, 0.2]).is_err());
        assert!(mk(vec![1.0, 1.0], CapacityMode::ItemBudget(vec![1]), vec![1.0]).is_err());
        assert!(mk(vec![1.0, 1.0], CapacityMode::RouteDuration(vec![-1.0]), vec![]).is_err());
        assert!(mk(vec![1.0, 1.0], CapacityMode::ItemBudget(vec![1]), vec![0.2, 0.5]).is_ok());
    }

    #[test]
    fn compensation_bounds() {
        let inst = random_euclidean(&RandomSpec {
            customers: 3,
            carriers: 1,
            margins: vec![0.5],
            duration: false,
            seed: 1,
        })
        .unwrap();
        let p = inst.prices().to_vec();
        assert!(FixedCompensation::new(&inst, vec![p.clone()]).is_err());
        let half: Vec<f64> = p.iter().map(|v| v / 2.0).collect();
        assert!(FixedCompensation::new(&inst, vec![half]).is_ok());
    }

    #[test]
    fn json_round_trip_keeps_digest() {
        let inst = random_euclidean(&RandomSpec {
            customers: 5,
            carriers: 2,
            margins: vec![0.2, 0.5],
            duration: true,
            seed: 7,
        })
        .unwrap();
        let doc = to_json(&inst, None);
        let text = serde_json::to_string(&doc).unwrap();
        let (back, comp) = from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, inst);
        assert!(comp.is_none());
        let mut tampered = doc.clone();
        tampered.costs_digest = "00".into();
        assert!(from_json(&tampered).is_err());
    }

    proptest! {
        #[test]
        fn euclidean_costs_form_a_metric(pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..9)) {
            let c = euclidean_costs(&pts);
            for i in 0..pts.len() {
                prop_assert_eq!(c.get(i, i), 0.0);
                for j in 0..pts.len() {
                    prop_assert!(c.get(i, j) >= 0.0);
                    prop_assert_eq!(c.get(i, j), c.get(j, i));
                }
            }
            prop_assert!(c.triangle_violation(false).is_none());
        }

        #[test]
        fn prices_are_a_pure_function_of_the_seed(n in 1usize..40, seed in any::<u64>()) {
            let a = generate_prices(n, seed);
            prop_assert_eq!(&a, &generate_prices(n, seed));
            prop_assert!(a.iter().all(|&p| (0.0..=100.0).contains(&p) && p.fract() == 0.0));
        }

        #[test]
        fn clamped_budget_stays_below_n(n in 2usize..60, k in 1usize..5) {
            prop_assert!(default_budget(n, k).iter().all(|&b| b < n));
        }
    }
}
