//! One run: load, solve in the configured mode, write the report files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use bilevel_ptp::heuristic::{run_heuristic, HeuristicTrace};
use bilevel_ptp::instances::{
    default_budget, load_chao, load_json, load_solomon, CapacityMode, FixedCompensation, Instance,
};
use bilevel_ptp::models::{build_model, ModelKind, MAX_ENUM_CUSTOMERS};
use bilevel_ptp::report::{
    format_value, write_results_csv, write_structure_csv, HeuristicSummary, ResultsRow, StructureRow,
};
use bilevel_ptp::solver::{
    branch_and_cut, brute_force_bilevel, BilevelSolution, SolveReport, MAX_BRUTE_CARRIERS, MAX_BRUTE_CUSTOMERS,
    MAX_BRUTE_MARGINS,
};
use bilevel_ptp::verification::full_relaxation_value;

use crate::config::{CapacityChoice, InstanceFormat, Mode, RunConfig};
use crate::CliError;

pub const SOLUTION_SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.csv";
pub const SOLUTION_FILE: &str = "solution.json";
pub const STRUCTURE_FILE: &str = "structure.csv";
pub const HEURISTIC_FILE: &str = "heuristic.json";

/// Largest difference between two values still reported as equal.
pub const MATCH_TOL: f64 = 1e-6;

/// What a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    /// Results row of the branch-and-cut solve, if one ran.
    pub results: Option<ResultsRow>,
    /// Summary line printed to stdout.
    pub message: String,
}

/// Offer and acceptance of one item in `solution.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentJson {
    pub item: usize,
    pub carrier: usize,
    /// Margin the item is offered at; absent with fixed compensations.
    pub margin: Option<f64>,
    pub compensation: f64,
    pub served: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarrierJson {
    pub carrier: usize,
    /// Vertex sequence starting and ending at the depot; empty when idle.
    pub route: Vec<usize>,
    pub route_cost: f64,
    pub follower_profit: f64,
    pub leader_profit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    pub schema_version: u32,
    pub instance: String,
    pub kind: ModelKind,
    pub margins: Vec<f64>,
    pub leader_profit: f64,
    /// False when a limit stopped the search; absent for heuristic solutions.
    pub optimal: Option<bool>,
    pub assignments: Vec<AssignmentJson>,
    pub carriers: Vec<CarrierJson>,
}

impl SolutionJson {
    pub fn new(
        instance: &Instance,
        kind: ModelKind,
        compensation: Option<&FixedCompensation>,
        solution: &BilevelSolution,
        optimal: Option<bool>,
    ) -> Self {
        let served = solution.served();
        let assignments = instance
            .customers()
            .filter_map(|i| {
                let a = solution.decision.get(i)?;
                let (margin, pay) = match (a.margin, compensation) {
                    (Some(m), _) => (Some(instance.margins()[m]), instance.margin_compensation_at(m, i)),
                    (None, Some(c)) => (None, c.get(a.carrier, i)),
                    (None, None) => (None, f64::NAN),
                };
                Some(AssignmentJson {
                    item: i,
                    carrier: a.carrier,
                    margin,
                    compensation: pay,
                    served: served.iter().any(|&(s, _)| s == i),
                })
            })
            .collect();
        let carriers = solution
            .responses
            .iter()
            .map(|r| CarrierJson {
                carrier: r.carrier,
                route: r.route.sequence().to_vec(),
                route_cost: r.route.cost(instance.costs(r.carrier)),
                follower_profit: r.follower_value,
                leader_profit: r.leader_value,
            })
            .collect();
        SolutionJson {
            schema_version: SOLUTION_SCHEMA_VERSION,
            instance: instance.name().to_string(),
            kind,
            margins: instance.margins().to_vec(),
            leader_profit: solution.leader_profit,
            optimal,
            assignments,
            carriers,
        }
    }
}

/// Loads the instance and applies the configured overrides. Returns the
/// compensations stored with a JSON instance, if any.
pub fn load_instance(cfg: &RunConfig) -> Result<(Instance, Option<FixedCompensation>), CliError> {
    if !cfg.instance.is_file() {
        return Err(CliError::Usage(format!("instance file {} not found", cfg.instance.display())));
    }
    let (mut inst, mut comp) = match cfg.format {
        InstanceFormat::Json => load_json(&cfg.instance)?,
        InstanceFormat::Chao => (load_chao(&cfg.instance)?, None),
        InstanceFormat::Solomon => {
            let carriers = cfg.carriers.ok_or_else(|| CliError::Usage("solomon instances need --carriers".into()))?;
            (load_solomon(&cfg.instance, carriers, cfg.customers)?, None)
        }
    };
    if let Some(k) = cfg.carriers {
        if k != inst.carriers() {
            return Err(CliError::Usage(format!(
                "--carriers {k} disagrees with the {} carriers of {}",
                inst.carriers(),
                cfg.instance.display()
            )));
        }
    }
    if let Some(n) = cfg.customers {
        if n < inst.n() {
            inst = inst.truncated(n)?;
            comp = comp
                .map(|c| FixedCompensation::new(&inst, c.rows().into_iter().map(|r| r[..n].to_vec()).collect()))
                .transpose()?;
        }
    }
    if let Some(seed) = cfg.seed {
        inst = inst.with_generated_prices(seed);
        if let Some(c) = &comp {
            c.validate(&inst)
                .map_err(|e| CliError::Usage(format!("stored compensations do not fit the regenerated prices: {e}")))?;
        }
    }
    match cfg.capacity {
        Some(CapacityChoice::Budget) => {
            let budgets = default_budget(inst.n(), inst.carriers());
            inst = inst.with_capacity(CapacityMode::ItemBudget(budgets))?;
        }
        Some(CapacityChoice::Duration) if !inst.capacity().is_duration() => {
            return Err(CliError::Usage(format!("{} has no route duration limits", cfg.instance.display())));
        }
        _ => {}
    }
    if let Some(m) = &cfg.margins {
        inst = inst.with_margins(m.clone())?;
    }
    Ok((inst, comp))
}

/// Compensations for a fixed-margin kind: those stored with the instance,
/// else every item at `--fixed-margin`, else at the smallest margin.
pub fn fixed_compensation(
    cfg: &RunConfig,
    instance: &Instance,
    stored: Option<FixedCompensation>,
) -> Result<FixedCompensation, CliError> {
    if let Some(c) = stored {
        return Ok(c);
    }
    let margin = cfg.fixed_margin.or_else(|| instance.m_min()).ok_or_else(|| {
        CliError::Usage("fixed-margin kinds need stored compensations, --fixed-margin or --margins".into())
    })?;
    Ok(FixedCompensation::from_margin(instance, margin)?)
}

/// Runs `cfg`, writing report files into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let (inst, stored) = load_instance(cfg)?;
    let comp = if cfg.kind.decides_margins() {
        None
    } else {
        Some(fixed_compensation(cfg, &inst, stored)?)
    };
    if cfg.kind.decides_margins() && cfg.mode != Mode::Verify && inst.margins().is_empty() {
        return Err(CliError::Usage("margin-deciding kinds need --margins".into()));
    }
    match cfg.mode {
        Mode::Solve => solve(cfg, &inst, comp.as_ref()),
        Mode::Verify => verify(cfg, &inst, comp.as_ref()),
        Mode::LpCompare => lp_compare(&inst),
        Mode::HeuristicOnly => heuristic_only(cfg, &inst),
    }
}

fn solve(cfg: &RunConfig, inst: &Instance, comp: Option<&FixedCompensation>) -> Result<RunOutcome, CliError> {
    fs::create_dir_all(&cfg.out)?;
    let trace = if cfg.kind.decides_margins() {
        let trace = run_heuristic(inst, Some(cfg.phase_seconds))?;
        write_json(&cfg.out.join(HEURISTIC_FILE), &trace)?;
        Some(trace)
    } else {
        None
    };
    let skeleton = build_model(inst, cfg.kind, comp)?;
    let report = branch_and_cut(&skeleton, inst, comp, trace.as_ref().map(|t| &t.best), &cfg.limits)?;
    let summary = trace.as_ref().map(HeuristicSummary::from_trace);
    let row = ResultsRow::from_report(inst, &report, summary.as_ref());
    write_outputs(cfg, inst, comp, &report, &row)?;
    Ok(RunOutcome {
        message: format!(
            "{} {}: LB={} UB={} gap={:.2}% nodes={} time={:.1}s",
            inst.name(),
            cfg.kind,
            format_value(report.lower_bound),
            format_value(report.upper_bound),
            report.gap,
            report.nodes,
            report.time_seconds
        ),
        results: Some(row),
    })
}

fn write_outputs(
    cfg: &RunConfig,
    inst: &Instance,
    comp: Option<&FixedCompensation>,
    report: &SolveReport,
    row: &ResultsRow,
) -> Result<(), CliError> {
    write_results_csv(create(&cfg.out.join(RESULTS_FILE))?, std::slice::from_ref(row))?;
    let solution = SolutionJson::new(inst, cfg.kind, comp, &report.solution, Some(report.optimal));
    write_json(&cfg.out.join(SOLUTION_FILE), &solution)?;
    if cfg.kind.decides_margins() {
        let structure = StructureRow::from_solution(inst, &report.solution, report.time_seconds);
        write_structure_csv(create(&cfg.out.join(STRUCTURE_FILE))?, &[structure])?;
    }
    Ok(())
}

fn verify(cfg: &RunConfig, inst: &Instance, comp: Option<&FixedCompensation>) -> Result<RunOutcome, CliError> {
    let bounds = [
        ("customers", inst.n(), MAX_BRUTE_CUSTOMERS),
        ("carriers", inst.carriers(), MAX_BRUTE_CARRIERS),
        ("margins", inst.margins().len(), MAX_BRUTE_MARGINS),
    ];
    for (what, got, limit) in bounds {
        if got > limit {
            return Err(CliError::Usage(format!("verify mode supports at most {limit} {what}, got {got}")));
        }
    }
    if cfg.kind.decides_margins() && inst.margins().is_empty() {
        return Err(CliError::Usage("margin-deciding kinds need --margins".into()));
    }
    fs::create_dir_all(&cfg.out)?;
    let skeleton = build_model(inst, cfg.kind, comp)?;
    let report = branch_and_cut(&skeleton, inst, comp, None, &cfg.limits)?;
    let row = ResultsRow::from_report(inst, &report, None);
    write_outputs(cfg, inst, comp, &report, &row)?;
    let brute = brute_force_bilevel(inst, cfg.kind, comp)?;
    let agree = report.optimal && (report.lower_bound - brute.leader_profit).abs() <= MATCH_TOL;
    let message = format!(
        "bnc={} brute={} {}",
        format_value(report.lower_bound),
        format_value(brute.leader_profit),
        if agree { "MATCH" } else { "MISMATCH" }
    );
    if agree {
        Ok(RunOutcome { results: Some(row), message })
    } else {
        Err(CliError::Mismatch(message))
    }
}

fn lp_compare(inst: &Instance) -> Result<RunOutcome, CliError> {
    if inst.n() > MAX_ENUM_CUSTOMERS {
        return Err(CliError::Usage(format!(
            "lp-compare supports at most {MAX_ENUM_CUSTOMERS} customers, got {}",
            inst.n()
        )));
    }
    if inst.margins().is_empty() {
        return Err(CliError::Usage("lp-compare needs --margins".into()));
    }
    let aggregated = full_relaxation_value(inst, ModelKind::Bpmd)?;
    let disaggregated = full_relaxation_value(inst, ModelKind::BpmdD)?;
    let equal = (aggregated - disaggregated).abs() <= MATCH_TOL;
    let message = format!(
        "lp(BPMD)={aggregated:.6} lp(BPMD_D)={disaggregated:.6} {}",
        if equal { "EQUAL" } else { "DIFFERENT" }
    );
    if equal {
        Ok(RunOutcome { results: None, message })
    } else {
        Err(CliError::Mismatch(message))
    }
}

fn heuristic_only(cfg: &RunConfig, inst: &Instance) -> Result<RunOutcome, CliError> {
    fs::create_dir_all(&cfg.out)?;
    let trace: HeuristicTrace = run_heuristic(inst, Some(cfg.phase_seconds))?;
    write_json(&cfg.out.join(HEURISTIC_FILE), &trace)?;
    let seconds = HeuristicSummary::from_trace(&trace).seconds;
    let solution = SolutionJson::new(inst, cfg.kind, None, &trace.best, None);
    write_json(&cfg.out.join(SOLUTION_FILE), &solution)?;
    let structure = StructureRow::from_solution(inst, &trace.best, seconds);
    write_structure_csv(create(&cfg.out.join(STRUCTURE_FILE))?, &[structure])?;
    Ok(RunOutcome {
        results: None,
        message: format!("heuristic={} phase={} time={seconds:.1}s", format_value(trace.value), trace.chosen_phase),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(bilevel_ptp::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
