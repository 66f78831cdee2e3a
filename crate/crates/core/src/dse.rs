//! Scenario runner and design-space sweeps.
//!
//! A scenario maps every DFG of a workload once, replays the trace through
//! an allocation policy, and reports the utilization spread plus the lifetime
//! implied by the hottest cell. [`compare_policies`] pairs the fixed-origin
//! baseline with the rotating allocator on the same workload.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aging::{self, AgingParams, UtilizationRate};
use crate::allocation::{allocate, pivot_for_execution, AllocationPolicy, Pivot, PivotScheduler};
use crate::mapper::{check_context_capacity, map_dfg, FabricDims, VirtualConfiguration};
use crate::metrics::{UtilizationMap, UtilizationSummary, Weighting};
use crate::workload::Workload;

#[derive(Debug, Error, PartialEq)]
pub enum DseError {
    #[error("scenario {label}: no dfg fits a {cols}x{rows} fabric")]
    EmptyScenario { label: String, cols: usize, rows: usize },
    #[error("invalid fabric dims {0:?}")]
    InvalidDims(FabricDims),
    #[error("sweep needs at least one column count, row count and policy")]
    EmptySweep,
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// Fabric sizes evaluated as named design points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    /// Best energy, 16 columns x 2 rows.
    BE,
    /// Best performance, 32 x 4.
    BP,
    /// Lowest utilization, 32 x 8.
    BU,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::BE, Preset::BP, Preset::BU];

    pub fn dims(self) -> FabricDims {
        match self {
            Preset::BE => FabricDims::new(16, 2),
            Preset::BP => FabricDims::new(32, 4),
            Preset::BU => FabricDims::new(32, 8),
        }
    }

    /// Published average utilization for the design point. The two numbers
    /// come from different tables of the same report and disagree slightly
    /// for BP and BU.
    pub fn reported_avg_util(self) -> (f64, f64) {
        match self {
            Preset::BE => (0.397, 0.397),
            Preset::BP => (0.178, 0.171),
            Preset::BU => (0.089, 0.085),
        }
    }

    /// Published (baseline, proposed) worst-cell utilization.
    pub fn reported_worst_util(self) -> (f64, f64) {
        match self {
            Preset::BE => (0.945, 0.411),
            Preset::BP => (0.981, 0.224),
            Preset::BU => (0.981, 0.123),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::BE => "BE",
            Preset::BP => "BP",
            Preset::BU => "BU",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BE" => Ok(Preset::BE),
            "BP" => Ok(Preset::BP),
            "BU" => Ok(Preset::BU),
            _ => Err(format!("unknown preset `{s}` (expected BE|BP|BU)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario<'w> {
    pub label: String,
    pub dims: FabricDims,
    pub policy: AllocationPolicy,
    pub workload: &'w Workload,
    pub aging: AgingParams,
    pub weighting: Weighting,
}

impl<'w> Scenario<'w> {
    pub fn new(dims: FabricDims, policy: AllocationPolicy, workload: &'w Workload) -> Self {
        Self {
            label: dims_label(&dims),
            dims,
            policy,
            workload,
            aging: AgingParams::default(),
            weighting: Weighting::default(),
        }
    }
}

pub fn dims_label(dims: &FabricDims) -> String {
    format!("L{}-W{}", dims.cols, dims.rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDfg {
    pub index: usize,
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextReport {
    pub index: usize,
    pub pressure: usize,
    pub capacity: usize,
}

/// Outcome of one scenario, or of a baseline/rotating pair.
///
/// For a pair, the single-run fields describe the rotating run and the
/// `baseline_*` fields the fixed-origin run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub label: String,
    pub cols: usize,
    pub rows: usize,
    /// `None` for a paired result.
    pub policy: Option<AllocationPolicy>,
    pub executions: u64,
    pub avg_util: f64,
    pub max_util: f64,
    pub min_util: f64,
    pub argmax: (usize, usize),
    /// `None` when no cell is ever stressed.
    pub lifetime_years: Option<f64>,
    pub histogram: Vec<u64>,
    pub baseline_avg_util: Option<f64>,
    pub baseline_max_util: Option<f64>,
    pub proposed_max_util: Option<f64>,
    pub baseline_lifetime_years: Option<f64>,
    pub lifetime_improvement: Option<f64>,
    pub skipped_dfgs: Vec<SkippedDfg>,
    pub context_violations: Vec<ContextReport>,
}

/// Result plus the utilization map it was computed from.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub result: ScenarioResult,
    pub utilization: UtilizationMap,
    /// Pivot used by the last execution.
    pub last_pivot: Pivot,
}

/// DFGs of a workload mapped once for a given fabric.
struct MappedWorkload {
    configs: Vec<Option<VirtualConfiguration>>,
    skipped: Vec<SkippedDfg>,
    context_violations: Vec<ContextReport>,
}

fn map_workload(workload: &Workload, dims: &FabricDims) -> MappedWorkload {
    let mut configs = Vec::with_capacity(workload.dfgs.len());
    let mut skipped = Vec::new();
    let mut context_violations = Vec::new();
    for (index, d) in workload.dfgs.iter().enumerate() {
        match map_dfg(d, dims) {
            Ok(vc) => {
                if let Err(v) = check_context_capacity(&vc, dims) {
                    context_violations.push(ContextReport {
                        index,
                        pressure: v.pressure,
                        capacity: v.capacity,
                    });
                }
                configs.push(Some(vc));
            }
            Err(e) => {
                skipped.push(SkippedDfg {
                    index,
                    name: d.name.clone(),
                    reason: e.to_string(),
                });
                configs.push(None);
            }
        }
    }
    MappedWorkload {
        configs,
        skipped,
        context_violations,
    }
}

fn replay(
    label: &str,
    mapped: &MappedWorkload,
    workload: &Workload,
    dims: &FabricDims,
    policy: AllocationPolicy,
    weighting: Weighting,
    aging: &AgingParams,
) -> Result<ScenarioRun, DseError> {
    let empty = || DseError::EmptyScenario {
        label: label.to_string(),
        cols: dims.cols,
        rows: dims.rows,
    };
    let mut map = UtilizationMap::new(dims);
    let mut scheduler = PivotScheduler::new(*dims);
    let mut executions = 0u64;
    let mut last_pivot = Pivot::ORIGIN;
    for entry in &workload.trace {
        let Some(vc) = mapped.configs[entry.dfg_index()].as_ref() else {
            continue;
        };
        let weight = match weighting {
            Weighting::PerExecution => 1,
            Weighting::Latency => vc.num_cols_used.max(1) as u64,
        };
        for _ in 0..entry.repeat() {
            let pivot = pivot_for_execution(policy, &mut scheduler);
            let alloc = allocate(vc, pivot, dims).expect("mapped configuration fits its fabric");
            map.record_weighted(&alloc, weight)
                .expect("allocation dims match the map");
            executions += 1;
            last_pivot = pivot;
        }
    }
    if executions == 0 {
        return Err(empty());
    }
    let summary = map
        .summarize(UtilizationSummary::DEFAULT_BINS)
        .map_err(|_| empty())?;
    let lifetime_years = UtilizationRate::new(summary.max)
        .ok()
        .and_then(|u| aging::lifetime(aging, u).ok());
    let result = ScenarioResult {
        label: label.to_string(),
        cols: dims.cols,
        rows: dims.rows,
        policy: Some(policy),
        executions,
        avg_util: summary.avg,
        max_util: summary.max,
        min_util: summary.min,
        argmax: summary.argmax,
        lifetime_years,
        histogram: summary.histogram,
        baseline_avg_util: None,
        baseline_max_util: None,
        proposed_max_util: None,
        baseline_lifetime_years: None,
        lifetime_improvement: None,
        skipped_dfgs: mapped.skipped.clone(),
        context_violations: mapped.context_violations.clone(),
    };
    Ok(ScenarioRun {
        result,
        utilization: map,
        last_pivot,
    })
}

/// Runs one scenario and keeps the utilization map.
pub fn simulate(s: &Scenario<'_>) -> Result<ScenarioRun, DseError> {
    s.dims.validate().map_err(|_| DseError::InvalidDims(s.dims))?;
    let mapped = map_workload(s.workload, &s.dims);
    replay(&s.label, &mapped, s.workload, &s.dims, s.policy, s.weighting, &s.aging)
}

pub fn run_scenario(s: &Scenario<'_>) -> Result<ScenarioResult, DseError> {
    simulate(s).map(|r| r.result)
}

/// Combines a baseline and a proposed run into one paired result.
pub fn pair_results(label: &str, baseline: &ScenarioResult, proposed: &ScenarioResult) -> ScenarioResult {
    let improvement = match (
        UtilizationRate::new(baseline.max_util),
        UtilizationRate::new(proposed.max_util),
    ) {
        (Ok(b), Ok(p)) => aging::lifetime_improvement(b, p).ok(),
        _ => None,
    };
    ScenarioResult {
        label: label.to_string(),
        policy: None,
        baseline_avg_util: Some(baseline.avg_util),
        baseline_max_util: Some(baseline.max_util),
        proposed_max_util: Some(proposed.max_util),
        baseline_lifetime_years: baseline.lifetime_years,
        lifetime_improvement: improvement,
        ..proposed.clone()
    }
}

/// Runs the fixed-origin and rotating policies on the same workload, each
/// with a fresh scheduler, and pairs the results.
pub fn compare_policies(
    dims: &FabricDims,
    workload: &Workload,
    aging: &AgingParams,
    weighting: Weighting,
) -> Result<ScenarioResult, DseError> {
    dims.validate().map_err(|_| DseError::InvalidDims(*dims))?;
    let label = dims_label(dims);
    let mapped = map_workload(workload, dims);
    let run = |policy| replay(&label, &mapped, workload, dims, policy, weighting, aging);
    let baseline = run(AllocationPolicy::FixedOrigin)?;
    let proposed = run(AllocationPolicy::Rotating)?;
    Ok(pair_results(&label, &baseline.result, &proposed.result))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub cols: Vec<usize>,
    pub rows: Vec<usize>,
    pub config_lines: usize,
    /// Defaults to `2 * rows` per design point.
    pub context_lines: Option<usize>,
    pub policies: Vec<AllocationPolicy>,
    pub weighting: Weighting,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
}

impl SweepConfig {
    pub fn new(cols: Vec<usize>, rows: Vec<usize>) -> Self {
        Self {
            cols,
            rows,
            config_lines: FabricDims::DEFAULT_CONFIG_LINES,
            context_lines: None,
            policies: vec![AllocationPolicy::FixedOrigin, AllocationPolicy::Rotating],
            weighting: Weighting::default(),
            jobs: 0,
        }
    }

    /// Sorted, de-duplicated design points.
    pub fn design_points(&self) -> Vec<FabricDims> {
        let mut pts: Vec<(usize, usize)> = self
            .cols
            .iter()
            .flat_map(|&c| self.rows.iter().map(move |&r| (c, r)))
            .collect();
        pts.sort_unstable();
        pts.dedup();
        pts.into_iter()
            .map(|(c, r)| {
                let d = FabricDims::new(c, r).with_lines(self.config_lines);
                match self.context_lines {
                    Some(ctx) => d.with_context(ctx),
                    None => d,
                }
            })
            .collect()
    }
}

/// One design point of a sweep. Failures are kept so the sweep can continue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub cols: usize,
    pub rows: usize,
    pub policy: Option<AllocationPolicy>,
    pub result: Option<ScenarioResult>,
    pub error: Option<String>,
}

/// Evaluates every `(L, W)` design point. With both policies selected each
/// point yields one paired result; otherwise one result per policy. Output
/// is ordered by `(L, W)` whatever order the workers finish in.
pub fn sweep(cfg: &SweepConfig, workload: &Workload, aging: &AgingParams) -> Result<Vec<SweepEntry>, DseError> {
    if cfg.cols.is_empty() || cfg.rows.is_empty() || cfg.policies.is_empty() {
        return Err(DseError::EmptySweep);
    }
    let paired = cfg.policies.contains(&AllocationPolicy::FixedOrigin)
        && cfg.policies.contains(&AllocationPolicy::Rotating);
    let mut jobs: Vec<(FabricDims, Option<AllocationPolicy>)> = Vec::new();
    for dims in cfg.design_points() {
        if paired {
            jobs.push((dims, None));
        } else {
            let mut ps = cfg.policies.clone();
            ps.dedup();
            jobs.extend(ps.into_iter().map(|p| (dims, Some(p))));
        }
    }
    let eval = |(dims, policy): &(FabricDims, Option<AllocationPolicy>)| {
        let outcome = match policy {
            None => compare_policies(dims, workload, aging, cfg.weighting),
            Some(p) => {
                let mut s = Scenario::new(*dims, *p, workload);
                s.label = format!("{}/{}", dims_label(dims), p.name());
                s.aging = *aging;
                s.weighting = cfg.weighting;
                run_scenario(&s)
            }
        };
        SweepEntry {
            cols: dims.cols,
            rows: dims.rows,
            policy: *policy,
            error: outcome.as_ref().err().map(ToString::to_string),
            result: outcome.ok(),
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.jobs > 0 {
        builder = builder.num_threads(cfg.jobs);
    }
    let pool = builder.build().map_err(|e| DseError::Pool(e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(eval).collect()))
}

/// Aligned plain-text table of sweep results.
pub fn format_table(entries: &[SweepEntry]) -> String {
    let mut s = format!(
        "{:<18} {:>10} {:>21} {:>21} {:>17} {:>8}\n",
        "Scenario", "Avg. Util", "Baseline Worst Util.", "Proposed Worst Util.", "Lifetime Improv.", "Skipped"
    );
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.1}%", v * 100.0));
    for e in entries {
        match (&e.result, &e.error) {
            (Some(r), _) => {
                let (base, prop) = match r.policy {
                    None => (r.baseline_max_util, r.proposed_max_util),
                    Some(AllocationPolicy::FixedOrigin) => (Some(r.max_util), None),
                    Some(AllocationPolicy::Rotating) => (None, Some(r.max_util)),
                };
                let _ = writeln!(
                    s,
                    "{:<18} {:>10} {:>21} {:>21} {:>17} {:>8}",
                    r.label,
                    pct(Some(r.avg_util)),
                    pct(base),
                    pct(prop),
                    r.lifetime_improvement
                        .map_or("-".to_string(), |x| format!("{x:.2}x")),
                    r.skipped_dfgs.len()
                );
            }
            (None, err) => {
                let _ = writeln!(
                    s,
                    "{:<18} error: {}",
                    format!("L{}-W{}", e.cols, e.rows),
                    err.as_deref().unwrap_or("unknown")
                );
            }
        }
    }
    s
}
