//! Command-line front end.
//!
//! Exit codes: 0 success, 2 argument error, 3 I/O or input-file error,
//! 4 some DFG does not fit the fabric.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cgra_aging::aging::{self, AgingParams, UtilizationRate, HOURS_PER_YEAR};
use cgra_aging::allocation::AllocationPolicy;
use cgra_aging::dse::{self, Preset, Scenario, SweepConfig};
use cgra_aging::fabric::reconfig_plan;
use cgra_aging::mapper::{check_context_capacity, map_dfg, FabricDims};
use cgra_aging::metrics::{UtilizationSummary, Weighting};
use cgra_aging::workload::{self, GeneratorParams, Workload};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

pub const EXIT_ARGS: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NO_FIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cgra-aging", version, about = "Utilization-aware CGRA allocation and NBTI lifetime analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Fabric columns (L). `dse` accepts a comma-separated list.
    #[arg(short = 'L', global = true, value_delimiter = ',')]
    pub cols: Vec<usize>,
    /// Fabric rows (W). `dse` accepts a comma-separated list.
    #[arg(short = 'W', global = true, value_delimiter = ',')]
    pub rows: Vec<usize>,
    /// Configuration lines (n).
    #[arg(long = "lines", global = true)]
    pub config_lines: Option<usize>,
    /// Context lines (C); defaults to 2W.
    #[arg(long = "context", global = true)]
    pub context_lines: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = PolicyArg::Rotating)]
    pub policy: PolicyArg,
    /// Named design point: BE (16x2), BP (32x4), BU (32x8).
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_preset)]
    pub preset: Vec<Preset>,
    #[arg(short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads for `dse`.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Fixed,
    Rotating,
}

impl From<PolicyArg> for AllocationPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Fixed => AllocationPolicy::FixedOrigin,
            PolicyArg::Rotating => AllocationPolicy::Rotating,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Executions,
    Latency,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random workload file.
    Gen(GenArgs),
    /// Map every DFG of a workload and report placements.
    Map {
        workload: PathBuf,
        /// Print every placement as `(op, row, col_start, width)`.
        #[arg(long)]
        dump: bool,
    },
    /// Replay a workload under one allocation policy.
    Simulate {
        workload: PathBuf,
        /// Heatmap CSV output path.
        #[arg(long)]
        heatmap: Option<PathBuf>,
        /// Summary JSON output path (also written to -o if given).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Print the reconfiguration plan of the last execution's pivot.
        #[arg(long)]
        dump_plan: bool,
        #[arg(long, default_value_t = UtilizationSummary::DEFAULT_BINS)]
        bins: usize,
        #[arg(long, value_enum, default_value_t = WeightingArg::Executions)]
        weighting: WeightingArg,
    },
    /// Sweep fabric sizes and compare both policies.
    Dse {
        workload: PathBuf,
        /// Run only the policy given by --policy instead of the pair.
        #[arg(long)]
        single: bool,
        #[command(flatten)]
        aging: AgingArgs,
    },
    /// Lifetime and improvement from worst-case utilizations.
    Age {
        /// Worst-case (baseline) utilization.
        #[arg(long)]
        u: Option<f64>,
        /// Second (proposed) utilization; prints the improvement over --u.
        #[arg(long)]
        u2: Option<f64>,
        /// Take the utilization from a `simulate` summary JSON (its `max`).
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        aging: AgingArgs,
        /// Delay-curve CSV output path.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 10)]
    pub dfgs: usize,
    #[arg(long, default_value_t = 4)]
    pub min_ops: usize,
    #[arg(long, default_value_t = 16)]
    pub max_ops: usize,
    #[arg(long, default_value_t = 0.2)]
    pub mem_frac: f64,
    #[arg(long, default_value_t = 4)]
    pub inputs: usize,
    #[arg(long, default_value_t = 50)]
    pub trace_len: usize,
    #[arg(long, default_value_t = 8)]
    pub max_repeat: u64,
}

#[derive(Debug, Args)]
pub struct AgingArgs {
    /// Temperature in kelvin.
    #[arg(long)]
    pub temp: Option<f64>,
    #[arg(long)]
    pub vdd: Option<f64>,
    /// End-of-life delay increase (fraction).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Years to reach the threshold at full utilization.
    #[arg(long)]
    pub ref_lifetime: Option<f64>,
}

impl AgingArgs {
    fn params(&self) -> Result<AgingParams, CliError> {
        let d = AgingParams::default();
        let p = AgingParams {
            temperature: self.temp.unwrap_or(d.temperature),
            vdd: self.vdd.unwrap_or(d.vdd),
            delay_threshold: self.threshold.unwrap_or(d.delay_threshold),
            reference_lifetime: self.ref_lifetime.unwrap_or(d.reference_lifetime),
            reference_utilization: d.reference_utilization,
        };
        p.validate().map_err(CliError::args)?;
        Ok(p)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn args(e: impl ToString) -> Self {
        Self { code: EXIT_ARGS, message: e.to_string() }
    }

    fn io(e: impl ToString) -> Self {
        Self { code: EXIT_IO, message: e.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn read_workload(path: &Path) -> Result<Workload, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    workload::parse_workload(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(CliError::io)
}

impl GlobalOpts {
    fn with_lines(&self, dims: FabricDims) -> FabricDims {
        let dims = match self.config_lines {
            Some(n) => dims.with_lines(n),
            None => dims,
        };
        match self.context_lines {
            Some(c) => dims.with_context(c),
            None => dims,
        }
    }

    /// The one fabric for single-fabric commands; 16x2 when nothing is set.
    fn single_dims(&self) -> Result<FabricDims, CliError> {
        let dims = match (self.preset.as_slice(), self.cols.as_slice(), self.rows.as_slice()) {
            ([], [], []) => Preset::BE.dims(),
            ([p], [], []) => p.dims(),
            ([], [c], [r]) => FabricDims::new(*c, *r),
            ([_, ..], _, _) if !self.cols.is_empty() || !self.rows.is_empty() => {
                return Err(CliError::args("--preset and -L/-W are mutually exclusive"))
            }
            ([], _, _) => return Err(CliError::args("give exactly one -L and one -W value")),
            _ => return Err(CliError::args("give exactly one --preset")),
        };
        let dims = self.with_lines(dims);
        dims.validate().map_err(CliError::args)?;
        Ok(dims)
    }

    fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let (cols, rows) = match (self.preset.is_empty(), self.cols.is_empty(), self.rows.is_empty()) {
            (false, true, true) => {
                let mut cfgs: Vec<(usize, usize)> =
                    self.preset.iter().map(|p| (p.dims().cols, p.dims().rows)).collect();
                cfgs.sort_unstable();
                cfgs.dedup();
                if cfgs.len() > 1 {
                    return Err(CliError::args("give one --preset per dse run"));
                }
                (vec![cfgs[0].0], vec![cfgs[0].1])
            }
            (false, _, _) => return Err(CliError::args("--preset and -L/-W are mutually exclusive")),
            (true, false, false) => (self.cols.clone(), self.rows.clone()),
            (true, true, true) => (vec![16], vec![2]),
            _ => return Err(CliError::args("dse needs both -L and -W")),
        };
        if cols.contains(&0) || rows.contains(&0) {
            return Err(CliError::args("fabric dimensions must be at least 1"));
        }
        let mut cfg = SweepConfig::new(cols, rows);
        if let Some(n) = self.config_lines {
            cfg.config_lines = n;
        }
        cfg.context_lines = self.context_lines;
        cfg.jobs = self.jobs;
        Ok(cfg)
    }
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(a) => cmd_gen(g, a, out),
        Command::Map { workload, dump } => cmd_map(g, workload, *dump, out),
        Command::Simulate {
            workload,
            heatmap,
            summary,
            dump_plan,
            bins,
            weighting,
        } => cmd_simulate(g, workload, heatmap.as_deref(), summary.as_deref(), *dump_plan, *bins, *weighting, out),
        Command::Dse { workload, single, aging } => cmd_dse(g, workload, *single, aging, out),
        Command::Age {
            u,
            u2,
            summary,
            aging,
            curve,
            horizon,
            points,
        } => cmd_age(*u, *u2, summary.as_deref(), aging, curve.as_deref(), *horizon, *points, out),
    }
}

pub fn cmd_gen(g: &GlobalOpts, a: &GenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = GeneratorParams {
        num_dfgs: a.dfgs,
        min_ops: a.min_ops,
        max_ops: a.max_ops,
        memory_op_fraction: a.mem_frac,
        num_inputs: a.inputs,
        trace_length: a.trace_len,
        max_repeat: a.max_repeat,
    };
    let w = workload::generate_random_workload(&params, g.seed).map_err(CliError::args)?;
    let text = workload::serialize_workload(&w);
    match &g.output {
        Some(p) => write_file(p, &text),
        None => emit(out, &text),
    }
}

pub fn cmd_map(g: &GlobalOpts, path: &Path, dump: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let dims = g.single_dims()?;
    let w = read_workload(path)?;
    let mut text = String::new();
    let mut failed = Vec::new();
    for (i, d) in w.dfgs.iter().enumerate() {
        match map_dfg(d, &dims) {
            Ok(vc) => {
                if dump {
                    text.push_str(&vc.dump());
                }
                if let Err(v) = check_context_capacity(&vc, &dims) {
                    eprintln!(
                        "warning: dfg {i} ({}) needs {} context lines, fabric has {}",
                        d.name, v.pressure, v.capacity
                    );
                }
            }
            Err(e) => failed.push(format!("dfg {i} ({}): {e}", d.name)),
        }
    }
    text.push_str(&format!(
        "mapped {} of {} dfgs on L={} W={}\n",
        w.dfgs.len() - failed.len(),
        w.dfgs.len(),
        dims.cols,
        dims.rows
    ));
    emit(out, &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_NO_FIT,
            message: format!("dfgs that do not fit:\n  {}", failed.join("\n  ")),
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    g: &GlobalOpts,
    path: &Path,
    heatmap: Option<&Path>,
    summary_path: Option<&Path>,
    dump_plan: bool,
    bins: usize,
    weighting: WeightingArg,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let dims = g.single_dims()?;
    if bins == 0 {
        return Err(CliError::args("--bins must be at least 1"));
    }
    let w = read_workload(path)?;
    let mut s = Scenario::new(dims, g.policy.into(), &w);
    s.weighting = match weighting {
        WeightingArg::Executions => Weighting::PerExecution,
        WeightingArg::Latency => Weighting::Latency,
    };
    let run = dse::simulate(&s).map_err(|e| CliError { code: EXIT_NO_FIT, message: e.to_string() })?;
    let summary = run.utilization.summarize(bins).map_err(CliError::io)?;
    let r = &run.result;
    let doc = json!({
        "label": r.label,
        "policy": s.policy.name(),
        "executions": r.executions,
        "avg": summary.avg,
        "max": summary.max,
        "min": summary.min,
        "argmax": [summary.argmax.0, summary.argmax.1],
        "histogram": summary.histogram,
        "lifetime_years": r.lifetime_years,
        "skipped_dfgs": r.skipped_dfgs,
        "context_violations": r.context_violations,
    });
    let doc = serde_json::to_string_pretty(&doc).map_err(CliError::io)? + "\n";
    if let Some(p) = heatmap {
        write_file(p, &run.utilization.export_heatmap().map_err(CliError::io)?)?;
    }
    for p in [summary_path, g.output.as_deref()].into_iter().flatten() {
        write_file(p, &doc)?;
    }
    let mut text = format!(
        "{} policy={} executions={} avg={:.4} max={:.4} min={:.4} argmax=({},{}) lifetime={}\n",
        r.label,
        s.policy.name(),
        r.executions,
        summary.avg,
        summary.max,
        summary.min,
        summary.argmax.0,
        summary.argmax.1,
        r.lifetime_years.map_or("unbounded".into(), |y| format!("{y:.2} years")),
    );
    for sk in &r.skipped_dfgs {
        text.push_str(&format!("skipped dfg {} ({}): {}\n", sk.index, sk.name, sk.reason));
    }
    if dump_plan {
        text.push_str(&format!("plan for pivot ({}, {}):\n", run.last_pivot.row, run.last_pivot.col));
        text.push_str(&reconfig_plan(run.last_pivot, &dims).to_table());
    }
    emit(out, &text)
}

pub fn cmd_dse(
    g: &GlobalOpts,
    path: &Path,
    single: bool,
    aging: &AgingArgs,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = g.sweep_config()?;
    let params = aging.params()?;
    if single {
        cfg.policies = vec![g.policy.into()];
    }
    let w = read_workload(path)?;
    let entries = dse::sweep(&cfg, &w, &params).map_err(CliError::args)?;
    if let Some(p) = &g.output {
        let json = serde_json::to_string_pretty(&entries).map_err(CliError::io)? + "\n";
        write_file(p, &json)?;
    }
    emit(out, &dse::format_table(&entries))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_age(
    u: Option<f64>,
    u2: Option<f64>,
    summary: Option<&Path>,
    aging: &AgingArgs,
    curve: Option<&Path>,
    horizon: f64,
    points: usize,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let params = aging.params()?;
    let base = match (u, summary) {
        (Some(_), Some(_)) => return Err(CliError::args("--u and --summary are mutually exclusive")),
        (Some(x), None) => x,
        (None, Some(p)) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            v.get("max")
                .and_then(serde_json::Value::as_f64)
                .ok_or_else(|| CliError::io(format!("{}: no numeric `max` field", p.display())))?
        }
        (None, None) => return Err(CliError::args("give --u or --summary")),
    };
    let rate = |x: f64| UtilizationRate::new(x).map_err(CliError::args);
    let base_u = rate(base)?;
    let fmt_life = |r: UtilizationRate| match aging::lifetime(&params, r) {
        Ok(y) => format!("{y:.2} years"),
        Err(_) => "unbounded".to_string(),
    };
    let mut text = format!("u={base} lifetime {}\n", fmt_life(base_u));
    let dvt = aging::delta_vt_raw(&params, params.reference_lifetime * HOURS_PER_YEAR, base_u)
        .map_err(CliError::args)?;
    text.push_str(&format!(
        "delta_vt after {} years: {dvt:.6e} V\n",
        params.reference_lifetime
    ));
    if let Some(x2) = u2 {
        let prop = rate(x2)?;
        text.push_str(&format!("u2={x2} lifetime {}\n", fmt_life(prop)));
        match aging::lifetime_improvement(base_u, prop) {
            Ok(r) => text.push_str(&format!("improvement {r:.2}x\n")),
            Err(_) => text.push_str("improvement unbounded\n"),
        }
    }
    if let Some(p) = curve {
        let c = aging::delay_curve(&params, base_u, horizon, points).map_err(CliError::args)?;
        write_file(p, &aging::delay_curve_csv(&c))?;
    }
    emit(out, &text)
}
