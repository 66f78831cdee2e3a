//! Python bindings for the `cgra-aging` simulator.
//!
//! Structured results (scenario summaries, sweep entries, reconfiguration
//! plans) come back as plain dicts and lists.

use std::collections::BTreeMap;

use cgra_aging::aging::{self, AgingParams, UtilizationRate};
use cgra_aging::allocation::{self, AllocationPolicy, Pivot, PivotScheduler};
use cgra_aging::dse::{self, Scenario, SweepConfig};
use cgra_aging::fabric::{self, MemoryModel};
use cgra_aging::mapper::{self, FabricDims};
use cgra_aging::metrics::Weighting;
use cgra_aging::workload::{self, GeneratorParams};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_policy(s: &str) -> PyResult<AllocationPolicy> {
    s.parse().map_err(err)
}

fn parse_weighting(s: &str) -> PyResult<Weighting> {
    match s {
        "executions" => Ok(Weighting::PerExecution),
        "latency" => Ok(Weighting::Latency),
        _ => Err(PyValueError::new_err(format!("unknown weighting '{s}'"))),
    }
}

fn rate(u: f64) -> PyResult<UtilizationRate> {
    UtilizationRate::new(u).map_err(err)
}

#[pyclass(name = "Workload", module = "cgra_aging_py", from_py_object)]
#[derive(Clone)]
pub struct PyWorkload {
    pub inner: workload::Workload,
}

#[pymethods]
impl PyWorkload {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        workload::parse_workload(text).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, num_dfgs=10, min_ops=4, max_ops=16, memory_op_fraction=0.2, num_inputs=4, trace_length=50, max_repeat=8))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        seed: u64,
        num_dfgs: usize,
        min_ops: usize,
        max_ops: usize,
        memory_op_fraction: f64,
        num_inputs: usize,
        trace_length: usize,
        max_repeat: u64,
    ) -> PyResult<Self> {
        let params = GeneratorParams {
            num_dfgs,
            min_ops,
            max_ops,
            memory_op_fraction,
            num_inputs,
            trace_length,
            max_repeat,
        };
        workload::generate_random_workload(&params, seed)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn to_json(&self) -> String {
        workload::serialize_workload(&self.inner)
    }

    #[getter]
    fn num_dfgs(&self) -> usize {
        self.inner.dfgs.len()
    }

    #[getter]
    fn dfg_names(&self) -> Vec<String> {
        self.inner.dfgs.iter().map(|d| d.name.clone()).collect()
    }

    #[getter]
    fn trace(&self) -> Vec<(usize, u64)> {
        self.inner.trace.iter().map(|t| (t.0, t.1)).collect()
    }

    fn total_executions(&self) -> u64 {
        self.inner.total_executions()
    }

    fn __len__(&self) -> usize {
        self.inner.dfgs.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Workload(dfgs={}, trace={}, executions={})",
            self.inner.dfgs.len(),
            self.inner.trace.len(),
            self.inner.total_executions()
        )
    }
}

#[pyclass(name = "FabricDims", module = "cgra_aging_py", from_py_object)]
#[derive(Clone, Copy)]
pub struct PyFabricDims {
    pub inner: FabricDims,
}

#[pymethods]
impl PyFabricDims {
    #[new]
    #[pyo3(signature = (cols, rows, config_lines=None, context_lines=None))]
    fn new(cols: usize, rows: usize, config_lines: Option<usize>, context_lines: Option<usize>) -> PyResult<Self> {
        let mut d = FabricDims::new(cols, rows);
        if let Some(n) = config_lines {
            d = d.with_lines(n);
        }
        if let Some(c) = context_lines {
            d = d.with_context(c);
        }
        d.validate().map_err(err)?;
        Ok(Self { inner: d })
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let p: dse::Preset = name.parse().map_err(err)?;
        Ok(Self { inner: p.dims() })
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows
    }

    #[getter]
    fn config_lines(&self) -> usize {
        self.inner.config_lines
    }

    #[getter]
    fn context_lines(&self) -> usize {
        self.inner.context_lines
    }

    fn __repr__(&self) -> String {
        let d = self.inner;
        format!(
            "FabricDims(cols={}, rows={}, config_lines={}, context_lines={})",
            d.cols, d.rows, d.config_lines, d.context_lines
        )
    }
}

#[pyclass(name = "VirtualConfiguration", module = "cgra_aging_py", from_py_object)]
#[derive(Clone)]
pub struct PyVirtualConfiguration {
    pub inner: mapper::VirtualConfiguration,
}

#[pymethods]
impl PyVirtualConfiguration {
    /// `(op_id, row, col_start, width)` per operation.
    #[getter]
    fn placements(&self) -> Vec<(usize, usize, usize, usize)> {
        self.inner
            .placements
            .iter()
            .map(|p| (p.op_id, p.row, p.col_start, p.width))
            .collect()
    }

    #[getter]
    fn num_cols_used(&self) -> usize {
        self.inner.num_cols_used
    }

    #[getter]
    fn num_rows_used(&self) -> usize {
        self.inner.num_rows_used
    }

    fn occupied_cells(&self) -> Vec<(usize, usize)> {
        self.inner.occupied_cells()
    }

    fn latency_cycles(&self) -> f64 {
        self.inner.latency_cycles()
    }

    fn context_pressure(&self) -> usize {
        mapper::context_pressure(&self.inner)
    }

    fn dump(&self) -> String {
        self.inner.dump()
    }
}

#[pyclass(name = "PivotScheduler", module = "cgra_aging_py")]
pub struct PyPivotScheduler {
    inner: PivotScheduler,
}

#[pymethods]
impl PyPivotScheduler {
    #[new]
    fn new(dims: PyFabricDims) -> Self {
        Self { inner: PivotScheduler::new(dims.inner) }
    }

    /// Returns `(row, col)` and advances the counter.
    fn next_pivot(&mut self) -> (usize, usize) {
        let p = self.inner.next_pivot();
        (p.row, p.col)
    }

    #[getter]
    fn counter(&self) -> u64 {
        self.inner.counter()
    }
}

#[pyfunction]
fn map_dfg(workload: &PyWorkload, index: usize, dims: PyFabricDims) -> PyResult<PyVirtualConfiguration> {
    let dfg = workload
        .inner
        .dfgs
        .get(index)
        .ok_or_else(|| PyValueError::new_err(format!("no dfg at index {index}")))?;
    mapper::map_dfg(dfg, &dims.inner)
        .map(|inner| PyVirtualConfiguration { inner })
        .map_err(err)
}

/// Physical cells of each placement, in placement order.
#[pyfunction]
fn allocate(
    vc: &PyVirtualConfiguration,
    pivot: (usize, usize),
    dims: PyFabricDims,
) -> PyResult<Vec<Vec<(usize, usize)>>> {
    allocation::allocate(&vc.inner, Pivot::new(pivot.0, pivot.1), &dims.inner)
        .map(|a| a.cells)
        .map_err(err)
}

#[pyfunction]
fn reconfig_plan<'py>(py: Python<'py>, pivot: (usize, usize), dims: PyFabricDims) -> PyResult<Bound<'py, PyAny>> {
    let d = dims.inner;
    if pivot.0 >= d.rows || pivot.1 >= d.cols {
        return Err(PyValueError::new_err(format!("pivot {pivot:?} outside the fabric")));
    }
    to_py(py, &fabric::reconfig_plan(Pivot::new(pivot.0, pivot.1), &d))
}

/// Runs one configuration; returns `(outputs, memory)`.
#[pyfunction]
#[pyo3(signature = (vc, pivot, dims, inputs, memory=None))]
fn execute(
    vc: &PyVirtualConfiguration,
    pivot: (usize, usize),
    dims: PyFabricDims,
    inputs: Vec<u32>,
    memory: Option<BTreeMap<u32, u32>>,
) -> PyResult<(Vec<u32>, BTreeMap<u32, u32>)> {
    let mem: MemoryModel = memory.unwrap_or_default().into_iter().collect();
    let r = fabric::execute(&vc.inner, Pivot::new(pivot.0, pivot.1), &dims.inner, &inputs, mem)
        .map_err(err)?;
    Ok((r.outputs, r.memory.iter().collect()))
}

fn aging_params(temperature: f64, vdd: f64, threshold: f64, ref_lifetime: f64) -> PyResult<AgingParams> {
    let p = AgingParams {
        temperature,
        vdd,
        delay_threshold: threshold,
        reference_lifetime: ref_lifetime,
        ..AgingParams::default()
    };
    p.validate().map_err(err)?;
    Ok(p)
}

/// Years until the threshold is reached at utilization `u`.
#[pyfunction]
#[pyo3(signature = (u, temperature=350.0, vdd=1.0, threshold=0.10, ref_lifetime=3.0))]
fn lifetime(u: f64, temperature: f64, vdd: f64, threshold: f64, ref_lifetime: f64) -> PyResult<f64> {
    let p = aging_params(temperature, vdd, threshold, ref_lifetime)?;
    aging::lifetime(&p, rate(u)?).map_err(err)
}

#[pyfunction]
fn lifetime_improvement(baseline: f64, proposed: f64) -> PyResult<f64> {
    aging::lifetime_improvement(rate(baseline)?, rate(proposed)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (years, u, temperature=350.0, vdd=1.0, threshold=0.10, ref_lifetime=3.0))]
fn delay_increase(years: f64, u: f64, temperature: f64, vdd: f64, threshold: f64, ref_lifetime: f64) -> PyResult<f64> {
    let p = aging_params(temperature, vdd, threshold, ref_lifetime)?;
    aging::delay_increase(&p, years, rate(u)?).map_err(err)
}

/// Threshold-voltage shift in volts after `hours`.
#[pyfunction]
#[pyo3(signature = (hours, u, temperature=350.0, vdd=1.0))]
fn delta_vt(hours: f64, u: f64, temperature: f64, vdd: f64) -> PyResult<f64> {
    let p = aging_params(temperature, vdd, 0.10, 3.0)?;
    aging::delta_vt_raw(&p, hours, rate(u)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (u, horizon_years=10.0, num_points=50))]
fn delay_curve(u: f64, horizon_years: f64, num_points: usize) -> PyResult<Vec<(f64, f64)>> {
    aging::delay_curve(&AgingParams::default(), rate(u)?, horizon_years, num_points).map_err(err)
}

/// Replays the workload under one policy. The dict carries the summary plus
/// a `rates` grid indexed `[row][col]`.
#[pyfunction]
#[pyo3(signature = (workload, dims, policy="rotating", weighting="executions"))]
fn simulate<'py>(
    py: Python<'py>,
    workload: &PyWorkload,
    dims: PyFabricDims,
    policy: &str,
    weighting: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mut s = Scenario::new(dims.inner, parse_policy(policy)?, &workload.inner);
    s.weighting = parse_weighting(weighting)?;
    let run = py.detach(|| dse::simulate(&s)).map_err(err)?;
    let out = to_py(py, &run.result)?;
    let dict = out.cast::<PyDict>()?;
    dict.set_item("rates", run.utilization.utilization_rates().map_err(err)?)?;
    dict.set_item("last_pivot", (run.last_pivot.row, run.last_pivot.col))?;
    Ok(out)
}

/// Fixed-origin baseline against rotation on the same dims.
#[pyfunction]
#[pyo3(signature = (workload, dims, weighting="executions"))]
fn compare_policies<'py>(
    py: Python<'py>,
    workload: &PyWorkload,
    dims: PyFabricDims,
    weighting: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let w = parse_weighting(weighting)?;
    let r = py
        .detach(|| dse::compare_policies(&dims.inner, &workload.inner, &AgingParams::default(), w))
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (workload, cols, rows, policies=None, jobs=0))]
fn sweep<'py>(
    py: Python<'py>,
    workload: &PyWorkload,
    cols: Vec<usize>,
    rows: Vec<usize>,
    policies: Option<Vec<String>>,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = SweepConfig::new(cols, rows);
    if let Some(ps) = policies {
        cfg.policies = ps.iter().map(|p| parse_policy(p)).collect::<PyResult<_>>()?;
    }
    cfg.jobs = jobs;
    let entries = py
        .detach(|| dse::sweep(&cfg, &workload.inner, &AgingParams::default()))
        .map_err(err)?;
    to_py(py, &entries)
}

#[pymodule]
fn cgra_aging_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWorkload>()?;
    m.add_class::<PyFabricDims>()?;
    m.add_class::<PyVirtualConfiguration>()?;
    m.add_class::<PyPivotScheduler>()?;
    m.add_function(wrap_pyfunction!(map_dfg, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(reconfig_plan, m)?)?;
    m.add_function(wrap_pyfunction!(execute, m)?)?;
    m.add_function(wrap_pyfunction!(lifetime, m)?)?;
    m.add_function(wrap_pyfunction!(lifetime_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(delay_increase, m)?)?;
    m.add_function(wrap_pyfunction!(delta_vt, m)?)?;
    m.add_function(wrap_pyfunction!(delay_curve, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare_policies, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
