//! Per-cell utilization accounting, summaries and heatmap export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::PhysicalAllocation;
use crate::mapper::FabricDims;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("allocation is for a {got_rows}x{got_cols} fabric, map is {rows}x{cols}")]
    DimsMismatch {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("no executions recorded")]
    NoExecutions,
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("heatmap parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// How an execution is weighted when accumulating activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Each execution counts once.
    #[default]
    PerExecution,
    /// Each execution counts once per column of the configuration, i.e. by
    /// its latency in half-cycles.
    Latency,
}

/// Activity counters for every cell. With per-execution weighting,
/// `active_count[r][c]` is the number of executions that occupied the cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilizationMap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows * cols` entries.
    pub active_count: Vec<u64>,
    pub total_executions: u64,
}

impl UtilizationMap {
    pub fn new(dims: &FabricDims) -> Self {
        Self {
            rows: dims.rows,
            cols: dims.cols,
            active_count: vec![0; dims.num_cells()],
            total_executions: 0,
        }
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.active_count[row * self.cols + col]
    }

    /// Counts one execution of `alloc`.
    pub fn record_execution(&mut self, alloc: &PhysicalAllocation) -> Result<(), MetricsError> {
        self.record_weighted(alloc, 1)
    }

    /// Counts an execution with weight `w` (added to every occupied cell and
    /// to the total).
    pub fn record_weighted(&mut self, alloc: &PhysicalAllocation, w: u64) -> Result<(), MetricsError> {
        if alloc.dims.rows != self.rows || alloc.dims.cols != self.cols {
            return Err(MetricsError::DimsMismatch {
                rows: self.rows,
                cols: self.cols,
                got_rows: alloc.dims.rows,
                got_cols: alloc.dims.cols,
            });
        }
        for (r, c) in alloc.occupied() {
            self.active_count[r * self.cols + c] += w;
        }
        self.total_executions += w;
        Ok(())
    }

    pub fn total_active(&self) -> u64 {
        self.active_count.iter().sum()
    }

    /// `rate[r][c] = active_count[r][c] / total_executions`.
    pub fn utilization_rates(&self) -> Result<Vec<Vec<f64>>, MetricsError> {
        if self.total_executions == 0 {
            return Err(MetricsError::NoExecutions);
        }
        let total = self.total_executions as f64;
        Ok(self
            .active_count
            .chunks(self.cols)
            .map(|row| row.iter().map(|&c| c as f64 / total).collect())
            .collect())
    }

    pub fn summarize(&self, num_bins: usize) -> Result<UtilizationSummary, MetricsError> {
        let rates = self.utilization_rates()?;
        UtilizationSummary::from_rates(&rates, num_bins)
    }

    pub fn export_heatmap(&self) -> Result<String, MetricsError> {
        Ok(Heatmap {
            executions: self.total_executions,
            rates: self.utilization_rates()?,
        }
        .to_csv())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSummary {
    pub avg: f64,
    pub max: f64,
    pub min: f64,
    /// `(row, col)` of the first maximal cell in row-major order.
    pub argmax: (usize, usize),
    /// Counts of cells per uniform bin over `[0, 1]`; rate 1.0 falls in the
    /// last bin.
    pub histogram: Vec<u64>,
}

impl UtilizationSummary {
    pub const DEFAULT_BINS: usize = 20;

    pub fn from_rates(rates: &[Vec<f64>], num_bins: usize) -> Result<Self, MetricsError> {
        if num_bins == 0 {
            return Err(MetricsError::NoBins);
        }
        let cells: Vec<((usize, usize), f64)> = rates
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &v)| ((r, c), v)))
            .collect();
        if cells.is_empty() {
            return Err(MetricsError::NoExecutions);
        }
        let mut argmax = cells[0].0;
        let mut max = cells[0].1;
        let mut min = cells[0].1;
        let mut sum = 0.0;
        let mut histogram = vec![0u64; num_bins];
        for &(cell, v) in &cells {
            if v > max {
                max = v;
                argmax = cell;
            }
            min = min.min(v);
            sum += v;
            let bin = ((v * num_bins as f64) as usize).min(num_bins - 1);
            histogram[bin] += 1;
        }
        Ok(Self {
            avg: sum / cells.len() as f64,
            max,
            min,
            argmax,
            histogram,
        })
    }
}

/// Utilization rates as written to and read from heatmap CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub executions: u64,
    /// `rows` rows of `cols` rates, row 0 first.
    pub rates: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn rows(&self) -> usize {
        self.rates.len()
    }

    pub fn cols(&self) -> usize {
        self.rates.first().map_or(0, Vec::len)
    }

    /// Header `#rows=W,cols=L,executions=N`, then one line of six-decimal
    /// rates per row.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "#rows={},cols={},executions={}\n",
            self.rows(),
            self.cols(),
            self.executions
        );
        for row in &self.rates {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, MetricsError> {
        let err = |line: usize, message: String| MetricsError::Parse { line, message };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| err(1, "missing `#` header".into()))?;
        let mut rows = None;
        let mut cols = None;
        let mut executions = None;
        for field in body.split(',') {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| err(1, format!("bad header field `{field}`")))?;
            let v: u64 = v.trim().parse().map_err(|e| err(1, format!("{k}: {e}")))?;
            match k.trim() {
                "rows" => rows = Some(v as usize),
                "cols" => cols = Some(v as usize),
                "executions" => executions = Some(v),
                other => return Err(err(1, format!("unknown header field `{other}`"))),
            }
        }
        let (Some(rows), Some(cols), Some(executions)) = (rows, cols, executions) else {
            return Err(err(1, "header needs rows, cols and executions".into()));
        };
        let mut rates = Vec::with_capacity(rows);
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| err(n, e.to_string()))?;
            if row.len() != cols {
                return Err(err(n, format!("expected {cols} values, found {}", row.len())));
            }
            rates.push(row);
        }
        if rates.len() != rows {
            return Err(err(rows + 1, format!("expected {rows} rows, found {}", rates.len())));
        }
        Ok(Self { executions, rates })
    }
}
