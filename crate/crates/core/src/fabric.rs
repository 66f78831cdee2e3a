//! Datapath and reconfiguration-logic model.
//!
//! Columns listen to one of `n` configuration lines; in the baseline, column
//! `i` is hard-wired to line `i mod n`. Moving a configuration horizontally
//! needs a per-column line-select multiplexer, moving it vertically needs a
//! barrel shifter on each column's configuration bits, and wrapping around
//! the right edge needs the last column to feed back into the first.
//!
//! [`execute`] runs a configuration functionally by walking physical columns
//! from the pivot, so the same path is exercised for every allocation.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{allocate, AllocationError, PhysicalAllocation, Pivot};
use crate::mapper::{FabricDims, VirtualConfiguration};
use crate::workload::{Opcode, ValueRef};

/// Per-physical-column reconfiguration settings for one pivot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconfigPlan {
    pub pivot: Pivot,
    pub line_select: Vec<usize>,
    pub barrel_shift_rows: Vec<usize>,
    pub wrap_feedback: Vec<bool>,
    pub reconfig_cycles: usize,
}

impl ReconfigPlan {
    /// Logical column hosted by physical column `pc`.
    pub fn hosted_column(&self, pc: usize) -> usize {
        let cols = self.line_select.len();
        (pc + cols - self.pivot.col % cols) % cols
    }

    /// Plain-text table: `column line_select shift wrap`.
    pub fn to_table(&self) -> String {
        let mut s = String::from("column  line_select  shift  wrap\n");
        for pc in 0..self.line_select.len() {
            let _ = writeln!(
                s,
                "{:>6}  {:>11}  {:>5}  {:>4}",
                pc,
                self.line_select[pc],
                self.barrel_shift_rows[pc],
                if self.wrap_feedback[pc] { "yes" } else { "no" }
            );
        }
        let _ = writeln!(s, "reconfig_cycles={}", self.reconfig_cycles);
        s
    }
}

/// Reconfiguration settings that realize `pivot`.
pub fn reconfig_plan(pivot: Pivot, dims: &FabricDims) -> ReconfigPlan {
    let (cols, n) = (dims.cols, dims.config_lines);
    let hosted = |pc: usize| (pc + cols - pivot.col % cols) % cols;
    ReconfigPlan {
        pivot,
        line_select: (0..cols).map(|pc| hosted(pc) % n).collect(),
        barrel_shift_rows: vec![pivot.row; cols],
        wrap_feedback: (0..cols).map(|pc| pivot.col != 0 && hosted(pc) == 0).collect(),
        reconfig_cycles: cols.div_ceil(n),
    }
}

/// Sparse word-addressed memory; unwritten addresses read as zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryModel {
    words: BTreeMap<u32, u32>,
}

impl MemoryModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read(&self, addr: u32) -> u32 {
        self.words.get(&addr).copied().unwrap_or(0)
    }

    pub fn write(&mut self, addr: u32, value: u32) {
        self.words.insert(addr, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.words.iter().map(|(a, v)| (*a, *v))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl FromIterator<(u32, u32)> for MemoryModel {
    fn from_iter<I: IntoIterator<Item = (u32, u32)>>(iter: I) -> Self {
        Self {
            words: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub outputs: Vec<u32>,
    pub memory: MemoryModel,
    pub columns_used: usize,
    pub latency_cycles: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("expected {expected} inputs, got {found}")]
    InputCount { expected: usize, found: usize },
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

/// Runs `vc` allocated at `pivot` on input words `inputs` against `mem`.
///
/// Physical columns are visited starting at the pivot column and wrapping
/// through the feedback path. Loads read memory when they start; stores
/// commit when they complete, so a load sees a store iff the store finishes
/// at or before the load's first column.
pub fn execute(
    vc: &VirtualConfiguration,
    pivot: Pivot,
    dims: &FabricDims,
    inputs: &[u32],
    mem: MemoryModel,
) -> Result<ExecResult, ExecError> {
    let dfg = &vc.dfg;
    if inputs.len() != dfg.num_inputs {
        return Err(ExecError::InputCount {
            expected: dfg.num_inputs,
            found: inputs.len(),
        });
    }
    let alloc = allocate(vc, pivot, dims)?;
    let plan = reconfig_plan(pivot, dims);

    // Ops keyed by the physical cell where they start.
    let mut starts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (op, cells) in alloc.cells.iter().enumerate() {
        if let Some(&first) = cells.first() {
            starts.insert((first.1, first.0), op);
        }
    }

    let mut mem = mem;
    let mut results: Vec<Option<u32>> = vec![None; dfg.ops.len()];
    let mut pending: BTreeMap<usize, Vec<(u32, u32)>> = BTreeMap::new();
    let read = |r: &ValueRef, results: &[Option<u32>]| -> u32 {
        match *r {
            ValueRef::Input(i) => inputs[i],
            ValueRef::Op(p) => results[p].expect("producer finished before consumer"),
        }
    };

    for step in 0..vc.num_cols_used {
        let pc = (pivot.col + step) % dims.cols;
        debug_assert_eq!(plan.hosted_column(pc), step);
        for (addr, value) in pending.remove(&step).unwrap_or_default() {
            mem.write(addr, value);
        }
        // Rows in barrel-shifted order so logical row 0 goes first.
        for k in 0..dims.rows {
            let pr = (k + plan.barrel_shift_rows[pc]) % dims.rows;
            let Some(&id) = starts.get(&(pc, pr)) else {
                continue;
            };
            let op = &dfg.ops[id];
            let a = read(&op.srcs[0], &results);
            match op.opcode {
                Opcode::Load => results[id] = Some(mem.read(a)),
                Opcode::Store => {
                    let v = read(&op.srcs[1], &results);
                    pending
                        .entry(step + alloc.placements[id].width)
                        .or_default()
                        .push((a, v));
                }
                alu => {
                    let b = read(&op.srcs[1], &results);
                    results[id] = alu.eval_alu(a, b);
                }
            }
        }
    }
    for (addr, value) in pending.into_values().flatten() {
        mem.write(addr, value);
    }

    let outputs = dfg.outputs.iter().map(|o| read(o, &results)).collect();
    Ok(ExecResult {
        outputs,
        memory: mem,
        columns_used: vc.num_cols_used,
        latency_cycles: vc.latency_cycles(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LegalityViolation {
    /// The plan does not have one entry per physical column.
    PlanShape { expected: usize, found: usize },
    CellOutOfBounds { op: usize, cell: (usize, usize) },
    Overlap { cell: (usize, usize) },
    /// The physical column does not listen to the line carrying the logical
    /// column's configuration.
    LineSelect {
        op: usize,
        column: usize,
        expected: usize,
        found: usize,
    },
    /// The column's barrel shift does not land the op on its physical row.
    RowShift {
        op: usize,
        column: usize,
        expected_row: usize,
        shifted_row: usize,
    },
    /// A value crosses the right edge but no feedback path is enabled.
    MissingWrapFeedback,
    /// Feedback enabled on the wrong set of columns.
    WrapFeedbackMismatch { column: usize, expected: bool },
}

/// Checks that `plan` can actually realize `alloc`.
pub fn check_physical_legality(
    alloc: &PhysicalAllocation,
    plan: &ReconfigPlan,
    dims: &FabricDims,
) -> Vec<LegalityViolation> {
    let mut out = Vec::new();
    let cols = dims.cols;
    for v in [&plan.line_select, &plan.barrel_shift_rows] {
        if v.len() != cols {
            out.push(LegalityViolation::PlanShape {
                expected: cols,
                found: v.len(),
            });
        }
    }
    if plan.wrap_feedback.len() != cols {
        out.push(LegalityViolation::PlanShape {
            expected: cols,
            found: plan.wrap_feedback.len(),
        });
    }
    if !out.is_empty() {
        return out;
    }

    let mut seen = HashSet::new();
    for (op, (p, cells)) in alloc.placements.iter().zip(&alloc.cells).enumerate() {
        for (k, &(pr, pc)) in cells.iter().enumerate() {
            if pr >= dims.rows || pc >= cols {
                out.push(LegalityViolation::CellOutOfBounds { op, cell: (pr, pc) });
                continue;
            }
            if !seen.insert((pr, pc)) {
                out.push(LegalityViolation::Overlap { cell: (pr, pc) });
            }
            let lc = p.col_start + k;
            if plan.line_select[pc] != lc % dims.config_lines {
                out.push(LegalityViolation::LineSelect {
                    op,
                    column: pc,
                    expected: lc % dims.config_lines,
                    found: plan.line_select[pc],
                });
            }
            let shifted = (p.row + plan.barrel_shift_rows[pc]) % dims.rows;
            if shifted != pr {
                out.push(LegalityViolation::RowShift {
                    op,
                    column: pc,
                    expected_row: pr,
                    shifted_row: shifted,
                });
            }
        }
    }

    let start = alloc.pivot.col;
    for (pc, &flag) in plan.wrap_feedback.iter().enumerate() {
        let expected = start != 0 && pc == start;
        if flag != expected {
            out.push(LegalityViolation::WrapFeedbackMismatch {
                column: pc,
                expected,
            });
        }
    }
    if crosses_right_edge(alloc, dims) && !plan.wrap_feedback.iter().any(|&f| f) {
        out.push(LegalityViolation::MissingWrapFeedback);
    }
    out
}

/// Whether any value (DFG input, op result, or a multi-column op's own
/// propagation) has to travel past the last physical column.
pub fn crosses_right_edge(alloc: &PhysicalAllocation, dims: &FabricDims) -> bool {
    // Inputs enter at the pivot column, so any op whose logical span reaches
    // past `edge` has been fed around the wrap.
    let edge = dims.cols - alloc.pivot.col;
    alloc.placements.iter().any(|p| p.col_end() > edge)
}
