//! Greedy first-fit placement of a DFG onto logical fabric coordinates.
//!
//! The mapper visits operations in topological order and drops each one in
//! the first free slot at or after its earliest legal column, scanning rows
//! top to bottom. This is the placement style of traditional dynamic mappers
//! and is what concentrates activity in the top-left corner of the fabric.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workload::{topological_order, validate_dfg, Dfg, Opcode, ValueRef, WorkloadError};

/// Fabric geometry: `cols` columns (L), `rows` rows (W), configuration lines
/// (n) and context lines (C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FabricDims {
    pub cols: usize,
    pub rows: usize,
    pub config_lines: usize,
    pub context_lines: usize,
}

impl FabricDims {
    pub const DEFAULT_CONFIG_LINES: usize = 4;

    /// Dims with the default `n = 4` configuration lines and `C = 2W` context
    /// lines.
    pub fn new(cols: usize, rows: usize) -> Self {
        Self {
            cols,
            rows,
            config_lines: Self::DEFAULT_CONFIG_LINES,
            context_lines: 2 * rows,
        }
    }

    pub fn with_lines(mut self, config_lines: usize) -> Self {
        self.config_lines = config_lines;
        self
    }

    pub fn with_context(mut self, context_lines: usize) -> Self {
        self.context_lines = context_lines;
        self
    }

    pub fn num_cells(&self) -> usize {
        self.cols * self.rows
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if self.cols == 0 || self.rows == 0 || self.config_lines == 0 || self.context_lines == 0 {
            return Err(MapError::InvalidDims(*self));
        }
        Ok(())
    }
}

/// Columns occupied by an operation: ALU ops take half a cycle (one column),
/// loads and stores take two cycles (four columns).
pub fn op_width(opcode: Opcode) -> usize {
    if opcode.is_memory() {
        4
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub op_id: usize,
    pub row: usize,
    pub col_start: usize,
    pub width: usize,
}

impl Placement {
    /// First column after the op; where its result becomes available.
    pub fn col_end(&self) -> usize {
        self.col_start + self.width
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.col_start..self.col_end()).map(move |c| (self.row, c))
    }
}

/// A DFG placed on logical fabric coordinates, before physical allocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualConfiguration {
    pub dfg: Dfg,
    /// Indexed by op id.
    pub placements: Vec<Placement>,
    pub num_cols_used: usize,
    pub num_rows_used: usize,
}

impl VirtualConfiguration {
    /// Logical `(row, col)` cells covered by any placement.
    pub fn occupied_cells(&self) -> Vec<(usize, usize)> {
        self.placements.iter().flat_map(|p| p.cells()).collect()
    }

    pub fn num_occupied(&self) -> usize {
        self.placements.iter().map(|p| p.width).sum()
    }

    /// Half a processor cycle per column.
    pub fn latency_cycles(&self) -> f64 {
        self.num_cols_used as f64 * 0.5
    }

    /// Debug listing: a header line followed by one `(op, row, col_start,
    /// width)` tuple per line.
    pub fn dump(&self) -> String {
        let mut s = format!(
            "# dfg {} cols={} rows={}\n",
            self.dfg.name, self.num_cols_used, self.num_rows_used
        );
        for p in &self.placements {
            let _ = writeln!(s, "({}, {}, {}, {})", p.op_id, p.row, p.col_start, p.width);
        }
        s
    }
}

/// Parses the placement lines of [`VirtualConfiguration::dump`]; `#` lines are
/// skipped.
pub fn parse_placement_dump(text: &str) -> Result<Vec<Placement>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let inner = line
            .strip_prefix('(')
            .and_then(|l| l.strip_suffix(')'))
            .ok_or_else(|| format!("line {}: expected (op, row, col_start, width)", n + 1))?;
        let fields: Vec<usize> = inner
            .split(',')
            .map(|f| f.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", n + 1))?;
        let [op_id, row, col_start, width] = fields[..] else {
            return Err(format!("line {}: expected 4 fields", n + 1));
        };
        out.push(Placement {
            op_id,
            row,
            col_start,
            width,
        });
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("invalid fabric dims {0:?}")]
    InvalidDims(FabricDims),
    #[error("op {op} does not fit: no free slot at or after column {frontier}")]
    DoesNotFit { op: usize, frontier: usize },
    #[error("dfg is not mappable: {0}")]
    InvalidDfg(String),
}

impl From<WorkloadError> for MapError {
    fn from(e: WorkloadError) -> Self {
        MapError::InvalidDfg(e.to_string())
    }
}

/// Places `d` on a `dims` fabric with ASAP first-fit.
pub fn map_dfg(d: &Dfg, dims: &FabricDims) -> Result<VirtualConfiguration, MapError> {
    dims.validate()?;
    if let Some(v) = validate_dfg(d).into_iter().next() {
        return Err(MapError::InvalidDfg(v.to_string()));
    }
    let order = topological_order(d)?;
    let (cols, rows) = (dims.cols, dims.rows);
    let mut busy = vec![false; cols * rows];
    let mut load_at = vec![false; cols];
    let mut store_at = vec![false; cols];
    let mut placed: Vec<Option<Placement>> = vec![None; d.ops.len()];

    for id in order {
        let op = &d.ops[id];
        let width = op_width(op.opcode);
        let earliest = op
            .producers()
            .map(|p| placed[p].expect("producer placed first").col_end())
            .max()
            .unwrap_or(0);
        let port = match op.opcode {
            Opcode::Load => Some(&mut load_at),
            Opcode::Store => Some(&mut store_at),
            _ => None,
        };
        let mut slot = None;
        'scan: for col in earliest..cols {
            if col + width > cols {
                break;
            }
            if port.as_ref().is_some_and(|p| p[col]) {
                continue;
            }
            for row in 0..rows {
                if (col..col + width).all(|c| !busy[row * cols + c]) {
                    slot = Some((row, col));
                    break 'scan;
                }
            }
        }
        let (row, col) = slot.ok_or(MapError::DoesNotFit {
            op: id,
            frontier: earliest,
        })?;
        for c in col..col + width {
            busy[row * cols + c] = true;
        }
        if let Some(p) = port {
            p[col] = true;
        }
        placed[id] = Some(Placement {
            op_id: id,
            row,
            col_start: col,
            width,
        });
    }

    let placements: Vec<Placement> = placed.into_iter().map(|p| p.expect("all placed")).collect();
    let num_cols_used = placements.iter().map(Placement::col_end).max().unwrap_or(0);
    let num_rows_used = placements.iter().map(|p| p.row + 1).max().unwrap_or(0);
    Ok(VirtualConfiguration {
        dfg: d.clone(),
        placements,
        num_cols_used,
        num_rows_used,
    })
}

/// Largest number of values live across any column boundary.
///
/// At boundary `b` (the left edge of column `b`) a value is live if it is a
/// DFG input consumed by an op starting at or after `b`, or an op result
/// available by `b` that is consumed by an op starting at or after `b`.
pub fn context_pressure(vc: &VirtualConfiguration) -> usize {
    let d = &vc.dfg;
    // Last consumer start column per value.
    let mut input_last: Vec<Option<usize>> = vec![None; d.num_inputs];
    let mut result_last: Vec<Option<usize>> = vec![None; d.ops.len()];
    for op in &d.ops {
        let start = vc.placements[op.id].col_start;
        for s in &op.srcs {
            let slot = match *s {
                ValueRef::Input(i) => &mut input_last[i],
                ValueRef::Op(p) => &mut result_last[p],
            };
            *slot = Some(slot.map_or(start, |c: usize| c.max(start)));
        }
    }
    (0..vc.num_cols_used)
        .map(|b| {
            let inputs = input_last.iter().flatten().filter(|&&last| last >= b).count();
            let results = result_last
                .iter()
                .enumerate()
                .filter(|(p, last)| {
                    last.is_some_and(|l| l >= b) && vc.placements[*p].col_end() <= b
                })
                .count();
            inputs + results
        })
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextViolation {
    pub pressure: usize,
    pub capacity: usize,
}

/// Ok iff the configuration never needs more than `dims.context_lines` live
/// values at once.
pub fn check_context_capacity(
    vc: &VirtualConfiguration,
    dims: &FabricDims,
) -> Result<(), ContextViolation> {
    let pressure = context_pressure(vc);
    if pressure <= dims.context_lines {
        Ok(())
    } else {
        Err(ContextViolation {
            pressure,
            capacity: dims.context_lines,
        })
    }
}

/// Checks the structural invariants of a virtual configuration; returns a
/// description of each problem.
pub fn check_virtual_configuration(vc: &VirtualConfiguration, dims: &FabricDims) -> Vec<String> {
    let mut problems = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &vc.placements {
        if p.col_end() > dims.cols || p.row >= dims.rows {
            problems.push(format!("op {} placed outside the fabric", p.op_id));
        }
        for cell in p.cells() {
            if !seen.insert(cell) {
                problems.push(format!("op {} overlaps cell {:?}", p.op_id, cell));
            }
        }
    }
    for op in &vc.dfg.ops {
        let c = &vc.placements[op.id];
        for pr in op.producers() {
            if vc.placements[pr].col_end() > c.col_start {
                problems.push(format!("op {} starts before producer {} finishes", op.id, pr));
            }
        }
    }
    for kind in [Opcode::Load, Opcode::Store] {
        let mut starts = BTreeSet::new();
        for op in vc.dfg.ops.iter().filter(|o| o.opcode == kind) {
            if !starts.insert(vc.placements[op.id].col_start) {
                problems.push(format!("two {kind} ops start in column {}", vc.placements[op.id].col_start));
            }
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::Dfg;

    fn inp(i: usize) -> ValueRef {
        ValueRef::Input(i)
    }

    #[test]
    fn widths() {
        assert_eq!(op_width(Opcode::Add), 1);
        assert_eq!(op_width(Opcode::CmpLt), 1);
        assert_eq!(op_width(Opcode::Load), 4);
        assert_eq!(op_width(Opcode::Store), 4);
    }

    #[test]
    fn single_add_at_origin() {
        let mut d = Dfg::new("a", 2);
        d.push(Opcode::Add, vec![inp(0), inp(1)]);
        let vc = map_dfg(&d, &FabricDims::new(16, 2)).unwrap();
        assert_eq!(
            vc.placements[0],
            Placement { op_id: 0, row: 0, col_start: 0, width: 1 }
        );
        assert_eq!((vc.num_cols_used, vc.num_rows_used), (1, 1));
    }

    #[test]
    fn hand_traced_example() {
        let mut d = Dfg::new("abc", 2);
        let a = d.push(Opcode::Add, vec![inp(0), inp(1)]);
        d.push(Opcode::Add, vec![a, inp(0)]);
        d.push(Opcode::Load, vec![a]);
        let vc = map_dfg(&d, &FabricDims::new(16, 2)).unwrap();
        let got: Vec<_> = vc.placements.iter().map(|p| (p.row, p.col_start, p.width)).collect();
        assert_eq!(got, vec![(0, 0, 1), (0, 1, 1), (1, 1, 4)]);
        assert_eq!(vc.num_cols_used, 5);
    }

    #[test]
    fn capacity_bound() {
        let mut d = Dfg::new("wide", 1);
        for _ in 0..5 {
            d.push(Opcode::Add, vec![inp(0), inp(0)]);
        }
        let err = map_dfg(&d, &FabricDims::new(1, 2)).unwrap_err();
        assert_eq!(err, MapError::DoesNotFit { op: 2, frontier: 0 });
    }

    #[test]
    fn memory_op_needs_four_columns() {
        let mut d = Dfg::new("ld", 1);
        d.push(Opcode::Load, vec![inp(0)]);
        assert!(matches!(
            map_dfg(&d, &FabricDims::new(3, 2)),
            Err(MapError::DoesNotFit { op: 0, .. })
        ));
        assert!(map_dfg(&d, &FabricDims::new(4, 1)).is_ok());
    }

    #[test]
    fn memory_port_pushes_second_load_right() {
        let mut d = Dfg::new("ld2", 1);
        d.push(Opcode::Load, vec![inp(0)]);
        d.push(Opcode::Load, vec![inp(0)]);
        d.push(Opcode::Store, vec![inp(0), inp(0)]);
        let vc = map_dfg(&d, &FabricDims::new(16, 4)).unwrap();
        let got: Vec<_> = vc.placements.iter().map(|p| (p.row, p.col_start)).collect();
        // Second load cannot share column 0; the store can.
        assert_eq!(got, vec![(0, 0), (1, 1), (2, 0)]);
        assert!(check_virtual_configuration(&vc, &FabricDims::new(16, 4)).is_empty());
    }

    #[test]
    fn cyclic_dfg_rejected() {
        let mut d = Dfg::new("loop", 1);
        d.push(Opcode::Add, vec![ValueRef::Op(0), inp(0)]);
        assert!(matches!(
            map_dfg(&d, &FabricDims::new(4, 1)),
            Err(MapError::InvalidDfg(_))
        ));
    }

    #[test]
    fn zero_dims_rejected() {
        let d = Dfg::new("e", 0);
        assert!(matches!(
            map_dfg(&d, &FabricDims::new(0, 2)),
            Err(MapError::InvalidDims(_))
        ));
    }

    #[test]
    fn pressure_examples() {
        let mut d = Dfg::new("a", 2);
        d.push(Opcode::Add, vec![inp(0), inp(1)]);
        let vc = map_dfg(&d, &FabricDims::new(16, 2)).unwrap();
        assert_eq!(context_pressure(&vc), 2);

        let empty = map_dfg(&Dfg::new("e", 0), &FabricDims::new(16, 2)).unwrap();
        assert_eq!(context_pressure(&empty), 0);

        let mut d = Dfg::new("chain", 2);
        let mut prev = d.push(Opcode::Add, vec![inp(0), inp(1)]);
        for _ in 1..6 {
            prev = d.push(Opcode::Add, vec![prev, inp(0)]);
        }
        let vc = map_dfg(&d, &FabricDims::new(16, 2)).unwrap();
        assert_eq!(context_pressure(&vc), 2);
    }

    #[test]
    fn capacity_check() {
        let mut d = Dfg::new("fan", 5);
        // Five inputs all live at boundary 0.
        let a = d.push(Opcode::Add, vec![inp(0), inp(1)]);
        let b = d.push(Opcode::Add, vec![inp(2), inp(3)]);
        let c = d.push(Opcode::Add, vec![a, inp(4)]);
        d.push(Opcode::Add, vec![b, c]);
        let dims = FabricDims::new(8, 2).with_context(4);
        let vc = map_dfg(&d, &dims).unwrap();
        assert_eq!(context_pressure(&vc), 5);
        assert_eq!(
            check_context_capacity(&vc, &dims),
            Err(ContextViolation { pressure: 5, capacity: 4 })
        );
        assert!(check_context_capacity(&vc, &dims.with_context(5)).is_ok());
    }

    #[test]
    fn default_context_lines() {
        let d = FabricDims::new(16, 2);
        assert_eq!(d.config_lines, 4);
        assert_eq!(d.context_lines, 4);
    }

    #[test]
    fn dump_parses_back() {
        let mut d = Dfg::new("abc", 2);
        let a = d.push(Opcode::Add, vec![inp(0), inp(1)]);
        d.push(Opcode::Load, vec![a]);
        let vc = map_dfg(&d, &FabricDims::new(16, 2)).unwrap();
        let text = vc.dump();
        assert!(text.starts_with("# dfg abc"));
        assert_eq!(parse_placement_dump(&text).unwrap(), vc.placements);
        assert!(parse_placement_dump("(1, 2)").is_err());
    }
}
