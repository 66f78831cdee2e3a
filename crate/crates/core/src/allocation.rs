//! Binding virtual configurations to physical cells.
//!
//! Every execution of a configuration is placed relative to a pivot. The
//! fixed-origin policy always uses pivot `(0, 0)`; the rotating policy walks
//! the pivot over every cell of the fabric, one step per execution, and wraps
//! placements around the right and bottom edges.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapper::{FabricDims, Placement, VirtualConfiguration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Pivot {
    pub row: usize,
    pub col: usize,
}

impl Pivot {
    pub const ORIGIN: Pivot = Pivot { row: 0, col: 0 };

    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn in_bounds(&self, dims: &FabricDims) -> bool {
        self.row < dims.rows && self.col < dims.cols
    }
}

/// Order in which a scheduler visits pivots.
pub trait PivotPattern {
    /// Pivot for the `k`-th execution. Must enumerate every cell exactly once
    /// per `cols * rows` consecutive values of `k`.
    fn pivot_at(&self, k: u64, dims: &FabricDims) -> Pivot;
}

/// Column-fastest sweep: `col = k mod L`, `row = (k / L) mod W`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RasterPattern;

impl PivotPattern for RasterPattern {
    fn pivot_at(&self, k: u64, dims: &FabricDims) -> Pivot {
        let cols = dims.cols as u64;
        let rows = dims.rows as u64;
        Pivot {
            row: ((k / cols) % rows) as usize,
            col: (k % cols) as usize,
        }
    }
}

/// Hands out one pivot per execution. The counter is global to a run and is
/// never reset between configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotScheduler<P = RasterPattern> {
    dims: FabricDims,
    counter: u64,
    pattern: P,
}

impl PivotScheduler<RasterPattern> {
    pub fn new(dims: FabricDims) -> Self {
        Self::with_pattern(dims, RasterPattern)
    }
}

impl<P: PivotPattern> PivotScheduler<P> {
    pub fn with_pattern(dims: FabricDims, pattern: P) -> Self {
        Self {
            dims,
            counter: 0,
            pattern,
        }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn dims(&self) -> &FabricDims {
        &self.dims
    }

    pub fn next_pivot(&mut self) -> Pivot {
        let p = self.pattern.pivot_at(self.counter, &self.dims);
        self.counter += 1;
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationPolicy {
    FixedOrigin,
    Rotating,
}

impl AllocationPolicy {
    pub fn name(self) -> &'static str {
        match self {
            AllocationPolicy::FixedOrigin => "fixed",
            AllocationPolicy::Rotating => "rotating",
        }
    }
}

impl std::str::FromStr for AllocationPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" | "fixed_origin" => Ok(AllocationPolicy::FixedOrigin),
            "rotating" => Ok(AllocationPolicy::Rotating),
            other => Err(format!("unknown policy `{other}` (expected fixed|rotating)")),
        }
    }
}

/// Pivot for the next execution under `policy`. Only the rotating policy
/// advances the scheduler.
pub fn pivot_for_execution<P: PivotPattern>(
    policy: AllocationPolicy,
    scheduler: &mut PivotScheduler<P>,
) -> Pivot {
    match policy {
        AllocationPolicy::FixedOrigin => Pivot::ORIGIN,
        AllocationPolicy::Rotating => scheduler.next_pivot(),
    }
}

/// A virtual configuration translated onto the physical fabric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysicalAllocation {
    pub dims: FabricDims,
    pub pivot: Pivot,
    /// Logical placements, indexed by op id.
    pub placements: Vec<Placement>,
    /// Physical `(row, col)` cells of each placement, in logical column order.
    pub cells: Vec<Vec<(usize, usize)>>,
}

impl PhysicalAllocation {
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells.iter().flatten().copied()
    }

    /// Whether no two placements share a physical cell.
    pub fn is_injective(&self) -> bool {
        let mut seen = HashSet::new();
        self.occupied().all(|c| seen.insert(c))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllocationError {
    #[error("pivot {pivot:?} lies outside a {rows}x{cols} fabric")]
    PivotOutOfBounds { pivot: Pivot, rows: usize, cols: usize },
    #[error("op {op} at logical row {row}, columns {col_start}..{col_end} does not fit a {rows}x{cols} fabric")]
    PlacementOutOfBounds {
        op: usize,
        row: usize,
        col_start: usize,
        col_end: usize,
        rows: usize,
        cols: usize,
    },
}

/// Maps logical `(row, col)` to physical coordinates under `pivot`.
pub fn translate(row: usize, col: usize, pivot: Pivot, dims: &FabricDims) -> (usize, usize) {
    ((row + pivot.row) % dims.rows, (col + pivot.col) % dims.cols)
}

/// Translates every placement of `vc` by `pivot` with wrap-around.
pub fn allocate(
    vc: &VirtualConfiguration,
    pivot: Pivot,
    dims: &FabricDims,
) -> Result<PhysicalAllocation, AllocationError> {
    if !pivot.in_bounds(dims) {
        return Err(AllocationError::PivotOutOfBounds {
            pivot,
            rows: dims.rows,
            cols: dims.cols,
        });
    }
    let cells = vc
        .placements
        .iter()
        .map(|p| {
            if p.row >= dims.rows || p.col_end() > dims.cols {
                return Err(AllocationError::PlacementOutOfBounds {
                    op: p.op_id,
                    row: p.row,
                    col_start: p.col_start,
                    col_end: p.col_end(),
                    rows: dims.rows,
                    cols: dims.cols,
                });
            }
            Ok(p.cells().map(|(r, c)| translate(r, c, pivot, dims)).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PhysicalAllocation {
        dims: *dims,
        pivot,
        placements: vc.placements.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::map_dfg;
    use crate::workload::{Dfg, Opcode, ValueRef};

    #[test]
    fn schedule_origin_and_row_advance() {
        let mut s = PivotScheduler::new(FabricDims::new(16, 2));
        assert_eq!(s.next_pivot(), Pivot::ORIGIN);
        let p = RasterPattern.pivot_at(16, &FabricDims::new(16, 2));
        assert_eq!(p, Pivot::new(1, 0));
    }

    #[test]
    fn schedule_covers_grid() {
        let dims = FabricDims::new(16, 2);
        let mut s = PivotScheduler::new(dims);
        let seen: HashSet<_> = (0..32).map(|_| s.next_pivot()).collect();
        assert_eq!(seen.len(), 32);
        // Period is exactly L*W.
        assert_eq!(s.next_pivot(), Pivot::ORIGIN);
    }

    #[test]
    fn policy_dispatch() {
        let dims = FabricDims::new(4, 2);
        let mut s = PivotScheduler::new(dims);
        for _ in 0..5 {
            assert_eq!(pivot_for_execution(AllocationPolicy::FixedOrigin, &mut s), Pivot::ORIGIN);
        }
        assert_eq!(s.counter(), 0);
        let got: Vec<_> = (0..3)
            .map(|_| pivot_for_execution(AllocationPolicy::Rotating, &mut s))
            .collect();
        assert_eq!(got, vec![Pivot::new(0, 0), Pivot::new(0, 1), Pivot::new(0, 2)]);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("fixed".parse(), Ok(AllocationPolicy::FixedOrigin));
        assert_eq!("rotating".parse(), Ok(AllocationPolicy::Rotating));
        assert!("random".parse::<AllocationPolicy>().is_err());
    }

    #[test]
    fn origin_pivot_is_identity() {
        let mut d = Dfg::new("x", 2);
        let a = d.push(Opcode::Add, vec![ValueRef::Input(0), ValueRef::Input(1)]);
        d.push(Opcode::Load, vec![a]);
        let dims = FabricDims::new(8, 2);
        let vc = map_dfg(&d, &dims).unwrap();
        let alloc = allocate(&vc, Pivot::ORIGIN, &dims).unwrap();
        let logical: Vec<_> = vc.occupied_cells();
        let physical: Vec<_> = alloc.occupied().collect();
        assert_eq!(logical, physical);
    }

    #[test]
    fn modular_translation() {
        let dims = FabricDims::new(4, 2);
        assert_eq!(translate(1, 3, Pivot::new(1, 2), &dims), (0, 1));
    }

    #[test]
    fn load_wraps_right_edge() {
        let dims = FabricDims::new(16, 1);
        let vc = VirtualConfiguration {
            dfg: {
                let mut d = Dfg::new("ld", 1);
                d.push(Opcode::Load, vec![ValueRef::Input(0)]);
                d
            },
            placements: vec![Placement { op_id: 0, row: 0, col_start: 12, width: 4 }],
            num_cols_used: 16,
            num_rows_used: 1,
        };
        let alloc = allocate(&vc, Pivot::new(0, 2), &dims).unwrap();
        let cols: Vec<_> = alloc.cells[0].iter().map(|c| c.1).collect();
        assert_eq!(cols, vec![14, 15, 0, 1]);

        // A logical placement may not straddle the logical right edge.
        let mut bad = vc.clone();
        bad.placements[0].col_start = 14;
        assert!(matches!(
            allocate(&bad, Pivot::ORIGIN, &dims),
            Err(AllocationError::PlacementOutOfBounds { op: 0, .. })
        ));
    }

    #[test]
    fn pivot_out_of_bounds() {
        let dims = FabricDims::new(4, 2);
        let vc = map_dfg(&Dfg::new("e", 0), &dims).unwrap();
        assert!(matches!(
            allocate(&vc, Pivot::new(2, 0), &dims),
            Err(AllocationError::PivotOutOfBounds { .. })
        ));
    }
}
