//! Dataflow-graph workloads and their execution traces.
//!
//! A [`Workload`] is a set of straight-line dataflow graphs plus a trace that
//! says which graph runs next and how many times in a row. Workloads are read
//! from and written to a versioned JSON format (`"format": 1`).

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Current version of the workload file format.
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opcode {
    Add,
    Sub,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    CmpLt,
    Load,
    Store,
}

impl Opcode {
    pub const ALL: [Opcode; 10] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Shl,
        Opcode::Shr,
        Opcode::CmpLt,
        Opcode::Load,
        Opcode::Store,
    ];

    pub const ALU: [Opcode; 8] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Shl,
        Opcode::Shr,
        Opcode::CmpLt,
    ];

    pub fn is_memory(self) -> bool {
        matches!(self, Opcode::Load | Opcode::Store)
    }

    /// Number of operands the opcode consumes.
    pub fn arity(self) -> usize {
        match self {
            Opcode::Load => 1,
            _ => 2,
        }
    }

    /// Whether the operation produces a value other operations can consume.
    pub fn produces_value(self) -> bool {
        self != Opcode::Store
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Xor => "xor",
            Opcode::Shl => "shl",
            Opcode::Shr => "shr",
            Opcode::CmpLt => "cmplt",
            Opcode::Load => "load",
            Opcode::Store => "store",
        }
    }

    /// Evaluates an ALU opcode on 32-bit two's-complement words.
    ///
    /// Returns `None` for memory opcodes, which need a memory model.
    pub fn eval_alu(self, a: u32, b: u32) -> Option<u32> {
        let v = match self {
            Opcode::Add => a.wrapping_add(b),
            Opcode::Sub => a.wrapping_sub(b),
            Opcode::And => a & b,
            Opcode::Or => a | b,
            Opcode::Xor => a ^ b,
            Opcode::Shl => a << (b & 31),
            Opcode::Shr => a >> (b & 31),
            Opcode::CmpLt => ((a as i32) < (b as i32)) as u32,
            Opcode::Load | Opcode::Store => return None,
        };
        Some(v)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Reference to a value: either an external DFG input or the result of an
/// operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum ValueRef {
    Input(usize),
    Op(usize),
}

impl fmt::Display for ValueRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueRef::Input(i) => write!(f, "in{i}"),
            ValueRef::Op(i) => write!(f, "op{i}"),
        }
    }
}

/// One operation of a dataflow graph.
///
/// Operands live in `srcs`: two for ALU ops, `[address]` for loads and
/// `[address, value]` for stores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub id: usize,
    pub opcode: Opcode,
    pub srcs: Vec<ValueRef>,
}

impl Operation {
    pub fn new(id: usize, opcode: Opcode, srcs: Vec<ValueRef>) -> Self {
        Self { id, opcode, srcs }
    }

    pub fn address_source(&self) -> Option<ValueRef> {
        if self.opcode.is_memory() {
            self.srcs.first().copied()
        } else {
            None
        }
    }

    pub fn store_value(&self) -> Option<ValueRef> {
        if self.opcode == Opcode::Store {
            self.srcs.get(1).copied()
        } else {
            None
        }
    }

    /// Ids of the operations whose results this operation consumes.
    pub fn producers(&self) -> impl Iterator<Item = usize> + '_ {
        self.srcs.iter().filter_map(|s| match s {
            ValueRef::Op(id) => Some(*id),
            ValueRef::Input(_) => None,
        })
    }
}

/// A straight-line dataflow graph. Operation ids are dense and equal to the
/// operation's position in `ops`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dfg {
    pub name: String,
    pub num_inputs: usize,
    pub ops: Vec<Operation>,
    pub outputs: Vec<ValueRef>,
}

impl Dfg {
    pub fn new(name: impl Into<String>, num_inputs: usize) -> Self {
        Self {
            name: name.into(),
            num_inputs,
            ops: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Appends an operation with the next free id and returns a reference to
    /// its result.
    pub fn push(&mut self, opcode: Opcode, srcs: Vec<ValueRef>) -> ValueRef {
        let id = self.ops.len();
        self.ops.push(Operation::new(id, opcode, srcs));
        ValueRef::Op(id)
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Consumers of each operation's result, indexed by producer id.
    /// Out-of-range producer ids are ignored.
    pub fn consumers(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.ops.len()];
        for op in &self.ops {
            for p in op.producers() {
                if let Some(list) = out.get_mut(p) {
                    if !list.contains(&op.id) {
                        list.push(op.id);
                    }
                }
            }
        }
        out
    }
}

/// One trace entry: run `dfgs[dfg_index]` `repeat` times back to back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry(pub usize, pub u64);

impl TraceEntry {
    pub fn dfg_index(&self) -> usize {
        self.0
    }

    pub fn repeat(&self) -> u64 {
        self.1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub dfgs: Vec<Dfg>,
    pub trace: Vec<TraceEntry>,
}

impl Workload {
    pub fn total_executions(&self) -> u64 {
        self.trace.iter().map(|e| e.1).sum()
    }

    /// Checks every workload invariant, returning the first problem found.
    pub fn validate(&self) -> Result<(), WorkloadError> {
        for (i, d) in self.dfgs.iter().enumerate() {
            if let Some(v) = validate_dfg(d).into_iter().next() {
                return Err(WorkloadError::InvalidDfg {
                    dfg: i,
                    name: d.name.clone(),
                    violation: v,
                });
            }
        }
        if self.trace.is_empty() {
            return Err(WorkloadError::EmptyTrace);
        }
        for (pos, e) in self.trace.iter().enumerate() {
            if e.0 >= self.dfgs.len() {
                return Err(WorkloadError::TraceIndex {
                    entry: pos,
                    index: e.0,
                    num_dfgs: self.dfgs.len(),
                });
            }
            if e.1 == 0 {
                return Err(WorkloadError::ZeroRepeat { entry: pos });
            }
        }
        Ok(())
    }
}

/// A broken DFG invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `ops[position].id` is not `position`.
    IdMismatch { position: usize, id: usize },
    /// Operation has the wrong number of operands for its opcode.
    Arity {
        op: usize,
        opcode: Opcode,
        expected: usize,
        found: usize,
    },
    /// Operand refers to an operation id that does not exist.
    DanglingOp { op: usize, target: usize },
    /// Operand refers to an input index `>= num_inputs`.
    DanglingInput { op: usize, index: usize },
    /// Operand consumes a store, which produces no value.
    ConsumesStore { op: usize, store: usize },
    /// DFG output refers to a missing value.
    DanglingOutput { output: usize, target: ValueRef },
    /// DFG output refers to a store.
    OutputIsStore { output: usize, store: usize },
    /// The dependency graph has a cycle through `op`.
    Cycle { op: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IdMismatch { position, id } => {
                write!(f, "op at position {position} has id {id}")
            }
            Violation::Arity {
                op,
                opcode,
                expected,
                found,
            } => write!(
                f,
                "arity: op {op} ({opcode}) expects {expected} sources, found {found}"
            ),
            Violation::DanglingOp { op, target } => {
                write!(f, "op {op} references nonexistent op {target}")
            }
            Violation::DanglingInput { op, index } => {
                write!(f, "op {op} references nonexistent input {index}")
            }
            Violation::ConsumesStore { op, store } => {
                write!(f, "op {op} consumes the result of store op {store}")
            }
            Violation::DanglingOutput { output, target } => {
                write!(f, "output {output} references nonexistent value {target}")
            }
            Violation::OutputIsStore { output, store } => {
                write!(f, "output {output} references store op {store}")
            }
            Violation::Cycle { op } => write!(f, "cycle at op {op}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported workload format {0} (expected {FORMAT_VERSION})")]
    UnsupportedFormat(u64),
    #[error("dfg {dfg} ({name}): {violation}")]
    InvalidDfg {
        dfg: usize,
        name: String,
        violation: Violation,
    },
    #[error("empty trace")]
    EmptyTrace,
    #[error("trace entry {entry} references dfg {index}, but only {num_dfgs} exist")]
    TraceIndex {
        entry: usize,
        index: usize,
        num_dfgs: usize,
    },
    #[error("trace entry {entry} has repeat count 0")]
    ZeroRepeat { entry: usize },
    #[error("cycle at op {op}")]
    Cycle { op: usize },
    #[error("infeasible generator parameters: {0}")]
    InfeasibleParams(String),
}

/// Lists every broken invariant of `d`; an empty list means the DFG is valid.
pub fn validate_dfg(d: &Dfg) -> Vec<Violation> {
    let n = d.ops.len();
    let mut out = Vec::new();
    for (pos, op) in d.ops.iter().enumerate() {
        if op.id != pos {
            out.push(Violation::IdMismatch { position: pos, id: op.id });
        }
    }
    if !out.is_empty() {
        // Ids are how every other check addresses ops.
        return out;
    }
    for op in &d.ops {
        let expected = op.opcode.arity();
        if op.srcs.len() != expected {
            out.push(Violation::Arity {
                op: op.id,
                opcode: op.opcode,
                expected,
                found: op.srcs.len(),
            });
        }
        for s in &op.srcs {
            match *s {
                ValueRef::Input(i) if i >= d.num_inputs => {
                    out.push(Violation::DanglingInput { op: op.id, index: i })
                }
                ValueRef::Op(t) if t >= n => out.push(Violation::DanglingOp {
                    op: op.id,
                    target: t,
                }),
                ValueRef::Op(t) if d.ops[t].opcode == Opcode::Store => {
                    out.push(Violation::ConsumesStore { op: op.id, store: t })
                }
                _ => {}
            }
        }
    }
    for (k, o) in d.outputs.iter().enumerate() {
        match *o {
            ValueRef::Input(i) if i >= d.num_inputs => out.push(Violation::DanglingOutput {
                output: k,
                target: *o,
            }),
            ValueRef::Op(t) if t >= n => out.push(Violation::DanglingOutput {
                output: k,
                target: *o,
            }),
            ValueRef::Op(t) if d.ops[t].opcode == Opcode::Store => {
                out.push(Violation::OutputIsStore { output: k, store: t })
            }
            _ => {}
        }
    }
    if let Err(WorkloadError::Cycle { op }) = topological_order(d) {
        out.push(Violation::Cycle { op });
    }
    out
}

/// Orders operation ids so that every producer precedes its consumers. Ties
/// go to the smallest id. References to missing ops are ignored.
pub fn topological_order(d: &Dfg) -> Result<Vec<usize>, WorkloadError> {
    let n = d.ops.len();
    let mut indegree = vec![0usize; n];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, op) in d.ops.iter().enumerate() {
        for p in op.producers().filter(|&p| p < n) {
            indegree[c] += 1;
            consumers[p].push(c);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &consumers[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every leftover op still waits on a leftover producer, so walking
    // producers from any leftover op must revisit a node on a cycle.
    let mut cur = (0..n).find(|&i| indegree[i] > 0).expect("leftover op");
    let mut seen = BTreeSet::new();
    while seen.insert(cur) {
        cur = d.ops[cur]
            .producers()
            .filter(|&p| p < n && indegree[p] > 0)
            .min()
            .expect("leftover op has a leftover producer");
    }
    let mut cycle_min = cur;
    let mut walk = d.ops[cur]
        .producers()
        .filter(|&p| p < n && indegree[p] > 0)
        .min()
        .expect("on cycle");
    while walk != cur {
        cycle_min = cycle_min.min(walk);
        walk = d.ops[walk]
            .producers()
            .filter(|&p| p < n && indegree[p] > 0)
            .min()
            .expect("on cycle");
    }
    Err(WorkloadError::Cycle { op: cycle_min })
}

#[derive(Serialize, Deserialize)]
struct WorkloadFile {
    format: u64,
    dfgs: Vec<Dfg>,
    trace: Vec<TraceEntry>,
}

/// Parses and validates a workload file.
pub fn parse_workload(text: &str) -> Result<Workload, WorkloadError> {
    let file: WorkloadFile = serde_json::from_str(text).map_err(|e| WorkloadError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.format != FORMAT_VERSION {
        return Err(WorkloadError::UnsupportedFormat(file.format));
    }
    let w = Workload {
        dfgs: file.dfgs,
        trace: file.trace,
    };
    w.validate()?;
    Ok(w)
}

/// Writes the canonical (pretty-printed) workload file.
pub fn serialize_workload(w: &Workload) -> String {
    let file = WorkloadFile {
        format: FORMAT_VERSION,
        dfgs: w.dfgs.clone(),
        trace: w.trace.clone(),
    };
    serde_json::to_string_pretty(&file).expect("workload serialization is infallible")
}

/// Parameters for [`generate_random_workload`].
///
/// The defaults are free choices: short regions of 4 to 16 operations with
/// one memory access in five, which keeps most regions inside a 16x2 fabric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub num_dfgs: usize,
    pub min_ops: usize,
    pub max_ops: usize,
    pub memory_op_fraction: f64,
    pub num_inputs: usize,
    pub trace_length: usize,
    pub max_repeat: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            num_dfgs: 10,
            min_ops: 4,
            max_ops: 16,
            memory_op_fraction: 0.2,
            num_inputs: 4,
            trace_length: 50,
            max_repeat: 8,
        }
    }
}

impl GeneratorParams {
    fn check(&self) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::InfeasibleParams(m.to_string()));
        if self.num_dfgs == 0 {
            return bad("num_dfgs must be at least 1");
        }
        if self.min_ops > self.max_ops {
            return bad("min_ops exceeds max_ops");
        }
        if !(0.0..=1.0).contains(&self.memory_op_fraction) {
            return bad("memory_op_fraction must lie in [0, 1]");
        }
        if self.num_inputs == 0 && self.max_ops > 0 {
            return bad("operations need at least one input to source from");
        }
        if self.trace_length == 0 {
            return bad("trace_length must be at least 1");
        }
        if self.max_repeat == 0 {
            return bad("max_repeat must be at least 1");
        }
        Ok(())
    }
}

/// Builds a random but valid workload; a pure function of `(params, seed)`.
pub fn generate_random_workload(
    params: &GeneratorParams,
    seed: u64,
) -> Result<Workload, WorkloadError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dfgs = (0..params.num_dfgs)
        .map(|i| random_dfg(&mut rng, params, format!("dfg{i}")))
        .collect();
    let trace = (0..params.trace_length)
        .map(|_| {
            TraceEntry(
                rng.gen_range(0..params.num_dfgs),
                rng.gen_range(1..=params.max_repeat),
            )
        })
        .collect();
    Ok(Workload { dfgs, trace })
}

fn random_dfg(rng: &mut ChaCha8Rng, params: &GeneratorParams, name: String) -> Dfg {
    let num_ops = rng.gen_range(params.min_ops..=params.max_ops);
    let mut d = Dfg::new(name, params.num_inputs);
    let mut values: Vec<usize> = Vec::new();
    let mut consumed = vec![false; num_ops];
    for _ in 0..num_ops {
        let opcode = if rng.gen_bool(params.memory_op_fraction) {
            if rng.gen_bool(0.5) {
                Opcode::Load
            } else {
                Opcode::Store
            }
        } else {
            Opcode::ALU[rng.gen_range(0..Opcode::ALU.len())]
        };
        let srcs: Vec<ValueRef> = (0..opcode.arity())
            .map(|_| {
                // Lean on earlier results so graphs have some depth.
                if !values.is_empty() && rng.gen_bool(0.5) {
                    let id = values[rng.gen_range(0..values.len())];
                    consumed[id] = true;
                    ValueRef::Op(id)
                } else {
                    ValueRef::Input(rng.gen_range(0..params.num_inputs))
                }
            })
            .collect();
        let r = d.push(opcode, srcs);
        if opcode.produces_value() {
            if let ValueRef::Op(id) = r {
                values.push(id);
            }
        }
    }
    d.outputs = values
        .iter()
        .filter(|&&id| !consumed[id])
        .map(|&id| ValueRef::Op(id))
        .collect();
    d
}
