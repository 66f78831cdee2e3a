#![allow(dead_code)]

use cgra_aging::fabric::MemoryModel;
use cgra_aging::mapper::VirtualConfiguration;
use cgra_aging::workload::{generate_random_workload, Dfg, GeneratorParams, Opcode, ValueRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random DFGs straight from the workload generator.
pub fn corpus(num_dfgs: usize, min_ops: usize, max_ops: usize, mem: f64, seed: u64) -> Vec<Dfg> {
    let p = GeneratorParams {
        num_dfgs,
        min_ops,
        max_ops,
        memory_op_fraction: mem,
        ..Default::default()
    };
    generate_random_workload(&p, seed).unwrap().dfgs
}

/// A random acyclic DFG whose ids are NOT in topological order: the DAG is
/// built in a hidden order and then relabelled by a random permutation.
pub fn shuffled_dag(n: usize, seed: u64) -> Dfg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut label: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        label.swap(i, rng.gen_range(0..=i));
    }
    // hidden position k gets id label[k]
    let mut ops: Vec<Option<cgra_aging::Operation>> = vec![None; n];
    for k in 0..n {
        let srcs = (0..2)
            .map(|_| {
                if k > 0 && rng.gen_bool(0.6) {
                    ValueRef::Op(label[rng.gen_range(0..k)])
                } else {
                    ValueRef::Input(rng.gen_range(0..3))
                }
            })
            .collect();
        ops[label[k]] = Some(cgra_aging::Operation::new(label[k], Opcode::Add, srcs));
    }
    Dfg {
        name: format!("dag{seed}"),
        num_inputs: 3,
        ops: ops.into_iter().map(Option::unwrap).collect(),
        outputs: Vec::new(),
    }
}

/// Reference interpreter over logical placements.
///
/// Orders events by logical column: a store commits at its completion column,
/// every other op fires at its start column, and at equal columns commits go
/// first. Results are read straight from the op table.
pub fn reference_execute(
    vc: &VirtualConfiguration,
    inputs: &[u32],
    mem: &MemoryModel,
) -> (Vec<u32>, Vec<(u32, u32)>) {
    let d = &vc.dfg;
    let mut events: Vec<(usize, u8, usize)> = d
        .ops
        .iter()
        .map(|op| {
            let p = &vc.placements[op.id];
            match op.opcode {
                Opcode::Store => (p.col_start + p.width, 0, op.id),
                _ => (p.col_start, 1, op.id),
            }
        })
        .collect();
    events.sort_unstable();
    let mut memory: std::collections::HashMap<u32, u32> = mem.iter().collect();
    let mut vals = vec![0u32; d.ops.len()];
    let get = |r: ValueRef, vals: &[u32]| match r {
        ValueRef::Input(i) => inputs[i],
        ValueRef::Op(p) => vals[p],
    };
    for (_, _, id) in events {
        let op = &d.ops[id];
        match op.opcode {
            Opcode::Load => {
                let a = get(op.srcs[0], &vals);
                vals[id] = memory.get(&a).copied().unwrap_or(0);
            }
            Opcode::Store => {
                let a = get(op.srcs[0], &vals);
                let v = get(op.srcs[1], &vals);
                memory.insert(a, v);
            }
            Opcode::Add => vals[id] = get(op.srcs[0], &vals).wrapping_add(get(op.srcs[1], &vals)),
            Opcode::Sub => vals[id] = get(op.srcs[0], &vals).wrapping_sub(get(op.srcs[1], &vals)),
            Opcode::And => vals[id] = get(op.srcs[0], &vals) & get(op.srcs[1], &vals),
            Opcode::Or => vals[id] = get(op.srcs[0], &vals) | get(op.srcs[1], &vals),
            Opcode::Xor => vals[id] = get(op.srcs[0], &vals) ^ get(op.srcs[1], &vals),
            Opcode::Shl => {
                vals[id] = get(op.srcs[0], &vals).wrapping_shl(get(op.srcs[1], &vals))
            }
            Opcode::Shr => {
                vals[id] = get(op.srcs[0], &vals).wrapping_shr(get(op.srcs[1], &vals))
            }
            Opcode::CmpLt => {
                let a = get(op.srcs[0], &vals) as i32;
                let b = get(op.srcs[1], &vals) as i32;
                vals[id] = u32::from(a < b);
            }
        }
    }
    let outs = d.outputs.iter().map(|&o| get(o, &vals)).collect();
    let mut m: Vec<(u32, u32)> = memory.into_iter().collect();
    m.sort_unstable();
    (outs, m)
}

/// Random inputs, with small addresses so loads and stores collide often.
pub fn random_inputs(n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    (0..n)
        .map(|_| if rng.gen_bool(0.5) { rng.gen_range(0..8) } else { rng.gen() })
        .collect()
}
