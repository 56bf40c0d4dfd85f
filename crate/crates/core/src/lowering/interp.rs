//! Dataflow interpreter: groups, Read sources and Write sinks run as
//! processes connected by bounded FIFOs under deterministic round-robin.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use super::liveness::buffer_lifetimes;
use super::nest::{Dest, ElemOp, Endpoint, LoweredKernel, Nest, NestBody, Operand};
use crate::tensor_ir::eval::encode_inputs;
use crate::tensor_ir::format::with_arith;
use crate::tensor_ir::{ArithError, Arithmetic, EvalError, FlopCount, NodeId, Tensor, TensorMap};

/// Iterations a process may run per turn before yielding.
const QUANTUM: usize = 64;

#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    /// Per-stream FIFO depth; `None` uses the full tensor size.
    pub fifo_depths: Option<Vec<usize>>,
    /// Overwrite every buffer right after its last read.
    pub canary: bool,
    /// Offset every value written by this group (fault injection).
    pub perturb_group: Option<usize>,
    /// Keep a copy of every value pushed into every stream.
    pub record_streams: bool,
}

impl ExecOptions {
    pub fn uniform_depth(kernel: &LoweredKernel, depth: usize) -> Self {
        ExecOptions { fifo_depths: Some(vec![depth.max(1); kernel.streams.len()]), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub group: String,
    pub event: &'static str,
    pub step: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ExecTrace {
    pub events: Vec<TraceEvent>,
    /// Maximum occupancy reached by each stream.
    pub max_occupancy: Vec<usize>,
    pub flops: FlopCount,
    pub steps: u64,
    /// Decoded values per stream when recording was requested.
    pub stream_values: Vec<Vec<f64>>,
}

impl ExecTrace {
    /// One JSON object per line: `{"group":..,"event":..,"step":..}`.
    pub fn json_lines(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("serializable") + "\n").collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExecResult {
    pub outputs: TensorMap,
    pub trace: ExecTrace,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("deadlock: groups {cycle:?} wait on each other ({})", blocked.join("; "))]
    Deadlock { cycle: Vec<String>, blocked: Vec<String> },
    #[error("{cause} in group {group} at node %{node}")]
    Arith { group: String, node: NodeId, cause: ArithError },
    #[error(transparent)]
    Input(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Empty(usize),
    Full(usize),
}

struct GroupState<W> {
    nest: usize,
    idx: Vec<usize>,
    acc: W,
    started: bool,
    done: bool,
    buffers: Vec<Vec<W>>,
}

pub fn execute_kernel(kernel: &LoweredKernel, inputs: &TensorMap, opts: &ExecOptions) -> Result<ExecResult, ExecError> {
    with_arith!(kernel.format, |a| run(kernel, inputs, opts, &a))
}

fn run<A: Arithmetic>(kernel: &LoweredKernel, inputs: &TensorMap, opts: &ExecOptions, a: &A) -> Result<ExecResult, ExecError> {
    let encoded = encode_inputs(&kernel.schedule.graph, inputs, a)?;
    let depth: Vec<usize> = match &opts.fifo_depths {
        Some(d) => d.iter().map(|&x| x.max(1)).collect(),
        None => kernel.streams.iter().map(|s| s.elements.max(1)).collect(),
    };
    let mut fifos: Vec<VecDeque<A::Word>> = vec![VecDeque::new(); kernel.streams.len()];
    let mut trace = ExecTrace {
        max_occupancy: vec![0; kernel.streams.len()],
        stream_values: vec![Vec::new(); if opts.record_streams { kernel.streams.len() } else { 0 }],
        ..Default::default()
    };
    let mut sources: Vec<(usize, usize)> = kernel.streams.iter().filter(|s| s.src == Endpoint::Read).map(|s| (s.id, 0)).collect();
    let mut sinks: BTreeMap<usize, Vec<A::Word>> =
        kernel.streams.iter().filter(|s| s.dst == Endpoint::Write).map(|s| (s.id, Vec::new())).collect();
    let mut groups: Vec<GroupState<A::Word>> = kernel
        .groups
        .iter()
        .map(|g| GroupState {
            nest: 0,
            idx: vec![0; g.nests.first().map(|n| n.loops.len()).unwrap_or(0)],
            acc: a.zero(),
            started: false,
            done: g.nests.is_empty(),
            buffers: g.buffers.iter().map(|b| vec![a.zero(); b.elements]).collect(),
        })
        .collect();
    let lifetimes: Vec<Vec<(usize, usize)>> = kernel.groups.iter().map(buffer_lifetimes).collect();
    let canary = a.encode(-0.75).unwrap_or(a.zero());
    let perturbation = a.encode(1.0 / 256.0).unwrap_or(a.zero());
    let mut blocked: Vec<Option<Block>> = vec![None; groups.len()];

    loop {
        let mut progress = false;
        // Read module: one independent source per input stream.
        for (sid, pos) in sources.iter_mut() {
            let s = &kernel.streams[*sid];
            let data = &encoded[&s.tensor];
            let mut n = 0;
            while *pos < data.len() && fifos[*sid].len() < depth[*sid] && n < QUANTUM {
                push(&mut fifos, &mut trace, a, *sid, data[*pos], opts.record_streams);
                *pos += 1;
                n += 1;
                progress = true;
            }
        }
        for (gid, g) in groups.iter_mut().enumerate() {
            if g.done {
                continue;
            }
            let lowered = &kernel.groups[gid];
            let mut n = 0;
            blocked[gid] = None;
            while !g.done && n < QUANTUM {
                let nest = &lowered.nests[g.nest];
                if let Some(b) = wait_reason(nest, &g.idx, &fifos, &depth) {
                    blocked[gid] = Some(b);
                    break;
                }
                if !g.started {
                    g.started = true;
                    trace.events.push(TraceEvent { group: lowered.name.clone(), event: "start", step: trace.steps });
                }
                let perturb = (opts.perturb_group == Some(gid)).then_some(perturbation);
                step(nest, g, &mut fifos, &mut trace, a, perturb, opts.record_streams).map_err(|cause| ExecError::Arith {
                    group: lowered.name.clone(),
                    node: nest.node.unwrap_or(0),
                    cause,
                })?;
                trace.steps += 1;
                n += 1;
                progress = true;
                if !advance(&mut g.idx, &nest.extents()) {
                    if opts.canary {
                        for (b, &(_, end)) in lifetimes[gid].iter().enumerate() {
                            if end == g.nest + 1 {
                                g.buffers[b].iter_mut().for_each(|w| *w = canary);
                            }
                        }
                    }
                    g.nest += 1;
                    if g.nest == lowered.nests.len() {
                        g.done = true;
                        trace.events.push(TraceEvent { group: lowered.name.clone(), event: "finish", step: trace.steps });
                    } else {
                        g.idx = vec![0; lowered.nests[g.nest].loops.len()];
                    }
                }
            }
        }
        // Write module: drains every output stream.
        for (sid, out) in sinks.iter_mut() {
            while let Some(w) = fifos[*sid].pop_front() {
                out.push(w);
                progress = true;
            }
        }
        let sources_done = sources.iter().all(|(sid, pos)| *pos == encoded[&kernel.streams[*sid].tensor].len());
        if sources_done && groups.iter().all(|g| g.done) {
            break;
        }
        if !progress {
            return Err(deadlock(kernel, &blocked));
        }
    }

    let mut outputs = TensorMap::new();
    for (sid, words) in sinks {
        let s = &kernel.streams[sid];
        let shape = kernel.schedule.graph.node(s.tensor).shape.clone();
        let name = s.output.clone().expect("write stream names an output");
        outputs.insert(name, Tensor::new(shape, words.iter().map(|&w| a.decode(w)).collect()));
    }
    Ok(ExecResult { outputs, trace })
}

fn push<A: Arithmetic>(fifos: &mut [VecDeque<A::Word>], trace: &mut ExecTrace, a: &A, sid: usize, w: A::Word, record: bool) {
    fifos[sid].push_back(w);
    trace.max_occupancy[sid] = trace.max_occupancy[sid].max(fifos[sid].len());
    if record {
        trace.stream_values[sid].push(a.decode(w));
    }
}

fn at_reduction_end(nest: &Nest, idx: &[usize]) -> bool {
    let m = nest.loops.len() - nest.reduce;
    nest.loops[m..].iter().zip(&idx[m..]).all(|(l, &i)| i + 1 == l.extent)
}

fn at_reduction_start(nest: &Nest, idx: &[usize]) -> bool {
    idx[nest.loops.len() - nest.reduce..].iter().all(|&i| i == 0)
}

fn read_streams(nest: &Nest) -> Vec<usize> {
    let mut s = BTreeSet::new();
    let mut add = |o: &Operand| {
        if let Operand::Stream(id) = o {
            s.insert(*id);
        }
    };
    match &nest.body {
        NestBody::Fill { stream, .. } => {
            s.insert(*stream);
        }
        NestBody::Contract { operands, .. } => operands.iter().for_each(&mut add),
        NestBody::Elementwise { operands, .. } => operands.iter().for_each(&mut add),
        NestBody::Copy { src, .. } => add(src),
    }
    s.into_iter().collect()
}

fn dests(nest: &Nest) -> &[Dest] {
    match &nest.body {
        NestBody::Fill { .. } => &[],
        NestBody::Contract { dests, .. } | NestBody::Elementwise { dests, .. } | NestBody::Copy { dests, .. } => dests,
    }
}

fn wait_reason<W>(nest: &Nest, idx: &[usize], fifos: &[VecDeque<W>], depth: &[usize]) -> Option<Block> {
    for s in read_streams(nest) {
        if fifos[s].is_empty() {
            return Some(Block::Empty(s));
        }
    }
    let writes = !matches!(nest.body, NestBody::Contract { .. }) || at_reduction_end(nest, idx);
    if writes {
        for d in dests(nest) {
            if let Dest::Stream(s) = d {
                if fifos[*s].len() >= depth[*s] {
                    return Some(Block::Full(*s));
                }
            }
        }
    }
    None
}

fn step<A: Arithmetic>(
    nest: &Nest,
    g: &mut GroupState<A::Word>,
    fifos: &mut [VecDeque<A::Word>],
    trace: &mut ExecTrace,
    a: &A,
    perturb: Option<A::Word>,
    record: bool,
) -> Result<(), ArithError> {
    let popped: BTreeMap<usize, A::Word> =
        read_streams(nest).into_iter().map(|s| (s, fifos[s].pop_front().expect("checked non-empty"))).collect();
    let fetch = |o: &Operand, g: &GroupState<A::Word>| match o {
        Operand::Buffer { buffer, addr } => g.buffers[*buffer][addr.eval(&g.idx)],
        Operand::Stream(s) => popped[s],
    };
    let value = match &nest.body {
        NestBody::Fill { stream, buffer } => {
            let k = lex_offset(&nest.extents(), &g.idx);
            g.buffers[*buffer][k] = popped[stream];
            return Ok(());
        }
        NestBody::Contract { operands, .. } => {
            if at_reduction_start(nest, &g.idx) {
                g.acc = a.zero();
            }
            let mut term = fetch(&operands[0], g);
            for o in &operands[1..] {
                term = a.mul(term, fetch(o, g))?;
            }
            trace.flops += FlopCount::new(operands.len() as u64 - 1, 1);
            g.acc = a.add(g.acc, term)?;
            if !at_reduction_end(nest, &g.idx) {
                return Ok(());
            }
            g.acc
        }
        NestBody::Elementwise { op, operands, .. } => {
            let (x, y) = (fetch(&operands[0], g), fetch(&operands[1], g));
            match op {
                ElemOp::Mul => {
                    trace.flops += FlopCount::new(1, 0);
                    a.mul(x, y)?
                }
                ElemOp::Add => {
                    trace.flops += FlopCount::new(0, 1);
                    a.add(x, y)?
                }
            }
        }
        NestBody::Copy { src, .. } => fetch(src, g),
    };
    let value = match perturb {
        Some(p) => a.add(value, p)?,
        None => value,
    };
    for d in dests(nest) {
        match d {
            Dest::Buffer { buffer, addr } => {
                let k = addr.eval(&g.idx);
                g.buffers[*buffer][k] = value;
            }
            Dest::Stream(s) => push(fifos, trace, a, *s, value, record),
        }
    }
    Ok(())
}

fn lex_offset(extents: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(extents).fold(0, |acc, (&i, &e)| acc * e + i)
}

/// Increment a multi-index; `false` once the space is exhausted.
fn advance(idx: &mut [usize], extents: &[usize]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < extents[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

fn deadlock(kernel: &LoweredKernel, blocked: &[Option<Block>]) -> ExecError {
    let waits_on = |g: usize| -> Option<usize> {
        match blocked[g]? {
            Block::Empty(s) => match kernel.streams[s].src {
                Endpoint::Group(h) => Some(h),
                _ => None,
            },
            Block::Full(s) => match kernel.streams[s].dst {
                Endpoint::Group(h) => Some(h),
                _ => None,
            },
        }
    };
    let describe: Vec<String> = blocked
        .iter()
        .enumerate()
        .filter_map(|(g, b)| {
            let name = &kernel.groups[g].name;
            b.map(|b| match b {
                Block::Empty(s) => format!("{name} waits for data on {}", kernel.streams[s].name),
                Block::Full(s) => format!("{name} waits for space on {}", kernel.streams[s].name),
            })
        })
        .collect();
    let mut cycle = Vec::new();
    'search: for start in 0..blocked.len() {
        let mut path = vec![start];
        let mut cur = start;
        while let Some(next) = waits_on(cur) {
            if let Some(pos) = path.iter().position(|&x| x == next) {
                cycle = path[pos..].iter().map(|&g| kernel.groups[g].name.clone()).collect();
                break 'search;
            }
            path.push(next);
            cur = next;
        }
    }
    ExecError::Deadlock { cycle, blocked: describe }
}

/// Smallest uniform FIFO depth for which the kernel runs to completion.
pub fn min_safe_depth(kernel: &LoweredKernel, inputs: &TensorMap) -> Result<usize, ExecError> {
    let full = kernel.streams.iter().map(|s| s.elements).max().unwrap_or(1).max(1);
    let ok = |d: usize| match execute_kernel(kernel, inputs, &ExecOptions::uniform_depth(kernel, d)) {
        Ok(_) => Ok(true),
        Err(ExecError::Deadlock { .. }) => Ok(false),
        Err(e) => Err(e),
    };
    if !ok(full)? {
        return execute_kernel(kernel, inputs, &ExecOptions::uniform_depth(kernel, full)).map(|_| full);
    }
    let (mut lo, mut hi) = (1, full);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}
