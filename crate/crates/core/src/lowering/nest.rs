//! Loop-nest form of operator groups.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::scheduler::{group_buffers, nest_nodes, BufferKind, GroupId, GroupSchedule};
use crate::tensor_ir::{ContractPlan, NodeId, Op, ScalarFormat};

/// Producer or consumer of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Endpoint {
    Read,
    Group(GroupId),
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stream {
    pub id: usize,
    pub name: String,
    pub tensor: NodeId,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub elements: usize,
    /// Graph output this stream delivers, for streams into the Write module.
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalBuffer {
    pub id: usize,
    pub name: String,
    pub tensor: NodeId,
    pub elements: usize,
    pub kind: BufferKind,
    pub format: ScalarFormat,
}

impl LocalBuffer {
    pub fn bits(&self) -> u64 {
        self.elements as u64 * self.format.width_bits() as u64
    }
}

/// `sum(stride * loop)` over the nest's loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Addr {
    pub strides: Vec<usize>,
}

impl Addr {
    pub fn eval(&self, idx: &[usize]) -> usize {
        self.strides.iter().zip(idx).map(|(s, i)| s * i).sum()
    }

    fn lex(shape: &[usize], depth: usize) -> Addr {
        let mut strides = crate::tensor_ir::tensor::strides(shape);
        strides.resize(depth, 0);
        Addr { strides }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Operand {
    Buffer { buffer: usize, addr: Addr },
    Stream(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Dest {
    Buffer { buffer: usize, addr: Addr },
    Stream(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ElemOp {
    Mul,
    Add,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum NestBody {
    /// Copy a stream into a local buffer in arrival order.
    Fill {
        stream: usize,
        buffer: usize,
    },
    /// Multiply-accumulate over the trailing `reduce` loops, starting from zero.
    Contract {
        operands: Vec<Operand>,
        dests: Vec<Dest>,
    },
    Elementwise {
        op: ElemOp,
        operands: [Operand; 2],
        dests: Vec<Dest>,
    },
    Copy {
        src: Operand,
        dests: Vec<Dest>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Loop {
    pub index: String,
    pub extent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Nest {
    /// Node computed by the nest; `None` for fill nests.
    pub node: Option<NodeId>,
    pub loops: Vec<Loop>,
    /// Number of trailing reduction loops.
    pub reduce: usize,
    /// Unroll factor of the innermost loop.
    pub unroll: usize,
    pub body: NestBody,
}

impl Nest {
    pub fn trip_count(&self) -> u64 {
        self.loops.iter().map(|l| l.extent as u64).product()
    }

    pub fn extents(&self) -> Vec<usize> {
        self.loops.iter().map(|l| l.extent).collect()
    }

    /// Statement listing in the classic form, for dumps.
    pub fn statements(&self) -> Vec<Stmt> {
        let q = Stmt::Quantize;
        match &self.body {
            NestBody::Fill { stream, buffer } => vec![Stmt::StreamRead { stream: *stream, buffer: *buffer }],
            NestBody::Contract { operands, dests } => {
                let mut s: Vec<Stmt> = operands.iter().filter_map(load).collect();
                s.push(Stmt::MacStore { operands: operands.len(), accumulate: true });
                s.push(q);
                s.extend(dests.iter().map(store));
                s
            }
            NestBody::Elementwise { operands, dests, .. } => {
                let mut s: Vec<Stmt> = operands.iter().filter_map(load).collect();
                s.push(Stmt::MacStore { operands: 2, accumulate: false });
                s.push(q);
                s.extend(dests.iter().map(store));
                s
            }
            NestBody::Copy { src, dests } => {
                let mut s: Vec<Stmt> = load(src).into_iter().collect();
                s.extend(dests.iter().map(store));
                s
            }
        }
    }

    pub fn reads_buffer(&self, b: usize) -> bool {
        let hit = |o: &Operand| matches!(o, Operand::Buffer { buffer, .. } if *buffer == b);
        match &self.body {
            NestBody::Fill { .. } => false,
            NestBody::Contract { operands, .. } => operands.iter().any(hit),
            NestBody::Elementwise { operands, .. } => operands.iter().any(hit),
            NestBody::Copy { src, .. } => hit(src),
        }
    }

    pub fn writes_buffer(&self, b: usize) -> bool {
        let hit = |d: &Dest| matches!(d, Dest::Buffer { buffer, .. } if *buffer == b);
        match &self.body {
            NestBody::Fill { buffer, .. } => *buffer == b,
            NestBody::Contract { dests, .. } | NestBody::Elementwise { dests, .. } | NestBody::Copy { dests, .. } => dests.iter().any(hit),
        }
    }
}

fn load(o: &Operand) -> Option<Stmt> {
    match o {
        Operand::Buffer { buffer, .. } => Some(Stmt::Load { buffer: *buffer }),
        Operand::Stream(s) => Some(Stmt::StreamPop { stream: *s }),
    }
}

fn store(d: &Dest) -> Stmt {
    match d {
        Dest::Buffer { buffer, .. } => Stmt::Store { buffer: *buffer },
        Dest::Stream(s) => Stmt::StreamWrite { stream: *s },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stmt {
    StreamRead { stream: usize, buffer: usize },
    StreamPop { stream: usize },
    StreamWrite { stream: usize },
    Load { buffer: usize },
    Store { buffer: usize },
    MacStore { operands: usize, accumulate: bool },
    Quantize,
}

/// The loop nests of one operator group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopNest {
    pub group: GroupId,
    pub name: String,
    pub nests: Vec<Nest>,
    pub buffers: Vec<LocalBuffer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowerError {
    #[error("node %{0} cannot be lowered to an affine nest")]
    NonAffine(NodeId),
}

/// A fully lowered kernel: schedule, stream table and one `LoopNest` per group.
#[derive(Debug, Clone)]
pub struct LoweredKernel {
    pub name: String,
    pub format: ScalarFormat,
    pub schedule: GroupSchedule,
    pub streams: Vec<Stream>,
    pub groups: Vec<LoopNest>,
}

impl LoweredKernel {
    pub fn stream_into(&self, tensor: NodeId, dst: Endpoint) -> Option<usize> {
        self.streams.iter().find(|s| s.tensor == tensor && s.dst == dst).map(|s| s.id)
    }

    pub fn group_streams_out(&self, g: GroupId) -> Vec<&Stream> {
        self.streams.iter().filter(|s| s.src == Endpoint::Group(g)).collect()
    }
}

fn ident(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// Name of a tensor as a C identifier.
pub fn tensor_name(schedule: &GroupSchedule, t: NodeId) -> String {
    let n = schedule.graph.node(t);
    match (&n.op, &n.label) {
        (Op::Input(name), _) => ident(name),
        (_, Some(l)) => ident(l),
        _ => format!("n{t}"),
    }
}

/// Stream table: one stream per (input, consuming group), per inter-group
/// edge, and per graph output.
pub fn build_streams(schedule: &GroupSchedule) -> Vec<Stream> {
    let g = &schedule.graph;
    let mut streams = Vec::new();
    let push = |streams: &mut Vec<Stream>, name: String, tensor, src, dst, output| {
        let id = streams.len();
        streams.push(Stream { id, name, tensor, src, dst, elements: g.node(tensor).size(), output });
    };
    for &gid in &schedule.stage_order {
        for t in schedule.input_reads(gid) {
            let name = format!("s_{}_{}", tensor_name(schedule, t), schedule.groups[gid].name);
            push(&mut streams, name, t, Endpoint::Read, Endpoint::Group(gid), None);
        }
    }
    for e in &schedule.stream_edges {
        let fan_out = schedule.stream_edges.iter().filter(|o| o.tensor == e.tensor).count();
        let base = format!("s_{}", tensor_name(schedule, e.tensor));
        let name = if fan_out > 1 { format!("{base}_{}", schedule.groups[e.consumer].name) } else { base };
        push(&mut streams, name, e.tensor, Endpoint::Group(e.producer), Endpoint::Group(e.consumer), None);
    }
    for o in g.outputs() {
        let src = o.op.operands()[0];
        let gid = schedule.group_of(o.id).or_else(|| schedule.group_of(src)).expect("output owned by a group");
        let Op::Output(name, _) = &o.op else { unreachable!() };
        push(&mut streams, format!("s_out_{}", ident(name)), src, Endpoint::Group(gid), Endpoint::Write, Some(name.clone()));
    }
    streams
}

pub fn lower(schedule: &GroupSchedule, name: &str, format: ScalarFormat) -> Result<LoweredKernel, LowerError> {
    let streams = build_streams(schedule);
    let groups = (0..schedule.groups.len()).map(|g| lower_group(schedule, &streams, g, format)).collect::<Result<_, _>>()?;
    Ok(LoweredKernel { name: name.to_string(), format, schedule: schedule.clone(), streams, groups })
}

pub fn lower_group(schedule: &GroupSchedule, streams: &[Stream], gid: GroupId, format: ScalarFormat) -> Result<LoopNest, LowerError> {
    let graph = &schedule.graph;
    let group = &schedule.groups[gid];
    let virtuals = graph.virtual_products();
    let input_stream =
        |t: NodeId| streams.iter().find(|s| s.tensor == t && s.dst == Endpoint::Group(gid)).map(|s| s.id).expect("stream into group");

    let mut buffers = Vec::new();
    let mut buf_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    for req in group_buffers(graph, &group.members) {
        let id = buffers.len();
        buf_of.insert(req.tensor, id);
        buffers.push(LocalBuffer {
            id,
            name: format!("{}_buf", tensor_name(schedule, req.tensor)),
            tensor: req.tensor,
            elements: req.elements,
            kind: req.kind,
            format,
        });
    }

    let mut nests = Vec::new();
    let mut filled = vec![false; buffers.len()];
    for node in nest_nodes(graph, &group.members) {
        let n = graph.node(node);
        let reads = crate::scheduler::nest_reads(graph, node, &virtuals);
        for &t in &reads {
            if let Some(&b) = buf_of.get(&t) {
                if buffers[b].kind != BufferKind::Internal && !filled[b] {
                    filled[b] = true;
                    nests.push(fill_nest(&buffers[b], graph.node(t).shape.clone(), input_stream(t)));
                }
            }
        }
        let depth_of = |shape: &[usize]| shape.len();
        let operand = |t: NodeId, addr: Addr| match buf_of.get(&t) {
            Some(&b) => Operand::Buffer { buffer: b, addr },
            None => Operand::Stream(input_stream(t)),
        };
        let result_depth = depth_of(&n.shape);
        let mut dests = Vec::new();
        let produced = match &n.op {
            Op::Output(_, a) => *a,
            _ => node,
        };
        if let Some(&b) = buf_of.get(&produced) {
            if buffers[b].kind == BufferKind::Internal {
                dests.push(Dest::Buffer { buffer: b, addr: Addr::lex(&n.shape, result_depth) });
            }
        }
        for s in streams.iter().filter(|s| s.src == Endpoint::Group(gid) && s.tensor == produced) {
            dests.push(Dest::Stream(s.id));
        }
        let index = |k: usize| format!("i{k}");
        let result_loops: Vec<Loop> = n.shape.iter().enumerate().map(|(k, &e)| Loop { index: index(k), extent: e }).collect();
        let nest = match &n.op {
            Op::Contract(a, pairs) => {
                let plan = ContractPlan::new(graph, *a, pairs);
                let mut loops = result_loops;
                loops.extend(plan.reduce_shape.iter().enumerate().map(|(k, &e)| Loop { index: format!("k{k}"), extent: e }));
                let operands = plan
                    .factors
                    .iter()
                    .enumerate()
                    .map(|(f, &t)| {
                        let strides = [plan.result_strides[f].clone(), plan.reduce_strides[f].clone()].concat();
                        operand(t, Addr { strides })
                    })
                    .collect::<Vec<_>>();
                if operands.iter().any(|o| matches!(o, Operand::Stream(_))) {
                    return Err(LowerError::NonAffine(node));
                }
                Nest {
                    node: Some(node),
                    unroll: plan.reduce_shape.last().copied().unwrap_or(1),
                    reduce: pairs.len(),
                    loops,
                    body: NestBody::Contract { operands, dests },
                }
            }
            Op::ElemMul(x, y) | Op::ElemAdd(x, y) => {
                let op = if matches!(n.op, Op::ElemMul(..)) { ElemOp::Mul } else { ElemOp::Add };
                let addr = Addr::lex(&n.shape, result_depth);
                Nest {
                    node: Some(node),
                    loops: result_loops,
                    reduce: 0,
                    unroll: 1,
                    body: NestBody::Elementwise { op, operands: [operand(*x, addr.clone()), operand(*y, addr)], dests },
                }
            }
            Op::Product(x, y) => {
                let (rx, ry) = (graph.node(*x).shape.len(), graph.node(*y).shape.len());
                let mut sx = crate::tensor_ir::tensor::strides(&graph.node(*x).shape);
                sx.resize(rx + ry, 0);
                let sy = [vec![0; rx], crate::tensor_ir::tensor::strides(&graph.node(*y).shape)].concat();
                Nest {
                    node: Some(node),
                    loops: result_loops,
                    reduce: 0,
                    unroll: 1,
                    body: NestBody::Elementwise {
                        op: ElemOp::Mul,
                        operands: [operand(*x, Addr { strides: sx }), operand(*y, Addr { strides: sy })],
                        dests,
                    },
                }
            }
            Op::Output(_, a) => Nest {
                node: Some(node),
                loops: vec![Loop { index: index(0), extent: n.size() }],
                reduce: 0,
                unroll: 1,
                body: NestBody::Copy { src: operand(*a, Addr { strides: vec![1] }), dests },
            },
            Op::Input(_) => return Err(LowerError::NonAffine(node)),
        };
        nests.push(nest);
    }
    Ok(LoopNest { group: gid, name: group.name.clone(), nests, buffers })
}

fn fill_nest(buffer: &LocalBuffer, shape: Vec<usize>, stream: usize) -> Nest {
    Nest {
        node: None,
        loops: shape.iter().enumerate().map(|(k, &e)| Loop { index: format!("i{k}"), extent: e }).collect(),
        reduce: 0,
        unroll: 1,
        body: NestBody::Fill { stream, buffer: buffer.id },
    }
}
