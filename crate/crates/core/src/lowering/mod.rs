//! Loop-nest lowering, dataflow execution, buffer liveness and C emission.

pub mod emit;
pub mod interp;
pub mod liveness;
pub mod nest;

pub use emit::emit_c;
pub use interp::{execute_kernel, min_safe_depth, ExecError, ExecOptions, ExecResult, ExecTrace, TraceEvent};
pub use liveness::{buffer_lifetimes, disjoint, liveness, BufferVertex, CompatibilityGraph};
pub use nest::{
    build_streams, lower, lower_group, tensor_name, Addr, Dest, ElemOp, Endpoint, LocalBuffer, Loop, LoopNest, LowerError, LoweredKernel,
    Nest, NestBody, Operand, Stmt, Stream,
};

use crate::tensor_ir::FlopCount;

/// Static arithmetic count of the lowered nests. Matches what the
/// interpreter instruments for a complete run.
pub fn count_flops(kernel: &LoweredKernel) -> FlopCount {
    let mut total = FlopCount::default();
    for nest in kernel.groups.iter().flat_map(|g| &g.nests) {
        let trips = nest.trip_count();
        total += match &nest.body {
            NestBody::Contract { operands, .. } => FlopCount::new(trips * (operands.len() as u64 - 1), trips),
            NestBody::Elementwise { op: ElemOp::Mul, .. } => FlopCount::new(trips, 0),
            NestBody::Elementwise { op: ElemOp::Add, .. } => FlopCount::new(0, trips),
            _ => FlopCount::default(),
        };
    }
    total
}
