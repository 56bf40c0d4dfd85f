//! Tensor value graph, scalar formats, and the reference interpreter.

pub mod eval;
pub mod flops;
pub mod format;
pub mod graph;
pub mod tensor;

pub use eval::{eval_nodes, eval_reference, eval_with, ContractPlan, EvalError, TensorMap};
pub use flops::{count_flops_helmholtz, FlopCount};
pub use format::{ArithError, Arithmetic, FixedArith, FloatArith, FormatError, ScalarFormat};
pub use graph::{from_ast, GraphError, Node, NodeId, Op, TensorGraph};
pub use tensor::{IndexIter, Tensor, TensorIoError};
