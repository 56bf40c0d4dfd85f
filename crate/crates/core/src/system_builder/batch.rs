//! How many elements fit into one HBM channel, and how the batches spread
//! over compute units.

use serde::{Deserialize, Serialize};

use super::{BoardSpec, BuildError};
use crate::tensor_ir::{ScalarFormat, TensorGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub element_in_bytes: u64,
    pub element_out_bytes: u64,
    /// Elements per batch (E).
    pub elements: u64,
    pub n_eq: u64,
    /// Number of batches, N_b.
    pub batches: u64,
    pub n_cu: u64,
    /// Iterations per compute unit, I.
    pub iterations: u64,
    pub lanes: u64,
}

impl BatchPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Elements computed including padding of the last batch.
    pub fn padded_elements(&self) -> u64 {
        self.batches * self.elements
    }
}

/// Per-element input and output bytes: every input tensor travels with
/// every element.
pub fn element_bytes(graph: &TensorGraph, fmt: ScalarFormat) -> (u64, u64) {
    let b = fmt.bytes() as u64;
    let inputs = graph.inputs().map(|n| n.size() as u64).sum::<u64>() * b;
    let outputs = graph.outputs().map(|n| n.size() as u64).sum::<u64>() * b;
    (inputs, outputs)
}

pub fn plan_batch_bytes(
    capacity_bytes: u64,
    element_in_bytes: u64,
    element_out_bytes: u64,
    n_eq: u64,
    lanes: u64,
    n_cu: u64,
) -> Result<BatchPlan, BuildError> {
    if element_in_bytes == 0 || lanes == 0 || n_cu == 0 {
        return Err(BuildError::Inconsistent("element size, lanes and CU count must be positive".into()));
    }
    let fit = capacity_bytes / element_in_bytes;
    let elements = fit / lanes * lanes;
    if elements == 0 {
        return Err(BuildError::ElementTooLarge { element_bytes: element_in_bytes * lanes, capacity: capacity_bytes });
    }
    let batches = n_eq.div_ceil(elements);
    Ok(BatchPlan { element_in_bytes, element_out_bytes, elements, n_eq, batches, n_cu, iterations: batches.div_ceil(n_cu), lanes })
}

pub fn plan_batch(
    board: &BoardSpec,
    graph: &TensorGraph,
    fmt: ScalarFormat,
    n_eq: u64,
    lanes: u64,
    n_cu: u64,
) -> Result<BatchPlan, BuildError> {
    let (i, o) = element_bytes(graph, fmt);
    plan_batch_bytes(board.channel_capacity_bytes, i, o, n_eq, lanes, n_cu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_channel() {
        let p = plan_batch_bytes(1024, 100, 10, 100, 4, 1).unwrap();
        assert_eq!(p.elements, 8);
        assert_eq!(p.batches, 13);
        assert_eq!(p.iterations, 13);
        let p = plan_batch_bytes(1024, 100, 10, 100, 4, 2).unwrap();
        assert_eq!(p.iterations, 7);
    }

    #[test]
    fn too_large() {
        assert!(matches!(plan_batch_bytes(300, 100, 1, 10, 4, 1), Err(BuildError::ElementTooLarge { .. })));
    }
}
