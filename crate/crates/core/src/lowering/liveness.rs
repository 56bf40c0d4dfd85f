//! Buffer lifetimes and the sharing-compatibility graph.

use serde::{Deserialize, Serialize};

use super::nest::LoopNest;

/// Half-open `[first write, last read + 1)` per buffer, in nest steps.
pub fn buffer_lifetimes(group: &LoopNest) -> Vec<(usize, usize)> {
    group
        .buffers
        .iter()
        .map(|b| {
            let first_write = group.nests.iter().position(|n| n.writes_buffer(b.id)).unwrap_or(0);
            let last_read = group.nests.iter().rposition(|n| n.reads_buffer(b.id)).unwrap_or(first_write);
            (first_write, last_read.max(first_write) + 1)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferVertex {
    pub name: String,
    pub group: String,
    pub bits: u64,
    pub lifetime: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatibilityGraph {
    pub buffers: Vec<BufferVertex>,
    /// Index pairs `(a, b)` with `a < b` whose lifetimes are disjoint.
    pub edges: Vec<(usize, usize)>,
}

impl CompatibilityGraph {
    /// Build from lifetimes alone; vertices in different groups never share.
    pub fn from_vertices(buffers: Vec<BufferVertex>) -> Self {
        let mut edges = Vec::new();
        for i in 0..buffers.len() {
            for j in i + 1..buffers.len() {
                let (a, b) = (&buffers[i], &buffers[j]);
                if a.group == b.group && disjoint(a.lifetime, b.lifetime) {
                    edges.push((i, j));
                }
            }
        }
        CompatibilityGraph { buffers, edges }
    }

    pub fn compatible(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.contains(&key)
    }

    pub fn total_bits(&self) -> u64 {
        self.buffers.iter().map(|b| b.bits).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

pub fn disjoint(a: (usize, usize), b: (usize, usize)) -> bool {
    a.1 <= b.0 || b.1 <= a.0
}

pub fn liveness(groups: &[LoopNest]) -> CompatibilityGraph {
    let mut vertices = Vec::new();
    for g in groups {
        for (b, life) in g.buffers.iter().zip(buffer_lifetimes(g)) {
            vertices.push(BufferVertex { name: b.name.clone(), group: g.name.clone(), bits: b.bits(), lifetime: life });
        }
    }
    CompatibilityGraph::from_vertices(vertices)
}
