//! Greedy assignment of compatible buffers to shared banks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lowering::CompatibilityGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bank {
    pub id: usize,
    pub bits: u64,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankAssignment {
    pub banks: Vec<Bank>,
    /// Buffer name to (bank, offset). Members overlay from offset 0.
    pub mapping: BTreeMap<String, (usize, u64)>,
    pub total_bits: u64,
    pub unshared_bits: u64,
}

impl BankAssignment {
    pub fn saving(&self) -> f64 {
        if self.unshared_bits == 0 {
            0.0
        } else {
            1.0 - self.total_bits as f64 / self.unshared_bits as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// One bank per buffer.
pub fn unshared(compat: &CompatibilityGraph) -> BankAssignment {
    plan_banks(&CompatibilityGraph { buffers: compat.buffers.clone(), edges: Vec::new() })
}

/// Sort by size (largest first, ties by index) and put each buffer into the
/// first bank whose members are all compatible with it.
pub fn plan_banks(compat: &CompatibilityGraph) -> BankAssignment {
    let mut order: Vec<usize> = (0..compat.buffers.len()).collect();
    order.sort_by(|&a, &b| compat.buffers[b].bits.cmp(&compat.buffers[a].bits).then(a.cmp(&b)));
    let mut banks: Vec<Vec<usize>> = Vec::new();
    for v in order {
        match banks.iter_mut().find(|bank| bank.iter().all(|&m| compat.compatible(m, v))) {
            Some(bank) => bank.push(v),
            None => banks.push(vec![v]),
        }
    }
    let mut mapping = BTreeMap::new();
    let banks: Vec<Bank> = banks
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            for &m in &members {
                mapping.insert(compat.buffers[m].name.clone(), (id, 0));
            }
            Bank {
                id,
                bits: members.iter().map(|&m| compat.buffers[m].bits).max().unwrap_or(0),
                members: members.iter().map(|&m| compat.buffers[m].name.clone()).collect(),
            }
        })
        .collect();
    BankAssignment { total_bits: banks.iter().map(|b| b.bits).sum(), unshared_bits: compat.total_bits(), banks, mapping }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowering::BufferVertex;

    fn v(name: &str, bits: u64, lifetime: (usize, usize)) -> BufferVertex {
        BufferVertex { name: name.into(), group: "g".into(), bits, lifetime }
    }

    #[test]
    fn disjoint_pair_shares() {
        let g = CompatibilityGraph::from_vertices(vec![v("A", 1000, (0, 3)), v("B", 800, (3, 5))]);
        let plan = plan_banks(&g);
        assert_eq!(plan.banks.len(), 1);
        assert_eq!(plan.total_bits, 1000);
        assert!((plan.saving() - 800.0 / 1800.0).abs() < 1e-12);
        assert_eq!(plan.mapping["B"], (0, 0));
    }

    #[test]
    fn live_triple_is_unshared() {
        let g = CompatibilityGraph::from_vertices(vec![v("A", 10, (0, 3)), v("B", 20, (0, 3)), v("C", 30, (1, 2))]);
        let plan = plan_banks(&g);
        assert_eq!(plan.banks.len(), 3);
        assert_eq!(plan.total_bits, 60);
        assert_eq!(plan.banks[0].members, vec!["C"]);
    }

    #[test]
    fn other_groups_never_share() {
        let mut b = v("B", 8, (5, 6));
        b.group = "h".into();
        let g = CompatibilityGraph::from_vertices(vec![v("A", 8, (0, 1)), b]);
        assert!(g.edges.is_empty());
        assert_eq!(plan_banks(&g).banks.len(), 2);
    }
}
