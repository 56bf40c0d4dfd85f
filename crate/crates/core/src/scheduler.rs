//! Operator grouping, interval estimation and ALAP stage ordering.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use crate::rewriter::virtual_factors;
use crate::tensor_ir::{NodeId, Op, TensorGraph};

pub type GroupId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Group {
    pub id: GroupId,
    pub name: String,
    /// Node ids in topological order. Virtual products belong to the group
    /// of their consuming contraction; an output aliasing an input forms a
    /// copy group of its own.
    pub members: Vec<NodeId>,
    pub interval: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct StreamEdge {
    pub producer: GroupId,
    pub consumer: GroupId,
    pub tensor: NodeId,
    pub elements: usize,
}

#[derive(Debug, Clone)]
pub struct GroupSchedule {
    pub graph: TensorGraph,
    pub groups: Vec<Group>,
    pub stream_edges: Vec<StreamEdge>,
    pub stage_order: Vec<GroupId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("group graph contains a cycle through groups {0:?}")]
    Cycle(Vec<GroupId>),
}

/// Limits applied while merging. `None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GroupBudget {
    pub max_plm_bits: Option<u64>,
    pub max_dsp: Option<u64>,
    pub target_interval_cycles: Option<u64>,
    /// Scalar width used to turn buffered elements into bits.
    pub word_bits: u32,
}

impl GroupBudget {
    pub fn unbounded() -> Self {
        GroupBudget { max_plm_bits: None, max_dsp: None, target_interval_cycles: None, word_bits: 64 }
    }

    /// Interval target equal to the slowest of: the Read stage, the Write
    /// stage, and the costliest single source statement.
    pub fn default_for(graph: &TensorGraph) -> Self {
        let read: u64 = graph.inputs().map(|n| n.size() as u64).sum();
        let write: u64 = graph.outputs().map(|n| n.size() as u64).sum();
        let virtuals = graph.virtual_products();
        let stmt = statements(graph);
        let mut per_stmt: BTreeMap<&str, u64> = BTreeMap::new();
        for n in graph.nodes() {
            *per_stmt.entry(stmt[n.id].as_str()).or_insert(0) += node_trip_count(graph, n.id, &virtuals);
        }
        let longest = per_stmt.values().copied().max().unwrap_or(0);
        GroupBudget { target_interval_cycles: Some(read.max(write).max(longest)), ..Self::unbounded() }
    }
}

/// Loop trip count of the nest implementing one node.
pub fn node_trip_count(graph: &TensorGraph, id: NodeId, virtuals: &[bool]) -> u64 {
    let n = graph.node(id);
    let size = n.size() as u64;
    match &n.op {
        Op::Input(_) => 0,
        Op::Product(..) if virtuals[id] => 0,
        Op::Contract(a, pairs) => {
            let shape = &graph.node(*a).shape;
            size * pairs.iter().map(|&(p, _)| shape[p] as u64).product::<u64>()
        }
        Op::Output(_, a) if !graph.node(*a).is_input() => 0,
        _ => size,
    }
}

/// Sum of member loop-nest trip counts.
pub fn estimate_interval(graph: &TensorGraph, members: &[NodeId]) -> u64 {
    let virtuals = graph.virtual_products();
    members.iter().map(|&m| node_trip_count(graph, m, &virtuals)).sum()
}

/// Source statement of every node: its own label, else that of its first consumer.
fn statements(graph: &TensorGraph) -> Vec<String> {
    let users = graph.consumers();
    let mut out = vec![String::new(); graph.len()];
    for n in graph.nodes().iter().rev() {
        out[n.id] = match (&n.op, &n.label) {
            (Op::Output(name, _), _) => name.clone(),
            (_, Some(l)) => l.clone(),
            _ => users[n.id].first().map(|&u| out[u].clone()).unwrap_or_else(|| n.display_name()),
        };
    }
    out
}

/// Materialized tensors read by one node's nest.
pub fn nest_reads(graph: &TensorGraph, id: NodeId, virtuals: &[bool]) -> Vec<NodeId> {
    match &graph.node(id).op {
        Op::Input(_) => vec![],
        Op::Product(..) if virtuals[id] => vec![],
        Op::Contract(a, _) => virtual_factors(graph, *a, virtuals),
        Op::Output(_, a) if !graph.node(*a).is_input() => vec![],
        op => op.operands(),
    }
}

/// Nodes that own a loop nest, in order.
pub fn nest_nodes(graph: &TensorGraph, members: &[NodeId]) -> Vec<NodeId> {
    let virtuals = graph.virtual_products();
    members
        .iter()
        .copied()
        .filter(|&m| match &graph.node(m).op {
            Op::Product(..) => !virtuals[m],
            Op::Output(_, a) => graph.node(*a).is_input(),
            Op::Input(_) => false,
            _ => true,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BufferKind {
    /// Graph input arriving from the Read module.
    Input,
    /// Value streamed from another group.
    Stream,
    /// Produced and consumed inside the group.
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BufferReq {
    pub tensor: NodeId,
    pub elements: usize,
    pub kind: BufferKind,
}

/// Local buffers a group needs. Internal values are always buffered; a
/// value arriving from outside is buffered unless exactly one elementwise
/// nest consumes it, since that nest reads it once in arrival order.
pub fn group_buffers(graph: &TensorGraph, members: &[NodeId]) -> Vec<BufferReq> {
    let virtuals = graph.virtual_products();
    let member_set: BTreeSet<NodeId> = members.iter().copied().collect();
    let nests = nest_nodes(graph, members);
    let mut readers: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &n in &nests {
        for r in nest_reads(graph, n, &virtuals) {
            let e = readers.entry(r).or_default();
            if !e.contains(&n) {
                e.push(n);
            }
        }
    }
    let mut out = Vec::new();
    for (&t, rs) in &readers {
        let kind = if member_set.contains(&t) {
            BufferKind::Internal
        } else if graph.node(t).is_input() {
            BufferKind::Input
        } else {
            BufferKind::Stream
        };
        let in_order = rs.len() == 1 && matches!(graph.node(rs[0]).op, Op::ElemMul(..) | Op::ElemAdd(..) | Op::Output(..));
        if kind == BufferKind::Internal || !in_order {
            out.push(BufferReq { tensor: t, elements: graph.node(t).size(), kind });
        }
    }
    out
}

/// Parallel arithmetic units of one nest: (multipliers, adders). A
/// contraction unrolls its innermost reduction loop completely.
pub fn nest_operators(graph: &TensorGraph, id: NodeId, virtuals: &[bool]) -> (u64, u64) {
    match &graph.node(id).op {
        Op::Contract(a, pairs) => {
            let factors = virtual_factors(graph, *a, virtuals).len() as u64;
            let unroll = pairs.last().map(|&(p, _)| graph.node(*a).shape[p] as u64).unwrap_or(1);
            (unroll * (factors - 1), unroll)
        }
        Op::Product(..) | Op::ElemMul(..) => (1, 0),
        Op::ElemAdd(..) => (0, 1),
        _ => (0, 0),
    }
}

/// Units instantiated for a group. Nests of one group run one after the
/// other and share units, so the group needs the per-kind maximum.
pub fn group_operators(graph: &TensorGraph, members: &[NodeId]) -> (u64, u64) {
    let virtuals = graph.virtual_products();
    nest_nodes(graph, members).iter().fold((0, 0), |(m, a), &n| {
        let (nm, na) = nest_operators(graph, n, &virtuals);
        (m.max(nm), a.max(na))
    })
}

fn base_name(graph: &TensorGraph, id: NodeId, virtuals: &[bool]) -> &'static str {
    match &graph.node(id).op {
        Op::ElemMul(..) => "mmult",
        Op::ElemAdd(..) => "madd",
        Op::Product(..) => "outer",
        Op::Output(..) => "copy",
        Op::Contract(a, pairs) => {
            let factors = virtual_factors(graph, *a, virtuals);
            if pairs.len() != 1 || factors.len() != 2 {
                return "contract";
            }
            let mut offset = 0;
            for &f in &factors {
                let rank = graph.node(f).shape.len();
                let (p, q) = pairs[0];
                if rank == 2 {
                    for e in [p, q] {
                        if (offset..offset + 2).contains(&e) {
                            return if e == offset { "gemm_inv" } else { "gemm" };
                        }
                    }
                }
                offset += rank;
            }
            "contract"
        }
        Op::Input(_) => "input",
    }
}

impl GroupSchedule {
    fn from_parts(graph: &TensorGraph, parts: Vec<Vec<NodeId>>) -> GroupSchedule {
        Self::try_from_parts(graph, parts).expect("merges keep the group graph acyclic")
    }

    fn try_from_parts(graph: &TensorGraph, mut parts: Vec<Vec<NodeId>>) -> Result<GroupSchedule, ScheduleError> {
        for p in &mut parts {
            p.sort_unstable();
        }
        parts.sort_by_key(|p| p[0]);
        let virtuals = graph.virtual_products();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut groups = Vec::with_capacity(parts.len());
        for (id, members) in parts.into_iter().enumerate() {
            let mut bases: Vec<&str> = Vec::new();
            for n in nest_nodes(graph, &members) {
                let b = base_name(graph, n, &virtuals);
                if !bases.contains(&b) {
                    bases.push(b);
                }
            }
            let base = bases.join("_");
            let k = seen.entry(base.clone()).or_insert(0);
            let name = if *k == 0 { base.clone() } else { format!("{base}_{k}") };
            *k += 1;
            let interval = estimate_interval(graph, &members);
            groups.push(Group { id, name, members, interval });
        }
        let mut s = GroupSchedule { graph: graph.clone(), groups, stream_edges: Vec::new(), stage_order: Vec::new() };
        s.stream_edges = s.compute_edges();
        s.stage_order = alap_order(&s)?;
        Ok(s)
    }

    /// Schedule with a caller-chosen partition of the compute nodes. Virtual
    /// products and outputs follow their consumer and producer as in
    /// `atomize`; nodes not listed become singleton groups.
    pub fn from_partition(graph: &TensorGraph, parts: &[Vec<NodeId>]) -> Result<GroupSchedule, ScheduleError> {
        let atoms = atomize(graph);
        let mut home: BTreeMap<NodeId, usize> = BTreeMap::new();
        for (k, p) in parts.iter().enumerate() {
            for &n in p {
                home.insert(n, k);
            }
        }
        let mut merged: Vec<Vec<NodeId>> = vec![Vec::new(); parts.len()];
        for g in &atoms.groups {
            match g.members.iter().find_map(|m| home.get(m)) {
                Some(&k) => merged[k].extend(&g.members),
                None => merged.push(g.members.clone()),
            }
        }
        merged.retain(|p| !p.is_empty());
        Self::try_from_parts(graph, merged)
    }

    fn owner(&self) -> Vec<Option<GroupId>> {
        let mut owner = vec![None; self.graph.len()];
        for g in &self.groups {
            for &m in &g.members {
                owner[m] = Some(g.id);
            }
        }
        owner
    }

    fn compute_edges(&self) -> Vec<StreamEdge> {
        let virtuals = self.graph.virtual_products();
        let owner = self.owner();
        let mut edges = BTreeSet::new();
        for g in &self.groups {
            for n in nest_nodes(&self.graph, &g.members) {
                for t in nest_reads(&self.graph, n, &virtuals) {
                    if let Some(pg) = owner[t] {
                        if pg != g.id {
                            edges.insert(StreamEdge { producer: pg, consumer: g.id, tensor: t, elements: self.graph.node(t).size() });
                        }
                    }
                }
            }
        }
        edges.into_iter().collect()
    }

    pub fn group_of(&self, node: NodeId) -> Option<GroupId> {
        self.owner()[node]
    }

    pub fn group_by_name(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Graph inputs read by group `g` from the Read module.
    pub fn input_reads(&self, g: GroupId) -> Vec<NodeId> {
        let virtuals = self.graph.virtual_products();
        let mut out = BTreeSet::new();
        for n in nest_nodes(&self.graph, &self.groups[g].members) {
            for t in nest_reads(&self.graph, n, &virtuals) {
                if self.graph.node(t).is_input() {
                    out.insert(t);
                }
            }
        }
        out.into_iter().collect()
    }

    /// Output nodes whose value group `g` streams to the Write module.
    pub fn output_writes(&self, g: GroupId) -> Vec<NodeId> {
        let owner = self.owner();
        self.graph
            .outputs()
            .filter(|o| {
                let src = o.op.operands()[0];
                owner[o.id] == Some(g) || owner[src] == Some(g)
            })
            .map(|o| o.id)
            .collect()
    }

    /// Words per element read by the Read module.
    pub fn read_interval(&self) -> u64 {
        self.graph.inputs().map(|n| n.size() as u64).sum()
    }

    /// Words per element written by the Write module.
    pub fn write_interval(&self) -> u64 {
        self.graph.outputs().map(|n| n.size() as u64).sum()
    }

    pub fn max_interval(&self) -> u64 {
        self.groups.iter().map(|g| g.interval).max().unwrap_or(0)
    }

    pub fn names_in_stage_order(&self) -> Vec<String> {
        self.stage_order.iter().map(|&g| self.groups[g].name.clone()).collect()
    }

    /// Total parallel units: (multipliers, adders) summed over groups.
    pub fn operators(&self) -> (u64, u64) {
        self.groups.iter().fold((0, 0), |(m, a), g| {
            let (gm, ga) = group_operators(&self.graph, &g.members);
            (m + gm, a + ga)
        })
    }

    pub fn buffer_bits(&self, g: GroupId, word_bits: u32) -> u64 {
        group_buffers(&self.graph, &self.groups[g].members).iter().map(|b| b.elements as u64).sum::<u64>() * word_bits as u64
    }

    /// `group | members | interval | streams-in | streams-out`
    pub fn dump(&self) -> String {
        let mut out = String::from("group | members | interval | streams-in | streams-out\n");
        for &gid in &self.stage_order {
            let g = &self.groups[gid];
            let name = |t: NodeId| self.graph.node(t).display_name();
            let members: Vec<String> = nest_nodes(&self.graph, &g.members).into_iter().map(name).collect();
            let mut ins: Vec<String> = self.input_reads(gid).into_iter().map(name).collect();
            ins.extend(
                self.stream_edges
                    .iter()
                    .filter(|e| e.consumer == gid)
                    .map(|e| format!("{}<-{}", name(e.tensor), self.groups[e.producer].name)),
            );
            let mut outs: Vec<String> = self
                .stream_edges
                .iter()
                .filter(|e| e.producer == gid)
                .map(|e| format!("{}->{}", name(e.tensor), self.groups[e.consumer].name))
                .collect();
            outs.extend(self.output_writes(gid).into_iter().map(name));
            let _ = writeln!(out, "{} | {} | {} | {} | {}", g.name, members.join(","), g.interval, ins.join(","), outs.join(","));
        }
        out
    }
}

/// One group per tensor value.
pub fn atomize(graph: &TensorGraph) -> GroupSchedule {
    let virtuals = graph.virtual_products();
    let users = graph.consumers();
    let mut home = vec![usize::MAX; graph.len()];
    let mut parts: Vec<Vec<NodeId>> = Vec::new();
    for n in graph.nodes() {
        let own = match &n.op {
            Op::Input(_) => false,
            Op::Output(_, a) => graph.node(*a).is_input(),
            Op::Product(..) => !virtuals[n.id],
            _ => true,
        };
        if own {
            home[n.id] = parts.len();
            parts.push(vec![n.id]);
        }
    }
    // Virtual products join their first consumer; outputs of computed values
    // join the producer.
    for n in graph.nodes().iter().rev() {
        if matches!(n.op, Op::Product(..)) && virtuals[n.id] {
            let u = users[n.id][0];
            home[n.id] = home[u];
            parts[home[u]].push(n.id);
        }
    }
    for n in graph.outputs() {
        let src = n.op.operands()[0];
        if home[n.id] == usize::MAX {
            home[n.id] = home[src];
            parts[home[src]].push(n.id);
        }
    }
    GroupSchedule::from_parts(graph, parts)
}

struct Candidate {
    a: GroupId,
    b: GroupId,
    key: (bool, bool, u64, Reverse<GroupId>, Reverse<GroupId>),
}

fn reachable_without(s: &GroupSchedule, from: GroupId, to: GroupId) -> bool {
    let mut stack: Vec<GroupId> = s.stream_edges.iter().filter(|e| e.producer == from && e.consumer != to).map(|e| e.consumer).collect();
    let mut seen = BTreeSet::new();
    while let Some(g) = stack.pop() {
        if g == to {
            return true;
        }
        if seen.insert(g) {
            stack.extend(s.stream_edges.iter().filter(|e| e.producer == g).map(|e| e.consumer));
        }
    }
    false
}

fn candidates(s: &GroupSchedule, budget: &GroupBudget) -> Vec<Candidate> {
    let stmt = statements(&s.graph);
    let stmts_of = |g: GroupId| -> BTreeSet<&str> { s.groups[g].members.iter().map(|&m| stmt[m].as_str()).collect() };
    let succ = |g: GroupId| s.stream_edges.iter().filter(|e| e.producer == g).map(|e| e.consumer).collect::<BTreeSet<_>>();
    let pred = |g: GroupId| s.stream_edges.iter().filter(|e| e.consumer == g).map(|e| e.producer).collect::<BTreeSet<_>>();
    let pairs: BTreeSet<(GroupId, GroupId)> = s.stream_edges.iter().map(|e| (e.producer, e.consumer)).collect();
    let mut out = Vec::new();
    for (a, b) in pairs {
        if reachable_without(s, a, b) {
            continue;
        }
        let members: Vec<NodeId> = s.groups[a].members.iter().chain(&s.groups[b].members).copied().collect();
        let interval = s.groups[a].interval + s.groups[b].interval;
        if budget.target_interval_cycles.is_some_and(|t| interval > t) {
            continue;
        }
        if let Some(max) = budget.max_plm_bits {
            let bits: u64 = group_buffers(&s.graph, &members).iter().map(|b| b.elements as u64).sum::<u64>() * budget.word_bits as u64;
            if bits > max {
                continue;
            }
        }
        if budget.max_dsp.is_some_and(|max| group_operators(&s.graph, &members).0 > max) {
            continue;
        }
        let cross = stmts_of(a) != stmts_of(b);
        let chain = succ(a).len() == 1 && pred(b).len() == 1;
        out.push(Candidate { a, b, key: (cross, !chain, interval, Reverse(a.max(b)), Reverse(a.min(b))) });
    }
    out
}

fn merge(s: &GroupSchedule, a: GroupId, b: GroupId) -> GroupSchedule {
    let mut parts: Vec<Vec<NodeId>> = Vec::new();
    let mut merged = Vec::new();
    for g in &s.groups {
        if g.id == a || g.id == b {
            merged.extend(&g.members);
        } else {
            parts.push(g.members.clone());
        }
    }
    parts.push(merged);
    GroupSchedule::from_parts(&s.graph, parts)
}

/// Greedily merge connected groups, cheapest merged interval first, with
/// pairs inside one source statement and chain edges preferred.
pub fn collapse(schedule: &GroupSchedule, budget: &GroupBudget) -> GroupSchedule {
    collapse_until(schedule, budget, 1)
}

/// Merge without limits until at most `n` groups remain.
pub fn collapse_to(schedule: &GroupSchedule, n: usize) -> GroupSchedule {
    collapse_until(schedule, &GroupBudget::unbounded(), n.max(1))
}

fn collapse_until(schedule: &GroupSchedule, budget: &GroupBudget, floor: usize) -> GroupSchedule {
    let mut s = schedule.clone();
    while s.groups.len() > floor {
        let Some(best) = candidates(&s, budget).into_iter().min_by(|x, y| x.key.cmp(&y.key)) else { break };
        s = merge(&s, best.a, best.b);
    }
    s
}

/// As-late-as-possible stage order: sinks sit at the last stage and every
/// other group directly before its earliest successor; ties by id.
pub fn alap_order(schedule: &GroupSchedule) -> Result<Vec<GroupId>, ScheduleError> {
    let n = schedule.groups.len();
    let mut succ = vec![BTreeSet::new(); n];
    let mut indeg = vec![0usize; n];
    for e in &schedule.stream_edges {
        if succ[e.producer].insert(e.consumer) {
            indeg[e.consumer] += 1;
        }
    }
    let mut ready: BTreeSet<GroupId> = (0..n).filter(|&g| indeg[g] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(g) = ready.pop_first() {
        topo.push(g);
        for &s in &succ[g] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert(s);
            }
        }
    }
    if topo.len() != n {
        let stuck: Vec<GroupId> = (0..n).filter(|g| !topo.contains(g)).collect();
        return Err(ScheduleError::Cycle(stuck));
    }
    let mut depth = vec![0usize; n];
    for &g in &topo {
        for &s in &succ[g] {
            depth[s] = depth[s].max(depth[g] + 1);
        }
    }
    let last = depth.iter().copied().max().unwrap_or(0);
    let mut stage = vec![last; n];
    for &g in topo.iter().rev() {
        if let Some(m) = succ[g].iter().map(|&s| stage[s]).min() {
            stage[g] = m - 1;
        }
    }
    let mut order: Vec<GroupId> = (0..n).collect();
    order.sort_by_key(|&g| (stage[g], g));
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::frontend::{load, Params};
    use crate::rewriter::factorize_contractions;
    use crate::tensor_ir::from_ast;

    fn graph(src: &str, params: &[(&str, usize)]) -> TensorGraph {
        let params: Params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        from_ast(&load(src, &params).unwrap())
    }

    fn helmholtz(p: usize) -> TensorGraph {
        factorize_contractions(&graph(fixtures::HELMHOLTZ, &[("p", p)]))
    }

    #[test]
    fn atomized_helmholtz_has_seven_groups() {
        let s = atomize(&helmholtz(11));
        assert_eq!(s.groups.len(), 7);
        assert_eq!(s.names_in_stage_order(), ["gemm", "gemm_1", "gemm_2", "mmult", "gemm_inv", "gemm_inv_1", "gemm_inv_2"]);
        assert_eq!(s.stream_edges.len(), 6);
        assert_eq!(s.group_by_name("gemm").unwrap().interval, 14_641);
        assert_eq!(s.group_by_name("mmult").unwrap().interval, 1_331);
    }

    #[test]
    fn default_budget_yields_three_groups() {
        let g = helmholtz(11);
        let budget = GroupBudget::default_for(&g);
        assert_eq!(budget.target_interval_cycles, Some(3 * 14_641));
        let s = collapse(&atomize(&g), &budget);
        assert_eq!(s.names_in_stage_order(), ["gemm", "mmult", "gemm_inv"]);
        assert_eq!(s.stream_edges.len(), 2);
    }

    #[test]
    fn unbounded_collapse_reaches_one_group_through_the_two_group_split() {
        let a = atomize(&helmholtz(5));
        let two = collapse_to(&a, 2);
        assert_eq!(two.names_in_stage_order(), ["gemm", "mmult_gemm_inv"]);
        let first = &two.groups[two.stage_order[0]];
        assert_eq!(first.members.iter().filter(|&&m| matches!(two.graph.node(m).op, Op::Contract(..))).count(), 3);
        assert!(!two.input_reads(two.stage_order[0]).contains(&two.graph.input_id("D").unwrap()));
        let one = collapse(&a, &GroupBudget::unbounded());
        assert_eq!(one.groups.len(), 1);
        assert_eq!(one.groups[0].name, "gemm_mmult_gemm_inv");
        assert!(one.stream_edges.is_empty());
    }

    #[test]
    fn tight_budget_keeps_atomized_schedule() {
        let a = atomize(&helmholtz(11));
        let budget = GroupBudget { target_interval_cycles: Some(14_641), ..GroupBudget::unbounded() };
        assert_eq!(collapse(&a, &budget).groups.len(), 7);
        let budget = GroupBudget { max_plm_bits: Some(1), ..GroupBudget::unbounded() };
        assert_eq!(collapse(&a, &budget).groups.len(), 7);
    }

    #[test]
    fn merged_interval_is_a_sum() {
        let g = helmholtz(11);
        let s = atomize(&g);
        let gemm2 = s.group_by_name("gemm_2").unwrap();
        let mmult = s.group_by_name("mmult").unwrap();
        let members: Vec<NodeId> = gemm2.members.iter().chain(&mmult.members).copied().collect();
        assert_eq!(estimate_interval(&g, &members), 15_972);
    }

    #[test]
    fn identity_program_is_one_copy_group() {
        let s = atomize(&graph("var input u : [4]\nvar output v : [4]\nv = u", &[]));
        assert_eq!(s.groups.len(), 1);
        assert_eq!(s.groups[0].name, "copy");
        assert_eq!(s.groups[0].interval, 4);
    }

    #[test]
    fn independent_outputs_have_no_edges() {
        let s = atomize(&graph("var input a : [3]\nvar output x : [3]\nvar output y : [3]\nx = a * a\ny = a + a", &[]));
        assert_eq!(s.groups.len(), 2);
        assert!(s.stream_edges.is_empty());
        assert_eq!(alap_order(&s).unwrap(), vec![0, 1]);
    }

    #[test]
    fn alap_places_sources_right_before_sink() {
        let src = "var input a : [3]\nvar output v : [3]\nx = a * a\ny = a + a\nw = x * x\nv = w + y";
        let s = atomize(&graph(src, &[]));
        // x(0) -> w(2) -> v(3) and y(1) -> v(3): y moves to the stage of w.
        assert_eq!(s.names_in_stage_order(), ["mmult", "madd", "mmult_1", "madd_1"]);
        assert_eq!(alap_order(&s).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn helmholtz_buffers() {
        let g = helmholtz(11);
        let s = atomize(&g);
        let mm = s.group_by_name("mmult").unwrap();
        assert!(group_buffers(&g, &mm.members).is_empty());
        let gemm = s.group_by_name("gemm").unwrap();
        let b: Vec<usize> = group_buffers(&g, &gemm.members).iter().map(|b| b.elements).collect();
        assert_eq!(b, vec![121, 1331]);
        let one = collapse(&s, &GroupBudget::unbounded());
        assert_eq!(group_operators(&g, &one.groups[0].members), (11, 11));
        assert_eq!(s.operators(), (6 * 11 + 1, 6 * 11));
    }

    #[test]
    fn dump_is_deterministic() {
        let a = collapse(&atomize(&helmholtz(3)), &GroupBudget::default_for(&helmholtz(3)));
        let b = collapse(&atomize(&helmholtz(3)), &GroupBudget::default_for(&helmholtz(3)));
        assert_eq!(a.dump(), b.dump());
        assert!(a.dump().lines().nth(1).unwrap().starts_with("gemm | "));
    }
}
