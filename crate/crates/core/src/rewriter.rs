//! Contraction factorization over product chains.
//!
//! A contraction of a product of `k` factors is rebuilt as a chain that adds
//! one factor at a time and contracts every pair as soon as both of its
//! endpoints are present. All seed/order/orientation choices are enumerated
//! and the cheapest is kept when it strictly lowers the graph cost.

use serde::Serialize;

use crate::tensor_ir::{NodeId, Op, TensorGraph};

/// Largest product chain whose factor orders are enumerated exhaustively.
pub const MAX_CHAIN_FACTORS: usize = 6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NodeCost {
    pub id: NodeId,
    pub multiplies: u64,
    pub adds: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RewriteCost {
    pub multiplies: u64,
    pub adds: u64,
    pub nodes: Vec<NodeCost>,
}

impl RewriteCost {
    pub fn total(&self) -> u64 {
        self.multiplies + self.adds
    }
}

/// Operation count of one node. A contraction over `f` materialized factors
/// with `m` result and `r` reduced elements costs `m*r*(f-1)` multiplies and
/// `m*(r-1)` adds; materialized products and Hadamard products cost one
/// multiply per element.
pub fn node_cost(graph: &TensorGraph, id: NodeId, virtuals: &[bool]) -> NodeCost {
    let n = graph.node(id);
    let size = n.size() as u64;
    let (multiplies, adds) = match &n.op {
        Op::Input(_) | Op::Output(..) => (0, 0),
        Op::Product(..) if virtuals[id] => (0, 0),
        Op::Product(..) | Op::ElemMul(..) => (size, 0),
        Op::ElemAdd(..) => (0, size),
        Op::Contract(a, pairs) => {
            let factors = virtual_factors(graph, *a, virtuals).len() as u64;
            let shape = &graph.node(*a).shape;
            let red: u64 = pairs.iter().map(|&(p, _)| shape[p] as u64).product();
            (size * red * (factors - 1), size * (red - 1))
        }
    };
    NodeCost { id, multiplies, adds }
}

pub fn cost(graph: &TensorGraph) -> RewriteCost {
    let virtuals = graph.virtual_products();
    let mut c = RewriteCost::default();
    for n in graph.nodes() {
        let nc = node_cost(graph, n.id, &virtuals);
        c.multiplies += nc.multiplies;
        c.adds += nc.adds;
        c.nodes.push(nc);
    }
    c
}

/// Materialized operands of the virtual product tree rooted at `id`.
pub fn virtual_factors(graph: &TensorGraph, id: NodeId, virtuals: &[bool]) -> Vec<NodeId> {
    match graph.node(id).op {
        Op::Product(a, b) if virtuals[id] => {
            let mut f = virtual_factors(graph, a, virtuals);
            f.extend(virtual_factors(graph, b, virtuals));
            f
        }
        _ => vec![id],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ChainStep {
    factor: usize,
    /// Product(factor, acc) instead of Product(acc, factor).
    left: bool,
    /// Pairs contracted after this step, in positions of the product.
    pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct ChainPlan {
    steps: Vec<ChainStep>,
    max_intermediate: usize,
}

/// Simulate one factor order. `None` if the final index order does not match
/// the original contraction's result order.
fn plan_chain(
    factor_positions: &[Vec<usize>],
    full_shape: &[usize],
    pairs: &[(usize, usize)],
    order: &[usize],
    left_mask: u32,
) -> Option<ChainPlan> {
    let mut done = vec![false; pairs.len()];
    let mut indices: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut max_intermediate = 0;
    for (s, &f) in order.iter().enumerate() {
        let left = s > 0 && left_mask & (1 << (s - 1)) != 0;
        if left {
            indices = [factor_positions[f].clone(), indices].concat();
        } else {
            indices.extend(&factor_positions[f]);
        }
        let mut local = Vec::new();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if done[k] {
                continue;
            }
            let (pa, pb) = (indices.iter().position(|&x| x == a), indices.iter().position(|&x| x == b));
            if let (Some(pa), Some(pb)) = (pa, pb) {
                done[k] = true;
                local.push((pa.min(pb), pa.max(pb)));
            }
        }
        if !local.is_empty() {
            let drop: Vec<usize> = local.iter().flat_map(|&(a, b)| [a, b]).collect();
            indices = indices.iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, &x)| x).collect();
            let size: usize = indices.iter().map(|&x| full_shape[x]).product();
            max_intermediate = max_intermediate.max(size);
        }
        steps.push(ChainStep { factor: f, left, pairs: local });
    }
    let paired: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let open: Vec<usize> = (0..full_shape.len()).filter(|p| !paired.contains(p)).collect();
    if indices != open {
        return None;
    }
    if steps.last().map(|s| s.pairs.is_empty()).unwrap_or(true) {
        max_intermediate = max_intermediate.max(open.iter().map(|&x| full_shape[x]).product());
    }
    Some(ChainPlan { steps, max_intermediate })
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Copy of `graph` with contraction `target` replaced by the chain.
fn substitute(graph: &TensorGraph, target: NodeId, factors: &[NodeId], plan: &ChainPlan) -> TensorGraph {
    let mut g = TensorGraph::new();
    let mut map = vec![usize::MAX; graph.len()];
    for n in graph.nodes() {
        let id = if n.is_input() {
            g.add_input(&n.display_name(), n.shape.clone()).expect("unique inputs")
        } else if n.id == target {
            let mut acc = None;
            for step in &plan.steps {
                let f = map[factors[step.factor]];
                let mut id = match acc {
                    None => f,
                    Some(a) if step.left => g.add(Op::Product(f, a)).expect("valid product"),
                    Some(a) => g.add(Op::Product(a, f)).expect("valid product"),
                };
                if !step.pairs.is_empty() {
                    id = g.add(Op::Contract(id, step.pairs.clone())).expect("valid contraction");
                }
                acc = Some(id);
            }
            acc.expect("non-empty chain")
        } else {
            g.add(remap(&n.op, &map)).expect("valid graph")
        };
        if let Some(l) = &n.label {
            g.label(id, l);
        }
        map[n.id] = id;
    }
    g.canonicalize()
}

fn remap(op: &Op, map: &[NodeId]) -> Op {
    match op {
        Op::Input(n) => Op::Input(n.clone()),
        Op::Product(a, b) => Op::Product(map[*a], map[*b]),
        Op::Contract(a, p) => Op::Contract(map[*a], p.clone()),
        Op::ElemMul(a, b) => Op::ElemMul(map[*a], map[*b]),
        Op::ElemAdd(a, b) => Op::ElemAdd(map[*a], map[*b]),
        Op::Output(n, a) => Op::Output(n.clone(), map[*a]),
    }
}

/// Best strictly cheaper replacement for contraction `target`, if any.
fn best_rewrite(graph: &TensorGraph, target: NodeId, current: u64) -> Option<TensorGraph> {
    let virtuals = graph.virtual_products();
    let Op::Contract(operand, pairs) = &graph.node(target).op else { return None };
    let factors = virtual_factors(graph, *operand, &virtuals);
    if factors.len() < 2 || factors.len() > MAX_CHAIN_FACTORS {
        return None;
    }
    let full_shape = graph.node(*operand).shape.clone();
    let mut positions = Vec::new();
    let mut next = 0;
    for &f in &factors {
        let r = graph.node(f).shape.len();
        positions.push((next..next + r).collect::<Vec<_>>());
        next += r;
    }

    let mut best: Option<((u64, usize, usize), TensorGraph)> = None;
    let mut order: Vec<usize> = (0..factors.len()).collect();
    let mut index = 0usize;
    loop {
        for mask in 0..(1u32 << (factors.len() - 1)) {
            index += 1;
            let Some(plan) = plan_chain(&positions, &full_shape, pairs, &order, mask) else { continue };
            let candidate = substitute(graph, target, &factors, &plan);
            let key = (cost(&candidate).total(), plan.max_intermediate, index);
            if key.0 < current && best.as_ref().map(|(k, _)| key < *k).unwrap_or(true) {
                best = Some((key, candidate));
            }
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    best.map(|(_, g)| g)
}

#[derive(Debug, Clone)]
pub struct RewriteTrace {
    pub graph: TensorGraph,
    /// Number of contractions replaced.
    pub rewrites: usize,
    pub cost_before: RewriteCost,
    pub cost_after: RewriteCost,
}

pub fn factorize_contractions(graph: &TensorGraph) -> TensorGraph {
    factorize_traced(graph).graph
}

/// Rewrite to a fixed point, one contraction at a time in node order.
pub fn factorize_traced(graph: &TensorGraph) -> RewriteTrace {
    let mut g = graph.canonicalize();
    let cost_before = cost(&g);
    let mut rewrites = 0;
    'outer: loop {
        let current = cost(&g).total();
        let contracts: Vec<NodeId> = g.nodes().iter().filter(|n| matches!(n.op, Op::Contract(..))).map(|n| n.id).collect();
        for c in contracts {
            if let Some(next) = best_rewrite(&g, c, current) {
                g = next;
                rewrites += 1;
                continue 'outer;
            }
        }
        break;
    }
    let cost_after = cost(&g);
    RewriteTrace { graph: g, rewrites, cost_before, cost_after }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::frontend::{load, Params};
    use crate::tensor_ir::from_ast;

    fn helmholtz(p: usize) -> TensorGraph {
        from_ast(&load(fixtures::HELMHOLTZ, &Params::from([("p".into(), p)])).unwrap())
    }

    type Contraction = (Vec<usize>, Vec<(usize, usize)>);

    fn contracts(g: &TensorGraph) -> Vec<Contraction> {
        g.nodes()
            .iter()
            .filter_map(|n| match &n.op {
                Op::Contract(a, p) => Some((g.node(*a).shape.clone(), p.clone())),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn gemm_stage_cost() {
        let src = "var input S : [11 11]\nvar input u : [11 11 11]\nvar output v : [11 11 11]\nv = (S # u) . [[1 2]]";
        let c = cost(&from_ast(&load(src, &Params::new()).unwrap()));
        assert_eq!(c.multiplies, 14_641);
        assert_eq!(c.adds, 1331 * 10);
    }

    #[test]
    fn hadamard_cost() {
        let src = "var input a : [11 11 11]\nvar input b : [11 11 11]\nvar output v : [11 11 11]\nv = a * b";
        let c = cost(&from_ast(&load(src, &Params::new()).unwrap()));
        assert_eq!((c.multiplies, c.adds), (1331, 0));
    }

    #[test]
    fn unfactorized_helmholtz_contraction_cost_p3() {
        let src = "var input S : [3 3]\nvar input u : [3 3 3]\nvar output t : [3 3 3]\nt = (S # S # S # u) . [[1 6] [3 7] [5 8]]";
        let c = cost(&from_ast(&load(src, &Params::new()).unwrap()));
        assert_eq!(c.multiplies, 3 * 729);
        assert_eq!(c.total(), 2889);
    }

    #[test]
    fn helmholtz_factorizes_into_seven_operators() {
        let trace = factorize_traced(&helmholtz(11));
        assert_eq!(trace.rewrites, 2);
        assert_eq!(trace.cost_before.multiplies, 2 * 3 * 11u64.pow(6) + 1331);
        assert_eq!(trace.cost_after.multiplies, 6 * 11u64.pow(4) + 1331);
        let g = &trace.graph;
        let h = g.op_histogram();
        assert_eq!(h["contract"], 6);
        assert_eq!(h["mul"], 1);
        let c = contracts(g);
        let t_chain = [vec![(1, 2)], vec![(1, 4)], vec![(1, 4)]];
        let v_chain = [vec![(0, 2)], vec![(1, 3)], vec![(1, 3)]];
        for (k, want) in t_chain.iter().chain(&v_chain).enumerate() {
            assert_eq!(&c[k].1, want, "stage {k}: {c:?}");
        }
        assert!(g.nodes().iter().any(|n| n.label.as_deref() == Some("t") && matches!(n.op, Op::Contract(..))));
    }

    #[test]
    fn single_factor_contraction_is_unchanged() {
        let src = "var input S : [3 3 3]\nvar output v : [3]\nv = S . [[0 1]]";
        let g = from_ast(&load(src, &Params::new()).unwrap());
        let trace = factorize_traced(&g);
        assert_eq!(trace.rewrites, 0);
        assert_eq!(trace.graph, g);
    }

    #[test]
    fn rewriting_is_idempotent() {
        let once = factorize_contractions(&helmholtz(5));
        let twice = factorize_contractions(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn permutations_are_lexicographic() {
        let mut v = vec![0, 1, 2];
        let mut all = vec![v.clone()];
        while next_permutation(&mut v) {
            all.push(v.clone());
        }
        assert_eq!(all.len(), 6);
        assert_eq!(all[1], vec![0, 2, 1]);
        assert_eq!(all[5], vec![2, 1, 0]);
    }
}
