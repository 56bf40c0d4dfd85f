//! Value-based tensor DAG with structural sharing.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use thiserror::Error;

use crate::frontend::check::contracted_shape;
use crate::frontend::{Direction, TypedExpr, TypedKind, TypedProgram};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Input(String),
    Product(NodeId, NodeId),
    Contract(NodeId, Vec<(usize, usize)>),
    ElemMul(NodeId, NodeId),
    ElemAdd(NodeId, NodeId),
    Output(String, NodeId),
}

impl Op {
    pub fn operands(&self) -> Vec<NodeId> {
        match self {
            Op::Input(_) => vec![],
            Op::Contract(a, _) | Op::Output(_, a) => vec![*a],
            Op::Product(a, b) | Op::ElemMul(a, b) | Op::ElemAdd(a, b) => vec![*a, *b],
        }
    }

    pub fn mnemonic(&self) -> &'static str {
        match self {
            Op::Input(_) => "input",
            Op::Product(..) => "product",
            Op::Contract(..) => "contract",
            Op::ElemMul(..) => "mul",
            Op::ElemAdd(..) => "add",
            Op::Output(..) => "output",
        }
    }

    fn remap(&self, map: &[NodeId]) -> Op {
        match self {
            Op::Input(n) => Op::Input(n.clone()),
            Op::Product(a, b) => Op::Product(map[*a], map[*b]),
            Op::Contract(a, p) => Op::Contract(map[*a], p.clone()),
            Op::ElemMul(a, b) => Op::ElemMul(map[*a], map[*b]),
            Op::ElemAdd(a, b) => Op::ElemAdd(map[*a], map[*b]),
            Op::Output(n, a) => Op::Output(n.clone(), map[*a]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub op: Op,
    pub shape: Vec<usize>,
    /// Source-level name of the value, if a statement assigned it.
    pub label: Option<String>,
}

impl Node {
    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_input(&self) -> bool {
        matches!(self.op, Op::Input(_))
    }

    pub fn is_output(&self) -> bool {
        matches!(self.op, Op::Output(..))
    }

    /// Inputs and outputs are interface nodes; everything else is computed.
    pub fn is_compute(&self) -> bool {
        !self.is_input() && !self.is_output()
    }

    /// Label, or a synthetic `%id` name.
    pub fn display_name(&self) -> String {
        match (&self.op, &self.label) {
            (Op::Input(n) | Op::Output(n, _), _) => n.clone(),
            (_, Some(l)) => l.clone(),
            _ => format!("%{}", self.id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("operand %{0} does not exist")]
    MissingOperand(NodeId),
    #[error("shape mismatch for {op}: {lhs:?} vs {rhs:?}")]
    Shape { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("invalid contraction: {0}")]
    Contraction(String),
    #[error("duplicate {0} '{1}'")]
    Duplicate(&'static str, String),
}

/// Nodes are stored in topological order: every operand id is smaller than its user.
#[derive(Debug, Clone, Default)]
pub struct TensorGraph {
    nodes: Vec<Node>,
    interned: HashMap<Op, NodeId>,
}

impl PartialEq for TensorGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl TensorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add_input(&mut self, name: &str, shape: Vec<usize>) -> Result<NodeId, GraphError> {
        let op = Op::Input(name.to_string());
        if self.interned.contains_key(&op) {
            return Err(GraphError::Duplicate("input", name.to_string()));
        }
        Ok(self.push(op, shape))
    }

    /// Add a computed node, returning the existing id when an identical node exists.
    pub fn add(&mut self, op: Op) -> Result<NodeId, GraphError> {
        if let Op::Input(name) = &op {
            return Err(GraphError::Duplicate("input (use add_input)", name.clone()));
        }
        if let Some(&id) = self.interned.get(&op) {
            return Ok(id);
        }
        for a in op.operands() {
            if a >= self.nodes.len() || self.nodes[a].is_output() {
                return Err(GraphError::MissingOperand(a));
            }
        }
        let shape_of = |id: NodeId| self.nodes[id].shape.clone();
        let shape = match &op {
            Op::Input(_) => unreachable!(),
            Op::Product(a, b) => [shape_of(*a), shape_of(*b)].concat(),
            Op::Contract(a, pairs) => contracted_shape(&shape_of(*a), pairs).map_err(|e| GraphError::Contraction(e.to_string()))?,
            Op::ElemMul(a, b) | Op::ElemAdd(a, b) => {
                let (l, r) = (shape_of(*a), shape_of(*b));
                if l != r {
                    return Err(GraphError::Shape { op: op.mnemonic(), lhs: l, rhs: r });
                }
                l
            }
            Op::Output(name, a) => {
                if self.outputs().any(|n| matches!(&n.op, Op::Output(m, _) if m == name)) {
                    return Err(GraphError::Duplicate("output", name.clone()));
                }
                shape_of(*a)
            }
        };
        Ok(self.push(op, shape))
    }

    fn push(&mut self, op: Op, shape: Vec<usize>) -> NodeId {
        let id = self.nodes.len();
        self.interned.insert(op.clone(), id);
        self.nodes.push(Node { id, op, shape, label: None });
        id
    }

    /// Attach a name to a value unless it already has one.
    pub fn label(&mut self, id: NodeId, name: &str) {
        let n = &mut self.nodes[id];
        if n.label.is_none() && n.is_compute() {
            n.label = Some(name.to_string());
        }
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_input())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_output())
    }

    pub fn input_id(&self, name: &str) -> Option<NodeId> {
        self.interned.get(&Op::Input(name.to_string())).copied()
    }

    /// Users of every node, in increasing id order.
    pub fn consumers(&self) -> Vec<Vec<NodeId>> {
        let mut users = vec![Vec::new(); self.nodes.len()];
        for n in &self.nodes {
            for a in n.op.operands() {
                if users[a].last() != Some(&n.id) {
                    users[a].push(n.id);
                }
            }
        }
        users
    }

    /// A product is virtual when only contractions and other virtual products
    /// read it; it is never materialized, its factors feed the consuming
    /// contraction directly.
    pub fn virtual_products(&self) -> Vec<bool> {
        let users = self.consumers();
        let mut virt = vec![false; self.nodes.len()];
        for n in self.nodes.iter().rev() {
            virt[n.id] = matches!(n.op, Op::Product(..))
                && !users[n.id].is_empty()
                && users[n.id].iter().all(|&u| match self.nodes[u].op {
                    Op::Contract(..) => true,
                    Op::Product(..) => virt[u],
                    _ => false,
                });
        }
        virt
    }

    /// Leaves of the product tree rooted at `id`, left to right.
    pub fn product_factors(&self, id: NodeId) -> Vec<NodeId> {
        match self.nodes[id].op {
            Op::Product(a, b) => {
                let mut f = self.product_factors(a);
                f.extend(self.product_factors(b));
                f
            }
            _ => vec![id],
        }
    }

    /// Rebuild with structural sharing and without dead computed nodes.
    /// Inputs are always kept, in their original order.
    pub fn canonicalize(&self) -> TensorGraph {
        let mut live = vec![false; self.nodes.len()];
        for n in self.nodes.iter().rev() {
            if n.is_output() || n.is_input() {
                live[n.id] = true;
            }
            if live[n.id] {
                for a in n.op.operands() {
                    live[a] = true;
                }
            }
        }
        let mut g = TensorGraph::new();
        let mut map = vec![usize::MAX; self.nodes.len()];
        for n in self.nodes.iter().filter(|n| n.is_input()) {
            map[n.id] = g.add_input(&n.display_name(), n.shape.clone()).expect("unique inputs");
        }
        for n in self.nodes.iter().filter(|n| live[n.id] && !n.is_input()) {
            let id = g.add(n.op.remap(&map)).expect("valid graph");
            if let Some(l) = &n.label {
                g.label(id, l);
            }
            map[n.id] = id;
        }
        g
    }

    /// One line per node: `id op shape operands`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let shape: Vec<String> = n.shape.iter().map(|e| e.to_string()).collect();
            let _ = write!(out, "{} {} [{}]", n.id, n.op.mnemonic(), shape.join(" "));
            for a in n.op.operands() {
                let _ = write!(out, " %{a}");
            }
            match &n.op {
                Op::Contract(_, pairs) => {
                    let p: Vec<String> = pairs.iter().map(|(a, b)| format!("[{a} {b}]")).collect();
                    let _ = write!(out, " pairs=[{}]", p.join(" "));
                }
                Op::Input(name) | Op::Output(name, _) => {
                    let _ = write!(out, " name={name}");
                }
                _ => {}
            }
            if let Some(l) = &n.label {
                let _ = write!(out, " label={l}");
            }
            out.push('\n');
        }
        out
    }

    /// Count of nodes per mnemonic.
    pub fn op_histogram(&self) -> BTreeMap<&'static str, usize> {
        let mut h = BTreeMap::new();
        for n in &self.nodes {
            *h.entry(n.op.mnemonic()).or_insert(0) += 1;
        }
        h
    }
}

pub fn from_ast(program: &TypedProgram) -> TensorGraph {
    let mut g = TensorGraph::new();
    let mut env: BTreeMap<String, NodeId> = BTreeMap::new();
    for d in program.inputs() {
        let id = g.add_input(&d.name, d.shape.clone()).expect("checked program");
        env.insert(d.name.clone(), id);
    }
    for s in &program.statements {
        let id = lower_expr(&mut g, &env, &s.expr);
        g.label(id, &s.target);
        env.insert(s.target.clone(), id);
    }
    for d in program.outputs() {
        g.add(Op::Output(d.name.clone(), env[&d.name])).expect("checked program");
    }
    g
}

fn lower_expr(g: &mut TensorGraph, env: &BTreeMap<String, NodeId>, e: &TypedExpr) -> NodeId {
    let op = match &e.kind {
        TypedKind::Ident(n) => return env[n],
        TypedKind::Paren(inner) => return lower_expr(g, env, inner),
        TypedKind::Product(a, b) => Op::Product(lower_expr(g, env, a), lower_expr(g, env, b)),
        TypedKind::ElemMul(a, b) => Op::ElemMul(lower_expr(g, env, a), lower_expr(g, env, b)),
        TypedKind::ElemAdd(a, b) => Op::ElemAdd(lower_expr(g, env, a), lower_expr(g, env, b)),
        TypedKind::Contract(a, pairs) => Op::Contract(lower_expr(g, env, a), pairs.clone()),
    };
    g.add(op).expect("checked program")
}

/// The declared direction of a graph node's name, for reporting.
pub fn direction(node: &Node) -> Direction {
    match node.op {
        Op::Input(_) => Direction::Input,
        Op::Output(..) => Direction::Output,
        _ => Direction::Temporary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::frontend::{load, Params};

    fn graph(src: &str, params: &[(&str, usize)]) -> TensorGraph {
        let params: Params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        from_ast(&load(src, &params).unwrap())
    }

    #[test]
    fn helmholtz_structure() {
        let g = graph(fixtures::HELMHOLTZ, &[("p", 11)]);
        let h = g.op_histogram();
        assert_eq!(h["input"], 3);
        assert_eq!(h["contract"], 2);
        assert_eq!(h["mul"], 1);
        assert_eq!(h["output"], 1);
        // S#S and S#S#S shared between both chains, then one #u and one #r.
        assert_eq!(h["product"], 4);
        let contracts: Vec<_> = g.nodes().iter().filter(|n| matches!(n.op, Op::Contract(..))).collect();
        for c in contracts {
            let Op::Contract(a, _) = c.op else { unreachable!() };
            assert_eq!(g.product_factors(a).len(), 4);
        }
        assert!(g.nodes().iter().all(|n| n.op.operands().iter().all(|&a| a < n.id)));
    }

    #[test]
    fn identity_program_has_two_nodes() {
        let g = graph("var input u : [4]\nvar output v : [4]\nv = u", &[]);
        assert_eq!(g.len(), 2);
        assert_eq!(g.node(1).op, Op::Output("v".into(), 0));
    }

    #[test]
    fn cse_merges_named_and_inline_forms() {
        let decls = "var input S : [2 2]\nvar input u : [2]\nvar output v : [2]\n";
        let named = graph(&format!("{decls}t = S # S\nv = (t # u) . [[1 2] [3 4]]"), &[]);
        let inline = graph(&format!("{decls}v = (S # S # u) . [[1 2] [3 4]]"), &[]);
        let strip = |g: &TensorGraph| g.nodes().iter().map(|n| (n.op.clone(), n.shape.clone())).collect::<Vec<_>>();
        assert_eq!(strip(&named), strip(&inline));
        assert_eq!(strip(&named.canonicalize()), strip(&named));
    }

    #[test]
    fn canonicalize_drops_dead_values() {
        let g = graph("var input a : [2]\nvar output v : [2]\nw = a * a\nv = a + a", &[]);
        assert_eq!(g.len(), 4);
        let c = g.canonicalize();
        assert_eq!(c.len(), 3);
        assert_eq!(c.node(1).op, Op::ElemAdd(0, 0));
    }

    #[test]
    fn dump_format() {
        let g = graph("var input S : [3 3]\nvar input u : [3]\nvar output v : [3]\nv = (S # u) . [[1 2]]", &[]);
        let d = g.dump();
        assert!(d.contains("2 product [3 3 3] %0 %1"), "{d}");
        assert!(d.contains("3 contract [3] %2 pairs=[[1 2]] label=v"), "{d}");
    }
}
