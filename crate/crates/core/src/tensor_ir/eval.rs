//! Reference interpreter over the tensor graph.

use std::collections::BTreeMap;

use thiserror::Error;

use super::format::{with_arith, ArithError, Arithmetic, ScalarFormat};
use super::graph::{NodeId, Op, TensorGraph};
use super::tensor::{strides, IndexIter, Tensor};

pub type TensorMap = BTreeMap<String, Tensor>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("missing input '{0}'")]
    MissingInput(String),
    #[error("input '{name}' has shape {got:?}, expected {expected:?}")]
    InputShape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("input '{name}' value at {index:?} not representable: {cause}")]
    Unrepresentable { name: String, index: Vec<usize>, cause: ArithError },
    #[error("{cause} at node %{node} index {index:?}")]
    Arith { node: NodeId, index: Vec<usize>, cause: ArithError },
}

/// Evaluate every output, quantizing to `fmt` after each multiply and add.
/// Contractions sum in lexicographic order of the reduction indices; factor
/// products within a term multiply left to right.
pub fn eval_reference(graph: &TensorGraph, inputs: &TensorMap, fmt: ScalarFormat) -> Result<TensorMap, EvalError> {
    with_arith!(fmt, |a| eval_with(graph, inputs, &a))
}

/// Encode the inputs of `graph` into words of `a`.
pub fn encode_inputs<A: Arithmetic>(graph: &TensorGraph, inputs: &TensorMap, a: &A) -> Result<BTreeMap<NodeId, Vec<A::Word>>, EvalError> {
    let mut out = BTreeMap::new();
    for n in graph.inputs() {
        let name = n.display_name();
        let t = inputs.get(&name).ok_or_else(|| EvalError::MissingInput(name.clone()))?;
        if t.shape != n.shape {
            return Err(EvalError::InputShape { name, expected: n.shape.clone(), got: t.shape.clone() });
        }
        let words = t
            .data
            .iter()
            .zip(IndexIter::new(&n.shape))
            .map(|(&v, index)| a.encode(v).map_err(|cause| EvalError::Unrepresentable { name: name.clone(), index, cause }))
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(n.id, words);
    }
    Ok(out)
}

pub fn eval_with<A: Arithmetic>(graph: &TensorGraph, inputs: &TensorMap, a: &A) -> Result<TensorMap, EvalError> {
    let values = eval_values(graph, inputs, a)?;
    Ok(graph
        .outputs()
        .map(|n| {
            let Op::Output(name, _) = &n.op else { unreachable!() };
            let words = values[n.id].as_ref().expect("outputs are evaluated");
            (name.clone(), Tensor::new(n.shape.clone(), words.iter().map(|&w| a.decode(w)).collect()))
        })
        .collect())
}

/// Decoded value of every materialized node; `None` for virtual products.
pub fn eval_nodes(graph: &TensorGraph, inputs: &TensorMap, fmt: ScalarFormat) -> Result<Vec<Option<Vec<f64>>>, EvalError> {
    with_arith!(fmt, |a| {
        let values = eval_values(graph, inputs, &a)?;
        Ok(values.into_iter().map(|v| v.map(|w| w.iter().map(|&x| a.decode(x)).collect())).collect())
    })
}

fn eval_values<A: Arithmetic>(graph: &TensorGraph, inputs: &TensorMap, a: &A) -> Result<Vec<Option<Vec<A::Word>>>, EvalError> {
    let virtuals = graph.virtual_products();
    let mut values: Vec<Option<Vec<A::Word>>> = vec![None; graph.len()];
    for (id, words) in encode_inputs(graph, inputs, a)? {
        values[id] = Some(words);
    }
    for n in graph.nodes() {
        let err = |k: usize, cause| EvalError::Arith { node: n.id, index: unflatten(&n.shape, k), cause };
        let v = match &n.op {
            Op::Input(_) => continue,
            Op::Product(..) if virtuals[n.id] => continue,
            Op::Product(x, y) => {
                let (x, y) = (values[*x].as_ref().unwrap(), values[*y].as_ref().unwrap());
                let mut out = Vec::with_capacity(x.len() * y.len());
                for &l in x {
                    for &r in y {
                        out.push(a.mul(l, r).map_err(|c| err(out.len(), c))?);
                    }
                }
                out
            }
            Op::ElemMul(x, y) | Op::ElemAdd(x, y) => {
                let (x, y) = (values[*x].as_ref().unwrap(), values[*y].as_ref().unwrap());
                let is_mul = matches!(n.op, Op::ElemMul(..));
                x.iter()
                    .zip(y)
                    .enumerate()
                    .map(|(k, (&l, &r))| if is_mul { a.mul(l, r) } else { a.add(l, r) }.map_err(|c| err(k, c)))
                    .collect::<Result<_, _>>()?
            }
            Op::Contract(x, pairs) => {
                let plan = ContractPlan::new(graph, *x, pairs);
                let factors: Vec<&[A::Word]> = plan.factors.iter().map(|&f| values[f].as_deref().unwrap()).collect();
                plan.run(a, &factors).map_err(|(k, c)| err(k, c))?
            }
            Op::Output(_, x) => values[*x].clone().unwrap(),
        };
        values[n.id] = Some(v);
    }
    Ok(values)
}

fn unflatten(shape: &[usize], mut k: usize) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for i in (0..shape.len()).rev() {
        idx[i] = k % shape[i];
        k /= shape[i];
    }
    idx
}

/// Index bookkeeping for one contraction over the flattened factors of its operand.
#[derive(Debug, Clone)]
pub struct ContractPlan {
    /// Materialized factor nodes, left to right.
    pub factors: Vec<NodeId>,
    pub result_shape: Vec<usize>,
    /// Extent of each pair, in pair order.
    pub reduce_shape: Vec<usize>,
    /// Per factor: stride contributed by each result index.
    pub result_strides: Vec<Vec<usize>>,
    /// Per factor: stride contributed by each reduction index.
    pub reduce_strides: Vec<Vec<usize>>,
}

impl ContractPlan {
    pub fn new(graph: &TensorGraph, operand: NodeId, pairs: &[(usize, usize)]) -> Self {
        let virtuals = graph.virtual_products();
        let factors = flatten_virtual(graph, operand, &virtuals);
        let full_shape = graph.node(operand).shape.clone();
        // Per full position: (factor, stride within that factor).
        let mut owner = Vec::with_capacity(full_shape.len());
        for (f, &id) in factors.iter().enumerate() {
            for s in strides(&graph.node(id).shape) {
                owner.push((f, s));
            }
        }
        let paired: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        let open: Vec<usize> = (0..full_shape.len()).filter(|p| !paired.contains(p)).collect();
        let mut result_strides = vec![vec![0; open.len()]; factors.len()];
        for (j, &pos) in open.iter().enumerate() {
            let (f, s) = owner[pos];
            result_strides[f][j] += s;
        }
        let mut reduce_strides = vec![vec![0; pairs.len()]; factors.len()];
        for (k, &(pa, pb)) in pairs.iter().enumerate() {
            for pos in [pa, pb] {
                let (f, s) = owner[pos];
                reduce_strides[f][k] += s;
            }
        }
        ContractPlan {
            factors,
            result_shape: open.iter().map(|&p| full_shape[p]).collect(),
            reduce_shape: pairs.iter().map(|&(a, _)| full_shape[a]).collect(),
            result_strides,
            reduce_strides,
        }
    }

    /// Compute all result elements; errors carry the flat result index.
    pub fn run<A: Arithmetic>(&self, a: &A, factors: &[&[A::Word]]) -> Result<Vec<A::Word>, (usize, ArithError)> {
        let reduce: Vec<Vec<usize>> = IndexIter::new(&self.reduce_shape).collect();
        let mut out = Vec::new();
        for (k, r) in IndexIter::new(&self.result_shape).enumerate() {
            let base: Vec<usize> = self.result_strides.iter().map(|s| dot(s, &r)).collect();
            let mut acc = a.zero();
            for q in &reduce {
                let mut term = None;
                for (f, words) in factors.iter().enumerate() {
                    let w = words[base[f] + dot(&self.reduce_strides[f], q)];
                    term = Some(match term {
                        None => w,
                        Some(t) => a.mul(t, w).map_err(|c| (k, c))?,
                    });
                }
                acc = a.add(acc, term.unwrap()).map_err(|c| (k, c))?;
            }
            out.push(acc);
        }
        Ok(out)
    }
}

fn dot(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn flatten_virtual(graph: &TensorGraph, id: NodeId, virtuals: &[bool]) -> Vec<NodeId> {
    match graph.node(id).op {
        Op::Product(a, b) if virtuals[id] => {
            let mut f = flatten_virtual(graph, a, virtuals);
            f.extend(flatten_virtual(graph, b, virtuals));
            f
        }
        _ => vec![id],
    }
}
