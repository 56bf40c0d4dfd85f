//! Shared input generators for the benchmarks.

use hbmflow::fixtures;
use hbmflow::frontend::{load, Params};
use hbmflow::rewriter::factorize_contractions;
use hbmflow::tensor_ir::{from_ast, Tensor, TensorGraph, TensorMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn helmholtz_params(p: usize) -> Params {
    [("p".to_string(), p)].into()
}

pub fn helmholtz_graph(p: usize) -> TensorGraph {
    from_ast(&load(fixtures::HELMHOLTZ, &helmholtz_params(p)).unwrap())
}

pub fn factorized_helmholtz(p: usize) -> TensorGraph {
    factorize_contractions(&helmholtz_graph(p))
}

/// Uniform inputs in [-1, 1] for every input of `graph`.
pub fn random_inputs(graph: &TensorGraph, seed: u64) -> TensorMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    graph
        .inputs()
        .map(|n| (n.display_name(), Tensor::new(n.shape.clone(), (0..n.size()).map(|_| rng.gen_range(-1.0..=1.0)).collect())))
        .collect()
}
