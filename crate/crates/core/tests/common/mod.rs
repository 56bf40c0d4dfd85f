//! Independent brute-force evaluators, written directly from the index
//! formulas and sharing no code with the library's interpreter.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Array = Vec<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(n: usize, rng: &mut ChaCha8Rng) -> Array {
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// t_ijk = sum_lmn S_il S_jm S_kn u_lmn; r = D .* t; v_ijk = sum_lmn S_li S_mj S_nk r_lmn
pub fn helmholtz(p: usize, s: &[f64], d: &[f64], u: &[f64]) -> Array {
    let at2 = |m: &[f64], i: usize, j: usize| m[i * p + j];
    let at3 = |i: usize, j: usize, k: usize| (i * p + j) * p + k;
    let mut t = vec![0.0; p * p * p];
    for i in 0..p {
        for j in 0..p {
            for k in 0..p {
                let mut acc = 0.0;
                for l in 0..p {
                    for m in 0..p {
                        for n in 0..p {
                            acc += at2(s, i, l) * at2(s, j, m) * at2(s, k, n) * u[at3(l, m, n)];
                        }
                    }
                }
                t[at3(i, j, k)] = acc;
            }
        }
    }
    let r: Vec<f64> = d.iter().zip(&t).map(|(a, b)| a * b).collect();
    let mut v = vec![0.0; p * p * p];
    for i in 0..p {
        for j in 0..p {
            for k in 0..p {
                let mut acc = 0.0;
                for l in 0..p {
                    for m in 0..p {
                        for n in 0..p {
                            acc += at2(s, l, i) * at2(s, m, j) * at2(s, n, k) * r[at3(l, m, n)];
                        }
                    }
                }
                v[at3(i, j, k)] = acc;
            }
        }
    }
    v
}

/// v_ijk = sum_lmn A_il A_jm A_kn u_lmn with A of shape [m n].
pub fn interpolation(mm: usize, nn: usize, a: &[f64], u: &[f64]) -> Array {
    let mut v = vec![0.0; mm * mm * mm];
    for i in 0..mm {
        for j in 0..mm {
            for k in 0..mm {
                let mut acc = 0.0;
                for l in 0..nn {
                    for m in 0..nn {
                        for n in 0..nn {
                            acc += a[i * nn + l] * a[j * nn + m] * a[k * nn + n] * u[(l * nn + m) * nn + n];
                        }
                    }
                }
                v[(i * mm + j) * mm + k] = acc;
            }
        }
    }
    v
}

/// Directional derivatives of u:[a b c]:
/// gx_ijk = sum_l Dx_il u_ljk; gy_jik = sum_m Dy_jm u_imk; gz_ijk = sum_n u_ijn Dz_kn.
pub fn gradient(a: usize, b: usize, c: usize, dx: &[f64], dy: &[f64], dz: &[f64], u: &[f64]) -> (Array, Array, Array) {
    let at = |i: usize, j: usize, k: usize| (i * b + j) * c + k;
    let mut gx = vec![0.0; a * b * c];
    let mut gy = vec![0.0; a * b * c];
    let mut gz = vec![0.0; a * b * c];
    for i in 0..a {
        for j in 0..b {
            for k in 0..c {
                gx[at(i, j, k)] = (0..a).map(|l| dx[i * a + l] * u[at(l, j, k)]).sum();
                gy[(j * a + i) * c + k] = (0..b).map(|m| dy[j * b + m] * u[at(i, m, k)]).sum();
                gz[at(i, j, k)] = (0..c).map(|n| u[at(i, j, n)] * dz[k * c + n]).sum();
            }
        }
    }
    (gx, gy, gz)
}

pub fn max_rel_error(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    got.iter().zip(want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

/// Named random inputs for a fixture at the given extents.
pub fn fixture_inputs(kernel: &str, dims: &BTreeMap<String, usize>, rng: &mut ChaCha8Rng) -> BTreeMap<String, (Vec<usize>, Array)> {
    let d = |k: &str| dims[k];
    let shapes: Vec<(&str, Vec<usize>)> = match kernel {
        "helmholtz" => vec![("S", vec![d("p"); 2]), ("D", vec![d("p"); 3]), ("u", vec![d("p"); 3])],
        "interpolation" => vec![("A", vec![d("m"), d("n")]), ("u", vec![d("n"); 3])],
        "gradient" => vec![("Dx", vec![d("a"); 2]), ("Dy", vec![d("b"); 2]), ("Dz", vec![d("c"); 2]), ("u", vec![d("a"), d("b"), d("c")])],
        _ => panic!("unknown kernel {kernel}"),
    };
    shapes
        .into_iter()
        .map(|(n, s)| {
            let len = s.iter().product();
            (n.to_string(), (s, uniform(len, rng)))
        })
        .collect()
}

/// Brute-force outputs for a fixture.
pub fn fixture_oracle(
    kernel: &str,
    dims: &BTreeMap<String, usize>,
    inputs: &BTreeMap<String, (Vec<usize>, Array)>,
) -> BTreeMap<String, Array> {
    let x = |n: &str| inputs[n].1.as_slice();
    match kernel {
        "helmholtz" => BTreeMap::from([("v".to_string(), helmholtz(dims["p"], x("S"), x("D"), x("u")))]),
        "interpolation" => BTreeMap::from([("v".to_string(), interpolation(dims["m"], dims["n"], x("A"), x("u")))]),
        "gradient" => {
            let (gx, gy, gz) = gradient(dims["a"], dims["b"], dims["c"], x("Dx"), x("Dy"), x("Dz"), x("u"));
            BTreeMap::from([("gx".to_string(), gx), ("gy".to_string(), gy), ("gz".to_string(), gz)])
        }
        _ => panic!("unknown kernel {kernel}"),
    }
}

/// Multiplies and adds of a naive evaluation of one multi-pair contraction
/// over a chain of `factors` tensors, counted by walking the loops.
pub fn brute_force_contraction_ops(result_size: usize, reduction_size: usize, factors: usize) -> (u64, u64) {
    let (mut muls, mut adds) = (0u64, 0u64);
    for _ in 0..result_size {
        let mut first = true;
        for _ in 0..reduction_size {
            muls += (factors - 1) as u64;
            if first {
                first = false;
            } else {
                adds += 1;
            }
        }
    }
    (muls, adds)
}
