//! Seeded generators and brute-force oracles shared by the integration
//! tests. The oracles enumerate tables directly and never call the
//! library's entropy engine.

#![allow(dead_code)]

use coopcast::{CodingChoice, CooperativeNetwork, JointPmf, LinearFf, NodeSet, SourceModel, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized table with roughly 15% zero entries.
pub fn random_table(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..size).map(|_| if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random::<f64>() }).collect();
    if t.iter().all(|&p| p == 0.0) {
        t[0] = 1.0;
    }
    let s: f64 = t.iter().sum();
    t.iter_mut().for_each(|p| *p /= s);
    t
}

pub fn random_dist(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    random_table(rng, size)
}

/// Joint over `X_0 … X_{k−1}` with the given alphabets.
pub fn random_joint(rng: &mut ChaCha8Rng, alphabets: &[usize]) -> JointPmf {
    let vars = alphabets.iter().enumerate().map(|(i, &a)| (VarId::x(i), a)).collect();
    JointPmf::new(vars, random_table(rng, alphabets.iter().product())).unwrap()
}

/// Digits of `index` in mixed radix, first digit most significant.
pub fn digits(mut index: usize, alphabets: &[usize]) -> Vec<usize> {
    let mut d = vec![0; alphabets.len()];
    for i in (0..alphabets.len()).rev() {
        d[i] = index % alphabets[i];
        index /= alphabets[i];
    }
    d
}

pub fn entropy(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs.into_iter().filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
}

/// `H` of the marginal of `table` on the listed positions.
pub fn oracle_h(table: &[f64], alphabets: &[usize], keep: &[usize]) -> f64 {
    let mut m = std::collections::HashMap::new();
    for (i, &p) in table.iter().enumerate() {
        let d = digits(i, alphabets);
        let key: Vec<usize> = keep.iter().map(|&k| d[k]).collect();
        *m.entry(key).or_insert(0.0) += p;
    }
    entropy(m.into_values())
}

pub fn positions(bits: u32) -> Vec<usize> {
    (0..32).filter(|i| bits >> i & 1 == 1).collect()
}

/// `H(Y_{sink} | X_{sink})` of a deterministic map under a product input
/// law, by enumeration of `x_V`.
pub fn oracle_det_cut(
    input_alphabets: &[usize],
    input_dists: &[Vec<f64>],
    outputs: impl Fn(&[usize]) -> Vec<usize>,
    sink: NodeSet,
) -> f64 {
    let total: usize = input_alphabets.iter().product();
    let mut joint = std::collections::HashMap::new();
    let mut cond = std::collections::HashMap::new();
    for x in 0..total {
        let d = digits(x, input_alphabets);
        let p: f64 = d.iter().enumerate().map(|(v, &xv)| input_dists[v][xv]).product();
        if p == 0.0 {
            continue;
        }
        let y = outputs(&d);
        let xs: Vec<usize> = sink.iter().map(|v| d[v]).collect();
        let ys: Vec<usize> = sink.iter().map(|v| y[v]).collect();
        *joint.entry((xs.clone(), ys)).or_insert(0.0) += p;
        *cond.entry(xs).or_insert(0.0) += p;
    }
    entropy(joint.into_values()) - entropy(cond.into_values())
}

/// Random deterministic network: output table drawn uniformly.
pub fn random_deterministic(rng: &mut ChaCha8Rng, input_alphabets: Vec<usize>, output_alphabets: Vec<usize>) -> (CooperativeNetwork, Vec<Vec<usize>>) {
    let total: usize = input_alphabets.iter().product();
    let outputs: Vec<Vec<usize>> =
        (0..total).map(|_| output_alphabets.iter().map(|&a| rng.random_range(0..a)).collect()).collect();
    let n = input_alphabets.len();
    let net = CooperativeNetwork::deterministic(input_alphabets, output_alphabets, outputs.clone(), SourceModel::none(), vec![n - 1]).unwrap();
    (net, outputs)
}

/// Random general network with random kernel rows.
pub fn random_general(rng: &mut ChaCha8Rng, input_alphabets: Vec<usize>, output_alphabets: Vec<usize>) -> CooperativeNetwork {
    let xs: usize = input_alphabets.iter().product();
    let ys: usize = output_alphabets.iter().product();
    let channel: Vec<f64> = (0..xs).flat_map(|_| random_table(rng, ys)).collect();
    let n = input_alphabets.len();
    CooperativeNetwork::general(input_alphabets, output_alphabets, channel, SourceModel::none(), vec![n - 1])
}

/// Random GF(q) network with the given per-node block sizes.
pub fn random_ff(rng: &mut ChaCha8Rng, q: u32, input_dims: Vec<usize>, output_dims: Vec<usize>) -> LinearFf {
    let rows: usize = output_dims.iter().sum();
    let cols: usize = input_dims.iter().sum();
    let matrix = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0..q)).collect()).collect();
    LinearFf { q, input_dims, output_dims, matrix }
}

/// Random quantizers of the given alphabet at every node, uniform-ish inputs.
pub fn random_coding(rng: &mut ChaCha8Rng, net: &CooperativeNetwork, yhat: usize) -> CodingChoice {
    let mut c = CodingChoice::uniform_copy(net);
    for v in 0..net.num_nodes() {
        c.input_dists[v] = random_dist(rng, net.input_alphabets[v]);
        let rows = net.input_alphabets[v] * net.output_alphabets[v];
        c.quantizers[v] = coopcast::Quantizer { alphabet: yhat, kernel: (0..rows).flat_map(|_| random_dist(rng, yhat)).collect() };
    }
    c
}

/// Binary entropy.
pub fn h2(p: f64) -> f64 {
    entropy([p, 1.0 - p])
}
