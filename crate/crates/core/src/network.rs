//! Cooperative networks, per-node coding choices, and assembly of the joint
//! law `p(u_A) Π_v p(x_v) p(ŷ_v | x_v, y_v) · p(y_V | x_V)`.
//!
//! Multi-node indices (`x_V`, `y_V`) are flattened row-major with node 1 as
//! the most significant digit. Quantizer kernels are indexed by
//! `(x_v, y_v, ŷ_v)` in that order.

use std::fmt;

use crate::error::{Error, Result};
use crate::gf;
use crate::nodes::{NodeSet, MAX_NODES};
use crate::pmf::{JointPmf, Role, VarId, DEFAULT_TABLE_CAP, NORM_TOL};

/// Sources `U_A` with their joint pmf, row-major over `nodes` in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceModel {
    pub nodes: Vec<usize>,
    pub alphabets: Vec<usize>,
    pub pmf: Vec<f64>,
}

impl SourceModel {
    /// No sources at all (pure rate problems).
    pub fn none() -> Self {
        SourceModel::default()
    }

    /// Mutually independent sources with the given marginals.
    pub fn independent(nodes: Vec<usize>, marginals: Vec<Vec<f64>>) -> Self {
        let alphabets = marginals.iter().map(Vec::len).collect();
        let mut pmf = vec![1.0];
        for m in &marginals {
            pmf = pmf.iter().flat_map(|&a| m.iter().map(move |&b| a * b)).collect();
        }
        SourceModel { nodes, alphabets, pmf }
    }

    pub fn set(&self) -> NodeSet {
        NodeSet::from_nodes(self.nodes.iter().copied())
    }

    /// Joint table over the `U_v` variables.
    pub fn joint(&self) -> Result<JointPmf> {
        let vars = self.nodes.iter().zip(&self.alphabets).map(|(&v, &a)| (VarId::u(v), a)).collect();
        if self.nodes.is_empty() {
            return JointPmf::new(vec![], vec![1.0]);
        }
        JointPmf::new(vars, self.pmf.clone())
    }
}

/// Defining data for a linear deterministic network over GF(q):
/// `y_v = Σ_u G_{v,u} x_u` with `x_u ∈ GF(q)^{input_dims[u]}` and
/// `y_v ∈ GF(q)^{output_dims[v]}`. `matrix` has `Σ output_dims` rows and
/// `Σ input_dims` columns, stacked in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFf {
    pub q: u32,
    pub input_dims: Vec<usize>,
    pub output_dims: Vec<usize>,
    pub matrix: Vec<Vec<u32>>,
}

impl LinearFf {
    fn offsets(dims: &[usize]) -> Vec<usize> {
        let mut acc = 0;
        dims.iter()
            .map(|d| {
                let o = acc;
                acc += d;
                o
            })
            .collect()
    }

    /// Transfer submatrix from the inputs of `from` to the outputs of `to`.
    pub fn transfer(&self, from: NodeSet, to: NodeSet) -> Vec<Vec<u32>> {
        let row_off = Self::offsets(&self.output_dims);
        let col_off = Self::offsets(&self.input_dims);
        let mut rows = Vec::new();
        for v in to.iter() {
            for r in 0..self.output_dims[v] {
                let mut row = Vec::new();
                for u in from.iter() {
                    for c in 0..self.input_dims[u] {
                        row.push(self.matrix[row_off[v] + r][col_off[u] + c] % self.q);
                    }
                }
                rows.push(row);
            }
        }
        rows
    }

    fn alphabet(&self, dim: usize) -> usize {
        (self.q as usize).pow(dim as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkKind {
    General,
    /// Output table: for each flattened `x_V`, the output symbol of every node.
    Deterministic { outputs: Vec<Vec<usize>> },
    LinearFiniteField(LinearFf),
    /// Node `v` observes the tuple of inputs of `in_neighbors[v]`.
    Aref { in_neighbors: Vec<Vec<usize>> },
}

/// A discrete memoryless cooperative network `p(y_V | x_V)` with sources
/// and receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct CooperativeNetwork {
    pub input_alphabets: Vec<usize>,
    pub output_alphabets: Vec<usize>,
    /// Flattened kernel: row `x_V`, column `y_V`.
    pub channel: Vec<f64>,
    pub sources: SourceModel,
    pub receivers: Vec<usize>,
    pub kind: NetworkKind,
}

pub fn flat_size(alphabets: &[usize]) -> usize {
    alphabets.iter().product()
}

/// Per-node digits of a flattened multi-node index.
pub fn unflatten(mut index: usize, alphabets: &[usize]) -> Vec<usize> {
    let mut out = vec![0; alphabets.len()];
    for (d, &a) in out.iter_mut().zip(alphabets).rev() {
        *d = index % a;
        index /= a;
    }
    out
}

pub fn flatten(digits: &[usize], alphabets: &[usize]) -> usize {
    digits.iter().zip(alphabets).fold(0, |acc, (&d, &a)| acc * a + d)
}

impl CooperativeNetwork {
    pub fn general(
        input_alphabets: Vec<usize>,
        output_alphabets: Vec<usize>,
        channel: Vec<f64>,
        sources: SourceModel,
        receivers: Vec<usize>,
    ) -> Self {
        CooperativeNetwork { input_alphabets, output_alphabets, channel, sources, receivers, kind: NetworkKind::General }
    }

    /// Deterministic network from an explicit output table.
    pub fn deterministic(
        input_alphabets: Vec<usize>,
        output_alphabets: Vec<usize>,
        outputs: Vec<Vec<usize>>,
        sources: SourceModel,
        receivers: Vec<usize>,
    ) -> Result<Self> {
        let xs = flat_size(&input_alphabets);
        let ys = flat_size(&output_alphabets);
        if outputs.len() != xs {
            return Err(Error::InvalidNetwork(format!(
                "output table has {} rows, expected {xs}",
                outputs.len()
            )));
        }
        check_kernel_size(xs, ys)?;
        let mut channel = vec![0.0; xs * ys];
        for (x, out) in outputs.iter().enumerate() {
            if out.len() != output_alphabets.len() || out.iter().zip(&output_alphabets).any(|(y, a)| y >= a) {
                return Err(Error::InvalidNetwork(format!("output row {x} is out of range")));
            }
            channel[x * ys + flatten(out, &output_alphabets)] = 1.0;
        }
        Ok(CooperativeNetwork {
            input_alphabets,
            output_alphabets,
            channel,
            sources,
            receivers,
            kind: NetworkKind::Deterministic { outputs },
        })
    }

    /// Deterministic network from a function of the input symbols.
    pub fn from_function<F: Fn(&[usize]) -> Vec<usize>>(
        input_alphabets: Vec<usize>,
        output_alphabets: Vec<usize>,
        g: F,
        sources: SourceModel,
        receivers: Vec<usize>,
    ) -> Result<Self> {
        let outputs = (0..flat_size(&input_alphabets)).map(|x| g(&unflatten(x, &input_alphabets))).collect();
        Self::deterministic(input_alphabets, output_alphabets, outputs, sources, receivers)
    }

    /// Linear deterministic network over GF(q).
    pub fn linear_ff(ff: LinearFf, sources: SourceModel, receivers: Vec<usize>) -> Result<Self> {
        if !gf::is_prime(ff.q) {
            return Err(Error::NotPrime(ff.q));
        }
        let n = ff.input_dims.len();
        if ff.output_dims.len() != n {
            return Err(Error::InvalidNetwork("input and output dimension lists differ in length".into()));
        }
        let rows: usize = ff.output_dims.iter().sum();
        let cols: usize = ff.input_dims.iter().sum();
        if ff.matrix.len() != rows || ff.matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidNetwork(format!("transfer matrix must be {rows}x{cols}")));
        }
        let in_alph: Vec<usize> = ff.input_dims.iter().map(|&d| ff.alphabet(d)).collect();
        let out_alph: Vec<usize> = ff.output_dims.iter().map(|&d| ff.alphabet(d)).collect();
        let all = NodeSet::full(n);
        let g = ff.transfer(all, all);
        let outputs = (0..flat_size(&in_alph))
            .map(|x| {
                let digits = unflatten(x, &in_alph);
                let xvec: Vec<u32> = digits
                    .iter()
                    .zip(&ff.input_dims)
                    .flat_map(|(&d, &dim)| gf::to_digits(d, ff.q, dim))
                    .collect();
                let yvec = if cols == 0 { vec![0; rows] } else { gf::mat_vec(&g, &xvec, ff.q) };
                let mut out = Vec::with_capacity(n);
                let mut off = 0;
                for &dim in &ff.output_dims {
                    out.push(gf::from_digits(&yvec[off..off + dim], ff.q));
                    off += dim;
                }
                out
            })
            .collect();
        let mut net = Self::deterministic(in_alph, out_alph, outputs, sources, receivers)?;
        net.kind = NetworkKind::LinearFiniteField(ff);
        Ok(net)
    }

    /// Aref-style network: each node observes the inputs of its in-neighbors.
    pub fn aref(
        input_alphabets: Vec<usize>,
        in_neighbors: Vec<Vec<usize>>,
        sources: SourceModel,
        receivers: Vec<usize>,
    ) -> Result<Self> {
        if in_neighbors.len() != input_alphabets.len() {
            return Err(Error::InvalidNetwork("one neighbor list per node required".into()));
        }
        for (v, nb) in in_neighbors.iter().enumerate() {
            if nb.iter().any(|&u| u >= input_alphabets.len() || u == v) {
                return Err(Error::InvalidNetwork(format!("bad neighbor list for node {}", v + 1)));
            }
        }
        let out_alph: Vec<usize> = in_neighbors
            .iter()
            .map(|nb| nb.iter().map(|&u| input_alphabets[u]).product())
            .collect();
        let outputs = (0..flat_size(&input_alphabets))
            .map(|x| {
                let d = unflatten(x, &input_alphabets);
                in_neighbors
                    .iter()
                    .map(|nb| {
                        let digits: Vec<usize> = nb.iter().map(|&u| d[u]).collect();
                        let alph: Vec<usize> = nb.iter().map(|&u| input_alphabets[u]).collect();
                        flatten(&digits, &alph)
                    })
                    .collect()
            })
            .collect();
        let mut net = Self::deterministic(input_alphabets, out_alph, outputs, sources, receivers)?;
        net.kind = NetworkKind::Aref { in_neighbors };
        Ok(net)
    }

    pub fn num_nodes(&self) -> usize {
        self.input_alphabets.len()
    }

    pub fn nodes(&self) -> NodeSet {
        NodeSet::full(self.num_nodes())
    }

    pub fn receiver_set(&self) -> NodeSet {
        NodeSet::from_nodes(self.receivers.iter().copied())
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self.kind, NetworkKind::General)
    }

    pub fn x_size(&self) -> usize {
        flat_size(&self.input_alphabets)
    }

    pub fn y_size(&self) -> usize {
        flat_size(&self.output_alphabets)
    }

    pub fn kernel(&self, x: usize, y: usize) -> f64 {
        self.channel[x * self.y_size() + y]
    }

    /// Same network with a different source model.
    pub fn with_sources(&self, sources: SourceModel) -> Self {
        CooperativeNetwork { sources, ..self.clone() }
    }

    /// Same network with a different receiver set.
    pub fn with_receivers(&self, receivers: Vec<usize>) -> Self {
        CooperativeNetwork { receivers, ..self.clone() }
    }

    pub(crate) fn check_size(&self) -> Result<()> {
        if self.num_nodes() > MAX_NODES {
            return Err(Error::TooManyNodes { got: self.num_nodes(), cap: MAX_NODES });
        }
        if self.num_nodes() == 0 {
            return Err(Error::InvalidNetwork("network has no nodes".into()));
        }
        Ok(())
    }
}

fn check_kernel_size(xs: usize, ys: usize) -> Result<()> {
    let n = xs as u128 * ys as u128;
    if n > DEFAULT_TABLE_CAP as u128 {
        return Err(Error::SizeCap { entries: n, cap: DEFAULT_TABLE_CAP });
    }
    Ok(())
}

/// Quantizer `p(ŷ | x, y)` at one node.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Quantizer {
    pub alphabet: usize,
    /// Indexed `(x, y, ŷ)`, row-major.
    pub kernel: Vec<f64>,
}

impl Quantizer {
    /// `Ŷ = ∅`, modeled as a singleton alphabet.
    pub fn none(x_alphabet: usize, y_alphabet: usize) -> Self {
        Quantizer { alphabet: 1, kernel: vec![1.0; x_alphabet * y_alphabet] }
    }

    /// `Ŷ = Y`.
    pub fn copy(x_alphabet: usize, y_alphabet: usize) -> Self {
        let mut kernel = vec![0.0; x_alphabet * y_alphabet * y_alphabet];
        for x in 0..x_alphabet {
            for y in 0..y_alphabet {
                kernel[(x * y_alphabet + y) * y_alphabet + y] = 1.0;
            }
        }
        Quantizer { alphabet: y_alphabet, kernel }
    }

    /// `Ŷ = Y` passed through a symmetric channel that keeps the symbol with
    /// probability `1 - flip` and otherwise moves to a uniformly chosen other
    /// symbol.
    pub fn symmetric(x_alphabet: usize, y_alphabet: usize, flip: f64) -> Self {
        let mut kernel = vec![0.0; x_alphabet * y_alphabet * y_alphabet];
        for x in 0..x_alphabet {
            for y in 0..y_alphabet {
                for yh in 0..y_alphabet {
                    kernel[(x * y_alphabet + y) * y_alphabet + yh] = if y_alphabet == 1 {
                        1.0
                    } else if yh == y {
                        1.0 - flip
                    } else {
                        flip / (y_alphabet - 1) as f64
                    };
                }
            }
        }
        Quantizer { alphabet: y_alphabet, kernel }
    }

    pub fn prob(&self, x: usize, y: usize, y_alphabet: usize, yhat: usize) -> f64 {
        self.kernel[(x * y_alphabet + y) * self.alphabet + yhat]
    }
}

/// Per-node input distributions and quantizers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CodingChoice {
    pub input_dists: Vec<Vec<f64>>,
    pub quantizers: Vec<Quantizer>,
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

impl CodingChoice {
    /// Uniform inputs, no quantization (`Ŷ_v = ∅` everywhere).
    pub fn uniform_none(net: &CooperativeNetwork) -> Self {
        CodingChoice {
            input_dists: net.input_alphabets.iter().map(|&a| uniform(a)).collect(),
            quantizers: net
                .input_alphabets
                .iter()
                .zip(&net.output_alphabets)
                .map(|(&x, &y)| Quantizer::none(x, y))
                .collect(),
        }
    }

    /// Uniform inputs, `Ŷ_v = Y_v` everywhere.
    pub fn uniform_copy(net: &CooperativeNetwork) -> Self {
        Self::with_inputs_copy(net, net.input_alphabets.iter().map(|&a| uniform(a)).collect())
    }

    /// Given inputs, `Ŷ_v = Y_v` everywhere.
    pub fn with_inputs_copy(net: &CooperativeNetwork, input_dists: Vec<Vec<f64>>) -> Self {
        CodingChoice {
            input_dists,
            quantizers: net
                .input_alphabets
                .iter()
                .zip(&net.output_alphabets)
                .map(|(&x, &y)| Quantizer::copy(x, y))
                .collect(),
        }
    }

    /// Given inputs, no quantization.
    pub fn with_inputs_none(net: &CooperativeNetwork, input_dists: Vec<Vec<f64>>) -> Self {
        CodingChoice { input_dists, ..Self::uniform_none(net) }
    }

    /// Product input law over flattened `x_V`.
    pub fn input_law(&self, net: &CooperativeNetwork) -> Vec<f64> {
        let mut law = vec![1.0];
        for d in &self.input_dists {
            law = law.iter().flat_map(|&a| d.iter().map(move |&b| a * b)).collect();
        }
        debug_assert_eq!(law.len(), net.x_size());
        law
    }
}

fn check_coding_shape(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<()> {
    let n = net.num_nodes();
    if coding.input_dists.len() != n || coding.quantizers.len() != n {
        return Err(Error::InvalidCoding(format!("coding must describe all {n} nodes")));
    }
    for v in 0..n {
        if coding.input_dists[v].len() != net.input_alphabets[v] {
            return Err(Error::InvalidCoding(format!("input distribution of node {} has wrong length", v + 1)));
        }
        let q = &coding.quantizers[v];
        if q.alphabet == 0 || q.kernel.len() != net.input_alphabets[v] * net.output_alphabets[v] * q.alphabet {
            return Err(Error::InvalidCoding(format!("quantizer of node {} has wrong shape", v + 1)));
        }
    }
    if net.channel.len() != net.x_size() * net.y_size() {
        return Err(Error::InvalidNetwork("channel table has wrong size".into()));
    }
    Ok(())
}

/// Joint of `(X_V, Y_V, Ŷ_V)` under an arbitrary input law over `x_V`
/// (product or not) and the given quantizers.
pub fn assemble_with_input_law(
    net: &CooperativeNetwork,
    input_law: &[f64],
    quantizers: &[Quantizer],
) -> Result<JointPmf> {
    net.check_size()?;
    let n = net.num_nodes();
    let xa = &net.input_alphabets;
    let ya = &net.output_alphabets;
    let qa: Vec<usize> = quantizers.iter().map(|q| q.alphabet).collect();
    let (xs, ys, qs) = (flat_size(xa), flat_size(ya), flat_size(&qa));
    let total = xs as u128 * ys as u128 * qs as u128;
    if total > DEFAULT_TABLE_CAP as u128 {
        return Err(Error::SizeCap { entries: total, cap: DEFAULT_TABLE_CAP });
    }
    if input_law.len() != xs {
        return Err(Error::InvalidCoding("input law has wrong length".into()));
    }
    let mut table = vec![0.0; xs * ys * qs];
    let mut qprobs = vec![0.0; qs];
    for x in 0..xs {
        let px = input_law[x];
        if px == 0.0 {
            continue;
        }
        let xd = unflatten(x, xa);
        for y in 0..ys {
            let pxy = px * net.channel[x * ys + y];
            if pxy == 0.0 {
                continue;
            }
            let yd = unflatten(y, ya);
            // Π_v p(ŷ_v | x_v, y_v), accumulated node by node
            qprobs.truncate(0);
            qprobs.push(1.0);
            for v in 0..n {
                let q = &quantizers[v];
                let row = (xd[v] * ya[v] + yd[v]) * q.alphabet;
                let next: Vec<f64> = qprobs
                    .iter()
                    .flat_map(|&a| q.kernel[row..row + q.alphabet].iter().map(move |&b| a * b))
                    .collect();
                qprobs = next;
            }
            let base = (x * ys + y) * qs;
            for (slot, &p) in table[base..base + qs].iter_mut().zip(&qprobs) {
                *slot = pxy * p;
            }
        }
    }
    let mut vars = Vec::with_capacity(3 * n);
    let mut alph = Vec::with_capacity(3 * n);
    for (role, al) in [(Role::InputX, xa), (Role::OutputY, ya), (Role::QuantY, &qa)] {
        for v in 0..n {
            vars.push(VarId::new(role, v));
            alph.push(al[v]);
        }
    }
    Ok(JointPmf::from_parts(vars, alph, table))
}

/// Joint of `(X_V, Y_V, Ŷ_V)` only. The sources are independent of all
/// of these, so channel-side functionals never need the `U` variables.
pub fn assemble_channel_joint(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<JointPmf> {
    check_coding_shape(net, coding)?;
    assemble_with_input_law(net, &coding.input_law(net), &coding.quantizers)
}

/// Full joint over `(U_A, X_V, Y_V, Ŷ_V)`.
pub fn assemble_joint(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<JointPmf> {
    let channel = assemble_channel_joint(net, coding)?;
    net.sources.joint()?.product(&channel)
}

/// A broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NodeCountMismatch { inputs: usize, outputs: usize },
    TooManyNodes { nodes: usize },
    EmptyAlphabet { node: usize },
    ChannelShape { expected: usize, got: usize },
    KernelRow { row: Vec<usize>, sum: f64 },
    NegativeKernelEntry { row: Vec<usize> },
    NotPointMass { row: Vec<usize> },
    ReceiverOutOfRange { node: usize },
    SourceOutOfRange { node: usize },
    DuplicateReceiver { node: usize },
    DuplicateSource { node: usize },
    SourceShape { expected: usize, got: usize },
    SourcePmf { sum: f64 },
    CodingNodeCount { expected: usize, got: usize },
    InputDistShape { node: usize },
    InputDist { node: usize, sum: f64 },
    QuantizerShape { node: usize },
    QuantizerRow { node: usize, x: usize, y: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lab = |row: &[usize]| row.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Violation::NodeCountMismatch { inputs, outputs } => {
                write!(f, "{inputs} input alphabets but {outputs} output alphabets")
            }
            Violation::TooManyNodes { nodes } => write!(f, "{nodes} nodes exceed the cap of {MAX_NODES}"),
            Violation::EmptyAlphabet { node } => write!(f, "node {} has an empty alphabet", node + 1),
            Violation::ChannelShape { expected, got } => {
                write!(f, "channel table has {got} entries, expected {expected}")
            }
            Violation::KernelRow { row, sum } => write!(f, "kernel row x_V=({}) sums to {sum}", lab(row)),
            Violation::NegativeKernelEntry { row } => {
                write!(f, "kernel row x_V=({}) has a negative entry", lab(row))
            }
            Violation::NotPointMass { row } => {
                write!(f, "kernel row x_V=({}) is not a point mass in a deterministic network", lab(row))
            }
            Violation::ReceiverOutOfRange { node } => write!(f, "receiver {} out of range", node + 1),
            Violation::SourceOutOfRange { node } => write!(f, "source {} out of range", node + 1),
            Violation::DuplicateReceiver { node } => write!(f, "receiver {} listed twice", node + 1),
            Violation::DuplicateSource { node } => write!(f, "source {} listed twice", node + 1),
            Violation::SourceShape { expected, got } => {
                write!(f, "source pmf has {got} entries, expected {expected}")
            }
            Violation::SourcePmf { sum } => write!(f, "source pmf sums to {sum}"),
            Violation::CodingNodeCount { expected, got } => {
                write!(f, "coding describes {got} nodes, network has {expected}")
            }
            Violation::InputDistShape { node } => write!(f, "input distribution of node {} has wrong length", node + 1),
            Violation::InputDist { node, sum } => write!(f, "input distribution of node {} sums to {sum}", node + 1),
            Violation::QuantizerShape { node } => write!(f, "quantizer of node {} has wrong shape", node + 1),
            Violation::QuantizerRow { node, x, y, sum } => {
                write!(f, "quantizer of node {} row (x={x}, y={y}) sums to {sum}", node + 1)
            }
        }
    }
}

fn row_ok(row: &[f64]) -> bool {
    row.iter().all(|&p| p >= 0.0 && p.is_finite()) && (row.iter().sum::<f64>() - 1.0).abs() <= NORM_TOL
}

/// Checks every structural invariant; never fails.
pub fn validate(net: &CooperativeNetwork, coding: Option<&CodingChoice>) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = net.input_alphabets.len();
    if net.output_alphabets.len() != n {
        out.push(Violation::NodeCountMismatch { inputs: n, outputs: net.output_alphabets.len() });
        return out;
    }
    if n > MAX_NODES {
        out.push(Violation::TooManyNodes { nodes: n });
        return out;
    }
    for v in 0..n {
        if net.input_alphabets[v] == 0 || net.output_alphabets[v] == 0 {
            out.push(Violation::EmptyAlphabet { node: v });
        }
    }
    if !out.is_empty() {
        return out;
    }
    let (xs, ys) = (net.x_size(), net.y_size());
    if net.channel.len() != xs * ys {
        out.push(Violation::ChannelShape { expected: xs * ys, got: net.channel.len() });
    } else {
        for x in 0..xs {
            let row = &net.channel[x * ys..(x + 1) * ys];
            let digits = unflatten(x, &net.input_alphabets);
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                out.push(Violation::NegativeKernelEntry { row: digits });
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORM_TOL {
                out.push(Violation::KernelRow { row: digits, sum });
            } else if net.is_deterministic() && !row.iter().any(|&p| p == 1.0) {
                out.push(Violation::NotPointMass { row: digits });
            }
        }
    }
    let mut seen = NodeSet::EMPTY;
    for &b in &net.receivers {
        if b >= n {
            out.push(Violation::ReceiverOutOfRange { node: b });
        } else if seen.contains(b) {
            out.push(Violation::DuplicateReceiver { node: b });
        } else {
            seen = seen.with(b);
        }
    }
    let src = &net.sources;
    let mut seen = NodeSet::EMPTY;
    for &a in &src.nodes {
        if a >= n {
            out.push(Violation::SourceOutOfRange { node: a });
        } else if seen.contains(a) {
            out.push(Violation::DuplicateSource { node: a });
        } else {
            seen = seen.with(a);
        }
    }
    if src.nodes.is_empty() && src.alphabets.is_empty() && src.pmf.is_empty() {
        // no sources
    } else if src.alphabets.len() != src.nodes.len() || src.alphabets.contains(&0) {
        out.push(Violation::SourceShape { expected: src.nodes.len(), got: src.alphabets.len() });
    } else {
        let expected = flat_size(&src.alphabets);
        if src.pmf.len() != expected {
            out.push(Violation::SourceShape { expected, got: src.pmf.len() });
        } else if !row_ok(&src.pmf) {
            out.push(Violation::SourcePmf { sum: src.pmf.iter().sum() });
        }
    }
    if let Some(c) = coding {
        if c.input_dists.len() != n || c.quantizers.len() != n {
            out.push(Violation::CodingNodeCount { expected: n, got: c.input_dists.len().min(c.quantizers.len()) });
            return out;
        }
        for v in 0..n {
            let d = &c.input_dists[v];
            if d.len() != net.input_alphabets[v] {
                out.push(Violation::InputDistShape { node: v });
            } else if !row_ok(d) {
                out.push(Violation::InputDist { node: v, sum: d.iter().sum() });
            }
            let q = &c.quantizers[v];
            let (xa, ya) = (net.input_alphabets[v], net.output_alphabets[v]);
            if q.alphabet == 0 || q.kernel.len() != xa * ya * q.alphabet {
                out.push(Violation::QuantizerShape { node: v });
                continue;
            }
            for x in 0..xa {
                for y in 0..ya {
                    let row = &q.kernel[(x * ya + y) * q.alphabet..(x * ya + y + 1) * q.alphabet];
                    if !row_ok(row) {
                        out.push(Violation::QuantizerRow { node: v, x, y, sum: row.iter().sum() });
                    }
                }
            }
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::testnets::*;
    use super::*;
    use crate::pmf::testutil::random_table;
    use crate::pmf::VarSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_general(rng: &mut ChaCha8Rng, n: usize) -> (CooperativeNetwork, CodingChoice) {
        let xa: Vec<usize> = (0..n).map(|_| rng.random_range(1..=2)).collect();
        let ya: Vec<usize> = (0..n).map(|_| rng.random_range(1..=2)).collect();
        let xs = flat_size(&xa);
        let ys = flat_size(&ya);
        let channel: Vec<f64> = (0..xs).flat_map(|_| random_table(rng, ys)).collect();
        let src = SourceModel { nodes: vec![0], alphabets: vec![2], pmf: random_table(rng, 2) };
        let net = CooperativeNetwork::general(xa.clone(), ya.clone(), channel, src, vec![n - 1]);
        let coding = CodingChoice {
            input_dists: xa.iter().map(|&a| random_table(rng, a)).collect(),
            quantizers: (0..n)
                .map(|v| {
                    let qa = rng.random_range(1..=3);
                    let kernel = (0..xa[v] * ya[v]).flat_map(|_| random_table(rng, qa)).collect();
                    Quantizer { alphabet: qa, kernel }
                })
                .collect(),
        };
        (net, coding)
    }

    #[test]
    fn joint_factorizes_and_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (net, coding) = random_general(&mut rng, 3);
            assert!(validate(&net, Some(&coding)).is_empty());
            let j = assemble_joint(&net, &coding).unwrap();
            let total: f64 = j.table().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let u = j.select(Role::SourceU, net.nodes());
            let rest = j.all().difference(u);
            assert!(j.mutual_info(u, rest).unwrap().abs() < 1e-9);
            for v in 0..3 {
                let m = j.marginalize(j.var_set([VarId::x(v)]).unwrap()).unwrap();
                for (a, b) in m.table().iter().zip(&coding.input_dists[v]) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn xy_marginal_matches_direct_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let (net, coding) = random_general(&mut rng, 3);
            let j = assemble_channel_joint(&net, &coding).unwrap();
            let keep = j.select(Role::InputX, net.nodes()) | j.select(Role::OutputY, net.nodes());
            let m = j.marginalize(keep).unwrap();
            let law = coding.input_law(&net);
            for x in 0..net.x_size() {
                for y in 0..net.y_size() {
                    let direct = law[x] * net.kernel(x, y);
                    assert!((m.table()[x * net.y_size() + y] - direct).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identity_channel_output_is_uniform() {
        let net = CooperativeNetwork::from_function(vec![2, 1], vec![1, 2], |x| vec![0, x[0]], SourceModel::none(), vec![1]).unwrap();
        let j = assemble_channel_joint(&net, &CodingChoice::uniform_none(&net)).unwrap();
        let m = j.marginalize(j.var_set([VarId::y(1)]).unwrap()).unwrap();
        assert_eq!(m.table(), &[0.5, 0.5]);
    }

    #[test]
    fn deterministic_copy_has_no_output_uncertainty() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let table: Vec<Vec<usize>> = (0..8).map(|_| (0..3).map(|_| rng.random_range(0..2)).collect()).collect();
            let net = CooperativeNetwork::deterministic(vec![2; 3], vec![2; 3], table, SourceModel::none(), vec![2]).unwrap();
            let inputs = (0..3).map(|_| random_table(&mut rng, 2)).collect();
            let j = assemble_channel_joint(&net, &CodingChoice::with_inputs_copy(&net, inputs)).unwrap();
            let h = j.cond_entropy(j.select(Role::OutputY, net.nodes()), j.select(Role::InputX, net.nodes())).unwrap();
            assert!(h.abs() < 1e-9);
        }
    }

    #[test]
    fn linear_ff_identity_and_zero() {
        let ff = LinearFf { q: 2, input_dims: vec![1, 1], output_dims: vec![1, 1], matrix: vec![vec![1, 0], vec![0, 1]] };
        let net = CooperativeNetwork::linear_ff(ff, SourceModel::none(), vec![1]).unwrap();
        let j = assemble_channel_joint(&net, &CodingChoice::uniform_copy(&net)).unwrap();
        for v in 0..2 {
            assert_eq!(j.entropy(j.var_set([VarId::y(v)]).unwrap()).unwrap(), 1.0);
        }
        let zero = LinearFf { q: 3, input_dims: vec![1, 1], output_dims: vec![1, 1], matrix: vec![vec![0, 0], vec![0, 0]] };
        let net = CooperativeNetwork::linear_ff(zero, SourceModel::none(), vec![1]).unwrap();
        let j = assemble_channel_joint(&net, &CodingChoice::uniform_copy(&net)).unwrap();
        assert_eq!(j.entropy(j.select(Role::OutputY, net.nodes())).unwrap(), 0.0);
        let bad = LinearFf { q: 4, input_dims: vec![1], output_dims: vec![1], matrix: vec![vec![1]] };
        assert_eq!(CooperativeNetwork::linear_ff(bad, SourceModel::none(), vec![0]), Err(Error::NotPrime(4)));
    }

    #[test]
    fn linear_ff_kernel_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let dims = vec![1usize, 2, 1];
            let outs = vec![1usize, 1, 2];
            let rows: usize = outs.iter().sum();
            let cols: usize = dims.iter().sum();
            let matrix: Vec<Vec<u32>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0..2)).collect()).collect();
            let ff = LinearFf { q: 2, input_dims: dims.clone(), output_dims: outs.clone(), matrix: matrix.clone() };
            let net = CooperativeNetwork::linear_ff(ff, SourceModel::none(), vec![2]).unwrap();
            // brute force: enumerate every bit vector x, compute y = Gx by hand
            for xbits in 0..(1usize << cols) {
                let x: Vec<u32> = (0..cols).map(|i| ((xbits >> (cols - 1 - i)) & 1) as u32).collect();
                let y: Vec<u32> = matrix.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum::<u32>() % 2).collect();
                let x_flat = xbits; // per-node big-endian digits concatenate to the same integer for q = 2
                let y_flat = y.iter().fold(0usize, |acc, &b| acc * 2 + b as usize);
                for yy in 0..net.y_size() {
                    let expect = if yy == y_flat { 1.0 } else { 0.0 };
                    assert_eq!(net.kernel(x_flat, yy), expect);
                }
            }
        }
    }

    #[test]
    fn aref_outputs_are_neighbor_inputs() {
        let net = CooperativeNetwork::aref(vec![2, 3, 1], vec![vec![], vec![0], vec![0, 1]], SourceModel::none(), vec![2]).unwrap();
        assert_eq!(net.output_alphabets, vec![1, 2, 6]);
        let j = assemble_channel_joint(&net, &CodingChoice::uniform_copy(&net)).unwrap();
        let y3 = j.var_set([VarId::y(2)]).unwrap();
        let x12 = j.var_set([VarId::x(0), VarId::x(1)]).unwrap();
        assert!((j.mutual_info(y3, x12).unwrap() - 6f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn validate_reports_specific_rows() {
        let net = bsc(0.1);
        assert_eq!(validate(&net, Some(&CodingChoice::uniform_none(&net))), vec![]);

        let mut bad = net.clone();
        bad.channel[0] = 0.8; // row x=0 now sums to 0.9
        let v = validate(&bad, None);
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::KernelRow { row, .. } if row == &vec![0, 0]));
        assert!(v[0].to_string().contains("x_V=(0,0)"));

        let out = net.with_receivers(vec![2]);
        let v = validate(&out, None);
        assert_eq!(v, vec![Violation::ReceiverOutOfRange { node: 2 }]);
        assert!(v[0].to_string().contains("receiver 3 out of range"));
    }

    #[test]
    fn validate_checks_coding() {
        let net = bsc(0.1);
        let mut c = CodingChoice::uniform_copy(&net);
        c.input_dists[0] = vec![0.7, 0.2];
        c.quantizers[1].kernel[0] = 0.5;
        let v = validate(&net, Some(&c));
        assert_eq!(v.len(), 2);
        assert!(matches!(v[0], Violation::InputDist { node: 0, .. }));
        assert!(matches!(v[1], Violation::QuantizerRow { node: 1, x: 0, y: 0, .. }));
    }

    #[test]
    fn size_cap_is_enforced() {
        let n = 12;
        let net = CooperativeNetwork::general(vec![2; n], vec![1; n], vec![1.0; 1 << n], SourceModel::none(), vec![0]);
        let coding = CodingChoice {
            input_dists: vec![vec![0.5, 0.5]; n],
            quantizers: (0..n).map(|_| Quantizer { alphabet: 5, kernel: vec![0.2; 10] }).collect(),
        };
        assert!(matches!(assemble_channel_joint(&net, &coding), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn select_skips_missing_source_vars() {
        let net = gf2_line(SourceModel::independent(vec![0], vec![vec![0.9, 0.1]]), vec![2]);
        let j = assemble_joint(&net, &CodingChoice::uniform_copy(&net)).unwrap();
        assert_eq!(j.select(Role::SourceU, NodeSet::from_nodes([1, 2])), VarSet::EMPTY);
        assert!(!j.select(Role::SourceU, net.nodes()).is_empty());
    }
}
