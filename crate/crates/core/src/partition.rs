//! Ordered partitions and the per-partition rate regions they induce.
//!
//! A receiver decoding with sliding windows over an ordered partition
//! `[L_1, …, L_ℓ]` of the other nodes obtains one upward-closed polyhedron
//! `R_C` of node rates. This module builds those polyhedra, the single
//! polyhedron `Q` claimed to equal their union, certifies that identity
//! numerically, and implements the reduction that removes harmful relays.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cuts::{ConstraintRecord, FeasibilityReport};
use crate::error::{Error, Result};
use crate::network::{assemble_channel_joint, assemble_joint, CodingChoice, CooperativeNetwork};
use crate::nodes::NodeSet;
use crate::pmf::{Entropies, JointPmf, Role, VarId, VarSet};

/// Largest ground set for partition enumeration.
pub const MAX_PARTITION_NODES: usize = 7;
/// Largest dimension for vertex enumeration.
pub const MAX_VERTEX_DIM: usize = 4;
/// Membership tolerance for region checks.
pub const REGION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderedPartition {
    pub blocks: Vec<NodeSet>,
}

impl OrderedPartition {
    pub fn new(blocks: Vec<NodeSet>) -> Self {
        OrderedPartition { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn ground(&self) -> NodeSet {
        self.blocks.iter().fold(NodeSet::EMPTY, |a, b| a.union(*b))
    }

    /// Checks that the blocks are nonempty, disjoint and cover `ground`.
    pub fn check(&self, ground: NodeSet) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::BadPartition("no blocks".into()));
        }
        let mut seen = NodeSet::EMPTY;
        for b in &self.blocks {
            if b.is_empty() {
                return Err(Error::BadPartition("empty block".into()));
            }
            if !b.is_disjoint(seen) {
                return Err(Error::BadPartition(format!("block {b} overlaps an earlier block")));
            }
            seen = seen.union(*b);
        }
        if seen != ground {
            return Err(Error::BadPartition(format!("blocks cover {seen}, expected {ground}")));
        }
        Ok(())
    }

    /// Block `k` with the conventions `L_0 = L_{ℓ+1} = ∅` (1-based `k`).
    fn block(&self, k: usize) -> NodeSet {
        if k == 0 || k > self.blocks.len() {
            NodeSet::EMPTY
        } else {
            self.blocks[k - 1]
        }
    }

    /// `L^k = L_1 ∪ … ∪ L_{k−1}`.
    fn before(&self, k: usize) -> NodeSet {
        (1..k).fold(NodeSet::EMPTY, |a, j| a.union(self.block(j)))
    }
}

impl fmt::Display for OrderedPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "]")
    }
}

/// Lazy enumeration of every ordered partition of a ground set, by number
/// of blocks and then by block assignment in odometer order.
pub struct OrderedPartitions {
    nodes: Vec<usize>,
    blocks: usize,
    assign: Vec<usize>,
    done: bool,
}

impl OrderedPartitions {
    fn advance(&mut self) {
        for d in self.assign.iter_mut().rev() {
            *d += 1;
            if *d < self.blocks {
                return;
            }
            *d = 0;
        }
        self.blocks += 1;
        if self.blocks > self.nodes.len() {
            self.done = true;
        }
    }
}

impl Iterator for OrderedPartitions {
    type Item = OrderedPartition;

    fn next(&mut self) -> Option<OrderedPartition> {
        while !self.done {
            let mut blocks = vec![NodeSet::EMPTY; self.blocks];
            for (&v, &a) in self.nodes.iter().zip(&self.assign) {
                blocks[a] = blocks[a].with(v);
            }
            self.advance();
            if blocks.iter().all(|b| !b.is_empty()) {
                return Some(OrderedPartition { blocks });
            }
        }
        None
    }
}

pub fn enumerate_ordered_partitions(ground: NodeSet) -> Result<OrderedPartitions> {
    let nodes: Vec<usize> = ground.iter().collect();
    if nodes.len() > MAX_PARTITION_NODES {
        return Err(Error::TooManyNodes { got: nodes.len(), cap: MAX_PARTITION_NODES });
    }
    Ok(OrderedPartitions { done: nodes.is_empty(), assign: vec![0; nodes.len()], blocks: 1, nodes })
}

/// Ordered Bell number `a(n) = Σ_k C(n,k) a(n−k)`.
pub fn ordered_bell(n: usize) -> u64 {
    let mut a = vec![1u64; n + 1];
    for m in 1..=n {
        let mut c = 1u64;
        let mut s = 0u64;
        for k in 1..=m {
            c = c * (m - k + 1) as u64 / k as u64;
            s += c * a[m - k];
        }
        a[m] = s;
    }
    a[n]
}

/// `R_S ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub support: NodeSet,
    pub rhs: f64,
}

/// Rates of the nodes of `ground`, in increasing node order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub ground: NodeSet,
    pub rates: Vec<f64>,
}

impl RatePoint {
    pub fn get(&self, node: usize) -> Option<f64> {
        self.ground.iter().position(|v| v == node).map(|i| self.rates[i])
    }

    /// `R_S = Σ_{t ∈ S} R_t` (nodes outside the ground set count as 0).
    pub fn sum(&self, s: NodeSet) -> f64 {
        self.ground.iter().zip(&self.rates).filter(|(v, _)| s.contains(*v)).map(|(_, r)| r).sum()
    }
}

/// Upward-closed polyhedron `{R : R_S ≥ rhs_S}` over the nodes of `ground`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub ground: NodeSet,
    pub constraints: Vec<HalfSpace>,
}

impl Polyhedron {
    pub fn dimension(&self) -> usize {
        self.ground.len()
    }

    /// Largest shortfall `rhs − R_S` (nonpositive inside).
    pub fn violation(&self, point: &RatePoint) -> f64 {
        self.constraints.iter().map(|c| c.rhs - point.sum(c.support)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, point: &RatePoint, tol: f64) -> bool {
        self.constraints.iter().all(|c| point.sum(c.support) >= c.rhs - tol)
    }

    /// Vertices, by intersecting every `d`-subset of constraint hyperplanes
    /// and keeping feasible solutions. Both sides of the union identity have
    /// the nonnegative orthant as recession cone, so vertices determine them.
    pub fn vertices(&self) -> Result<Vec<RatePoint>> {
        let d = self.dimension();
        if d > MAX_VERTEX_DIM {
            return Err(Error::DimensionCap { got: d, cap: MAX_VERTEX_DIM });
        }
        let nodes: Vec<usize> = self.ground.iter().collect();
        if d == 0 {
            return Ok(vec![RatePoint { ground: self.ground, rates: vec![] }]);
        }
        let m = self.constraints.len();
        let mut out: Vec<RatePoint> = Vec::new();
        let mut pick: Vec<usize> = (0..d).collect();
        if m < d {
            return Ok(out);
        }
        loop {
            let a = DMatrix::from_fn(d, d, |r, c| {
                if self.constraints[pick[r]].support.contains(nodes[c]) { 1.0f64 } else { 0.0 }
            });
            let b = DVector::from_fn(d, |r, _| self.constraints[pick[r]].rhs);
            if a.determinant().abs() > 0.5 {
                if let Some(x) = a.lu().solve(&b) {
                    let p = RatePoint { ground: self.ground, rates: x.iter().copied().collect() };
                    let scale = 1.0 + p.rates.iter().fold(0.0f64, |s, r| s.max(r.abs()));
                    if self.contains(&p, REGION_TOL * scale)
                        && !out.iter().any(|q| q.rates.iter().zip(&p.rates).all(|(u, v)| (u - v).abs() <= REGION_TOL * scale))
                    {
                        out.push(p);
                    }
                }
            }
            // next d-combination of 0..m
            let mut i = d;
            loop {
                if i == 0 {
                    return Ok(out);
                }
                i -= 1;
                if pick[i] < m - d + i {
                    break;
                }
            }
            pick[i] += 1;
            for j in i + 1..d {
                pick[j] = pick[j - 1] + 1;
            }
        }
    }
}

/// Variable substitution `(X̃_t, Ỹ_t)` per node and side information `Z̃`,
/// by variable identity. Entries for nodes outside the ground set are
/// ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Substitution {
    pub x: Vec<Vec<VarId>>,
    pub y: Vec<Vec<VarId>>,
    pub side: Vec<VarId>,
}

struct Resolved {
    x: Vec<VarSet>,
    y: Vec<VarSet>,
    side: VarSet,
}

impl Resolved {
    fn xs(&self, s: NodeSet) -> VarSet {
        s.iter().fold(VarSet::EMPTY, |a, t| a | self.x[t])
    }

    fn ys(&self, s: NodeSet) -> VarSet {
        s.iter().fold(VarSet::EMPTY, |a, t| a | self.y[t])
    }
}

impl Substitution {
    /// `X̃_t = (X_t, U_t)`, `Ỹ_t = Ŷ_t`, `Z̃ = (Y_b, X_b, U_b)` on a joint
    /// holding sources and channel variables (missing `U`s are skipped).
    pub fn multicast(joint: &JointPmf, b: usize) -> Self {
        let n = joint.vars().iter().map(|v| v.node + 1).max().unwrap_or(0).max(b + 1);
        let has = |id: VarId| joint.position(id).is_some();
        let pick = |ids: Vec<VarId>| ids.into_iter().filter(|&id| has(id)).collect::<Vec<_>>();
        Substitution {
            x: (0..n).map(|t| pick(vec![VarId::x(t), VarId::u(t)])).collect(),
            y: (0..n).map(|t| pick(vec![VarId::yhat(t)])).collect(),
            side: pick(vec![VarId::y(b), VarId::x(b), VarId::u(b)]),
        }
    }

    fn resolve(&self, joint: &JointPmf, ground: NodeSet) -> Result<Resolved> {
        let n = self.x.len().max(self.y.len());
        if let Some(v) = ground.iter().find(|&v| v >= n || v >= self.x.len() || v >= self.y.len()) {
            return Err(Error::Precondition(format!("substitution has no entry for node {}", v + 1)));
        }
        let mut x = vec![VarSet::EMPTY; n];
        let mut y = vec![VarSet::EMPTY; n];
        for t in ground.iter() {
            x[t] = joint.var_set(self.x[t].iter().copied())?;
            y[t] = joint.var_set(self.y[t].iter().copied())?;
        }
        Ok(Resolved { x, y, side: joint.var_set(self.side.iter().copied())? })
    }
}

/// Per-partition region: for each nonempty `S ⊆ Z`,
/// `R_S ≥ Σ_{k=1}^{ℓ+1} H(Ỹ_{S_{k−1}} X̃_{S_k} | X̃_{L_k∖S} Ỹ_{L_{k−1}∖S} X̃_{L^k} Ỹ_{L^{k−1}} Z̃)`.
pub fn partition_region(joint: &JointPmf, ground: NodeSet, c: &OrderedPartition, sub: &Substitution) -> Result<Polyhedron> {
    c.check(ground)?;
    let r = sub.resolve(joint, ground)?;
    let e = Entropies::new(joint);
    let constraints = ground
        .nonempty_subsets()
        .into_iter()
        .map(|s| Ok(HalfSpace { support: s, rhs: partition_rhs(&e, &r, c, s)? }))
        .collect::<Result<_>>()?;
    Ok(Polyhedron { ground, constraints })
}

fn partition_rhs(e: &Entropies, r: &Resolved, c: &OrderedPartition, s: NodeSet) -> Result<f64> {
    let mut total = 0.0;
    for k in 1..=c.len() + 1 {
        let (lk, lprev) = (c.block(k), c.block(k - 1));
        let target = r.ys(lprev.intersection(s)) | r.xs(lk.intersection(s));
        let given = r.xs(lk.difference(s))
            | r.ys(lprev.difference(s))
            | r.xs(c.before(k))
            | r.ys(c.before(k - 1))
            | r.side;
        total += e.cond_h(target, given)?;
    }
    Ok(total)
}

/// Partition-free region: `R_S ≥ H(Ỹ_S X̃_S | X̃_{Z∖S} Ỹ_{Z∖S} Z̃)`.
pub fn unified_region(joint: &JointPmf, ground: NodeSet, sub: &Substitution) -> Result<Polyhedron> {
    let r = sub.resolve(joint, ground)?;
    let e = Entropies::new(joint);
    let constraints = ground
        .nonempty_subsets()
        .into_iter()
        .map(|s| {
            let rest = ground.difference(s);
            let rhs = e.cond_h(r.ys(s) | r.xs(s), r.xs(rest) | r.ys(rest) | r.side)?;
            Ok(HalfSpace { support: s, rhs })
        })
        .collect::<Result<_>>()?;
    Ok(Polyhedron { ground, constraints })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub samples: usize,
    /// Perturbations are drawn from `{0, 2/grid, …, 2}` per coordinate.
    pub grid: u32,
    /// Offset used for points just outside `Q`.
    pub inflation: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { seed: 0, samples: 1000, grid: 20, inflation: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterexampleKind {
    /// A vertex of some `R_C` lies outside `Q`.
    PartitionVertexOutsideUnified,
    /// A point of `Q` lies in no `R_C`.
    UnifiedPointUncovered,
    /// A point just outside `Q` lies in some `R_C`.
    OutsidePointCovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub kind: CounterexampleKind,
    pub point: RatePoint,
    pub partition: Option<OrderedPartition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Certificate {
    pub partitions: usize,
    pub partition_vertices: usize,
    pub unified_vertices: usize,
    pub samples: usize,
    pub outside_points: usize,
    pub counterexample: Option<Counterexample>,
}

impl Lemma3Certificate {
    pub fn certified(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Numerically certifies `∪_C R_C = Q` on one joint.
pub fn verify_lemma3(joint: &JointPmf, ground: NodeSet, sub: &Substitution, cfg: &SamplerConfig) -> Result<Lemma3Certificate> {
    let d = ground.len();
    if d > MAX_VERTEX_DIM {
        return Err(Error::DimensionCap { got: d, cap: MAX_VERTEX_DIM });
    }
    let q = unified_region(joint, ground, sub)?;
    let regions: Vec<(OrderedPartition, Polyhedron)> = enumerate_ordered_partitions(ground)?
        .map(|c| partition_region(joint, ground, &c, sub).map(|p| (c, p)))
        .collect::<Result<_>>()?;
    let mut cert = Lemma3Certificate {
        partitions: regions.len(),
        partition_vertices: 0,
        unified_vertices: 0,
        samples: 0,
        outside_points: 0,
        counterexample: None,
    };
    if d == 0 {
        return Ok(cert);
    }
    for (c, p) in &regions {
        for v in p.vertices()? {
            cert.partition_vertices += 1;
            if !q.contains(&v, REGION_TOL) {
                cert.counterexample = Some(Counterexample {
                    kind: CounterexampleKind::PartitionVertexOutsideUnified,
                    point: v,
                    partition: Some(c.clone()),
                });
                return Ok(cert);
            }
        }
    }
    let covered = |p: &RatePoint| regions.iter().find(|(_, r)| r.contains(p, REGION_TOL)).map(|(c, _)| c.clone());
    let qv = q.vertices()?;
    cert.unified_vertices = qv.len();
    for v in &qv {
        if covered(v).is_none() {
            cert.counterexample =
                Some(Counterexample { kind: CounterexampleKind::UnifiedPointUncovered, point: v.clone(), partition: None });
            return Ok(cert);
        }
        let below = RatePoint { ground, rates: v.rates.iter().map(|r| r - cfg.inflation).collect() };
        cert.outside_points += 1;
        if let Some(c) = covered(&below) {
            cert.counterexample =
                Some(Counterexample { kind: CounterexampleKind::OutsidePointCovered, point: below, partition: Some(c) });
            return Ok(cert);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = cfg.grid.max(1);
    for i in 0..cfg.samples {
        let base = &qv[i % qv.len()];
        let rates = base
            .rates
            .iter()
            .map(|r| r + 2.0 * rng.random_range(0..=grid) as f64 / grid as f64)
            .collect();
        let p = RatePoint { ground, rates };
        cert.samples += 1;
        if covered(&p).is_none() {
            cert.counterexample = Some(Counterexample { kind: CounterexampleKind::UnifiedPointUncovered, point: p, partition: None });
            return Ok(cert);
        }
    }
    Ok(cert)
}

/// `R_v = H(X_v Ŷ_v) − I(Y_v; Ŷ_v | X_v)` for every `v ∈ ground ∖ {b}`.
pub fn node_rates_in(joint: &JointPmf, ground: NodeSet, b: usize) -> Result<RatePoint> {
    let e = Entropies::new(joint);
    let g = ground.without(b);
    let rates = g
        .iter()
        .map(|v| {
            let x = joint.var_set([VarId::x(v)])?;
            let y = joint.var_set([VarId::y(v)])?;
            let yh = joint.var_set([VarId::yhat(v)])?;
            Ok(e.h(x | yh)? - e.cmi(y, yh, x)?)
        })
        .collect::<Result<_>>()?;
    Ok(RatePoint { ground: g, rates })
}

pub fn node_rate_vector(joint: &JointPmf, b: usize) -> Result<RatePoint> {
    let n = joint.vars().iter().filter(|v| v.role == Role::InputX).count();
    node_rates_in(joint, NodeSet::full(n), b)
}

fn partition_setup(net: &CooperativeNetwork, ground: NodeSet, b: usize, c: &OrderedPartition) -> Result<NodeSet> {
    if !ground.is_subset_of(net.nodes()) || !ground.contains(b) {
        return Err(Error::Precondition(format!("ground set {ground} must lie in the network and contain node {}", b + 1)));
    }
    let z = ground.without(b);
    c.check(z)?;
    Ok(z)
}

/// Per-partition feasibility with nodes outside `ground` treated as noise.
/// Checks, for every nonempty `S ⊆ ground ∖ {b}`,
/// `Σ_{t∈S} R_t ≥ Σ_k [H(U_{S_k} | U_{L_k∖S} U_{L^k} U_b) + H(X_{S_k} Ŷ_{S_{k−1}} | …)]`
/// with sources and channel evaluated on separate tables. A constraint
/// holds when its margin is at least `−epsilon`.
pub fn lemma2_feasible_in(
    net: &CooperativeNetwork,
    coding: &CodingChoice,
    ground: NodeSet,
    b: usize,
    c: &OrderedPartition,
    epsilon: f64,
) -> Result<FeasibilityReport> {
    let z = partition_setup(net, ground, b, c)?;
    let chan = assemble_channel_joint(net, coding)?;
    let src = net.sources.joint()?;
    let rates = node_rates_in(&chan, ground, b)?;
    let mut records = Vec::new();
    for s in z.nonempty_subsets() {
        let rhs = window_rhs_terms(&chan, &src, b, c, s, s)?;
        let lhs = rates.sum(s);
        let margin = lhs - rhs;
        records.push(ConstraintRecord { subset: s, lhs, rhs, margin, binding: None, satisfied: margin >= -epsilon });
    }
    Ok(FeasibilityReport { feasible: records.iter().all(|r| r.satisfied), constraints: records, epsilon })
}

pub fn lemma2_feasible(
    net: &CooperativeNetwork,
    coding: &CodingChoice,
    b: usize,
    c: &OrderedPartition,
    epsilon: f64,
) -> Result<FeasibilityReport> {
    lemma2_feasible_in(net, coding, net.nodes(), b, c, epsilon)
}

/// Same question through the region route: is the node-rate vector inside
/// `R_C` built from the full joint with the multicast substitution?
pub fn lemma2_membership_in(
    net: &CooperativeNetwork,
    coding: &CodingChoice,
    ground: NodeSet,
    b: usize,
    c: &OrderedPartition,
    epsilon: f64,
) -> Result<bool> {
    let z = partition_setup(net, ground, b, c)?;
    let full = assemble_joint(net, coding)?;
    let region = partition_region(&full, z, c, &Substitution::multicast(&full, b))?;
    Ok(region.contains(&node_rates_in(&full, ground, b)?, epsilon))
}

/// `Σ_k [H(U_{W_k} | U_{L_k∖W} U_{L^k} U_b) + H(X_{S_k} Ŷ_{S_{k−1}} | X_{L_k∖S} Ŷ_{L_{k−1}∖S} X_{L^k} Ŷ_{L^{k−1}} Y_b X_b)]`.
fn window_rhs_terms(chan: &JointPmf, src: &JointPmf, b: usize, c: &OrderedPartition, s: NodeSet, w: NodeSet) -> Result<f64> {
    let one = NodeSet::singleton(b);
    let mut total = 0.0;
    for k in 1..=c.len() + 1 {
        let (lk, lprev, before) = (c.block(k), c.block(k - 1), c.before(k));
        total += src.cond_entropy(
            src.select(Role::SourceU, lk.intersection(w)),
            src.select(Role::SourceU, lk.difference(w).union(before).union(one)),
        )?;
        let target = chan.select(Role::InputX, lk.intersection(s)) | chan.select(Role::QuantY, lprev.intersection(s));
        let given = chan.select(Role::InputX, lk.difference(s).union(before).union(one))
            | chan.select(Role::QuantY, lprev.difference(s).union(c.before(k - 1)))
            | chan.select(Role::OutputY, one);
        total += chan.cond_entropy(target, given)?;
    }
    Ok(total)
}

/// The `(S, W)` error-event constraint, as
/// `lhs = Σ_{t∈S} I(Y_t; Ŷ_t | X_t) ≤ rhs = Σ_{t∈S} H(X_t Ŷ_t) − Σ_k […]`.
/// At `W = S`, `rhs − lhs` is the per-partition margin.
pub fn lemma2_constraint_sw(
    net: &CooperativeNetwork,
    coding: &CodingChoice,
    b: usize,
    c: &OrderedPartition,
    s: NodeSet,
    w: NodeSet,
) -> Result<(f64, f64)> {
    partition_setup(net, net.nodes(), b, c)?;
    if !w.is_subset_of(s) {
        return Err(Error::Precondition(format!("W = {w} is not a subset of S = {s}")));
    }
    if s.contains(b) {
        return Err(Error::ReceiverInCut { receiver: b + 1, cut: s });
    }
    let chan = assemble_channel_joint(net, coding)?;
    let src = net.sources.joint()?;
    let e = Entropies::new(&chan);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for t in s.iter() {
        let x = chan.var_set([VarId::x(t)])?;
        let yh = chan.var_set([VarId::yhat(t)])?;
        lhs += e.cmi(chan.var_set([VarId::y(t)])?, yh, x)?;
        rhs += e.h(x | yh)?;
    }
    Ok((lhs, rhs - window_rhs_terms(&chan, &src, b, c, s, w)?))
}

/// `h_Z(S) = R_S − H(Ŷ_S X_S | X_{Z∖S} Ŷ_{Z∖(S∪{b})} Y_b)`.
pub fn h_function(joint: &JointPmf, rates: &RatePoint, ground: NodeSet, b: usize, s: NodeSet) -> Result<f64> {
    if s.contains(b) {
        return Err(Error::ReceiverInCut { receiver: b + 1, cut: s });
    }
    if !ground.contains(b) || !s.is_subset_of(ground) {
        return Err(Error::Precondition(format!("need {s} ⊆ {ground} and node {} in the ground set", b + 1)));
    }
    if s.is_empty() {
        return Ok(0.0);
    }
    let rest = ground.difference(s);
    let h = joint.cond_entropy(
        joint.select(Role::QuantY, s) | joint.select(Role::InputX, s),
        joint.select(Role::InputX, rest) | joint.select(Role::QuantY, rest.without(b)) | joint.var_set([VarId::y(b)])?,
    )?;
    Ok(rates.sum(s) - h)
}

/// Threshold below which `h` counts as negative in the reduction.
pub const REDUCE_TOL: f64 = 1e-12;

/// Removal rounds of the reduction, in order.
pub fn reduction_steps(net: &CooperativeNetwork, coding: &CodingChoice, b: usize) -> Result<Vec<NodeSet>> {
    if b >= net.num_nodes() {
        return Err(Error::Precondition(format!("receiver {} out of range", b + 1)));
    }
    let chan = assemble_channel_joint(net, coding)?;
    let rates = node_rates_in(&chan, net.nodes(), b)?;
    let candidates = net.nodes().difference(net.sources.set()).without(b);
    let mut ground = net.nodes();
    let mut steps = Vec::new();
    'outer: loop {
        for t in candidates.intersection(ground).nonempty_subsets() {
            if h_function(&chan, &rates, ground, b, t)? < -REDUCE_TOL {
                steps.push(t);
                ground = ground.difference(t);
                continue 'outer;
            }
        }
        return Ok(steps);
    }
}

/// Nodes to delete so that every non-source subset has nonnegative `h` on
/// the remaining network: repeatedly drops the first violating set in
/// canonical order and recomputes on what is left.
pub fn reduce_network(net: &CooperativeNetwork, coding: &CodingChoice, b: usize) -> Result<NodeSet> {
    Ok(reduction_steps(net, coding, b)?.into_iter().fold(NodeSet::EMPTY, |a, t| a.union(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::{cut_value_within, sw_feasible, DEFAULT_EPSILON};
    use crate::network::testnets::*;
    use crate::network::{Quantizer, SourceModel};
    use crate::pmf::testutil::random_table;
    use crate::pmf::CLAMP_TOL;

    #[test]
    fn partition_counts() {
        for n in 0..=5 {
            let all: Vec<_> = enumerate_ordered_partitions(NodeSet::full(n)).unwrap().collect();
            let expected = if n == 0 { 0 } else { ordered_bell(n) };
            assert_eq!(all.len() as u64, expected, "n = {n}");
            let mut uniq = all.clone();
            uniq.sort_by_key(|c| c.blocks.iter().map(|b| b.bits()).collect::<Vec<_>>());
            uniq.dedup();
            assert_eq!(uniq.len(), all.len());
            assert!(all.iter().all(|c| c.check(NodeSet::full(n)).is_ok()));
        }
        assert_eq!(ordered_bell(3), 13);
        assert_eq!(ordered_bell(7), 47293);
        assert!(enumerate_ordered_partitions(NodeSet::full(8)).is_err());
    }

    #[test]
    fn partition_check_rejects_bad_blocks() {
        let g = NodeSet::full(3);
        let c = OrderedPartition::new(vec![NodeSet::singleton(0), NodeSet::from_nodes([0, 1])]);
        assert!(matches!(c.check(g), Err(Error::BadPartition(_))));
        let c = OrderedPartition::new(vec![NodeSet::singleton(0), NodeSet::singleton(1)]);
        assert!(c.check(g).is_err());
        assert_eq!(OrderedPartition::new(vec![NodeSet::singleton(2), NodeSet::from_nodes([0, 1])]).to_string(), "[{3},{1,2}]");
    }

    /// Joint over `X̃_t` (as `X_t`), `Ỹ_t` (as `Y_t`) for `t < d` and `Z̃` as `U_0`.
    fn generic(rng: &mut ChaCha8Rng, d: usize, side: usize) -> (JointPmf, Substitution) {
        let mut vars = Vec::new();
        for t in 0..d {
            vars.push((VarId::x(t), 2));
            vars.push((VarId::y(t), 2));
        }
        vars.push((VarId::u(0), side));
        let size = vars.iter().map(|v| v.1).product();
        let joint = JointPmf::new(vars, random_table(rng, size)).unwrap();
        let sub = Substitution {
            x: (0..d).map(|t| vec![VarId::x(t)]).collect(),
            y: (0..d).map(|t| vec![VarId::y(t)]).collect(),
            side: vec![VarId::u(0)],
        };
        (joint, sub)
    }

    #[test]
    fn single_node_regions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (j, sub) = generic(&mut rng, 1, 2);
        let g = NodeSet::singleton(0);
        let c = OrderedPartition::new(vec![g]);
        let p = partition_region(&j, g, &c, &sub).unwrap();
        let q = unified_region(&j, g, &sub).unwrap();
        assert!((p.constraints[0].rhs - q.constraints[0].rhs).abs() < 1e-12);
        let direct = j.cond_entropy(j.var_set([VarId::x(0), VarId::y(0)]).unwrap(), j.var_set([VarId::u(0)]).unwrap()).unwrap();
        assert!((q.constraints[0].rhs - direct).abs() < 1e-12);
    }

    #[test]
    fn two_node_chain_matches_direct_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (j, sub) = generic(&mut rng, 2, 2);
        let g = NodeSet::full(2);
        let c = OrderedPartition::new(vec![NodeSet::singleton(0), NodeSet::singleton(1)]);
        let p = partition_region(&j, g, &c, &sub).unwrap();
        let v = |ids: &[VarId]| j.var_set(ids.iter().copied()).unwrap();
        let (x1, y1, x2, y2, z) = (VarId::x(0), VarId::y(0), VarId::x(1), VarId::y(1), VarId::u(0));
        // S = {1,2}: k=1: H(X1|Z); k=2: H(Y1 X2 | X1 Z); k=3: H(Y2 | X1 Y1 X2 Z)
        let oracle = j.cond_entropy(v(&[x1]), v(&[z])).unwrap()
            + j.cond_entropy(v(&[y1, x2]), v(&[x1, z])).unwrap()
            + j.cond_entropy(v(&[y2]), v(&[x1, y1, x2, z])).unwrap();
        let got = p.constraints.iter().find(|h| h.support == g).unwrap().rhs;
        assert!((got - oracle).abs() < 1e-12);
        // S = {2}: k=2: H(X2 | X1 Y1 Z); k=3: H(Y2 | X1 Y1 X2 Z)
        let oracle = j.cond_entropy(v(&[x2]), v(&[x1, y1, z])).unwrap() + j.cond_entropy(v(&[y2]), v(&[x1, y1, x2, z])).unwrap();
        let got = p.constraints.iter().find(|h| h.support == NodeSet::singleton(1)).unwrap().rhs;
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn independent_nodes_give_additive_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parts: Vec<Vec<f64>> = (0..3).map(|_| random_table(&mut rng, 4)).collect();
        let mut vars = Vec::new();
        for t in 0..3 {
            vars.push((VarId::x(t), 2));
            vars.push((VarId::y(t), 2));
        }
        let mut table = vec![0.0; 64];
        for (i, p) in table.iter_mut().enumerate() {
            *p = parts[0][i >> 4] * parts[1][(i >> 2) & 3] * parts[2][i & 3];
        }
        let j = JointPmf::new(vars, table).unwrap();
        let sub = Substitution {
            x: (0..3).map(|t| vec![VarId::x(t)]).collect(),
            y: (0..3).map(|t| vec![VarId::y(t)]).collect(),
            side: vec![],
        };
        let g = NodeSet::full(3);
        for c in enumerate_ordered_partitions(g).unwrap() {
            let p = partition_region(&j, g, &c, &sub).unwrap();
            let single = |v: usize| p.constraints.iter().find(|h| h.support == NodeSet::singleton(v)).unwrap().rhs;
            for h in &p.constraints {
                let sum: f64 = h.support.iter().map(single).sum();
                assert!((h.rhs - sum).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vertices_of_simple_polyhedron() {
        // R1 ≥ 1, R2 ≥ 1, R1 + R2 ≥ 3 has vertices (1,2) and (2,1)
        let p = Polyhedron {
            ground: NodeSet::full(2),
            constraints: vec![
                HalfSpace { support: NodeSet::singleton(0), rhs: 1.0 },
                HalfSpace { support: NodeSet::singleton(1), rhs: 1.0 },
                HalfSpace { support: NodeSet::full(2), rhs: 3.0 },
            ],
        };
        let mut v: Vec<Vec<f64>> = p.vertices().unwrap().into_iter().map(|p| p.rates).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(v.len(), 2);
        assert!((v[0][0] - 1.0).abs() < 1e-12 && (v[0][1] - 2.0).abs() < 1e-12);
        assert!((v[1][0] - 2.0).abs() < 1e-12 && (v[1][1] - 1.0).abs() < 1e-12);
        let big = Polyhedron { ground: NodeSet::full(5), constraints: vec![] };
        assert!(matches!(big.vertices(), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn union_identity_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 1..=2 {
            for seed in 0..5 {
                let (j, sub) = generic(&mut rng, d, 2);
                let cert = verify_lemma3(&j, NodeSet::full(d), &sub, &SamplerConfig { seed, ..Default::default() }).unwrap();
                assert!(cert.certified(), "{cert:?}");
                assert_eq!(cert.samples, 1000);
            }
        }
    }

    #[test]
    fn node_rates_examples() {
        let net = gf2_line(SourceModel::none(), vec![2]);
        let none = CodingChoice::uniform_none(&net);
        let j = assemble_channel_joint(&net, &none).unwrap();
        let r = node_rate_vector(&j, 2).unwrap();
        assert_eq!(r.ground, NodeSet::full(2));
        assert!(r.rates.iter().all(|&x| (x - 1.0).abs() < 1e-12));

        // copy quantizer on a deterministic output: R_v = H(X_v)
        let copy = CodingChoice::uniform_copy(&net);
        let j = assemble_channel_joint(&net, &copy).unwrap();
        let r = node_rate_vector(&j, 2).unwrap();
        for v in 0..2 {
            let hx = j.entropy(j.var_set([VarId::x(v)]).unwrap()).unwrap();
            assert!((r.get(v).unwrap() - hx).abs() < 1e-12);
        }

        // BSC quantizer on the relay of a noisy line
        let net = bsc(0.2);
        let mut c = CodingChoice::uniform_copy(&net);
        c.quantizers[1] = Quantizer::symmetric(1, 2, 0.1);
        let j = assemble_channel_joint(&net, &c).unwrap();
        let r = node_rate_vector(&j, 0).unwrap();
        let x = j.var_set([VarId::x(1)]).unwrap();
        let y = j.var_set([VarId::y(1)]).unwrap();
        let yh = j.var_set([VarId::yhat(1)]).unwrap();
        let oracle = j.entropy(x | yh).unwrap() - j.cond_mutual_info(y, yh, x).unwrap();
        assert!((r.rates[0] - oracle).abs() < 1e-15);
    }

    fn two_relay_net() -> CooperativeNetwork {
        // node 1: source; node 2: relay; node 3: receiver; y2 = x1, y3 = x1 + x2
        CooperativeNetwork::from_function(
            vec![2, 2, 1],
            vec![1, 2, 2],
            |x| vec![0, x[0], x[0] ^ x[1]],
            SourceModel::independent(vec![0], vec![vec![0.8, 0.2]]),
            vec![2],
        )
        .unwrap()
    }

    #[test]
    fn partition_feasibility_paths_agree() {
        let net = two_relay_net();
        let c = CodingChoice::uniform_copy(&net);
        for part in enumerate_ordered_partitions(NodeSet::full(2)).unwrap() {
            let direct = lemma2_feasible(&net, &c, 2, &part, 1e-9).unwrap();
            let member = lemma2_membership_in(&net, &c, net.nodes(), 2, &part, 1e-9).unwrap();
            assert_eq!(direct.feasible, member, "{part}");
        }
        let bad = OrderedPartition::new(vec![NodeSet::full(3)]);
        assert!(lemma2_feasible(&net, &c, 2, &bad, 0.0).is_err());
    }

    #[test]
    fn constant_sources_leave_channel_terms() {
        let net = two_relay_net().with_sources(SourceModel::independent(vec![0], vec![vec![1.0, 0.0]]));
        let c = CodingChoice::uniform_copy(&net);
        let part = OrderedPartition::new(vec![NodeSet::full(2)]);
        let r = lemma2_feasible(&net, &c, 2, &part, 1e-9).unwrap();
        let chan = assemble_channel_joint(&net, &c).unwrap();
        for rec in &r.constraints {
            let s = rec.subset;
            let oracle = chan.cond_entropy(chan.select(Role::InputX, s), chan.select(Role::InputX, NodeSet::full(3).difference(s)) | chan.select(Role::OutputY, NodeSet::singleton(2))).unwrap()
                + chan.cond_entropy(chan.select(Role::QuantY, s), chan.select(Role::InputX, NodeSet::full(3)) | chan.select(Role::QuantY, NodeSet::full(2).difference(s)) | chan.select(Role::OutputY, NodeSet::singleton(2))).unwrap();
            assert!((rec.rhs - oracle).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn sw_constraint_minimal_at_w_equals_s() {
        let net = two_relay_net();
        let c = CodingChoice::uniform_copy(&net);
        for part in enumerate_ordered_partitions(NodeSet::full(2)).unwrap() {
            let report = lemma2_feasible(&net, &c, 2, &part, 0.0).unwrap();
            for s in NodeSet::full(2).nonempty_subsets() {
                let (lhs, at_s) = lemma2_constraint_sw(&net, &c, 2, &part, s, s).unwrap();
                let rec = report.constraints.iter().find(|r| r.subset == s).unwrap();
                assert!((at_s - lhs - rec.margin).abs() < 1e-12);
                for w in s.subsets() {
                    let (_, rhs) = lemma2_constraint_sw(&net, &c, 2, &part, s, w).unwrap();
                    assert!(at_s <= rhs + 1e-9);
                }
            }
        }
        let part = OrderedPartition::new(vec![NodeSet::full(2)]);
        assert!(lemma2_constraint_sw(&net, &c, 2, &part, NodeSet::singleton(0), NodeSet::full(2)).is_err());
    }

    #[test]
    fn h_matches_cut_value() {
        let net = two_relay_net();
        let mut c = CodingChoice::uniform_copy(&net);
        c.quantizers[1] = Quantizer::symmetric(2, 2, 0.15);
        let j = assemble_channel_joint(&net, &c).unwrap();
        let r = node_rate_vector(&j, 2).unwrap();
        for ground in [net.nodes(), NodeSet::from_nodes([0, 2])] {
            for s in ground.without(2).subsets() {
                let h = h_function(&j, &r, ground, 2, s).unwrap();
                if s.is_empty() {
                    assert_eq!(h, 0.0);
                    continue;
                }
                assert!((h - cut_value_within(&j, ground, s, 2).unwrap()).abs() < 1e-12);
            }
        }
        assert!(h_function(&j, &r, net.nodes(), 2, NodeSet::singleton(2)).is_err());
    }

    /// Node 2 observes pure noise and describes it losslessly.
    fn noisy_relay() -> CooperativeNetwork {
        let mut channel = Vec::new();
        for x1 in 0..2 {
            for _x2 in 0..2 {
                for _y2 in 0..4 {
                    for y3 in 0..2 {
                        channel.push(if y3 == x1 { 0.25 } else { 0.0 });
                    }
                }
            }
        }
        CooperativeNetwork::general(
            vec![2, 2, 1],
            vec![1, 4, 2],
            channel,
            SourceModel::independent(vec![0], vec![vec![0.9, 0.1]]),
            vec![2],
        )
    }

    #[test]
    fn reduction_removes_noise_relay() {
        let net = noisy_relay();
        let c = CodingChoice::uniform_copy(&net);
        let j = assemble_channel_joint(&net, &c).unwrap();
        let r = node_rate_vector(&j, 2).unwrap();
        assert!(h_function(&j, &r, net.nodes(), 2, NodeSet::singleton(1)).unwrap() < -1.0);
        let removed = reduce_network(&net, &c, 2).unwrap();
        assert_eq!(removed, NodeSet::singleton(1));
        let left = net.nodes().difference(removed);
        for t in left.difference(net.sources.set()).without(2).nonempty_subsets() {
            assert!(h_function(&j, &r, left, 2, t).unwrap() >= -CLAMP_TOL);
        }

        let clean = gf2_line(SourceModel::independent(vec![0], vec![vec![0.9, 0.1]]), vec![2]);
        assert_eq!(reduce_network(&clean, &CodingChoice::uniform_copy(&clean), 2).unwrap(), NodeSet::EMPTY);
        assert!(sw_feasible(&clean, &CodingChoice::uniform_copy(&clean), DEFAULT_EPSILON).unwrap().feasible);
    }
}
