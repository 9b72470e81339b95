//! Cut enumeration and every cut-based feasibility / rate expression:
//! Slepian-Wolf multicast feasibility, its deterministic and finite-field
//! specializations, the compress-and-forward rate region with its relay and
//! two-way relay corollaries, and the standard cut-set table.
//!
//! Enumeration order is canonical (receivers ascending, cut sets by size
//! then mask), and a minimum is attributed to the first cut attaining it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf;
use crate::network::{assemble_channel_joint, assemble_with_input_law, CodingChoice, CooperativeNetwork, NetworkKind, Quantizer};
use crate::nodes::NodeSet;
use crate::pmf::{Entropies, JointPmf, Role, CLAMP_TOL};

/// Default strictness margin for `<` constraints.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// A cut `(W, W^C)` seen by receiver `b ∉ W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    pub w: NodeSet,
    #[serde(with = "one_based")]
    pub receiver: usize,
}

pub(crate) mod one_based {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &usize, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(*v as u64 + 1)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        let v = u64::deserialize(d)?;
        if v == 0 {
            return Err(serde::de::Error::custom("node labels start at 1"));
        }
        Ok(v as usize - 1)
    }
}

/// One checked constraint. `margin` is the slack in the direction that
/// makes the constraint hold (positive is good).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub subset: NodeSet,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub binding: Option<Cut>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub constraints: Vec<ConstraintRecord>,
    pub epsilon: f64,
}

impl FeasibilityReport {
    fn from_records(constraints: Vec<ConstraintRecord>, epsilon: f64) -> Self {
        FeasibilityReport { feasible: constraints.iter().all(|c| c.satisfied), constraints, epsilon }
    }

    /// Smallest margin over all constraints (`+∞` when there are none).
    pub fn min_margin(&self) -> f64 {
        self.constraints.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }
}

/// `R_S < rhs` (rates enter only through the indicator of `S`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConstraint {
    pub support: NodeSet,
    pub rhs: f64,
    pub binding: Cut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub num_nodes: usize,
    pub constraints: Vec<RateConstraint>,
}

impl RateRegion {
    /// Tightest bound on `R_S` for a given support, if constrained.
    pub fn bound(&self, support: NodeSet) -> Option<f64> {
        self.constraints.iter().find(|c| c.support == support).map(|c| c.rhs)
    }
}

/// Cut value restricted to the nodes of `ground`:
/// `I(X_W; Y_b Ŷ_{G\W\b} | X_{G\W}) − I(Y_W; Ŷ_W | X_G Y_b Ŷ_{G\W\b})`.
/// With `ground = V` this is the bracket of the multicast condition.
pub(crate) fn cut_value_in(e: &Entropies, ground: NodeSet, w: NodeSet, b: usize) -> Result<f64> {
    if w.contains(b) {
        return Err(Error::ReceiverInCut { receiver: b + 1, cut: w });
    }
    let j = e.pmf();
    let rest = ground.difference(w).without(b);
    let side = j.select(Role::OutputY, NodeSet::singleton(b)) | j.select(Role::QuantY, rest);
    let flow = e.cmi(j.select(Role::InputX, w), side, j.select(Role::InputX, ground.difference(w)))?;
    let cost = e.cmi(
        j.select(Role::OutputY, w),
        j.select(Role::QuantY, w),
        j.select(Role::InputX, ground) | side,
    )?;
    Ok(flow - cost)
}

fn all_nodes(joint: &JointPmf) -> NodeSet {
    joint
        .vars()
        .iter()
        .filter(|v| v.role != Role::SourceU)
        .map(|v| v.node)
        .collect()
}

/// The bracketed cut value for cut `W` and receiver `b`, computed exactly as
/// written (no clipping). `joint` must contain `X_V, Y_V, Ŷ_V`.
pub fn cut_value(joint: &JointPmf, w: NodeSet, b: usize) -> Result<f64> {
    cut_value_in(&Entropies::new(joint), all_nodes(joint), w, b)
}

/// Same as [`cut_value`] on the sub-network `ground` (other nodes' inputs
/// act as noise and their compressions are not used).
pub fn cut_value_within(joint: &JointPmf, ground: NodeSet, w: NodeSet, b: usize) -> Result<f64> {
    cut_value_in(&Entropies::new(joint), ground, w, b)
}

/// `min_{b ∈ receivers \ S} min_{S ⊆ W ⊆ ground \ {b}} f(W, b)`; `None` when
/// no receiver lies outside `S`.
pub(crate) fn min_over_cuts<F>(ground: NodeSet, s: NodeSet, receivers: NodeSet, mut f: F) -> Result<Option<(f64, Cut)>>
where
    F: FnMut(NodeSet, usize) -> Result<f64>,
{
    let mut best: Option<(f64, Cut)> = None;
    for b in receivers.difference(s).iter() {
        for w in s.supersets_within(ground.without(b)) {
            let v = f(w, b)?;
            if best.is_none_or(|(m, _)| v < m) {
                best = Some((v, Cut { w, receiver: b }));
            }
        }
    }
    Ok(best)
}

/// A subset whose sources carry no information (`H ≤ CLAMP_TOL`) needs no
/// capacity, matching the `R_S = 0` rule of [`achievable_check`].
fn source_satisfied(lhs: f64, margin: f64, epsilon: f64) -> bool {
    lhs <= CLAMP_TOL || margin > epsilon
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps >= 0.0) {
        return Err(Error::Precondition(format!("epsilon must be nonnegative, got {eps}")));
    }
    Ok(())
}

/// Slepian-Wolf multicast feasibility: for every nonempty `S ⊆ A`,
/// `H(U_S | U_{A\S}) < min_b min_W cut_value(W, b)`, strict by `epsilon`.
/// Subsets with zero conditional entropy always pass.
pub fn sw_feasible(net: &CooperativeNetwork, coding: &CodingChoice, epsilon: f64) -> Result<FeasibilityReport> {
    check_epsilon(epsilon)?;
    net.check_size()?;
    let sources = net.sources.set();
    if sources.is_empty() {
        return Err(Error::EmptySourceSet);
    }
    let src = net.sources.joint()?;
    let chan = assemble_channel_joint(net, coding)?;
    let e = Entropies::new(&chan);
    let ground = net.nodes();
    let receivers = net.receiver_set();
    let mut records = Vec::new();
    for s in sources.nonempty_subsets() {
        let Some((rhs, cut)) = min_over_cuts(ground, s, receivers, |w, b| cut_value_in(&e, ground, w, b))? else {
            continue;
        };
        let lhs = src.cond_entropy(src.select(Role::SourceU, s), src.select(Role::SourceU, sources.difference(s)))?;
        let margin = rhs - lhs;
        records.push(ConstraintRecord { subset: s, lhs, rhs, margin, binding: Some(cut), satisfied: source_satisfied(lhs, margin, epsilon) });
    }
    Ok(FeasibilityReport::from_records(records, epsilon))
}

fn source_lhs(net: &CooperativeNetwork, s: NodeSet) -> Result<f64> {
    let src = net.sources.joint()?;
    let all = net.sources.set();
    src.cond_entropy(src.select(Role::SourceU, s), src.select(Role::SourceU, all.difference(s)))
}

/// Deterministic-network bound with an arbitrary input law over `x_V`:
/// RHS is `min_b min_W H(Y_{W^C} | X_{W^C})`. With a product law this is
/// the sufficient condition; maximized over all laws it is the converse.
/// Strictness semantics are not asserted here: `satisfied` uses `> epsilon`
/// and the margins are reported as-is.
pub fn converse_bound(net: &CooperativeNetwork, input_law: &[f64], epsilon: f64) -> Result<FeasibilityReport> {
    check_epsilon(epsilon)?;
    if !net.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let sources = net.sources.set();
    if sources.is_empty() {
        return Err(Error::EmptySourceSet);
    }
    let quant: Vec<Quantizer> = net
        .input_alphabets
        .iter()
        .zip(&net.output_alphabets)
        .map(|(&x, &y)| Quantizer::none(x, y))
        .collect();
    let joint = assemble_with_input_law(net, input_law, &quant)?;
    let e = Entropies::new(&joint);
    let ground = net.nodes();
    let mut records = Vec::new();
    for s in sources.nonempty_subsets() {
        let Some((rhs, cut)) = min_over_cuts(ground, s, net.receiver_set(), |w, _| {
            let wc = ground.difference(w);
            e.cond_h(joint.select(Role::OutputY, wc), joint.select(Role::InputX, wc))
        })?
        else {
            continue;
        };
        let lhs = source_lhs(net, s)?;
        let margin = rhs - lhs;
        records.push(ConstraintRecord { subset: s, lhs, rhs, margin, binding: Some(cut), satisfied: source_satisfied(lhs, margin, epsilon) });
    }
    Ok(FeasibilityReport::from_records(records, epsilon))
}

/// Deterministic specialization of [`sw_feasible`] under a product input law.
pub fn det_condition(net: &CooperativeNetwork, input_dists: &[Vec<f64>], epsilon: f64) -> Result<FeasibilityReport> {
    if !net.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let coding = CodingChoice::with_inputs_none(net, input_dists.to_vec());
    converse_bound(net, &coding.input_law(net), epsilon)
}

/// `rank(G_{W^C, W}) · log2 q` for a linear finite-field network, where
/// `sink_side = W^C`. Equals `H(Y_{W^C} | X_{W^C})` under uniform inputs.
pub fn ff_cut_entropy(net: &CooperativeNetwork, sink_side: NodeSet) -> Result<f64> {
    let NetworkKind::LinearFiniteField(ff) = &net.kind else {
        return Err(Error::Precondition("network is not a linear finite-field network".into()));
    };
    let w = net.nodes().difference(sink_side);
    let r = gf::rank(&ff.transfer(w, sink_side), ff.q)?;
    Ok(r as f64 * (ff.q as f64).log2())
}

/// Largest value `H(Y_{W^C} | X_{W^C})` can take over *any* input law, for
/// the network classes where it has a closed form: finite-field networks
/// (matrix rank) and Aref networks (sum of `log2|X_u|` over nodes of `W`
/// heard from `W^C`). Uniform product inputs attain it.
pub fn max_det_cut_entropy(net: &CooperativeNetwork, sink_side: NodeSet) -> Result<f64> {
    match &net.kind {
        NetworkKind::LinearFiniteField(_) => ff_cut_entropy(net, sink_side),
        NetworkKind::Aref { in_neighbors } => {
            let w = net.nodes().difference(sink_side);
            let heard: NodeSet = sink_side.iter().flat_map(|v| in_neighbors[v].iter().copied()).collect();
            Ok(heard.intersection(w).iter().map(|u| (net.input_alphabets[u] as f64).log2()).sum())
        }
        _ => Err(Error::Precondition("closed-form cut entropy needs a finite-field or Aref network".into())),
    }
}

/// Necessary condition for finite-field and Aref networks: same report
/// shape as [`det_condition`] with each cut at its maximum over all input
/// laws. Comparing it to `det_condition` under uniform inputs shows the
/// sufficient and necessary conditions coincide.
pub fn necessity_bound(net: &CooperativeNetwork, epsilon: f64) -> Result<FeasibilityReport> {
    check_epsilon(epsilon)?;
    let sources = net.sources.set();
    if sources.is_empty() {
        return Err(Error::EmptySourceSet);
    }
    let ground = net.nodes();
    let mut records = Vec::new();
    for s in sources.nonempty_subsets() {
        let Some((rhs, cut)) =
            min_over_cuts(ground, s, net.receiver_set(), |w, _| max_det_cut_entropy(net, ground.difference(w)))?
        else {
            continue;
        };
        let lhs = source_lhs(net, s)?;
        let margin = rhs - lhs;
        records.push(ConstraintRecord { subset: s, lhs, rhs, margin, binding: Some(cut), satisfied: source_satisfied(lhs, margin, epsilon) });
    }
    Ok(FeasibilityReport::from_records(records, epsilon))
}

/// Rate region: for each nonempty `S ⊆ V` with a receiver outside `S`,
/// `R_S < [min_b min_W cut_value(W, b)]^+`.
pub fn achievable_region(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<RateRegion> {
    net.check_size()?;
    let chan = assemble_channel_joint(net, coding)?;
    let e = Entropies::new(&chan);
    let ground = net.nodes();
    let mut constraints = Vec::new();
    for s in ground.nonempty_subsets() {
        if let Some((v, binding)) = min_over_cuts(ground, s, net.receiver_set(), |w, b| cut_value_in(&e, ground, w, b))? {
            constraints.push(RateConstraint { support: s, rhs: v.max(0.0), binding });
        }
    }
    Ok(RateRegion { num_nodes: net.num_nodes(), constraints })
}

/// Checks a rate vector against [`achievable_region`]. A constraint with
/// `R_S = 0` always holds; positive `R_S` needs `rhs − R_S > epsilon`.
pub fn achievable_check(
    net: &CooperativeNetwork,
    coding: &CodingChoice,
    rates: &[f64],
    epsilon: f64,
) -> Result<FeasibilityReport> {
    check_epsilon(epsilon)?;
    if rates.len() != net.num_nodes() {
        return Err(Error::Precondition(format!("expected {} rates, got {}", net.num_nodes(), rates.len())));
    }
    if let Some((node, &rate)) = rates.iter().enumerate().find(|(_, r)| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::NegativeRate { node: node + 1, rate });
    }
    let region = achievable_region(net, coding)?;
    let records = region
        .constraints
        .iter()
        .map(|c| {
            let lhs: f64 = c.support.iter().map(|v| rates[v]).sum();
            let margin = c.rhs - lhs;
            ConstraintRecord {
                subset: c.support,
                lhs,
                rhs: c.rhs,
                margin,
                binding: Some(c.binding),
                satisfied: lhs == 0.0 || margin > epsilon,
            }
        })
        .collect();
    Ok(FeasibilityReport::from_records(records, epsilon))
}

fn relay_roles(net: &CooperativeNetwork) -> Result<(usize, usize)> {
    let n = net.num_nodes();
    if n < 2 {
        return Err(Error::Precondition("relay network needs at least two nodes".into()));
    }
    Ok((0, n - 1))
}

/// Compress-and-forward rate of a relay network with transmitter node 1
/// (no channel output) and destination node N (no channel input), together
/// with the binding cut `S`.
pub fn relay_cf_rate_detailed(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<(f64, NodeSet)> {
    let (src, dst) = relay_roles(net)?;
    if net.output_alphabets[src] != 1 {
        return Err(Error::Precondition("node 1 must have no channel output".into()));
    }
    if net.input_alphabets[dst] != 1 {
        return Err(Error::Precondition(format!("node {} must have no channel input", dst + 1)));
    }
    let chan = assemble_channel_joint(net, coding)?;
    let e = Entropies::new(&chan);
    let ground = net.nodes();
    let mut best: Option<(f64, NodeSet)> = None;
    for s in NodeSet::singleton(src).supersets_within(ground.without(dst)) {
        let v = cut_value_in(&e, ground, s, dst)?.max(0.0);
        if best.is_none_or(|(m, _)| v < m) {
            best = Some((v, s));
        }
    }
    Ok(best.expect("at least one cut contains node 1"))
}

pub fn relay_cf_rate(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<f64> {
    relay_cf_rate_detailed(net, coding).map(|(r, _)| r)
}

/// Two-way relay rates `(R_1, R_N)` with terminals 1 and N and relays in
/// between; both terminals must use `Ŷ = ∅`.
pub fn two_way_rates(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<(f64, f64)> {
    let (a, z) = relay_roles(net)?;
    for t in [a, z] {
        if coding.quantizers.get(t).is_none_or(|q| q.alphabet != 1) {
            return Err(Error::Precondition(format!("terminal {} must use a singleton quantizer", t + 1)));
        }
    }
    let chan = assemble_channel_joint(net, coding)?;
    let e = Entropies::new(&chan);
    let ground = net.nodes();
    let rate = |k: usize, other: usize| -> Result<f64> {
        let mut best = f64::INFINITY;
        for s in NodeSet::singleton(k).supersets_within(ground.without(other)) {
            best = best.min(cut_value_in(&e, ground, s, other)?.max(0.0));
        }
        Ok(best)
    };
    Ok((rate(a, z)?, rate(z, a)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutsetEntry {
    pub subset: NodeSet,
    #[serde(with = "one_based")]
    pub receiver: usize,
    pub value: f64,
}

/// Standard cut-set values `I(X_S; Y_{S^C} | X_{S^C})` under a product input
/// law, for every receiver `b` and nonempty `S ⊆ V \ {b}`.
pub fn cutset_bound(net: &CooperativeNetwork, input_dists: &[Vec<f64>]) -> Result<Vec<CutsetEntry>> {
    net.check_size()?;
    let coding = CodingChoice::with_inputs_none(net, input_dists.to_vec());
    let chan = assemble_channel_joint(net, &coding)?;
    let e = Entropies::new(&chan);
    let ground = net.nodes();
    let mut out = Vec::new();
    for b in net.receiver_set().iter() {
        for s in ground.without(b).nonempty_subsets() {
            let sc = ground.difference(s);
            let value = e.cmi(
                chan.select(Role::InputX, s),
                chan.select(Role::OutputY, sc),
                chan.select(Role::InputX, sc),
            )?;
            out.push(CutsetEntry { subset: s, receiver: b, value });
        }
    }
    Ok(out)
}

/// Cut-set bound of a relay network: minimum over `S ∋ 1`, `N ∉ S`.
pub fn relay_cutset_min(net: &CooperativeNetwork, input_dists: &[Vec<f64>]) -> Result<f64> {
    let (src, dst) = relay_roles(net)?;
    let table = cutset_bound(&net.with_receivers(vec![dst]), input_dists)?;
    Ok(table
        .iter()
        .filter(|c| c.subset.contains(src))
        .map(|c| c.value)
        .fold(f64::INFINITY, f64::min))
}

/// Unclipped `min_b min_W cut_value` for every nonempty `S ⊆ V`; `None`
/// where no receiver lies outside `S`.
pub fn cut_minima(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<Vec<(NodeSet, Option<f64>)>> {
    net.check_size()?;
    let chan = assemble_channel_joint(net, coding)?;
    let e = Entropies::new(&chan);
    let ground = net.nodes();
    ground
        .nonempty_subsets()
        .into_iter()
        .map(|s| {
            let m = min_over_cuts(ground, s, net.receiver_set(), |w, b| cut_value_in(&e, ground, w, b))?;
            Ok((s, m.map(|(v, _)| v)))
        })
        .collect()
}

/// Every `T ⊆ V` such that each nonempty `S ⊆ T` has a nonnegative
/// multicast cut minimum (vacuous constraints count as satisfied). The
/// threshold is `-CLAMP_TOL` so floating-point zeros are nonnegative.
pub fn nonnegative_subsets(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<Vec<NodeSet>> {
    let minima = cut_minima(net, coding)?;
    let bad: Vec<NodeSet> = minima
        .iter()
        .filter(|(_, m)| m.is_some_and(|v| v < -CLAMP_TOL))
        .map(|(s, _)| *s)
        .collect();
    Ok(net
        .nodes()
        .subsets()
        .into_iter()
        .filter(|t| !bad.iter().any(|s| s.is_subset_of(*t)))
        .collect())
}

/// The largest `T ⊆ V` whose every subset has a nonnegative multicast cut
/// minimum. When the family is union-closed this is the union of all such
/// sets; otherwise the first largest one in canonical order is returned.
pub fn largest_feasible_subset(net: &CooperativeNetwork, coding: &CodingChoice) -> Result<NodeSet> {
    let good = nonnegative_subsets(net, coding)?;
    let union = good.iter().fold(NodeSet::EMPTY, |a, t| a.union(*t));
    if good.contains(&union) {
        return Ok(union);
    }
    let max = good.iter().map(|t| t.len()).max().unwrap_or(0);
    Ok(*good.iter().find(|t| t.len() == max).expect("empty set is always feasible"))
}
