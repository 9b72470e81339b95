//! Index bookkeeping of the block-Markov scheme: which source message and
//! which compression index each node sends in each block, which codebook
//! it uses, and what a sliding-window decoder checks at each block.
//!
//! Blocks are numbered from 1 as in the scheme description; nodes are
//! 0-based here and printed 1-based.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nodes::NodeSet;
use crate::partition::OrderedPartition;
use crate::pmf::{Entropies, JointPmf, Role, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Number of nodes `V`.
    pub nodes: usize,
    /// Number of source blocks `B`.
    pub blocks: usize,
    /// Decoder partition length `ℓ`.
    pub window: usize,
}

impl SchemeParams {
    pub fn new(nodes: usize, blocks: usize, window: usize) -> Result<Self> {
        let p = SchemeParams { nodes, blocks, window };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if self.nodes < 2 || self.blocks < 1 {
            return Err(Error::Schedule(format!("need V ≥ 2 and B ≥ 1, got V = {}, B = {}", self.nodes, self.blocks)));
        }
        if self.window < 1 || self.window >= self.nodes {
            return Err(Error::Schedule(format!("window length {} outside 1..={}", self.window, self.nodes - 1)));
        }
        Ok(())
    }
}

pub fn num_blocks(b: usize, v: usize) -> Result<usize> {
    if b < 1 || v < 2 {
        return Err(Error::Schedule(format!("need B ≥ 1 and V ≥ 2, got B = {b}, V = {v}")));
    }
    Ok(b + 2 * v - 3)
}

/// Source-message slot of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageSlot {
    /// The default index 1.
    Fixed,
    /// `m_{v,[j]}`.
    M(usize),
}

/// Compression-index slot of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressionSlot {
    Fixed,
    /// `z_{v,[j]}`.
    Z(usize),
}

fn slot(b: usize, big_b: usize, v: usize) -> MessageSlot {
    if v <= b && b < big_b + v {
        MessageSlot::M(b + 1 - v)
    } else {
        MessageSlot::Fixed
    }
}

/// `w_{v,[b]}`: `m_{v,[b−V+1]}` for `V ≤ b ≤ B+V−1`, otherwise 1. The
/// same for every node.
pub fn message_index(b: usize, big_b: usize, v: usize) -> Result<MessageSlot> {
    let total = num_blocks(big_b, v)?;
    if b < 1 || b > total {
        return Err(Error::Schedule(format!("block {b} outside 1..={total}")));
    }
    Ok(slot(b, big_b, v))
}

/// Codebook used in block `b`, as a residue in `0..V`.
pub fn codebook_index(b: usize, v: usize) -> usize {
    b % v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSymbol {
    pub node: usize,
    pub block: usize,
    pub w: MessageSlot,
    pub z: CompressionSlot,
}

/// Quantization codeword `ŷ_v(w-slot, z_{v,[block]} | x_{v,[block]})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantSymbol {
    pub node: usize,
    pub block: usize,
    pub w: MessageSlot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSchedule {
    pub node: usize,
    /// Source codeword index per block (`None` outside the message window).
    pub source: Vec<Option<usize>>,
    pub transmit: Vec<BlockSymbol>,
    pub quantize: Vec<QuantSymbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub nodes: usize,
    pub blocks: usize,
    pub total_blocks: usize,
    pub rows: Vec<NodeSchedule>,
}

fn m_text(node: usize, s: MessageSlot) -> String {
    match s {
        MessageSlot::Fixed => "1".into(),
        MessageSlot::M(j) => format!("m{}[{j}]", node + 1),
    }
}

impl BlockSymbol {
    pub fn text(&self) -> String {
        let z = match self.z {
            CompressionSlot::Fixed => "1".into(),
            CompressionSlot::Z(j) => format!("z{}[{j}]", self.node + 1),
        };
        format!("x{}({},{z})", self.node + 1, m_text(self.node, self.w))
    }
}

impl QuantSymbol {
    pub fn text(&self) -> String {
        let v = self.node + 1;
        format!("yhat{v}({},z{v}[{}]|x{v}[{}])", m_text(self.node, self.w), self.block, self.block)
    }
}

/// Per-node, per-block schedule for nodes `which` (0-based).
pub fn render_schedule(v: usize, big_b: usize, which: &[usize]) -> Result<Schedule> {
    let total = num_blocks(big_b, v)?;
    if let Some(&bad) = which.iter().find(|&&n| n >= v) {
        return Err(Error::Schedule(format!("node {} outside 1..={v}", bad + 1)));
    }
    let rows = which
        .iter()
        .map(|&node| NodeSchedule {
            node,
            source: (1..=total)
                .map(|b| match slot(b, big_b, v) {
                    MessageSlot::M(j) => Some(j),
                    MessageSlot::Fixed => None,
                })
                .collect(),
            transmit: (1..=total)
                .map(|b| BlockSymbol {
                    node,
                    block: b,
                    w: if b == 1 { MessageSlot::Fixed } else { slot(b, big_b, v) },
                    z: if b == 1 { CompressionSlot::Fixed } else { CompressionSlot::Z(b - 1) },
                })
                .collect(),
            quantize: (1..=total).map(|b| QuantSymbol { node, block: b, w: slot(b + 1, big_b, v) }).collect(),
        })
        .collect();
    Ok(Schedule { nodes: v, blocks: big_b, total_blocks: total, rows })
}

impl Schedule {
    /// Header plus three rows per node (source, transmit, quantize).
    pub fn cells(&self) -> Vec<Vec<String>> {
        let mut out = vec![std::iter::once("node".to_string()).chain((1..=self.total_blocks).map(|b| format!("block {b}"))).collect()];
        for r in &self.rows {
            let v = r.node + 1;
            out.push(
                std::iter::once(String::new())
                    .chain(r.source.iter().map(|s| s.map(|j| format!("u{v}(m{v}[{j}])")).unwrap_or_default()))
                    .collect(),
            );
            out.push(std::iter::once(v.to_string()).chain(r.transmit.iter().map(BlockSymbol::text)).collect());
            out.push(std::iter::once(String::new()).chain(r.quantize.iter().map(QuantSymbol::text)).collect());
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.cells() {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells = self.cells();
        let cols = cells[0].len();
        let width: Vec<usize> =
            (0..cols).map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        for row in &cells {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                let _ = write!(line, "{cell:<w$}", w = width[c]);
            }
            writeln!(f, "{}", line.trim_end())?;
        }
        Ok(())
    }
}

/// One typicality check of the sliding-window decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub k: usize,
    /// `b − k + 1`; 0 when the check would reach before block 1.
    pub block: usize,
    /// `L_k` (empty for `k = ℓ + 1`).
    pub decoded: NodeSet,
    /// Channel check applies (`b − k + 1 ≥ 1`).
    pub channel_check: bool,
    /// Source check applies (`V ≤ b − k + 1 ≤ V + B`).
    pub source_check: bool,
}

/// Checks made by a receiver at the end of block `b` with partition `c`.
pub fn decode_window(params: &SchemeParams, c: &OrderedPartition, b: usize) -> Result<Vec<WindowEntry>> {
    params.check()?;
    let l = c.len();
    if l != params.window {
        return Err(Error::Schedule(format!("partition has {l} blocks, window length is {}", params.window)));
    }
    if b < l {
        return Err(Error::Schedule(format!("block {b} precedes the first full window ({l})")));
    }
    Ok((1..=l + 1)
        .map(|k| {
            let block = (b + 1).saturating_sub(k);
            WindowEntry {
                k,
                block,
                decoded: c.blocks.get(k - 1).copied().unwrap_or(NodeSet::EMPTY),
                channel_check: block >= 1,
                source_check: params.nodes <= block && block <= params.nodes + params.blocks,
            }
        })
        .collect())
}

/// Block at whose end every source message has been decoded: `B + V + ℓ − 2`.
pub fn completion_block(params: &SchemeParams) -> Result<usize> {
    params.check()?;
    Ok(params.blocks + params.nodes + params.window - 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeExponents {
    pub node: usize,
    /// `H(U_v) + I(Y_v; Ŷ_v | X_v) + 2δ`.
    pub codewords: f64,
    /// `I(Y_v; Ŷ_v | X_v) + δ`.
    pub bin_list: f64,
    /// `H(U_v) + δ`.
    pub source_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBookkeeping {
    pub delta: f64,
    pub nodes: Vec<NodeExponents>,
}

/// Codebook-size exponents (bits per channel use) for every node with an
/// input variable in `joint`. A missing `U_v` counts as a constant source.
pub fn rate_bookkeeping(joint: &JointPmf, delta: f64) -> Result<RateBookkeeping> {
    if !(delta >= 0.0) {
        return Err(Error::Precondition(format!("delta must be nonnegative, got {delta}")));
    }
    let e = Entropies::new(joint);
    let mut nodes = Vec::new();
    for v in joint.vars().iter().filter(|v| v.role == Role::InputX).map(|v| v.node) {
        let one = NodeSet::singleton(v);
        let hu = e.h(joint.select(Role::SourceU, one))?;
        let i = e.cmi(joint.var_set([VarId::y(v)])?, joint.var_set([VarId::yhat(v)])?, joint.var_set([VarId::x(v)])?)?;
        nodes.push(NodeExponents { node: v, codewords: hu + i + 2.0 * delta, bin_list: i + delta, source_index: hu + delta });
    }
    Ok(RateBookkeeping { delta, nodes })
}
