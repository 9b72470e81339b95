//! Node subsets as bitmasks.
//!
//! Nodes are indexed from 0 inside the library. Everything user-facing
//! (display, JSON) uses the 1-based numbering of the network description.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Hard cap on network size for exhaustive cut enumeration.
pub const MAX_NODES: usize = 12;

/// A subset of network nodes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct NodeSet(u32);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn from_bits(bits: u32) -> Self {
        NodeSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// All nodes `0..n`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= 32);
        if n >= 32 {
            NodeSet(u32::MAX)
        } else {
            NodeSet((1u32 << n) - 1)
        }
    }

    pub fn singleton(v: usize) -> Self {
        NodeSet(1 << v)
    }

    pub fn from_nodes<I: IntoIterator<Item = usize>>(nodes: I) -> Self {
        NodeSet(nodes.into_iter().fold(0, |acc, v| acc | (1 << v)))
    }

    pub fn contains(self, v: usize) -> bool {
        v < 32 && self.0 & (1 << v) != 0
    }

    pub fn with(self, v: usize) -> Self {
        NodeSet(self.0 | (1 << v))
    }

    pub fn without(self, v: usize) -> Self {
        NodeSet(self.0 & !(1 << v))
    }

    pub fn union(self, other: NodeSet) -> Self {
        NodeSet(self.0 | other.0)
    }

    pub fn intersection(self, other: NodeSet) -> Self {
        NodeSet(self.0 & other.0)
    }

    pub fn difference(self, other: NodeSet) -> Self {
        NodeSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: NodeSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(v)
            }
        })
    }

    /// Every subset of `self` (including the empty set and `self`), ordered
    /// by increasing size and then by numeric mask value. This is the
    /// canonical enumeration order used for tie-breaking in all reports.
    pub fn subsets(self) -> Vec<NodeSet> {
        let mut out = Vec::with_capacity(1 << self.len());
        let mut sub = 0u32;
        loop {
            out.push(NodeSet(sub));
            if sub == self.0 {
                break;
            }
            sub = (sub.wrapping_sub(self.0)) & self.0;
        }
        out.sort_by_key(|s| (s.len(), s.0));
        out
    }

    /// Nonempty subsets in canonical order.
    pub fn nonempty_subsets(self) -> Vec<NodeSet> {
        self.subsets().into_iter().filter(|s| !s.is_empty()).collect()
    }

    /// Sets `W` with `self ⊆ W ⊆ universe`, in canonical order.
    pub fn supersets_within(self, universe: NodeSet) -> Vec<NodeSet> {
        debug_assert!(self.is_subset_of(universe));
        let mut out: Vec<NodeSet> = universe
            .difference(self)
            .subsets()
            .into_iter()
            .map(|extra| extra.union(self))
            .collect();
        out.sort_by_key(|s| (s.len(), s.0));
        out
    }

    /// 1-based node labels.
    pub fn labels(self) -> Vec<usize> {
        self.iter().map(|v| v + 1).collect()
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        NodeSet::from_nodes(iter)
    }
}

impl Serialize for NodeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.labels().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(deserializer)?;
        let mut set = NodeSet::EMPTY;
        for l in labels {
            if l == 0 || l > 32 {
                return Err(serde::de::Error::custom(format!(
                    "node label {l} outside 1..=32"
                )));
            }
            set = set.with(l - 1);
        }
        Ok(set)
    }
}
