//! Exact discrete probability engine.
//!
//! A [`JointPmf`] is a dense, row-major table over a labelled list of
//! discrete variables (first variable most significant). All information
//! functionals are in bits and use the convention `0 log 0 = 0`. Results
//! within `CLAMP_TOL` below zero snap to zero.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::nodes::NodeSet;

/// Default cap on the number of table entries.
pub const DEFAULT_TABLE_CAP: usize = 1 << 24;

/// Normalization tolerance for tables and kernel rows.
pub const NORM_TOL: f64 = 1e-12;

/// Functional values in `[-CLAMP_TOL, 0)` are reported as zero.
pub const CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    SourceU,
    InputX,
    OutputY,
    QuantY,
}

/// A variable label: which role it plays at which node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId {
    pub role: Role,
    pub node: usize,
}

impl VarId {
    pub fn new(role: Role, node: usize) -> Self {
        VarId { role, node }
    }
    pub fn u(node: usize) -> Self {
        Self::new(Role::SourceU, node)
    }
    pub fn x(node: usize) -> Self {
        Self::new(Role::InputX, node)
    }
    pub fn y(node: usize) -> Self {
        Self::new(Role::OutputY, node)
    }
    pub fn yhat(node: usize) -> Self {
        Self::new(Role::QuantY, node)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.role {
            Role::SourceU => "U",
            Role::InputX => "X",
            Role::OutputY => "Y",
            Role::QuantY => "Yhat",
        };
        write!(f, "{}{}", tag, self.node + 1)
    }
}

/// Bitmask over the variable positions of one [`JointPmf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VarSet(u64);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn from_bits(bits: u64) -> Self {
        VarSet(bits)
    }
    pub fn bits(self) -> u64 {
        self.0
    }
    pub fn union(self, o: VarSet) -> VarSet {
        VarSet(self.0 | o.0)
    }
    pub fn intersection(self, o: VarSet) -> VarSet {
        VarSet(self.0 & o.0)
    }
    pub fn difference(self, o: VarSet) -> VarSet {
        VarSet(self.0 & !o.0)
    }
    pub fn is_disjoint(self, o: VarSet) -> bool {
        self.0 & o.0 == 0
    }
    pub fn is_subset_of(self, o: VarSet) -> bool {
        self.0 & !o.0 == 0
    }
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
    pub fn contains_pos(self, pos: usize) -> bool {
        self.0 & (1 << pos) != 0
    }
}

impl std::ops::BitOr for VarSet {
    type Output = VarSet;
    fn bitor(self, rhs: VarSet) -> VarSet {
        self.union(rhs)
    }
}

fn clamp(v: f64) -> f64 {
    if (-CLAMP_TOL..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// Dense joint probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    vars: Vec<VarId>,
    alphabets: Vec<usize>,
    table: Vec<f64>,
}

impl JointPmf {
    pub fn new(vars: Vec<(VarId, usize)>, table: Vec<f64>) -> Result<Self> {
        Self::with_cap(vars, table, DEFAULT_TABLE_CAP)
    }

    pub fn with_cap(vars: Vec<(VarId, usize)>, table: Vec<f64>, cap: usize) -> Result<Self> {
        let size = checked_size(vars.iter().map(|v| v.1), cap)?;
        if vars.len() > 64 {
            return Err(Error::Precondition(format!(
                "{} variables exceed the 64-variable limit",
                vars.len()
            )));
        }
        for (i, (id, a)) in vars.iter().enumerate() {
            if *a == 0 {
                return Err(Error::Precondition(format!("variable {id} has an empty alphabet")));
            }
            if vars[..i].iter().any(|(other, _)| other == id) {
                return Err(Error::DuplicateVariable(id.to_string()));
            }
        }
        if table.len() != size {
            return Err(Error::ShapeMismatch { expected: size, got: table.len() });
        }
        if let Some((index, &value)) =
            table.iter().enumerate().find(|(_, p)| !(**p >= 0.0) || !p.is_finite())
        {
            return Err(Error::NegativeProbability { index, value });
        }
        let total: f64 = table.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(total));
        }
        let (vars, alphabets) = vars.into_iter().unzip();
        Ok(JointPmf { vars, alphabets, table })
    }

    /// Builds a table without the normalization check. Callers guarantee
    /// the table is a product of normalized factors.
    pub(crate) fn from_parts(vars: Vec<VarId>, alphabets: Vec<usize>, table: Vec<f64>) -> Self {
        debug_assert_eq!(alphabets.iter().product::<usize>(), table.len());
        JointPmf { vars, alphabets, table }
    }

    /// Uniform distribution over the given variables.
    pub fn uniform(vars: Vec<(VarId, usize)>) -> Result<Self> {
        let size = checked_size(vars.iter().map(|v| v.1), DEFAULT_TABLE_CAP)?;
        Self::new(vars, vec![1.0 / size as f64; size])
    }

    /// Independent product `self × other` (variables of `self` first).
    pub fn product(&self, other: &JointPmf) -> Result<JointPmf> {
        let mut vars: Vec<(VarId, usize)> = self.vars.iter().copied().zip(self.alphabets.iter().copied()).collect();
        vars.extend(other.vars.iter().copied().zip(other.alphabets.iter().copied()));
        checked_size(vars.iter().map(|v| v.1), DEFAULT_TABLE_CAP)?;
        for (i, (id, _)) in vars.iter().enumerate() {
            if vars[..i].iter().any(|(o, _)| o == id) {
                return Err(Error::DuplicateVariable(id.to_string()));
            }
        }
        let mut table = Vec::with_capacity(self.table.len() * other.table.len());
        for &p in &self.table {
            table.extend(other.table.iter().map(|&q| p * q));
        }
        let (vars, alphabets) = vars.into_iter().unzip();
        Ok(JointPmf { vars, alphabets, table })
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn alphabets(&self) -> &[usize] {
        &self.alphabets
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn all(&self) -> VarSet {
        VarSet(if self.vars.len() == 64 { u64::MAX } else { (1u64 << self.vars.len()) - 1 })
    }

    pub fn position(&self, id: VarId) -> Option<usize> {
        self.vars.iter().position(|v| *v == id)
    }

    /// Set containing exactly the listed variables.
    pub fn var_set<I: IntoIterator<Item = VarId>>(&self, ids: I) -> Result<VarSet> {
        let mut bits = 0u64;
        for id in ids {
            let pos = self
                .position(id)
                .ok_or_else(|| Error::Precondition(format!("variable {id} not in table")))?;
            bits |= 1 << pos;
        }
        Ok(VarSet(bits))
    }

    /// Variables of the given role at the given nodes. Nodes that carry no
    /// variable of that role (e.g. `U_v` at a non-source node) contribute
    /// nothing.
    pub fn select(&self, role: Role, nodes: NodeSet) -> VarSet {
        let mut bits = 0u64;
        for (pos, id) in self.vars.iter().enumerate() {
            if id.role == role && nodes.contains(id.node) {
                bits |= 1 << pos;
            }
        }
        VarSet(bits)
    }

    fn check(&self, s: VarSet) -> Result<()> {
        if s.0 & !self.all().0 != 0 {
            Err(Error::UnknownVariable(s.0 & !self.all().0))
        } else {
            Ok(())
        }
    }

    /// Marginal table over the positions in `keep` (kept in their original
    /// relative order).
    fn marginal_table(&self, keep: VarSet) -> Vec<f64> {
        let n = self.vars.len();
        let mut mstride = vec![0usize; n];
        let mut acc = 1usize;
        for pos in (0..n).rev() {
            if keep.contains_pos(pos) {
                mstride[pos] = acc;
                acc *= self.alphabets[pos];
            }
        }
        let msize = acc;
        if msize == self.table.len() {
            return self.table.clone();
        }
        let mut out = vec![0.0; msize];
        if msize == 1 {
            out[0] = self.table.iter().sum();
            return out;
        }
        let mut digits = vec![0usize; n];
        let mut midx = 0usize;
        for &p in &self.table {
            out[midx] += p;
            // odometer increment, last variable fastest
            let mut pos = n;
            while pos > 0 {
                pos -= 1;
                digits[pos] += 1;
                midx += mstride[pos];
                if digits[pos] < self.alphabets[pos] {
                    break;
                }
                midx -= mstride[pos] * self.alphabets[pos];
                digits[pos] = 0;
            }
        }
        out
    }

    /// Sum out every variable not in `keep`.
    pub fn marginalize(&self, keep: VarSet) -> Result<JointPmf> {
        self.check(keep)?;
        let table = self.marginal_table(keep);
        let (vars, alphabets) = self
            .vars
            .iter()
            .zip(&self.alphabets)
            .enumerate()
            .filter(|(pos, _)| keep.contains_pos(*pos))
            .map(|(_, (v, a))| (*v, *a))
            .unzip();
        Ok(JointPmf { vars, alphabets, table })
    }

    /// `H(X_s)` in bits.
    pub fn entropy(&self, s: VarSet) -> Result<f64> {
        self.check(s)?;
        if s.is_empty() {
            return Ok(0.0);
        }
        Ok(clamp(entropy_of(&self.marginal_table(s))))
    }

    /// `H(X_a | X_c)`.
    pub fn cond_entropy(&self, a: VarSet, c: VarSet) -> Result<f64> {
        Ok(clamp(self.entropy(a | c)? - self.entropy(c)?))
    }

    /// `I(X_a ; X_b | X_c)`; the three sets must be pairwise disjoint.
    pub fn cond_mutual_info(&self, a: VarSet, b: VarSet, c: VarSet) -> Result<f64> {
        if !a.is_disjoint(b) || !a.is_disjoint(c) || !b.is_disjoint(c) {
            return Err(Error::OverlappingSets);
        }
        let v = self.entropy(a | c)? + self.entropy(b | c)? - self.entropy(a | b | c)? - self.entropy(c)?;
        Ok(clamp(v))
    }

    pub fn mutual_info(&self, a: VarSet, b: VarSet) -> Result<f64> {
        self.cond_mutual_info(a, b, VarSet::EMPTY)
    }
}

fn checked_size<I: Iterator<Item = usize>>(alphabets: I, cap: usize) -> Result<usize> {
    let mut size: u128 = 1;
    for a in alphabets {
        size = size.saturating_mul(a as u128);
    }
    if size > cap as u128 {
        return Err(Error::SizeCap { entries: size, cap });
    }
    Ok(size as usize)
}

/// `-Σ p log2 p` over a probability vector, `0 log 0 = 0`.
pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Binary entropy function in bits.
pub fn h2(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

/// Memoizing view over one joint table. Entropy-heavy evaluations (cut
/// enumeration, partition regions) share marginal entropies through it.
pub struct Entropies<'a> {
    pmf: &'a JointPmf,
    memo: RefCell<HashMap<u64, f64>>,
}

impl<'a> Entropies<'a> {
    pub fn new(pmf: &'a JointPmf) -> Self {
        Entropies { pmf, memo: RefCell::new(HashMap::new()) }
    }

    pub fn pmf(&self) -> &'a JointPmf {
        self.pmf
    }

    pub fn h(&self, s: VarSet) -> Result<f64> {
        if let Some(v) = self.memo.borrow().get(&s.0) {
            return Ok(*v);
        }
        let v = self.pmf.entropy(s)?;
        self.memo.borrow_mut().insert(s.0, v);
        Ok(v)
    }

    pub fn cond_h(&self, a: VarSet, c: VarSet) -> Result<f64> {
        Ok(clamp(self.h(a | c)? - self.h(c)?))
    }

    pub fn cmi(&self, a: VarSet, b: VarSet, c: VarSet) -> Result<f64> {
        if !a.is_disjoint(b) || !a.is_disjoint(c) || !b.is_disjoint(c) {
            return Err(Error::OverlappingSets);
        }
        Ok(clamp(self.h(a | c)? + self.h(b | c)? - self.h(a | b | c)? - self.h(c)?))
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;

    /// Random normalized table over `alphabets`, some entries zeroed.
    pub fn random_table<R: Rng>(rng: &mut R, size: usize) -> Vec<f64> {
        let mut t: Vec<f64> = (0..size)
            .map(|_| if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random::<f64>() })
            .collect();
        if t.iter().all(|&p| p == 0.0) {
            t[0] = 1.0;
        }
        let s: f64 = t.iter().sum();
        t.iter_mut().for_each(|p| *p /= s);
        t
    }

    pub fn random_joint<R: Rng>(rng: &mut R, alphabets: &[usize]) -> JointPmf {
        let vars: Vec<(VarId, usize)> =
            alphabets.iter().enumerate().map(|(i, &a)| (VarId::x(i), a)).collect();
        let size = alphabets.iter().product();
        JointPmf::new(vars, random_table(rng, size)).unwrap()
    }
}
