//! Scalar Gaussian relay networks: cut values of the compress-and-forward
//! rate with Gaussian quantization, the product-input cut-set bound, and
//! the constant-gap check for quantization at noise level.
//!
//! Node 1 is the transmitter (no observation), node V the destination (no
//! input). `Y_v = Σ_u h_{u,v} X_u + Z_v` with `Z_v ~ N(0, σ²_v)`,
//! independent `X_u ~ N(0, P_u)` and `Ŷ_v = Y_v + N(0, q_v)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nodes::{NodeSet, MAX_NODES};

/// Diagonal loading used when a covariance fails to factor.
pub const RIDGE: f64 = 1e-12;
/// Largest network accepted by [`verify_gap`].
pub const MAX_GAP_NODES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNetwork {
    /// `gains[u][v]`: gain from the input of `u` to the output of `v`.
    pub gains: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCoding {
    pub powers: Vec<f64>,
    pub quant_noise: Vec<f64>,
}

impl GaussianCoding {
    /// Full power and `q_v = σ²_v`.
    pub fn at_noise_level(net: &GaussianNetwork) -> Self {
        GaussianCoding { powers: net.power.clone(), quant_noise: net.noise.clone() }
    }
}

/// A value in bits, flagged when a ridge had to be added to factor a
/// covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianValue {
    pub bits: f64,
    pub regularized: bool,
}

fn finite_all(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl GaussianNetwork {
    pub fn num_nodes(&self) -> usize {
        self.noise.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.noise.len();
        if n < 2 {
            return Err(Error::InvalidNetwork("a relay network needs at least two nodes".into()));
        }
        if n > MAX_NODES {
            return Err(Error::TooManyNodes { got: n, cap: MAX_NODES });
        }
        if self.power.len() != n || self.gains.len() != n || self.gains.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch { expected: n, got: self.power.len().min(self.gains.len()) });
        }
        if !self.gains.iter().all(|r| finite_all(r)) || !finite_all(&self.noise) || !finite_all(&self.power) {
            return Err(Error::InvalidNetwork("non-finite parameter".into()));
        }
        if let Some(v) = (1..n).find(|&v| self.noise[v] <= 0.0) {
            return Err(Error::InvalidNetwork(format!("noise variance of node {} must be positive", v + 1)));
        }
        if let Some(v) = self.power.iter().position(|&p| p < 0.0) {
            return Err(Error::InvalidNetwork(format!("power of node {} must be nonnegative", v + 1)));
        }
        Ok(())
    }

    fn check_coding(&self, c: &GaussianCoding) -> Result<()> {
        self.validate()?;
        let n = self.num_nodes();
        if c.powers.len() != n || c.quant_noise.len() != n {
            return Err(Error::InvalidCoding(format!("expected {n} powers and quantization noises")));
        }
        for v in 0..n {
            if !(c.powers[v] >= 0.0 && c.powers[v] <= self.power[v] + 1e-12) {
                return Err(Error::InvalidCoding(format!("power of node {} outside [0, P]", v + 1)));
            }
            if v > 0 && !(c.quant_noise[v] > 0.0) {
                return Err(Error::InvalidCoding(format!("quantization noise of node {} must be positive", v + 1)));
            }
        }
        Ok(())
    }
}

/// `log2 det(m)` for a symmetric positive-definite matrix.
fn log2_det(m: DMatrix<f64>) -> (f64, bool) {
    let n = m.nrows();
    if n == 0 {
        return (0.0, false);
    }
    let (chol, regularized) = match m.clone().cholesky() {
        Some(c) => (c, false),
        None => match (m + DMatrix::identity(n, n) * RIDGE).cholesky() {
            Some(c) => (c, true),
            None => return (f64::NEG_INFINITY, true),
        },
    };
    let l = chol.l();
    (2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>() / std::f64::consts::LN_2, regularized)
}

/// `I(X_S; O)` for observations `O = H X_S + N`, `N ~ N(0, diag(noise))`.
fn gaussian_mi(gain: &DMatrix<f64>, power: &[f64], noise: &[f64]) -> (f64, bool) {
    let p = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(power));
    let n = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(noise));
    let (a, ra) = log2_det(&n + gain * p * gain.transpose());
    let (b, rb) = log2_det(n);
    (0.5 * (a - b), ra || rb)
}

/// Compress-and-forward cut value for cut `S` (source side) and receiver
/// `b ∉ S`: `I(X_S; Y_b Ŷ_{S^C∖b} | X_{S^C}) − I(Y_S; Ŷ_S | X_V Y_b Ŷ_{S^C∖b})`,
/// both terms as log-determinant ratios.
pub fn gaussian_cut_value(net: &GaussianNetwork, coding: &GaussianCoding, s: NodeSet, b: usize) -> Result<GaussianValue> {
    net.check_coding(coding)?;
    let n = net.num_nodes();
    if b >= n || s.contains(b) {
        return Err(Error::ReceiverInCut { receiver: b + 1, cut: s });
    }
    if !s.is_subset_of(NodeSet::full(n)) || !s.contains(0) {
        return Err(Error::Precondition(format!("cut {s} must contain node 1")));
    }
    let senders: Vec<usize> = s.iter().collect();
    let mut obs = vec![b];
    obs.extend(NodeSet::full(n).difference(s).without(b).iter().filter(|&v| v != 0));
    let gain = DMatrix::from_fn(obs.len(), senders.len(), |r, c| net.gains[senders[c]][obs[r]]);
    let power: Vec<f64> = senders.iter().map(|&u| coding.powers[u]).collect();
    let noise: Vec<f64> = obs
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == 0 { net.noise[v] } else { net.noise[v] + coding.quant_noise[v] })
        .collect();
    let (flow, r1) = gaussian_mi(&gain, &power, &noise);
    // Given X_V the observations of S are their own noises, independent of
    // everything else on the conditioning side.
    let watchers: Vec<usize> = senders.iter().copied().filter(|&v| v != 0).collect();
    let k = watchers.len();
    let (a, r2) = log2_det(DMatrix::from_fn(k, k, |i, j| if i == j { net.noise[watchers[i]] + coding.quant_noise[watchers[i]] } else { 0.0 }));
    let (c, r3) = log2_det(DMatrix::from_fn(k, k, |i, j| if i == j { coding.quant_noise[watchers[i]] } else { 0.0 }));
    Ok(GaussianValue { bits: flow - 0.5 * (a - c), regularized: r1 || r2 || r3 })
}

fn relay_cuts(n: usize) -> Vec<NodeSet> {
    NodeSet::singleton(0).supersets_within(NodeSet::full(n).without(n - 1))
}

/// Minimum over cuts `S ∋ 1`, `V ∉ S` of the clipped cut value.
pub fn gaussian_relay_rate(net: &GaussianNetwork, coding: &GaussianCoding) -> Result<GaussianValue> {
    let n = net.num_nodes();
    net.check_coding(coding)?;
    let mut best = GaussianValue { bits: f64::INFINITY, regularized: false };
    for s in relay_cuts(n) {
        let v = gaussian_cut_value(net, coding, s, n - 1)?;
        best.bits = best.bits.min(v.bits.max(0.0));
        best.regularized |= v.regularized;
    }
    Ok(best)
}

/// Product-input cut-set bound `min_S I(X_S; Y_{S^C} | X_{S^C})` over relay cuts.
pub fn gaussian_cutset(net: &GaussianNetwork, powers: &[f64]) -> Result<GaussianValue> {
    net.validate()?;
    let n = net.num_nodes();
    if powers.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: powers.len() });
    }
    let mut best = GaussianValue { bits: f64::INFINITY, regularized: false };
    for s in relay_cuts(n) {
        let senders: Vec<usize> = s.iter().collect();
        let obs: Vec<usize> = NodeSet::full(n).difference(s).iter().collect();
        let gain = DMatrix::from_fn(obs.len(), senders.len(), |r, c| net.gains[senders[c]][obs[r]]);
        let p: Vec<f64> = senders.iter().map(|&u| powers[u]).collect();
        let noise: Vec<f64> = obs.iter().map(|&v| net.noise[v]).collect();
        let (v, r) = gaussian_mi(&gain, &p, &noise);
        best.bits = best.bits.min(v);
        best.regularized |= r;
    }
    Ok(best)
}

/// `⌊3V/2⌋ − 1`.
pub fn gap_bound(v: usize) -> f64 {
    (3 * v / 2) as f64 - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub cutset: f64,
    pub rate: f64,
    pub gap: f64,
    pub bound: f64,
    /// `bound − gap`.
    pub slack: f64,
    pub passed: bool,
    pub regularized: bool,
}

/// Compares the cut-set bound at full power with the rate achieved by
/// quantizing at noise level.
pub fn verify_gap(net: &GaussianNetwork) -> Result<GapReport> {
    let n = net.num_nodes();
    if n > MAX_GAP_NODES {
        return Err(Error::TooManyNodes { got: n, cap: MAX_GAP_NODES });
    }
    let cut = gaussian_cutset(net, &net.power)?;
    let rate = gaussian_relay_rate(net, &GaussianCoding::at_noise_level(net))?;
    let gap = cut.bits - rate.bits;
    let bound = gap_bound(n);
    Ok(GapReport {
        cutset: cut.bits,
        rate: rate.bits,
        gap,
        bound,
        slack: bound - gap,
        passed: gap <= bound + 1e-6,
        regularized: cut.regularized || rate.regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p2p(h: f64, p: f64) -> GaussianNetwork {
        GaussianNetwork { gains: vec![vec![0.0, h], vec![0.0, 0.0]], noise: vec![1.0, 1.0], power: vec![p, 0.0] }
    }

    fn line(h01: f64, h02: f64, h12: f64) -> GaussianNetwork {
        GaussianNetwork {
            gains: vec![vec![0.0, h01, h02], vec![0.0, 0.0, h12], vec![0.0; 3]],
            noise: vec![1.0; 3],
            power: vec![1.0, 1.0, 0.0],
        }
    }

    #[test]
    fn point_to_point() {
        let net = p2p(2.0, 3.0);
        let c = GaussianCoding::at_noise_level(&net);
        let v = gaussian_cut_value(&net, &c, NodeSet::singleton(0), 1).unwrap();
        assert!((v.bits - 0.5 * (1.0f64 + 12.0).log2()).abs() < 1e-12);
        assert!(!v.regularized);
        let zero = p2p(2.0, 0.0);
        assert_eq!(gaussian_relay_rate(&zero, &GaussianCoding::at_noise_level(&zero)).unwrap().bits, 0.0);
        let r = verify_gap(&net).unwrap();
        assert!(r.gap.abs() < 1e-12 && r.passed);
    }

    #[test]
    fn compression_cost_matches_closed_form() {
        let net = line(1.5, 0.5, 2.0);
        let mut c = GaussianCoding::at_noise_level(&net);
        c.quant_noise[1] = 0.3;
        let full = gaussian_cut_value(&net, &c, NodeSet::from_nodes([0, 1]), 2).unwrap().bits;
        // I(X1 X2; Y3) − ½log2(1 + σ²/q)
        let oracle = 0.5 * (1.0f64 + 0.25 + 4.0).log2() - 0.5 * (1.0f64 + 1.0 / 0.3).log2();
        assert!((full - oracle).abs() < 1e-12);
        // cut {1}: observations Y3 and Ŷ2 with noise 1 + q
        let v = gaussian_cut_value(&net, &c, NodeSet::singleton(0), 2).unwrap().bits;
        let oracle = 0.5 * (1.0f64 + 0.25 + 1.5f64.powi(2) / 1.3).log2();
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn large_quantization_noise_leaves_direct_link() {
        let net = line(1.5, 0.7, 2.0);
        let mut c = GaussianCoding::at_noise_level(&net);
        c.quant_noise[1] = 1e9;
        let r = gaussian_relay_rate(&net, &c).unwrap().bits;
        assert!((r - 0.5 * (1.0f64 + 0.49).log2()).abs() < 1e-6);
        // a deaf relay that still describes its noise pays ½ bit on the
        // cut containing it; with a useless description it drops out
        let zero_relay = line(0.0, 0.7, 0.0);
        let r = gaussian_relay_rate(&zero_relay, &GaussianCoding::at_noise_level(&zero_relay)).unwrap().bits;
        assert_eq!(r, (0.5 * (1.0f64 + 0.49).log2() - 0.5).max(0.0));
        let mut c = GaussianCoding::at_noise_level(&zero_relay);
        c.quant_noise[1] = 1e9;
        let r = gaussian_relay_rate(&zero_relay, &c).unwrap().bits;
        assert!((r - 0.5 * (1.0f64 + 0.49).log2()).abs() < 1e-6);
    }

    #[test]
    fn diamond_is_min_over_four_cuts() {
        let net = GaussianNetwork {
            gains: vec![vec![0.0, 1.2, 1.2, 0.0], vec![0.0, 0.0, 0.0, 0.8], vec![0.0, 0.0, 0.0, 0.8], vec![0.0; 4]],
            noise: vec![1.0; 4],
            power: vec![1.0, 1.0, 1.0, 0.0],
        };
        let c = GaussianCoding::at_noise_level(&net);
        let cuts = [NodeSet::from_nodes([0]), NodeSet::from_nodes([0, 1]), NodeSet::from_nodes([0, 2]), NodeSet::from_nodes([0, 1, 2])];
        let brute = cuts.iter().map(|&s| gaussian_cut_value(&net, &c, s, 3).unwrap().bits.max(0.0)).fold(f64::INFINITY, f64::min);
        assert_eq!(gaussian_relay_rate(&net, &c).unwrap().bits, brute);
    }

    #[test]
    fn gap_formula() {
        assert_eq!(gap_bound(4), 5.0);
        assert_eq!(gap_bound(2), 2.0);
        assert_eq!(gap_bound(6), 8.0);
    }

    #[test]
    fn rejects_bad_input() {
        let mut net = p2p(1.0, 1.0);
        net.noise[1] = 0.0;
        assert!(net.validate().is_err());
        let net = p2p(1.0, 1.0);
        let mut c = GaussianCoding::at_noise_level(&net);
        c.quant_noise[1] = 0.0;
        assert!(gaussian_cut_value(&net, &c, NodeSet::singleton(0), 1).is_err());
        assert!(gaussian_cut_value(&net, &GaussianCoding::at_noise_level(&net), NodeSet::full(2), 1).is_err());
    }

    #[test]
    fn monotone_in_power_and_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let g: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let net = line(g[0], g[1], g[2]);
            let mut prev = -1.0;
            for p in [0.0, 0.25, 0.5, 1.0] {
                let mut c = GaussianCoding::at_noise_level(&net);
                c.powers[1] = p;
                let r = gaussian_relay_rate(&net, &c).unwrap().bits;
                assert!(r >= prev - 1e-12);
                prev = r;
            }
            // more quantization noise at a node outside the cut never helps
            let s = NodeSet::singleton(0);
            let mut prev = f64::INFINITY;
            for q in [0.1, 1.0, 10.0, 100.0] {
                let mut c = GaussianCoding::at_noise_level(&net);
                c.quant_noise[1] = q;
                let v = gaussian_cut_value(&net, &c, s, 2).unwrap().bits;
                assert!(v <= prev + 1e-12);
                prev = v;
            }
            let full = gaussian_cutset(&net, &net.power).unwrap().bits;
            assert!(gaussian_relay_rate(&net, &GaussianCoding::at_noise_level(&net)).unwrap().bits <= full + 1e-9);
        }
    }
}
