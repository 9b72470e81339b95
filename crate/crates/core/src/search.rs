//! Grid coordinate ascent over input distributions and quantizers.
//!
//! Each coordinate is one simplex: a node's input distribution or one row
//! `p(· | x, y)` of a node's quantizer. A round sweeps every coordinate,
//! moving it to the best grid point with the others fixed. Restart 0 starts
//! from uniform inputs and copy quantizers, later restarts from random grid
//! points drawn from a per-restart stream of the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cuts::{relay_cf_rate, sw_feasible, two_way_rates, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::network::{CodingChoice, CooperativeNetwork, Quantizer};

/// Largest number of grid points allowed on a single coordinate.
pub const MAX_GRID_POINTS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Smallest multicast feasibility margin.
    MinMargin,
    /// Compress-and-forward relay rate.
    RelayRate,
    /// `R_1 + R_N` of the two-way relay rates.
    TwoWaySum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Grid points per probability: masses are multiples of `1/(resolution−1)`.
    pub resolution: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_rounds: usize,
    pub objective: Objective,
    /// `|Ŷ_v|` for searched quantizers; `None` means `|Y_v| + 1`.
    pub quantizer_alphabet: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { resolution: 11, restarts: 4, seed: 0, max_rounds: 20, objective: Objective::MinMargin, quantizer_alphabet: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub round: usize,
    pub coordinate: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub coding: CodingChoice,
    pub value: f64,
    pub restart: usize,
    /// Nodes (0-based) whose quantizer was searched, with the `|Ŷ|` used.
    pub searched_quantizers: Vec<(usize, usize)>,
    pub trace: Vec<TraceEntry>,
}

/// Objective value of a coding choice.
pub fn evaluate(net: &CooperativeNetwork, coding: &CodingChoice, objective: Objective) -> Result<f64> {
    match objective {
        Objective::MinMargin => Ok(sw_feasible(net, coding, DEFAULT_EPSILON)?.min_margin()),
        Objective::RelayRate => relay_cf_rate(net, coding),
        Objective::TwoWaySum => two_way_rates(net, coding).map(|(a, b)| a + b),
    }
}

#[derive(Debug, Clone, Copy)]
enum Coord {
    Input(usize),
    /// Node and row index `x · |Y| + y`.
    Row(usize, usize),
}

/// All compositions of `total` into `parts` nonnegative parts, as pmfs.
fn simplex_grid(parts: usize, total: usize) -> Vec<Vec<f64>> {
    fn rec(parts: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for i in (0..=left).rev() {
            cur.push(i);
            rec(parts - 1, left - i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(parts, total, &mut Vec::new(), &mut out);
    out.into_iter().map(|c| c.into_iter().map(|k| k as f64 / total as f64).collect()).collect()
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn searched_quantizers(net: &CooperativeNetwork, objective: Objective) -> Vec<usize> {
    let n = net.num_nodes();
    (0..n)
        .filter(|&v| net.output_alphabets[v] > 1)
        .filter(|&v| match objective {
            Objective::RelayRate => v + 1 != n,
            Objective::TwoWaySum => v != 0 && v + 1 != n,
            Objective::MinMargin => net.receivers != [v],
        })
        .collect()
}

fn get(c: &CodingChoice, coord: Coord) -> Vec<f64> {
    match coord {
        Coord::Input(v) => c.input_dists[v].clone(),
        Coord::Row(v, r) => {
            let a = c.quantizers[v].alphabet;
            c.quantizers[v].kernel[r * a..(r + 1) * a].to_vec()
        }
    }
}

fn set(c: &mut CodingChoice, coord: Coord, p: &[f64]) {
    match coord {
        Coord::Input(v) => c.input_dists[v] = p.to_vec(),
        Coord::Row(v, r) => {
            let a = c.quantizers[v].alphabet;
            c.quantizers[v].kernel[r * a..(r + 1) * a].copy_from_slice(p);
        }
    }
}

fn label(coord: Coord, net: &CooperativeNetwork) -> String {
    match coord {
        Coord::Input(v) => format!("p(x{})", v + 1),
        Coord::Row(v, r) => {
            let ya = net.output_alphabets[v];
            format!("p(yhat{} | x={}, y={})", v + 1, r / ya, r % ya)
        }
    }
}

/// Value used for comparisons: NaN ranks lowest.
fn key(v: f64) -> f64 {
    if v.is_nan() { f64::NEG_INFINITY } else { v }
}

/// Coordinate ascent with restarts; the best restart (ties to the lowest
/// index) is returned with its value recomputed from scratch.
pub fn optimize_coding(net: &CooperativeNetwork, config: &SearchConfig) -> Result<SearchResult> {
    if config.resolution < 2 || config.restarts < 1 {
        return Err(Error::Precondition("resolution must be at least 2 and restarts at least 1".into()));
    }
    net.check_size()?;
    let total = config.resolution - 1;
    let qnodes = searched_quantizers(net, config.objective);
    let yhat = |v: usize| config.quantizer_alphabet.unwrap_or(net.output_alphabets[v] + 1).max(1);

    let mut coords: Vec<Coord> = (0..net.num_nodes()).filter(|&v| net.input_alphabets[v] > 1).map(Coord::Input).collect();
    for &v in &qnodes {
        coords.extend((0..net.input_alphabets[v] * net.output_alphabets[v]).map(|r| Coord::Row(v, r)));
    }
    let mut grids = std::collections::HashMap::new();
    for &c in &coords {
        let parts = match c {
            Coord::Input(v) => net.input_alphabets[v],
            Coord::Row(v, _) => yhat(v),
        };
        let count = binom(total + parts - 1, parts - 1);
        if count > MAX_GRID_POINTS {
            return Err(Error::SizeCap { entries: count as u128, cap: MAX_GRID_POINTS });
        }
        grids.entry(parts).or_insert_with(|| simplex_grid(parts, total));
    }

    let mut start = CodingChoice::uniform_copy(net);
    for &v in &qnodes {
        let (xa, ya, a) = (net.input_alphabets[v], net.output_alphabets[v], yhat(v));
        let mut kernel = vec![0.0; xa * ya * a];
        for row in 0..xa * ya {
            kernel[row * a + (row % ya).min(a - 1)] = 1.0;
        }
        start.quantizers[v] = Quantizer { alphabet: a, kernel };
    }

    let run = |restart: usize| -> Result<(CodingChoice, f64, Vec<TraceEntry>)> {
        let mut coding = start.clone();
        if restart > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(restart as u64);
            for &c in &coords {
                let g = &grids[&get(&coding, c).len()];
                set(&mut coding, c, &g[rng.random_range(0..g.len())]);
            }
        }
        let mut value = evaluate(net, &coding, config.objective)?;
        let mut trace = vec![TraceEntry { restart, round: 0, coordinate: "start".into(), value }];
        for round in 1..=config.max_rounds {
            let mut improved = false;
            for &c in &coords {
                let current = get(&coding, c);
                let mut best: Option<(f64, &Vec<f64>)> = None;
                for p in &grids[&current.len()] {
                    set(&mut coding, c, p);
                    let v = key(evaluate(net, &coding, config.objective)?);
                    if v > best.map_or(key(value), |b| b.0) {
                        best = Some((v, p));
                    }
                }
                match best {
                    Some((v, p)) => {
                        set(&mut coding, c, p);
                        value = v;
                        improved = true;
                        trace.push(TraceEntry { restart, round, coordinate: label(c, net), value });
                    }
                    None => set(&mut coding, c, &current),
                }
            }
            if !improved {
                break;
            }
        }
        Ok((coding, value, trace))
    };

    let runs: Vec<(CodingChoice, f64, Vec<TraceEntry>)> = (0..config.restarts).into_par_iter().map(run).collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if key(r.1) > key(runs[best].1) {
            best = i;
        }
    }
    let trace = runs.iter().flat_map(|r| r.2.iter().cloned()).collect();
    let coding = runs[best].0.clone();
    let value = evaluate(net, &coding, config.objective)?;
    Ok(SearchResult {
        coding,
        value,
        restart: best,
        searched_quantizers: qnodes.iter().map(|&v| (v, yhat(v))).collect(),
        trace,
    })
}
