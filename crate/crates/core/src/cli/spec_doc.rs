//! JSON network documents. Node labels are 1-based throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianNetwork;
use crate::network::{flat_size, CodingChoice, CooperativeNetwork, LinearFf, NetworkKind, Quantizer, SourceModel};

pub const LAYOUT: &str = "Node labels are 1-based. Tuples over several nodes are flattened row-major with node 1 \
as the most significant digit. general: kernel[x_V][y_V] = p(y_V | x_V). deterministic: outputs[x_V] lists y_v per node. \
linear_ff: matrix has sum(output_dims) rows and sum(input_dims) columns stacked in node order. \
sources.pmf is row-major over sources.nodes in order. coding.quantizers[v].kernel[x * |Y_v| + y][yhat] = p(yhat | x, y).";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpecDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
    pub nodes: NodesDoc,
    #[serde(flatten)]
    pub channel: ChannelDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<SourcesDoc>,
    #[serde(default)]
    pub receivers: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coding: Option<CodingDoc>,
    #[serde(default)]
    pub options: OptionsDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodesDoc {
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_alphabets: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_alphabets: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "channel", rename_all = "snake_case")]
pub enum ChannelDoc {
    General { kernel: Vec<Vec<f64>> },
    Deterministic { outputs: Vec<Vec<usize>> },
    LinearFf { q: u32, input_dims: Vec<usize>, output_dims: Vec<usize>, matrix: Vec<Vec<u32>> },
    Gaussian { gains: Vec<Vec<f64>>, noise: Vec<f64>, power: Vec<f64> },
    Aref { in_neighbors: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcesDoc {
    pub nodes: Vec<usize>,
    pub alphabets: Vec<usize>,
    pub pmf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerDoc {
    pub alphabet: usize,
    pub kernel: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingDoc {
    pub input_dists: Vec<Vec<f64>>,
    pub quantizers: Vec<QuantizerDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OptionsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedNetwork {
    Discrete(CooperativeNetwork),
    Gaussian(GaussianNetwork),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub network: LoadedNetwork,
    pub coding: Option<CodingChoice>,
    pub options: OptionsDoc,
}

/// Parses a document, reporting the JSON path, line and column on failure.
pub fn parse(text: &str) -> std::result::Result<NetworkSpecDoc, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        format!("at `{path}` (line {}, column {}): {inner}", inner.line(), inner.column())
    })
}

fn zero_based(labels: &[usize], n: usize, what: &str) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|&l| {
            if l == 0 || l > n {
                Err(Error::InvalidNetwork(format!("{what} label {l} outside 1..={n}")))
            } else {
                Ok(l - 1)
            }
        })
        .collect()
}

fn alphabets(doc: &Option<Vec<usize>>, n: usize, what: &str) -> Result<Vec<usize>> {
    let a = doc.clone().ok_or_else(|| Error::InvalidNetwork(format!("nodes.{what} is required for this kind")))?;
    if a.len() != n {
        return Err(Error::InvalidNetwork(format!("nodes.{what} has {} entries, nodes.count is {n}", a.len())));
    }
    Ok(a)
}

impl NetworkSpecDoc {
    pub fn into_loaded(self) -> Result<Loaded> {
        let n = self.nodes.count;
        let sources = match &self.sources {
            None => SourceModel::none(),
            Some(s) => SourceModel { nodes: zero_based(&s.nodes, n, "source")?, alphabets: s.alphabets.clone(), pmf: s.pmf.clone() },
        };
        let receivers = zero_based(&self.receivers, n, "receiver")?;
        let network = match self.channel {
            ChannelDoc::General { kernel } => {
                let xa = alphabets(&self.nodes.input_alphabets, n, "input_alphabets")?;
                let ya = alphabets(&self.nodes.output_alphabets, n, "output_alphabets")?;
                let (xs, ys) = (flat_size(&xa), flat_size(&ya));
                if kernel.len() != xs {
                    return Err(Error::InvalidNetwork(format!("channel.kernel has {} rows, expected {xs}", kernel.len())));
                }
                if let Some(i) = kernel.iter().position(|r| r.len() != ys) {
                    return Err(Error::InvalidNetwork(format!("channel.kernel row {i} has {} entries, expected {ys}", kernel[i].len())));
                }
                LoadedNetwork::Discrete(CooperativeNetwork::general(xa, ya, kernel.concat(), sources, receivers))
            }
            ChannelDoc::Deterministic { outputs } => {
                let xa = alphabets(&self.nodes.input_alphabets, n, "input_alphabets")?;
                let ya = alphabets(&self.nodes.output_alphabets, n, "output_alphabets")?;
                LoadedNetwork::Discrete(CooperativeNetwork::deterministic(xa, ya, outputs, sources, receivers)?)
            }
            ChannelDoc::LinearFf { q, input_dims, output_dims, matrix } => {
                if input_dims.len() != n {
                    return Err(Error::InvalidNetwork(format!("channel.input_dims has {} entries, nodes.count is {n}", input_dims.len())));
                }
                let ff = LinearFf { q, input_dims, output_dims, matrix };
                LoadedNetwork::Discrete(CooperativeNetwork::linear_ff(ff, sources, receivers)?)
            }
            ChannelDoc::Aref { in_neighbors } => {
                let xa = alphabets(&self.nodes.input_alphabets, n, "input_alphabets")?;
                let nb = in_neighbors.iter().map(|l| zero_based(l, n, "neighbor")).collect::<Result<_>>()?;
                LoadedNetwork::Discrete(CooperativeNetwork::aref(xa, nb, sources, receivers)?)
            }
            ChannelDoc::Gaussian { gains, noise, power } => {
                if noise.len() != n {
                    return Err(Error::InvalidNetwork(format!("channel.noise has {} entries, nodes.count is {n}", noise.len())));
                }
                let g = GaussianNetwork { gains, noise, power };
                g.validate()?;
                LoadedNetwork::Gaussian(g)
            }
        };
        if let LoadedNetwork::Discrete(net) = &network {
            if net.num_nodes() != n {
                return Err(Error::InvalidNetwork(format!("channel describes {} nodes, nodes.count is {n}", net.num_nodes())));
            }
        }
        let coding = match (self.coding, &network) {
            (None, _) => None,
            (Some(_), LoadedNetwork::Gaussian(_)) => {
                return Err(Error::InvalidCoding("Gaussian networks take no discrete coding section".into()))
            }
            (Some(c), LoadedNetwork::Discrete(_)) => Some(CodingChoice {
                input_dists: c.input_dists,
                quantizers: c.quantizers.into_iter().map(|q| Quantizer { alphabet: q.alphabet, kernel: q.kernel.concat() }).collect(),
            }),
        };
        Ok(Loaded { network, coding, options: self.options })
    }

    /// Document describing a discrete network (and optional coding).
    pub fn from_network(net: &CooperativeNetwork, coding: Option<&CodingChoice>, options: OptionsDoc) -> Self {
        let n = net.num_nodes();
        let mut nodes = NodesDoc { count: n, input_alphabets: Some(net.input_alphabets.clone()), output_alphabets: Some(net.output_alphabets.clone()) };
        let channel = match &net.kind {
            NetworkKind::General => {
                let ys = net.y_size().max(1);
                ChannelDoc::General { kernel: net.channel.chunks(ys).map(|r| r.to_vec()).collect() }
            }
            NetworkKind::Deterministic { outputs } => ChannelDoc::Deterministic { outputs: outputs.clone() },
            NetworkKind::LinearFiniteField(ff) => {
                nodes.input_alphabets = None;
                nodes.output_alphabets = None;
                ChannelDoc::LinearFf { q: ff.q, input_dims: ff.input_dims.clone(), output_dims: ff.output_dims.clone(), matrix: ff.matrix.clone() }
            }
            NetworkKind::Aref { in_neighbors } => {
                nodes.output_alphabets = None;
                ChannelDoc::Aref { in_neighbors: in_neighbors.iter().map(|l| l.iter().map(|v| v + 1).collect()).collect() }
            }
        };
        let sources = (!net.sources.nodes.is_empty()).then(|| SourcesDoc {
            nodes: net.sources.nodes.iter().map(|v| v + 1).collect(),
            alphabets: net.sources.alphabets.clone(),
            pmf: net.sources.pmf.clone(),
        });
        let coding = coding.map(|c| CodingDoc {
            input_dists: c.input_dists.clone(),
            quantizers: c
                .quantizers
                .iter()
                .map(|q| QuantizerDoc { alphabet: q.alphabet, kernel: q.kernel.chunks(q.alphabet.max(1)).map(|r| r.to_vec()).collect() })
                .collect(),
        });
        NetworkSpecDoc {
            layout: Some(LAYOUT.into()),
            nodes,
            channel,
            sources,
            receivers: net.receivers.iter().map(|v| v + 1).collect(),
            coding,
            options,
        }
    }

    pub fn from_gaussian(net: &GaussianNetwork, options: OptionsDoc) -> Self {
        NetworkSpecDoc {
            layout: Some(LAYOUT.into()),
            nodes: NodesDoc { count: net.num_nodes(), input_alphabets: None, output_alphabets: None },
            channel: ChannelDoc::Gaussian { gains: net.gains.clone(), noise: net.noise.clone(), power: net.power.clone() },
            sources: None,
            receivers: vec![net.num_nodes()],
            coding: None,
            options,
        }
    }
}

impl Loaded {
    pub fn to_doc(&self) -> NetworkSpecDoc {
        match &self.network {
            LoadedNetwork::Discrete(net) => NetworkSpecDoc::from_network(net, self.coding.as_ref(), self.options),
            LoadedNetwork::Gaussian(g) => NetworkSpecDoc::from_gaussian(g, self.options),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::testnets::*;

    fn round_trip(net: &CooperativeNetwork, coding: Option<&CodingChoice>) {
        let doc = NetworkSpecDoc::from_network(net, coding, OptionsDoc { epsilon: Some(1e-6), ..Default::default() });
        let text = serde_json::to_string_pretty(&doc).unwrap();
        let back = parse(&text).unwrap().into_loaded().unwrap();
        assert_eq!(back.network, LoadedNetwork::Discrete(net.clone()));
        assert_eq!(back.coding.as_ref(), coding);
        assert_eq!(back.options.epsilon, Some(1e-6));
    }

    #[test]
    fn round_trips() {
        let src = SourceModel::independent(vec![0], vec![vec![0.9, 0.1]]);
        round_trip(&bsc(0.1).with_sources(src.clone()), None);
        round_trip(&bit_pipe(src.clone()), Some(&CodingChoice::uniform_copy(&bit_pipe(src.clone()))));
        round_trip(&gf2_line(src.clone(), vec![2]), None);
        let aref = CooperativeNetwork::aref(vec![2, 3, 1], vec![vec![], vec![0], vec![0, 1]], src, vec![2]).unwrap();
        round_trip(&aref, None);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = parse(r#"{"nodes": {"count": "two"}, "kind": "general", "channel": {"kernel": []}}"#).unwrap_err();
        assert!(err.contains("nodes.count"), "{err}");
        let err = parse(r#"{"nodes": {"count": 2}, "kind": "warp", "channel": {}}"#).unwrap_err();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn bad_labels_are_rejected() {
        let text = r#"{"nodes": {"count": 2, "input_alphabets": [2, 1], "output_alphabets": [1, 2]},
            "kind": "deterministic", "channel": {"outputs": [[0, 0], [0, 1]]}, "receivers": [3]}"#;
        assert!(parse(text).unwrap().into_loaded().is_err());
    }
}
