//! Command-line front end.
//!
//! Exit codes: 0 computed and feasible (or certified), 2 computed and
//! infeasible (or uncertified), 1 input error.

pub mod output;
pub mod spec_doc;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::cuts::{
    achievable_check, achievable_region, relay_cf_rate_detailed, relay_cutset_min, sw_feasible, two_way_rates,
    RateRegion, DEFAULT_EPSILON,
};
use crate::gaussian::verify_gap;
use crate::network::{assemble_joint, validate, CodingChoice, CooperativeNetwork, Quantizer};
use crate::nodes::NodeSet;
use crate::partition::{verify_lemma3, SamplerConfig, Substitution};
use crate::schedule::{completion_block, render_schedule, SchemeParams};
use crate::search::{optimize_coding, Objective, SearchConfig};
use output::{sig9, Report};
use spec_doc::{Loaded, LoadedNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "coopcast", version, about = "Multicast feasibility and compress-and-forward rates over cooperative networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Network document (JSON).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print the normalized network document and exit.
    #[arg(long)]
    dump_spec: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multicast feasibility of the sources under the given coding.
    Feasibility(Common),
    /// Compress-and-forward rate region; `--rates` checks a rate vector.
    Region {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
    },
    /// Relay rate from node 1 to node N.
    Relay(Common),
    /// Two-way relay rates between nodes 1 and N.
    Twoway(Common),
    /// Cut-set versus noise-level quantization gap of a Gaussian network.
    GaussianGap(Common),
    /// Certifies the union of the ordered-partition regions for each receiver.
    Lemma3 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Block-Markov transmission schedule.
    Schedule {
        #[arg(long = "V")]
        nodes: usize,
        #[arg(long = "B")]
        blocks: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Grid search over input distributions and quantizers.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::MinMargin)]
        objective: ObjectiveArg,
        #[arg(long, default_value_t = 11)]
        resolution: usize,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        #[arg(long, default_value_t = 20)]
        max_rounds: usize,
        #[arg(long)]
        quantizer_alphabet: Option<usize>,
    },
    /// Checks the document against every structural invariant.
    Validate(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    MinMargin,
    RelayRate,
    TwoWaySum,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::MinMargin => Objective::MinMargin,
            ObjectiveArg::RelayRate => Objective::RelayRate,
            ObjectiveArg::TwoWaySum => Objective::TwoWaySum,
        }
    }
}

/// Input error: printed to stderr, exit code 1.
struct Fail(String);

impl From<crate::error::Error> for Fail {
    fn from(e: crate::error::Error) -> Self {
        Fail(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Fail>;

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Fail(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("COOPCAST_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn load(path: &Path) -> CliResult<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail(format!("cannot read {}: {e}", path.display())))?;
    let doc = spec_doc::parse(&text).map_err(|e| Fail(format!("{}: {e}", path.display())))?;
    doc.into_loaded().map_err(|e| Fail(format!("{}: {e}", path.display())))
}

fn emit(report: &Report, format: Format, out: Option<&Path>) -> CliResult<i32> {
    let body = match format {
        Format::Text => report.text.clone(),
        Format::Json => serde_json::to_string_pretty(&report.json).expect("report serializes") + "\n",
        Format::Csv => report.csv.clone().ok_or_else(|| Fail("this command has no CSV output".into()))?,
    };
    match out {
        Some(p) => std::fs::write(p, body).map_err(|e| Fail(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{body}"),
    }
    Ok(report.exit)
}

struct Ctx {
    loaded: Loaded,
    epsilon: f64,
    seed: u64,
}

impl Ctx {
    fn discrete(&self) -> CliResult<&CooperativeNetwork> {
        match &self.loaded.network {
            LoadedNetwork::Discrete(n) => Ok(n),
            LoadedNetwork::Gaussian(_) => Err(Fail("this command needs a discrete network".into())),
        }
    }

    /// The document's coding, or uniform inputs with copy quantizers.
    fn coding(&self) -> CliResult<CodingChoice> {
        let net = self.discrete()?;
        Ok(self.loaded.coding.clone().unwrap_or_else(|| CodingChoice::uniform_copy(net)))
    }
}

fn violations_message(net: &CooperativeNetwork, coding: Option<&CodingChoice>) -> Option<String> {
    let v = validate(net, coding);
    (!v.is_empty()).then(|| v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n"))
}

fn context(common: &Common) -> CliResult<Ctx> {
    let loaded = load(&common.spec)?;
    if let LoadedNetwork::Discrete(net) = &loaded.network {
        if let Some(msg) = violations_message(net, loaded.coding.as_ref()) {
            return Err(Fail(format!("{} is invalid:\n{msg}", common.spec.display())));
        }
    }
    let epsilon = common.epsilon.or(loaded.options.epsilon).unwrap_or(DEFAULT_EPSILON);
    let seed = common.seed.or(loaded.options.seed).unwrap_or(0);
    Ok(Ctx { loaded, epsilon, seed })
}

fn dump(ctx: &Ctx, common: &Common) -> CliResult<i32> {
    let doc = ctx.loaded.to_doc();
    let text = serde_json::to_string_pretty(&doc).expect("document serializes") + "\n";
    let report = Report { text: text.clone(), json: serde_json::to_value(&doc).expect("document serializes"), csv: None, exit: 0 };
    emit(&report, if common.format == Format::Json { Format::Json } else { Format::Text }, common.out.as_deref())
}

fn dispatch(cmd: Command) -> CliResult<i32> {
    if let Command::Schedule { nodes, blocks, out, format } = cmd {
        return emit(&schedule(nodes, blocks)?, format, out.as_deref());
    }
    if let Command::Validate(common) = &cmd {
        return emit(&validate_cmd(common)?, common.format, common.out.as_deref());
    }
    let common = match &cmd {
        Command::Feasibility(c) | Command::Relay(c) | Command::Twoway(c) | Command::GaussianGap(c) => c,
        Command::Region { common, .. } | Command::Lemma3 { common, .. } | Command::Optimize { common, .. } => common,
        Command::Schedule { .. } | Command::Validate(_) => unreachable!(),
    };
    let ctx = context(common)?;
    if common.dump_spec {
        return dump(&ctx, common);
    }
    let report = match &cmd {
        Command::Feasibility(_) => feasibility(&ctx)?,
        Command::Region { rates, .. } => region(&ctx, rates.as_deref())?,
        Command::Relay(_) => relay(&ctx)?,
        Command::Twoway(_) => twoway(&ctx)?,
        Command::GaussianGap(_) => gaussian_gap(&ctx)?,
        Command::Lemma3 { samples, .. } => lemma3(&ctx, *samples)?,
        Command::Optimize { objective, resolution, restarts, max_rounds, quantizer_alphabet, .. } => {
            let cfg = SearchConfig {
                resolution: *resolution,
                restarts: *restarts,
                seed: ctx.seed,
                max_rounds: *max_rounds,
                objective: (*objective).into(),
                quantizer_alphabet: *quantizer_alphabet,
            };
            optimize(&ctx, &cfg)?
        }
        Command::Schedule { .. } | Command::Validate(_) => unreachable!(),
    };
    emit(&report, common.format, common.out.as_deref())
}

fn feasibility(ctx: &Ctx) -> CliResult<Report> {
    let net = ctx.discrete()?;
    let r = sw_feasible(net, &ctx.coding()?, ctx.epsilon)?;
    Ok(Report {
        text: output::feasibility_text("multicast", &r),
        json: json!({ "feasible": r.feasible, "min_margin": r.min_margin(), "report": r }),
        csv: Some(output::feasibility_csv(&r)),
        exit: if r.feasible { 0 } else { 2 },
    })
}

/// Two-node slice of the region with every other rate zero.
fn boundary(region: &RateRegion, i: usize, j: usize) -> Vec<(f64, f64)> {
    let pair = NodeSet::from_nodes([i, j]);
    let tightest = |want: NodeSet| {
        region
            .constraints
            .iter()
            .filter(|c| c.support.intersection(pair) == want)
            .map(|c| c.rhs)
            .fold(f64::INFINITY, f64::min)
    };
    output::pentagon(tightest(NodeSet::singleton(i)), tightest(NodeSet::singleton(j)), tightest(pair))
}

fn region(ctx: &Ctx, rates: Option<&[f64]>) -> CliResult<Report> {
    let net = ctx.discrete()?;
    let coding = ctx.coding()?;
    let region = achievable_region(net, &coding)?;
    let pair: Option<(usize, usize)> = match rates {
        Some(r) => {
            let nz: Vec<usize> = (0..r.len()).filter(|&v| r[v] != 0.0).collect();
            (nz.len() == 2).then(|| (nz[0], nz[1]))
        }
        None => (net.receivers.len() == 2).then(|| {
            let mut r = net.receivers.clone();
            r.sort_unstable();
            (r[0], r[1])
        }),
    };
    let points = pair.map(|(i, j)| (i, j, boundary(&region, i, j)));
    let boundary_json = points.as_ref().map(|(i, j, p)| json!({ "nodes": [i + 1, j + 1], "points": p }));
    let boundary_csv = points.as_ref().map(|(i, j, p)| {
        let rows: Vec<Vec<String>> = p.iter().map(|(x, y)| vec![sig9(*x), sig9(*y)]).collect();
        output::csv_rows(&[&format!("R{}", i + 1), &format!("R{}", j + 1)], &rows)
    });
    let mut text = output::region_text(&region);
    if let Some((i, j, p)) = &points {
        text.push_str(&format!("boundary (R{}, R{}):\n", i + 1, j + 1));
        for (x, y) in p {
            text.push_str(&format!("  {} {}\n", sig9(*x), sig9(*y)));
        }
    }
    let (check, exit) = match rates {
        Some(r) => {
            let rep = achievable_check(net, &coding, r, ctx.epsilon)?;
            text.push_str(&output::feasibility_text("rates", &rep));
            let exit = if rep.feasible { 0 } else { 2 };
            (Some(rep), exit)
        }
        None => (None, 0),
    };
    Ok(Report {
        text,
        json: json!({ "region": region, "boundary": boundary_json, "check": check }),
        csv: Some(boundary_csv.unwrap_or_else(|| output::region_csv(&region))),
        exit,
    })
}

fn relay(ctx: &Ctx) -> CliResult<Report> {
    let net = ctx.discrete()?;
    let coding = ctx.coding()?;
    let (rate, cut) = relay_cf_rate_detailed(net, &coding)?;
    let cutset = relay_cutset_min(net, &coding.input_dists)?;
    let pairs = [("rate", sig9(rate)), ("binding_cut", cut.to_string()), ("cutset_min", sig9(cutset))];
    Ok(Report {
        text: output::kv_text(&pairs),
        json: json!({ "rate": rate, "binding_cut": cut, "cutset_min": cutset }),
        csv: Some(output::kv_csv(&pairs)),
        exit: 0,
    })
}

fn twoway(ctx: &Ctx) -> CliResult<Report> {
    let net = ctx.discrete()?;
    let n = net.num_nodes();
    let coding = match &ctx.loaded.coding {
        Some(c) => c.clone(),
        None => {
            let mut c = CodingChoice::uniform_copy(net);
            for t in [0, n - 1] {
                c.quantizers[t] = Quantizer::none(net.input_alphabets[t], net.output_alphabets[t]);
            }
            c
        }
    };
    let (r1, rn) = two_way_rates(net, &coding)?;
    let k = format!("R{n}");
    let pairs = [("R1", sig9(r1)), (k.as_str(), sig9(rn)), ("sum", sig9(r1 + rn))];
    Ok(Report {
        text: output::kv_text(&pairs),
        json: json!({ "r1": r1, "rn": rn, "sum": r1 + rn }),
        csv: Some(output::kv_csv(&pairs)),
        exit: 0,
    })
}

fn gaussian_gap(ctx: &Ctx) -> CliResult<Report> {
    let LoadedNetwork::Gaussian(g) = &ctx.loaded.network else {
        return Err(Fail("gaussian-gap needs a gaussian network".into()));
    };
    let r = verify_gap(g)?;
    let pairs = [
        ("cutset", sig9(r.cutset)),
        ("rate", sig9(r.rate)),
        ("gap", sig9(r.gap)),
        ("bound", sig9(r.bound)),
        ("slack", sig9(r.slack)),
        ("passed", r.passed.to_string()),
        ("regularized", r.regularized.to_string()),
    ];
    Ok(Report {
        text: output::kv_text(&pairs),
        json: serde_json::to_value(r).expect("report serializes"),
        csv: Some(output::kv_csv(&pairs)),
        exit: if r.passed { 0 } else { 2 },
    })
}

fn lemma3(ctx: &Ctx, samples: usize) -> CliResult<Report> {
    let net = ctx.discrete()?;
    let joint = assemble_joint(net, &ctx.coding()?)?;
    let cfg = SamplerConfig { seed: ctx.seed, samples, ..Default::default() };
    let mut text = String::new();
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    let mut all = true;
    for &b in &net.receivers {
        let ground = net.nodes().without(b);
        let cert = verify_lemma3(&joint, ground, &Substitution::multicast(&joint, b), &cfg)?;
        all &= cert.certified();
        text.push_str(&format!(
            "receiver {}: Z={} partitions={} vertices={}+{} samples={} outside={} {}\n",
            b + 1,
            ground,
            cert.partitions,
            cert.partition_vertices,
            cert.unified_vertices,
            cert.samples,
            cert.outside_points,
            if cert.certified() { "certified" } else { "COUNTEREXAMPLE" }
        ));
        if let Some(c) = &cert.counterexample {
            text.push_str(&format!("  {:?} at {:?}\n", c.kind, c.point.rates));
        }
        rows.push(vec![
            (b + 1).to_string(),
            cert.partitions.to_string(),
            cert.partition_vertices.to_string(),
            cert.unified_vertices.to_string(),
            cert.samples.to_string(),
            cert.outside_points.to_string(),
            cert.certified().to_string(),
        ]);
        entries.push(json!({ "receiver": b + 1, "ground": ground, "certificate": cert }));
    }
    Ok(Report {
        text,
        json: json!({ "certified": all, "receivers": entries }),
        csv: Some(output::csv_rows(
            &["receiver", "partitions", "partition_vertices", "unified_vertices", "samples", "outside_points", "certified"],
            &rows,
        )),
        exit: if all { 0 } else { 2 },
    })
}

fn schedule(v: usize, b: usize) -> CliResult<Report> {
    let params = SchemeParams::new(v, b, v.saturating_sub(1).max(1))?;
    let s = render_schedule(v, b, &(0..v).collect::<Vec<_>>())?;
    let done = completion_block(&params)?;
    let text = format!("{s}total blocks: {}\ncompletion block (window {}): {done}\n", s.total_blocks, params.window);
    Ok(Report {
        text,
        json: json!({ "nodes": v, "blocks": b, "total_blocks": s.total_blocks, "completion_block": done, "cells": s.cells() }),
        csv: Some(s.to_csv()),
        exit: 0,
    })
}

fn optimize(ctx: &Ctx, cfg: &SearchConfig) -> CliResult<Report> {
    let net = ctx.discrete()?;
    let r = optimize_coding(net, cfg)?;
    let mut text = format!("objective: {:?}\nvalue: {}\nbest restart: {}\n", cfg.objective, sig9(r.value), r.restart);
    for (v, a) in &r.searched_quantizers {
        text.push_str(&format!("quantizer of node {} searched with |Yhat| = {a} (heuristic cap)\n", v + 1));
    }
    for (v, d) in r.coding.input_dists.iter().enumerate() {
        text.push_str(&format!("p(x{}) = [{}]\n", v + 1, d.iter().map(|p| sig9(*p)).collect::<Vec<_>>().join(", ")));
    }
    let coding_doc = spec_doc::NetworkSpecDoc::from_network(net, Some(&r.coding), ctx.loaded.options).coding;
    let rows: Vec<Vec<String>> =
        r.trace.iter().map(|t| vec![t.restart.to_string(), t.round.to_string(), format!("\"{}\"", t.coordinate), sig9(t.value)]).collect();
    Ok(Report {
        text,
        json: json!({
            "objective": cfg.objective,
            "value": r.value,
            "restart": r.restart,
            "searched_quantizers": r.searched_quantizers.iter().map(|(v, a)| json!({ "node": v + 1, "alphabet": a })).collect::<Vec<_>>(),
            "coding": coding_doc,
            "trace": r.trace,
        }),
        csv: Some(output::csv_rows(&["restart", "round", "coordinate", "value"], &rows)),
        exit: 0,
    })
}

fn validate_cmd(common: &Common) -> CliResult<Report> {
    let loaded = load(&common.spec)?;
    let problems: Vec<String> = match &loaded.network {
        LoadedNetwork::Discrete(net) => validate(net, loaded.coding.as_ref()).iter().map(|v| v.to_string()).collect(),
        LoadedNetwork::Gaussian(_) => Vec::new(),
    };
    let text = if problems.is_empty() { "valid\n".to_string() } else { problems.iter().map(|p| format!("{p}\n")).collect() };
    let rows: Vec<Vec<String>> = problems.iter().map(|p| vec![format!("\"{p}\"")]).collect();
    Ok(Report {
        text,
        json: json!({ "valid": problems.is_empty(), "violations": problems }),
        csv: Some(output::csv_rows(&["violation"], &rows)),
        exit: if problems.is_empty() { 0 } else { 1 },
    })
}
