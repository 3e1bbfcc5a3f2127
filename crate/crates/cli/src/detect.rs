use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::anyhow;
use clap::{Args, ValueEnum};
use hetcomm::edgelist::read_edge_list_with;
use hetcomm::graph::BuildMode;
use hetcomm::louvain::{self, LouvainConfig};
use hetcomm::oracle::{max_modularity_exhaustive, MAX_EXHAUSTIVE_NODES};
use serde::Serialize;

use crate::{optional_path, output, CmdResult, Failure};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Typed TSV edge list.
    pub input: PathBuf,
    /// Number of random restarts (kappa); the best modularity wins.
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop at exactly this many communities.
    #[arg(long)]
    pub k: Option<usize>,
    /// Also report the exhaustive optimum (at most 12 nodes).
    #[arg(long)]
    pub oracle: bool,
    /// Output file; stdout by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Accept weights, repeated edges (summed) and self-loops.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Serialize)]
struct NodeRow<'a> {
    #[serde(rename = "type")]
    node_type: &'a str,
    id: &'a str,
    community: usize,
}

#[derive(Serialize)]
struct Report<'a> {
    nodes: Vec<NodeRow<'a>>,
    #[serde(rename = "Q")]
    q: f64,
    #[serde(rename = "K")]
    k: usize,
    kappa: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_k: Option<usize>,
    wall_time_s: f64,
    #[serde(rename = "oracle_Q", skip_serializing_if = "Option::is_none")]
    oracle_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_gap: Option<f64>,
}

pub fn run(args: &DetectArgs) -> CmdResult {
    let mode = if args.weighted {
        BuildMode::Weighted
    } else {
        BuildMode::Simple
    };
    let g = read_edge_list_with(&args.input, mode, None)
        .map_err(|e| Failure::input(anyhow!("{}: {e}", args.input.display())))?;

    let cfg = LouvainConfig::default()
        .with_restarts(args.restarts)
        .with_seed(args.seed)
        .with_target(args.k);
    cfg.validate(&g).map_err(Failure::flags)?;
    if args.oracle && g.total_nodes() > MAX_EXHAUSTIVE_NODES {
        return Err(Failure::flags(anyhow!(
            "--oracle supports at most {MAX_EXHAUSTIVE_NODES} nodes, input has {}",
            g.total_nodes()
        )));
    }

    let start = Instant::now();
    let res = louvain::run(&g, &cfg).map_err(Failure::flags)?;
    let wall = start.elapsed().as_secs_f64();
    let oracle_q = if args.oracle {
        Some(max_modularity_exhaustive(&g).map_err(Failure::flags)?.best_modularity)
    } else {
        None
    };

    let report = Report {
        nodes: g
            .nodes()
            .map(|n| NodeRow {
                node_type: g.type_name(n.node_type),
                id: g.node_name(n),
                community: res.partition.label(n),
            })
            .collect(),
        q: res.modularity,
        k: res.num_communities,
        kappa: args.restarts,
        seed: args.seed,
        target_k: args.k,
        wall_time_s: wall,
        oracle_q,
        oracle_gap: oracle_q.map(|o| o - res.modularity),
    };

    let mut out = output(optional_path(&args.out))?;
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report).map_err(Failure::input)?;
            writeln!(out)?;
        }
        Format::Csv => write_csv(&mut out, &report)?,
    }
    out.flush()?;
    Ok(0)
}

fn write_csv(out: &mut dyn Write, r: &Report<'_>) -> Result<(), Failure> {
    writeln!(out, "# Q={}", r.q)?;
    writeln!(out, "# K={}", r.k)?;
    writeln!(out, "# kappa={}", r.kappa)?;
    writeln!(out, "# seed={}", r.seed)?;
    if let Some(k) = r.target_k {
        writeln!(out, "# target_k={k}")?;
    }
    writeln!(out, "# wall_time_s={}", r.wall_time_s)?;
    if let (Some(q), Some(gap)) = (r.oracle_q, r.oracle_gap) {
        writeln!(out, "# oracle_Q={q}")?;
        writeln!(out, "# oracle_gap={gap}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["type", "id", "community"]).map_err(Failure::input)?;
    for n in &r.nodes {
        w.write_record([n.node_type, n.id, &n.community.to_string()])
            .map_err(Failure::input)?;
    }
    w.flush()?;
    Ok(())
}
