use std::io::Write;
use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;
use hetcomm::baselines::{method1, method2};
use hetcomm::louvain::{self, LouvainConfig};
use hetcomm::metrics::nmi;
use hetcomm::modularity::Partition;
use hetcomm::sbm::{self, setting_spec, SbmSpec};
use log::info;
use rayon::prelude::*;

use crate::spec_args::{override_sizes, parse_sizes, read_config};
use crate::{optional_path, output, CmdResult, Failure};

pub const HEADER: [&str; 8] = ["setting", "r3", "rep", "method", "node_type", "nmi", "Q", "K"];

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Built-in setting (1, 2 or 3).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3),
          required_unless_present = "spec", conflicts_with = "spec")]
    pub setting: Option<u8>,
    /// Custom spec config instead of a built-in setting (no r3 sweep).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Comma-separated r3 values, or `start:stop:step`. Defaults to the
    /// setting's full range in steps of 0.025.
    #[arg(long, conflicts_with = "spec")]
    pub r3_grid: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub reps: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restarts (kappa) for every method.
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    /// Per-type community size override, e.g. `50,30`.
    #[arg(long, value_name = "N1,N2,..")]
    pub community_sizes: Option<String>,
    /// Output CSV; stdout by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("invalid number `{s}`"))
    };
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err("range must be `start:stop:step`".into());
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step <= 0.0 || stop < start {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // round away the accumulated step error
        (0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if grid.is_empty() {
        return Err("empty grid".into());
    }
    Ok(grid)
}

fn default_grid(setting: u8) -> Vec<f64> {
    let stop = if setting == 3 { 0.20 } else { 0.15 };
    parse_grid(&format!("0.05:{stop}:0.025")).expect("built-in grid")
}

/// One (r3, rep) cell of the sweep.
struct Cell {
    setting: String,
    r3: Option<f64>,
    rep: u64,
    seed: u64,
    spec: SbmSpec,
}

struct Row {
    method: &'static str,
    node_type: usize,
    nmi: f64,
    q: f64,
    k: usize,
}

fn per_type_nmi(labels: &[Vec<usize>], truth: &Partition) -> Vec<f64> {
    labels
        .iter()
        .enumerate()
        .map(|(l, p)| if p.is_empty() { 0.0 } else { nmi(p, truth.labels(l)).unwrap_or(0.0) })
        .collect()
}

fn run_cell(cell: &Cell, restarts: usize) -> Result<Vec<Row>, Failure> {
    let (g, truth) = sbm::sample(&cell.spec, cell.seed).map_err(Failure::flags)?;
    let cfg = LouvainConfig::default()
        .with_restarts(restarts)
        .with_seed(cell.seed);
    let mut rows = Vec::new();

    let res = louvain::run(&g, &cfg).map_err(Failure::flags)?;
    for (l, v) in per_type_nmi(res.partition.all_labels(), &truth).into_iter().enumerate() {
        rows.push(Row {
            method: "proposed",
            node_type: l + 1,
            nmi: v,
            q: res.modularity,
            k: res.num_communities,
        });
    }

    let m1 = method1(&g, &cfg).map_err(|e| Failure::flags(anyhow!("rep {}: {e}", cell.rep)))?;
    for (l, v) in per_type_nmi(&m1.labels, &truth).into_iter().enumerate() {
        rows.push(Row {
            method: "method1",
            node_type: l + 1,
            nmi: v,
            q: m1.modularity[0],
            k: m1.num_communities[0],
        });
    }

    let m2 = method2(&g, &cfg).map_err(Failure::flags)?;
    for (l, v) in per_type_nmi(&m2.labels, &truth).into_iter().enumerate() {
        rows.push(Row {
            method: "method2",
            node_type: l + 1,
            // no within-type edges: nothing recoverable
            nmi: if m2.degenerate[l] { 0.0 } else { v },
            q: m2.modularity[l],
            k: m2.num_communities[l],
        });
    }
    Ok(rows)
}

/// Seed of cell `(grid index, rep)`; stable under changes to the grid length
/// or rep count.
pub fn cell_seed(base: u64, grid_index: usize, rep: u64) -> u64 {
    base.wrapping_add((grid_index as u64) << 32).wrapping_add(rep)
}

fn format_r3(r3: f64) -> String {
    format!("{}", (r3 * 1e9).round() / 1e9)
}

pub fn run(args: &SimulateArgs) -> CmdResult {
    if args.restarts == 0 {
        return Err(Failure::flags(anyhow!("--restarts must be at least 1")));
    }
    let sizes = args.community_sizes.as_deref().map(parse_sizes).transpose()?;
    let resize = |spec: SbmSpec| match &sizes {
        Some(s) => override_sizes(spec, s),
        None => Ok(spec),
    };

    let mut cells = Vec::new();
    if let Some(path) = &args.spec {
        let cfg = read_config(path)?;
        let spec = resize(cfg.spec)?;
        let base = args.seed.or(cfg.seed).unwrap_or(0);
        for rep in 0..args.reps {
            cells.push(Cell {
                setting: "custom".into(),
                r3: None,
                rep,
                seed: cell_seed(base, 0, rep),
                spec: spec.clone(),
            });
        }
    } else {
        let setting = args.setting.expect("clap requires --setting or --spec");
        let grid = match &args.r3_grid {
            Some(text) => parse_grid(text).map_err(|e| Failure::flags(anyhow!("--r3-grid: {e}")))?,
            None => default_grid(setting),
        };
        let base = args.seed.unwrap_or(0);
        for (gi, &r3) in grid.iter().enumerate() {
            let spec = setting_spec(setting, r3)
                .map_err(|e| Failure::flags(anyhow!("--r3-grid: {e}")))?;
            let spec = resize(spec)?;
            for rep in 0..args.reps {
                cells.push(Cell {
                    setting: setting.to_string(),
                    r3: Some(r3),
                    rep,
                    seed: cell_seed(base, gi, rep),
                    spec: spec.clone(),
                });
            }
        }
    }
    let mut out = output(optional_path(&args.out))?;
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(HEADER).map_err(Failure::input)?;
    let chunk = 2 * rayon::current_num_threads();
    for (c, batch) in cells.chunks(chunk).enumerate() {
        let results: Vec<Result<Vec<Row>, Failure>> =
            batch.par_iter().map(|cell| run_cell(cell, args.restarts)).collect();
        for (cell, rows) in batch.iter().zip(results) {
            let r3 = cell.r3.map(format_r3).unwrap_or_default();
            let rep = cell.rep.to_string();
            for row in rows? {
                w.write_record([
                    cell.setting.as_str(),
                    &r3,
                    &rep,
                    row.method,
                    &row.node_type.to_string(),
                    &row.nmi.to_string(),
                    &row.q.to_string(),
                    &row.k.to_string(),
                ])
                .map_err(Failure::input)?;
            }
        }
        w.flush()?;
        info!("{} of {} cells done", (c * chunk + batch.len()), cells.len());
    }
    drop(w);
    out.flush()?;
    Ok(0)
}
