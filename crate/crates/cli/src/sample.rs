use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use hetcomm::edgelist::write_edge_list;
use hetcomm::sbm;

use crate::spec_args::SpecSource;
use crate::{optional_path, output, CmdResult, Failure};

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: SpecSource,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Edge list output; stdout by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the planted labels as `type,id,community` CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

pub fn run(args: &SampleArgs) -> CmdResult {
    let resolved = args.source.resolve()?;
    let seed = args.seed.or(resolved.seed).unwrap_or(0);
    let (g, planted) = sbm::sample(&resolved.spec, seed).map_err(Failure::input)?;

    let mut out = output(optional_path(&args.out))?;
    write_edge_list(&g, &mut out)?;
    out.flush()?;

    if let Some(path) = &args.labels {
        let mut w = csv::Writer::from_path(path).map_err(Failure::input)?;
        w.write_record(["type", "id", "community"]).map_err(Failure::input)?;
        for n in g.nodes() {
            w.write_record([g.type_name(n.node_type), g.node_name(n), &planted.label(n).to_string()])
                .map_err(Failure::input)?;
        }
        w.flush()?;
    }
    Ok(0)
}
