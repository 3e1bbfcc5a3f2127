use std::io::Write;

use clap::Args;
use hetcomm::sbm::check_consistency;

use crate::spec_args::SpecSource;
use crate::{output, CmdResult, Failure};

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub source: SpecSource,
}

/// Prints `T`, `W` and the verdicts. Exit 0 when satisfied, 3 when violated.
pub fn run(args: &CheckArgs) -> CmdResult {
    let spec = args.source.resolve()?.spec;
    let report = check_consistency(&spec).map_err(Failure::input)?;
    let mut out = output(None)?;

    writeln!(out, "community proportions (over all {} nodes)", spec.total_nodes())?;
    for (l, pi) in report.proportions.iter().enumerate() {
        let cells: Vec<String> = pi.iter().map(|x| format!("{x:.6}")).collect();
        writeln!(out, "  type {}: {}", l + 1, cells.join(" "))?;
    }
    for b in &report.blocks {
        writeln!(out, "\nblock {}\nT =\n{}W =\n{}", b.block, b.t, b.w)?;
    }
    for b in &report.skipped {
        writeln!(out, "\nblock {b}: no edges expected, skipped")?;
    }
    writeln!(out, "\nsum of W =\n{}", report.total)?;

    let k = spec.num_communities();
    for a in 0..k {
        let v = report.total.get(a, a);
        let ok = report.diagonal_ok[a];
        writeln!(out, "W({0},{0}) = {v:+.6e} > 0: {1}", a + 1, if ok { "ok" } else { "violated" })?;
    }
    for a in 0..k {
        for b in (0..k).filter(|&b| b != a) {
            let v = report.total.get(a, b);
            let ok = report.off_diagonal_ok[a][b];
            writeln!(
                out,
                "W({},{}) = {v:+.6e} < 0: {}",
                a + 1,
                b + 1,
                if ok { "ok" } else { "violated" }
            )?;
        }
    }
    let verdict = if report.satisfied { "satisfied" } else { "violated" };
    writeln!(out, "\nconditions {verdict}")?;
    out.flush()?;
    Ok(if report.satisfied { 0 } else { 3 })
}
