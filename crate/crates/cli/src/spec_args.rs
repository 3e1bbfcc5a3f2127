use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use hetcomm::sbm::{setting_spec, SbmSpec, SpecConfig};

use crate::Failure;

/// Where a blockmodel spec comes from: a config file or a built-in setting.
#[derive(Args, Debug, Clone)]
pub struct SpecSource {
    /// Spec config file (`key = value` lines).
    #[arg(required_unless_present = "setting", conflicts_with = "setting")]
    pub config: Option<PathBuf>,
    /// Built-in simulation setting (1, 2 or 3) instead of a config file.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3), requires = "r3")]
    pub setting: Option<u8>,
    /// Cross-type signal strength for --setting.
    #[arg(long)]
    pub r3: Option<f64>,
    /// Per-type community size override, e.g. `50,30`.
    #[arg(long, value_name = "N1,N2,..")]
    pub community_sizes: Option<String>,
}

pub struct Resolved {
    pub spec: SbmSpec,
    pub seed: Option<u64>,
}

pub fn parse_sizes(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Failure::flags(anyhow!("invalid community size `{s}`")))
        })
        .collect()
}

/// Sets every community of type `l` to `sizes[l]` nodes.
pub fn override_sizes(spec: SbmSpec, sizes: &[usize]) -> Result<SbmSpec, Failure> {
    if sizes.len() != spec.num_types() {
        return Err(Failure::flags(anyhow!(
            "--community-sizes needs {} values, got {}",
            spec.num_types(),
            sizes.len()
        )));
    }
    let k = spec.num_communities();
    Ok(spec.with_community_sizes(sizes.iter().map(|&s| vec![s; k]).collect()))
}

pub fn read_config(path: &PathBuf) -> Result<SpecConfig, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)?;
    text.parse::<SpecConfig>()
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::input)
}

impl SpecSource {
    pub fn resolve(&self) -> Result<Resolved, Failure> {
        let (spec, seed) = match (&self.config, self.setting) {
            (Some(path), _) => {
                let cfg = read_config(path)?;
                (cfg.spec, cfg.seed)
            }
            (None, Some(which)) => {
                let r3 = self.r3.expect("clap requires --r3 with --setting");
                (setting_spec(which, r3).map_err(Failure::flags)?, None)
            }
            (None, None) => unreachable!("clap requires a config or --setting"),
        };
        let spec = match &self.community_sizes {
            Some(text) => override_sizes(spec, &parse_sizes(text)?)?,
            None => spec,
        };
        Ok(Resolved { spec, seed })
    }
}
