use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use dressed_cavity::{ModelParams, Scenario, ScenarioKind, SweepSpec};
use serde::Deserialize;

use crate::Failure;

/// Optional JSON configuration. Every field can also be given as a flag, and
/// flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub gamma: Option<f64>,
    pub gamma21: Option<f64>,
    pub gamma23: Option<f64>,
    pub k: Option<f64>,
    pub pi: Option<f64>,
    pub g: Option<f64>,
    pub n_max: Option<u32>,
    pub leak_multipliers: Option<BTreeMap<u32, f64>>,
    pub strict_collective_decay: Option<bool>,
    pub units_of_gamma: Option<bool>,
    pub seed: Option<u64>,
    pub sweep: Option<SweepConfig>,
    pub evolve: Option<EvolveConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub pi_range: Option<(f64, f64)>,
    pub k_range: Option<(f64, f64)>,
    pub pi_points: Option<usize>,
    pub k_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub t_max: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("bad config {}: {e}", path.display())))
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// closed_n2, closed_n1, closed_asym_start, open_pi_pulse or nonlinear_leak.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Decay rate of closed atoms.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub gamma21: Option<f64>,
    #[arg(long)]
    pub gamma23: Option<f64>,
    /// Cavity leakage rate.
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
    /// Pump rate.
    #[arg(long, allow_negative_numbers = true)]
    pub pi: Option<f64>,
    /// Atom-field coupling.
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Leakage multiplier for one manifold, as MANIFOLD:FACTOR. Repeatable.
    #[arg(long = "leak-mult", value_parser = parse_leak_mult)]
    pub leak_mult: Vec<(u32, f64)>,
    /// Let the dark states decay through the 2→3 channel.
    #[arg(long)]
    pub strict_decay: bool,
    /// Read K and Π as multiples of Γ (Γ₂₁ for open atoms).
    #[arg(long)]
    pub units_of_gamma: bool,
    /// Write a JSON record here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn parse_leak_mult(s: &str) -> Result<(u32, f64), String> {
    let (n, f) = s.split_once(':').ok_or_else(|| format!("expected MANIFOLD:FACTOR, got '{s}'"))?;
    let n = n.trim().parse().map_err(|_| format!("bad manifold in '{s}'"))?;
    let f = f.trim().parse().map_err(|_| format!("bad factor in '{s}'"))?;
    Ok((n, f))
}

/// Fully merged settings for one run.
#[derive(Debug)]
pub struct Resolved {
    pub scenario: Scenario,
    pub config: RunConfig,
    pub json: Option<PathBuf>,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<Resolved, Failure> {
        let config = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let name = self.scenario.clone().or_else(|| config.scenario.clone()).unwrap_or_else(|| "closed_n2".into());
        let kind: ScenarioKind = name.parse().map_err(Failure::from)?;

        let units = self.units_of_gamma || config.units_of_gamma.unwrap_or(false);
        let mut k = self.k.or(config.k).unwrap_or(1.0);
        let mut pi = self.pi.or(config.pi).unwrap_or(1.0);
        let n_max = self.n_max.or(config.n_max).unwrap_or(kind.default_n_max());

        let mut params = if kind.is_open() {
            if self.gamma.is_some() || config.gamma.is_some() {
                return Err(Failure::Invalid("open atoms take --gamma21 and --gamma23, not --gamma".into()));
            }
            let g21 = self.gamma21.or(config.gamma21).unwrap_or(1.0);
            let g23 = self.gamma23.or(config.gamma23).unwrap_or(1.0);
            if units {
                k *= g21;
                pi *= g21;
            }
            ModelParams::open(g21, g23, k, pi)
        } else {
            if [self.gamma21, self.gamma23, config.gamma21, config.gamma23].iter().any(Option::is_some) {
                return Err(Failure::Invalid("closed atoms take --gamma, not --gamma21/--gamma23".into()));
            }
            let gamma = self.gamma.or(config.gamma).unwrap_or(1.0);
            if units {
                k *= gamma;
                pi *= gamma;
            }
            ModelParams::closed(gamma, k, pi)
        };
        params.n_max = n_max;
        params.coupling = self.g.or(config.g).unwrap_or(1.0);
        params.strict_collective_decay = self.strict_decay || config.strict_collective_decay.unwrap_or(false);
        params.leak_multiplier = config.leak_multipliers.clone().unwrap_or_default();
        params.leak_multiplier.extend(self.leak_mult.iter().copied());
        if kind == ScenarioKind::NonlinearLeak && params.leak_multiplier.is_empty() {
            params.leak_multiplier.insert(2, 100.0);
        }

        let scenario = Scenario::new(kind, params).map_err(Failure::from)?;
        let json = self.json.clone().or_else(|| config.output.as_ref().and_then(|o| o.json.clone()));
        Ok(Resolved { scenario, config, json })
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub pi_min: Option<f64>,
    #[arg(long)]
    pub pi_max: Option<f64>,
    #[arg(long)]
    pub k_min: Option<f64>,
    #[arg(long)]
    pub k_max: Option<f64>,
    /// Grid points along both axes.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub pi_points: Option<usize>,
    #[arg(long)]
    pub k_points: Option<usize>,
}

impl GridArgs {
    pub fn spec(&self, config: &RunConfig) -> SweepSpec {
        let d = SweepSpec::default();
        let file = config.sweep.as_ref();
        let pi_range = file.and_then(|s| s.pi_range).unwrap_or(d.pi_range);
        let k_range = file.and_then(|s| s.k_range).unwrap_or(d.k_range);
        SweepSpec {
            pi_range: (self.pi_min.unwrap_or(pi_range.0), self.pi_max.unwrap_or(pi_range.1)),
            k_range: (self.k_min.unwrap_or(k_range.0), self.k_max.unwrap_or(k_range.1)),
            pi_points: self.pi_points.or(self.resolution).or(file.and_then(|s| s.pi_points)).unwrap_or(d.pi_points),
            k_points: self.k_points.or(self.resolution).or(file.and_then(|s| s.k_points)).unwrap_or(d.k_points),
        }
    }
}
