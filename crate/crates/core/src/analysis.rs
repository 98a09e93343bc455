//! Scenario presets, parameter sweeps and the population maximization.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed::{build_ladder, DressedLadder, Tag};
use crate::entanglement::{
    bell_fraction, closed_form_argument, concurrence, x_state_argument, DensityMatrix, PopulationSplit,
};
use crate::error::{domain, Error, Result};
use crate::fock::{AtomKind, Level, LevelSet};
use crate::kinetics::{
    closed_form_steady_state, evolve, steady_state, KineticModel, ModelParams, PopulationVector, SlotLabel,
};
use crate::optimize::{minimize, NelderMeadOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Closed atoms, ladder up to two excitations, ground start.
    ClosedN2,
    /// Closed atoms truncated at one excitation.
    ClosedN1,
    /// Closed atoms starting from `|12;0⟩`.
    ClosedAsymStart,
    /// Open atoms starting from `|12;0⟩`.
    OpenPiPulse,
    /// `ClosedN2` with manifold-dependent leakage.
    NonlinearLeak,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::ClosedN2,
        ScenarioKind::ClosedN1,
        ScenarioKind::ClosedAsymStart,
        ScenarioKind::OpenPiPulse,
        ScenarioKind::NonlinearLeak,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ClosedN2 => "closed_n2",
            ScenarioKind::ClosedN1 => "closed_n1",
            ScenarioKind::ClosedAsymStart => "closed_asym_start",
            ScenarioKind::OpenPiPulse => "open_pi_pulse",
            ScenarioKind::NonlinearLeak => "nonlinear_leak",
        }
    }

    pub fn default_n_max(self) -> u32 {
        match self {
            ScenarioKind::ClosedN1 => 1,
            _ => 2,
        }
    }

    pub fn is_open(self) -> bool {
        self == ScenarioKind::OpenPiPulse
    }

    /// Initial weights. The `|12;0⟩` preparation is carried as its dressed
    /// populations `(χ₊, χ₋, χ_o) = (¼, ¼, ½)`.
    pub fn initial_weights(self) -> Vec<(SlotLabel, f64)> {
        match self {
            ScenarioKind::ClosedAsymStart | ScenarioKind::OpenPiPulse => vec![
                (SlotLabel::state(1, Tag::Plus), 0.25),
                (SlotLabel::state(1, Tag::Minus), 0.25),
                (SlotLabel::state(1, Tag::Dark), 0.5),
            ],
            _ => vec![(SlotLabel::GROUND, 1.0)],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown scenario '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub params: ModelParams,
    pub model: KineticModel,
    pub initial: PopulationVector,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, params: ModelParams) -> Result<Self> {
        let ladder = Self::check(kind, &params)?;
        Self::with_ladder(kind, params, &ladder)
    }

    fn check(kind: ScenarioKind, params: &ModelParams) -> Result<DressedLadder> {
        params.validate()?;
        if kind.is_open() != params.atoms.is_open() {
            let want = if kind.is_open() { "open" } else { "closed" };
            return domain(format!("scenario {kind} needs {want} atoms"));
        }
        match kind {
            ScenarioKind::ClosedN1 if params.n_max != 1 => return domain("closed_n1 is truncated at n_max = 1"),
            ScenarioKind::ClosedN2 | ScenarioKind::ClosedAsymStart | ScenarioKind::NonlinearLeak
                if params.n_max < 2 =>
            {
                return domain(format!("scenario {kind} needs n_max >= 2"))
            }
            _ => {}
        }
        build_ladder(params.n_max, &params.atoms)
    }

    fn with_ladder(kind: ScenarioKind, params: ModelParams, ladder: &DressedLadder) -> Result<Self> {
        let model = KineticModel::from_ladder(ladder, &params)?;
        let initial = PopulationVector::from_weights(&model.rates, &kind.initial_weights())?;
        Ok(Scenario { kind, params, model, initial })
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    /// Wootters concurrence; two-qubit reduced states only.
    pub concurrence: Option<f64>,
    /// The expression inside the `max` of the X-state concurrence.
    pub script_c: Option<f64>,
    pub bell_fraction: f64,
}

impl Measures {
    pub fn of(rho: &DensityMatrix) -> Result<Self> {
        let two_qubit = rho.levels() == LevelSet::TwoLevel;
        Ok(Measures {
            concurrence: if two_qubit { Some(concurrence(rho)?) } else { None },
            script_c: if two_qubit { Some(x_state_argument(rho)?) } else { None },
            bell_fraction: bell_fraction(rho),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub steady: PopulationVector,
    /// `None` when population sits in manifolds above 2.
    pub split: Option<PopulationSplit>,
    pub reduced: DensityMatrix,
    pub measures: Measures,
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutcome> {
    let steady = steady_state(&s.model.rates, &s.initial)?;
    let reduced = s.model.reduced_state(&steady)?;
    let measures = Measures::of(&reduced)?;
    Ok(ScenarioOutcome { split: steady.split().ok(), steady, reduced, measures })
}

/// Populations after time `t` for each requested time.
pub fn run_transient(s: &Scenario, times: &[f64]) -> Result<Vec<PopulationVector>> {
    times.iter().map(|&t| evolve(&s.model.rates, &s.initial, t)).collect()
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Pump range in units of `Γ`.
    pub pi_range: (f64, f64),
    /// Leakage range in units of `Γ`.
    pub k_range: (f64, f64),
    pub pi_points: usize,
    pub k_points: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { pi_range: (0.05, 5.0), k_range: (0.05, 5.0), pi_points: 50, k_points: 50 }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.pi_range, self.k_range] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return domain(format!("sweep range ({lo}, {hi}) must be positive and ordered"));
            }
        }
        if self.pi_points < 2 || self.k_points < 2 {
            return domain("sweep resolution must be at least 2 per axis");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// `Π/Γ`.
    pub pi: f64,
    /// `K/Γ`.
    pub k: f64,
    pub split: PopulationSplit,
    pub script_c: f64,
    pub concurrence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: ScenarioKind,
    pub gamma: f64,
    /// Ordered with `K` as the outer index.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn max_concurrence(&self) -> Option<&SweepPoint> {
        self.points.iter().max_by(|a, b| a.concurrence.total_cmp(&b.concurrence))
    }

    pub fn max_script_c(&self) -> Option<f64> {
        self.points.iter().map(|p| p.script_c).max_by(f64::total_cmp)
    }
}

/// Evaluates a closed-atom scenario on a `(Π, K)` grid in units of its `Γ`.
pub fn sweep(base: &Scenario, spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    if base.params.atoms.is_open() {
        return domain("sweeps cover closed-atom scenarios only");
    }
    let ladder = build_ladder(base.params.n_max, &base.params.atoms)?;
    let gamma = base.gamma();
    let pis = linspace(spec.pi_range.0, spec.pi_range.1, spec.pi_points);
    let ks = linspace(spec.k_range.0, spec.k_range.1, spec.k_points);
    let grid: Vec<(f64, f64)> = ks.iter().flat_map(|&k| pis.iter().map(move |&pi| (pi, k))).collect();

    let points = grid
        .par_iter()
        .map(|&(pi, k)| {
            let params = ModelParams { pump: pi * gamma, leakage: k * gamma, ..base.params.clone() };
            let s = Scenario::with_ladder(base.kind, params, &ladder)?;
            let out = run_scenario(&s)?;
            let split = out
                .split
                .ok_or_else(|| Error::Domain("sweep needs every population inside the two lowest manifolds".into()))?;
            let script_c = out.measures.script_c.unwrap_or(f64::NAN);
            Ok(SweepPoint { pi, k, split, script_c, concurrence: out.measures.concurrence.unwrap_or(f64::NAN) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { scenario: base.kind, gamma, points })
}

/// Concurrence argument with the two-excitation populations dropped.
pub fn truncated_argument(split: &PopulationSplit) -> Result<f64> {
    closed_form_argument(&PopulationSplit { p_s2: 0.0, p_oprime2: 0.0, ..*split })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximizeOptions {
    pub seed: u64,
    /// Random starts in addition to the best grid points.
    pub random_starts: usize,
    pub grid_starts: usize,
    /// Coarse grid points per axis.
    pub grid_points: usize,
    /// Search box for `log10(Π/Γ)` and `log10(K/Γ)`.
    pub log_bounds: (f64, f64),
    pub evaluations_per_start: usize,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            seed: 0,
            random_starts: 8,
            grid_starts: 4,
            grid_points: 29,
            log_bounds: (-3.0, 4.0),
            evaluations_per_start: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub split: PopulationSplit,
    pub pump: f64,
    pub leakage: f64,
    pub script_c: f64,
    pub concurrence: f64,
    pub evaluations: usize,
    /// True when the maximizer sits on the search box; the supremum is then
    /// only approached.
    pub on_boundary: bool,
}

fn uses_closed_form(params: &ModelParams) -> bool {
    matches!(params.atoms, AtomKind::Closed { .. })
        && params.n_max == 2
        && params.leak_multiplier.values().all(|&f| f == 1.0)
}

fn steady_split(params: &ModelParams, ladder: &DressedLadder) -> Result<(PopulationSplit, Measures)> {
    let s = Scenario::with_ladder(ScenarioKind::ClosedN2, params.clone(), ladder)?;
    let out = run_scenario(&s)?;
    let split = out.steady.split()?;
    Ok((split, out.measures))
}

/// Maximizes the steady-state `P_s1` of the ground-start closed system over
/// `(Π, K)`. `base` supplies `Γ`, `n_max` and leak multipliers; its pump and
/// leakage are ignored.
pub fn maximize_ps1(base: &ModelParams, opts: &MaximizeOptions) -> Result<Maximum> {
    if base.atoms.is_open() {
        return domain("maximization covers closed atoms only");
    }
    if base.n_max < 2 {
        return domain("maximization needs n_max >= 2");
    }
    base.validate()?;
    let (lo, hi) = opts.log_bounds;
    if lo.is_nan() || hi.is_nan() || lo >= hi || opts.grid_points < 2 {
        return domain("maximization box and grid must be non-degenerate");
    }
    let gamma = base.gamma();
    let ladder = build_ladder(base.n_max, &base.atoms)?;
    let closed_form = uses_closed_form(base);
    let at = |x: &[f64]| {
        let (pi, k) = (gamma * 10f64.powf(x[0]), gamma * 10f64.powf(x[1]));
        (pi, k)
    };
    let objective = |x: &[f64]| -> f64 {
        let (pi, k) = at(x);
        if closed_form {
            -closed_form_steady_state(gamma, k, pi).p_s1
        } else {
            let params = ModelParams { pump: pi, leakage: k, ..base.clone() };
            steady_split(&params, &ladder).map_or(f64::NAN, |(s, _)| -s.p_s1)
        }
    };

    let axis = linspace(lo, hi, opts.grid_points);
    let mut grid: Vec<(Vec<f64>, f64)> = axis
        .iter()
        .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
        .map(|x| {
            let v = objective(&x);
            (x, if v.is_nan() { f64::INFINITY } else { v })
        })
        .collect();
    let mut evaluations = grid.len();
    grid.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<f64>> = grid.iter().take(opts.grid_starts).map(|(x, _)| x.clone()).collect();
    starts.extend((0..opts.random_starts).map(|_| vec![rng.random_range(lo..=hi), rng.random_range(lo..=hi)]));

    let nm = NelderMeadOptions { max_evaluations: opts.evaluations_per_start, ..Default::default() };
    let mut best: Option<(Vec<f64>, f64, bool)> = grid.first().map(|(x, v)| (x.clone(), *v, false));
    for x0 in &starts {
        let r = minimize(&objective, x0, &[lo, lo], &[hi, hi], &nm);
        evaluations += r.evaluations;
        if best.as_ref().is_none_or(|b| r.value < b.1 || (r.value == b.1 && r.converged)) {
            best = Some((r.x, r.value, r.converged));
        }
    }
    let (x, _, converged) = best.ok_or_else(|| Error::Numerical("empty search".into()))?;

    let (pump, leakage) = at(&x);
    let params = ModelParams { pump, leakage, ..base.clone() };
    let (split, measures) = steady_split(&params, &ladder)?;
    let split = if closed_form { closed_form_steady_state(gamma, leakage, pump) } else { split };
    let edge = 1e-6 * (hi - lo);
    let on_boundary = x.iter().any(|&c| c - lo <= edge || hi - c <= edge);
    let maximum = Maximum {
        split,
        pump,
        leakage,
        script_c: measures.script_c.unwrap_or(f64::NAN),
        concurrence: measures.concurrence.unwrap_or(f64::NAN),
        evaluations,
        on_boundary,
    };
    if !converged {
        return Err(Error::Budget { best: Box::new(maximum), evaluations });
    }
    Ok(maximum)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakSearch {
    pub factor: f64,
    pub best: SweepPoint,
}

/// Sweeps the ground-start closed system with the leakage out of the second
/// manifold multiplied by `factor` and reports the most entangled point.
pub fn nonlinear_leak_search(gamma: f64, factor: f64, spec: &SweepSpec) -> Result<LeakSearch> {
    if factor.is_nan() || factor < 1.0 || !factor.is_finite() {
        return domain(format!("leak factor must be at least 1, got {factor}"));
    }
    let params = ModelParams::closed(gamma, gamma, gamma).with_leak_multiplier(2, factor);
    let s = Scenario::new(ScenarioKind::NonlinearLeak, params)?;
    let result = sweep(&s, spec)?;
    let best = *result.max_concurrence().ok_or_else(|| Error::Numerical("empty sweep".into()))?;
    Ok(LeakSearch { factor, best })
}

/// Reduced state left by free-space decay of `|22⟩` through the two
/// branches: `|11⟩` with weight `Γ₂₁/(Γ₂₁+Γ₂₃)` and `|13⟩` with the rest.
pub fn free_space_reference(gamma21: f64, gamma23: f64) -> Result<DensityMatrix> {
    AtomKind::Open { gamma21, gamma23 }.validate()?;
    let levels = LevelSet::ThreeLevel;
    let w = gamma21 / (gamma21 + gamma23);
    let dim = levels.atom_dim();
    let mut m = nalgebra::DMatrix::zeros(dim, dim);
    let i11 = levels.atom_index(Level::One, Level::One);
    let i13 = levels.atom_index(Level::One, Level::Three);
    m[(i11, i11)] = w.into();
    m[(i13, i13)] = (1.0 - w).into();
    DensityMatrix::new(levels, m)
}
