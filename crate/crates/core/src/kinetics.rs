//! Classical rate equations over dressed-state populations.
//!
//! Three incoherent channels move population between dressed states:
//! collective spontaneous emission (`Γ`, and `Γ₂₃` for open atoms), cavity
//! pumping (`Π`) and cavity leakage (`K`). Each rate is the channel strength
//! times `|⟨to|O|from⟩|²` for the channel operator `O`. The generator `M`
//! acts on column vectors, `dP/dt = M·P`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dressed::{build_ladder, build_shelved_family, DressedLabel, DressedLadder, DressedState, Tag};
use crate::entanglement::{DensityMatrix, PopulationSplit};
use crate::error::{domain, Error, Result};
use crate::fock::{
    collective_lower, partial_trace_mixture, photon_annihilate, photon_create, AtomKind, FockProduct, Level, LevelSet,
    StateVector,
};

/// Squared matrix elements below this are treated as exact zeros.
const MATRIX_ELEMENT_TOL: f64 = 1e-24;
const PROBABILITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub atoms: AtomKind,
    /// Base cavity leakage rate `K`.
    pub leakage: f64,
    /// Single-photon pump rate `Π`.
    pub pump: f64,
    /// Atom-field coupling `g`. Only used by eigenstate diagnostics.
    pub coupling: f64,
    pub n_max: u32,
    /// Per-manifold factor on the leakage out of that manifold; missing
    /// entries are 1.
    #[serde(default)]
    pub leak_multiplier: BTreeMap<u32, f64>,
    /// Derive the `2 → 3` decay of the dark states from the collective
    /// matrix elements instead of keeping them dark.
    #[serde(default)]
    pub strict_collective_decay: bool,
}

impl ModelParams {
    pub fn closed(gamma: f64, leakage: f64, pump: f64) -> Self {
        ModelParams {
            atoms: AtomKind::Closed { gamma },
            leakage,
            pump,
            coupling: 1.0,
            n_max: 2,
            leak_multiplier: BTreeMap::new(),
            strict_collective_decay: false,
        }
    }

    pub fn open(gamma21: f64, gamma23: f64, leakage: f64, pump: f64) -> Self {
        ModelParams { atoms: AtomKind::Open { gamma21, gamma23 }, ..ModelParams::closed(gamma21, leakage, pump) }
    }

    pub fn with_n_max(mut self, n_max: u32) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_leak_multiplier(mut self, manifold: u32, factor: f64) -> Self {
        self.leak_multiplier.insert(manifold, factor);
        self
    }

    pub fn gamma(&self) -> f64 {
        self.atoms.gamma21()
    }

    pub fn leak_factor(&self, manifold: u32) -> f64 {
        self.leak_multiplier.get(&manifold).copied().unwrap_or(1.0)
    }

    /// Every rate multiplied by `factor`; steady states are unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        let atoms = match self.atoms {
            AtomKind::Closed { gamma } => AtomKind::Closed { gamma: gamma * factor },
            AtomKind::Open { gamma21, gamma23 } => {
                AtomKind::Open { gamma21: gamma21 * factor, gamma23: gamma23 * factor }
            }
        };
        ModelParams { atoms, leakage: self.leakage * factor, pump: self.pump * factor, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.leakage, self.pump];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return domain("rates must be non-negative");
        }
        match self.atoms {
            AtomKind::Closed { gamma } if gamma.is_nan() || gamma < 0.0 => return domain("rates must be non-negative"),
            AtomKind::Open { gamma21, gamma23 }
                if gamma21.is_nan() || gamma23.is_nan() || gamma21 < 0.0 || gamma23 < 0.0 =>
            {
                return domain("rates must be non-negative")
            }
            _ => {}
        }
        self.atoms.validate()?;
        if self.n_max == 0 {
            return domain("n_max must be at least 1");
        }
        if !self.coupling.is_finite() {
            return domain("coupling must be finite");
        }
        if let Some((n, f)) = self.leak_multiplier.iter().find(|(_, f)| !(f.is_finite() && **f > 0.0)) {
            return domain(format!("leak multiplier for manifold {n} must be positive, got {f}"));
        }
        if self.strict_collective_decay && !self.atoms.is_open() {
            return domain("strict collective decay only applies to open atoms");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Decay21,
    Decay23,
    Pump,
    Leak,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Decay21, Channel::Decay23, Channel::Pump, Channel::Leak];

    fn strength(self, params: &ModelParams, from_manifold: u32) -> Result<f64> {
        match self {
            Channel::Decay21 => Ok(params.atoms.gamma21()),
            Channel::Decay23 => {
                params.atoms.gamma23().ok_or_else(|| Error::Domain("2→3 decay needs open atoms".into()))
            }
            Channel::Pump => Ok(params.pump),
            Channel::Leak => Ok(params.leakage * params.leak_factor(from_manifold)),
        }
    }

    fn apply(self, v: &StateVector) -> Result<StateVector> {
        match self {
            Channel::Decay21 => collective_lower(v, Level::Two, Level::One),
            Channel::Decay23 => collective_lower(v, Level::Two, Level::Three),
            Channel::Pump => Ok(photon_create(v)),
            Channel::Leak => Ok(photon_annihilate(v)),
        }
    }
}

/// Rate of `from → to` through one channel.
pub fn transition_rate(from: &DressedState, to: &DressedState, channel: Channel, params: &ModelParams) -> Result<f64> {
    let strength = channel.strength(params, from.label.manifold)?;
    let image = channel.apply(&from.vector)?;
    let m = to.vector.inner(&image).norm_sqr();
    Ok(if m < MATRIX_ELEMENT_TOL { 0.0 } else { strength * m })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SlotLabel {
    State(DressedLabel),
    /// Both atoms in `|3⟩`; absorbing.
    Sink,
}

impl SlotLabel {
    pub const GROUND: SlotLabel = SlotLabel::State(DressedLabel::GROUND);

    pub fn state(manifold: u32, tag: Tag) -> Self {
        SlotLabel::State(DressedLabel::new(manifold, tag))
    }

    pub fn is_dark(&self) -> bool {
        matches!(self, SlotLabel::State(l) if l.is_dark())
    }

    pub fn manifold(&self) -> Option<u32> {
        match self {
            SlotLabel::State(l) => Some(l.manifold),
            SlotLabel::Sink => None,
        }
    }
}

impl fmt::Display for SlotLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotLabel::State(l) => l.fmt(f),
            SlotLabel::Sink => write!(f, "33"),
        }
    }
}

/// Labeled generator of the population dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    labels: Vec<SlotLabel>,
    matrix: DMatrix<f64>,
}

impl RateMatrix {
    pub fn from_parts(labels: Vec<SlotLabel>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != labels.len() || matrix.ncols() != labels.len() {
            return domain("rate matrix must be square and match its labels");
        }
        Ok(RateMatrix { labels, matrix })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[SlotLabel] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn index_of(&self, label: &SlotLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn require(&self, label: &SlotLabel) -> Result<usize> {
        self.index_of(label).ok_or_else(|| Error::Domain(format!("slot {label} is not part of this model")))
    }

    /// Entry `M[row, col]`: the coefficient of `P_col` in `dP_row/dt`.
    pub fn coefficient(&self, row: &SlotLabel, col: &SlotLabel) -> Result<f64> {
        Ok(self.matrix[(self.require(row)?, self.require(col)?)])
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.sum()).collect()
    }

    /// Non-negative off-diagonal entries and columns summing to zero.
    pub fn check_generator(&self, tol: f64) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.matrix[(i, j)] < 0.0 {
                    return domain(format!("negative rate {} → {}", self.labels[j], self.labels[i]));
                }
            }
            let col = self.matrix.column(i);
            let scale = col.amax().max(1.0);
            if col.sum().abs() > tol * scale {
                return domain(format!("column {} sums to {}", self.labels[i], col.sum()));
            }
        }
        Ok(())
    }

    /// Slots with no transitions in or out.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| {
                self.matrix.row(i).iter().all(|&x| x == 0.0) && self.matrix.column(i).iter().all(|&x| x == 0.0)
            })
            .collect()
    }

    /// Generator of the aggregated process over `groups`. Fails unless every
    /// slot in a group has the same total rate into each other group.
    pub fn lump(&self, groups: &[Vec<SlotLabel>]) -> Result<DMatrix<f64>> {
        let idx: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| g.iter().map(|l| self.require(l)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let k = groups.len();
        let mut out = DMatrix::zeros(k, k);
        for (a, from) in idx.iter().enumerate() {
            for (b, to) in idx.iter().enumerate() {
                let totals: Vec<f64> = from.iter().map(|&i| to.iter().map(|&j| self.matrix[(j, i)]).sum()).collect();
                let first = totals[0];
                if totals.iter().any(|t| (t - first).abs() > 1e-12 * first.abs().max(1.0)) {
                    return domain(format!("slots in group {a} are not lumpable into group {b}"));
                }
                out[(b, a)] = first;
            }
        }
        Ok(out)
    }
}

/// Probability vector over the slots of a [`RateMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationVector {
    labels: Vec<SlotLabel>,
    probs: DVector<f64>,
}

impl PopulationVector {
    pub fn from_weights(rates: &RateMatrix, weights: &[(SlotLabel, f64)]) -> Result<Self> {
        let mut probs = DVector::zeros(rates.dim());
        for (label, w) in weights {
            probs[rates.require(label)?] += w;
        }
        let p = PopulationVector { labels: rates.labels.clone(), probs };
        p.validate()?;
        Ok(p)
    }

    pub fn ground(rates: &RateMatrix) -> Result<Self> {
        Self::from_weights(rates, &[(SlotLabel::GROUND, 1.0)])
    }

    pub fn labels(&self) -> &[SlotLabel] {
        &self.labels
    }

    pub fn probs(&self) -> &DVector<f64> {
        &self.probs
    }

    pub fn get(&self, label: &SlotLabel) -> f64 {
        self.labels.iter().position(|l| l == label).map_or(0.0, |i| self.probs[i])
    }

    pub fn total(&self) -> f64 {
        self.probs.sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return domain("populations must be non-negative");
        }
        if (self.total() - 1.0).abs() > PROBABILITY_TOL {
            return domain(format!("populations sum to {}, expected 1", self.total()));
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SlotLabel, f64)> {
        self.labels.iter().zip(self.probs.iter().copied())
    }

    fn sum_where(&self, pred: impl Fn(&SlotLabel) -> bool) -> f64 {
        self.iter().filter(|(l, _)| pred(l)).map(|(_, p)| p).sum()
    }

    /// `(P_g, P_s1, P_s2, P_o′2)`: ground, bright `n = 1`, bright `n = 2`, and `φ_{o′}²`.
    pub fn bright_populations(&self) -> [f64; 4] {
        let unshelved = |l: &SlotLabel, n: u32, tags: &[Tag]| matches!(l, SlotLabel::State(d) if d.shelved.is_none() && d.manifold == n && tags.contains(&d.tag));
        [
            self.get(&SlotLabel::GROUND),
            self.sum_where(|l| unshelved(l, 1, &[Tag::Plus, Tag::Minus])),
            self.sum_where(|l| unshelved(l, 2, &[Tag::Plus, Tag::Minus])),
            self.sum_where(|l| unshelved(l, 2, &[Tag::DarkPrime])),
        ]
    }

    pub fn dark_population(&self) -> f64 {
        self.sum_where(SlotLabel::is_dark)
    }

    /// Collapses the vector onto a [`PopulationSplit`]. Fails when more than
    /// roundoff sits in slots the split cannot represent (manifolds above 2
    /// or the intermediate shelved states).
    pub fn split(&self) -> Result<PopulationSplit> {
        let [p_g, p_s1, p_s2, p_oprime2] = self.bright_populations();
        let dark = self.dark_population();
        let has_sink = self.labels.contains(&SlotLabel::Sink);
        let p_33 = self.get(&SlotLabel::Sink);
        let rest = self.total() - (p_g + p_s1 + p_s2 + p_oprime2 + dark + p_33);
        if rest.abs() > PROBABILITY_TOL {
            return domain(format!("population {rest:.3e} lies outside the split slots"));
        }
        Ok(PopulationSplit {
            p_g,
            p_s1,
            p_s2,
            p_oprime2,
            p_dark: (dark > 0.0).then_some(dark),
            p_33: has_sink.then_some(p_33),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Slot {
    pub label: SlotLabel,
    /// Representative state; the sink uses `|33;0⟩`, since the field is traced out anyway.
    pub vector: StateVector,
}

/// Slots, their states, and the generator connecting them.
#[derive(Clone, Debug)]
pub struct KineticModel {
    pub params: ModelParams,
    pub slots: Vec<Slot>,
    pub rates: RateMatrix,
}

impl KineticModel {
    pub fn build(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let ladder = build_ladder(params.n_max, &params.atoms)?;
        Self::from_ladder(&ladder, params)
    }

    pub fn from_ladder(ladder: &DressedLadder, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if ladder.levels() != params.atoms.levels() {
            return domain("ladder and parameters describe different atom kinds");
        }
        let n_max = ladder.n_max();
        let mut states: Vec<DressedState> = ladder.states().cloned().collect();
        if params.atoms.is_open() {
            states.extend(build_shelved_family(n_max));
        }
        let n_states = states.len();
        let has_sink = params.atoms.is_open();
        let dim = n_states + usize::from(has_sink);
        let mut m = DMatrix::zeros(dim, dim);

        for (i, from) in states.iter().enumerate() {
            for channel in Channel::ALL {
                if channel == Channel::Decay23 && !params.atoms.is_open() {
                    continue;
                }
                if channel == Channel::Pump && from.label.manifold >= n_max {
                    continue;
                }
                if from.label.is_dark() && !(channel == Channel::Decay23 && params.strict_collective_decay) {
                    continue;
                }
                let strength = channel.strength(params, from.label.manifold)?;
                if strength == 0.0 {
                    continue;
                }
                let image = channel.apply(&from.vector)?;
                if image.is_zero() {
                    continue;
                }
                for (j, to) in states.iter().enumerate() {
                    if j == i || to.label.is_dark() {
                        continue;
                    }
                    let amp = to.vector.inner(&image).norm_sqr();
                    if amp >= MATRIX_ELEMENT_TOL {
                        m[(j, i)] += strength * amp;
                        m[(i, i)] -= strength * amp;
                    }
                }
                if has_sink {
                    let into_sink: f64 = image
                        .terms()
                        .filter(|(k, _)| k.atom1 == Level::Three && k.atom2 == Level::Three)
                        .map(|(_, a)| a.norm_sqr())
                        .sum();
                    if into_sink >= MATRIX_ELEMENT_TOL {
                        m[(n_states, i)] += strength * into_sink;
                        m[(i, i)] -= strength * into_sink;
                    }
                }
            }
        }

        let mut slots: Vec<Slot> =
            states.into_iter().map(|s| Slot { label: SlotLabel::State(s.label), vector: s.vector }).collect();
        if has_sink {
            let v = StateVector::basis(LevelSet::ThreeLevel, FockProduct::new(Level::Three, Level::Three, 0))?;
            slots.push(Slot { label: SlotLabel::Sink, vector: v });
        }
        let labels = slots.iter().map(|s| s.label).collect();
        Ok(KineticModel { params: params.clone(), slots, rates: RateMatrix { labels, matrix: m } })
    }

    pub fn slot(&self, label: &SlotLabel) -> Option<&Slot> {
        self.slots.iter().find(|s| &s.label == label)
    }

    /// Reduced atomic state of the incoherent mixture `Σ P_slot |slot⟩⟨slot|`.
    pub fn reduced_state(&self, p: &PopulationVector) -> Result<DensityMatrix> {
        if p.labels() != self.rates.labels() {
            return domain("population vector belongs to a different model");
        }
        partial_trace_mixture(self.slots.iter().zip(p.probs.iter()).map(|(s, &w)| (w, &s.vector)))
    }
}

/// Generator for the closed-atom ladder.
pub fn build_rate_matrix(ladder: &DressedLadder, params: &ModelParams) -> Result<RateMatrix> {
    Ok(KineticModel::from_ladder(ladder, params)?.rates)
}

/// Generator for open atoms: the closed-atom channels plus `Γ₂₃` shelving
/// into single-atom dressed states and from there into the `|33⟩` sink.
pub fn build_open_rate_matrix(ladder: &DressedLadder, params: &ModelParams) -> Result<RateMatrix> {
    if !params.atoms.is_open() {
        return domain("open-atom generator needs open atom parameters");
    }
    build_rate_matrix(ladder, params)
}

/// Closed-form steady state of the ground-start `n ≤ 2` closed-atom system,
/// as `(P_g, P_s1, P_s2, P_o′2)`.
pub fn closed_form_steady_state(gamma: f64, leakage: f64, pump: f64) -> PopulationSplit {
    let (g, k, p) = (gamma, leakage, pump);
    let p_g = (3.0 * g + 2.0 * k) * (2.0 * g + k) * (g + k);
    let p_s1 = 2.0 * p * (g + k) * (3.0 * g + 2.0 * k);
    let p_s2 = 4.0 * p * p * (g + k);
    let p_op = p * p * (3.0 * g + 2.0 * k);
    let norm = 7.0 * g * p * p
        + 6.0 * p * p * k
        + 6.0 * p * g * g
        + 10.0 * p * k * g
        + 4.0 * p * k * k
        + 6.0 * g * g * g
        + 13.0 * k * g * g
        + 9.0 * k * k * g
        + 2.0 * k * k * k;
    PopulationSplit::closed(p_g / norm, p_s1 / norm, p_s2 / norm, p_op / norm)
}

/// `p(t) = exp(M t)·p₀`.
pub fn evolve(rates: &RateMatrix, p0: &PopulationVector, t: f64) -> Result<PopulationVector> {
    if t.is_nan() || t < 0.0 || !t.is_finite() {
        return domain(format!("evolution time must be non-negative, got {t}"));
    }
    if p0.labels() != rates.labels() {
        return domain("population vector belongs to a different model");
    }
    if t == 0.0 {
        return Ok(p0.clone());
    }
    let isolated = rates.isolated();
    let active: Vec<usize> = (0..rates.dim()).filter(|i| !isolated.contains(i)).collect();
    if active.is_empty() {
        return Ok(p0.clone());
    }
    let block = DMatrix::from_fn(active.len(), active.len(), |r, c| rates.matrix[(active[r], active[c])]);
    let start = DVector::from_iterator(active.len(), active.iter().map(|&i| p0.probs[i]));
    let moved = (block * t).exp() * start;
    let mut out = p0.probs.clone();
    for (r, &i) in active.iter().enumerate() {
        out[i] = moved[r];
    }
    finish(p0, &active, out)
}

/// Clamps roundoff-level negatives on the `active` slots and restores their
/// initial mass; the other slots are left untouched.
fn finish(p0: &PopulationVector, active: &[usize], mut raw: DVector<f64>) -> Result<PopulationVector> {
    if let Some(bad) = active.iter().map(|&i| raw[i]).find(|x| *x < -1e-9 || !x.is_finite()) {
        return Err(Error::Numerical(format!("population {bad:e} after propagation")));
    }
    let mass: f64 = active.iter().map(|&i| p0.probs[i]).sum();
    let total: f64 = active.iter().map(|&i| raw[i].max(0.0)).sum();
    for &i in active {
        raw[i] = raw[i].max(0.0);
        if total > 0.0 {
            raw[i] *= mass / total;
        }
    }
    Ok(PopulationVector { labels: p0.labels.clone(), probs: raw })
}

/// Long-time limit of [`evolve`]. Isolated (dark) slots keep their initial
/// population; everything else ends in the unique closed communicating
/// class, solved from `M_CC·x = 0` with the non-dark mass of `p₀`.
pub fn steady_state(rates: &RateMatrix, p0: &PopulationVector) -> Result<PopulationVector> {
    if p0.labels() != rates.labels() {
        return domain("population vector belongs to a different model");
    }
    let n = rates.dim();
    let isolated = rates.isolated();
    let active: Vec<usize> = (0..n).filter(|i| !isolated.contains(i)).collect();
    if active.is_empty() {
        return Ok(p0.clone());
    }

    let classes = closed_classes(&rates.matrix, &active);
    if classes.len() != 1 {
        let names = classes.iter().map(|c| c.iter().map(|&i| rates.labels[i].to_string()).collect()).collect();
        return Err(Error::Degenerate { classes: names });
    }
    let class = &classes[0];
    let mass: f64 = active.iter().map(|&i| p0.probs[i]).sum();

    let k = class.len();
    let mut a = DMatrix::from_fn(k, k, |r, c| rates.matrix[(class[r], class[c])]);
    let mut b = DVector::zeros(k);
    a.row_mut(k - 1).fill(1.0);
    b[k - 1] = mass;
    let x = a.full_piv_lu().solve(&b).ok_or_else(|| Error::Numerical("singular restricted generator".into()))?;

    let mut out = p0.probs.clone();
    for &i in &active {
        out[i] = 0.0;
    }
    for (r, &i) in class.iter().enumerate() {
        out[i] = x[r];
    }
    finish(p0, &active, out)
}

/// Communicating classes of the active slots that no transition leaves.
fn closed_classes(m: &DMatrix<f64>, active: &[usize]) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let reach: Vec<Vec<bool>> = active
        .iter()
        .map(|&start| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(i) = queue.pop_front() {
                for j in 0..n {
                    if j != i && m[(j, i)] > 0.0 && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen
        })
        .collect();
    let mut classes = Vec::new();
    let mut assigned = vec![false; active.len()];
    for (a, &i) in active.iter().enumerate() {
        if assigned[a] {
            continue;
        }
        let class: Vec<usize> =
            active.iter().enumerate().filter(|&(b, &j)| reach[a][j] && reach[b][i]).map(|(_, &j)| j).collect();
        for (b, &j) in active.iter().enumerate() {
            if class.contains(&j) {
                assigned[b] = true;
            }
        }
        let closed = (0..n).all(|j| !reach[a][j] || class.contains(&j));
        if closed {
            classes.push(class);
        }
    }
    classes
}
