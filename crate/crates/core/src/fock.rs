//! Product basis `|a b; c⟩ = |a⟩₁ ⊗ |b⟩₂ ⊗ |c⟩_field`, sparse superpositions
//! over it, and the handful of operators the rate model needs.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::entanglement::DensityMatrix;
use crate::error::{domain, Result};

/// Amplitudes below this magnitude are treated as exact zeros.
pub const AMPLITUDE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    One = 1,
    Two = 2,
    Three = 3,
}

impl Level {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Level::One),
            2 => Ok(Level::Two),
            3 => Ok(Level::Three),
            _ => domain(format!("atomic level {i} does not exist")),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// Which atomic levels a state may occupy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevelSet {
    /// Levels {1, 2}.
    TwoLevel,
    /// Levels {1, 2, 3}; level 3 is dark to the cavity and the pump.
    ThreeLevel,
}

impl LevelSet {
    pub fn contains(self, level: Level) -> bool {
        match self {
            LevelSet::TwoLevel => level != Level::Three,
            LevelSet::ThreeLevel => true,
        }
    }

    /// Number of levels per atom.
    pub fn width(self) -> usize {
        match self {
            LevelSet::TwoLevel => 2,
            LevelSet::ThreeLevel => 3,
        }
    }

    /// Dimension of the two-atom space after tracing out the field.
    pub fn atom_dim(self) -> usize {
        self.width() * self.width()
    }

    /// Row-major index of `|a b⟩` in the two-atom basis.
    pub fn atom_index(self, a: Level, b: Level) -> usize {
        (a.index() - 1) * self.width() + (b.index() - 1)
    }
}

/// Closed two-level atoms, or open atoms whose excited level also decays to
/// a third level that neither the cavity nor the pump touches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AtomKind {
    Closed { gamma: f64 },
    Open { gamma21: f64, gamma23: f64 },
}

impl AtomKind {
    pub fn levels(&self) -> LevelSet {
        match self {
            AtomKind::Closed { .. } => LevelSet::TwoLevel,
            AtomKind::Open { .. } => LevelSet::ThreeLevel,
        }
    }

    /// Rate of the cavity-resonant 2 → 1 transition. Closed atoms have only this one.
    pub fn gamma21(&self) -> f64 {
        match *self {
            AtomKind::Closed { gamma } => gamma,
            AtomKind::Open { gamma21, .. } => gamma21,
        }
    }

    pub fn gamma23(&self) -> Option<f64> {
        match *self {
            AtomKind::Closed { .. } => None,
            AtomKind::Open { gamma23, .. } => Some(gamma23),
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self, AtomKind::Open { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        match *self {
            AtomKind::Closed { gamma } if !ok(gamma) => domain("spontaneous decay rate must be strictly positive"),
            AtomKind::Open { gamma21, gamma23 } if !ok(gamma21) || !ok(gamma23) => {
                domain("spontaneous decay rates must be strictly positive")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FockProduct {
    pub atom1: Level,
    pub atom2: Level,
    pub photons: u32,
}

impl FockProduct {
    pub fn new(atom1: Level, atom2: Level, photons: u32) -> Self {
        FockProduct { atom1, atom2, photons }
    }

    /// Shorthand for `|a b; c⟩` with numeric level labels.
    pub fn ket(a: u8, b: u8, photons: u32) -> Result<Self> {
        Ok(FockProduct::new(Level::from_index(a)?, Level::from_index(b)?, photons))
    }

    /// Atoms in level 2 plus photons; the quantity the Hamiltonian conserves.
    pub fn excitations(&self) -> u32 {
        let excited = [self.atom1, self.atom2].iter().filter(|&&l| l == Level::Two).count();
        excited as u32 + self.photons
    }

    fn atom(&self, i: usize) -> Level {
        if i == 0 {
            self.atom1
        } else {
            self.atom2
        }
    }

    fn with_atom(mut self, i: usize, level: Level) -> Self {
        if i == 0 {
            self.atom1 = level;
        } else {
            self.atom2 = level;
        }
        self
    }
}

impl fmt::Display for FockProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}{};{}⟩", self.atom1, self.atom2, self.photons)
    }
}

/// Sparse complex superposition of product states. Terms are kept in basis
/// order, so iteration and printing are deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    levels: LevelSet,
    amps: BTreeMap<FockProduct, C64>,
}

impl StateVector {
    pub fn zero(levels: LevelSet) -> Self {
        StateVector { levels, amps: BTreeMap::new() }
    }

    pub fn basis(levels: LevelSet, ket: FockProduct) -> Result<Self> {
        Self::from_terms(levels, [(ket, C64::new(1.0, 0.0))])
    }

    pub fn from_terms<I>(levels: LevelSet, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FockProduct, C64)>,
    {
        let mut v = StateVector::zero(levels);
        for (ket, amp) in terms {
            v.add_term(ket, amp)?;
        }
        Ok(v)
    }

    /// Real-coefficient convenience constructor.
    pub fn from_real_terms<I>(levels: LevelSet, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FockProduct, f64)>,
    {
        Self::from_terms(levels, terms.into_iter().map(|(k, a)| (k, C64::new(a, 0.0))))
    }

    pub fn levels(&self) -> LevelSet {
        self.levels
    }

    pub fn add_term(&mut self, ket: FockProduct, amp: C64) -> Result<()> {
        if !self.levels.contains(ket.atom1) || !self.levels.contains(ket.atom2) {
            return domain(format!("{ket} is outside the {:?} level set", self.levels));
        }
        *self.amps.entry(ket).or_insert(C64::new(0.0, 0.0)) += amp;
        Ok(())
    }

    pub fn amplitude(&self, ket: &FockProduct) -> C64 {
        self.amps.get(ket).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockProduct, &C64)> {
        self.amps.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.values().all(|a| a.norm() <= AMPLITUDE_TOL)
    }

    /// ⟨self|other⟩, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        let (small, large, conj_small) =
            if self.amps.len() <= other.amps.len() { (self, other, true) } else { (other, self, false) };
        small
            .amps
            .iter()
            .filter_map(|(k, a)| large.amps.get(k).map(|b| if conj_small { a.conj() * b } else { b.conj() * a }))
            .sum()
    }

    pub fn scaled(&self, c: C64) -> StateVector {
        StateVector { levels: self.levels, amps: self.amps.iter().map(|(k, a)| (*k, a * c)).collect() }
    }

    /// `self + c·other`.
    pub fn plus_scaled(&self, c: C64, other: &StateVector) -> Result<StateVector> {
        if self.levels != other.levels {
            return domain("cannot combine vectors over different level sets");
        }
        let mut out = self.clone();
        for (k, a) in &other.amps {
            *out.amps.entry(*k).or_insert(C64::new(0.0, 0.0)) += a * c;
        }
        Ok(out)
    }

    pub fn normalized(&self) -> Result<StateVector> {
        let n = self.norm();
        if n <= AMPLITUDE_TOL {
            return domain("cannot normalize the zero vector");
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    /// Excitation number shared by every term, if there is one.
    pub fn manifold(&self) -> Option<u32> {
        let mut it = self.amps.iter().filter(|(_, a)| a.norm() > AMPLITUDE_TOL).map(|(k, _)| k.excitations());
        let first = it.next()?;
        it.all(|n| n == first).then_some(first)
    }

    /// Applies a map that sends each basis ket to a list of kets with real
    /// coefficients, and extends it linearly.
    fn map_linear<F>(&self, f: F) -> StateVector
    where
        F: Fn(&FockProduct) -> Vec<(FockProduct, f64)>,
    {
        let mut amps: BTreeMap<FockProduct, C64> = BTreeMap::new();
        for (k, a) in &self.amps {
            for (k2, c) in f(k) {
                *amps.entry(k2).or_insert(C64::new(0.0, 0.0)) += a * c;
            }
        }
        StateVector { levels: self.levels, amps }
    }
}

/// `(σ⁽¹⁾ + σ⁽²⁾) v`, where `σ⁽ⁱ⁾ = |to⟩⟨from|` on atom `i`. With
/// `from = 2, to = 1` this is the collective dipole lowering operator.
pub fn collective_lower(v: &StateVector, from: Level, to: Level) -> Result<StateVector> {
    if from == to {
        return domain("collective transition needs two distinct levels");
    }
    if !v.levels.contains(from) || !v.levels.contains(to) {
        return domain(format!("levels {from}→{to} are not available for {:?} atoms", v.levels));
    }
    Ok(v.map_linear(|k| (0..2).filter(|&i| k.atom(i) == from).map(|i| (k.with_atom(i, to), 1.0)).collect()))
}

pub fn photon_create(v: &StateVector) -> StateVector {
    v.map_linear(|k| {
        let c = k.photons;
        vec![(FockProduct { photons: c + 1, ..*k }, f64::from(c + 1).sqrt())]
    })
}

pub fn photon_annihilate(v: &StateVector) -> StateVector {
    v.map_linear(|k| match k.photons {
        0 => Vec::new(),
        c => vec![(FockProduct { photons: c - 1, ..*k }, f64::from(c).sqrt())],
    })
}

/// Resonant interaction Hamiltonian with equal couplings,
/// `g Σᵢ (σ₁₂⁽ⁱ⁾ a† + σ₂₁⁽ⁱ⁾ a)`, where `σ₁₂ = |1⟩⟨2|`.
pub fn apply_hamiltonian(v: &StateVector, g: f64) -> StateVector {
    v.map_linear(|k| {
        let mut out = Vec::with_capacity(4);
        for i in 0..2 {
            match k.atom(i) {
                // emit into the cavity
                Level::Two => {
                    let c = k.photons;
                    out.push((
                        FockProduct { photons: c + 1, ..k.with_atom(i, Level::One) },
                        g * f64::from(c + 1).sqrt(),
                    ));
                }
                // absorb from the cavity
                Level::One if k.photons > 0 => {
                    let c = k.photons;
                    out.push((FockProduct { photons: c - 1, ..k.with_atom(i, Level::Two) }, g * f64::from(c).sqrt()));
                }
                _ => {}
            }
        }
        out
    })
}

/// Traces the field out of a pure state.
pub fn partial_trace_field(v: &StateVector) -> DensityMatrix {
    trace_into(v.levels, std::iter::once((1.0, v)))
}

/// Traces the field out of an incoherent mixture `Σ wₖ |vₖ⟩⟨vₖ|`. The trace of
/// the result is `Σ wₖ ‖vₖ‖²`.
pub fn partial_trace_mixture<'a, I>(mixture: I) -> Result<DensityMatrix>
where
    I: IntoIterator<Item = (f64, &'a StateVector)>,
{
    let items: Vec<_> = mixture.into_iter().collect();
    let Some(levels) = items.first().map(|(_, v)| v.levels) else {
        return domain("cannot trace an empty mixture");
    };
    if items.iter().any(|(_, v)| v.levels != levels) {
        return domain("mixture combines states of different atom kinds");
    }
    if items.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
        return domain("mixture weights must be non-negative");
    }
    Ok(trace_into(levels, items))
}

fn trace_into<'a, I>(levels: LevelSet, items: I) -> DensityMatrix
where
    I: IntoIterator<Item = (f64, &'a StateVector)>,
{
    let dim = levels.atom_dim();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for (w, v) in items {
        if w == 0.0 {
            continue;
        }
        // group amplitudes by photon number; only equal photon numbers survive the trace
        let mut by_photons: BTreeMap<u32, Vec<(usize, C64)>> = BTreeMap::new();
        for (k, a) in &v.amps {
            by_photons.entry(k.photons).or_default().push((levels.atom_index(k.atom1, k.atom2), *a));
        }
        for terms in by_photons.values() {
            for &(i, a) in terms {
                for &(j, b) in terms {
                    rho[(i, j)] += a * b.conj() * w;
                }
            }
        }
    }
    DensityMatrix::from_raw(levels, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn ket(a: u8, b: u8, c: u32) -> FockProduct {
        FockProduct::ket(a, b, c).unwrap()
    }

    fn real(levels: LevelSet, terms: &[((u8, u8, u32), f64)]) -> StateVector {
        StateVector::from_real_terms(levels, terms.iter().map(|&((a, b, c), x)| (ket(a, b, c), x))).unwrap()
    }

    fn assert_same(u: &StateVector, v: &StateVector) {
        let diff = u.plus_scaled(C64::new(-1.0, 0.0), v).unwrap();
        assert!(diff.norm() <= 1e-12, "{u:?} != {v:?}");
    }

    fn chi_plus() -> StateVector {
        real(LevelSet::TwoLevel, &[((1, 1, 1), FRAC_1_SQRT_2), ((1, 2, 0), 0.5), ((2, 1, 0), 0.5)])
    }

    fn psi_minus(levels: LevelSet) -> StateVector {
        real(levels, &[((1, 2, 0), FRAC_1_SQRT_2), ((2, 1, 0), -FRAC_1_SQRT_2)])
    }

    #[test]
    fn antisymmetric_state_has_no_collective_decay() {
        let v = psi_minus(LevelSet::TwoLevel);
        let out = collective_lower(&v, Level::Two, Level::One).unwrap();
        assert!(out.is_zero());
    }

    #[test]
    fn ground_state_cannot_decay() {
        let g = StateVector::basis(LevelSet::TwoLevel, ket(1, 1, 0)).unwrap();
        assert!(collective_lower(&g, Level::Two, Level::One).unwrap().is_zero());
    }

    #[test]
    fn shelving_the_antisymmetric_state() {
        let v = psi_minus(LevelSet::ThreeLevel);
        let out = collective_lower(&v, Level::Two, Level::Three).unwrap();
        // σ⁽²⁾ hits |12⟩, σ⁽¹⁾ hits |21⟩
        let expected = real(LevelSet::ThreeLevel, &[((1, 3, 0), FRAC_1_SQRT_2), ((3, 1, 0), -FRAC_1_SQRT_2)]);
        assert_same(&out, &expected);
        assert_abs_diff_eq!(out.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn collective_lower_rejects_bad_levels() {
        let v = psi_minus(LevelSet::TwoLevel);
        assert!(collective_lower(&v, Level::Two, Level::Two).is_err());
        assert!(collective_lower(&v, Level::Two, Level::Three).is_err());
    }

    #[test]
    fn photon_ladder() {
        let g = StateVector::basis(LevelSet::TwoLevel, ket(1, 1, 0)).unwrap();
        let one = photon_create(&g);
        assert_same(&one, &real(LevelSet::TwoLevel, &[((1, 1, 1), 1.0)]));
        let two = photon_create(&one);
        assert_same(&two, &real(LevelSet::TwoLevel, &[((1, 1, 2), 2f64.sqrt())]));
        assert!(photon_annihilate(&g).is_zero());
    }

    #[test]
    fn pump_overlap_with_symmetric_dressed_state() {
        let g = StateVector::basis(LevelSet::TwoLevel, ket(1, 1, 0)).unwrap();
        let overlap = chi_plus().inner(&photon_create(&g)).norm_sqr();
        assert_abs_diff_eq!(overlap, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn hamiltonian_single_terms() {
        let v = StateVector::basis(LevelSet::TwoLevel, ket(1, 2, 0)).unwrap();
        assert_same(&apply_hamiltonian(&v, 0.7), &real(LevelSet::TwoLevel, &[((1, 1, 1), 0.7)]));
        assert!(apply_hamiltonian(&psi_minus(LevelSet::TwoLevel), 1.0).is_zero());
        let hv = apply_hamiltonian(&chi_plus(), 1.3);
        assert_same(&hv, &chi_plus().scaled(C64::new(2f64.sqrt() * 1.3, 0.0)));
    }

    #[test]
    fn level_three_is_decoupled_from_the_cavity() {
        let v = StateVector::basis(LevelSet::ThreeLevel, ket(3, 3, 2)).unwrap();
        assert!(apply_hamiltonian(&v, 1.0).is_zero());
    }

    #[test]
    fn trace_of_dark_state_is_singlet() {
        let rho = partial_trace_field(&psi_minus(LevelSet::TwoLevel));
        let m = rho.matrix();
        assert_abs_diff_eq!(m[(1, 1)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(2, 2)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(1, 2)].re, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(0, 0)].re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_of_bright_mixture_matches_rho_s1() {
        let chi_minus = real(LevelSet::TwoLevel, &[((1, 1, 1), FRAC_1_SQRT_2), ((1, 2, 0), -0.5), ((2, 1, 0), -0.5)]);
        let cp = chi_plus();
        let rho = partial_trace_mixture([(0.5, &cp), (0.5, &chi_minus)]).unwrap();
        let m = rho.matrix();
        let expected = [[0.5, 0.0, 0.0, 0.0], [0.0, 0.25, 0.25, 0.0], [0.0, 0.25, 0.25, 0.0], [0.0; 4]];
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(m[(i, j)].re, expected[i][j], epsilon = 1e-12);
                assert_abs_diff_eq!(m[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn trace_of_product_state() {
        let v = StateVector::basis(LevelSet::TwoLevel, ket(1, 1, 7)).unwrap();
        let m = partial_trace_field(&v).matrix().clone();
        assert_eq!(m[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(m.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let a = psi_minus(LevelSet::TwoLevel);
        let b = psi_minus(LevelSet::ThreeLevel);
        assert!(partial_trace_mixture([(0.5, &a), (0.5, &b)]).is_err());
        assert!(StateVector::basis(LevelSet::TwoLevel, ket(3, 1, 0)).is_err());
    }

    // --- properties -----------------------------------------------------

    fn arb_ket(levels: LevelSet, max_photons: u32) -> impl Strategy<Value = FockProduct> {
        let top = levels.width() as u8;
        (1..=top, 1..=top, 0..=max_photons).prop_map(|(a, b, c)| FockProduct::ket(a, b, c).unwrap())
    }

    fn arb_vector(levels: LevelSet) -> impl Strategy<Value = StateVector> {
        prop::collection::vec((arb_ket(levels, 6), -1.0..1.0f64, -1.0..1.0f64), 1..8).prop_map(move |terms| {
            StateVector::from_terms(levels, terms.into_iter().map(|(k, re, im)| (k, C64::new(re, im)))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn hamiltonian_conserves_excitations(k in arb_ket(LevelSet::ThreeLevel, 6)) {
            let v = StateVector::basis(LevelSet::ThreeLevel, k).unwrap();
            let hv = apply_hamiltonian(&v, 1.0);
            for (out, a) in hv.terms() {
                if a.norm() > 0.0 {
                    prop_assert_eq!(out.excitations(), k.excitations());
                }
            }
        }

        #[test]
        fn create_and_annihilate_are_adjoint(u in arb_vector(LevelSet::ThreeLevel), w in arb_vector(LevelSet::ThreeLevel)) {
            let lhs = u.inner(&photon_create(&w));
            let rhs = w.inner(&photon_annihilate(&u)).conj();
            prop_assert!((lhs - rhs).norm() <= 1e-12);
        }

        #[test]
        fn operators_are_linear(
            u in arb_vector(LevelSet::ThreeLevel),
            w in arb_vector(LevelSet::ThreeLevel),
            re in -2.0..2.0f64,
            im in -2.0..2.0f64,
        ) {
            let c = C64::new(re, im);
            let combo = u.plus_scaled(c, &w).unwrap();
            let ops: [&dyn Fn(&StateVector) -> StateVector; 4] = [
                &|v| photon_create(v),
                &|v| photon_annihilate(v),
                &|v| apply_hamiltonian(v, 0.9),
                &|v| collective_lower(v, Level::Two, Level::Three).unwrap(),
            ];
            for op in ops {
                let lhs = op(&combo);
                let rhs = op(&u).plus_scaled(c, &op(&w)).unwrap();
                prop_assert!(lhs.plus_scaled(C64::new(-1.0, 0.0), &rhs).unwrap().norm() <= 1e-12);
            }
        }

        #[test]
        fn traced_states_are_density_matrices(v in arb_vector(LevelSet::ThreeLevel)) {
            prop_assume!(v.norm() > 1e-3);
            let rho = partial_trace_field(&v.normalized().unwrap());
            prop_assert!(rho.validate().is_ok(), "{:?}", rho.validate());
        }
    }
}
