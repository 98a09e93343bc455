//! Dressed-state ladder of two atoms sharing one cavity mode.
//!
//! The `n = 1` manifold holds the dark state `χ_o` and the bright pair `χ_±`.
//! Every `n ≥ 2` manifold holds `φ_o`, `φ_{o′}` and `φ_±`, with the equal
//! weight coefficient patterns used throughout the rate model. Only the
//! `n = 1` states are exact eigenvectors of the interaction Hamiltonian;
//! [`eigen_residual`] measures how far the higher ones are from it.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fock::{apply_hamiltonian, AtomKind, FockProduct, Level, LevelSet, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    Ground,
    /// Antisymmetric atomic singlet, decoupled from every incoherent channel.
    Dark,
    DarkPrime,
    Plus,
    Minus,
}

/// Which atom sits in the shelving level `|3⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Atom {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DressedLabel {
    pub manifold: u32,
    pub tag: Tag,
    /// `Some` for single-atom dressed states of the remaining atom while the
    /// other one is shelved in `|3⟩`.
    pub shelved: Option<Atom>,
}

impl DressedLabel {
    pub const GROUND: DressedLabel = DressedLabel { manifold: 0, tag: Tag::Ground, shelved: None };

    pub fn new(manifold: u32, tag: Tag) -> Self {
        DressedLabel { manifold, tag, shelved: None }
    }

    pub fn shelved(atom: Atom, manifold: u32, tag: Tag) -> Self {
        DressedLabel { manifold, tag, shelved: Some(atom) }
    }

    pub fn is_dark(&self) -> bool {
        self.tag == Tag::Dark && self.shelved.is_none()
    }
}

impl fmt::Display for DressedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.tag {
            Tag::Ground => {
                return match self.shelved {
                    None => write!(f, "g"),
                    Some(Atom::First) => write!(f, "3g"),
                    Some(Atom::Second) => write!(f, "g3"),
                }
            }
            Tag::Dark => "o",
            Tag::DarkPrime => "o'",
            Tag::Plus => "+",
            Tag::Minus => "-",
        };
        match (self.shelved, self.manifold) {
            (None, 1) => write!(f, "chi_{sign}"),
            (None, n) => write!(f, "phi_{sign}^{n}"),
            (Some(Atom::First), n) => write!(f, "3{sign}^{n}"),
            (Some(Atom::Second), n) => write!(f, "{sign}3^{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DressedState {
    pub label: DressedLabel,
    pub vector: StateVector,
}

#[derive(Clone, Debug)]
pub struct DressedLadder {
    pub ground: DressedState,
    /// `manifolds[n - 1]` holds the states with `n` excitations.
    pub manifolds: Vec<Vec<DressedState>>,
}

impl DressedLadder {
    pub fn n_max(&self) -> u32 {
        self.manifolds.len() as u32
    }

    pub fn levels(&self) -> LevelSet {
        self.ground.vector.levels()
    }

    /// Ground state first, then each manifold in order.
    pub fn states(&self) -> impl Iterator<Item = &DressedState> {
        std::iter::once(&self.ground).chain(self.manifolds.iter().flatten())
    }

    pub fn get(&self, label: &DressedLabel) -> Option<&DressedState> {
        self.states().find(|s| &s.label == label)
    }
}

fn ket(a: u8, b: u8, c: u32) -> FockProduct {
    FockProduct::ket(a, b, c).expect("static level label")
}

fn state(levels: LevelSet, label: DressedLabel, terms: &[(FockProduct, f64)]) -> DressedState {
    let vector = StateVector::from_real_terms(levels, terms.iter().copied()).expect("ladder kets use levels 1 and 2");
    DressedState { label, vector }
}

/// Builds the two-atom dressed ladder up to `n_max` excitations. Open atoms
/// get the same states; their third level only enters through the kinetics.
pub fn build_ladder(n_max: u32, kind: &AtomKind) -> Result<DressedLadder> {
    if n_max == 0 {
        return domain("ladder truncation n_max must be at least 1");
    }
    let lv = kind.levels();
    let h = 0.5;
    let r = FRAC_1_SQRT_2;

    let ground = state(lv, DressedLabel::GROUND, &[(ket(1, 1, 0), 1.0)]);
    let mut manifolds = Vec::with_capacity(n_max as usize);
    manifolds.push(vec![
        state(lv, DressedLabel::new(1, Tag::Dark), &[(ket(1, 2, 0), r), (ket(2, 1, 0), -r)]),
        state(lv, DressedLabel::new(1, Tag::Plus), &[(ket(1, 1, 1), r), (ket(1, 2, 0), h), (ket(2, 1, 0), h)]),
        state(lv, DressedLabel::new(1, Tag::Minus), &[(ket(1, 1, 1), r), (ket(1, 2, 0), -h), (ket(2, 1, 0), -h)]),
    ]);
    for n in 2..=n_max {
        let (g, a, b, e) = (ket(1, 1, n), ket(1, 2, n - 1), ket(2, 1, n - 1), ket(2, 2, n - 2));
        manifolds.push(vec![
            state(lv, DressedLabel::new(n, Tag::Dark), &[(a, r), (b, -r)]),
            state(lv, DressedLabel::new(n, Tag::DarkPrime), &[(g, r), (e, -r)]),
            state(lv, DressedLabel::new(n, Tag::Plus), &[(g, h), (a, h), (b, h), (e, h)]),
            state(lv, DressedLabel::new(n, Tag::Minus), &[(g, h), (a, -h), (b, -h), (e, h)]),
        ]);
    }
    Ok(DressedLadder { ground, manifolds })
}

/// Single-atom dressed states `(|1;m⟩ ± |2;m−1⟩)/√2` of whichever atom is
/// not shelved, for both choices of shelved atom and `m = 0..=n_max`.
pub fn build_shelved_family(n_max: u32) -> Vec<DressedState> {
    let lv = LevelSet::ThreeLevel;
    let r = FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(2 * (2 * n_max as usize + 1));
    for atom in [Atom::First, Atom::Second] {
        let k = |other: u8, photons: u32| match atom {
            Atom::First => ket(3, other, photons),
            Atom::Second => ket(other, 3, photons),
        };
        out.push(state(lv, DressedLabel::shelved(atom, 0, Tag::Ground), &[(k(1, 0), 1.0)]));
        for m in 1..=n_max {
            out.push(state(lv, DressedLabel::shelved(atom, m, Tag::Plus), &[(k(1, m), r), (k(2, m - 1), r)]));
            out.push(state(lv, DressedLabel::shelved(atom, m, Tag::Minus), &[(k(1, m), r), (k(2, m - 1), -r)]));
        }
    }
    out
}

/// `‖H s − ⟨s|H|s⟩ s‖`: zero exactly when `s` is an eigenvector of the
/// interaction Hamiltonian with coupling `g`.
pub fn eigen_residual(s: &DressedState, g: f64) -> f64 {
    let hs = apply_hamiltonian(&s.vector, g);
    let energy = s.vector.inner(&hs) / s.vector.norm_sqr();
    hs.plus_scaled(-energy, &s.vector).expect("same level set").norm()
}

/// Two-atom basis kets `|a b⟩` of every term, for checking manifold support.
pub fn atomic_support(s: &DressedState) -> Vec<(Level, Level)> {
    s.vector.terms().filter(|(_, a)| a.norm() > 0.0).map(|(k, _)| (k.atom1, k.atom2)).collect()
}
