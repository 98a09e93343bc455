//! Two-atom density matrices and the entanglement measures used on them:
//! Wootters concurrence (generic and in closed form for the dressed-state
//! mixtures), its gradient, and the singlet fraction for three-level atoms.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fock::{Level, LevelSet};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Two-atom density matrix in the row-major product basis
/// `|11⟩, |12⟩, (|13⟩,) |21⟩, …`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    levels: LevelSet,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Checked constructor: Hermitian, unit trace, positive semidefinite.
    pub fn new(levels: LevelSet, matrix: DMatrix<C64>) -> Result<Self> {
        let dim = levels.atom_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return domain(format!("expected a {dim}×{dim} matrix, got {}×{}", matrix.nrows(), matrix.ncols()));
        }
        let rho = DensityMatrix { levels, matrix };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_raw(levels: LevelSet, matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), levels.atom_dim());
        DensityMatrix { levels, matrix }
    }

    /// `|v⟩⟨v|` for an amplitude vector in the two-atom basis.
    pub fn pure(levels: LevelSet, amplitudes: &DVector<C64>) -> Result<Self> {
        let m = amplitudes * amplitudes.adjoint();
        DensityMatrix::new(levels, m)
    }

    pub fn levels(&self) -> LevelSet {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `⟨a b|ρ|c d⟩`.
    pub fn element(&self, bra: (Level, Level), ket: (Level, Level)) -> C64 {
        let i = self.levels.atom_index(bra.0, bra.1);
        let j = self.levels.atom_index(ket.0, ket.1);
        self.matrix[(i, j)]
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return domain(format!("density matrix is not Hermitian (deviation {herm:.3e})"));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return domain(format!("density matrix trace is {tr}, expected 1"));
        }
        let min = self.eigenvalues()[0];
        if min < -PSD_TOL {
            return domain(format!("density matrix has negative eigenvalue {min:.3e}"));
        }
        Ok(())
    }

    /// `U ρ U†`.
    pub fn transformed(&self, u: &DMatrix<C64>) -> DensityMatrix {
        DensityMatrix::from_raw(self.levels, u * &self.matrix * u.adjoint())
    }

    fn weighted_sum(levels: LevelSet, parts: &[(f64, DMatrix<C64>)]) -> DensityMatrix {
        let dim = levels.atom_dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (w, part) in parts {
            if *w != 0.0 {
                m += part * C64::new(*w, 0.0);
            }
        }
        DensityMatrix::from_raw(levels, m)
    }
}

/// Amplitudes of `(|12⟩ ± |21⟩)/√2` in the two-atom basis.
pub fn bell_state(levels: LevelSet, sign: f64) -> DVector<C64> {
    let mut v = DVector::zeros(levels.atom_dim());
    v[levels.atom_index(Level::One, Level::Two)] = C64::new(FRAC_1_SQRT_2, 0.0);
    v[levels.atom_index(Level::Two, Level::One)] = C64::new(sign * FRAC_1_SQRT_2, 0.0);
    v
}

/// `σ_y ⊗ σ_y` in the basis `|11⟩, |12⟩, |21⟩, |22⟩`.
fn spin_flip() -> DMatrix<C64> {
    let mut y = DMatrix::zeros(4, 4);
    y[(0, 3)] = C64::new(-1.0, 0.0);
    y[(1, 2)] = C64::new(1.0, 0.0);
    y[(2, 1)] = C64::new(1.0, 0.0);
    y[(3, 0)] = C64::new(-1.0, 0.0);
    y
}

/// Spin-flipped matrix `ρ̃ = (σ_y ⊗ σ_y) ρ* (σ_y ⊗ σ_y)`.
pub fn spin_flipped(rho: &DMatrix<C64>) -> DMatrix<C64> {
    let y = spin_flip();
    &y * rho.map(|z| z.conj()) * &y
}

/// Positive square root of a Hermitian PSD matrix. Eigenvalues within
/// roundoff of zero are set to exactly zero.
fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, &e| a.max(e.abs()));
    let floor = 32.0 * f64::EPSILON * scale;
    let roots = eig.eigenvalues.map(|e| if e <= floor { 0.0 } else { e.sqrt() });
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&roots.map(|r| C64::new(r, 0.0)));
    v * d * v.adjoint()
}

/// `√λᵢ` in descending order, where `λᵢ` are the eigenvalues of `ρρ̃`.
///
/// They are computed as the singular values of `√ρ·√ρ̃`, whose Gram matrix
/// `√ρ ρ̃ √ρ` is isospectral with `ρρ̃`. Singular values are perturbed only
/// by the size of the rounding error, so pure and rank-deficient inputs give
/// exact zeros where `ρρ̃` itself may be defective.
pub fn wootters_roots(rho: &DensityMatrix) -> Result<[f64; 4]> {
    if rho.dim() != 4 {
        return domain("concurrence is defined for two-level atoms only; use bell_fraction for three-level atoms");
    }
    let s = psd_sqrt(rho.matrix());
    let s_tilde = spin_flipped(&s);
    let sv = (&s * &s_tilde).singular_values();
    let mut roots = [sv[0], sv[1], sv[2], sv[3]];
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok(roots)
}

/// Wootters concurrence `max(√λ₁ − √λ₂ − √λ₃ − √λ₄, 0)`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let r = wootters_roots(rho)?;
    Ok((r[0] - r[1] - r[2] - r[3]).max(0.0))
}

/// `2(|ρ₁₂,₂₁| − √(ρ₁₁,₁₁ ρ₂₂,₂₂))`, the concurrence argument of a two-qubit
/// state whose only coherence is between `|12⟩` and `|21⟩`. Every reduced
/// state of the closed-atom ladder has this shape, and for those this is the
/// quantity inside the `max` of the closed-form concurrence.
pub fn x_state_argument(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return domain("x_state_argument needs a two-qubit density matrix");
    }
    let m = rho.matrix();
    Ok(2.0 * (m[(1, 2)].norm() - (m[(0, 0)].re * m[(3, 3)].re).max(0.0).sqrt()))
}

/// Singlet fraction `⟨ψ⁻|ρ|ψ⁻⟩`, with `ψ⁻` in the {1,2}⊗{1,2} block.
pub fn bell_fraction(rho: &DensityMatrix) -> f64 {
    let psi = bell_state(rho.levels(), -1.0);
    (psi.adjoint() * rho.matrix() * &psi)[(0, 0)].re
}

/// Population weights of the components that make up the reduced atomic
/// state of the dressed-state mixture. `p_dark` is the weight on the
/// antisymmetric dark states; `p_33` is the weight on both atoms shelved in
/// level 3. All weights are absolute and sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSplit {
    pub p_g: f64,
    pub p_s1: f64,
    pub p_s2: f64,
    pub p_oprime2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_dark: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_33: Option<f64>,
}

impl PopulationSplit {
    pub fn closed(p_g: f64, p_s1: f64, p_s2: f64, p_oprime2: f64) -> Self {
        PopulationSplit { p_g, p_s1, p_s2, p_oprime2, p_dark: None, p_33: None }
    }

    pub fn total(&self) -> f64 {
        self.p_g + self.p_s1 + self.p_s2 + self.p_oprime2 + self.p_dark.unwrap_or(0.0) + self.p_33.unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let all =
            [self.p_g, self.p_s1, self.p_s2, self.p_oprime2, self.p_dark.unwrap_or(0.0), self.p_33.unwrap_or(0.0)];
        if all.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return domain("populations must be non-negative");
        }
        if (self.total() - 1.0).abs() > TRACE_TOL {
            return domain(format!("populations sum to {}, expected 1", self.total()));
        }
        Ok(())
    }

    fn dark(&self) -> f64 {
        self.p_dark.unwrap_or(0.0)
    }
}

/// `((a, b), (c, d), x)` places `x` at `⟨ab|ρ|cd⟩`.
type Entry = ((u8, u8), (u8, u8), f64);

fn embed(levels: LevelSet, entries: &[Entry]) -> DMatrix<C64> {
    let dim = levels.atom_dim();
    let mut m = DMatrix::zeros(dim, dim);
    for &((a, b), (c, d), x) in entries {
        let lv = |i: u8| Level::from_index(i).expect("static level label");
        let i = levels.atom_index(lv(a), lv(b));
        let j = levels.atom_index(lv(c), lv(d));
        m[(i, j)] = C64::new(x, 0.0);
    }
    m
}

/// Reduced atomic states of the ground, bright `n = 1`, bright `n = 2` and
/// `φ_{o′}` slots, in that order.
pub fn component_matrices(levels: LevelSet) -> [DMatrix<C64>; 4] {
    let rho_g = embed(levels, &[((1, 1), (1, 1), 1.0)]);
    let rho_s1 = embed(
        levels,
        &[
            ((1, 1), (1, 1), 0.5),
            ((1, 2), (1, 2), 0.25),
            ((1, 2), (2, 1), 0.25),
            ((2, 1), (1, 2), 0.25),
            ((2, 1), (2, 1), 0.25),
        ],
    );
    let rho_s2 = embed(
        levels,
        &[
            ((1, 1), (1, 1), 0.25),
            ((1, 2), (1, 2), 0.25),
            ((1, 2), (2, 1), 0.25),
            ((2, 1), (1, 2), 0.25),
            ((2, 1), (2, 1), 0.25),
            ((2, 2), (2, 2), 0.25),
        ],
    );
    let rho_op = embed(levels, &[((1, 1), (1, 1), 0.5), ((2, 2), (2, 2), 0.5)]);
    [rho_g, rho_s1, rho_s2, rho_op]
}

/// Population-weighted reduced atomic state. Uses the three-level basis when
/// `p_33` is present.
pub fn assemble_reduced(split: &PopulationSplit) -> DensityMatrix {
    let levels = if split.p_33.is_some() { LevelSet::ThreeLevel } else { LevelSet::TwoLevel };
    let [g, s1, s2, op] = component_matrices(levels);
    let psi = bell_state(levels, -1.0);
    let mut parts = vec![
        (split.p_g, g),
        (split.p_s1, s1),
        (split.p_s2, s2),
        (split.p_oprime2, op),
        (split.dark(), &psi * psi.adjoint()),
    ];
    if let Some(p33) = split.p_33 {
        parts.push((p33, embed(levels, &[((3, 3), (3, 3), 1.0)])));
    }
    DensityMatrix::weighted_sum(levels, &parts)
}

fn eq19_argument(g: f64, s1: f64, s2: f64, op: f64) -> f64 {
    0.5 * (s1 + s2) - 0.5 * ((s2 + 2.0 * op) * (2.0 * op + s2 + 4.0 * g + 2.0 * s1)).sqrt()
}

/// The expression inside the `max` of the closed-form concurrence. Without
/// dark population this is the pumped ground-start form; with half the
/// population in the dark states it is the asymmetric-start form, evaluated
/// on the bright populations renormalized to the bright half.
pub fn closed_form_argument(split: &PopulationSplit) -> Result<f64> {
    if split.p_33.is_some_and(|p| p > 0.0) {
        return domain("closed-form concurrence does not cover shelved |33⟩ population");
    }
    let dark = split.dark();
    let (g, s1, s2, op) = (split.p_g, split.p_s1, split.p_s2, split.p_oprime2);
    if dark <= f64::EPSILON {
        Ok(eq19_argument(g, s1, s2, op))
    } else if (dark - 0.5).abs() <= TRACE_TOL {
        let (g, s1, s2, op) = (2.0 * g, 2.0 * s1, 2.0 * s2, 2.0 * op);
        Ok(0.5 - 0.25 * (s1 + s2) - 0.25 * ((s2 + 2.0 * op) * (2.0 * op + s2 + 4.0 * g + 2.0 * s1)).sqrt())
    } else {
        domain(format!("closed-form concurrence needs dark weight 0 or 1/2, got {dark}"))
    }
}

pub fn concurrence_closed_form(split: &PopulationSplit) -> Result<f64> {
    Ok(closed_form_argument(split)?.max(0.0))
}

/// Partial derivatives of the ground-start closed form with respect to
/// `(P_g, P_s1, P_s2, P_o′2)`, treated as independent variables.
pub fn concurrence_gradient(split: &PopulationSplit) -> Result<[f64; 4]> {
    if split.dark() > 0.0 || split.p_33.is_some_and(|p| p > 0.0) {
        return domain("gradient is defined for the ground-start split only");
    }
    let (g, s1, s2, op) = (split.p_g, split.p_s1, split.p_s2, split.p_oprime2);
    if [g, s1, s2, op].iter().any(|&p| p.is_nan() || p <= 0.0) {
        return domain("gradient needs an interior point (all populations > 0)");
    }
    let radicand =
        4.0 * s2 * g + 2.0 * s1 * s2 + s2 * s2 + 4.0 * s2 * op + 8.0 * op * g + 4.0 * op * s1 + 4.0 * op * op;
    let a = 1.0 / radicand.sqrt();
    Ok([
        -a / 4.0 * (8.0 * op + 4.0 * s2),
        0.5 - a / 4.0 * (4.0 * op + 2.0 * s2),
        0.5 - a / 4.0 * (4.0 * g + 2.0 * s1 + 2.0 * s2 + 4.0 * op),
        -a / 4.0 * (4.0 * s2 + 8.0 * g + 4.0 * s1 + 8.0 * op),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pure(sign: f64) -> DensityMatrix {
        DensityMatrix::pure(LevelSet::TwoLevel, &bell_state(LevelSet::TwoLevel, sign)).unwrap()
    }

    fn unit(i: usize) -> PopulationSplit {
        let mut p = [0.0; 4];
        p[i] = 1.0;
        PopulationSplit::closed(p[0], p[1], p[2], p[3])
    }

    #[test]
    fn singlet_is_maximally_entangled() {
        assert_abs_diff_eq!(concurrence(&pure(-1.0)).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(concurrence(&pure(1.0)).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn component_concurrences() {
        let c: Vec<f64> = (0..4).map(|i| concurrence(&assemble_reduced(&unit(i))).unwrap()).collect();
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_vertices_of_the_closed_form() {
        let c: Vec<f64> = (0..4).map(|i| concurrence_closed_form(&unit(i)).unwrap()).collect();
        assert_eq!(c, vec![0.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn equal_bell_mixture_is_separable() {
        let m = (pure(1.0).matrix() + pure(-1.0).matrix()) * C64::new(0.5, 0.0);
        let rho = DensityMatrix::new(LevelSet::TwoLevel, m).unwrap();
        assert_abs_diff_eq!(concurrence(&rho).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ground_split_is_pure_ground() {
        let rho = assemble_reduced(&unit(0));
        assert_eq!(rho.matrix()[(0, 0)], C64::new(1.0, 0.0));
        assert_abs_diff_eq!(rho.trace(), 1.0);
    }

    #[test]
    fn dark_and_shelved_halves() {
        let split =
            PopulationSplit { p_dark: Some(0.5), p_33: Some(0.5), ..PopulationSplit::closed(0.0, 0.0, 0.0, 0.0) };
        let rho = assemble_reduced(&split);
        assert_eq!(rho.dim(), 9);
        rho.validate().unwrap();
        let l = |i| Level::from_index(i).unwrap();
        assert_abs_diff_eq!(rho.element((l(3), l(3)), (l(3), l(3))).re, 0.5);
        assert_abs_diff_eq!(rho.element((l(1), l(2)), (l(2), l(1))).re, -0.25);
        assert_abs_diff_eq!(bell_fraction(&rho), 0.5, epsilon = 1e-12);
        assert!(concurrence(&rho).is_err());
    }

    #[test]
    fn bell_fraction_edge_cases() {
        let l = |i| Level::from_index(i).unwrap();
        let mut v = DVector::zeros(9);
        v[LevelSet::ThreeLevel.atom_index(l(3), l(3))] = C64::new(1.0, 0.0);
        let shelved = DensityMatrix::pure(LevelSet::ThreeLevel, &v).unwrap();
        assert_eq!(bell_fraction(&shelved), 0.0);
        let plus = DensityMatrix::pure(LevelSet::ThreeLevel, &bell_state(LevelSet::ThreeLevel, 1.0)).unwrap();
        assert_abs_diff_eq!(bell_fraction(&plus), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn maximum_population_split_gives_zero() {
        let split = PopulationSplit::closed(0.317, 0.366, 0.211, 0.106);
        let arg = closed_form_argument(&split).unwrap();
        // √0.083 − 2√0.0640 with the rounded populations
        assert!((arg - (0.0832f64.sqrt() - 2.0 * 0.0640f64.sqrt())).abs() < 2e-3, "{arg}");
        assert_eq!(concurrence_closed_form(&split).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_start_without_pumping() {
        let split = PopulationSplit { p_dark: Some(0.5), ..PopulationSplit::closed(0.5, 0.0, 0.0, 0.0) };
        assert_abs_diff_eq!(concurrence_closed_form(&split).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(concurrence(&assemble_reduced(&split)).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn unsupported_dark_weight() {
        let split = PopulationSplit { p_dark: Some(0.3), ..PopulationSplit::closed(0.7, 0.0, 0.0, 0.0) };
        assert!(closed_form_argument(&split).is_err());
    }

    #[test]
    fn gradient_at_symmetric_point() {
        // S = P_s2 + 2P_o′ = 3/4, T = 2P_o′ + P_s2 + 4P_g + 2P_s1 = 9/4, 𝒜 = 1/√(ST) = 4/(3√3)
        let g = concurrence_gradient(&PopulationSplit::closed(0.25, 0.25, 0.25, 0.25)).unwrap();
        let a = 4.0 / (3.0 * 3f64.sqrt());
        assert_abs_diff_eq!(g[1], 0.5 - a * 1.5 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0], -a * 3.0 / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_rejects_boundary() {
        assert!(concurrence_gradient(&PopulationSplit::closed(0.5, 0.5, 0.0, 0.0)).is_err());
    }

    #[test]
    fn diagonal_states_are_separable() {
        for d in [[0.1, 0.2, 0.3, 0.4], [0.25; 4], [0.0, 0.5, 0.5, 0.0]] {
            let m = DMatrix::from_diagonal(&DVector::from_iterator(4, d.iter().map(|&x| C64::new(x, 0.0))));
            let rho = DensityMatrix::new(LevelSet::TwoLevel, m).unwrap();
            assert_eq!(concurrence(&rho).unwrap(), 0.0);
        }
    }

    fn arb_split() -> impl Strategy<Value = PopulationSplit> {
        prop::array::uniform4(0.0..1.0f64).prop_filter_map("non-zero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| PopulationSplit::closed(w[0] / s, w[1] / s, w[2] / s, w[3] / s))
        })
    }

    proptest! {
        #[test]
        fn closed_form_matches_generic_route(split in arb_split()) {
            let generic = concurrence(&assemble_reduced(&split)).unwrap();
            let closed = concurrence_closed_form(&split).unwrap();
            prop_assert!((generic - closed).abs() <= 1e-10, "{generic} vs {closed}");
            let x = x_state_argument(&assemble_reduced(&split)).unwrap();
            prop_assert!((x - closed_form_argument(&split).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn asymmetric_closed_form_matches_generic_route(split in arb_split()) {
            let half = PopulationSplit {
                p_g: split.p_g / 2.0,
                p_s1: split.p_s1 / 2.0,
                p_s2: split.p_s2 / 2.0,
                p_oprime2: split.p_oprime2 / 2.0,
                p_dark: Some(0.5),
                p_33: None,
            };
            let generic = concurrence(&assemble_reduced(&half)).unwrap();
            prop_assert!((generic - concurrence_closed_form(&half).unwrap()).abs() <= 1e-10);
            let x = x_state_argument(&assemble_reduced(&half)).unwrap();
            prop_assert!((x - closed_form_argument(&half).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn reduced_states_are_valid(split in arb_split()) {
            prop_assert!(assemble_reduced(&split).validate().is_ok());
        }
    }
}
